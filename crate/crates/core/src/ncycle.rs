//! Closed forms for n-cycle scenarios.
//!
//! Context `i` holds measurements `i` and `i+1` (mod n). Outcomes are read as
//! ±1, so a context is described by its two single expectations and its
//! pair correlator. Measurement `i` is seen from context `i-1`
//! (`single_left[i]`) and from context `i` (`single_right[i]`); the two
//! differ only for disturbing behaviors.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::behavior::{tuple_digits, Behavior};
use crate::error::{Error, Result};
use crate::quantifiers::Quantifier;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CycleCorrelators<T> {
    pub n: usize,
    /// `⟨i (i+1)⟩` measured in context `i`.
    pub pair: Vec<T>,
    /// `⟨i⟩` measured in context `i-1`.
    pub single_left: Vec<T>,
    /// `⟨i⟩` measured in context `i`.
    pub single_right: Vec<T>,
}

fn in_unit_range<T: Scalar>(v: &T) -> bool {
    v.abs() <= T::one()
}

impl<T: Scalar> CycleCorrelators<T> {
    pub fn new(pair: Vec<T>, single_left: Vec<T>, single_right: Vec<T>) -> Result<Self> {
        let n = pair.len();
        if n < 3 {
            return Err(Error::CycleTooSmall(n));
        }
        if single_left.len() != n || single_right.len() != n {
            return Err(Error::InfeasibleCorrelators(format!(
                "expected {n} left and {n} right singles, got {} and {}",
                single_left.len(),
                single_right.len()
            )));
        }
        let c = Self {
            n,
            pair,
            single_left,
            single_right,
        };
        for (what, v) in [("pair", &c.pair), ("single", &c.single_left), ("single", &c.single_right)] {
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !in_unit_range(*x)) {
                return Err(Error::InfeasibleCorrelators(format!("{what} {i} = {x} is outside [-1, 1]")));
            }
        }
        for i in 0..n {
            let (l, r, e) = c.context(i);
            for a in [-T::one(), T::one()] {
                for b in [-T::one(), T::one()] {
                    let p = T::one() + a.clone() * l.clone() + b.clone() * r.clone() + a.clone() * b.clone() * e.clone();
                    if p < -T::prob_tolerance() {
                        return Err(Error::InfeasibleCorrelators(format!(
                            "context {i}: p({a},{b}) = {} < 0",
                            p / T::from_usize_exact(4)
                        )));
                    }
                }
            }
        }
        Ok(c)
    }

    /// Nondisturbing correlators: each measurement has one expectation.
    pub fn nondisturbing(pair: Vec<T>, singles: Vec<T>) -> Result<Self> {
        Self::new(pair, singles.clone(), singles)
    }

    /// `(⟨i⟩, ⟨i+1⟩, ⟨i (i+1)⟩)` as measured in context `i`.
    pub fn context(&self, i: usize) -> (T, T, T) {
        let next = (i + 1) % self.n;
        (
            self.single_right[i].clone(),
            self.single_left[next].clone(),
            self.pair[i].clone(),
        )
    }

    pub fn is_nondisturbing(&self) -> bool {
        self.single_left == self.single_right
    }

    /// Correlators of a behavior on any scenario shaped like an n-cycle.
    ///
    /// The cycle is walked from measurement 0 through its lowest-index
    /// context. Outcome labels `"-1"` and `"+1"`/`"1"` keep their sign; other
    /// binary alphabets read outcome 0 as −1.
    pub fn from_behavior(b: &Behavior<T>) -> Result<Self> {
        let order = cycle_order(b)?;
        let signs = outcome_signs::<T>(b.scenario().outcomes().labels());
        let n = order.len();
        let mut pair = Vec::with_capacity(n);
        let mut left = vec![T::zero(); n];
        let mut right = vec![T::zero(); n];
        for (i, &(ctx, m_here, m_next)) in order.iter().enumerate() {
            let members = &b.scenario().contexts()[ctx];
            let pos_here = members.iter().position(|&m| m == m_here).expect("member");
            let pos_next = members.iter().position(|&m| m == m_next).expect("member");
            let (mut e_here, mut e_next, mut e_pair) = (T::zero(), T::zero(), T::zero());
            for (idx, p) in b.table(ctx).probs().iter().enumerate() {
                let d = tuple_digits(idx, 2, 2);
                let (a, c) = (signs[d[pos_here]].clone(), signs[d[pos_next]].clone());
                e_here = e_here + a.clone() * p.clone();
                e_next = e_next + c.clone() * p.clone();
                e_pair = e_pair + a * c * p.clone();
            }
            pair.push(e_pair);
            right[i] = e_here;
            left[(i + 1) % n] = e_next;
        }
        // Float sums can overshoot ±1 by an ulp.
        let clamp = |v: Vec<T>| -> Vec<T> { v.into_iter().map(|x| T::max_of(&T::min_of(&x, &T::one()), &-T::one())).collect() };
        Self::new(clamp(pair), clamp(left), clamp(right))
    }

    /// The `2n` entries fed to `s` for the extended test: pair correlators
    /// interleaved with the maximal-coupling correlators, in cycle order.
    pub fn extended_vector(&self) -> Vec<T> {
        let mut z = Vec::with_capacity(2 * self.n);
        for i in 0..self.n {
            let next = (i + 1) % self.n;
            z.push(self.pair[i].clone());
            z.push(coupling_term(&self.single_left[next], &self.single_right[next]));
        }
        z
    }
}

fn outcome_signs<T: Scalar>(labels: &[String]) -> [T; 2] {
    let sign = |l: &str| match l.trim() {
        "-1" => Some(-T::one()),
        "+1" | "1" => Some(T::one()),
        _ => None,
    };
    match (sign(&labels[0]), sign(&labels[1])) {
        (Some(a), Some(b)) if a != b => [a, b],
        _ => [-T::one(), T::one()],
    }
}

/// Walks the cycle: returns `(context, measurement, next measurement)` per step.
fn cycle_order<T: Scalar>(b: &Behavior<T>) -> Result<Vec<(usize, usize, usize)>> {
    let s = b.scenario();
    let n = s.measurements().len();
    if s.outcomes().len() != 2 {
        return Err(Error::NotACycle(format!("{} outcomes, need 2", s.outcomes().len())));
    }
    if n < 3 || s.contexts().len() != n {
        return Err(Error::NotACycle(format!(
            "{n} measurements and {} contexts",
            s.contexts().len()
        )));
    }
    if let Some(i) = s.contexts().iter().position(|c| c.len() != 2) {
        return Err(Error::NotACycle(format!("context {i} does not have two measurements")));
    }
    if let Some(m) = (0..n).find(|&m| s.contexts_containing(m).len() != 2) {
        return Err(Error::NotACycle(format!(
            "measurement `{}` is not in exactly two contexts",
            s.measurements()[m]
        )));
    }
    let mut order = Vec::with_capacity(n);
    let mut m = 0;
    let mut ctx = s.contexts_containing(0)[0];
    for _ in 0..n {
        let c = &s.contexts()[ctx];
        let next = if c[0] == m { c[1] } else { c[0] };
        order.push((ctx, m, next));
        let holders = s.contexts_containing(next);
        ctx = if holders[0] == ctx { holders[1] } else { holders[0] };
        m = next;
    }
    if m != 0 || order.iter().map(|o| o.0).collect::<std::collections::BTreeSet<_>>().len() != n {
        return Err(Error::NotACycle("contexts form more than one cycle".into()));
    }
    Ok(order)
}

/// `max Σ γ_i z_i` over sign vectors with an odd number of −1 entries.
///
/// With an even number of negative `z_i` the best odd-parity choice flips
/// the sign of the smallest `|z_i|`; otherwise `γ_i = sign(z_i)` is already
/// odd.
pub fn s_function<T: Scalar>(z: &[T]) -> T {
    let total = z.iter().fold(T::zero(), |acc, v| acc + v.abs());
    let negatives = z.iter().filter(|v| v.is_negative()).count();
    if negatives % 2 == 1 {
        return total;
    }
    let smallest = z
        .iter()
        .map(|v| v.abs())
        .reduce(|a, b| T::min_of(&a, &b))
        .unwrap_or_else(T::zero);
    total - smallest.clone() - smallest
}

fn coupling_term<T: Scalar>(left: &T, right: &T) -> T {
    T::one() - (left.clone() - right.clone()).abs()
}

/// Correlator of the maximal coupling of two ±1 variables with the given
/// expectations: `1 - |left - right|`.
pub fn coupling_correlator<T: Scalar>(left: &T, right: &T) -> Result<T> {
    if !in_unit_range(left) || !in_unit_range(right) {
        return Err(Error::InfeasibleCorrelators(format!(
            "expectations ({left}, {right}) are outside [-1, 1]"
        )));
    }
    Ok(coupling_term(left, right))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult<T> {
    pub s: T,
    pub bound: T,
    /// `max(s - bound, 0)`.
    pub excess: T,
    pub noncontextual: bool,
    /// `s` lies within `eps` of the bound.
    pub boundary: bool,
}

impl<T: Scalar> CriterionResult<T> {
    fn evaluate(s: T, bound: T, eps: &T) -> Self {
        let gap = s.clone() - bound.clone();
        let excess = T::max_of(&gap, &T::zero());
        Self {
            noncontextual: gap <= *eps,
            boundary: gap.abs() <= *eps,
            s,
            bound,
            excess,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "verdict": if self.noncontextual { "noncontextual" } else { "contextual" },
            "s": self.s.to_json(),
            "bound": self.bound.to_json(),
            "excess": self.excess.to_json(),
            "boundary": self.boundary,
        })
    }
}

/// Extended noncontextuality test: `s` of the interleaved `2n`-vector
/// against `2n - 2`.
pub fn extended_criterion<T: Scalar>(c: &CycleCorrelators<T>, eps: &T) -> CriterionResult<T> {
    let bound = T::from_usize_exact(2 * c.n - 2);
    CriterionResult::evaluate(s_function(&c.extended_vector()), bound, eps)
}

/// Traditional test `s(pair) <= n - 2`, valid for nondisturbing correlators.
pub fn traditional_criterion<T: Scalar>(c: &CycleCorrelators<T>, eps: &T) -> CriterionResult<T> {
    let bound = T::from_usize_exact(c.n - 2);
    CriterionResult::evaluate(s_function(&c.pair), bound, eps)
}

/// `½·max{s - (2n - 2), 0}` for Negativity, L1Uniform and Mu on the
/// extended cycle.
pub fn closed_form_quantifiers<T: Scalar>(c: &CycleCorrelators<T>) -> BTreeMap<Quantifier, T> {
    let excess = extended_criterion(c, &T::zero()).excess;
    let half = excess / T::from_usize_exact(2);
    [Quantifier::Negativity, Quantifier::L1Uniform, Quantifier::Mu]
        .into_iter()
        .map(|q| (q, half.clone()))
        .collect()
}
