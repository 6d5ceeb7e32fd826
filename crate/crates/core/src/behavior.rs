//! Behaviors: one outcome distribution per context.
//!
//! Tables are indexed lexicographically by the outcome indices of the
//! context's measurements, first measurement most significant.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::{self, Rational, Scalar};
use crate::scenario::{Scenario, ScenarioSpec};

/// Default tolerance for [`Behavior::is_nondisturbing`].
pub const DEFAULT_DISTURBANCE_TOL: f64 = 1e-7;

/// Digits of `index` in base `base`, most significant first.
pub fn tuple_digits(mut index: usize, arity: usize, base: usize) -> Vec<usize> {
    let mut digits = vec![0; arity];
    for d in digits.iter_mut().rev() {
        *d = index % base;
        index /= base;
    }
    digits
}

pub fn tuple_index(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

/// A probability vector over the outcome tuples of one context.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    /// Validates against `tol`: entries `>= -tol` (small negatives clamp to 0)
    /// and a total within `tol` of one.
    pub fn new(mut probs: Vec<T>, tol: &T) -> std::result::Result<Self, String> {
        if probs.is_empty() {
            return Err("empty distribution".to_string());
        }
        let neg_tol = -tol.clone();
        for (i, p) in probs.iter_mut().enumerate() {
            if *p < neg_tol {
                return Err(format!("entry {i} is negative ({p})"));
            }
            if p.is_negative() {
                *p = T::zero();
            }
        }
        let total = scalar::sum(&probs);
        if (total.clone() - T::one()).abs() > *tol {
            return Err(format!("entries sum to {total}, not 1"));
        }
        Ok(Self { probs })
    }

    /// Wraps a vector the caller has already validated.
    pub fn from_unchecked(probs: Vec<T>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<T> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> T {
        scalar::sum(&self.probs)
    }

    /// Marginal onto the listed positions (indices into the tuple), in that order.
    pub fn marginal_positions(&self, arity: usize, base: usize, positions: &[usize]) -> Self {
        let mut out = vec![T::zero(); base.pow(positions.len() as u32)];
        for (idx, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let digits = tuple_digits(idx, arity, base);
            let sub: Vec<usize> = positions.iter().map(|&k| digits[k]).collect();
            let target = &mut out[tuple_index(&sub, base)];
            *target = target.clone() + p.clone();
        }
        let total = scalar::sum(&out);
        if !total.is_zero() && !total.is_one() {
            for v in out.iter_mut() {
                *v = v.clone() / total.clone();
            }
        }
        Self { probs: out }
    }
}

/// One distribution per context of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior<T> {
    scenario: Arc<Scenario>,
    tables: Vec<Distribution<T>>,
}

/// Where two contexts disagree the most on their shared measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceReport<T> {
    pub nondisturbing: bool,
    pub max_violation: T,
    pub location: Option<DisturbanceLocation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisturbanceLocation {
    pub contexts: (usize, usize),
    pub measurements: Vec<String>,
    pub outcomes: Vec<String>,
}

impl<T: Scalar> Behavior<T> {
    pub fn new(scenario: Arc<Scenario>, tables: Vec<Vec<T>>) -> Result<Self> {
        Self::with_tolerance(scenario, tables, &T::prob_tolerance())
    }

    pub fn with_tolerance(scenario: Arc<Scenario>, tables: Vec<Vec<T>>, tol: &T) -> Result<Self> {
        if tables.len() != scenario.contexts().len() {
            return Err(Error::TableCount {
                expected: scenario.contexts().len(),
                got: tables.len(),
            });
        }
        let tables = tables
            .into_iter()
            .enumerate()
            .map(|(ci, probs)| {
                let expected = scenario.tuple_count(ci);
                if probs.len() != expected {
                    return Err(Error::InvalidTable {
                        context: ci,
                        reason: format!("expected {expected} entries, got {}", probs.len()),
                    });
                }
                Distribution::new(probs, tol)
                    .map_err(|reason| Error::InvalidTable { context: ci, reason })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scenario, tables })
    }

    pub(crate) fn from_parts(scenario: Arc<Scenario>, tables: Vec<Distribution<T>>) -> Self {
        debug_assert_eq!(scenario.contexts().len(), tables.len());
        Self { scenario, tables }
    }

    /// Uniform distribution on every context.
    pub fn uniform(scenario: Arc<Scenario>) -> Self {
        let tables = (0..scenario.contexts().len())
            .map(|ci| {
                let k = scenario.tuple_count(ci);
                Distribution::from_unchecked(vec![T::one() / T::from_usize_exact(k); k])
            })
            .collect();
        Self { scenario, tables }
    }

    /// The behavior induced by one global assignment (outcome index per measurement).
    pub fn deterministic(scenario: Arc<Scenario>, assignment: &[usize]) -> Self {
        let base = scenario.outcomes().len();
        let tables = scenario
            .contexts()
            .iter()
            .enumerate()
            .map(|(ci, ctx)| {
                let mut probs = vec![T::zero(); scenario.tuple_count(ci)];
                let digits: Vec<usize> = ctx.iter().map(|&m| assignment[m]).collect();
                probs[tuple_index(&digits, base)] = T::one();
                Distribution::from_unchecked(probs)
            })
            .collect();
        Self { scenario, tables }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn scenario_arc(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn tables(&self) -> &[Distribution<T>] {
        &self.tables
    }

    pub fn table(&self, context: usize) -> &Distribution<T> {
        &self.tables[context]
    }

    /// All table entries concatenated in context order.
    pub fn flat(&self) -> Vec<T> {
        self.tables
            .iter()
            .flat_map(|t| t.probs.iter().cloned())
            .collect()
    }

    /// Marginal of one context's table onto an ordered sub-list of its measurements.
    pub fn marginal<S: AsRef<str>>(&self, context: usize, subset: &[S]) -> Result<Distribution<T>> {
        let ctx = self.scenario.context(context)?;
        let positions = subset
            .iter()
            .map(|name| {
                let m = self.scenario.measurement_index(name.as_ref())?;
                ctx.iter().position(|&x| x == m).ok_or_else(|| Error::NotInContext {
                    context,
                    measurement: name.as_ref().to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.marginal_positions(context, &positions))
    }

    pub(crate) fn marginal_positions(&self, context: usize, positions: &[usize]) -> Distribution<T> {
        let arity = self.scenario.contexts()[context].len();
        self.tables[context].marginal_positions(arity, self.scenario.outcomes().len(), positions)
    }

    /// Single-measurement marginal of `measurement` (an index) taken from `context`.
    pub fn single_marginal(&self, context: usize, measurement: usize) -> Distribution<T> {
        let pos = self.scenario.contexts()[context]
            .iter()
            .position(|&m| m == measurement)
            .expect("measurement belongs to context");
        self.marginal_positions(context, &[pos])
    }

    /// Checks that overlapping contexts agree on their shared measurements within `tol`.
    pub fn is_nondisturbing(&self, tol: &T) -> DisturbanceReport<T> {
        let s = &*self.scenario;
        let mut worst = T::zero();
        let mut location = None;
        for i in 0..s.contexts().len() {
            for j in (i + 1)..s.contexts().len() {
                let shared: Vec<usize> = s.contexts()[i]
                    .iter()
                    .copied()
                    .filter(|m| s.contexts()[j].contains(m))
                    .collect();
                if shared.is_empty() {
                    continue;
                }
                let pos = |c: usize| -> Vec<usize> {
                    shared
                        .iter()
                        .map(|m| s.contexts()[c].iter().position(|x| x == m).unwrap())
                        .collect()
                };
                let mi = self.marginal_positions(i, &pos(i));
                let mj = self.marginal_positions(j, &pos(j));
                for (k, (a, b)) in mi.probs.iter().zip(&mj.probs).enumerate() {
                    let diff = (a.clone() - b.clone()).abs();
                    if diff > worst {
                        worst = diff;
                        let digits = tuple_digits(k, shared.len(), s.outcomes().len());
                        location = Some(DisturbanceLocation {
                            contexts: (i, j),
                            measurements: shared.iter().map(|&m| s.measurements()[m].clone()).collect(),
                            outcomes: digits
                                .iter()
                                .map(|&d| s.outcomes().labels()[d].clone())
                                .collect(),
                        });
                    }
                }
            }
        }
        DisturbanceReport {
            nondisturbing: worst <= *tol,
            max_violation: worst,
            location,
        }
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Behavior<U> {
        Behavior {
            scenario: self.scenario.clone(),
            tables: self
                .tables
                .iter()
                .map(|t| Distribution::from_unchecked(t.probs.iter().map(&f).collect()))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> Behavior<f64> {
        self.map_scalar(|v| v.approx())
    }

    /// Behavior JSON: the scenario inline plus the tables.
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "scenario": serde_json::to_value(self.scenario.to_spec()).expect("scenario serializes"),
            "tables": self.tables.iter()
                .map(|t| Value::Array(t.probs.iter().map(Scalar::to_json).collect()))
                .collect::<Vec<_>>(),
        })
    }

    /// Parses behavior JSON. A string `scenario` is a path resolved against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: BehaviorFile = serde_json::from_str(text)?;
        let scenario = match raw.scenario {
            ScenarioRef::Inline(spec) => {
                crate::scenario::validate(&spec).map_err(Error::InvalidScenario)?
            }
            ScenarioRef::Path(p) => {
                let path = match base_dir {
                    Some(dir) => dir.join(&p),
                    None => p.into(),
                };
                Scenario::from_path(path)?
            }
        };
        let tables = raw
            .tables
            .iter()
            .enumerate()
            .map(|(ci, row)| {
                row.iter()
                    .enumerate()
                    .map(|(k, v)| parse_prob::<T>(v).ok_or_else(|| Error::InvalidTable {
                        context: ci,
                        reason: format!("entry {k} is not a probability: {v}"),
                    }))
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(Arc::new(scenario), tables)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text, path.parent())
    }
}

impl Behavior<f64> {
    /// Exact copy of a float behavior; each table is rescaled to sum exactly to one.
    pub fn to_exact(&self) -> Behavior<Rational> {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let mut probs = scalar::to_exact(&t.probs);
                let total = scalar::sum(&probs);
                for p in probs.iter_mut() {
                    *p = p.clone() / total.clone();
                }
                Distribution::from_unchecked(probs)
            })
            .collect();
        Behavior {
            scenario: self.scenario.clone(),
            tables,
        }
    }
}

fn parse_prob<T: Scalar>(v: &Value) -> Option<T> {
    match v {
        Value::Number(n) => T::parse_str(&n.to_string()),
        Value::String(s) => T::parse_str(s),
        _ => None,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorFile {
    scenario: ScenarioRef,
    tables: Vec<Vec<Value>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioRef {
    Path(String),
    Inline(ScenarioSpec),
}

/// Builds an n-cycle behavior from correlators.
///
/// `pairs[i]` is `<i (i+1)>` in context `i`. `singles` holds either `n`
/// values `<i>` shared by both contexts containing `i`, or `2n` values
/// listed per context: `<i>` then `<i+1>` as measured in context `i`.
pub fn from_correlators<T: Scalar>(n: usize, pairs: &[T], singles: &[T]) -> Result<Behavior<T>> {
    let scenario = Arc::new(Scenario::n_cycle(n)?);
    if pairs.len() != n {
        return Err(Error::InfeasibleCorrelators(format!(
            "expected {n} pair correlators, got {}",
            pairs.len()
        )));
    }
    let per_context: Vec<(T, T)> = if singles.len() == n {
        (0..n)
            .map(|i| (singles[i].clone(), singles[(i + 1) % n].clone()))
            .collect()
    } else if singles.len() == 2 * n {
        (0..n)
            .map(|i| (singles[2 * i].clone(), singles[2 * i + 1].clone()))
            .collect()
    } else {
        return Err(Error::InfeasibleCorrelators(format!(
            "expected {n} or {} single expectations, got {}",
            2 * n,
            singles.len()
        )));
    };
    let one = T::one();
    let quarter = one.clone() / T::from_usize_exact(4);
    let mut tables = Vec::with_capacity(n);
    for (i, (left, right)) in per_context.into_iter().enumerate() {
        for (what, v) in [("pair", &pairs[i]), ("single", &left), ("single", &right)] {
            if v.abs() > one {
                return Err(Error::InfeasibleCorrelators(format!(
                    "context {i}: {what} correlator {v} outside [-1, 1]"
                )));
            }
        }
        let mut probs = Vec::with_capacity(4);
        for a in [-one.clone(), one.clone()] {
            for b in [-one.clone(), one.clone()] {
                let p = (one.clone()
                    + a.clone() * left.clone()
                    + b.clone() * right.clone()
                    + a.clone() * b.clone() * pairs[i].clone())
                    * quarter.clone();
                if p.is_negative() {
                    return Err(Error::InfeasibleCorrelators(format!(
                        "context {i}: p({a},{b}) = {p} < 0"
                    )));
                }
                probs.push(p);
            }
        }
        tables.push(Distribution::from_unchecked(probs));
    }
    Ok(Behavior::from_parts(scenario, tables))
}
