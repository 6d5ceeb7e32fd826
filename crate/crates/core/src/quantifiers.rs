//! Contextuality quantifiers, each a single LP over the vertex matrix.
//!
//! All of them vanish exactly on the behaviors the matching decision calls
//! noncontextual. `M_u` and `M` are taken on the base behavior and measure
//! how far consistent extended global distributions fall short of maximal
//! couplings; the others apply to whatever scenario the behavior lives on,
//! so pass a lifted behavior to quantify extended contextuality.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::behavior::Behavior;
use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpStatus};
use crate::polytope::{self, vector_json, Options, WITNESS_JSON_LIMIT};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Quantifier {
    CF,
    Negativity,
    L1Uniform,
    L1Max,
    L1Total,
    Mu,
    M,
}

impl Quantifier {
    pub const ALL: [Quantifier; 7] = [
        Quantifier::CF,
        Quantifier::Negativity,
        Quantifier::L1Uniform,
        Quantifier::L1Max,
        Quantifier::L1Total,
        Quantifier::Mu,
        Quantifier::M,
    ];

    /// Short name used on the command line.
    pub fn key(self) -> &'static str {
        match self {
            Quantifier::CF => "cf",
            Quantifier::Negativity => "neg",
            Quantifier::L1Uniform => "l1u",
            Quantifier::L1Max => "l1max",
            Quantifier::L1Total => "l1tot",
            Quantifier::Mu => "mu",
            Quantifier::M => "m",
        }
    }

    /// True for the measures defined through couplings of the base scenario.
    pub fn is_coupling_deficit(self) -> bool {
        matches!(self, Quantifier::Mu | Quantifier::M)
    }
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Quantifier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Quantifier::ALL
            .into_iter()
            .find(|q| q.key() == s)
            .ok_or_else(|| format!("unknown measure `{s}` (expected one of cf, neg, l1u, l1max, l1tot, mu, m)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1Flavor {
    Uniform,
    Max,
    Total,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness<T> {
    /// Subnormalized weights on the deterministic vertices.
    Mixture(Vec<T>),
    /// Signed weights on global assignments.
    QuasiDistribution(Vec<T>),
    /// Flattened tables of the closest noncontextual behavior.
    NearestBehavior(Vec<T>),
    /// Distribution over extended global assignments.
    ExtendedGlobal(Vec<T>),
}

impl<T: Scalar> Witness<T> {
    pub fn values(&self) -> &[T] {
        match self {
            Witness::Mixture(v) | Witness::QuasiDistribution(v) | Witness::NearestBehavior(v) | Witness::ExtendedGlobal(v) => v,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Witness::Mixture(_) => "mixture",
            Witness::QuasiDistribution(_) => "quasi_distribution",
            Witness::NearestBehavior(_) => "nearest_behavior",
            Witness::ExtendedGlobal(_) => "extended_global",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantifierReport<T> {
    pub name: Quantifier,
    /// `None` when the measure is undefined, e.g. negativity of a disturbing behavior.
    pub value: Option<T>,
    pub witness: Option<Witness<T>>,
}

impl<T: Scalar> QuantifierReport<T> {
    pub fn to_json(&self, with_witness: bool) -> Value {
        let mut v = json!({
            "name": self.name,
            "value": self.value.as_ref().map_or(Value::Null, Scalar::to_json),
        });
        if with_witness {
            if let Some(w) = &self.witness {
                let values = if w.values().len() <= WITNESS_JSON_LIMIT {
                    vector_json(w.values())
                } else {
                    Value::Null
                };
                v["witness"] = json!({"kind": w.kind(), "values": values});
            }
        }
        v
    }
}

fn optimal<T: Scalar>(problem: &LpProblem<T>, eps: &T, what: &str) -> Result<(T, Vec<T>)> {
    let sol = lp::solve(problem, eps)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.value.expect("optimal value"), sol.primal)),
        status => Err(Error::Parse(format!("{what} LP returned {status:?}"))),
    }
}

fn clamp_nonnegative<T: Scalar>(v: T) -> T {
    if v.is_negative() {
        T::zero()
    } else {
        v
    }
}

/// `1 - max Σλ` subject to `Aλ <= B`, `λ >= 0`.
pub fn contextual_fraction<T: Scalar>(b: &Behavior<T>, opts: &Options<T>) -> Result<QuantifierReport<T>> {
    let matrix = polytope::vertex_matrix(b.scenario(), opts.cap)?;
    let (c, r) = (matrix.num_cols(), matrix.num_rows());
    let rows: Vec<Vec<T>> = matrix
        .dense::<T>(0..r)
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.extend((0..r).map(|k| if k == i { T::one() } else { T::zero() }));
            row
        })
        .collect();
    let objective: Vec<T> = (0..c + r).map(|j| if j < c { -T::one() } else { T::zero() }).collect();
    let (value, mut primal) = optimal(&LpProblem::new(objective, rows, b.flat()), &opts.eps, "contextual fraction")?;
    primal.truncate(c);
    Ok(QuantifierReport {
        name: Quantifier::CF,
        value: Some(clamp_nonnegative(T::one() + value)),
        witness: Some(Witness::Mixture(primal)),
    })
}

/// `min Σ|q| - 1` over signed global distributions `q` with `A q = B`.
/// Undefined (`None`) when no such `q` exists, which happens exactly for
/// disturbing behaviors.
pub fn negativity<T: Scalar>(b: &Behavior<T>, opts: &Options<T>) -> Result<QuantifierReport<T>> {
    let system = polytope::quasi_global_matrix(b.scenario(), opts.cap)?;
    let problem = system.l1_problem(b);
    let sol = lp::solve(&problem, &opts.eps)?;
    let report = match sol.status {
        LpStatus::Optimal => {
            let c = system.matrix.num_cols();
            let quasi = (0..c).map(|j| sol.primal[j].clone() - sol.primal[c + j].clone()).collect();
            QuantifierReport {
                name: Quantifier::Negativity,
                value: Some(clamp_nonnegative(sol.value.expect("optimal value") - T::one())),
                witness: Some(Witness::QuasiDistribution(quasi)),
            }
        }
        LpStatus::Infeasible => QuantifierReport {
            name: Quantifier::Negativity,
            value: None,
            witness: None,
        },
        LpStatus::Unbounded => return Err(Error::Parse("negativity LP is unbounded".into())),
    };
    Ok(report)
}

/// `ℓ1` distance from `B` to the noncontextual set: the whole-vector sum
/// (Total), its average over contexts (Uniform), or the worst context (Max).
pub fn l1_distance<T: Scalar>(b: &Behavior<T>, flavor: L1Flavor, opts: &Options<T>) -> Result<QuantifierReport<T>> {
    let matrix = polytope::vertex_matrix(b.scenario(), opts.cap)?;
    let (c, r) = (matrix.num_cols(), matrix.num_rows());
    let n_ctx = matrix.num_contexts();
    let with_max = flavor == L1Flavor::Max;
    // Columns: λ (c), e⁺ (r), e⁻ (r), then t and one slack per context for Max.
    let width = c + 2 * r + if with_max { 1 + n_ctx } else { 0 };
    let mut rows = matrix.dense::<T>(0..r);
    for (i, row) in rows.iter_mut().enumerate() {
        row.resize(width, T::zero());
        row[c + i] = T::one();
        row[c + r + i] = -T::one();
    }
    let mut rhs = b.flat();
    let mut norm = vec![T::zero(); width];
    norm[..c].fill(T::one());
    rows.push(norm);
    rhs.push(T::one());
    let mut objective = vec![T::zero(); width];
    if with_max {
        let t = c + 2 * r;
        for ctx in 0..n_ctx {
            let mut row = vec![T::zero(); width];
            for i in matrix.context_rows(ctx) {
                row[c + i] = T::one();
                row[c + r + i] = T::one();
            }
            row[t] = -T::one();
            row[t + 1 + ctx] = T::one();
            rows.push(row);
            rhs.push(T::zero());
        }
        objective[t] = T::one();
    } else {
        objective[c..c + 2 * r].fill(T::one());
    }
    let (value, primal) = optimal(&LpProblem::new(objective, rows, rhs), &opts.eps, "l1 distance")?;
    let nearest = matrix.apply(&primal[..c]);
    let (name, value) = match flavor {
        L1Flavor::Total => (Quantifier::L1Total, value),
        L1Flavor::Uniform => (Quantifier::L1Uniform, value / T::from_usize_exact(n_ctx)),
        L1Flavor::Max => (Quantifier::L1Max, value),
    };
    Ok(QuantifierReport {
        name,
        value: Some(clamp_nonnegative(value)),
        witness: Some(Witness::NearestBehavior(nearest)),
    })
}

/// `M_u = Σ_x μ(x) - max_q Σ_x m^q(x)` over extended global distributions
/// `q` consistent with `B`.
pub fn mu_deficit<T: Scalar>(b: &Behavior<T>, opts: &Options<T>) -> Result<QuantifierReport<T>> {
    let system = polytope::extended_system(b, opts.cap)?;
    let (achieved, q) = system.max_equality(&opts.eps)?;
    Ok(QuantifierReport {
        name: Quantifier::Mu,
        value: Some(clamp_nonnegative(system.mu_total() - achieved)),
        witness: Some(Witness::ExtendedGlobal(q)),
    })
}

/// `M = min_q max_x [μ(x) - m^q(x)]`, as an epigraph LP.
pub fn m_deficit<T: Scalar>(b: &Behavior<T>, opts: &Options<T>) -> Result<QuantifierReport<T>> {
    let system = polytope::extended_system(b, opts.cap)?;
    let c = system.matrix.num_cols();
    let nx = system.equality.len();
    // Columns: q (c), t, one slack per coupled measurement.
    let width = c + 1 + nx;
    let mut rows: Vec<Vec<T>> = system
        .rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.resize(width, T::zero());
            r
        })
        .collect();
    let mut rhs = system.rhs.clone();
    for (t, eq) in system.equality.iter().enumerate() {
        let mut row = eq.clone();
        row.resize(width, T::zero());
        row[c] = T::one();
        row[c + 1 + t] = -T::one();
        rows.push(row);
        rhs.push(system.mu[t].clone());
    }
    let mut objective = vec![T::zero(); width];
    objective[c] = T::one();
    let (value, mut primal) = optimal(&LpProblem::new(objective, rows, rhs), &opts.eps, "max deficit")?;
    primal.truncate(c);
    Ok(QuantifierReport {
        name: Quantifier::M,
        value: Some(clamp_nonnegative(value)),
        witness: Some(Witness::ExtendedGlobal(primal)),
    })
}

pub fn quantify<T: Scalar>(b: &Behavior<T>, which: Quantifier, opts: &Options<T>) -> Result<QuantifierReport<T>> {
    match which {
        Quantifier::CF => contextual_fraction(b, opts),
        Quantifier::Negativity => negativity(b, opts),
        Quantifier::L1Uniform => l1_distance(b, L1Flavor::Uniform, opts),
        Quantifier::L1Max => l1_distance(b, L1Flavor::Max, opts),
        Quantifier::L1Total => l1_distance(b, L1Flavor::Total, opts),
        Quantifier::Mu => mu_deficit(b, opts),
        Quantifier::M => m_deficit(b, opts),
    }
}
