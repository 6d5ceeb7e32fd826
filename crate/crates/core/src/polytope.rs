//! The noncontextual polytope: deterministic vertices, the incidence matrix
//! `A` with `B = A·λ`, and the traditional and extended decisions.

use std::ops::Range;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::behavior::{tuple_digits, tuple_index, Behavior};
use crate::coupling::{self, CouplingPolicy, Multimaximal, MAX_MULTIMAXIMAL_ARITY};
use crate::error::{Error, Result};
use crate::extension::{self, ExtendedScenario};
use crate::lp::{self, Certificate, Feasibility, LpProblem, LpStatus};
use crate::scalar::Scalar;
use crate::scenario::Scenario;

/// Default limit on the number of deterministic global assignments.
pub const DEFAULT_VERTEX_CAP: u128 = 1 << 20;

/// Witness vectors longer than this are dropped from JSON reports.
pub const WITNESS_JSON_LIMIT: usize = 4096;

/// Solver settings shared by every decision and quantifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Options<T> {
    /// `ε_lp`; zero in exact mode.
    pub eps: T,
    pub cap: u128,
}

impl<T: Scalar> Default for Options<T> {
    fn default() -> Self {
        Self {
            eps: T::pivot_tolerance() * T::from_usize_exact(100),
            cap: DEFAULT_VERTEX_CAP,
        }
    }
}

impl<T: Scalar> Options<T> {
    pub fn new(eps: T, cap: u128) -> Self {
        Self { eps, cap }
    }
}

/// The 0/1 matrix whose columns are the deterministic behaviors.
///
/// Column `j` is the assignment whose digits (base `|O|`, first measurement
/// most significant) are the outcome indices; rows are `(context, tuple)`
/// pairs in context order. Stored as the row index of the single 1 per
/// context in each column.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMatrix {
    scenario: Arc<Scenario>,
    offsets: Vec<usize>,
    rows: usize,
    cols: usize,
    ones: Vec<u32>,
}

pub fn vertex_matrix(s: &Scenario, cap: u128) -> Result<VertexMatrix> {
    let required = s.assignment_count();
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    let cols = required as usize;
    let k = s.outcomes().len();
    let nm = s.measurements().len();
    let mut offsets = Vec::with_capacity(s.contexts().len());
    let mut rows = 0;
    for i in 0..s.contexts().len() {
        offsets.push(rows);
        rows += s.tuple_count(i);
    }
    let mut ones = Vec::with_capacity(cols * offsets.len());
    for j in 0..cols {
        let digits = tuple_digits(j, nm, k);
        for (ctx, off) in s.contexts().iter().zip(&offsets) {
            let sub: Vec<usize> = ctx.iter().map(|&m| digits[m]).collect();
            ones.push((off + tuple_index(&sub, k)) as u32);
        }
    }
    Ok(VertexMatrix {
        scenario: Arc::new(s.clone()),
        offsets,
        rows,
        cols,
        ones,
    })
}

impl VertexMatrix {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn num_contexts(&self) -> usize {
        self.offsets.len()
    }

    pub fn context_rows(&self, context: usize) -> Range<usize> {
        let start = self.offsets[context];
        start..start + self.scenario.tuple_count(context)
    }

    /// Row index of the 1 in column `j`, one per context.
    pub fn ones(&self, j: usize) -> &[u32] {
        let c = self.num_contexts();
        &self.ones[j * c..(j + 1) * c]
    }

    pub fn assignment(&self, j: usize) -> Vec<usize> {
        tuple_digits(j, self.scenario.measurements().len(), self.scenario.outcomes().len())
    }

    /// Dense copy of the rows in `range`.
    pub fn dense<T: Scalar>(&self, range: Range<usize>) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.cols]; range.len()];
        for j in 0..self.cols {
            for &r in self.ones(j) {
                let r = r as usize;
                if range.contains(&r) {
                    out[r - range.start][j] = T::one();
                }
            }
        }
        out
    }

    /// `A·λ`.
    pub fn apply<T: Scalar>(&self, lambda: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (j, w) in lambda.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for &r in self.ones(j) {
                out[r as usize] = out[r as usize].clone() + w.clone();
            }
        }
        out
    }
}

/// Largest absolute entry of `A·λ - B`.
pub fn residual<T: Scalar>(matrix: &VertexMatrix, lambda: &[T], b: &Behavior<T>) -> T {
    let rows = 0..matrix.num_rows();
    max_residual(&matrix.apply(lambda)[rows], &b.flat())
}

fn max_residual<T: Scalar>(got: &[T], want: &[T]) -> T {
    got.iter()
        .zip(want)
        .fold(T::zero(), |m, (a, b)| T::max_of(&m, &(a.clone() - b.clone()).abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evidence<T> {
    /// No convex combination of vertices reproduces the behavior.
    Farkas(Certificate<T>),
    /// `Σ μ(x)` exceeds the best `Σ m^q(x)` over consistent extended distributions.
    Deficit { mu_total: T, achieved: T, deficit: T },
    /// A shared measurement has no multimaximal coupling.
    NoMultimaximalCoupling(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision<T> {
    /// `witness` is a distribution over (possibly extended) global assignments.
    Noncontextual { witness: Vec<T>, residual: T },
    Contextual(Evidence<T>),
}

impl<T: Scalar> Decision<T> {
    pub fn is_noncontextual(&self) -> bool {
        matches!(self, Decision::Noncontextual { .. })
    }

    pub fn to_json(&self, with_witness: bool) -> Value {
        match self {
            Decision::Noncontextual { witness, residual } => {
                let mut v = json!({"verdict": "noncontextual", "residual": residual.to_json()});
                if with_witness && witness.len() <= WITNESS_JSON_LIMIT {
                    v["witness"] = vector_json(witness);
                }
                v
            }
            Decision::Contextual(evidence) => {
                let mut v = json!({"verdict": "contextual"});
                match evidence {
                    Evidence::Farkas(cert) => {
                        if with_witness {
                            v["certificate"] = certificate_json(cert);
                        }
                    }
                    Evidence::Deficit {
                        mu_total,
                        achieved,
                        deficit,
                    } => {
                        v["mu_total"] = mu_total.to_json();
                        v["achieved"] = achieved.to_json();
                        v["deficit"] = deficit.to_json();
                    }
                    Evidence::NoMultimaximalCoupling(x) => {
                        v["reason"] = json!(format!("no multimaximal coupling for `{x}`"));
                    }
                }
                v
            }
        }
    }
}

pub(crate) fn vector_json<T: Scalar>(v: &[T]) -> Value {
    Value::Array(v.iter().map(Scalar::to_json).collect())
}

pub(crate) fn certificate_json<T: Scalar>(cert: &Certificate<T>) -> Value {
    match cert {
        Certificate::Dual { y } => json!({"dual": vector_json(y)}),
        Certificate::Farkas { y, z } => json!({"farkas": {"y": vector_json(y), "z": vector_json(z)}}),
        Certificate::Ray { direction } => json!({"ray": vector_json(direction)}),
    }
}

/// Traditional noncontextuality: is `B = A·λ` for some distribution `λ`?
pub fn is_noncontextual<T: Scalar>(b: &Behavior<T>, opts: &Options<T>) -> Result<Decision<T>> {
    let matrix = vertex_matrix(b.scenario(), opts.cap)?;
    let mut rows = matrix.dense::<T>(0..matrix.num_rows());
    let mut rhs = b.flat();
    rows.push(vec![T::one(); matrix.num_cols()]);
    rhs.push(T::one());
    let n = matrix.num_cols();
    match lp::feasibility(rows, rhs, vec![T::zero(); n], vec![None; n], &opts.eps)? {
        Feasibility::Feasible(lambda) => {
            let residual = residual(&matrix, &lambda, b);
            Ok(Decision::Noncontextual {
                witness: lambda,
                residual,
            })
        }
        Feasibility::Infeasible(cert) => Ok(Decision::Contextual(Evidence::Farkas(cert))),
    }
}

/// Linear data over extended global assignments `q` that the extended
/// decision and the coupling-deficit quantifiers share.
#[derive(Debug, Clone)]
pub struct ExtendedSystem<T> {
    pub extended: ExtendedScenario,
    /// Vertex matrix of the extended scenario (all contexts).
    pub matrix: VertexMatrix,
    /// Rows of the Original contexts: `rows·q = rhs` means `q` reproduces `B`.
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    /// One row per coupled measurement: `equality[t]·q = m^q(x)`.
    pub equality: Vec<Vec<T>>,
    /// `μ(x)` per coupled measurement.
    pub mu: Vec<T>,
}

pub fn extended_system<T: Scalar>(b: &Behavior<T>, cap: u128) -> Result<ExtendedSystem<T>> {
    let extended = extension::extend(b.scenario());
    let matrix = vertex_matrix(extended.ext(), cap)?;
    let originals = extended.original_count();
    let original_rows = 0..matrix.context_rows(originals.saturating_sub(1)).end;
    let rows = matrix.dense::<T>(original_rows);
    let rhs = b.flat();
    let mut equality = Vec::new();
    let mut mu = Vec::new();
    for (t, &x) in extended.coupled_measurements().iter().enumerate() {
        equality.push(subset_equality_row(&matrix, originals + t, None));
        mu.push(coupling::mu(&extension::copy_marginals(b, x))?);
    }
    Ok(ExtendedSystem {
        extended,
        matrix,
        rows,
        rhs,
        equality,
        mu,
    })
}

/// Indicator over columns: the copies at `subset` positions of coupling
/// context `context` (all of them for `None`) take equal values.
fn subset_equality_row<T: Scalar>(matrix: &VertexMatrix, context: usize, subset: Option<&[usize]>) -> Vec<T> {
    let arity = matrix.scenario().contexts()[context].len();
    let k = matrix.scenario().outcomes().len();
    let start = matrix.offsets[context];
    (0..matrix.num_cols())
        .map(|j| {
            let tuple = matrix.ones(j)[context] as usize - start;
            let digits = tuple_digits(tuple, arity, k);
            let equal = match subset {
                None => digits.windows(2).all(|w| w[0] == w[1]),
                Some(s) => s.windows(2).all(|w| digits[w[0]] == digits[w[1]]),
            };
            if equal {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect()
}

impl<T: Scalar> ExtendedSystem<T> {
    pub fn mu_total(&self) -> T {
        crate::scalar::sum(&self.mu)
    }

    /// `max Σ_x m^q(x)` over consistent `q`; returns the optimum and `q`.
    pub fn max_equality(&self, eps: &T) -> Result<(T, Vec<T>)> {
        let n = self.matrix.num_cols();
        let mut objective = vec![T::zero(); n];
        for row in &self.equality {
            for (c, v) in objective.iter_mut().zip(row) {
                if !v.is_zero() {
                    *c = c.clone() - v.clone();
                }
            }
        }
        let problem = LpProblem::new(objective, self.rows.clone(), self.rhs.clone());
        let sol = lp::solve(&problem, eps)?;
        match sol.status {
            LpStatus::Optimal => Ok((-sol.value.expect("optimal value"), sol.primal)),
            status => Err(Error::Parse(format!("extended consistency LP returned {status:?}"))),
        }
    }

    /// Largest residual of `q` against the Original-context rows.
    pub fn residual(&self, q: &[T]) -> T {
        let got: Vec<T> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(q)
                    .filter(|(a, _)| !a.is_zero())
                    .fold(T::zero(), |acc, (_, v)| acc + v.clone())
            })
            .collect();
        max_residual(&got, &self.rhs)
    }
}

/// Extended noncontextuality of a behavior on its base scenario.
///
/// Under [`CouplingPolicy::Maximal`] this is decided by the `M_u = 0`
/// characterization: one LP over extended global distributions consistent
/// with `B`, maximizing `Σ_x m^q(x)`, with no coupling enumerated. Under
/// [`CouplingPolicy::Multimaximal`] every subset equality is pinned to its
/// maximal value and feasibility is checked.
pub fn is_extended_noncontextual<T: Scalar>(
    b: &Behavior<T>,
    policy: CouplingPolicy,
    opts: &Options<T>,
) -> Result<Decision<T>> {
    let system = extended_system(b, opts.cap)?;
    match policy {
        CouplingPolicy::Maximal => {
            let (achieved, q) = system.max_equality(&opts.eps)?;
            let mu_total = system.mu_total();
            let deficit = mu_total.clone() - achieved.clone();
            if deficit <= opts.eps {
                let residual = system.residual(&q);
                Ok(Decision::Noncontextual { witness: q, residual })
            } else {
                Ok(Decision::Contextual(Evidence::Deficit {
                    mu_total,
                    achieved,
                    deficit,
                }))
            }
        }
        CouplingPolicy::Multimaximal => multimaximal_decision(b, system, opts),
    }
}

fn multimaximal_decision<T: Scalar>(
    b: &Behavior<T>,
    system: ExtendedSystem<T>,
    opts: &Options<T>,
) -> Result<Decision<T>> {
    let ExtendedSystem {
        extended,
        matrix,
        mut rows,
        mut rhs,
        ..
    } = system;
    let originals = extended.original_count();
    for (t, &x) in extended.coupled_measurements().iter().enumerate() {
        let marginals = extension::copy_marginals(b, x);
        let name = b.scenario().measurements()[x].clone();
        if marginals.len() > MAX_MULTIMAXIMAL_ARITY {
            return Err(Error::CouplingArity {
                min: 2,
                max: MAX_MULTIMAXIMAL_ARITY,
                got: marginals.len(),
            });
        }
        if let Multimaximal::DoesNotExist(_) = coupling::multimaximal_coupling(&marginals, &opts.eps)? {
            return Ok(Decision::Contextual(Evidence::NoMultimaximalCoupling(name)));
        }
        for subset in coupling::subsets_of_size_two_or_more(marginals.len()) {
            let members: Vec<_> = subset.iter().map(|&j| marginals[j].clone()).collect();
            rows.push(subset_equality_row(&matrix, originals + t, Some(&subset)));
            rhs.push(coupling::mu(&members)?);
        }
    }
    let n = matrix.num_cols();
    let n_original = b.flat().len();
    match lp::feasibility(rows.clone(), rhs.clone(), vec![T::zero(); n], vec![None; n], &opts.eps)? {
        Feasibility::Feasible(q) => {
            let got: Vec<T> = rows[..n_original]
                .iter()
                .map(|r| {
                    r.iter()
                        .zip(&q)
                        .filter(|(a, _)| !a.is_zero())
                        .fold(T::zero(), |acc, (_, v)| acc + v.clone())
                })
                .collect();
            let residual = max_residual(&got, &rhs[..n_original]);
            Ok(Decision::Noncontextual { witness: q, residual })
        }
        Feasibility::Infeasible(cert) => Ok(Decision::Contextual(Evidence::Farkas(cert))),
    }
}

/// Signed decompositions `B = A(λ⁺ - λ⁻)` over global assignments.
#[derive(Debug, Clone)]
pub struct QuasiSystem {
    pub matrix: VertexMatrix,
}

pub fn quasi_global_matrix(s: &Scenario, cap: u128) -> Result<QuasiSystem> {
    Ok(QuasiSystem {
        matrix: vertex_matrix(s, cap)?,
    })
}

impl QuasiSystem {
    /// `min Σ(λ⁺ + λ⁻)` subject to `A(λ⁺ - λ⁻) = B`; columns are `[λ⁺ | λ⁻]`.
    pub fn l1_problem<T: Scalar>(&self, b: &Behavior<T>) -> LpProblem<T> {
        let n = self.matrix.num_cols();
        let rows = self
            .matrix
            .dense::<T>(0..self.matrix.num_rows())
            .into_iter()
            .map(|r| {
                let neg: Vec<T> = r.iter().map(|v| -v.clone()).collect();
                r.into_iter().chain(neg).collect()
            })
            .collect();
        LpProblem::new(vec![T::one(); 2 * n], rows, b.flat())
    }

    /// Any solution `λ >= 0` of the signed system with `λ⁻ = 0`.
    pub fn nonnegative_solution<T: Scalar>(&self, b: &Behavior<T>, eps: &T) -> Result<Option<Vec<T>>> {
        let n = self.matrix.num_cols();
        let rows = self.matrix.dense::<T>(0..self.matrix.num_rows());
        Ok(match lp::feasibility(rows, b.flat(), vec![T::zero(); n], vec![None; n], eps)? {
            Feasibility::Feasible(x) => Some(x),
            Feasibility::Infeasible(_) => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::from_correlators;
    use crate::scalar::Rational;
    use num_traits::{One, Zero};

    fn fig1() -> Arc<Scenario> {
        Arc::new(Scenario::new(["x", "y", "z"], [vec!["x", "y"], vec!["y", "z"]], ["+1", "-1"]).unwrap())
    }

    fn pr_box<T: Scalar>() -> Behavior<T> {
        let one = T::one();
        from_correlators(4, &[one.clone(), one.clone(), one.clone(), -one], &vec![T::zero(); 4]).unwrap()
    }

    #[test]
    fn vertex_counts() {
        let e = extension::extend(&fig1());
        assert_eq!(vertex_matrix(e.ext(), DEFAULT_VERTEX_CAP).unwrap().num_cols(), 16);
        let c5 = Scenario::n_cycle(5).unwrap();
        assert_eq!(vertex_matrix(&c5, DEFAULT_VERTEX_CAP).unwrap().num_cols(), 32);
        let e5 = extension::extend(&c5);
        assert_eq!(vertex_matrix(e5.ext(), DEFAULT_VERTEX_CAP).unwrap().num_cols(), 1024);
    }

    #[test]
    fn single_measurement_columns_are_point_masses() {
        let s = Scenario::new(["x"], [vec!["x"]], ["0", "1"]).unwrap();
        let m = vertex_matrix(&s, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(m.num_cols(), 2);
        assert_eq!(m.dense::<f64>(0..2), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn every_column_is_a_deterministic_behavior() {
        let s = Scenario::n_cycle(4).unwrap();
        let m = vertex_matrix(&s, DEFAULT_VERTEX_CAP).unwrap();
        for j in 0..m.num_cols() {
            let mut e = vec![0.0; m.num_cols()];
            e[j] = 1.0;
            let col = m.apply(&e);
            for c in 0..m.num_contexts() {
                let mass: f64 = col[m.context_rows(c)].iter().sum();
                assert_eq!(mass, 1.0);
            }
            let det = Behavior::<f64>::deterministic(Arc::new(s.clone()), &m.assignment(j));
            assert_eq!(det.flat(), col);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let s = Scenario::n_cycle(5).unwrap();
        assert!(matches!(
            vertex_matrix(&s, 31),
            Err(Error::CapExceeded { required: 32, cap: 31 })
        ));
    }

    #[test]
    fn deterministic_behavior_is_noncontextual_with_basis_witness() {
        let s = Arc::new(Scenario::n_cycle(4).unwrap());
        let assignment = [1, 0, 1, 1];
        let b = Behavior::<Rational>::deterministic(s, &assignment);
        let Decision::Noncontextual { witness, residual } = is_noncontextual(&b, &Options::default()).unwrap() else {
            panic!("deterministic behaviors are noncontextual");
        };
        assert!(residual.is_zero());
        let j = tuple_index(&assignment, 2);
        assert!(witness[j].is_one());
        assert!(witness.iter().enumerate().all(|(i, w)| i == j || w.is_zero()));
    }

    #[test]
    fn pr_box_is_contextual() {
        let d = is_noncontextual(&pr_box::<Rational>(), &Options::default()).unwrap();
        let Decision::Contextual(Evidence::Farkas(Certificate::Farkas { y, .. })) = d else {
            panic!("PR box is contextual");
        };
        assert_eq!(y.len(), 17);
        assert!(!is_noncontextual(&pr_box::<f64>(), &Options::default()).unwrap().is_noncontextual());
    }

    #[test]
    fn uniform_behaviors_are_noncontextual() {
        for s in [Scenario::n_cycle(3).unwrap(), Scenario::n_cycle(5).unwrap(), (*fig1()).clone()] {
            let b = Behavior::<f64>::uniform(Arc::new(s));
            assert!(is_noncontextual(&b, &Options::default()).unwrap().is_noncontextual());
        }
    }

    #[test]
    fn pr_box_extended_is_contextual_with_deficit() {
        let d = is_extended_noncontextual(&pr_box::<Rational>(), CouplingPolicy::Maximal, &Options::default()).unwrap();
        let Decision::Contextual(Evidence::Deficit { deficit, mu_total, .. }) = d else {
            panic!("extended PR box is contextual");
        };
        assert_eq!(mu_total, Rational::from_integer(4.into()));
        assert!(deficit.is_one());
    }

    #[test]
    fn fig1_disturbing_behavior_extends() {
        let s = fig1();
        let b = Behavior::<Rational>::new(
            s,
            vec![
                vec![Rational::one(), Rational::zero(), Rational::zero(), Rational::zero()],
                vec![Rational::zero(), Rational::zero(), Rational::one(), Rational::zero()],
            ],
        )
        .unwrap();
        assert!(!is_noncontextual(&b, &Options::default()).unwrap().is_noncontextual());
        for policy in [CouplingPolicy::Maximal, CouplingPolicy::Multimaximal] {
            assert!(is_extended_noncontextual(&b, policy, &Options::default())
                .unwrap()
                .is_noncontextual());
        }
    }

    #[test]
    fn multimaximal_nonexistence_is_contextual_with_reason() {
        let s = Arc::new(
            Scenario::new(
                ["x", "a", "b", "c"],
                [vec!["x", "a"], vec!["x", "b"], vec!["x", "c"]],
                ["p", "q", "r"],
            )
            .unwrap(),
        );
        let q = |n: i64| Rational::new(n.into(), 3.into());
        let table = |entries: &[(usize, i64)]| {
            let mut t = vec![Rational::zero(); 9];
            for &(i, n) in entries {
                t[i] = q(n);
            }
            t
        };
        let b = Behavior::new(s, vec![table(&[(0, 2), (3, 1)]), table(&[(3, 1), (6, 2)]), table(&[(0, 1), (6, 2)])])
            .unwrap();
        let d = is_extended_noncontextual(&b, CouplingPolicy::Multimaximal, &Options::default()).unwrap();
        assert_eq!(d, Decision::Contextual(Evidence::NoMultimaximalCoupling("x".into())));
        assert!(d.to_json(false)["reason"].as_str().unwrap().contains('x'));
    }

    #[test]
    fn quasi_system_on_single_context() {
        let s = Arc::new(Scenario::new(["x", "y"], [vec!["x", "y"]], ["0", "1"]).unwrap());
        let b = Behavior::<f64>::new(s.clone(), vec![vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        let q = quasi_global_matrix(&s, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(q.nonnegative_solution(&b, &1e-7).unwrap().unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
        let q4 = quasi_global_matrix(pr_box::<f64>().scenario(), DEFAULT_VERTEX_CAP).unwrap();
        assert!(q4.nonnegative_solution(&pr_box::<f64>(), &1e-7).unwrap().is_none());
    }

    #[test]
    fn decision_json_shape() {
        let d = is_extended_noncontextual(&pr_box::<f64>(), CouplingPolicy::Maximal, &Options::default()).unwrap();
        let v = d.to_json(true);
        assert_eq!(v["verdict"], "contextual");
        assert!((v["deficit"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}
