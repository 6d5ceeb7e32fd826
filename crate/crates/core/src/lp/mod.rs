//! Linear-programming kernel.
//!
//! Problems are `min c·x  s.t.  A x = b,  l <= x <= u` with finite lower
//! bounds (default 0) and optional upper bounds. [`solve`] runs a dense
//! two-phase simplex in whatever [`Scalar`] the problem is written in, so
//! `f64` gives the float mode and [`Rational`](crate::Rational) the exact one.
//! Every verdict carries a certificate that [`LpSolution::verify`] checks
//! without touching the solver.

mod simplex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default `ε_lp` for float mode.
pub const DEFAULT_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    /// Equality rows, each of length `objective.len()`.
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<Option<T>>,
}

impl<T: Scalar> LpProblem<T> {
    /// Minimization with `x >= 0` and no upper bounds.
    pub fn new(objective: Vec<T>, rows: Vec<Vec<T>>, rhs: Vec<T>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows,
            rhs,
            lower: vec![T::zero(); n],
            upper: vec![None; n],
        }
    }

    pub fn with_upper(mut self, var: usize, bound: T) -> Self {
        self.upper[var] = Some(bound);
        self
    }

    pub fn with_lower(mut self, var: usize, bound: T) -> Self {
        self.lower[var] = bound;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let n = self.objective.len();
        if self.rhs.len() != self.rows.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} right-hand sides",
                self.rows.len(),
                self.rhs.len()
            )));
        }
        if let Some((i, r)) = self.rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {i} has {} coefficients, expected {n}",
                r.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension(format!(
                "bounds cover {}/{} variables, expected {n}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        Ok(())
    }

    fn row_dot(&self, i: usize, x: &[T]) -> T {
        self.rows[i]
            .iter()
            .zip(x)
            .filter(|(a, _)| !a.is_zero())
            .fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone())
    }

    fn col_dot(&self, j: usize, y: &[T]) -> T {
        self.rows
            .iter()
            .zip(y)
            .filter(|(r, _)| !r[j].is_zero())
            .fold(T::zero(), |acc, (r, v)| acc + r[j].clone() * v.clone())
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Evidence for a verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate<T> {
    /// Row multipliers `y`; optimality follows from the KKT conditions.
    Dual { y: Vec<T> },
    /// Farkas multipliers on the rows (`y`) and on the upper bounds (`z`, zero
    /// where a variable has none): `Aᵀy + z <= 0`, `z <= 0` and
    /// `(b - A l)·y + (u - l)·z > 0`.
    Farkas { y: Vec<T>, z: Vec<T> },
    /// Improving direction: `A d = 0`, `d >= 0`, `d_j = 0` where `u_j` is set, `c·d < 0`.
    Ray { direction: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Optimal objective value (only for [`LpStatus::Optimal`]).
    pub value: Option<T>,
    /// Primal point: optimal for `Optimal`, feasible for `Unbounded`, empty otherwise.
    pub primal: Vec<T>,
    pub certificate: Certificate<T>,
    pub pivots: usize,
}

/// Solves `problem`, classifying phase-one residuals up to `eps` as feasible.
/// Pass zero in exact mode.
pub fn solve<T: Scalar>(problem: &LpProblem<T>, eps: &T) -> Result<LpSolution<T>> {
    problem.check_dimensions()?;
    simplex::Simplex::new(problem, eps.clone()).run()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T> {
    Feasible(Vec<T>),
    Infeasible(Certificate<T>),
}

/// Feasibility of `A x = b` within `lower <= x <= upper`.
pub fn feasibility<T: Scalar>(
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    lower: Vec<T>,
    upper: Vec<Option<T>>,
    eps: &T,
) -> Result<Feasibility<T>> {
    let n = lower.len();
    let problem = LpProblem {
        objective: vec![T::zero(); n],
        rows,
        rhs,
        lower,
        upper,
    };
    let sol = solve(&problem, eps)?;
    Ok(match sol.status {
        LpStatus::Infeasible => Feasibility::Infeasible(sol.certificate),
        _ => Feasibility::Feasible(sol.primal),
    })
}

impl<T: Scalar> LpSolution<T> {
    /// Re-checks the verdict against `problem` from scratch, to tolerance `eps`.
    pub fn verify(&self, problem: &LpProblem<T>, eps: &T) -> std::result::Result<(), String> {
        match (&self.status, &self.certificate) {
            (LpStatus::Optimal, Certificate::Dual { y }) => {
                check_primal(problem, &self.primal, eps)?;
                check_kkt(problem, &self.primal, y, eps)?;
                if let Some(v) = &self.value {
                    let direct = problem.objective_value(&self.primal);
                    if (direct.clone() - v.clone()).abs() > *eps {
                        return Err(format!("reported value {v} but c·x = {direct}"));
                    }
                }
                Ok(())
            }
            (LpStatus::Infeasible, Certificate::Farkas { y, z }) => check_farkas(problem, y, z, eps),
            (LpStatus::Unbounded, Certificate::Ray { direction }) => {
                check_primal(problem, &self.primal, eps)?;
                check_ray(problem, direction, eps)
            }
            (status, _) => Err(format!("certificate does not match status {status:?}")),
        }
    }
}

fn check_primal<T: Scalar>(p: &LpProblem<T>, x: &[T], eps: &T) -> std::result::Result<(), String> {
    if x.len() != p.num_vars() {
        return Err(format!("primal has {} entries, expected {}", x.len(), p.num_vars()));
    }
    for (j, v) in x.iter().enumerate() {
        if *v < p.lower[j].clone() - eps.clone() {
            return Err(format!("x[{j}] = {v} below lower bound {}", p.lower[j]));
        }
        if let Some(u) = &p.upper[j] {
            if *v > u.clone() + eps.clone() {
                return Err(format!("x[{j}] = {v} above upper bound {u}"));
            }
        }
    }
    for i in 0..p.num_rows() {
        let r = p.row_dot(i, x) - p.rhs[i].clone();
        if r.abs() > *eps {
            return Err(format!("row {i} residual {r}"));
        }
    }
    Ok(())
}

fn check_kkt<T: Scalar>(p: &LpProblem<T>, x: &[T], y: &[T], eps: &T) -> std::result::Result<(), String> {
    if y.len() != p.num_rows() {
        return Err("dual vector has wrong length".into());
    }
    for j in 0..p.num_vars() {
        let reduced = p.objective[j].clone() - p.col_dot(j, y);
        let at_lower = (x[j].clone() - p.lower[j].clone()).abs() <= *eps;
        let at_upper = p.upper[j]
            .as_ref()
            .is_some_and(|u| (u.clone() - x[j].clone()).abs() <= *eps);
        let ok = if reduced > *eps {
            at_lower
        } else if reduced < -eps.clone() {
            at_upper
        } else {
            true
        };
        if !ok {
            return Err(format!("reduced cost {reduced} of x[{j}] = {} violates KKT", x[j]));
        }
    }
    Ok(())
}

fn check_farkas<T: Scalar>(
    p: &LpProblem<T>,
    y: &[T],
    z: &[T],
    eps: &T,
) -> std::result::Result<(), String> {
    if y.len() != p.num_rows() || z.len() != p.num_vars() {
        return Err("Farkas vectors have wrong length".into());
    }
    let mut gap = T::zero();
    for (i, yi) in y.iter().enumerate() {
        gap = gap + (p.rhs[i].clone() - p.row_dot(i, &p.lower)) * yi.clone();
    }
    for j in 0..p.num_vars() {
        let aty = p.col_dot(j, y);
        match &p.upper[j] {
            Some(u) => {
                if z[j] > *eps {
                    return Err(format!("z[{j}] = {} is positive", z[j]));
                }
                if aty.clone() + z[j].clone() > *eps {
                    return Err(format!("column {j}: (Aᵀy + z) = {} > 0", aty + z[j].clone()));
                }
                gap = gap + (u.clone() - p.lower[j].clone()) * z[j].clone();
            }
            None => {
                if !z[j].is_zero() {
                    return Err(format!("z[{j}] set for a variable without upper bound"));
                }
                if aty > *eps {
                    return Err(format!("column {j}: (Aᵀy) = {aty} > 0"));
                }
            }
        }
    }
    if gap <= *eps {
        return Err(format!("Farkas gap {gap} is not positive"));
    }
    Ok(())
}

fn check_ray<T: Scalar>(p: &LpProblem<T>, d: &[T], eps: &T) -> std::result::Result<(), String> {
    if d.len() != p.num_vars() {
        return Err("ray has wrong length".into());
    }
    for (j, v) in d.iter().enumerate() {
        if *v < -eps.clone() {
            return Err(format!("ray component {j} negative"));
        }
        if p.upper[j].is_some() && v.abs() > *eps {
            return Err(format!("ray moves bounded variable {j}"));
        }
    }
    for i in 0..p.num_rows() {
        if p.row_dot(i, d).abs() > *eps {
            return Err(format!("ray leaves row {i}"));
        }
    }
    let slope = p.objective_value(d);
    if slope >= -eps.clone() {
        return Err(format!("ray slope {slope} is not negative"));
    }
    Ok(())
}
