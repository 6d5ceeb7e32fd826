//! Dense two-phase tableau simplex.
//!
//! Entering variable: most negative reduced cost (lowest index on ties).
//! After [`DEGENERATE_STREAK`] consecutive degenerate pivots the rule drops to
//! Bland's (lowest eligible index) until the objective strictly improves,
//! which rules out cycling. Leaving variable: minimum ratio, ties broken by
//! the lowest basic-variable index. Every choice is deterministic.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Certificate, LpProblem, LpSolution, LpStatus};

const DEGENERATE_STREAK: usize = 50;

pub(super) struct Simplex<'a, T> {
    problem: &'a LpProblem<T>,
    eps: T,
    tol: T,
    drop: T,
    /// Structural columns of the standard form (originals, then upper-bound slacks).
    n: usize,
    /// Constraint rows of the standard form (originals, then upper-bound rows).
    m: usize,
    /// `m` constraint rows, then the phase-two and phase-one cost rows.
    /// Columns: `n` structural, `m` artificial, then the right-hand side.
    tab: Vec<Vec<T>>,
    basis: Vec<usize>,
    live: Vec<bool>,
    flipped: Vec<bool>,
    /// `bounded[k]` = original variable owning upper-bound row `k`.
    bounded: Vec<usize>,
    pivots: usize,
}

impl<'a, T: Scalar> Simplex<'a, T> {
    pub(super) fn new(problem: &'a LpProblem<T>, eps: T) -> Self {
        let n0 = problem.num_vars();
        let m0 = problem.num_rows();
        let bounded: Vec<usize> = (0..n0).filter(|&j| problem.upper[j].is_some()).collect();
        let n = n0 + bounded.len();
        let m = m0 + bounded.len();
        let width = n + m + 1;
        let rhs_col = n + m;

        let mut tab = vec![vec![T::zero(); width]; m + 2];
        let mut flipped = vec![false; m];
        for i in 0..m0 {
            let row = &mut tab[i];
            let mut rhs = problem.rhs[i].clone();
            for (j, a) in problem.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    row[j] = a.clone();
                    rhs = rhs - a.clone() * problem.lower[j].clone();
                }
            }
            row[rhs_col] = rhs;
        }
        for (k, &j) in bounded.iter().enumerate() {
            let row = &mut tab[m0 + k];
            row[j] = T::one();
            row[n0 + k] = T::one();
            row[rhs_col] = problem.upper[j].clone().expect("bounded") - problem.lower[j].clone();
        }
        for (i, flip) in flipped.iter_mut().enumerate() {
            if tab[i][rhs_col].is_negative() {
                *flip = true;
                for v in tab[i].iter_mut() {
                    *v = -v.clone();
                }
            }
            tab[i][n + i] = T::one();
        }
        // Phase-two costs over the shifted variables.
        for j in 0..n0 {
            tab[m][j] = problem.objective[j].clone();
        }
        // Phase-one costs: artificials cost one, so d_j = -(column sum).
        for j in 0..n {
            let s = (0..m).fold(T::zero(), |acc, i| acc + tab[i][j].clone());
            tab[m + 1][j] = -s;
        }
        let total = (0..m).fold(T::zero(), |acc, i| acc + tab[i][rhs_col].clone());
        tab[m + 1][rhs_col] = -total;

        let tol = T::pivot_tolerance();
        let drop = tol.clone() / T::from_usize_exact(1000);
        Self {
            problem,
            eps,
            tol,
            drop,
            n,
            m,
            tab,
            basis: (n..n + m).collect(),
            live: vec![true; m],
            flipped,
            bounded,
            pivots: 0,
        }
    }

    fn rhs_col(&self) -> usize {
        self.n + self.m
    }

    fn pivot(&mut self, r: usize, e: usize) {
        self.pivots += 1;
        let piv = self.tab[r][e].clone();
        let nz: Vec<usize> = (0..self.tab[r].len())
            .filter(|&j| !self.tab[r][j].is_zero())
            .collect();
        for &j in &nz {
            self.tab[r][j] = self.tab[r][j].clone() / piv.clone();
        }
        self.tab[r][e] = T::one();
        let pivot_row = std::mem::take(&mut self.tab[r]);
        for (i, row) in self.tab.iter_mut().enumerate() {
            if i == r || row[e].is_zero() {
                continue;
            }
            let f = row[e].clone();
            for &j in &nz {
                let v = row[j].clone() - f.clone() * pivot_row[j].clone();
                row[j] = if v.abs() <= self.drop { T::zero() } else { v };
            }
            row[e] = T::zero();
        }
        self.tab[r] = pivot_row;
        self.basis[r] = e;
    }

    fn choose_entering(&self, cost_row: usize, bland: bool) -> Option<usize> {
        let costs = &self.tab[cost_row];
        let threshold = -self.tol.clone();
        let mut best: Option<usize> = None;
        for (j, d) in costs.iter().take(self.n).enumerate() {
            if *d >= threshold {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                Some(b) if costs[b] <= *d => {}
                _ => best = Some(j),
            }
        }
        best
    }

    /// Minimum-ratio row for entering column `e`; `None` when the column is unbounded.
    fn choose_leaving(&self, e: usize) -> Option<(usize, T)> {
        let rhs = self.rhs_col();
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.m {
            if !self.live[i] || self.tab[i][e] <= self.tol {
                continue;
            }
            let level = T::max_of(&self.tab[i][rhs], &T::zero());
            let ratio = level / self.tab[i][e].clone();
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let diff = ratio.clone() - br.clone();
                    if diff < -self.drop.clone()
                        || (diff.abs() <= self.drop && self.basis[i] < self.basis[bi])
                    {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best
    }

    fn iteration_limit(&self) -> usize {
        100_000 + 100 * (self.n + self.m)
    }

    /// Runs pivots on `cost_row` until optimal; returns an unbounded column if found.
    fn optimize(&mut self, cost_row: usize) -> Result<Option<usize>> {
        let mut streak = 0;
        loop {
            if self.pivots > self.iteration_limit() {
                return Err(Error::IterationLimit(self.pivots));
            }
            let Some(e) = self.choose_entering(cost_row, streak >= DEGENERATE_STREAK) else {
                return Ok(None);
            };
            let Some((r, ratio)) = self.choose_leaving(e) else {
                return Ok(Some(e));
            };
            if ratio <= self.drop {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, e);
        }
    }

    /// Moves artificials out of the basis after phase one; rows that cannot
    /// be cleared are linearly dependent and are retired.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            if !self.live[r] || self.basis[r] < self.n {
                continue;
            }
            let mut best: Option<usize> = None;
            for j in 0..self.n {
                let v = self.tab[r][j].abs();
                if v > self.tol && best.is_none_or(|b| v > self.tab[r][b].abs()) {
                    best = Some(j);
                }
            }
            match best {
                Some(j) => self.pivot(r, j),
                None => self.live[r] = false,
            }
        }
    }

    /// Row duals of the standard form read off the artificial columns.
    fn standard_duals(&self, cost_row: usize, phase_one: bool) -> Vec<T> {
        (0..self.m)
            .map(|k| {
                let d = self.tab[cost_row][self.n + k].clone();
                let y = if phase_one { T::one() - d } else { -d };
                let y = if !self.live[k] && !phase_one { T::zero() } else { y };
                if self.flipped[k] {
                    -y
                } else {
                    y
                }
            })
            .collect()
    }

    fn primal(&self) -> Vec<T> {
        let n0 = self.problem.num_vars();
        let mut x: Vec<T> = self.problem.lower.clone();
        let rhs = self.rhs_col();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n0 && self.live[i] {
                x[b] = x[b].clone() + self.tab[i][rhs].clone();
            }
        }
        // Clamp round-off below the bounds.
        for (j, v) in x.iter_mut().enumerate() {
            if *v < self.problem.lower[j] {
                *v = self.problem.lower[j].clone();
            }
            if let Some(u) = &self.problem.upper[j] {
                if *v > *u {
                    *v = u.clone();
                }
            }
        }
        x
    }

    pub(super) fn run(mut self) -> Result<LpSolution<T>> {
        let n0 = self.problem.num_vars();
        let m0 = self.problem.num_rows();
        let rhs = self.rhs_col();

        // Phase one cannot be unbounded: the objective is bounded below by zero.
        self.optimize(self.m + 1)?;
        let infeasibility = -self.tab[self.m + 1][rhs].clone();
        if infeasibility > self.eps {
            let y_std = self.standard_duals(self.m + 1, true);
            let mut z = vec![T::zero(); n0];
            for (k, &j) in self.bounded.iter().enumerate() {
                z[j] = y_std[m0 + k].clone();
            }
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: None,
                primal: Vec::new(),
                certificate: Certificate::Farkas {
                    y: y_std[..m0].to_vec(),
                    z,
                },
                pivots: self.pivots,
            });
        }

        self.expel_artificials();
        if let Some(e) = self.optimize(self.m)? {
            let mut d = vec![T::zero(); self.n];
            d[e] = T::one();
            for (i, &b) in self.basis.iter().enumerate() {
                if self.live[i] && b < self.n {
                    d[b] = -self.tab[i][e].clone();
                }
            }
            d.truncate(n0);
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                value: None,
                primal: self.primal(),
                certificate: Certificate::Ray { direction: d },
                pivots: self.pivots,
            });
        }

        let x = self.primal();
        let y_std = self.standard_duals(self.m, false);
        let value = self.problem.objective_value(&x);
        Ok(LpSolution {
            status: LpStatus::Optimal,
            value: Some(value),
            primal: x,
            certificate: Certificate::Dual {
                y: y_std[..m0].to_vec(),
            },
            pivots: self.pivots,
        })
    }
}
