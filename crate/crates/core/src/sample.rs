//! Seeded random behaviors for sweeps and batch experiments.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution as _, Exp1};

use crate::behavior::{from_correlators, tuple_digits, tuple_index, Behavior};
use crate::scenario::Scenario;

/// A point drawn uniformly from the probability simplex of dimension `len - 1`.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|v| v / total).collect()
}

/// Independent uniform table per context (disturbing in general).
pub fn independent_tables<R: Rng + ?Sized>(rng: &mut R, s: &Arc<Scenario>) -> Behavior<f64> {
    let tables = (0..s.contexts().len())
        .map(|i| dirichlet(rng, s.tuple_count(i)))
        .collect();
    Behavior::new(s.clone(), tables).expect("dirichlet tables are valid")
}

/// Context marginals of the signed global distribution `(1+t)·D1 - t·D2`.
///
/// `D1`, `D2` are uniform over global distributions and `t ~ U[0, 1/2]`;
/// `t` is halved until every marginal entry is nonnegative. The result is
/// nondisturbing and, for `t > 0`, often contextual.
pub fn nondisturbing<R: Rng + ?Sized>(rng: &mut R, s: &Arc<Scenario>) -> Behavior<f64> {
    let size = s.assignment_count() as usize;
    let d1 = dirichlet(rng, size);
    let d2 = dirichlet(rng, size);
    let mut t: f64 = rng.random_range(0.0..0.5);
    for _ in 0..64 {
        let q: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (1.0 + t) * a - t * b).collect();
        let tables = context_marginals(s, &q);
        if tables.iter().flatten().all(|p| *p >= 0.0) {
            return Behavior::new(s.clone(), tables).expect("marginals of a normalized vector");
        }
        t /= 2.0;
    }
    Behavior::new(s.clone(), context_marginals(s, &d1)).expect("marginals of a distribution")
}

/// Context tables `A·q` for a (possibly signed) weight vector over global assignments.
pub fn context_marginals(s: &Scenario, q: &[f64]) -> Vec<Vec<f64>> {
    let k = s.outcomes().len();
    let nm = s.measurements().len();
    let mut tables: Vec<Vec<f64>> = (0..s.contexts().len()).map(|i| vec![0.0; s.tuple_count(i)]).collect();
    for (j, w) in q.iter().enumerate() {
        let digits = tuple_digits(j, nm, k);
        for (table, ctx) in tables.iter_mut().zip(s.contexts()) {
            let sub: Vec<usize> = ctx.iter().map(|&m| digits[m]).collect();
            table[tuple_index(&sub, k)] += w;
        }
    }
    tables
}

/// Replaces one random context's table by `(1-δ)·table + δ·D`, with `D`
/// uniform on the simplex. The move has total variation at most `δ`.
pub fn disturb<R: Rng + ?Sized>(rng: &mut R, b: &Behavior<f64>, delta: f64) -> Behavior<f64> {
    if delta <= 0.0 {
        return b.clone();
    }
    let ctx = rng.random_range(0..b.scenario().contexts().len());
    let mut tables: Vec<Vec<f64>> = b.tables().iter().map(|t| t.probs().to_vec()).collect();
    let noise = dirichlet(rng, tables[ctx].len());
    for (p, d) in tables[ctx].iter_mut().zip(noise) {
        *p = (1.0 - delta) * *p + delta * d;
    }
    Behavior::new(b.scenario_arc().clone(), tables).expect("convex combination of valid tables")
}

fn correlator_in_range<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let lo = (a + b).abs() - 1.0;
    let hi = 1.0 - (a - b).abs();
    rng.random_range(lo..=hi)
}

/// n-cycle behavior with one expectation per measurement and pair
/// correlators uniform over their feasible interval.
pub fn nondisturbing_cycle<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Behavior<f64> {
    let m: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let pairs: Vec<f64> = (0..n).map(|i| correlator_in_range(rng, m[i], m[(i + 1) % n])).collect();
    from_correlators(n, &pairs, &m).expect("correlators drawn inside the feasible region")
}

/// n-cycle behavior whose contexts draw their own single expectations.
pub fn disturbing_cycle<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Behavior<f64> {
    let mut singles = Vec::with_capacity(2 * n);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let l = rng.random_range(-1.0..=1.0);
        let r = rng.random_range(-1.0..=1.0);
        pairs.push(correlator_in_range(rng, l, r));
        singles.extend([l, r]);
    }
    from_correlators(n, &pairs, &singles).expect("correlators drawn inside the feasible region")
}
