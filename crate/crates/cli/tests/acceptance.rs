//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing libtest capture) and then asserts.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cbd_core::coupling::{canonical_maximal_coupling, mu, CouplingPolicy};
use cbd_core::lp::{self, LpProblem, LpStatus};
use cbd_core::ncycle::{extended_criterion, s_function, traditional_criterion, CycleCorrelators};
use cbd_core::polytope::{is_extended_noncontextual, is_noncontextual, Options};
use cbd_core::quantifiers::{contextual_fraction, l1_distance, m_deficit, mu_deficit, negativity, L1Flavor};
use cbd_core::{extend, from_correlators, lift_behavior, sample, Behavior64, BehaviorQ, Distribution, Rational, Scalar, Scenario};

const EPS_LP: f64 = 1e-7;
const BOUNDARY_WINDOW: f64 = 1e-6;
const QUANTIFIER_TOL: f64 = 1e-6;
const PER_CYCLE: usize = 1000;

fn report(criterion: u32, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} criterion {criterion}: {detail}");
}

fn q(s: &str) -> Rational {
    Rational::parse_str(s).expect("rational literal")
}

fn opts() -> Options<f64> {
    Options::new(EPS_LP, cbd_core::polytope::DEFAULT_VERTEX_CAP)
}

fn exact_opts() -> Options<Rational> {
    Options::new(q("0"), cbd_core::polytope::DEFAULT_VERTEX_CAP)
}

fn fig1() -> Arc<Scenario> {
    Arc::new(Scenario::new(["x", "y", "z"], [vec!["x", "y"], vec!["y", "z"]], ["+1", "-1"]).unwrap())
}

/// PR-box family `(v, ..., v, -v)` with zero singles.
fn pr_mixture(n: usize, v: f64) -> Behavior64 {
    let mut pairs = vec![v; n];
    pairs[n - 1] = -v;
    from_correlators(n, &pairs, &vec![0.0; n]).unwrap()
}

/// Seeded n-cycle sweep shared by the first two criteria.
fn cycle_sweep() -> &'static Vec<(usize, Behavior64)> {
    static SWEEP: OnceLock<Vec<(usize, Behavior64)>> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let mut out = Vec::new();
        for n in 3..=5 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + n as u64);
            let scenario = Arc::new(Scenario::n_cycle(n).unwrap());
            for i in 0..PER_CYCLE {
                let b = match i % 10 {
                    0..=3 => sample::disturbing_cycle(&mut rng, n),
                    4..=6 => sample::nondisturbing_cycle(&mut rng, n),
                    7 | 8 => {
                        let base = sample::nondisturbing(&mut rng, &scenario);
                        let delta = if i % 2 == 0 { 0.0 } else { 0.1 };
                        sample::disturb(&mut rng, &base, delta)
                    }
                    _ => {
                        let step = (i / 10) % 18;
                        let v = if step == 17 { (n - 2) as f64 / n as f64 } else { step as f64 / 16.0 };
                        pr_mixture(n, v)
                    }
                };
                out.push((n, b));
            }
        }
        out
    })
}

#[test]
fn criterion_1_cycle_lp_matches_closed_form() {
    let start = std::time::Instant::now();
    let results: Vec<(bool, bool)> = cycle_sweep()
        .par_iter()
        .map(|(_, b)| {
            let c = CycleCorrelators::from_behavior(b).unwrap();
            let closed = extended_criterion(&c, &BOUNDARY_WINDOW);
            if closed.boundary {
                let exact = b.to_exact();
                let cq = CycleCorrelators::from_behavior(&exact).unwrap();
                let verdict = extended_criterion(&cq, &q("0")).noncontextual;
                let lp = is_extended_noncontextual(&exact, CouplingPolicy::Maximal, &exact_opts()).unwrap();
                (lp.is_noncontextual() == verdict, true)
            } else {
                let lp = is_extended_noncontextual(b, CouplingPolicy::Maximal, &opts()).unwrap();
                (lp.is_noncontextual() == closed.noncontextual, false)
            }
        })
        .collect();
    let total = results.len();
    let agree = results.iter().filter(|r| r.0).count();
    let boundary = results.iter().filter(|r| r.1).count();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = agree == total && elapsed < 300.0;
    report(
        1,
        ok,
        &format!("{agree}/{total} LP verdicts match the closed form ({boundary} boundary cases decided exactly) in {elapsed:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_closed_form_quantifiers() {
    let mismatches: Vec<[bool; 3]> = cycle_sweep()
        .par_iter()
        .map(|(_, b)| {
            let c = CycleCorrelators::from_behavior(b).unwrap();
            let expected = extended_criterion(&c, &0.0).excess / 2.0;
            let lifted = lift_behavior(&extend(b.scenario()), b, CouplingPolicy::Maximal, &EPS_LP).unwrap();
            let off = |v: Option<f64>| v.is_none_or(|v| (v - expected).abs() > QUANTIFIER_TOL);
            [
                off(negativity(&lifted, &opts()).unwrap().value),
                off(l1_distance(&lifted, L1Flavor::Uniform, &opts()).unwrap().value),
                off(mu_deficit(b, &opts()).unwrap().value),
            ]
        })
        .collect();
    let total = mismatches.len();
    let bad: Vec<usize> = (0..3).map(|k| mismatches.iter().filter(|m| m[k]).count()).collect();
    let ok = bad.iter().all(|&b| b == 0);
    report(
        2,
        ok,
        &format!(
            "half-excess mismatches over {total} cycles: Negativity {}, L1Uniform {}, M_u {}",
            bad[0], bad[1], bad[2]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_pr_box() {
    let one = q("1");
    let pr: BehaviorQ = from_correlators(4, &[one.clone(), one.clone(), one.clone(), -one.clone()], &vec![q("0"); 4]).unwrap();
    let o = exact_opts();
    let c = CycleCorrelators::from_behavior(&pr).unwrap();
    let trad = traditional_criterion(&c, &q("0"));
    let ext = extended_criterion(&c, &q("0"));
    let lifted = lift_behavior(&extend(pr.scenario()), &pr, CouplingPolicy::Maximal, &q("0")).unwrap();
    let neg = negativity(&lifted, &o).unwrap().value.unwrap();
    let l1u = l1_distance(&lifted, L1Flavor::Uniform, &o).unwrap().value.unwrap();
    let mu_u = mu_deficit(&pr, &o).unwrap().value.unwrap();
    let cf = contextual_fraction(&pr, &o).unwrap().value.unwrap();
    let m = m_deficit(&pr, &o).unwrap().value.unwrap();
    let lp_contextual = !is_noncontextual(&pr, &o).unwrap().is_noncontextual();

    let close = |a: &Rational, b: &str| (a.clone() - q(b)).approx().abs() <= QUANTIFIER_TOL;
    let checks = [
        ("traditional s = 4", close(&trad.s, "4")),
        ("traditional contextual", !trad.noncontextual && lp_contextual),
        ("extended excess = 2", close(&ext.excess, "2")),
        ("Negativity = 1", close(&neg, "1")),
        ("L1Uniform = 1", close(&l1u, "1")),
        ("M_u = 1", close(&mu_u, "1")),
        ("CF = 1/2", close(&cf, "1/2")),
        ("M = M_u", (m.clone() - mu_u.clone()).approx().abs() <= QUANTIFIER_TOL),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let ok = failed.is_empty();
    report(
        3,
        ok,
        &format!(
            "s = {}, excess = {}, Negativity = {neg}, L1Uniform = {l1u}, M_u = {mu_u}, CF = {cf}, M = {m}; failed: [{}]",
            trad.s,
            ext.excess,
            failed.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_nondisturbing_reduction() {
    let scenarios = [("C4", Arc::new(Scenario::n_cycle(4).unwrap())), ("Fig1", fig1())];
    let mut details = Vec::new();
    let mut ok = true;
    for (k, (name, s)) in scenarios.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + k as u64);
        let samples: Vec<Behavior64> = (0..1000)
            .map(|i| {
                if *name == "C4" && i % 4 == 1 {
                    sample::nondisturbing_cycle(&mut rng, 4)
                } else if *name == "C4" && i % 4 == 3 {
                    pr_mixture(4, rng.random_range(0.0..=1.0))
                } else {
                    sample::nondisturbing(&mut rng, s)
                }
            })
            .collect();
        let verdicts: Vec<(bool, bool)> = samples
            .par_iter()
            .map(|b| {
                let ext = is_extended_noncontextual(b, CouplingPolicy::Maximal, &opts()).unwrap();
                let trad = is_noncontextual(b, &opts()).unwrap();
                (ext.is_noncontextual() == trad.is_noncontextual(), trad.is_noncontextual())
            })
            .collect();
        let agree = verdicts.iter().filter(|v| v.0).count();
        let noncontextual = verdicts.iter().filter(|v| v.1).count();
        ok &= agree == samples.len();
        details.push(format!("{name} {agree}/{} agree ({noncontextual} noncontextual)", samples.len()));
    }
    report(4, ok, &details.join(", "));
    assert!(ok);
}

/// Max-equality coupling LP written out over the joint table.
fn coupling_lp_optimum(marginals: &[Vec<f64>]) -> f64 {
    let l = marginals.len();
    let k = marginals[0].len();
    let cells = k.pow(l as u32);
    let digit = |cell: usize, j: usize| (cell / k.pow((l - 1 - j) as u32)) % k;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (j, m) in marginals.iter().enumerate() {
        for (a, p) in m.iter().enumerate() {
            rows.push((0..cells).map(|c| if digit(c, j) == a { 1.0 } else { 0.0 }).collect());
            rhs.push(*p);
        }
    }
    let objective = (0..cells)
        .map(|c| if (0..l).all(|j| digit(c, j) == digit(c, 0)) { -1.0 } else { 0.0 })
        .collect();
    let sol = lp::solve(&LpProblem::new(objective, rows, rhs), &1e-12).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    -sol.value.unwrap()
}

#[test]
fn criterion_5_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let families: Vec<Vec<Vec<f64>>> = (0..1000)
        .map(|_| {
            let l = rng.random_range(2..=4);
            let k = rng.random_range(2..=4);
            (0..l)
                .map(|_| {
                    let mut p = sample::dirichlet(&mut rng, k);
                    if rng.random_bool(0.3) {
                        let z = rng.random_range(0..k);
                        let moved = p[z];
                        p[z] = 0.0;
                        p[(z + 1) % k] += moved;
                    }
                    p
                })
                .collect()
        })
        .collect();
    let outcomes: Vec<(f64, f64)> = families
        .par_iter()
        .map(|fam| {
            let dists: Vec<Distribution<f64>> = fam.iter().map(|p| Distribution::new(p.clone(), &1e-12).unwrap()).collect();
            let formula = mu(&dists).unwrap();
            let lp_gap = (formula - coupling_lp_optimum(fam)).abs();
            let coupling = canonical_maximal_coupling(&dists).unwrap();
            let mut marginal_gap = (coupling.equality_probability() - formula).abs();
            for (j, d) in dists.iter().enumerate() {
                for (a, b) in coupling.joint_marginal(j).probs().iter().zip(d.probs()) {
                    marginal_gap = marginal_gap.max((a - b).abs());
                }
            }
            (lp_gap, marginal_gap)
        })
        .collect();
    let worst_lp = outcomes.iter().map(|o| o.0).fold(0.0, f64::max);
    let worst_marginal = outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
    let ok = worst_lp <= 1e-9 && worst_marginal <= 1e-12;
    report(
        5,
        ok,
        &format!(
            "{} families: max |formula - LP| = {worst_lp:.2e}, max canonical marginal/equality error = {worst_marginal:.2e}",
            families.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_fig1_always_extends() {
    let s = fig1();
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let samples: Vec<Behavior64> = (0..1000).map(|_| sample::independent_tables(&mut rng, &s)).collect();
    let disturbing = samples
        .iter()
        .filter(|b| !b.is_nondisturbing(&cbd_core::behavior::DEFAULT_DISTURBANCE_TOL).nondisturbing)
        .count();
    let extended = samples
        .par_iter()
        .filter(|b| is_extended_noncontextual(b, CouplingPolicy::Maximal, &opts()).unwrap().is_noncontextual())
        .count();
    let ok = extended == samples.len();
    report(
        6,
        ok,
        &format!("{extended}/{} extended-noncontextual ({disturbing} disturbing)", samples.len()),
    );
    assert!(ok);
}

#[test]
fn criterion_7_quantifiers_vanish_together() {
    let scenarios: Vec<Arc<Scenario>> = vec![
        Arc::new(Scenario::n_cycle(3).unwrap()),
        Arc::new(Scenario::n_cycle(4).unwrap()),
        Arc::new(Scenario::n_cycle(5).unwrap()),
        fig1(),
        Arc::new(Scenario::new(["a", "b", "c"], [vec!["a", "b"], vec!["b", "c"], vec!["c", "a"]], ["0", "1", "2"]).unwrap()),
        Arc::new(Scenario::new(["a", "b", "c", "d"], [vec!["a", "b", "c"], vec!["c", "d"]], ["0", "1"]).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let mut behaviors = Vec::new();
    for s in &scenarios {
        for i in 0..100 {
            let b = match i % 5 {
                0 | 1 => sample::nondisturbing(&mut rng, s),
                2 => {
                    let size = s.assignment_count() as usize;
                    let global = sample::dirichlet(&mut rng, size);
                    Behavior64::new(s.clone(), sample::context_marginals(s, &global)).unwrap()
                }
                3 => {
                    let base = sample::nondisturbing(&mut rng, s);
                    sample::disturb(&mut rng, &base, 0.05)
                }
                _ => sample::independent_tables(&mut rng, s),
            };
            behaviors.push(b);
        }
    }
    let threshold = 2.0 * EPS_LP;
    let rows: Vec<[bool; 4]> = behaviors
        .par_iter()
        .map(|b| {
            let o = opts();
            [
                contextual_fraction(b, &o).unwrap().value.unwrap() <= threshold,
                negativity(b, &o).unwrap().value.is_some_and(|v| v <= threshold),
                l1_distance(b, L1Flavor::Uniform, &o).unwrap().value.unwrap() <= threshold,
                is_noncontextual(b, &o).unwrap().is_noncontextual(),
            ]
        })
        .collect();
    let disagreements = rows.iter().filter(|r| r.iter().any(|v| *v != r[0])).count();
    let vanishing = rows.iter().filter(|r| r[3]).count();
    let ok = disagreements == 0;
    report(
        7,
        ok,
        &format!("{} behaviors, {vanishing} noncontextual, {disagreements} disagreements", rows.len()),
    );
    assert!(ok);
}

/// Max of `sum gamma_i z_i` over sign vectors with an odd number of minus
/// signs, for integer `z`, by Gray-code walk over all `2^k` sign vectors.
fn s_exhaustive(z: &[i64]) -> i64 {
    let k = z.len();
    let mut signs = vec![1i64; k];
    let mut sum: i64 = z.iter().sum();
    let mut negatives = 0usize;
    let mut best = i64::MIN;
    for step in 1..(1u64 << k) {
        let flip = step.trailing_zeros() as usize;
        signs[flip] = -signs[flip];
        sum += 2 * signs[flip] * z[flip];
        if signs[flip] < 0 {
            negatives += 1;
        } else {
            negatives -= 1;
        }
        if negatives % 2 == 1 {
            best = best.max(sum);
        }
    }
    best
}

#[test]
fn criterion_8_s_function_enumeration() {
    const DENOM: i64 = 840;
    let per_k = 10_000;
    let mismatches: usize = (1..=16usize)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(8000 + k as u64);
            let mut bad = 0;
            for _ in 0..per_k {
                let mut scaled = Vec::with_capacity(k);
                let mut exact = Vec::with_capacity(k);
                for _ in 0..k {
                    let num: i64 = rng.random_range(-20..=20);
                    let den: i64 = rng.random_range(1..=8);
                    scaled.push(num * (DENOM / den));
                    exact.push(q(&format!("{num}/{den}")));
                }
                let expected = q(&format!("{}/{DENOM}", s_exhaustive(&scaled)));
                if s_function(&exact) != expected {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    let ok = mismatches == 0;
    report(
        8,
        ok,
        &format!("{} rational vectors over k = 1..16, {mismatches} mismatches", 16 * per_k),
    );
    assert!(ok);
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn criterion_9_cli_determinism() {
    let pr = data("pr-box.behavior.json");
    let fig1_behavior = data("fig1.behavior.json");
    let invocations: Vec<Vec<String>> = [
        vec!["validate", &data("fig1.scenario.json"), "--behavior", &fig1_behavior],
        vec!["extend", &data("cycle5.scenario.json")],
        vec!["check", &pr, "--witness"],
        vec!["check", &pr, "--extended", "--witness"],
        vec!["--mode", "exact", "check", &pr, "--extended", "--policy", "multimaximal", "--witness"],
        vec!["check", &fig1_behavior, "--extended", "--witness"],
        vec!["quantify", &pr, "--measures", "cf,neg,l1u,l1max,l1tot,mu,m", "--witness"],
        vec!["--mode", "exact", "quantify", &pr, "--extended", "--measures", "cf,neg,l1u,mu,m"],
        vec!["ncycle", "--n", "4", "--pair", "1,1,1,-1"],
        vec!["--seed", "9", "random", &data("chsh.scenario.json"), "--count", "60", "--disturbance", "0.1"],
        vec!["--seed", "9", "random", &data("fig1.scenario.json"), "--count", "60", "--disturbance", "0.2"],
        vec!["--format", "table", "--seed", "3", "random", &data("cycle5.scenario.json"), "--count", "20"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();

    let run = |args: &[String], threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_cbd"))
            .args(args)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap()
    };
    let mut identical = 0;
    let mut failures = Vec::new();
    for args in &invocations {
        let a = run(args, "4");
        let b = run(args, "4");
        let c = run(args, "1");
        let same = a.stdout == b.stdout && a.stdout == c.stdout && a.status == b.status && a.status == c.status;
        let code = a.status.code();
        if same && !a.stdout.is_empty() && code.is_some_and(|c| c < 2) {
            identical += 1;
        } else {
            failures.push(args.join(" "));
        }
    }
    let ok = failures.is_empty();
    report(
        9,
        ok,
        &format!("{identical}/{} invocations byte-identical across repeated runs and thread counts", invocations.len()),
    );
    assert!(ok, "nondeterministic or failing: {failures:?}");
}
