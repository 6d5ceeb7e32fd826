use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use cbd_core::coupling::CouplingPolicy;
use cbd_core::extension::{extend as extend_scenario, lift_behavior};
use cbd_core::ncycle::{self, CycleCorrelators};
use cbd_core::polytope::{self, Decision, Evidence, Options};
use cbd_core::quantifiers::{self, Quantifier, QuantifierReport};
use cbd_core::{sample, Behavior, Rational, Scalar, Scenario};

use crate::{Mode, RunConfig};

pub struct Outcome {
    pub report: Value,
    pub code: u8,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Self { report, code: 0 }
    }

    fn verdict(report: Value, noncontextual: bool) -> Self {
        Self {
            report,
            code: if noncontextual { 0 } else { 1 },
        }
    }
}

/// Float values below this multiple of `eps` are recomputed exactly.
const NEAR_ZERO_FACTOR: f64 = 10.0;

fn float_options(cfg: &RunConfig) -> Options<f64> {
    Options::new(cfg.eps, cfg.cap)
}

fn exact_options(cfg: &RunConfig) -> Options<Rational> {
    Options::new(Rational::from_integer(0.into()), cfg.cap)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Float => "float",
        Mode::Exact => "exact",
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_path(path).with_context(|| format!("reading scenario {}", path.display()))
}

fn load_behavior<T: Scalar>(path: &Path) -> Result<Behavior<T>> {
    Behavior::from_path(path).with_context(|| format!("reading behavior {}", path.display()))
}

/// Exact copy of a behavior file: decimal strings are read exactly; if the
/// tables do not sum exactly to one, falls back to rescaling the float values.
fn exact_twin(path: Option<&Path>, float: &Behavior<f64>) -> Behavior<Rational> {
    path.and_then(|p| Behavior::<Rational>::from_path(p).ok())
        .unwrap_or_else(|| float.to_exact())
}

pub fn validate(cfg: &RunConfig, scenario: &Path, behavior: Option<&Path>) -> Result<Outcome> {
    let s = load_scenario(scenario)?;
    let mut report = json!({
        "scenario": {
            "valid": true,
            "measurements": s.measurements().len(),
            "contexts": s.contexts().len(),
            "outcomes": s.outcomes().len(),
            "global_assignments": s.assignment_count().to_string(),
        }
    });
    if let Some(path) = behavior {
        let entry = match cfg.mode {
            Mode::Float => behavior_summary(&load_behavior::<f64>(path)?, &s, &cfg.eps)?,
            Mode::Exact => behavior_summary(&load_behavior::<Rational>(path)?, &s, &Rational::from_float(cfg.eps).expect("finite"))?,
        };
        report["behavior"] = entry;
    }
    Ok(Outcome::ok(report))
}

fn behavior_summary<T: Scalar>(b: &Behavior<T>, s: &Scenario, tol: &T) -> Result<Value> {
    if b.scenario() != s {
        bail!("behavior is defined on a different scenario");
    }
    let d = b.is_nondisturbing(tol);
    let location = d.location.map(|l| {
        json!({
            "contexts": [l.contexts.0, l.contexts.1],
            "measurements": l.measurements,
            "outcomes": l.outcomes,
        })
    });
    Ok(json!({
        "valid": true,
        "nondisturbing": d.nondisturbing,
        "max_violation": d.max_violation.to_json(),
        "location": location,
    }))
}

pub fn extend(_cfg: &RunConfig, scenario: &Path) -> Result<Outcome> {
    let s = load_scenario(scenario)?;
    Ok(Outcome::ok(serde_json::to_value(extend_scenario(&s))?))
}

fn decide<T: Scalar>(
    b: &Behavior<T>,
    extended: bool,
    policy: CouplingPolicy,
    opts: &Options<T>,
) -> Result<Decision<T>> {
    Ok(if extended {
        polytope::is_extended_noncontextual(b, policy, opts)?
    } else {
        polytope::is_noncontextual(b, opts)?
    })
}

/// Closed-form n-cycle evaluation when the scenario is a cycle.
fn cycle_summary<T: Scalar>(b: &Behavior<T>, extended: bool, eps: &T) -> Option<Value> {
    let c = CycleCorrelators::from_behavior(b).ok()?;
    if extended {
        Some(ncycle::extended_criterion(&c, eps).to_json())
    } else if c.is_nondisturbing() {
        Some(ncycle::traditional_criterion(&c, eps).to_json())
    } else {
        None
    }
}

fn check_report<T: Scalar>(
    b: &Behavior<T>,
    d: &Decision<T>,
    cfg: &RunConfig,
    extended: bool,
    policy: CouplingPolicy,
    witness: bool,
    eps: &T,
) -> Value {
    let mut report = Map::new();
    report.insert("mode".into(), json!(mode_name(cfg.mode)));
    report.insert("extended".into(), json!(extended));
    if extended {
        report.insert("policy".into(), serde_json::to_value(policy).expect("policy"));
    }
    if let Value::Object(fields) = d.to_json(witness) {
        report.extend(fields);
    }
    if let Some(c) = cycle_summary(b, extended, eps) {
        report.insert("ncycle".into(), c);
    }
    Value::Object(report)
}

pub fn check(cfg: &RunConfig, path: &Path, extended: bool, policy: CouplingPolicy, witness: bool) -> Result<Outcome> {
    match cfg.mode {
        Mode::Exact => {
            let b = load_behavior::<Rational>(path)?;
            let opts = exact_options(cfg);
            let d = decide(&b, extended, policy, &opts)?;
            let report = check_report(&b, &d, cfg, extended, policy, witness, &opts.eps);
            Ok(Outcome::verdict(report, d.is_noncontextual()))
        }
        Mode::Float => {
            let b = load_behavior::<f64>(path)?;
            let opts = float_options(cfg);
            let d = decide(&b, extended, policy, &opts)?;
            if extended && policy == CouplingPolicy::Maximal && near_zero_deficit(&d, cfg.eps) {
                let exact = exact_twin(Some(path), &b);
                let dq = decide(&exact, extended, policy, &exact_options(cfg))?;
                let mut report = check_report(&b, &dq.to_f64(), cfg, extended, policy, witness, &opts.eps);
                report["adjudicated"] = json!("exact");
                return Ok(Outcome::verdict(report, dq.is_noncontextual()));
            }
            let report = check_report(&b, &d, cfg, extended, policy, witness, &opts.eps);
            Ok(Outcome::verdict(report, d.is_noncontextual()))
        }
    }
}

fn near_zero_deficit(d: &Decision<f64>, eps: f64) -> bool {
    match d {
        Decision::Noncontextual { .. } => true,
        Decision::Contextual(Evidence::Deficit { deficit, .. }) => *deficit < NEAR_ZERO_FACTOR * eps,
        Decision::Contextual(_) => false,
    }
}

trait ToF64 {
    type Out;
    fn to_f64(&self) -> Self::Out;
}

impl ToF64 for Decision<Rational> {
    type Out = Decision<f64>;

    fn to_f64(&self) -> Decision<f64> {
        let v = |x: &[Rational]| x.iter().map(Scalar::approx).collect::<Vec<f64>>();
        match self {
            Decision::Noncontextual { witness, residual } => Decision::Noncontextual {
                witness: v(witness),
                residual: residual.approx(),
            },
            Decision::Contextual(Evidence::Deficit {
                mu_total,
                achieved,
                deficit,
            }) => Decision::Contextual(Evidence::Deficit {
                mu_total: mu_total.approx(),
                achieved: achieved.approx(),
                deficit: deficit.approx(),
            }),
            Decision::Contextual(Evidence::NoMultimaximalCoupling(x)) => {
                Decision::Contextual(Evidence::NoMultimaximalCoupling(x.clone()))
            }
            Decision::Contextual(Evidence::Farkas(cert)) => {
                let cert = match cert {
                    cbd_core::lp::Certificate::Dual { y } => cbd_core::lp::Certificate::Dual { y: v(y) },
                    cbd_core::lp::Certificate::Farkas { y, z } => cbd_core::lp::Certificate::Farkas { y: v(y), z: v(z) },
                    cbd_core::lp::Certificate::Ray { direction } => cbd_core::lp::Certificate::Ray { direction: v(direction) },
                };
                Decision::Contextual(Evidence::Farkas(cert))
            }
        }
    }
}

fn parse_measures(list: &str) -> Result<Vec<Quantifier>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let q: Quantifier = item.parse().map_err(anyhow::Error::msg)?;
        if !out.contains(&q) {
            out.push(q);
        }
    }
    if out.is_empty() {
        bail!("no measures requested");
    }
    Ok(out)
}

fn quantify_one<T: Scalar>(
    b: &Behavior<T>,
    lifted: Option<&Behavior<T>>,
    q: Quantifier,
    opts: &Options<T>,
) -> Result<QuantifierReport<T>> {
    let target = match lifted {
        Some(l) if !q.is_coupling_deficit() => l,
        _ => b,
    };
    Ok(quantifiers::quantify(target, q, opts)?)
}

fn lifted<T: Scalar>(b: &Behavior<T>, extended: bool, eps: &T) -> Result<Option<Behavior<T>>> {
    if !extended {
        return Ok(None);
    }
    let e = extend_scenario(b.scenario());
    Ok(Some(lift_behavior(&e, b, CouplingPolicy::Maximal, eps)?))
}

pub fn quantify(cfg: &RunConfig, path: &Path, measures: &str, extended: bool, witness: bool) -> Result<Outcome> {
    let measures = parse_measures(measures)?;
    let mut reports = Vec::with_capacity(measures.len());
    match cfg.mode {
        Mode::Exact => {
            let b = load_behavior::<Rational>(path)?;
            let opts = exact_options(cfg);
            let l = lifted(&b, extended, &opts.eps)?;
            for q in measures {
                reports.push(quantify_one(&b, l.as_ref(), q, &opts)?.to_json(witness));
            }
        }
        Mode::Float => {
            let b = load_behavior::<f64>(path)?;
            let opts = float_options(cfg);
            let l = lifted(&b, extended, &opts.eps)?;
            let mut exact: Option<(Behavior<Rational>, Option<Behavior<Rational>>)> = None;
            for q in measures {
                let r = quantify_one(&b, l.as_ref(), q, &opts)?;
                let near_zero = r.value.is_some_and(|v| v.abs() < NEAR_ZERO_FACTOR * cfg.eps);
                let mut entry = r.to_json(witness);
                if near_zero {
                    if exact.is_none() {
                        let bq = exact_twin(Some(path), &b);
                        let lq = lifted(&bq, extended, &Rational::from_integer(0.into()))?;
                        exact = Some((bq, lq));
                    }
                    let (bq, lq) = exact.as_ref().expect("just set");
                    let rq = quantify_one(bq, lq.as_ref(), q, &exact_options(cfg))?;
                    entry["value"] = rq.value.as_ref().map_or(Value::Null, |v| v.approx().to_json());
                    entry["exact_value"] = rq.value.as_ref().map_or(Value::Null, Scalar::to_json);
                }
                reports.push(entry);
            }
        }
    }
    Ok(Outcome::ok(Value::Array(reports)))
}

fn parse_list<T: Scalar>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .map(|v| T::parse_str(v).with_context(|| format!("{what}: `{v}` is not a number")))
        .collect()
}

fn ncycle_report<T: Scalar>(n: usize, pair: &str, singles: Option<&str>, eps: &T) -> Result<Outcome> {
    let pair: Vec<T> = parse_list("--pair", pair)?;
    if pair.len() != n {
        bail!("--pair has {} values but n = {n}", pair.len());
    }
    let singles: Vec<T> = match singles {
        Some(s) => parse_list("--singles", s)?,
        None => vec![T::zero(); n],
    };
    let c = if singles.len() == n {
        CycleCorrelators::nondisturbing(pair, singles)?
    } else if singles.len() == 2 * n {
        let mut left = vec![T::zero(); n];
        let mut right = vec![T::zero(); n];
        for i in 0..n {
            right[i] = singles[2 * i].clone();
            left[(i + 1) % n] = singles[2 * i + 1].clone();
        }
        CycleCorrelators::new(pair, left, right)?
    } else {
        bail!("--singles needs {n} or {} values, got {}", 2 * n, singles.len());
    };
    let ext = ncycle::extended_criterion(&c, eps);
    let traditional = c
        .is_nondisturbing()
        .then(|| ncycle::traditional_criterion(&c, eps).to_json());
    let closed: Map<String, Value> = ncycle::closed_form_quantifiers(&c)
        .into_iter()
        .map(|(q, v)| (q.to_string(), v.to_json()))
        .collect();
    let report = json!({
        "n": n,
        "nondisturbing": c.is_nondisturbing(),
        "extended": ext.to_json(),
        "extended_vector": c.extended_vector().iter().map(Scalar::to_json).collect::<Vec<_>>(),
        "traditional": traditional,
        "closed_form": closed,
    });
    Ok(Outcome::verdict(report, ext.noncontextual))
}

pub fn ncycle(cfg: &RunConfig, n: usize, pair: &str, singles: Option<&str>) -> Result<Outcome> {
    if n < 3 {
        bail!("n-cycle needs n >= 3, got {n}");
    }
    match cfg.mode {
        Mode::Float => ncycle_report::<f64>(n, pair, singles, &cfg.eps),
        Mode::Exact => ncycle_report::<Rational>(n, pair, singles, &Rational::from_integer(0.into())),
    }
}

struct SampleResult {
    nondisturbing: bool,
    traditional: bool,
    extended: bool,
    closed_form: Option<(bool, bool)>,
}

fn evaluate_sample<T: Scalar>(b: &Behavior<T>, opts: &Options<T>) -> Result<(bool, bool)> {
    let traditional = polytope::is_noncontextual(b, opts)?.is_noncontextual();
    let extended = polytope::is_extended_noncontextual(b, CouplingPolicy::Maximal, opts)?.is_noncontextual();
    Ok((traditional, extended))
}

fn run_sample(cfg: &RunConfig, s: &Arc<Scenario>, index: usize, delta: f64) -> Result<SampleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let base = sample::nondisturbing(&mut rng, s);
    let b = sample::disturb(&mut rng, &base, delta);
    let nondisturbing = b.is_nondisturbing(&cbd_core::behavior::DEFAULT_DISTURBANCE_TOL).nondisturbing;
    let closed = CycleCorrelators::from_behavior(&b)
        .ok()
        .map(|c| ncycle::extended_criterion(&c, &1e-6));
    let exact_needed = cfg.mode == Mode::Exact || closed.as_ref().is_some_and(|c| c.boundary);
    let (traditional, extended) = if exact_needed {
        evaluate_sample(&b.to_exact(), &exact_options(cfg))?
    } else {
        evaluate_sample(&b, &float_options(cfg))?
    };
    let closed_form = closed.map(|c| {
        let verdict = if c.boundary {
            let cq = CycleCorrelators::from_behavior(&b.to_exact()).expect("same shape");
            ncycle::extended_criterion(&cq, &Rational::from_integer(0.into())).noncontextual
        } else {
            c.noncontextual
        };
        (verdict, c.boundary)
    });
    Ok(SampleResult {
        nondisturbing,
        traditional,
        extended,
        closed_form,
    })
}

pub fn random(cfg: &RunConfig, scenario: &Path, count: usize, delta: f64) -> Result<Outcome> {
    if !(0.0..=1.0).contains(&delta) {
        bail!("--disturbance must lie in [0, 1]");
    }
    let s = Arc::new(load_scenario(scenario)?);
    if s.assignment_count() > cfg.cap {
        bail!(cbd_core::Error::CapExceeded {
            required: s.assignment_count(),
            cap: cfg.cap
        });
    }
    let results: Vec<SampleResult> = (0..count)
        .into_par_iter()
        .map(|i| run_sample(cfg, &s, i, delta))
        .collect::<Result<_>>()?;

    let count_if = |f: &dyn Fn(&SampleResult) -> bool| results.iter().filter(|r| f(r)).count();
    let nd: Vec<&SampleResult> = results.iter().filter(|r| r.nondisturbing).collect();
    let closed: Vec<(bool, bool, bool)> = results
        .iter()
        .filter_map(|r| r.closed_form.map(|(v, boundary)| (v, boundary, r.extended)))
        .collect();
    let is_cycle = CycleCorrelators::from_behavior(&Behavior::<f64>::uniform(s.clone())).is_ok();
    let samples: Vec<Value> = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "index": i,
                "nondisturbing": r.nondisturbing,
                "traditional": verdict_name(r.traditional),
                "extended": verdict_name(r.extended),
                "closed_form": r.closed_form.map(|(v, _)| verdict_name(v)),
            })
        })
        .collect();
    let report = json!({
        "mode": mode_name(cfg.mode),
        "count": count,
        "seed": cfg.seed,
        "disturbance": delta,
        "nondisturbing": nd.len(),
        "traditional_noncontextual": count_if(&|r| r.traditional),
        "extended_noncontextual": count_if(&|r| r.extended),
        "extended_matches_traditional": {
            "compared": nd.len(),
            "agree": nd.iter().filter(|r| r.traditional == r.extended).count(),
        },
        "closed_form": if is_cycle {
            json!({
                "compared": closed.len(),
                "agree": closed.iter().filter(|(v, _, lp)| v == lp).count(),
                "boundary": closed.iter().filter(|(_, b, _)| *b).count(),
            })
        } else {
            Value::Null
        },
        "samples": samples,
    });
    Ok(Outcome::ok(report))
}

fn verdict_name(noncontextual: bool) -> &'static str {
    if noncontextual {
        "noncontextual"
    } else {
        "contextual"
    }
}
