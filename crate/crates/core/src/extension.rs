//! The extended scenario: one copy of each measurement per context that
//! contains it, plus a coupling context tying together the copies of every
//! shared measurement.

use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::behavior::{Behavior, Distribution};
use crate::coupling::{self, CouplingPolicy, Multimaximal};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::{Scenario, ScenarioSpec};

/// A copy `x^i` of base measurement `x` living in base context `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CopyId {
    pub base: usize,
    pub context: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextKind {
    Original(usize),
    /// Holds the base measurement id.
    Coupling(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedScenario {
    base: Arc<Scenario>,
    ext: Arc<Scenario>,
    copies: Vec<CopyId>,
    kinds: Vec<ContextKind>,
    /// Base measurement index of each coupling context, in context order.
    coupled: Vec<usize>,
}

pub fn copy_name(base: &str, context: usize) -> String {
    format!("{base}^{context}")
}

/// Builds the extended scenario. Original contexts come first, in base order;
/// coupling contexts follow in base measurement order. Measurements that
/// appear in a single context get one copy and no coupling context.
pub fn extend(base: &Scenario) -> ExtendedScenario {
    let names = base.measurements();
    let mut copies = Vec::new();
    for (x, _) in names.iter().enumerate() {
        for ctx in base.contexts_containing(x) {
            copies.push(CopyId { base: x, context: ctx });
        }
    }
    let position = |x: usize, ctx: usize| {
        copies
            .iter()
            .position(|c| c.base == x && c.context == ctx)
            .expect("copy exists")
    };

    let mut contexts: Vec<Vec<usize>> = Vec::new();
    let mut kinds = Vec::new();
    for (i, ctx) in base.contexts().iter().enumerate() {
        contexts.push(ctx.iter().map(|&x| position(x, i)).collect());
        kinds.push(ContextKind::Original(i));
    }
    let mut coupled = Vec::new();
    for (x, name) in names.iter().enumerate() {
        let holders = base.contexts_containing(x);
        if holders.len() >= 2 {
            contexts.push(holders.iter().map(|&c| position(x, c)).collect());
            kinds.push(ContextKind::Coupling(name.clone()));
            coupled.push(x);
        }
    }

    let copy_names: Vec<String> = copies
        .iter()
        .map(|c| copy_name(&names[c.base], c.context))
        .collect();
    let spec = ScenarioSpec {
        outcomes: base.outcomes().labels().to_vec(),
        measurements: copy_names.clone(),
        contexts: contexts
            .iter()
            .map(|c| c.iter().map(|&k| copy_names[k].clone()).collect())
            .collect(),
    };
    let ext = crate::scenario::validate(&spec).expect("extension of a valid scenario is valid");
    ExtendedScenario {
        base: Arc::new(base.clone()),
        ext: Arc::new(ext),
        copies,
        kinds,
        coupled,
    }
}

impl ExtendedScenario {
    pub fn base(&self) -> &Scenario {
        &self.base
    }

    pub fn ext(&self) -> &Scenario {
        &self.ext
    }

    pub fn ext_arc(&self) -> &Arc<Scenario> {
        &self.ext
    }

    pub fn copies(&self) -> &[CopyId] {
        &self.copies
    }

    pub fn context_kinds(&self) -> &[ContextKind] {
        &self.kinds
    }

    pub fn original_count(&self) -> usize {
        self.base.contexts().len()
    }

    /// Base measurements that have a coupling context, in context order.
    pub fn coupled_measurements(&self) -> &[usize] {
        &self.coupled
    }

    /// Extended measurement indices of the copies of base measurement `x`.
    pub fn copies_of(&self, x: usize) -> Vec<usize> {
        (0..self.copies.len())
            .filter(|&k| self.copies[k].base == x)
            .collect()
    }
}

impl Serialize for ExtendedScenario {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            outcomes: &'a [String],
            measurements: &'a [String],
            contexts: Vec<Vec<String>>,
            context_kind: &'a [ContextKind],
        }
        let spec = self.ext.to_spec();
        Out {
            outcomes: &spec.outcomes,
            measurements: &spec.measurements,
            contexts: spec.contexts,
            context_kind: &self.kinds,
        }
        .serialize(serializer)
    }
}

/// Single-copy marginals of base measurement `x`, one per containing context.
pub fn copy_marginals<T: Scalar>(b: &Behavior<T>, x: usize) -> Vec<Distribution<T>> {
    b.scenario()
        .contexts_containing(x)
        .into_iter()
        .map(|ctx| b.single_marginal(ctx, x))
        .collect()
}

/// Extended behavior: Original contexts carry the base tables unchanged and
/// each coupling context a coupling of its copies' marginals under `policy`.
pub fn lift_behavior<T: Scalar>(
    e: &ExtendedScenario,
    b: &Behavior<T>,
    policy: CouplingPolicy,
    eps: &T,
) -> Result<Behavior<T>> {
    if b.scenario() != e.base() {
        return Err(Error::Parse("behavior is not on the base scenario".into()));
    }
    let mut tables: Vec<Distribution<T>> = b.tables().to_vec();
    for &x in &e.coupled {
        let marginals = copy_marginals(b, x);
        let joint = match policy {
            CouplingPolicy::Maximal => coupling::canonical_maximal_coupling(&marginals)?.into_joint(),
            CouplingPolicy::Multimaximal => match coupling::multimaximal_coupling(&marginals, eps)? {
                Multimaximal::Exists(c) => c.into_joint(),
                Multimaximal::DoesNotExist(_) => {
                    return Err(Error::NoMultimaximalCoupling(e.base.measurements()[x].clone()))
                }
            },
        };
        tables.push(joint);
    }
    Ok(Behavior::from_parts(e.ext.clone(), tables))
}
