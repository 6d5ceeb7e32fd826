//! Compatibility scenarios: measurements, contexts and an outcome alphabet.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ScenarioIssue};

/// Ordered, duplicate-free outcome labels. The order fixes tuple enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeAlphabet {
    labels: Vec<String>,
}

impl OutcomeAlphabet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut issues = Vec::new();
        check_alphabet(&labels, &mut issues);
        if issues.is_empty() {
            Ok(Self { labels })
        } else {
            Err(Error::InvalidScenario(issues))
        }
    }

    /// The `{-1, +1}` alphabet used by cycle scenarios, `-1` first.
    pub fn pm_one() -> Self {
        Self {
            labels: vec!["-1".to_string(), "+1".to_string()],
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn check_alphabet(labels: &[String], issues: &mut Vec<ScenarioIssue>) {
    if labels.is_empty() {
        issues.push(ScenarioIssue::EmptyAlphabet);
    }
    let mut seen = HashSet::new();
    for label in labels {
        if !seen.insert(label.as_str()) {
            issues.push(ScenarioIssue::DuplicateOutcome(label.clone()));
        }
    }
}

/// Scenario exactly as it appears on disk, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub outcomes: Vec<String>,
    pub measurements: Vec<String>,
    pub contexts: Vec<Vec<String>>,
}

/// A validated compatibility scenario.
///
/// Contexts are stored as indices into the measurement list; both orders are
/// significant and every outcome-tuple index is defined relative to them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    measurements: Vec<String>,
    contexts: Vec<Vec<usize>>,
    outcomes: OutcomeAlphabet,
    lookup: HashMap<String, usize>,
}

/// Validates a raw scenario, reporting every violated invariant.
pub fn validate(raw: &ScenarioSpec) -> std::result::Result<Scenario, Vec<ScenarioIssue>> {
    let mut issues = Vec::new();
    check_alphabet(&raw.outcomes, &mut issues);

    let mut lookup = HashMap::new();
    for (i, m) in raw.measurements.iter().enumerate() {
        if lookup.insert(m.clone(), i).is_some() {
            issues.push(ScenarioIssue::DuplicateMeasurement(m.clone()));
        }
    }

    let mut contexts = Vec::with_capacity(raw.contexts.len());
    for (ci, ctx) in raw.contexts.iter().enumerate() {
        if ctx.is_empty() {
            issues.push(ScenarioIssue::EmptyContext(ci));
        }
        let mut seen = HashSet::new();
        let mut indices = Vec::with_capacity(ctx.len());
        for m in ctx {
            match lookup.get(m) {
                Some(&idx) => indices.push(idx),
                None => issues.push(ScenarioIssue::UnknownMeasurement {
                    context: ci,
                    measurement: m.clone(),
                }),
            }
            if !seen.insert(m.as_str()) {
                issues.push(ScenarioIssue::DuplicateInContext {
                    context: ci,
                    measurement: m.clone(),
                });
            }
        }
        contexts.push(indices);
    }

    let sets: Vec<BTreeSet<usize>> = contexts
        .iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    for (i, a) in sets.iter().enumerate() {
        for (j, b) in sets.iter().enumerate() {
            if i == j || a.is_empty() {
                continue;
            }
            // Identical contexts are reported once, from the later index.
            if a.is_subset(b) && (a != b || i > j) {
                issues.push(ScenarioIssue::SubsetContext {
                    subset: i,
                    superset: j,
                });
            }
        }
    }

    let covered: HashSet<usize> = contexts.iter().flatten().copied().collect();
    for (i, m) in raw.measurements.iter().enumerate() {
        if !covered.contains(&i) {
            issues.push(ScenarioIssue::OrphanMeasurement(m.clone()));
        }
    }

    if !issues.is_empty() {
        return Err(issues);
    }
    Ok(Scenario {
        measurements: raw.measurements.clone(),
        contexts,
        outcomes: OutcomeAlphabet {
            labels: raw.outcomes.clone(),
        },
        lookup,
    })
}

impl Scenario {
    pub fn new<M, C, O>(measurements: M, contexts: C, outcomes: O) -> Result<Self>
    where
        M: IntoIterator,
        M::Item: Into<String>,
        C: IntoIterator,
        C::Item: IntoIterator,
        <C::Item as IntoIterator>::Item: Into<String>,
        O: IntoIterator,
        O::Item: Into<String>,
    {
        let spec = ScenarioSpec {
            outcomes: outcomes.into_iter().map(Into::into).collect(),
            measurements: measurements.into_iter().map(Into::into).collect(),
            contexts: contexts
                .into_iter()
                .map(|c| c.into_iter().map(Into::into).collect())
                .collect(),
        };
        validate(&spec).map_err(Error::InvalidScenario)
    }

    /// The n-cycle: measurements `0..n`, contexts `{i, i+1 mod n}`, outcomes `{-1, +1}`.
    pub fn n_cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::CycleTooSmall(n));
        }
        let measurements: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let contexts = (0..n).map(|i| vec![i.to_string(), ((i + 1) % n).to_string()]);
        Self::new(measurements, contexts, ["-1", "+1"])
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        validate(&spec).map_err(Error::InvalidScenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            outcomes: self.outcomes.labels.clone(),
            measurements: self.measurements.clone(),
            contexts: self
                .contexts
                .iter()
                .map(|c| c.iter().map(|&i| self.measurements[i].clone()).collect())
                .collect(),
        }
    }

    pub fn measurements(&self) -> &[String] {
        &self.measurements
    }

    /// Contexts as measurement indices.
    pub fn contexts(&self) -> &[Vec<usize>] {
        &self.contexts
    }

    pub fn context(&self, index: usize) -> Result<&[usize]> {
        self.contexts
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownContext(index))
    }

    pub fn context_names(&self, index: usize) -> Result<Vec<&str>> {
        Ok(self
            .context(index)?
            .iter()
            .map(|&i| self.measurements[i].as_str())
            .collect())
    }

    pub fn outcomes(&self) -> &OutcomeAlphabet {
        &self.outcomes
    }

    pub fn measurement_index(&self, id: &str) -> Result<usize> {
        self.lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownMeasurement(id.to_string()))
    }

    /// Indices of all contexts containing `id`, in scenario order.
    pub fn contexts_of(&self, id: &str) -> Result<Vec<usize>> {
        let idx = self.measurement_index(id)?;
        Ok(self.contexts_containing(idx))
    }

    pub fn contexts_containing(&self, measurement: usize) -> Vec<usize> {
        self.contexts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(&measurement))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of outcome tuples of a context, `|O|^|C|`.
    pub fn tuple_count(&self, context: usize) -> usize {
        self.outcomes.len().pow(self.contexts[context].len() as u32)
    }

    /// Number of deterministic global assignments, `|O|^|X|`, saturating.
    pub fn assignment_count(&self) -> u128 {
        (self.outcomes.len() as u128)
            .checked_pow(self.measurements.len() as u32)
            .unwrap_or(u128::MAX)
    }
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ScenarioSpec::deserialize(d)?;
        validate(&spec).map_err(|issues| serde::de::Error::custom(Error::InvalidScenario(issues)))
    }
}
