//! Named instance categories defined by threshold predicates over features.
//!
//! An archetype is a conjunction of `metric >= threshold` (or `<=`)
//! conditions. Thresholds may be literal values or training-set percentiles
//! resolved at build time with the nearest-rank rule. Besides the canonical
//! feature names, conditions may reference the derived `clause_var_ratio`
//! metric (clauses per variable), which has no canonical dimension of its
//! own.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_NAMES};

pub const ARCHETYPE_FORMAT_VERSION: u32 = 1;

/// Clauses per variable, derived from the canonical scale features.
pub const CLAUSE_VAR_RATIO: &str = "clause_var_ratio";

#[derive(Debug, Error)]
pub enum ArchetypeError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed archetype file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported archetype file version {0}")]
    Version(u32),
    #[error("unknown metric `{0}` in archetype condition")]
    UnknownMetric(String),
    #[error("condition needs exactly one of `value` or `percentile`")]
    AmbiguousThreshold,
    #[error("need at least {0} training instances")]
    TooFewInstances(usize),
    #[error("unresolved threshold is not finite")]
    NonFiniteThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

/// A threshold condition with the literal value already resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub metric: String,
    pub op: Op,
    pub value: f64,
}

impl Condition {
    pub fn holds(&self, features: &FeatureVector) -> bool {
        match metric_value(features, &self.metric) {
            Some(x) => match self.op {
                Op::Ge => x >= self.value,
                Op::Le => x <= self.value,
            },
            None => false,
        }
    }
}

/// Looks up a canonical feature or the derived clause/variable ratio.
pub fn metric_value(features: &FeatureVector, metric: &str) -> Option<f64> {
    if metric == CLAUSE_VAR_RATIO {
        let vars = features.num_variables();
        if vars > 0.0 {
            return Some(features.num_clauses() / vars);
        }
        return Some(0.0);
    }
    features.get(metric)
}

fn known_metric(metric: &str) -> bool {
    metric == CLAUSE_VAR_RATIO || FEATURE_NAMES.contains(&metric)
}

/// A named instance category: all conditions must hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub id: String,
    pub description: String,
    pub conditions: Vec<Condition>,
}

impl Archetype {
    pub fn matches(&self, features: &FeatureVector) -> bool {
        self.conditions.iter().all(|c| c.holds(features))
    }
}

/// Nearest-rank percentile: the k-th smallest value with
/// k = ceil(p/100 * n), for p in (0, 100].
pub fn nearest_rank_percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty set");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let k = ((p * n as f64) / 100.0).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}

/// The three default archetypes, thresholds resolved at the 67th percentile
/// of the training set.
///
/// - `A1` highly constrained: clause/variable ratio at or above p67.
/// - `A2` large scale: both variable and clause counts at or above p67.
/// - `A3` heterogeneous clause structure: clause-length spread at or above
///   p67.
pub fn default_archetypes(training: &[FeatureVector]) -> Result<Vec<Archetype>, ArchetypeError> {
    if training.len() < 3 {
        return Err(ArchetypeError::TooFewInstances(3));
    }
    let column = |metric: &str| -> Vec<f64> {
        training
            .iter()
            .map(|v| metric_value(v, metric).expect("known metric"))
            .collect()
    };
    let p67 = |metric: &str| -> Result<f64, ArchetypeError> {
        let t = nearest_rank_percentile(&column(metric), 67.0);
        if t.is_finite() {
            Ok(t)
        } else {
            Err(ArchetypeError::NonFiniteThreshold)
        }
    };
    let ge = |metric: &str, value: f64| Condition {
        metric: metric.to_string(),
        op: Op::Ge,
        value,
    };
    Ok(vec![
        Archetype {
            id: "A1".to_string(),
            description: "Instances packing many clauses onto few variables, \
                          leaving little slack in the search space."
                .to_string(),
            conditions: vec![ge(CLAUSE_VAR_RATIO, p67(CLAUSE_VAR_RATIO)?)],
        },
        Archetype {
            id: "A2".to_string(),
            description: "Instances that are large in both variable and clause \
                          count, stressing scalability."
                .to_string(),
            conditions: vec![
                ge("num_variables", p67("num_variables")?),
                ge("num_clauses", p67("num_clauses")?),
            ],
        },
        Archetype {
            id: "A3".to_string(),
            description: "Instances mixing short and long clauses, with a wide \
                          spread of clause lengths."
                .to_string(),
            conditions: vec![ge("std_clause_length", p67("std_clause_length")?)],
        },
    ])
}

/// The instances an archetype selects. An empty match falls back to the full
/// training set so downstream search always has data.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub members: Vec<String>,
    pub fell_back: bool,
}

pub fn filter_subset(
    archetype: &Archetype,
    instances: &[(String, FeatureVector)],
) -> FilterResult {
    let members: Vec<String> = instances
        .iter()
        .filter(|(_, v)| archetype.matches(v))
        .map(|(id, _)| id.clone())
        .collect();
    if members.is_empty() {
        log::warn!(
            "archetype {} matched no instances; falling back to the full training set",
            archetype.id
        );
        FilterResult {
            members: instances.iter().map(|(id, _)| id.clone()).collect(),
            fell_back: true,
        }
    } else {
        FilterResult {
            members,
            fell_back: false,
        }
    }
}

/// Unresolved condition as written in archetype files: exactly one of
/// `value` or `percentile`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub feature: String,
    pub op: Op,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub id: String,
    pub description: String,
    pub conditions: Vec<ConditionSpec>,
}

impl ArchetypeSpec {
    /// Resolves percentile thresholds against the training set.
    pub fn resolve(&self, training: &[FeatureVector]) -> Result<Archetype, ArchetypeError> {
        let mut conditions = Vec::with_capacity(self.conditions.len());
        for spec in &self.conditions {
            if !known_metric(&spec.feature) {
                return Err(ArchetypeError::UnknownMetric(spec.feature.clone()));
            }
            let value = match (spec.value, spec.percentile) {
                (Some(v), None) => v,
                (None, Some(p)) => {
                    let column: Vec<f64> = training
                        .iter()
                        .map(|v| metric_value(v, &spec.feature).expect("known metric"))
                        .collect();
                    if column.is_empty() {
                        return Err(ArchetypeError::TooFewInstances(1));
                    }
                    nearest_rank_percentile(&column, p)
                }
                _ => return Err(ArchetypeError::AmbiguousThreshold),
            };
            if !value.is_finite() {
                return Err(ArchetypeError::NonFiniteThreshold);
            }
            conditions.push(Condition {
                metric: spec.feature.clone(),
                op: spec.op,
                value,
            });
        }
        Ok(Archetype {
            id: self.id.clone(),
            description: self.description.clone(),
            conditions,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchetypeFile {
    version: u32,
    archetypes: Vec<Archetype>,
}

/// Saves resolved archetypes (literal thresholds only).
pub fn save_archetypes(path: &Path, archetypes: &[Archetype]) -> Result<(), ArchetypeError> {
    let file = ArchetypeFile {
        version: ARCHETYPE_FORMAT_VERSION,
        archetypes: archetypes.to_vec(),
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn load_archetypes(path: &Path) -> Result<Vec<Archetype>, ArchetypeError> {
    let file: ArchetypeFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.version != ARCHETYPE_FORMAT_VERSION {
        return Err(ArchetypeError::Version(file.version));
    }
    for archetype in &file.archetypes {
        for condition in &archetype.conditions {
            if !known_metric(&condition.metric) {
                return Err(ArchetypeError::UnknownMetric(condition.metric.clone()));
            }
        }
    }
    Ok(file.archetypes)
}
