//! Winner-induced instance clusters and nearest-centroid selection.
//!
//! Each ensemble that wins at least one training instance gets a cluster of
//! exactly the instances it won. Centroids live in raw feature space; queries
//! and centroids are z-scored with the training-set statistics frozen into
//! the map, so selection is invariant to per-dimension rescaling.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, DIM};
use crate::matrix::{optimal_assignment, PerformanceMatrix, Winner};
use crate::portfolio::Portfolio;

pub const CLUSTER_FORMAT_VERSION: u32 = 1;

/// Floor applied to zero standard deviations before z-scoring.
pub const SIGMA_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cluster map: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported cluster map version {0}")]
    Version(u32),
    #[error("no training instance was solved by any ensemble")]
    NoWinners,
    #[error("cluster map has no clusters")]
    Empty,
    #[error("instance `{0}` has no feature vector")]
    MissingFeatures(String),
    #[error("cluster map is inconsistent: {0}")]
    Invalid(String),
    #[error("unknown ensemble `{0}`")]
    UnknownEnsemble(String),
}

/// One cluster: the instances an ensemble won and their mean feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub ensemble_id: String,
    pub centroid: Vec<f64>,
    pub members: Vec<String>,
}

/// Per-dimension z-score statistics over the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Normalization {
    /// Population statistics over the given vectors, with the sigma floor.
    pub fn fit<'a>(vectors: impl Iterator<Item = &'a FeatureVector> + Clone) -> Self {
        let n = vectors.clone().count().max(1) as f64;
        let mut mu = vec![0.0; DIM];
        for v in vectors.clone() {
            for (m, x) in mu.iter_mut().zip(v.0.iter()) {
                *m += x;
            }
        }
        for m in &mut mu {
            *m /= n;
        }
        let mut sigma = vec![0.0; DIM];
        for v in vectors {
            for ((s, m), x) in sigma.iter_mut().zip(mu.iter()).zip(v.0.iter()) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut sigma {
            *s = (*s / n).sqrt();
            if *s < SIGMA_FLOOR {
                *s = SIGMA_FLOOR;
            }
        }
        Normalization { mu, sigma }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mu.iter().zip(self.sigma.iter()))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMap {
    pub version: u32,
    pub normalization: Normalization,
    pub clusters: Vec<ClusterEntry>,
    pub matrix_hash: String,
    pub portfolio_hash: String,
    /// Ensemble with the lowest mean training PAR-2; the non-adaptive
    /// comparison point.
    pub single_best: String,
}

/// How the harness picks an ensemble for a new instance.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionMode {
    /// Nearest centroid under z-scored Euclidean distance.
    Adaptive,
    /// Uniform over the portfolio, seeded.
    Random { seed: u64 },
    /// The fixed ensemble that is best on average over training.
    SingleBest,
    /// A named ensemble; `baseline` resolves via provenance.
    Fixed(String),
}

impl SelectionMode {
    /// Parses `adaptive`, `random`, `single-best`, `fixed:<id>`, as used by
    /// command-line flags. Random mode gets its seed from the caller.
    pub fn parse(s: &str, seed: u64) -> Option<Self> {
        match s {
            "adaptive" => Some(SelectionMode::Adaptive),
            "random" => Some(SelectionMode::Random { seed }),
            "single-best" => Some(SelectionMode::SingleBest),
            _ => s.strip_prefix("fixed:").map(|id| SelectionMode::Fixed(id.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SelectionMode::Adaptive => "adaptive".to_string(),
            SelectionMode::Random { .. } => "random".to_string(),
            SelectionMode::SingleBest => "single-best".to_string(),
            SelectionMode::Fixed(id) => format!("fixed:{id}"),
        }
    }
}

/// Builds the cluster map from a complete matrix and per-instance features.
///
/// Normalization statistics run over every instance with features, winners
/// and no-winner instances alike; excluded (error) instances take no part.
pub fn build_cluster_map(
    matrix: &PerformanceMatrix,
    features: &BTreeMap<String, FeatureVector>,
    portfolio_hash: &str,
) -> Result<ClusterMap, ClusterError> {
    let assignment = optimal_assignment(matrix);
    let mut members_by_ensemble: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut normalization_pool: Vec<&FeatureVector> = Vec::new();
    for (instance, winner) in &assignment {
        match winner {
            Winner::Excluded => continue,
            Winner::NoWinner | Winner::Ensemble(_) => {
                let vector = features
                    .get(instance)
                    .ok_or_else(|| ClusterError::MissingFeatures(instance.clone()))?;
                normalization_pool.push(vector);
                if let Winner::Ensemble(id) = winner {
                    members_by_ensemble
                        .entry(id.clone())
                        .or_default()
                        .push(instance.clone());
                }
            }
        }
    }
    if members_by_ensemble.is_empty() {
        return Err(ClusterError::NoWinners);
    }

    let normalization = Normalization::fit(normalization_pool.iter().copied());
    let clusters = members_by_ensemble
        .into_iter()
        .map(|(ensemble_id, members)| {
            let mut centroid = vec![0.0; DIM];
            for instance in &members {
                for (c, x) in centroid.iter_mut().zip(features[instance].0.iter()) {
                    *c += x;
                }
            }
            for c in &mut centroid {
                *c /= members.len() as f64;
            }
            ClusterEntry {
                ensemble_id,
                centroid,
                members,
            }
        })
        .collect();

    Ok(ClusterMap {
        version: CLUSTER_FORMAT_VERSION,
        normalization,
        clusters,
        matrix_hash: matrix.hash(),
        portfolio_hash: portfolio_hash.to_string(),
        single_best: matrix.single_best().ok_or(ClusterError::NoWinners)?,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Picks the ensemble for a query feature vector under the given mode.
pub fn select_ensemble(
    map: &ClusterMap,
    portfolio: &Portfolio,
    query: &FeatureVector,
    mode: &SelectionMode,
) -> Result<String, ClusterError> {
    match mode {
        SelectionMode::Adaptive => {
            if map.clusters.is_empty() {
                return Err(ClusterError::Empty);
            }
            let q = map.normalization.apply(query.as_slice());
            let mut best: Option<(f64, &str)> = None;
            for cluster in &map.clusters {
                let d = squared_distance(&q, &map.normalization.apply(&cluster.centroid));
                let better = match best {
                    None => true,
                    Some((bd, bid)) => {
                        d < bd || (d == bd && cluster.ensemble_id.as_str() < bid)
                    }
                };
                if better {
                    best = Some((d, cluster.ensemble_id.as_str()));
                }
            }
            Ok(best.expect("non-empty clusters").1.to_string())
        }
        SelectionMode::Random { seed } => {
            let mut ids = portfolio.ensemble_ids();
            ids.sort();
            if ids.is_empty() {
                return Err(ClusterError::Empty);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let index = rng.random_range(0..ids.len());
            Ok(ids[index].clone())
        }
        SelectionMode::SingleBest => {
            if portfolio.find(&map.single_best).is_none() {
                return Err(ClusterError::UnknownEnsemble(map.single_best.clone()));
            }
            Ok(map.single_best.clone())
        }
        SelectionMode::Fixed(id) => portfolio
            .find(id)
            .map(|e| e.id.clone())
            .ok_or_else(|| ClusterError::UnknownEnsemble(id.clone())),
    }
}

fn validate(map: &ClusterMap) -> Result<(), ClusterError> {
    if map.version != CLUSTER_FORMAT_VERSION {
        return Err(ClusterError::Version(map.version));
    }
    if map.clusters.is_empty() {
        return Err(ClusterError::Empty);
    }
    if map.normalization.mu.len() != DIM || map.normalization.sigma.len() != DIM {
        return Err(ClusterError::Invalid("normalization dimension".into()));
    }
    if map.normalization.sigma.iter().any(|s| *s <= 0.0) {
        return Err(ClusterError::Invalid("non-positive sigma".into()));
    }
    for cluster in &map.clusters {
        if cluster.centroid.len() != DIM {
            return Err(ClusterError::Invalid(format!(
                "centroid dimension for {}",
                cluster.ensemble_id
            )));
        }
        if cluster.members.is_empty() {
            return Err(ClusterError::Invalid(format!(
                "empty cluster for {}",
                cluster.ensemble_id
            )));
        }
    }
    Ok(())
}

pub fn save_cluster_map(path: &Path, map: &ClusterMap) -> Result<(), ClusterError> {
    validate(map)?;
    let mut json = serde_json::to_string_pretty(map)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn load_cluster_map(path: &Path) -> Result<ClusterMap, ClusterError> {
    let map: ClusterMap = serde_json::from_str(&fs::read_to_string(path)?)?;
    validate(&map)?;
    Ok(map)
}

/// True when the map was built from this portfolio (by content hash).
pub fn consistent_with_portfolio(map: &ClusterMap, portfolio: &Portfolio) -> bool {
    map.portfolio_hash == portfolio.hash()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{MatrixCell, PerformanceMatrix};
    use crate::portfolio::{baseline_ensemble, Portfolio, PortfolioMetadata};
    use crate::runner::{BudgetSpec, RunStatus};

    fn vector(seedish: f64) -> FeatureVector {
        let mut v = [0.0; DIM];
        for (i, x) in v.iter_mut().enumerate() {
            *x = seedish * (i as f64 + 1.0);
        }
        FeatureVector(v)
    }

    fn solved(e: &str, i: &str, metric: f64) -> MatrixCell {
        MatrixCell {
            ensemble_id: e.to_string(),
            instance_id: i.to_string(),
            status: RunStatus::Sat,
            metric,
            par2: metric,
        }
    }

    fn setup() -> (PerformanceMatrix, BTreeMap<String, FeatureVector>) {
        let mut m = PerformanceMatrix::new(BudgetSpec::Conflicts(1000), 42, "ph".to_string());
        // e1 wins i1, i2; e2 wins i3.
        m.insert(solved("e1", "i1", 1.0));
        m.insert(solved("e2", "i1", 5.0));
        m.insert(solved("e1", "i2", 2.0));
        m.insert(solved("e2", "i2", 6.0));
        m.insert(solved("e1", "i3", 9.0));
        m.insert(solved("e2", "i3", 2.0));
        let features: BTreeMap<String, FeatureVector> = [
            ("i1".to_string(), vector(1.0)),
            ("i2".to_string(), vector(2.0)),
            ("i3".to_string(), vector(10.0)),
        ]
        .into();
        (m, features)
    }

    fn dummy_portfolio(ids: &[&str]) -> Portfolio {
        // Selection only needs ids; reuse the baseline ensemble shape.
        let mut ensembles = Vec::new();
        for id in ids {
            let mut e = baseline_ensemble();
            e.id = id.to_string();
            e.provenance = "manual".to_string();
            ensembles.push(e);
        }
        Portfolio {
            metadata: PortfolioMetadata {
                seed: 42,
                archetype_hash: String::new(),
            },
            modules: Default::default(),
            ensembles,
        }
    }

    #[test]
    fn centroids_are_member_means() {
        let (m, features) = setup();
        let map = build_cluster_map(&m, &features, "ph").unwrap();
        assert_eq!(map.clusters.len(), 2);
        let e1 = map.clusters.iter().find(|c| c.ensemble_id == "e1").unwrap();
        assert_eq!(e1.members, vec!["i1".to_string(), "i2".to_string()]);
        for (i, c) in e1.centroid.iter().enumerate() {
            let expected = (features["i1"].0[i] + features["i2"].0[i]) / 2.0;
            assert!((c - expected).abs() < 1e-12);
        }
        let e2 = map.clusters.iter().find(|c| c.ensemble_id == "e2").unwrap();
        assert_eq!(e2.members, vec!["i3".to_string()]);
        assert_eq!(e2.centroid, features["i3"].0.to_vec());
    }

    #[test]
    fn centroid_identity_query_returns_own_ensemble() {
        let (m, features) = setup();
        let map = build_cluster_map(&m, &features, "ph").unwrap();
        let portfolio = dummy_portfolio(&["e1", "e2"]);
        for cluster in &map.clusters {
            let mut q = [0.0; DIM];
            q.copy_from_slice(&cluster.centroid);
            let selected = select_ensemble(
                &map,
                &portfolio,
                &FeatureVector(q),
                &SelectionMode::Adaptive,
            )
            .unwrap();
            assert_eq!(selected, cluster.ensemble_id);
        }
    }

    #[test]
    fn equidistant_tie_prefers_smaller_id() {
        let mut map = ClusterMap {
            version: CLUSTER_FORMAT_VERSION,
            normalization: Normalization {
                mu: vec![0.0; DIM],
                sigma: vec![1.0; DIM],
            },
            clusters: vec![
                ClusterEntry {
                    ensemble_id: "b".to_string(),
                    centroid: vec![1.0; DIM],
                    members: vec!["x".to_string()],
                },
                ClusterEntry {
                    ensemble_id: "a".to_string(),
                    centroid: vec![-1.0; DIM],
                    members: vec!["y".to_string()],
                },
            ],
            matrix_hash: String::new(),
            portfolio_hash: String::new(),
            single_best: "a".to_string(),
        };
        let portfolio = dummy_portfolio(&["a", "b"]);
        let origin = FeatureVector([0.0; DIM]);
        let selected =
            select_ensemble(&map, &portfolio, &origin, &SelectionMode::Adaptive).unwrap();
        assert_eq!(selected, "a");
        map.clusters.reverse();
        let selected =
            select_ensemble(&map, &portfolio, &origin, &SelectionMode::Adaptive).unwrap();
        assert_eq!(selected, "a", "tie break independent of cluster order");
    }

    #[test]
    fn selection_matches_brute_force_scan() {
        let (m, features) = setup();
        let map = build_cluster_map(&m, &features, "ph").unwrap();
        let portfolio = dummy_portfolio(&["e1", "e2"]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut q = [0.0; DIM];
            for x in q.iter_mut() {
                *x = rng.random_range(-5.0..25.0);
            }
            let query = FeatureVector(q);
            let selected =
                select_ensemble(&map, &portfolio, &query, &SelectionMode::Adaptive).unwrap();
            // Brute force: compute every normalized distance directly.
            let qn = map.normalization.apply(&q);
            let best = map
                .clusters
                .iter()
                .map(|c| {
                    let cn = map.normalization.apply(&c.centroid);
                    let d: f64 = qn
                        .iter()
                        .zip(cn.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (c.ensemble_id.clone(), d)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!(selected, best.0);
        }
    }

    #[test]
    fn selection_is_invariant_under_column_rescaling() {
        let (m, features) = setup();
        let map = build_cluster_map(&m, &features, "ph").unwrap();
        let portfolio = dummy_portfolio(&["e1", "e2"]);

        // Scale every feature column by a positive factor in both the
        // training features and the queries.
        let scales: Vec<f64> = (0..DIM).map(|i| 0.25 + i as f64).collect();
        let scale = |v: &FeatureVector| {
            let mut out = [0.0; DIM];
            for i in 0..DIM {
                out[i] = v.0[i] * scales[i];
            }
            FeatureVector(out)
        };
        let scaled_features: BTreeMap<String, FeatureVector> =
            features.iter().map(|(k, v)| (k.clone(), scale(v))).collect();
        let scaled_map = build_cluster_map(&m, &scaled_features, "ph").unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let mut q = [0.0; DIM];
            for x in q.iter_mut() {
                *x = rng.random_range(-5.0..25.0);
            }
            let query = FeatureVector(q);
            let a = select_ensemble(&map, &portfolio, &query, &SelectionMode::Adaptive).unwrap();
            let b = select_ensemble(
                &scaled_map,
                &portfolio,
                &scale(&query),
                &SelectionMode::Adaptive,
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn save_load_preserves_selections() {
        let (m, features) = setup();
        let map = build_cluster_map(&m, &features, "ph").unwrap();
        let portfolio = dummy_portfolio(&["e1", "e2"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        save_cluster_map(&path, &map).unwrap();
        let back = load_cluster_map(&path).unwrap();
        assert_eq!(back, map);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut q = [0.0; DIM];
            for x in q.iter_mut() {
                *x = rng.random_range(-10.0..30.0);
            }
            let query = FeatureVector(q);
            assert_eq!(
                select_ensemble(&map, &portfolio, &query, &SelectionMode::Adaptive).unwrap(),
                select_ensemble(&back, &portfolio, &query, &SelectionMode::Adaptive).unwrap()
            );
        }
    }

    #[test]
    fn corrupted_map_fails_to_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(load_cluster_map(&path).is_err());
    }

    #[test]
    fn empty_map_refuses_to_save() {
        let map = ClusterMap {
            version: CLUSTER_FORMAT_VERSION,
            normalization: Normalization {
                mu: vec![0.0; DIM],
                sigma: vec![1.0; DIM],
            },
            clusters: vec![],
            matrix_hash: String::new(),
            portfolio_hash: String::new(),
            single_best: String::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            save_cluster_map(&dir.path().join("map.json"), &map),
            Err(ClusterError::Empty)
        ));
    }

    #[test]
    fn fixed_and_random_modes() {
        let (m, features) = setup();
        let map = build_cluster_map(&m, &features, "ph").unwrap();
        let portfolio = dummy_portfolio(&["e1", "e2"]);
        let q = vector(1.0);

        assert_eq!(
            select_ensemble(&map, &portfolio, &q, &SelectionMode::Fixed("e2".into())).unwrap(),
            "e2"
        );
        assert!(select_ensemble(
            &map,
            &portfolio,
            &q,
            &SelectionMode::Fixed("nope".into())
        )
        .is_err());

        let r1 = select_ensemble(&map, &portfolio, &q, &SelectionMode::Random { seed: 9 }).unwrap();
        let r2 = select_ensemble(&map, &portfolio, &q, &SelectionMode::Random { seed: 9 }).unwrap();
        assert_eq!(r1, r2);

        assert_eq!(
            select_ensemble(&map, &portfolio, &q, &SelectionMode::SingleBest).unwrap(),
            m.single_best().unwrap()
        );
    }

    #[test]
    fn no_winner_instances_join_normalization_but_not_clusters() {
        let (mut m, mut features) = setup();
        m.insert(MatrixCell {
            ensemble_id: "e1".to_string(),
            instance_id: "i4".to_string(),
            status: RunStatus::Timeout,
            metric: 1000.0,
            par2: 2000.0,
        });
        m.insert(MatrixCell {
            ensemble_id: "e2".to_string(),
            instance_id: "i4".to_string(),
            status: RunStatus::Timeout,
            metric: 1000.0,
            par2: 2000.0,
        });
        features.insert("i4".to_string(), vector(100.0));
        let map = build_cluster_map(&m, &features, "ph").unwrap();
        assert!(map
            .clusters
            .iter()
            .all(|c| !c.members.contains(&"i4".to_string())));

        // Statistics shifted by the no-winner instance's features.
        let (m2, f2) = setup();
        let without = build_cluster_map(&m2, &f2, "ph").unwrap();
        assert_ne!(map.normalization.mu, without.normalization.mu);
    }
}
