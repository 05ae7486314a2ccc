//! The ensemble-by-instance performance matrix.
//!
//! Every portfolio ensemble is evaluated on every training instance under one
//! budget. The matrix persists as CSV next to a small meta file; re-running
//! with the same (budget, seed, portfolio) extends a partial matrix instead
//! of recomputing it. Rows are kept sorted so the serialized form is
//! byte-stable.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cnf::{parse_dimacs_file, CnfFormula};
use crate::portfolio::Portfolio;
use crate::runner::{derive_seed, run_solve, BudgetSpec, RunRecord, RunStatus};

pub const MATRIX_FORMAT_VERSION: u32 = 1;

/// Cells evaluated between CSV checkpoints.
const CHECKPOINT_CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed matrix meta: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("malformed matrix row: {0}")]
    Row(String),
    #[error("solver configuration: {0}")]
    Config(#[from] crate::portfolio::PortfolioError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCell {
    pub ensemble_id: String,
    pub instance_id: String,
    pub status: RunStatus,
    pub metric: f64,
    pub par2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixMeta {
    version: u32,
    budget: BudgetSpec,
    seed: u64,
    portfolio_hash: String,
}

#[derive(Debug, Clone)]
pub struct PerformanceMatrix {
    pub budget: BudgetSpec,
    pub seed: u64,
    pub portfolio_hash: String,
    cells: BTreeMap<(String, String), MatrixCell>,
}

/// Per-instance winner classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Winner {
    Ensemble(String),
    /// Every ensemble timed out; the instance carries no preference signal.
    NoWinner,
    /// The instance could not be evaluated (unreadable file).
    Excluded,
}

impl PerformanceMatrix {
    pub fn new(budget: BudgetSpec, seed: u64, portfolio_hash: String) -> Self {
        PerformanceMatrix {
            budget,
            seed,
            portfolio_hash,
            cells: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, cell: MatrixCell) {
        self.cells
            .insert((cell.ensemble_id.clone(), cell.instance_id.clone()), cell);
    }

    pub fn get(&self, ensemble_id: &str, instance_id: &str) -> Option<&MatrixCell> {
        self.cells
            .get(&(ensemble_id.to_string(), instance_id.to_string()))
    }

    pub fn cells(&self) -> impl Iterator<Item = &MatrixCell> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn instance_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .cells
            .keys()
            .map(|(_, instance)| instance.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn ensemble_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .cells
            .keys()
            .map(|(ensemble, _)| ensemble.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Mean PAR-2 per ensemble over all evaluable (non-excluded) instances.
    pub fn mean_par2_by_ensemble(&self) -> BTreeMap<String, f64> {
        let excluded: Vec<String> = optimal_assignment(self)
            .into_iter()
            .filter(|(_, w)| *w == Winner::Excluded)
            .map(|(id, _)| id)
            .collect();
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for cell in self.cells.values() {
            if excluded.contains(&cell.instance_id) {
                continue;
            }
            let entry = sums.entry(cell.ensemble_id.clone()).or_insert((0.0, 0));
            entry.0 += cell.par2;
            entry.1 += 1;
        }
        sums.into_iter()
            .map(|(id, (sum, n))| (id, if n > 0 { sum / n as f64 } else { f64::INFINITY }))
            .collect()
    }

    /// The ensemble with the lowest mean PAR-2 over the whole matrix,
    /// ties broken toward the lexicographically smaller id.
    pub fn single_best(&self) -> Option<String> {
        self.mean_par2_by_ensemble()
            .into_iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite").then(a.0.cmp(&b.0)))
            .map(|(id, _)| id)
    }

    /// Canonical CSV serialization: header plus rows sorted by
    /// (ensemble_id, instance_id).
    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["ensemble_id", "instance_id", "status", "metric", "par2"])
            .expect("in-memory write");
        for cell in self.cells.values() {
            writer
                .write_record([
                    cell.ensemble_id.as_str(),
                    cell.instance_id.as_str(),
                    cell.status.as_str(),
                    &format!("{}", cell.metric),
                    &format!("{}", cell.par2),
                ])
                .expect("in-memory write");
        }
        writer.into_inner().expect("in-memory flush")
    }

    /// Content hash of the canonical CSV form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_bytes()))
    }

    fn meta(&self) -> MatrixMeta {
        MatrixMeta {
            version: MATRIX_FORMAT_VERSION,
            budget: self.budget,
            seed: self.seed,
            portfolio_hash: self.portfolio_hash.clone(),
        }
    }

    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<(), MatrixError> {
        fs::write(csv_path, self.to_csv_bytes())?;
        let mut meta = serde_json::to_string_pretty(&self.meta())?;
        meta.push('\n');
        fs::write(meta_path, meta)?;
        Ok(())
    }
}

pub fn load_matrix(csv_path: &Path, meta_path: &Path) -> Result<PerformanceMatrix, MatrixError> {
    let meta: MatrixMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    let mut matrix = PerformanceMatrix::new(meta.budget, meta.seed, meta.portfolio_hash.clone());
    let mut reader = csv::Reader::from_path(csv_path)?;
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str, MatrixError> {
            record
                .get(i)
                .ok_or_else(|| MatrixError::Row(format!("{record:?}")))
        };
        let status = RunStatus::parse(field(2)?)
            .ok_or_else(|| MatrixError::Row(format!("bad status in {record:?}")))?;
        let metric: f64 = field(3)?
            .parse()
            .map_err(|_| MatrixError::Row(format!("bad metric in {record:?}")))?;
        let par2: f64 = field(4)?
            .parse()
            .map_err(|_| MatrixError::Row(format!("bad par2 in {record:?}")))?;
        matrix.insert(MatrixCell {
            ensemble_id: field(0)?.to_string(),
            instance_id: field(1)?.to_string(),
            status,
            metric,
            par2,
        });
    }
    Ok(matrix)
}

/// Evaluates every portfolio ensemble on every instance.
///
/// When `csv_path`/`meta_path` name an existing matrix with the same budget,
/// seed, and portfolio hash, its cells are reused and only the missing ones
/// run. Progress is checkpointed to disk between chunks.
pub fn evaluate_matrix(
    portfolio: &Portfolio,
    instances: &[(String, std::path::PathBuf)],
    budget: BudgetSpec,
    seed: u64,
    paths: Option<(&Path, &Path)>,
) -> Result<PerformanceMatrix, MatrixError> {
    let portfolio_hash = portfolio.hash();
    let mut matrix = PerformanceMatrix::new(budget, seed, portfolio_hash.clone());
    if let Some((csv_path, meta_path)) = paths {
        if csv_path.exists() && meta_path.exists() {
            match load_matrix(csv_path, meta_path) {
                Ok(existing) if existing.meta() == matrix.meta() => {
                    matrix = existing;
                }
                Ok(_) => {
                    log::warn!(
                        "matrix at {} was built under a different configuration; recomputing",
                        csv_path.display()
                    );
                }
                Err(err) => {
                    log::warn!("could not resume matrix ({err}); recomputing");
                }
            }
        }
    }

    // Parse each instance once; unreadable files become ERROR columns.
    let mut formulas: BTreeMap<String, Option<Arc<CnfFormula>>> = BTreeMap::new();
    for (id, path) in instances {
        let parsed = match parse_dimacs_file(path) {
            Ok(f) => Some(Arc::new(f)),
            Err(err) => {
                log::warn!("instance {id} unreadable ({err}); marking ERROR");
                None
            }
        };
        formulas.insert(id.clone(), parsed);
    }

    let mut missing: Vec<(String, String)> = Vec::new();
    for ensemble in &portfolio.ensembles {
        for (instance_id, _) in instances {
            if matrix.get(&ensemble.id, instance_id).is_none() {
                missing.push((ensemble.id.clone(), instance_id.clone()));
            }
        }
    }
    missing.sort();

    for chunk in missing.chunks(CHECKPOINT_CHUNK) {
        let records: Vec<(String, String, RunRecord)> = chunk
            .par_iter()
            .map(|(ensemble_id, instance_id)| {
                let record = match &formulas[instance_id] {
                    Some(formula) => {
                        let ensemble = portfolio
                            .find(ensemble_id)
                            .expect("missing cell references portfolio ensemble");
                        let run_seed = derive_seed(seed, &[ensemble_id, instance_id]);
                        run_solve(formula, ensemble, budget, run_seed)
                            .unwrap_or_else(|_| RunRecord::error(budget))
                    }
                    None => RunRecord::error(budget),
                };
                (ensemble_id.clone(), instance_id.clone(), record)
            })
            .collect();
        for (ensemble_id, instance_id, record) in records {
            matrix.insert(MatrixCell {
                ensemble_id,
                instance_id,
                status: record.status,
                metric: record.metric,
                par2: record.par2,
            });
        }
        if let Some((csv_path, meta_path)) = paths {
            matrix.save(csv_path, meta_path)?;
        }
    }
    if let Some((csv_path, meta_path)) = paths {
        matrix.save(csv_path, meta_path)?;
    }
    Ok(matrix)
}

/// Per-instance argmin over PAR-2 contributions, ties toward the smaller
/// ensemble id. Instances with no solved cell map to `NoWinner`; instances
/// whose cells are all errors map to `Excluded`.
pub fn optimal_assignment(matrix: &PerformanceMatrix) -> BTreeMap<String, Winner> {
    let mut per_instance: BTreeMap<String, Vec<&MatrixCell>> = BTreeMap::new();
    for cell in matrix.cells() {
        per_instance
            .entry(cell.instance_id.clone())
            .or_default()
            .push(cell);
    }
    per_instance
        .into_iter()
        .map(|(instance, cells)| {
            let evaluable: Vec<&&MatrixCell> = cells
                .iter()
                .filter(|c| c.status != RunStatus::Error)
                .collect();
            if evaluable.is_empty() {
                return (instance, Winner::Excluded);
            }
            let best = evaluable
                .iter()
                .min_by(|a, b| {
                    a.par2
                        .partial_cmp(&b.par2)
                        .expect("finite par2")
                        .then(a.ensemble_id.cmp(&b.ensemble_id))
                })
                .expect("non-empty");
            if best.status.solved() {
                (instance, Winner::Ensemble(best.ensemble_id.clone()))
            } else {
                (instance, Winner::NoWinner)
            }
        })
        .collect()
}
