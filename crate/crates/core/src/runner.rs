//! Budgeted solve execution shared by the matrix, evolution, and bench
//! harnesses.
//!
//! A [`BudgetSpec`] fixes both the resource limit and the metric unit:
//! conflict budgets measure cost in conflicts and are fully reproducible;
//! wall budgets measure seconds. The PAR-2 contribution of a run is its
//! metric when solved and twice the limit otherwise.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnf::CnfFormula;
use crate::portfolio::{HeuristicEnsemble, PortfolioError};
use crate::solver::{solve, Budget, SolveStatus};

/// Resource limit plus metric unit for a batch of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSpec {
    Conflicts(u64),
    WallSeconds(f64),
}

impl BudgetSpec {
    pub fn to_budget(self) -> Budget {
        match self {
            BudgetSpec::Conflicts(n) => Budget::conflicts(n),
            BudgetSpec::WallSeconds(s) => Budget::wall_seconds(s),
        }
    }

    /// The timeout value `T` in the budget's metric unit.
    pub fn limit(self) -> f64 {
        match self {
            BudgetSpec::Conflicts(n) => n as f64,
            BudgetSpec::WallSeconds(s) => s,
        }
    }
}

/// Outcome classification of one budgeted run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RunStatus {
    Sat,
    Unsat,
    Timeout,
    Error,
}

impl RunStatus {
    pub fn solved(self) -> bool {
        matches!(self, RunStatus::Sat | RunStatus::Unsat)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Sat => "SAT",
            RunStatus::Unsat => "UNSAT",
            RunStatus::Timeout => "TIMEOUT",
            RunStatus::Error => "ERROR",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SAT" => Some(RunStatus::Sat),
            "UNSAT" => Some(RunStatus::Unsat),
            "TIMEOUT" => Some(RunStatus::Timeout),
            "ERROR" => Some(RunStatus::Error),
            _ => None,
        }
    }
}

/// Status, cost in the budget's unit, and PAR-2 contribution of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub status: RunStatus,
    pub metric: f64,
    pub par2: f64,
}

impl RunRecord {
    pub fn error(budget: BudgetSpec) -> Self {
        RunRecord {
            status: RunStatus::Error,
            metric: 0.0,
            par2: 2.0 * budget.limit(),
        }
    }
}

/// Runs one budgeted solve and folds the outcome into a [`RunRecord`].
pub fn run_solve(
    formula: &CnfFormula,
    ensemble: &HeuristicEnsemble,
    budget: BudgetSpec,
    seed: u64,
) -> Result<RunRecord, PortfolioError> {
    let outcome = solve(formula, ensemble, budget.to_budget(), seed)?;
    let limit = budget.limit();
    let (status, metric) = match outcome.status {
        SolveStatus::Sat => (RunStatus::Sat, cost(budget, &outcome)),
        SolveStatus::Unsat => (RunStatus::Unsat, cost(budget, &outcome)),
        SolveStatus::Timeout => (RunStatus::Timeout, limit),
    };
    let par2 = if status.solved() { metric } else { 2.0 * limit };
    Ok(RunRecord {
        status,
        metric,
        par2,
    })
}

fn cost(budget: BudgetSpec, outcome: &crate::solver::SolveOutcome) -> f64 {
    match budget {
        BudgetSpec::Conflicts(_) => outcome.stats.conflicts as f64,
        BudgetSpec::WallSeconds(_) => outcome.stats.elapsed,
    }
}

/// Stable per-run seed derived from a base seed and string context (ensemble
/// and instance ids), so cells are independent of evaluation order.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{pigeonhole, planted_3sat};
    use crate::portfolio::baseline_ensemble;

    #[test]
    fn conflict_budget_metric_is_conflict_count() {
        let f = planted_3sat(20, 80, 1).unwrap();
        let rec = run_solve(&f, &baseline_ensemble(), BudgetSpec::Conflicts(100_000), 42).unwrap();
        assert_eq!(rec.status, RunStatus::Sat);
        assert!(rec.metric < 100_000.0);
        assert_eq!(rec.par2, rec.metric);
    }

    #[test]
    fn timeout_contributes_twice_the_limit() {
        let f = pigeonhole(5).unwrap();
        let rec = run_solve(&f, &baseline_ensemble(), BudgetSpec::Conflicts(10), 42).unwrap();
        assert_eq!(rec.status, RunStatus::Timeout);
        assert_eq!(rec.metric, 10.0);
        assert_eq!(rec.par2, 20.0);
    }

    #[test]
    fn derived_seeds_differ_by_context() {
        let a = derive_seed(42, &["e1", "i1"]);
        let b = derive_seed(42, &["e1", "i2"]);
        let c = derive_seed(42, &["e1", "i1"]);
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
