//! Adaptive per-instance SAT solving.
//!
//! The crate bundles everything needed to train and run a feature-dispatched
//! portfolio of CDCL heuristic configurations:
//!
//! - [`cnf`]: DIMACS parsing and formula/assignment semantics.
//! - [`features`]: the 21-dimensional instance feature vector.
//! - [`solver`]: a CDCL backbone with pluggable restart / rephase / bump_var
//!   policies.
//! - [`portfolio`]: parameterized heuristic families and their Cartesian
//!   composition into ensembles.
//! - [`archetypes`] / [`evolve`]: archetype-filtered training subsets and the
//!   guided evolutionary search that fills the portfolio.
//! - [`matrix`] / [`cluster`]: ensemble-by-instance performance evaluation,
//!   winner-induced instance clusters, and nearest-centroid selection.
//! - [`bench`] / [`generate`] / [`pipeline`]: the PAR-2 harness, synthetic
//!   instance generators, and end-to-end training orchestration.

pub mod archetypes;
pub mod bench;
pub mod cluster;
pub mod cnf;
pub mod evolve;
pub mod features;
pub mod generate;
pub mod matrix;
pub mod pipeline;
pub mod portfolio;
pub mod runner;
pub mod solver;

pub use cnf::{Assignment, Clause, CnfFormula};
pub use features::FeatureVector;
pub use portfolio::{HeuristicEnsemble, HeuristicGenome, Portfolio};
pub use solver::{Budget, SolveOutcome, SolveStatus};
