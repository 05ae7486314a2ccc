//! Parameterized heuristic families and their composition into ensembles.
//!
//! Each solver heuristic slot (restart, rephase, bump_var) has a catalog of
//! families with declared parameter ranges. A genome picks one family and a
//! full parameter assignment; an ensemble is one genome per slot. The full
//! ensemble space is the Cartesian product of the per-slot genome lists.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const PORTFOLIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed portfolio file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported portfolio format version {0}")]
    Version(u32),
    #[error("unknown {module} family `{family}`")]
    UnknownFamily { module: Module, family: String },
    #[error("genome `{family}` declared under module {module}, expected {expected}")]
    WrongModule {
        family: String,
        module: Module,
        expected: Module,
    },
    #[error("parameter `{param}` of family `{family}` out of range: {value} (allowed [{min}, {max}])")]
    ParamOutOfRange {
        family: String,
        param: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("parameter `{param}` of family `{family}` must be an integer, got {value}")]
    IntegerExpected {
        family: String,
        param: String,
        value: f64,
    },
    #[error("family `{family}` missing parameter `{param}`")]
    MissingParam { family: String, param: String },
    #[error("family `{family}` has no parameter `{param}`")]
    UnknownParam { family: String, param: String },
    #[error("ensemble `{ensemble}` references unknown genome `{genome}`")]
    UnresolvedRef { ensemble: String, genome: String },
    #[error("ensemble id `{0}` does not match its components")]
    IdMismatch(String),
    #[error("duplicate ensemble id `{0}`")]
    DuplicateEnsemble(String),
    #[error("empty {0} module list")]
    EmptyModuleList(Module),
}

/// The three heuristic slots of the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    Restart,
    Rephase,
    BumpVar,
}

impl Module {
    pub const ALL: [Module; 3] = [Module::Restart, Module::Rephase, Module::BumpVar];

    pub fn name(self) -> &'static str {
        match self {
            Module::Restart => "restart",
            Module::Rephase => "rephase",
            Module::BumpVar => "bump_var",
        }
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Int,
    Real,
}

/// Declared range and default for one family parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub min: f64,
    pub max: f64,
    pub default: f64,
}

/// One heuristic family: a named implementation scheme with parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub module: Module,
    pub name: &'static str,
    pub params: Vec<ParamSpec>,
}

/// The full family catalog, one list per module.
#[derive(Debug, Clone)]
pub struct Catalog {
    families: Vec<FamilySpec>,
}

impl Catalog {
    pub fn families(&self, module: Module) -> impl Iterator<Item = &FamilySpec> {
        self.families.iter().filter(move |f| f.module == module)
    }

    pub fn find(&self, module: Module, name: &str) -> Option<&FamilySpec> {
        self.families
            .iter()
            .find(|f| f.module == module && f.name == name)
    }

    pub fn all(&self) -> &[FamilySpec] {
        &self.families
    }

    /// Checks a genome against the catalog: known family, exact parameter
    /// set, values in range, integers integral.
    pub fn validate(&self, genome: &HeuristicGenome) -> Result<(), PortfolioError> {
        let family =
            self.find(genome.module, &genome.family)
                .ok_or_else(|| PortfolioError::UnknownFamily {
                    module: genome.module,
                    family: genome.family.clone(),
                })?;
        for spec in &family.params {
            let value =
                *genome
                    .params
                    .get(spec.name)
                    .ok_or_else(|| PortfolioError::MissingParam {
                        family: genome.family.clone(),
                        param: spec.name.to_string(),
                    })?;
            if !(spec.min..=spec.max).contains(&value) || !value.is_finite() {
                return Err(PortfolioError::ParamOutOfRange {
                    family: genome.family.clone(),
                    param: spec.name.to_string(),
                    value,
                    min: spec.min,
                    max: spec.max,
                });
            }
            if spec.kind == ParamKind::Int && value.fract() != 0.0 {
                return Err(PortfolioError::IntegerExpected {
                    family: genome.family.clone(),
                    param: spec.name.to_string(),
                    value,
                });
            }
        }
        for param in genome.params.keys() {
            if !family.params.iter().any(|p| p.name == param) {
                return Err(PortfolioError::UnknownParam {
                    family: genome.family.clone(),
                    param: param.clone(),
                });
            }
        }
        Ok(())
    }
}

fn int(name: &'static str, min: f64, max: f64, default: f64) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Int,
        min,
        max,
        default,
    }
}

fn real(name: &'static str, min: f64, max: f64, default: f64) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Real,
        min,
        max,
        default,
    }
}

/// The built-in family catalog.
///
/// Restart: `luby(u)` scales the Luby sequence by `u` conflicts;
/// `geometric(c, g)` starts at `c` conflicts and grows by factor `g` per
/// restart; `fixed(c)` restarts every `c` conflicts; `lbd_dynamic(w, k)`
/// restarts when the mean LBD of the last `w` learned clauses times `k`
/// exceeds the global mean LBD.
///
/// Rephase: `none`; `reset_false(r)` clears all saved phases every `r`
/// conflicts; `flip(r)` negates them; `random(r, p)` re-randomizes each
/// phase with probability `p`.
///
/// Bump: `classic_vsids(d)` bumps learned-clause variables and decays the
/// increment by `d`; `reason_side(d, beta)` additionally bumps variables
/// resolved away during analysis by `beta` times the increment;
/// `conflict_frequency(d, b)` scales each bump by recent conflict
/// participation with weight `b`.
pub fn builtin_families() -> Catalog {
    Catalog {
        families: vec![
            FamilySpec {
                module: Module::Restart,
                name: "luby",
                params: vec![int("u", 1.0, 10_000.0, 100.0)],
            },
            FamilySpec {
                module: Module::Restart,
                name: "geometric",
                params: vec![
                    int("c", 1.0, 100_000.0, 100.0),
                    real("g", 1.01, 10.0, 1.5),
                ],
            },
            FamilySpec {
                module: Module::Restart,
                name: "fixed",
                params: vec![int("c", 1.0, 100_000.0, 550.0)],
            },
            FamilySpec {
                module: Module::Restart,
                name: "lbd_dynamic",
                params: vec![int("w", 10.0, 10_000.0, 50.0), real("k", 0.1, 10.0, 0.8)],
            },
            FamilySpec {
                module: Module::Rephase,
                name: "none",
                params: vec![],
            },
            FamilySpec {
                module: Module::Rephase,
                name: "reset_false",
                params: vec![int("r", 100.0, 1_000_000.0, 10_000.0)],
            },
            FamilySpec {
                module: Module::Rephase,
                name: "flip",
                params: vec![int("r", 100.0, 1_000_000.0, 10_000.0)],
            },
            FamilySpec {
                module: Module::Rephase,
                name: "random",
                params: vec![
                    int("r", 100.0, 1_000_000.0, 10_000.0),
                    real("p", 0.0, 1.0, 0.5),
                ],
            },
            FamilySpec {
                module: Module::BumpVar,
                name: "classic_vsids",
                params: vec![real("d", 0.5, 0.999, 0.95)],
            },
            FamilySpec {
                module: Module::BumpVar,
                name: "reason_side",
                params: vec![real("d", 0.5, 0.999, 0.95), real("beta", 0.0, 1.0, 0.5)],
            },
            FamilySpec {
                module: Module::BumpVar,
                name: "conflict_frequency",
                params: vec![real("d", 0.5, 0.999, 0.95), real("b", 0.0, 10.0, 1.0)],
            },
        ],
    }
}

/// One concrete heuristic: a family plus a full parameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicGenome {
    pub module: Module,
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl HeuristicGenome {
    pub fn new(module: Module, family: &str, params: &[(&str, f64)]) -> Self {
        HeuristicGenome {
            module,
            family: family.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }

    /// Builds the family's default-parameter genome.
    pub fn defaults(spec: &FamilySpec) -> Self {
        HeuristicGenome {
            module: spec.module,
            family: spec.name.to_string(),
            params: spec
                .params
                .iter()
                .map(|p| (p.name.to_string(), p.default))
                .collect(),
        }
    }

    /// Canonical id, injective over (family, params): parameters are listed
    /// in sorted name order with shortest-round-trip float formatting.
    pub fn id(&self) -> String {
        if self.params.is_empty() {
            return self.family.clone();
        }
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}({})", self.family, params.join(","))
    }

    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }
}

/// The default heuristic for one slot: the stand-in for the unmodified
/// backbone solver.
pub fn baseline_genome(module: Module) -> HeuristicGenome {
    match module {
        Module::Restart => HeuristicGenome::new(module, "luby", &[("u", 100.0)]),
        Module::Rephase => HeuristicGenome::new(module, "none", &[]),
        Module::BumpVar => HeuristicGenome::new(module, "classic_vsids", &[("d", 0.95)]),
    }
}

pub const BASELINE_PROVENANCE: &str = "baseline";

/// One (restart, rephase, bump_var) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicEnsemble {
    pub id: String,
    pub restart: HeuristicGenome,
    pub rephase: HeuristicGenome,
    pub bump_var: HeuristicGenome,
    /// "baseline", "manual", or the contributing archetype ids joined by "+".
    pub provenance: String,
}

impl HeuristicEnsemble {
    pub fn new(
        restart: HeuristicGenome,
        rephase: HeuristicGenome,
        bump_var: HeuristicGenome,
        provenance: &str,
    ) -> Self {
        let id = ensemble_id(&restart, &rephase, &bump_var);
        HeuristicEnsemble {
            id,
            restart,
            rephase,
            bump_var,
            provenance: provenance.to_string(),
        }
    }

    pub fn genome(&self, module: Module) -> &HeuristicGenome {
        match module {
            Module::Restart => &self.restart,
            Module::Rephase => &self.rephase,
            Module::BumpVar => &self.bump_var,
        }
    }

    /// Replaces one slot, recomputing the id. Provenance is kept.
    pub fn with_genome(&self, genome: HeuristicGenome) -> Self {
        let mut restart = self.restart.clone();
        let mut rephase = self.rephase.clone();
        let mut bump_var = self.bump_var.clone();
        match genome.module {
            Module::Restart => restart = genome,
            Module::Rephase => rephase = genome,
            Module::BumpVar => bump_var = genome,
        }
        HeuristicEnsemble::new(restart, rephase, bump_var, &self.provenance)
    }
}

/// Deterministic ensemble id: the three component ids sorted
/// lexicographically and joined with `|`.
pub fn ensemble_id(
    restart: &HeuristicGenome,
    rephase: &HeuristicGenome,
    bump_var: &HeuristicGenome,
) -> String {
    let mut ids = [restart.id(), rephase.id(), bump_var.id()];
    ids.sort();
    ids.join("|")
}

/// The all-defaults ensemble.
pub fn baseline_ensemble() -> HeuristicEnsemble {
    HeuristicEnsemble::new(
        baseline_genome(Module::Restart),
        baseline_genome(Module::Rephase),
        baseline_genome(Module::BumpVar),
        BASELINE_PROVENANCE,
    )
}

/// Per-module genome lists feeding the Cartesian expansion.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModuleLists {
    pub restart: Vec<HeuristicGenome>,
    pub rephase: Vec<HeuristicGenome>,
    pub bump_var: Vec<HeuristicGenome>,
}

impl ModuleLists {
    pub fn get(&self, module: Module) -> &[HeuristicGenome] {
        match module {
            Module::Restart => &self.restart,
            Module::Rephase => &self.rephase,
            Module::BumpVar => &self.bump_var,
        }
    }

    pub fn find(&self, module: Module, id: &str) -> Option<&HeuristicGenome> {
        self.get(module).iter().find(|g| g.id() == id)
    }
}

/// Expands module lists into every (restart, rephase, bump_var) combination.
///
/// Output order is restart-major, then rephase, then bump_var. Provenance of
/// each combination is derived by `provenance_of`, which receives the three
/// component genomes.
pub fn cartesian_expand(
    lists: &ModuleLists,
    mut provenance_of: impl FnMut(&HeuristicGenome, &HeuristicGenome, &HeuristicGenome) -> String,
) -> Result<Vec<HeuristicEnsemble>, PortfolioError> {
    for module in Module::ALL {
        if lists.get(module).is_empty() {
            return Err(PortfolioError::EmptyModuleList(module));
        }
    }
    let mut out: Vec<HeuristicEnsemble> = Vec::new();
    for restart in &lists.restart {
        for rephase in &lists.rephase {
            for bump in &lists.bump_var {
                let provenance = provenance_of(restart, rephase, bump);
                let ensemble = HeuristicEnsemble::new(
                    restart.clone(),
                    rephase.clone(),
                    bump.clone(),
                    &provenance,
                );
                if out.iter().any(|e| e.id == ensemble.id) {
                    continue; // identical component combination listed twice
                }
                out.push(ensemble);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioMetadata {
    pub seed: u64,
    pub archetype_hash: String,
}

/// The pruned set of ensembles retained for selection, with the module lists
/// they were expanded from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Portfolio {
    pub metadata: PortfolioMetadata,
    pub modules: ModuleLists,
    pub ensembles: Vec<HeuristicEnsemble>,
}

impl Portfolio {
    /// Looks an ensemble up by exact id, or by the `baseline` alias.
    pub fn find(&self, id: &str) -> Option<&HeuristicEnsemble> {
        if id == BASELINE_PROVENANCE {
            if let Some(e) = self
                .ensembles
                .iter()
                .find(|e| e.provenance == BASELINE_PROVENANCE)
            {
                return Some(e);
            }
        }
        self.ensembles.iter().find(|e| e.id == id)
    }

    pub fn ensemble_ids(&self) -> Vec<String> {
        self.ensembles.iter().map(|e| e.id.clone()).collect()
    }

    /// Content hash of the canonical serialized form.
    pub fn hash(&self) -> String {
        let json = self.to_json();
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn to_json(&self) -> String {
        let file = PortfolioFile {
            version: PORTFOLIO_FORMAT_VERSION,
            metadata: self.metadata.clone(),
            modules: self.modules.clone(),
            ensembles: self
                .ensembles
                .iter()
                .map(|e| EnsembleEntry {
                    id: e.id.clone(),
                    restart_ref: e.restart.id(),
                    rephase_ref: e.rephase.id(),
                    bump_ref: e.bump_var.id(),
                    provenance: e.provenance.clone(),
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&file).expect("portfolio serializes");
        json.push('\n');
        json
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleEntry {
    id: String,
    restart_ref: String,
    rephase_ref: String,
    bump_ref: String,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct PortfolioFile {
    version: u32,
    metadata: PortfolioMetadata,
    modules: ModuleLists,
    ensembles: Vec<EnsembleEntry>,
}

pub fn save_portfolio(path: &Path, portfolio: &Portfolio) -> Result<(), PortfolioError> {
    fs::write(path, portfolio.to_json())?;
    Ok(())
}

fn resolve_ref(
    lists: &ModuleLists,
    module: Module,
    ensemble_id: &str,
    genome_id: &str,
) -> Result<HeuristicGenome, PortfolioError> {
    if let Some(genome) = lists.find(module, genome_id) {
        return Ok(genome.clone());
    }
    // The baseline fallback ensemble may reference default genomes that the
    // pruned module lists no longer carry.
    let baseline = baseline_genome(module);
    if baseline.id() == genome_id {
        return Ok(baseline);
    }
    Err(PortfolioError::UnresolvedRef {
        ensemble: ensemble_id.to_string(),
        genome: genome_id.to_string(),
    })
}

pub fn load_portfolio(path: &Path) -> Result<Portfolio, PortfolioError> {
    let text = fs::read_to_string(path)?;
    let file: PortfolioFile = serde_json::from_str(&text)?;
    if file.version != PORTFOLIO_FORMAT_VERSION {
        return Err(PortfolioError::Version(file.version));
    }
    let catalog = builtin_families();
    for module in Module::ALL {
        for genome in file.modules.get(module) {
            if genome.module != module {
                return Err(PortfolioError::WrongModule {
                    family: genome.family.clone(),
                    module: genome.module,
                    expected: module,
                });
            }
            catalog.validate(genome)?;
        }
    }
    let mut ensembles = Vec::with_capacity(file.ensembles.len());
    for entry in &file.ensembles {
        let restart = resolve_ref(&file.modules, Module::Restart, &entry.id, &entry.restart_ref)?;
        let rephase = resolve_ref(&file.modules, Module::Rephase, &entry.id, &entry.rephase_ref)?;
        let bump = resolve_ref(&file.modules, Module::BumpVar, &entry.id, &entry.bump_ref)?;
        let ensemble = HeuristicEnsemble::new(restart, rephase, bump, &entry.provenance);
        if ensemble.id != entry.id {
            return Err(PortfolioError::IdMismatch(entry.id.clone()));
        }
        if ensembles
            .iter()
            .any(|e: &HeuristicEnsemble| e.id == ensemble.id)
        {
            return Err(PortfolioError::DuplicateEnsemble(entry.id.clone()));
        }
        ensembles.push(ensemble);
    }
    Ok(Portfolio {
        metadata: file.metadata,
        modules: file.modules,
        ensembles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_expected_family_counts() {
        let catalog = builtin_families();
        assert_eq!(catalog.families(Module::Restart).count(), 4);
        assert_eq!(catalog.families(Module::Rephase).count(), 4);
        assert_eq!(catalog.families(Module::BumpVar).count(), 3);
    }

    #[test]
    fn luby_range_is_declared() {
        let catalog = builtin_families();
        let luby = catalog.find(Module::Restart, "luby").unwrap();
        assert_eq!(luby.params[0].min, 1.0);
        assert_eq!(luby.params[0].max, 10_000.0);

        let ok = HeuristicGenome::new(Module::Restart, "luby", &[("u", 5000.0)]);
        assert!(catalog.validate(&ok).is_ok());
        let zero = HeuristicGenome::new(Module::Restart, "luby", &[("u", 0.0)]);
        assert!(matches!(
            catalog.validate(&zero),
            Err(PortfolioError::ParamOutOfRange { .. })
        ));
        let fractional = HeuristicGenome::new(Module::Restart, "luby", &[("u", 2.5)]);
        assert!(matches!(
            catalog.validate(&fractional),
            Err(PortfolioError::IntegerExpected { .. })
        ));
    }

    #[test]
    fn unknown_family_is_rejected() {
        let catalog = builtin_families();
        let genome = HeuristicGenome::new(Module::Restart, "foo", &[]);
        assert!(matches!(
            catalog.validate(&genome),
            Err(PortfolioError::UnknownFamily { .. })
        ));
    }

    #[test]
    fn genome_ids_are_canonical() {
        let g = HeuristicGenome::new(Module::Restart, "geometric", &[("g", 1.5), ("c", 100.0)]);
        assert_eq!(g.id(), "geometric(c=100,g=1.5)");
        assert_eq!(baseline_genome(Module::Rephase).id(), "none");
    }

    #[test]
    fn ensemble_id_sorts_components() {
        let e = baseline_ensemble();
        assert_eq!(e.id, "classic_vsids(d=0.95)|luby(u=100)|none");
    }

    fn lists_of_sizes(r: usize, p: usize, b: usize) -> ModuleLists {
        let catalog = builtin_families();
        let take = |module: Module, n: usize| -> Vec<HeuristicGenome> {
            catalog
                .families(module)
                .take(n)
                .map(HeuristicGenome::defaults)
                .collect()
        };
        ModuleLists {
            restart: take(Module::Restart, r),
            rephase: take(Module::Rephase, p),
            bump_var: take(Module::BumpVar, b),
        }
    }

    #[test]
    fn cartesian_expand_sizes() {
        let manual = |_: &HeuristicGenome, _: &HeuristicGenome, _: &HeuristicGenome| {
            "manual".to_string()
        };
        assert_eq!(
            cartesian_expand(&lists_of_sizes(3, 1, 3), manual).unwrap().len(),
            9
        );
        assert_eq!(
            cartesian_expand(&lists_of_sizes(1, 1, 1), manual).unwrap().len(),
            1
        );
        let all = cartesian_expand(&lists_of_sizes(3, 3, 3), manual).unwrap();
        assert_eq!(all.len(), 27);
        let mut ids: Vec<_> = all.iter().map(|e| e.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 27, "expanded ids must be unique");
    }

    #[test]
    fn cartesian_expand_rejects_empty_list() {
        let mut lists = lists_of_sizes(1, 1, 1);
        lists.rephase.clear();
        assert!(matches!(
            cartesian_expand(&lists, |_, _, _| String::new()),
            Err(PortfolioError::EmptyModuleList(Module::Rephase))
        ));
    }

    fn sample_portfolio() -> Portfolio {
        let lists = lists_of_sizes(2, 1, 2);
        let ensembles = cartesian_expand(&lists, |_, _, _| "manual".to_string()).unwrap();
        Portfolio {
            metadata: PortfolioMetadata {
                seed: 42,
                archetype_hash: "abc".to_string(),
            },
            modules: lists,
            ensembles,
        }
    }

    #[test]
    fn save_load_round_trip() {
        let portfolio = sample_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("portfolio.json");
        save_portfolio(&path, &portfolio).unwrap();
        let back = load_portfolio(&path).unwrap();
        assert_eq!(back.ensemble_ids(), portfolio.ensemble_ids());
        assert_eq!(back.modules.restart, portfolio.modules.restart);
        assert_eq!(back.hash(), portfolio.hash());
    }

    #[test]
    fn load_rejects_unknown_family() {
        let portfolio = sample_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("portfolio.json");
        save_portfolio(&path, &portfolio).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"luby\"", "\"foo\"");
        fs::write(&path, text).unwrap();
        assert!(load_portfolio(&path).is_err());
    }

    #[test]
    fn load_rejects_out_of_range_param() {
        let portfolio = sample_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("portfolio.json");
        save_portfolio(&path, &portfolio).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"u\": 100.0", "\"u\": 0.0")
            .replace("u=100", "u=0");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_portfolio(&path),
            Err(PortfolioError::ParamOutOfRange { .. })
        ));
    }

    #[test]
    fn load_rejects_version_mismatch() {
        let portfolio = sample_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("portfolio.json");
        save_portfolio(&path, &portfolio).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_portfolio(&path),
            Err(PortfolioError::Version(9))
        ));
    }

    #[test]
    fn baseline_alias_resolves() {
        let mut portfolio = sample_portfolio();
        portfolio.ensembles.push(baseline_ensemble());
        let found = portfolio.find("baseline").unwrap();
        assert_eq!(found.provenance, BASELINE_PROVENANCE);
    }
}
