//! Deterministic synthetic instance generators for desk-scale experiments.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::cnf::{Clause, CnfFormula};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("3-SAT generation needs at least 3 variables, got {0}")]
    TooFewVariables(usize),
    #[error("pigeonhole needs at least 1 hole")]
    NoHoles,
}

/// Which synthetic family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorFamily {
    /// Uniform random 3-SAT: `clauses` clauses over 3 distinct variables
    /// each, polarities coin-flipped.
    Random3Sat { vars: usize, clauses: usize, seed: u64 },
    /// The standard pigeonhole encoding with `holes + 1` pigeons.
    Pigeonhole { holes: usize },
    /// Random 3-SAT filtered against a hidden assignment; satisfiable by
    /// construction.
    PlantedSat { vars: usize, clauses: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorSpec {
    pub family: GeneratorFamily,
    pub count: usize,
}

fn three_distinct_vars(rng: &mut ChaCha8Rng, n: usize) -> [usize; 3] {
    let mut vars = [0usize; 3];
    let mut filled = 0;
    while filled < 3 {
        let v = rng.random_range(1..=n);
        if !vars[..filled].contains(&v) {
            vars[filled] = v;
            filled += 1;
        }
    }
    vars
}

fn random_clause(rng: &mut ChaCha8Rng, n: usize) -> Vec<i32> {
    three_distinct_vars(rng, n)
        .into_iter()
        .map(|v| {
            let positive = rng.random_bool(0.5);
            if positive {
                v as i32
            } else {
                -(v as i32)
            }
        })
        .collect()
}

pub fn random_3sat(vars: usize, clauses: usize, seed: u64) -> Result<CnfFormula, GenerateError> {
    if vars < 3 {
        return Err(GenerateError::TooFewVariables(vars));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..clauses)
        .map(|_| Clause::new(random_clause(&mut rng, vars)).expect("distinct vars"))
        .collect();
    Ok(CnfFormula::new(vars, clauses).expect("in range"))
}

pub fn planted_3sat(vars: usize, clauses: usize, seed: u64) -> Result<CnfFormula, GenerateError> {
    if vars < 3 {
        return Err(GenerateError::TooFewVariables(vars));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<bool> = (0..vars).map(|_| rng.random_bool(0.5)).collect();
    let mut out = Vec::with_capacity(clauses);
    while out.len() < clauses {
        let lits = random_clause(&mut rng, vars);
        let satisfied = lits
            .iter()
            .any(|&lit| hidden[lit.unsigned_abs() as usize - 1] == (lit > 0));
        if satisfied {
            out.push(Clause::new(lits).expect("distinct vars"));
        }
    }
    Ok(CnfFormula::new(vars, out).expect("in range"))
}

/// Pigeonhole principle: `holes + 1` pigeons into `holes` holes. Variable
/// `(p-1)*holes + k` means pigeon `p` sits in hole `k`. Unsatisfiable for
/// every `holes >= 1`.
pub fn pigeonhole(holes: usize) -> Result<CnfFormula, GenerateError> {
    if holes == 0 {
        return Err(GenerateError::NoHoles);
    }
    let pigeons = holes + 1;
    let var = |p: usize, k: usize| ((p - 1) * holes + k) as i32;
    let mut clauses = Vec::new();
    for p in 1..=pigeons {
        clauses.push(Clause::new((1..=holes).map(|k| var(p, k)).collect()).expect("valid"));
    }
    for k in 1..=holes {
        for p in 1..=pigeons {
            for q in (p + 1)..=pigeons {
                clauses.push(Clause::new(vec![-var(p, k), -var(q, k)]).expect("valid"));
            }
        }
    }
    Ok(CnfFormula::new(pigeons * holes, clauses).expect("in range"))
}

fn file_stem(family: GeneratorFamily) -> String {
    match family {
        GeneratorFamily::Random3Sat { vars, clauses, seed } => {
            format!("r3_n{vars}_m{clauses}_s{seed}")
        }
        GeneratorFamily::Pigeonhole { holes } => format!("php_{holes}"),
        GeneratorFamily::PlantedSat { vars, clauses, seed } => {
            format!("planted_n{vars}_m{clauses}_s{seed}")
        }
    }
}

fn build(family: GeneratorFamily) -> Result<CnfFormula, GenerateError> {
    match family {
        GeneratorFamily::Random3Sat { vars, clauses, seed } => random_3sat(vars, clauses, seed),
        GeneratorFamily::Pigeonhole { holes } => pigeonhole(holes),
        GeneratorFamily::PlantedSat { vars, clauses, seed } => planted_3sat(vars, clauses, seed),
    }
}

fn with_seed(family: GeneratorFamily, offset: u64) -> GeneratorFamily {
    match family {
        GeneratorFamily::Random3Sat { vars, clauses, seed } => GeneratorFamily::Random3Sat {
            vars,
            clauses,
            seed: seed + offset,
        },
        GeneratorFamily::PlantedSat { vars, clauses, seed } => GeneratorFamily::PlantedSat {
            vars,
            clauses,
            seed: seed + offset,
        },
        php => php,
    }
}

/// Writes `spec.count` DIMACS files into `out_dir`, returning their paths.
/// Seeded families advance the seed by one per file; the pigeonhole family
/// is a single fixed instance regardless of count.
pub fn generate(spec: GeneratorSpec, out_dir: &Path) -> Result<Vec<PathBuf>, GenerateError> {
    fs::create_dir_all(out_dir)?;
    let count = match spec.family {
        GeneratorFamily::Pigeonhole { .. } => 1,
        _ => spec.count.max(1),
    };
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let family = with_seed(spec.family, i as u64);
        let formula = build(family)?;
        let path = out_dir.join(format!("{}.cnf", file_stem(family)));
        fs::write(&path, formula.to_dimacs())?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;

    #[test]
    fn random_3sat_is_deterministic() {
        let a = random_3sat(12, 50, 7).unwrap();
        let b = random_3sat(12, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_dimacs(), b.to_dimacs());
        assert_eq!(a.num_clauses(), 50);
        assert_eq!(a.total_literals(), 150);
    }

    #[test]
    fn random_3sat_rejects_tiny_var_count() {
        assert!(matches!(
            random_3sat(2, 5, 0),
            Err(GenerateError::TooFewVariables(2))
        ));
    }

    #[test]
    fn planted_is_satisfied_by_its_hidden_assignment() {
        // Reconstruct the hidden assignment the generator drew.
        use rand::Rng;
        use rand::SeedableRng;
        let f = planted_3sat(20, 90, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let hidden: Vec<bool> = (0..20).map(|_| rng.random_bool(0.5)).collect();
        assert!(crate::cnf::check_model(&f, &hidden));
    }

    #[test]
    fn pigeonhole_shape() {
        let f = pigeonhole(3).unwrap();
        assert_eq!(f.num_variables(), 12);
        // 4 pigeon clauses + 3 holes x C(4,2) pairwise exclusions.
        assert_eq!(f.num_clauses(), 4 + 3 * 6);
    }

    #[test]
    fn generated_files_are_valid_and_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GeneratorSpec {
            family: GeneratorFamily::Random3Sat {
                vars: 12,
                clauses: 50,
                seed: 7,
            },
            count: 2,
        };
        let first = generate(spec, dir.path().join("a").as_path()).unwrap();
        let second = generate(spec, dir.path().join("b").as_path()).unwrap();
        assert_eq!(first.len(), 2);
        for (a, b) in first.iter().zip(second.iter()) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
            let f = parse_dimacs(fs::File::open(a).unwrap()).unwrap();
            assert_eq!(f.num_clauses(), 50);
        }
    }
}
