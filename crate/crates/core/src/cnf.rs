//! CNF formulas, DIMACS parsing, and assignment semantics.
//!
//! Variables are the DIMACS indices `1..=num_variables`; a literal is a signed
//! variable index (positive = the variable, negative = its negation). Clauses
//! are deduplicated literal lists; a clause containing both `v` and `-v` is
//! rejected at parse time. An empty clause makes the formula trivially
//! unsatisfiable and is recorded as a formula-level flag rather than stored.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header line: `{0}`")]
    MalformedHeader(String),
    #[error("unexpected token `{0}`")]
    InvalidToken(String),
    #[error("literal {lit} out of range: declared variable count is {max}")]
    LiteralOutOfRange { lit: i64, max: usize },
    #[error("clause not terminated by 0 before end of input")]
    UnterminatedClause,
    #[error("tautological clause: variable {0} occurs in both polarities")]
    TautologicalClause(usize),
}

#[derive(Debug, Error)]
#[error("variable {0} is unassigned")]
pub struct UnassignedVariable(pub usize);

/// A disjunction of distinct literals. Non-empty once stored in a formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    lits: Vec<i32>,
}

impl Clause {
    /// Builds a clause from raw literals, deduplicating repeats and rejecting
    /// a `v`/`-v` co-occurrence.
    pub fn new(lits: Vec<i32>) -> Result<Self, ParseError> {
        let mut seen: Vec<i32> = Vec::with_capacity(lits.len());
        for lit in lits {
            debug_assert!(lit != 0);
            if seen.contains(&-lit) {
                return Err(ParseError::TautologicalClause(lit.unsigned_abs() as usize));
            }
            if !seen.contains(&lit) {
                seen.push(lit);
            }
        }
        Ok(Clause { lits: seen })
    }

    pub fn literals(&self) -> &[i32] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }
}

/// An immutable CNF formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_variables: usize,
    clauses: Vec<Clause>,
    total_literals: usize,
    has_empty_clause: bool,
}

impl CnfFormula {
    /// Assembles a formula from parsed clauses. Empty clauses set the
    /// trivially-UNSAT flag instead of being stored.
    pub fn new(num_variables: usize, clauses: Vec<Clause>) -> Result<Self, ParseError> {
        let mut stored = Vec::with_capacity(clauses.len());
        let mut has_empty_clause = false;
        let mut total_literals = 0;
        for clause in clauses {
            for &lit in clause.literals() {
                let var = lit.unsigned_abs() as usize;
                if var == 0 || var > num_variables {
                    return Err(ParseError::LiteralOutOfRange {
                        lit: i64::from(lit),
                        max: num_variables,
                    });
                }
            }
            if clause.is_empty() {
                has_empty_clause = true;
            } else {
                total_literals += clause.len();
                stored.push(clause);
            }
        }
        Ok(CnfFormula {
            num_variables,
            clauses: stored,
            total_literals,
            has_empty_clause,
        })
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn total_literals(&self) -> usize {
        self.total_literals
    }

    /// True when the input contained an empty clause, making the formula
    /// unsatisfiable regardless of the stored clauses.
    pub fn has_empty_clause(&self) -> bool {
        self.has_empty_clause
    }

    /// Serializes back to DIMACS text. The empty-clause flag round-trips as a
    /// single bare `0` line.
    pub fn to_dimacs(&self) -> String {
        let declared = self.clauses.len() + usize::from(self.has_empty_clause);
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.num_variables, declared);
        for clause in &self.clauses {
            for lit in clause.literals() {
                let _ = write!(out, "{lit} ");
            }
            out.push_str("0\n");
        }
        if self.has_empty_clause {
            out.push_str("0\n");
        }
        out
    }
}

/// Parses DIMACS CNF from a byte stream.
///
/// Comment lines start with `c`; a line consisting of `%` ends the input
/// (a convention in some benchmark archives). The clause count in the header
/// is advisory; the actual clauses win.
pub fn parse_dimacs<R: Read>(input: R) -> Result<CnfFormula, ParseError> {
    let reader = BufReader::new(input);
    let mut num_variables: Option<usize> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<i32> = Vec::new();

    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed == "%" {
            break;
        }
        if trimmed.starts_with('p') {
            if num_variables.is_some() {
                return Err(ParseError::MalformedHeader(trimmed.to_string()));
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(ParseError::MalformedHeader(trimmed.to_string()));
            }
            let vars: usize = fields[2]
                .parse()
                .map_err(|_| ParseError::MalformedHeader(trimmed.to_string()))?;
            // Clause count is advisory; parse it only to validate the syntax.
            let _declared: usize = fields[3]
                .parse()
                .map_err(|_| ParseError::MalformedHeader(trimmed.to_string()))?;
            num_variables = Some(vars);
            continue;
        }
        let max = num_variables.ok_or(ParseError::MissingHeader)?;
        for token in trimmed.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| ParseError::InvalidToken(token.to_string()))?;
            if value == 0 {
                clauses.push(Clause::new(std::mem::take(&mut pending))?);
                continue;
            }
            if value.unsigned_abs() as usize > max {
                return Err(ParseError::LiteralOutOfRange { lit: value, max });
            }
            pending.push(value as i32);
        }
    }

    let num_variables = num_variables.ok_or(ParseError::MissingHeader)?;
    if !pending.is_empty() {
        return Err(ParseError::UnterminatedClause);
    }
    CnfFormula::new(num_variables, clauses)
}

/// Parses a DIMACS file, transparently decompressing gzip input detected by
/// its magic bytes.
pub fn parse_dimacs_file(path: &Path) -> Result<CnfFormula, ParseError> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        parse_dimacs(flate2::read::GzDecoder::new(file))
    } else {
        parse_dimacs(file)
    }
}

/// A mutable tri-state assignment with a decision trail.
#[derive(Debug, Clone)]
pub struct Assignment {
    values: Vec<Option<bool>>,
    trail: Vec<TrailEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrailEntry {
    pub var: usize,
    pub value: bool,
    pub level: usize,
}

impl Assignment {
    pub fn new(num_variables: usize) -> Self {
        Assignment {
            values: vec![None; num_variables],
            trail: Vec::with_capacity(num_variables),
        }
    }

    pub fn num_variables(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn value(&self, var: usize) -> Option<bool> {
        self.values[var - 1]
    }

    /// True/false/unassigned state of a signed literal.
    #[inline]
    pub fn literal_value(&self, lit: i32) -> Option<bool> {
        self.values[(lit.unsigned_abs() as usize) - 1].map(|v| v == (lit > 0))
    }

    /// Pushes an assignment onto the trail. Levels must be non-decreasing and
    /// a variable may be assigned at most once.
    #[inline]
    pub fn assign(&mut self, var: usize, value: bool, level: usize) {
        debug_assert!(self.values[var - 1].is_none(), "double assignment of {var}");
        debug_assert!(self.trail.last().is_none_or(|e| e.level <= level));
        self.values[var - 1] = Some(value);
        self.trail.push(TrailEntry { var, value, level });
    }

    /// Pops trail entries with level greater than `level`.
    pub fn backtrack_to(&mut self, level: usize) {
        while let Some(entry) = self.trail.last() {
            if entry.level <= level {
                break;
            }
            self.values[entry.var - 1] = None;
            self.trail.pop();
        }
    }

    pub fn trail(&self) -> &[TrailEntry] {
        &self.trail
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }

    /// Extracts the full model. Panics if any variable is unassigned.
    pub fn to_model(&self) -> Vec<bool> {
        self.values.iter().map(|v| v.expect("complete")).collect()
    }
}

/// Evaluates a formula under a complete assignment: true iff every clause has
/// at least one satisfied literal.
pub fn check_assignment(
    formula: &CnfFormula,
    assignment: &Assignment,
) -> Result<bool, UnassignedVariable> {
    for var in 1..=formula.num_variables() {
        if assignment.value(var).is_none() {
            return Err(UnassignedVariable(var));
        }
    }
    if formula.has_empty_clause() {
        return Ok(false);
    }
    Ok(formula.clauses().iter().all(|clause| {
        clause
            .literals()
            .iter()
            .any(|&lit| assignment.literal_value(lit) == Some(true))
    }))
}

/// Evaluates a formula under a model given as a plain boolean vector indexed
/// by `var - 1`.
pub fn check_model(formula: &CnfFormula, model: &[bool]) -> bool {
    if model.len() < formula.num_variables() {
        return false;
    }
    if formula.has_empty_clause() {
        return false;
    }
    formula.clauses().iter().all(|clause| {
        clause.literals().iter().any(|&lit| {
            let var = lit.unsigned_abs() as usize;
            model[var - 1] == (lit > 0)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn formula(n: usize, clauses: &[&[i32]]) -> CnfFormula {
        let clauses = clauses
            .iter()
            .map(|c| Clause::new(c.to_vec()).unwrap())
            .collect();
        CnfFormula::new(n, clauses).unwrap()
    }

    #[test]
    fn parses_basic_formula() {
        let f = parse_dimacs("p cnf 2 2\n1 2 0\n-1 0\n".as_bytes()).unwrap();
        assert_eq!(f.num_variables(), 2);
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.clauses()[0].literals(), &[1, 2]);
        assert_eq!(f.clauses()[1].literals(), &[-1]);
        assert_eq!(f.total_literals(), 3);
    }

    #[test]
    fn rejects_tautological_clause() {
        let err = parse_dimacs("p cnf 1 1\n1 -1 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ParseError::TautologicalClause(1)));
    }

    #[test]
    fn rejects_literal_out_of_range() {
        let err = parse_dimacs("p cnf 3 1\n4 0\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            ParseError::LiteralOutOfRange { lit: 4, max: 3 }
        ));
    }

    #[test]
    fn rejects_missing_terminator() {
        let err = parse_dimacs("p cnf 2 1\n1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ParseError::UnterminatedClause));
    }

    #[test]
    fn rejects_malformed_header() {
        assert!(matches!(
            parse_dimacs("p cnf two 2\n".as_bytes()).unwrap_err(),
            ParseError::MalformedHeader(_)
        ));
        assert!(matches!(
            parse_dimacs("1 2 0\n".as_bytes()).unwrap_err(),
            ParseError::MissingHeader
        ));
    }

    #[test]
    fn deduplicates_literals() {
        let f = parse_dimacs("p cnf 2 1\n1 1 2 0\n".as_bytes()).unwrap();
        assert_eq!(f.clauses()[0].literals(), &[1, 2]);
        assert_eq!(f.total_literals(), 2);
    }

    #[test]
    fn header_clause_count_is_advisory() {
        let f = parse_dimacs("p cnf 2 99\n1 0\n-2 0\n".as_bytes()).unwrap();
        assert_eq!(f.num_clauses(), 2);
    }

    #[test]
    fn empty_clause_sets_flag() {
        let f = parse_dimacs("p cnf 2 2\n1 0\n0\n".as_bytes()).unwrap();
        assert!(f.has_empty_clause());
        assert_eq!(f.num_clauses(), 1);
    }

    #[test]
    fn clauses_may_span_lines_and_comments_skip() {
        let f = parse_dimacs("c hi\np cnf 3 1\n1\n2 3\n0\n".as_bytes()).unwrap();
        assert_eq!(f.clauses()[0].literals(), &[1, 2, 3]);
    }

    #[test]
    fn percent_line_ends_input() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n%\n0\n".as_bytes()).unwrap();
        assert_eq!(f.num_clauses(), 1);
    }

    #[test]
    fn check_assignment_examples() {
        let f = formula(2, &[&[1, 2], &[-1]]);
        let mut a = Assignment::new(2);
        a.assign(1, false, 0);
        a.assign(2, true, 0);
        assert_eq!(check_assignment(&f, &a).unwrap(), true);

        let contradiction = formula(1, &[&[1], &[-1]]);
        let mut a = Assignment::new(1);
        a.assign(1, true, 0);
        assert_eq!(check_assignment(&contradiction, &a).unwrap(), false);

        let empty = formula(1, &[]);
        let mut a = Assignment::new(1);
        a.assign(1, false, 0);
        assert_eq!(check_assignment(&empty, &a).unwrap(), true);
    }

    #[test]
    fn check_assignment_requires_completeness() {
        let f = formula(2, &[&[1, 2]]);
        let a = Assignment::new(2);
        assert!(check_assignment(&f, &a).is_err());
    }

    #[test]
    fn assignment_backtracks() {
        let mut a = Assignment::new(3);
        a.assign(1, true, 0);
        a.assign(2, false, 1);
        a.assign(3, true, 2);
        a.backtrack_to(0);
        assert_eq!(a.value(1), Some(true));
        assert_eq!(a.value(2), None);
        assert_eq!(a.value(3), None);
        assert_eq!(a.trail().len(), 1);
    }

    #[test]
    fn dimacs_round_trip() {
        let f = parse_dimacs("p cnf 4 3\n1 -2 0\n3 4 0\n0\n".as_bytes()).unwrap();
        let again = parse_dimacs(f.to_dimacs().as_bytes()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn gzip_input_is_detected() {
        use flate2::write::GzEncoder;
        use flate2::Compression;
        use std::io::Write;

        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(b"p cnf 2 1\n1 -2 0\n").unwrap();
        let bytes = enc.finish().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.cnf.gz");
        std::fs::write(&path, bytes).unwrap();
        let f = parse_dimacs_file(&path).unwrap();
        assert_eq!(f.num_clauses(), 1);
        assert_eq!(f.clauses()[0].literals(), &[1, -2]);
    }
}
