//! The 21-dimensional instance feature vector.
//!
//! Features summarize a formula's scale, clause structure, variable activity,
//! polarity balance, and constraint density. All ratios are division-guarded:
//! degenerate formulas (no clauses or no variables) yield zeros rather than
//! NaN, so the feature space is total. Entropies use the natural log.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnf::CnfFormula;

/// Number of feature dimensions.
pub const DIM: usize = 21;

/// Canonical feature names, in vector order.
pub const FEATURE_NAMES: [&str; DIM] = [
    "num_variables",
    "num_clauses",
    "var_clause_ratio",
    "avg_clause_length",
    "std_clause_length",
    "min_clause_length",
    "max_clause_length",
    "clause_length_entropy",
    "unit_clause_ratio",
    "binary_clause_ratio",
    "long_clause_ratio",
    "avg_var_frequency",
    "std_var_frequency",
    "max_var_frequency",
    "var_frequency_entropy",
    "singleton_var_ratio",
    "positive_literal_ratio",
    "balanced_var_ratio",
    "pure_literal_ratio",
    "polarity_bias",
    "constraint_density",
];

/// A fixed-order vector of the 21 features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64; DIM] {
        &self.0
    }

    /// Looks a feature up by canonical name.
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.0[i])
    }

    pub fn num_variables(&self) -> f64 {
        self.0[0]
    }

    pub fn num_clauses(&self) -> f64 {
        self.0[1]
    }
}

fn entropy(probabilities: impl Iterator<Item = f64>) -> f64 {
    let h: f64 = probabilities
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.max(0.0)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Computes the feature vector of a parsed formula.
///
/// Clause-length statistics run over stored clauses; variable frequency counts
/// clause memberships of both polarities over all declared variables. The
/// variable-frequency entropy treats each variable's share of the total
/// literal occurrences as its probability mass.
pub fn extract_features(formula: &CnfFormula) -> FeatureVector {
    let n = formula.num_variables();
    let m = formula.num_clauses();
    let total = formula.total_literals();

    let mut pos = vec![0u64; n];
    let mut neg = vec![0u64; n];
    let mut length_histogram: Vec<(usize, u64)> = Vec::new();
    let mut sum_len = 0u64;
    let mut sum_len_sq = 0.0f64;
    let mut min_len = usize::MAX;
    let mut max_len = 0usize;
    let mut units = 0u64;
    let mut binaries = 0u64;
    let mut long = 0u64;

    for clause in formula.clauses() {
        let len = clause.len();
        sum_len += len as u64;
        sum_len_sq += (len as f64) * (len as f64);
        min_len = min_len.min(len);
        max_len = max_len.max(len);
        match length_histogram.iter_mut().find(|(l, _)| *l == len) {
            Some((_, c)) => *c += 1,
            None => length_histogram.push((len, 1)),
        }
        match len {
            1 => units += 1,
            2 => binaries += 1,
            _ => {}
        }
        if len >= 5 {
            long += 1;
        }
        for &lit in clause.literals() {
            let var = lit.unsigned_abs() as usize - 1;
            if lit > 0 {
                pos[var] += 1;
            } else {
                neg[var] += 1;
            }
        }
    }

    let m_f = m as f64;
    let n_f = n as f64;
    let total_f = total as f64;

    let avg_len = ratio(sum_len as f64, m_f);
    let std_len = if m > 0 {
        (sum_len_sq / m_f - avg_len * avg_len).max(0.0).sqrt()
    } else {
        0.0
    };
    let length_entropy = if m > 0 {
        entropy(length_histogram.iter().map(|&(_, c)| c as f64 / m_f))
    } else {
        0.0
    };

    let mut sum_freq_sq = 0.0f64;
    let mut max_freq = 0u64;
    let mut singletons = 0u64;
    let mut balanced = 0u64;
    let mut pure = 0u64;
    let mut pos_total = 0u64;
    for v in 0..n {
        let freq = pos[v] + neg[v];
        sum_freq_sq += (freq as f64) * (freq as f64);
        max_freq = max_freq.max(freq);
        if freq == 1 {
            singletons += 1;
        }
        if pos[v] == neg[v] {
            balanced += 1;
        }
        if (pos[v] > 0) != (neg[v] > 0) {
            pure += 1;
        }
        pos_total += pos[v];
    }
    let avg_freq = ratio(total_f, n_f);
    let std_freq = if n > 0 {
        (sum_freq_sq / n_f - avg_freq * avg_freq).max(0.0).sqrt()
    } else {
        0.0
    };
    let freq_entropy = if total > 0 {
        entropy((0..n).map(|v| (pos[v] + neg[v]) as f64 / total_f))
    } else {
        0.0
    };

    let positive_ratio = ratio(pos_total as f64, total_f);
    let polarity_bias = if total > 0 {
        2.0 * (positive_ratio - 0.5).abs()
    } else {
        0.0
    };

    FeatureVector([
        n_f,
        m_f,
        ratio(n_f, m_f),
        avg_len,
        std_len,
        if m > 0 { min_len as f64 } else { 0.0 },
        if m > 0 { max_len as f64 } else { 0.0 },
        length_entropy,
        ratio(units as f64, m_f),
        ratio(binaries as f64, m_f),
        ratio(long as f64, m_f),
        avg_freq,
        std_freq,
        max_freq as f64,
        freq_entropy,
        ratio(singletons as f64, n_f),
        positive_ratio,
        ratio(balanced as f64, n_f),
        ratio(pure as f64, n_f),
        polarity_bias,
        if n > 0 && m > 0 {
            total_f / (n_f * m_f)
        } else {
            0.0
        },
    ])
}

/// Writes feature rows as CSV: an `instance` path column followed by the 21
/// canonical feature columns.
pub fn write_features_csv<W: Write>(
    out: W,
    rows: &[(String, FeatureVector)],
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["instance"];
    header.extend(FEATURE_NAMES);
    writer.write_record(&header)?;
    for (instance, vector) in rows {
        let mut record = vec![instance.clone()];
        record.extend(vector.0.iter().map(|v| format!("{v}")));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a features CSV written by [`write_features_csv`].
pub fn read_features_csv(path: &Path) -> Result<Vec<(String, FeatureVector)>, csv::Error> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let instance = record.get(0).unwrap_or_default().to_string();
        let mut values = [0.0; DIM];
        for (i, value) in values.iter_mut().enumerate() {
            *value = record
                .get(i + 1)
                .and_then(|s| s.parse().ok())
                .unwrap_or(0.0);
        }
        rows.push((instance, FeatureVector(values)));
    }
    Ok(rows)
}
