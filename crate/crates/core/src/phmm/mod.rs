//! Nucleotide profile HMMs in the Krogh match/insert/delete architecture.
//!
//! Node `k` runs from 0 to `L`. Node 0 holds the begin state (stored in the
//! match slot) and insert state `I0`; nodes `1..=L` hold `Mk`, `Ik`, `Dk`.
//! From any state of node `k` the model moves to `M(k+1)`, `Ik` or
//! `D(k+1)`. At node `L` the "match" target is the end state and there is no
//! delete target; node 0 has no delete state. Those structurally absent
//! entries are stored as exact zeros and excluded from normalization checks.

mod dp;
mod scaled;
mod score;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::msa::Msa;
use crate::nucleotide::{base_index, compatible_bases, GAP};

pub use dp::{backward, forward, forward_log_likelihood, DpTable};
pub use score::{
    length_sweep, log_odds_score, null_log_likelihood, occupancy_columns, select_representative,
    ScoreRow, ScoreTable,
};
pub use train::{baum_welch, expected_counts, ExpectedCounts, Training};

/// Probability floor for every structurally present parameter.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub const MATCH: usize = 0;
pub const INSERT: usize = 1;
pub const DELETE: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHmm {
    pub length: usize,
    /// `L` rows over `ACGT`; row `k - 1` belongs to `Mk`.
    pub match_emissions: Vec<[f64; 4]>,
    /// `L + 1` rows over `ACGT`; row `k` belongs to `Ik`.
    pub insert_emissions: Vec<[f64; 4]>,
    /// `L + 1` nodes of `[from][to]` with from/to indexed by
    /// [`MATCH`], [`INSERT`], [`DELETE`].
    pub transitions: Vec<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub pseudocount: f64,
    pub max_iterations: usize,
    pub ll_tolerance: f64,
    pub gap_threshold: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            pseudocount: 0.01,
            max_iterations: 100,
            ll_tolerance: 1e-4,
            gap_threshold: 0.5,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pseudocount > 0.0)
            || self.max_iterations < 1
            || !(self.ll_tolerance > 0.0)
            || !(self.gap_threshold > 0.0 && self.gap_threshold < 1.0)
        {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// True when `from` at node `k` of a length-`len` model exists.
pub fn has_state(len: usize, k: usize, from: usize) -> bool {
    !(from == DELETE && k == 0) && k <= len
}

/// True when the `to` move out of node `k` exists.
pub fn has_target(len: usize, k: usize, to: usize) -> bool {
    !(to == DELETE && k == len)
}

impl ProfileHmm {
    /// Uniform emissions with the given transition rows at every node.
    pub fn uniform(length: usize, trans: [[f64; 3]; 3]) -> Self {
        let mut h = ProfileHmm {
            length,
            match_emissions: vec![[0.25; 4]; length],
            insert_emissions: vec![[0.25; 4]; length + 1],
            transitions: vec![trans; length + 1],
        };
        h.normalize_structure();
        h
    }

    /// Zeroes structurally absent entries and renormalizes each
    /// transition row over its present targets.
    pub fn normalize_structure(&mut self) {
        let len = self.length;
        for k in 0..=len {
            for from in 0..3 {
                let row = &mut self.transitions[k][from];
                if !has_state(len, k, from) {
                    *row = [0.0; 3];
                    continue;
                }
                if !has_target(len, k, DELETE) {
                    row[DELETE] = 0.0;
                }
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|p| *p /= s);
                }
            }
        }
    }

    /// Checks every normalization and floor invariant.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let len = self.length;
        if self.match_emissions.len() != len
            || self.insert_emissions.len() != len + 1
            || self.transitions.len() != len + 1
        {
            return Err("table dimensions disagree with model length".into());
        }
        let check_row = |what: String, row: &[f64]| -> std::result::Result<(), String> {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(format!("{what} sums to {s}"));
            }
            if let Some(p) = row
                .iter()
                .find(|&&p| !(p >= PROBABILITY_FLOOR * (1.0 - 1e-9)))
            {
                return Err(format!("{what} has probability {p} below the floor"));
            }
            Ok(())
        };
        for (k, row) in self.match_emissions.iter().enumerate() {
            check_row(format!("match emission {}", k + 1), row)?;
        }
        for (k, row) in self.insert_emissions.iter().enumerate() {
            check_row(format!("insert emission {k}"), row)?;
        }
        for k in 0..=len {
            for from in 0..3 {
                let row = &self.transitions[k][from];
                if !has_state(len, k, from) {
                    if row.iter().any(|&p| p != 0.0) {
                        return Err(format!("absent state {from} at node {k} has mass"));
                    }
                    continue;
                }
                let present: Vec<f64> = (0..3)
                    .filter(|&to| has_target(len, k, to))
                    .map(|to| row[to])
                    .collect();
                if (0..3).any(|to| !has_target(len, k, to) && row[to] != 0.0) {
                    return Err(format!("absent move out of node {k} has mass"));
                }
                check_row(
                    format!("transitions from state {from} at node {k}"),
                    &present,
                )?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
            ll_trace: Vec::new(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(ModelDocument::from_json(text)?.model)
    }
}

/// Versioned on-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model: ProfileHmm,
    #[serde(default)]
    pub ll_trace: Vec<f64>,
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        doc.model.check_invariants().map_err(Error::InvalidInput)?;
        Ok(doc)
    }
}

fn add_residue(counts: &mut [f64; 4], b: u8) {
    if let Some(i) = base_index(b) {
        counts[i] += 1.0;
    } else if let Some(set) = compatible_bases(b) {
        for &c in set {
            counts[base_index(c).unwrap()] += 1.0 / set.len() as f64;
        }
    }
}

fn normalize_with_pseudocount(counts: &[f64], pseudocount: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + pseudocount * counts.len() as f64;
    counts
        .iter()
        .map(|c| ((c + pseudocount) / total).max(PROBABILITY_FLOOR))
        .collect()
}

/// Builds a model whose match states are the given alignment columns
/// (ascending), with counts from each row's implied state path plus a
/// pseudocount.
pub fn init_with_columns(msa: &Msa, columns: &[usize], pseudocount: f64) -> Result<ProfileHmm> {
    if columns.is_empty() {
        return Err(Error::InvalidInput(
            "profile needs at least one match column".into(),
        ));
    }
    if columns.windows(2).any(|w| w[0] >= w[1]) || columns.iter().any(|&c| c >= msa.width()) {
        return Err(Error::InvalidInput(
            "match columns must be ascending and in range".into(),
        ));
    }
    let len = columns.len();
    let mut node_of = vec![None; msa.width()];
    for (k, &c) in columns.iter().enumerate() {
        node_of[c] = Some(k + 1);
    }

    let mut match_counts = vec![[0.0; 4]; len];
    let mut insert_counts = vec![[0.0; 4]; len + 1];
    let mut trans_counts = vec![[[0.0; 3]; 3]; len + 1];
    for row in &msa.rows {
        let (mut node, mut state) = (0usize, MATCH);
        for (c, &b) in row.residues.iter().enumerate() {
            match node_of[c] {
                Some(k) => {
                    let to = if b == GAP { DELETE } else { MATCH };
                    trans_counts[node][state][to] += 1.0;
                    if to == MATCH {
                        add_residue(&mut match_counts[k - 1], b);
                    }
                    node = k;
                    state = to;
                }
                None if b != GAP => {
                    trans_counts[node][state][INSERT] += 1.0;
                    add_residue(&mut insert_counts[node], b);
                    state = INSERT;
                }
                None => {}
            }
        }
        trans_counts[len][state][MATCH] += 1.0;
    }

    let to_row = |v: Vec<f64>| -> [f64; 4] { [v[0], v[1], v[2], v[3]] };
    let mut h = ProfileHmm {
        length: len,
        match_emissions: match_counts
            .iter()
            .map(|c| to_row(normalize_with_pseudocount(c, pseudocount)))
            .collect(),
        insert_emissions: insert_counts
            .iter()
            .map(|c| to_row(normalize_with_pseudocount(c, pseudocount)))
            .collect(),
        transitions: vec![[[0.0; 3]; 3]; len + 1],
    };
    for k in 0..=len {
        for from in 0..3 {
            if !has_state(len, k, from) {
                continue;
            }
            let targets: Vec<usize> = (0..3).filter(|&to| has_target(len, k, to)).collect();
            let counts: Vec<f64> = targets
                .iter()
                .map(|&to| trans_counts[k][from][to])
                .collect();
            for (&to, p) in targets
                .iter()
                .zip(normalize_with_pseudocount(&counts, pseudocount))
            {
                h.transitions[k][from][to] = p;
            }
        }
    }
    Ok(h)
}

/// Match states are the columns whose gap fraction is below the threshold.
pub fn init_from_msa(msa: &Msa, cfg: &TrainingConfig) -> Result<ProfileHmm> {
    let columns: Vec<usize> = (0..msa.width())
        .filter(|&c| msa.gap_fraction(c) < cfg.gap_threshold)
        .collect();
    if columns.is_empty() {
        return Err(Error::NoMatchColumns {
            threshold: cfg.gap_threshold,
        });
    }
    init_with_columns(msa, &columns, cfg.pseudocount)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msa::MsaRow;

    fn msa(rows: &[&str]) -> Msa {
        Msa::new(
            rows.iter()
                .enumerate()
                .map(|(i, r)| MsaRow {
                    label: format!("r{i}"),
                    residues: r.as_bytes().to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn consensus_columns_become_match_states() {
        let h = init_from_msa(&msa(&["ACGT", "ACGT", "ACGT"]), &TrainingConfig::default()).unwrap();
        assert_eq!(h.length, 4);
        let first = h.match_emissions[0];
        assert!(first[0] > first[1] && first[0] > first[2] && first[0] > first[3]);
        h.check_invariants().unwrap();
    }

    #[test]
    fn gap_heavy_column_is_not_a_match_state() {
        let h = init_from_msa(&msa(&["ACGT", "A-GT", "A-GT"]), &TrainingConfig::default()).unwrap();
        assert_eq!(h.length, 3);
        // the single C lands in insert state I1
        assert!(h.insert_emissions[1][1] > 0.9);
        h.check_invariants().unwrap();
    }

    #[test]
    fn all_gap_dominated_msa_fails() {
        let m = msa(&["A--", "-C-", "--G"]);
        let err = init_from_msa(&m, &TrainingConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoMatchColumns { .. }));
    }

    #[test]
    fn delete_paths_are_counted() {
        let h = init_from_msa(
            &msa(&["ACGT", "ACGT", "A-GT", "ACGT"]),
            &TrainingConfig::default(),
        )
        .unwrap();
        assert_eq!(h.length, 4);
        let m1 = h.transitions[1][MATCH];
        assert!((m1[DELETE] - (1.01 / 4.03)).abs() < 1e-12, "{m1:?}");
        let d2 = h.transitions[2][DELETE];
        assert!(d2[MATCH] > 0.9);
    }

    #[test]
    fn json_round_trip_is_versioned() {
        let h = init_from_msa(&msa(&["ACGT", "AGGT"]), &TrainingConfig::default()).unwrap();
        let text = h.to_json().unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(ProfileHmm::from_json(&text).unwrap(), h);
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(ProfileHmm::from_json(&bumped).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        let bad = TrainingConfig {
            gap_threshold: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
