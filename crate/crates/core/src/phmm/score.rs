use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{baum_welch, forward_log_likelihood, init_with_columns, ProfileHmm, TrainingConfig};
use crate::dataset::SequenceRecord;
use crate::error::{Error, Result};
use crate::msa::Msa;

/// Null model: every residue drawn i.i.d. with probability 1/4.
pub fn null_log_likelihood(len: usize) -> f64 {
    len as f64 * 0.25f64.ln()
}

/// Natural-log odds of `seq` under `h` against the uniform background.
pub fn log_odds_score(h: &ProfileHmm, seq: &str) -> Result<f64> {
    Ok(forward_log_likelihood(h, seq)? - null_log_likelihood(seq.len()))
}

/// The `count` highest-occupancy columns (ties to the leftmost), returned
/// in ascending column order.
pub fn occupancy_columns(msa: &Msa, count: usize) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = (0..msa.width()).map(|c| (msa.occupancy(c), c)).collect();
    cols.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = cols.into_iter().take(count).map(|(_, c)| c).collect();
    chosen.sort_unstable();
    chosen
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub length: usize,
    pub scores: Vec<f64>,
}

/// Log-odds scores, one row per model length and one column per sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub labels: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("length");
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}", r.length);
            for s in &r.scores {
                let _ = write!(out, "\t{s:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty score table".into()))?;
        let labels: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
        let bad = |what: &str| Error::InvalidInput(format!("score table: {what}"));
        let mut rows = Vec::new();
        for line in lines {
            let mut fields = line.split('\t');
            let length = fields
                .next()
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| bad("bad length"))?;
            let scores: Vec<f64> = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad score"))?;
            if scores.len() != labels.len() {
                return Err(bad("row width differs from header"));
            }
            rows.push(ScoreRow { length, scores });
        }
        Ok(ScoreTable { labels, rows })
    }

    pub fn row(&self, length: usize) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.length == length)
    }

    /// `(label, score)` pairs of one row.
    pub fn scored(&self, row: &ScoreRow) -> Vec<(String, f64)> {
        self.labels
            .iter()
            .cloned()
            .zip(row.scores.iter().copied())
            .collect()
    }
}

/// For each requested length: pick match columns by occupancy rank, build
/// the starting model, train on the group and score every sequence.
pub fn length_sweep(
    msa: &Msa,
    seqs: &[SequenceRecord],
    lengths: &[usize],
    cfg: &TrainingConfig,
) -> Result<ScoreTable> {
    if lengths.is_empty() {
        return Err(Error::InvalidInput(
            "length sweep needs at least one length".into(),
        ));
    }
    if let Some(&bad) = lengths.iter().find(|&&l| l > msa.width()) {
        return Err(Error::LengthExceedsWidth {
            length: bad,
            width: msa.width(),
        });
    }
    if lengths.contains(&0) {
        return Err(Error::InvalidInput("model length must be positive".into()));
    }
    let residues: Vec<&str> = seqs.iter().map(|s| s.residues.as_str()).collect();
    let rows = lengths
        .par_iter()
        .map(|&length| {
            let h0 = init_with_columns(msa, &occupancy_columns(msa, length), cfg.pseudocount)?;
            let trained = baum_welch(&h0, &residues, cfg)?;
            let scores = residues
                .iter()
                .map(|s| log_odds_score(&trained.model, s))
                .collect::<Result<Vec<_>>>()?;
            Ok(ScoreRow { length, scores })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable {
        labels: seqs.iter().map(|s| s.label.clone()).collect(),
        rows,
    })
}

/// Index of the best-scoring sequence; the earliest wins ties. NaN scores
/// never win.
pub fn select_representative(scores: &[(String, f64)]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::InvalidInput(
            "no scored sequences to select from".into(),
        ));
    }
    let mut best = 0;
    for (i, (_, s)) in scores.iter().enumerate().skip(1) {
        if *s > scores[best].1 || scores[best].1.is_nan() {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msa::MsaRow;
    use crate::phmm::{init_from_msa, MATCH};

    fn scored(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(l, s)| (l.to_string(), *s)).collect()
    }

    #[test]
    fn argmax_and_tie_rule() {
        assert_eq!(
            select_representative(&scored(&[("a", 1.0), ("b", 2.0)])).unwrap(),
            1
        );
        assert_eq!(
            select_representative(&scored(&[("a", 2.0), ("b", 2.0)])).unwrap(),
            0
        );
        assert_eq!(
            select_representative(&scored(&[("a", f64::NAN), ("b", -5.0)])).unwrap(),
            1
        );
        assert!(select_representative(&[]).is_err());
    }

    #[test]
    fn uniform_degenerate_model_scores_zero() {
        let len = 6;
        let mut h = ProfileHmm::uniform(len, [[1.0, 1e-12, 1e-12]; 3]);
        for k in 0..=len {
            h.transitions[k][MATCH] = if k == len {
                [1.0 - 1e-12, 1e-12, 0.0]
            } else {
                [1.0 - 2e-12, 1e-12, 1e-12]
            };
        }
        h.check_invariants().unwrap();
        let s = log_odds_score(&h, "ACGTTA").unwrap();
        assert!(s.abs() < 1e-9, "{s}");
    }

    #[test]
    fn occupancy_rank_prefers_full_then_leftmost() {
        let msa = Msa::new(vec![
            MsaRow {
                label: "a".into(),
                residues: b"A-CG-".to_vec(),
            },
            MsaRow {
                label: "b".into(),
                residues: b"-TCGA".to_vec(),
            },
        ])
        .unwrap();
        assert_eq!(occupancy_columns(&msa, 2), vec![2, 3]);
        assert_eq!(occupancy_columns(&msa, 3), vec![0, 2, 3]);
    }

    #[test]
    fn sweep_shape_and_errors() {
        let rows = ["ACGTAC", "ACGTAC", "ACGAAC"];
        let msa = Msa::new(
            rows.iter()
                .enumerate()
                .map(|(i, r)| MsaRow {
                    label: format!("s{i}"),
                    residues: r.as_bytes().to_vec(),
                })
                .collect(),
        )
        .unwrap();
        let seqs: Vec<SequenceRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| SequenceRecord::new(format!("s{i}"), *r))
            .collect();
        let cfg = TrainingConfig::default();
        let table = length_sweep(&msa, &seqs, &[4, 5, 6], &cfg).unwrap();
        assert_eq!(
            table.rows.iter().map(|r| r.length).collect::<Vec<_>>(),
            vec![4, 5, 6]
        );
        assert_eq!(table.labels.len(), 3);
        assert!(matches!(
            length_sweep(&msa, &seqs, &[7], &cfg).unwrap_err(),
            Error::LengthExceedsWidth {
                length: 7,
                width: 6
            }
        ));
        assert!(length_sweep(&msa, &seqs, &[], &cfg).is_err());

        // full width on a gap-free alignment reproduces init_from_msa
        let h_full = init_with_columns(&msa, &occupancy_columns(&msa, 6), cfg.pseudocount).unwrap();
        assert_eq!(h_full, init_from_msa(&msa, &cfg).unwrap());

        let parsed = ScoreTable::from_tsv(&table.to_tsv()).unwrap();
        assert_eq!(parsed.labels, table.labels);
        for (a, b) in parsed.rows.iter().zip(&table.rows) {
            assert!(a
                .scores
                .iter()
                .zip(&b.scores)
                .all(|(x, y)| (x - y).abs() < 1e-6));
        }
    }
}
