//! Log-space forward and backward recurrences.

use super::{ProfileHmm, DELETE, INSERT, MATCH};
use crate::error::{Error, Result};
use crate::nucleotide::base_index;

#[inline]
pub(crate) fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[inline]
pub(crate) fn lse3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
}

/// Log parameters laid out for the recurrences.
pub(crate) struct LogParams {
    pub len: usize,
    pub matches: Vec<[f64; 4]>,
    pub inserts: Vec<[f64; 4]>,
    pub trans: Vec<[[f64; 3]; 3]>,
}

impl LogParams {
    pub fn new(h: &ProfileHmm) -> Self {
        let row = |r: &[f64; 4]| [ln(r[0]), ln(r[1]), ln(r[2]), ln(r[3])];
        LogParams {
            len: h.length,
            matches: h.match_emissions.iter().map(row).collect(),
            inserts: h.insert_emissions.iter().map(row).collect(),
            trans: h
                .transitions
                .iter()
                .map(|node| node.map(|from| from.map(ln)))
                .collect(),
        }
    }
}

/// Dense `(L + 1) x (n + 1)` log-probability tables, one per state kind.
/// Cell `(k, i)` refers to node `k` after `i` residues have been emitted.
#[derive(Debug, Clone)]
pub struct DpTable {
    pub len: usize,
    pub n: usize,
    cells: [Vec<f64>; 3],
}

impl DpTable {
    fn new(len: usize, n: usize) -> Self {
        let size = (len + 1) * (n + 1);
        DpTable {
            len,
            n,
            cells: [
                vec![f64::NEG_INFINITY; size],
                vec![f64::NEG_INFINITY; size],
                vec![f64::NEG_INFINITY; size],
            ],
        }
    }

    #[inline]
    pub fn get(&self, state: usize, k: usize, i: usize) -> f64 {
        self.cells[state][k * (self.n + 1) + i]
    }

    #[inline]
    fn set(&mut self, state: usize, k: usize, i: usize, v: f64) {
        let n = self.n;
        self.cells[state][k * (n + 1) + i] = v;
    }
}

pub(crate) fn encode(seq: &str) -> Result<Vec<usize>> {
    if seq.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty sequence".into()));
    }
    seq.bytes()
        .enumerate()
        .map(|(i, b)| {
            base_index(b.to_ascii_uppercase()).ok_or(Error::InvalidResidue {
                label: "query".into(),
                position: i + 1,
                character: b as char,
            })
        })
        .collect()
}

pub(crate) fn forward_encoded(p: &LogParams, x: &[usize]) -> (DpTable, f64) {
    let (len, n) = (p.len, x.len());
    let mut f = DpTable::new(len, n);
    f.set(MATCH, 0, 0, 0.0);
    for i in 0..=n {
        for k in 0..=len {
            if k >= 1 && i >= 1 {
                let t = &p.trans[k - 1];
                let v = p.matches[k - 1][x[i - 1]]
                    + lse3(
                        f.get(MATCH, k - 1, i - 1) + t[MATCH][MATCH],
                        f.get(INSERT, k - 1, i - 1) + t[INSERT][MATCH],
                        f.get(DELETE, k - 1, i - 1) + t[DELETE][MATCH],
                    );
                f.set(MATCH, k, i, v);
            }
            if i >= 1 {
                let t = &p.trans[k];
                let v = p.inserts[k][x[i - 1]]
                    + lse3(
                        f.get(MATCH, k, i - 1) + t[MATCH][INSERT],
                        f.get(INSERT, k, i - 1) + t[INSERT][INSERT],
                        f.get(DELETE, k, i - 1) + t[DELETE][INSERT],
                    );
                f.set(INSERT, k, i, v);
            }
            if k >= 1 {
                let t = &p.trans[k - 1];
                let v = lse3(
                    f.get(MATCH, k - 1, i) + t[MATCH][DELETE],
                    f.get(INSERT, k - 1, i) + t[INSERT][DELETE],
                    f.get(DELETE, k - 1, i) + t[DELETE][DELETE],
                );
                f.set(DELETE, k, i, v);
            }
        }
    }
    let t = &p.trans[len];
    let total = lse3(
        f.get(MATCH, len, n) + t[MATCH][MATCH],
        f.get(INSERT, len, n) + t[INSERT][MATCH],
        f.get(DELETE, len, n) + t[DELETE][MATCH],
    );
    (f, total)
}

pub(crate) fn backward_encoded(p: &LogParams, x: &[usize]) -> DpTable {
    let (len, n) = (p.len, x.len());
    let mut b = DpTable::new(len, n);
    for i in (0..=n).rev() {
        for k in (0..=len).rev() {
            // continuation log-probabilities after taking each move
            let to_match = if k == len {
                if i == n {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else if i < n {
                p.matches[k][x[i]] + b.get(MATCH, k + 1, i + 1)
            } else {
                f64::NEG_INFINITY
            };
            let to_insert = if i < n {
                p.inserts[k][x[i]] + b.get(INSERT, k, i + 1)
            } else {
                f64::NEG_INFINITY
            };
            let to_delete = if k < len {
                b.get(DELETE, k + 1, i)
            } else {
                f64::NEG_INFINITY
            };
            for from in [MATCH, INSERT, DELETE] {
                if from == DELETE && k == 0 {
                    continue;
                }
                let t = &p.trans[k][from];
                let v = lse3(
                    t[MATCH] + to_match,
                    t[INSERT] + to_insert,
                    t[DELETE] + to_delete,
                );
                b.set(from, k, i, v);
            }
        }
    }
    b
}

/// Forward table and total log-likelihood.
pub fn forward(h: &ProfileHmm, seq: &str) -> Result<(DpTable, f64)> {
    let x = encode(seq)?;
    Ok(forward_encoded(&LogParams::new(h), &x))
}

pub fn backward(h: &ProfileHmm, seq: &str) -> Result<DpTable> {
    let x = encode(seq)?;
    Ok(backward_encoded(&LogParams::new(h), &x))
}

/// `ln P(seq | h)` summed over all state paths.
pub fn forward_log_likelihood(h: &ProfileHmm, seq: &str) -> Result<f64> {
    let x = encode(seq)?;
    Ok(super::scaled::log_likelihood(
        &super::scaled::ProbParams::new(h),
        &x,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ProfileHmm {
        let mut h = ProfileHmm::uniform(2, [[0.8, 0.1, 0.1], [0.6, 0.3, 0.1], [0.7, 0.1, 0.2]]);
        h.match_emissions[0] = [0.7, 0.1, 0.1, 0.1];
        h.match_emissions[1] = [0.1, 0.1, 0.1, 0.7];
        h
    }

    #[test]
    fn backward_agrees_with_forward() {
        let h = toy();
        for seq in ["A", "AT", "ACT", "GGTA"] {
            let (_, ll) = forward(&h, seq).unwrap();
            let b = backward(&h, seq).unwrap();
            assert!((b.get(MATCH, 0, 0) - ll).abs() < 1e-12, "{seq}");
        }
    }

    #[test]
    fn log_likelihood_is_non_positive_and_ordered() {
        let mut h = ProfileHmm::uniform(
            1,
            [[0.98, 0.01, 0.01], [0.98, 0.01, 0.01], [0.98, 0.01, 0.01]],
        );
        h.match_emissions[0] = [1.0 - 3e-9, 1e-9, 1e-9, 1e-9];
        let a = forward_log_likelihood(&h, "A").unwrap();
        let c = forward_log_likelihood(&h, "C").unwrap();
        assert!(a > c);
        assert!(a <= 0.0 && c <= 0.0);
        assert!(c.is_finite());
    }

    #[test]
    fn rejects_bad_queries() {
        let h = toy();
        assert!(forward_log_likelihood(&h, "").is_err());
        assert!(matches!(
            forward_log_likelihood(&h, "ACN").unwrap_err(),
            Error::InvalidResidue { position: 3, .. }
        ));
    }
}
