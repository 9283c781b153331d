//! Baum-Welch training.
//!
//! The M-step is the exact maximum-likelihood update restricted to
//! parameters at or above [`PROBABILITY_FLOOR`], so every iteration is a
//! generalized EM step and the total log-likelihood never decreases. The
//! pseudocount only enters through the alignment-derived starting model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dp::encode;
use super::scaled::{sequence_counts, ProbParams};
use super::TrainingConfig;
use super::{has_state, has_target, ProfileHmm, DELETE, INSERT, MATCH, PROBABILITY_FLOOR};
use crate::error::{Error, Result};

/// Posterior expected usage of every parameter, summed over sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCounts {
    pub match_emissions: Vec<[f64; 4]>,
    pub insert_emissions: Vec<[f64; 4]>,
    pub transitions: Vec<[[f64; 3]; 3]>,
}

impl ExpectedCounts {
    pub(crate) fn zeros(len: usize) -> Self {
        ExpectedCounts {
            match_emissions: vec![[0.0; 4]; len],
            insert_emissions: vec![[0.0; 4]; len + 1],
            transitions: vec![[[0.0; 3]; 3]; len + 1],
        }
    }

    fn add(&mut self, other: &ExpectedCounts) {
        let add4 = |a: &mut [f64; 4], b: &[f64; 4]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        for (a, b) in self.match_emissions.iter_mut().zip(&other.match_emissions) {
            add4(a, b);
        }
        for (a, b) in self
            .insert_emissions
            .iter_mut()
            .zip(&other.insert_emissions)
        {
            add4(a, b);
        }
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            for (ra, rb) in a.iter_mut().zip(b) {
                ra.iter_mut().zip(rb).for_each(|(x, y)| *x += y);
            }
        }
    }
}

/// Total log-likelihood and expected counts. Per-sequence work runs in
/// parallel; the reduction follows input order so results are reproducible.
pub fn expected_counts(h: &ProfileHmm, seqs: &[&str]) -> Result<(f64, ExpectedCounts)> {
    let p = ProbParams::new(h);
    let encoded: Vec<Vec<usize>> = seqs.iter().map(|s| encode(s)).collect::<Result<_>>()?;
    let per_seq: Vec<(f64, ExpectedCounts)> =
        encoded.par_iter().map(|x| sequence_counts(&p, x)).collect();
    let mut total = ExpectedCounts::zeros(h.length);
    let mut ll = 0.0;
    for (l, c) in &per_seq {
        ll += l;
        total.add(c);
    }
    Ok((ll, total))
}

/// Maximizes `sum c_i ln p_i` over the simplex with every `p_i >= floor`:
/// `p_i = max(floor, c_i / lambda)`. Returns `None` when all counts are
/// zero, in which case any distribution is optimal.
pub(crate) fn floored_ml(counts: &[f64], floor: f64) -> Option<Vec<f64>> {
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut pinned = vec![false; counts.len()];
    loop {
        let free_mass = 1.0 - floor * pinned.iter().filter(|&&p| p).count() as f64;
        let free_counts: f64 = counts
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(c, _)| c)
            .sum();
        let probs: Vec<f64> = counts
            .iter()
            .zip(&pinned)
            .map(|(&c, &p)| {
                if p {
                    floor
                } else {
                    free_mass * c / free_counts
                }
            })
            .collect();
        let mut changed = false;
        for (i, &q) in probs.iter().enumerate() {
            if !pinned[i] && q < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            return Some(probs);
        }
    }
}

fn m_step(h: &ProfileHmm, c: &ExpectedCounts) -> ProfileHmm {
    let mut next = h.clone();
    let len = h.length;
    for (row, counts) in next.match_emissions.iter_mut().zip(&c.match_emissions) {
        if let Some(p) = floored_ml(counts, PROBABILITY_FLOOR) {
            row.copy_from_slice(&p);
        }
    }
    for (row, counts) in next.insert_emissions.iter_mut().zip(&c.insert_emissions) {
        if let Some(p) = floored_ml(counts, PROBABILITY_FLOOR) {
            row.copy_from_slice(&p);
        }
    }
    for k in 0..=len {
        for from in [MATCH, INSERT, DELETE] {
            if !has_state(len, k, from) {
                continue;
            }
            let targets: Vec<usize> = (0..3).filter(|&to| has_target(len, k, to)).collect();
            let counts: Vec<f64> = targets
                .iter()
                .map(|&to| c.transitions[k][from][to])
                .collect();
            if let Some(p) = floored_ml(&counts, PROBABILITY_FLOOR) {
                for (&to, v) in targets.iter().zip(p) {
                    next.transitions[k][from][to] = v;
                }
            }
        }
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Training {
    pub model: ProfileHmm,
    /// Total log-likelihood of the starting model followed by the value
    /// after each update.
    pub ll_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs EM until the total log-likelihood moves by less than
/// `ll_tolerance` or `max_iterations` updates have been made.
pub fn baum_welch(h0: &ProfileHmm, seqs: &[&str], cfg: &TrainingConfig) -> Result<Training> {
    if seqs.is_empty() {
        return Err(Error::InvalidInput(
            "Baum-Welch needs at least one training sequence".into(),
        ));
    }
    let mut model = h0.clone();
    let (mut ll, mut counts) = expected_counts(&model, seqs)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        model = m_step(&model, &counts);
        iterations += 1;
        let (next_ll, next_counts) = expected_counts(&model, seqs)?;
        trace.push(next_ll);
        let delta = (next_ll - ll).abs();
        ll = next_ll;
        counts = next_counts;
        if delta < cfg.ll_tolerance {
            converged = true;
            break;
        }
    }
    Ok(Training {
        model,
        ll_trace: trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phmm::dp::{backward_encoded, forward_encoded, LogParams};

    use crate::msa::{Msa, MsaRow};
    use crate::phmm::{forward_log_likelihood, init_from_msa};

    /// Same posterior sums computed directly in log space.
    fn log_space_counts(p: &LogParams, x: &[usize]) -> (f64, ExpectedCounts) {
        let (f, ll) = forward_encoded(p, x);
        let b = backward_encoded(p, x);
        let (len, n) = (p.len, x.len());
        let mut c = ExpectedCounts::zeros(len);
        let post = |v: f64| (v - ll).exp();

        for i in 1..=n {
            let sym = x[i - 1];
            for k in 1..=len {
                c.match_emissions[k - 1][sym] += post(f.get(MATCH, k, i) + b.get(MATCH, k, i));
            }
            for k in 0..=len {
                c.insert_emissions[k][sym] += post(f.get(INSERT, k, i) + b.get(INSERT, k, i));
            }
        }

        for k in 0..=len {
            for from in [MATCH, INSERT, DELETE] {
                if !has_state(len, k, from) {
                    continue;
                }
                let t = &p.trans[k][from];
                for i in 0..=n {
                    let fv = f.get(from, k, i);
                    if fv == f64::NEG_INFINITY {
                        continue;
                    }
                    let row = &mut c.transitions[k][from];
                    if k == len {
                        if i == n {
                            row[MATCH] += post(fv + t[MATCH]);
                        }
                    } else if i < n {
                        row[MATCH] +=
                            post(fv + t[MATCH] + p.matches[k][x[i]] + b.get(MATCH, k + 1, i + 1));
                    }
                    if i < n {
                        row[INSERT] +=
                            post(fv + t[INSERT] + p.inserts[k][x[i]] + b.get(INSERT, k, i + 1));
                    }
                    if k < len {
                        row[DELETE] += post(fv + t[DELETE] + b.get(DELETE, k + 1, i));
                    }
                }
            }
        }
        (ll, c)
    }

    #[test]
    fn scaled_counts_match_log_space_counts() {
        let mut h = ProfileHmm::uniform(4, [[0.8, 0.15, 0.05], [0.5, 0.4, 0.1], [0.6, 0.1, 0.3]]);
        h.match_emissions[1] = [0.1, 0.6, 0.2, 0.1];
        h.insert_emissions[2] = [0.4, 0.3, 0.2, 0.1];
        for seq in ["A", "ACGT", "TTGACCA", "GGGGGGGGGGGG"] {
            let x = encode(seq).unwrap();
            let (ll_log, c_log) = log_space_counts(&LogParams::new(&h), &x);
            let (ll, c) = sequence_counts(&ProbParams::new(&h), &x);
            assert!((ll - ll_log).abs() < 1e-10, "{seq}");
            let flat = |c: &ExpectedCounts| -> Vec<f64> {
                c.match_emissions
                    .iter()
                    .chain(&c.insert_emissions)
                    .flatten()
                    .copied()
                    .chain(c.transitions.iter().flatten().flatten().copied())
                    .collect()
            };
            for (a, b) in flat(&c).iter().zip(flat(&c_log)) {
                assert!((a - b).abs() < 1e-10, "{seq}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn floored_ml_matches_plain_ml_when_counts_are_positive() {
        let p = floored_ml(&[1.0, 3.0], 1e-12).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let z = floored_ml(&[0.0, 2.0, 0.0], 1e-3).unwrap();
        assert_eq!(z[0], 1e-3);
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(floored_ml(&[0.0, 0.0], 1e-12).is_none());
    }

    #[test]
    fn training_does_not_lower_the_likelihood() {
        let msa = Msa::new(vec![MsaRow {
            label: "a".into(),
            residues: b"ACGT".to_vec(),
        }])
        .unwrap();
        let cfg = TrainingConfig::default();
        let h0 = init_from_msa(&msa, &cfg).unwrap();
        let t = baum_welch(&h0, &["ACGT"], &cfg).unwrap();
        let before = forward_log_likelihood(&h0, "ACGT").unwrap();
        let after = forward_log_likelihood(&t.model, "ACGT").unwrap();
        assert!(after >= before - 1e-12);
        assert!(t.ll_trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
        t.model.check_invariants().unwrap();
    }

    #[test]
    fn expected_transition_mass_matches_sequence_count() {
        // every path leaves the begin state exactly once
        let h = ProfileHmm::uniform(3, [[0.7, 0.2, 0.1], [0.5, 0.4, 0.1], [0.6, 0.1, 0.3]]);
        let (_, c) = expected_counts(&h, &["ACG", "TTAC", "G"]).unwrap();
        let begin: f64 = c.transitions[0][MATCH].iter().sum();
        assert!((begin - 3.0).abs() < 1e-9);
        let emitted: f64 = c
            .match_emissions
            .iter()
            .chain(&c.insert_emissions)
            .flatten()
            .sum();
        assert!((emitted - 8.0).abs() < 1e-9);
    }

    #[test]
    fn empty_training_set_fails() {
        let h = ProfileHmm::uniform(1, [[0.9, 0.05, 0.05]; 3]);
        assert!(baum_welch(&h, &[], &TrainingConfig::default()).is_err());
    }
}
