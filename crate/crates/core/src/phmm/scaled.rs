//! Probability-space forward/backward with one scale factor per sequence
//! position. Row `i` of the forward table is divided by `c_i`, the sum of
//! its unscaled entries, so `ln P = sum ln c_i + ln P_hat`. Backward rows use
//! the same factors, which makes `f_hat * b_hat / P_hat` a posterior.
//!
//! This is what training and scoring run on; the log-space tables in `dp`
//! compute the same quantities more slowly.

use super::train::ExpectedCounts;
use super::{ProfileHmm, DELETE, INSERT, MATCH};

pub(crate) struct ProbParams<'a> {
    len: usize,
    h: &'a ProfileHmm,
}

impl<'a> ProbParams<'a> {
    pub fn new(h: &'a ProfileHmm) -> Self {
        ProbParams { len: h.length, h }
    }
}

/// Row-major `(n + 1) x (L + 1)` tables, one per state kind.
pub(crate) struct Scaled {
    width: usize,
    m: Vec<f64>,
    ins: Vec<f64>,
    del: Vec<f64>,
    /// `c_i` for rows `1..=n`; `scale[0] = 1`.
    scale: Vec<f64>,
}

impl Scaled {
    fn new(len: usize, n: usize) -> Self {
        let size = (len + 1) * (n + 1);
        Scaled {
            width: len + 1,
            m: vec![0.0; size],
            ins: vec![0.0; size],
            del: vec![0.0; size],
            scale: vec![1.0; n + 1],
        }
    }

    #[inline]
    fn at(&self, k: usize, i: usize) -> usize {
        i * self.width + k
    }

    #[inline]
    fn get(&self, state: usize, k: usize, i: usize) -> f64 {
        let idx = self.at(k, i);
        match state {
            MATCH => self.m[idx],
            INSERT => self.ins[idx],
            _ => self.del[idx],
        }
    }
}

/// Scaled forward table and `ln P(x | h)`.
pub(crate) fn forward(p: &ProbParams, x: &[usize]) -> (Scaled, f64) {
    let (len, n) = (p.len, x.len());
    let h = p.h;
    let mut f = Scaled::new(len, n);
    // row 0: Begin and the silent delete chain
    f.m[0] = 1.0;
    for k in 1..=len {
        let t = &h.transitions[k - 1];
        let (a, b) = (f.at(k - 1, 0), f.at(k, 0));
        f.del[b] =
            f.m[a] * t[MATCH][DELETE] + f.ins[a] * t[INSERT][DELETE] + f.del[a] * t[DELETE][DELETE];
    }
    let mut log_scale = 0.0;
    for i in 1..=n {
        let sym = x[i - 1];
        let mut sum = 0.0;
        for k in 0..=len {
            let cur = f.at(k, i);
            let up = f.at(k, i - 1);
            let t = &h.transitions[k];
            let vi = h.insert_emissions[k][sym]
                * (f.m[up] * t[MATCH][INSERT]
                    + f.ins[up] * t[INSERT][INSERT]
                    + f.del[up] * t[DELETE][INSERT]);
            f.ins[cur] = vi;
            sum += vi;
            if k >= 1 {
                let tp = &h.transitions[k - 1];
                let diag = f.at(k - 1, i - 1);
                let vm = h.match_emissions[k - 1][sym]
                    * (f.m[diag] * tp[MATCH][MATCH]
                        + f.ins[diag] * tp[INSERT][MATCH]
                        + f.del[diag] * tp[DELETE][MATCH]);
                let left = f.at(k - 1, i);
                let vd = f.m[left] * tp[MATCH][DELETE]
                    + f.ins[left] * tp[INSERT][DELETE]
                    + f.del[left] * tp[DELETE][DELETE];
                f.m[cur] = vm;
                f.del[cur] = vd;
                sum += vm + vd;
            }
        }
        let row = f.at(0, i)..f.at(len, i) + 1;
        let inv = 1.0 / sum;
        for v in f.m[row.clone()]
            .iter_mut()
            .chain(&mut f.ins[row.clone()])
            .chain(&mut f.del[row])
        {
            *v *= inv;
        }
        f.scale[i] = sum;
        log_scale += sum.ln();
    }
    let t = &h.transitions[len];
    let end = f.at(len, n);
    let total =
        f.m[end] * t[MATCH][MATCH] + f.ins[end] * t[INSERT][MATCH] + f.del[end] * t[DELETE][MATCH];
    (f, log_scale + total.ln())
}

/// Backward table sharing the forward scale factors.
pub(crate) fn backward(p: &ProbParams, x: &[usize], scale: &[f64]) -> Scaled {
    let (len, n) = (p.len, x.len());
    let h = p.h;
    let mut b = Scaled::new(len, n);
    for i in (0..=n).rev() {
        let inv = if i < n { 1.0 / scale[i + 1] } else { 0.0 };
        for k in (0..=len).rev() {
            let to_match = if k == len {
                if i == n {
                    1.0
                } else {
                    0.0
                }
            } else if i < n {
                h.match_emissions[k][x[i]] * b.m[b.at(k + 1, i + 1)] * inv
            } else {
                0.0
            };
            let to_insert = if i < n {
                h.insert_emissions[k][x[i]] * b.ins[b.at(k, i + 1)] * inv
            } else {
                0.0
            };
            let to_delete = if k < len { b.del[b.at(k + 1, i)] } else { 0.0 };
            let t = &h.transitions[k];
            let cur = b.at(k, i);
            b.m[cur] = t[MATCH][MATCH] * to_match
                + t[MATCH][INSERT] * to_insert
                + t[MATCH][DELETE] * to_delete;
            b.ins[cur] = t[INSERT][MATCH] * to_match
                + t[INSERT][INSERT] * to_insert
                + t[INSERT][DELETE] * to_delete;
            if k > 0 {
                b.del[cur] = t[DELETE][MATCH] * to_match
                    + t[DELETE][INSERT] * to_insert
                    + t[DELETE][DELETE] * to_delete;
            }
        }
    }
    b
}

pub(crate) fn log_likelihood(p: &ProbParams, x: &[usize]) -> f64 {
    forward(p, x).1
}

/// Posterior expected parameter usage for one sequence.
pub(crate) fn sequence_counts(p: &ProbParams, x: &[usize]) -> (f64, ExpectedCounts) {
    let (len, n) = (p.len, x.len());
    let h = p.h;
    let (f, ll) = forward(p, x);
    let b = backward(p, x, &f.scale);
    let mut c = ExpectedCounts::zeros(len);
    // P_hat: the end-of-sequence total in forward-scaled units
    let t_end = &h.transitions[len];
    let end = f.at(len, n);
    let p_hat = f.m[end] * t_end[MATCH][MATCH]
        + f.ins[end] * t_end[INSERT][MATCH]
        + f.del[end] * t_end[DELETE][MATCH];
    let norm = 1.0 / p_hat;

    for i in 1..=n {
        let sym = x[i - 1];
        for k in 0..=len {
            let idx = f.at(k, i);
            if k >= 1 {
                c.match_emissions[k - 1][sym] += f.m[idx] * b.m[idx] * norm;
            }
            c.insert_emissions[k][sym] += f.ins[idx] * b.ins[idx] * norm;
        }
    }

    for i in 0..=n {
        let emit_norm = if i < n { norm / f.scale[i + 1] } else { 0.0 };
        for k in 0..=len {
            let t = &h.transitions[k];
            let to_match = if k == len {
                if i == n {
                    norm
                } else {
                    0.0
                }
            } else if i < n {
                h.match_emissions[k][x[i]] * b.m[b.at(k + 1, i + 1)] * emit_norm
            } else {
                0.0
            };
            let to_insert = if i < n {
                h.insert_emissions[k][x[i]] * b.ins[b.at(k, i + 1)] * emit_norm
            } else {
                0.0
            };
            let to_delete = if k < len {
                b.del[b.at(k + 1, i)] * norm
            } else {
                0.0
            };
            for from in [MATCH, INSERT, DELETE] {
                if from == DELETE && k == 0 {
                    continue;
                }
                let fv = f.get(from, k, i);
                if fv == 0.0 {
                    continue;
                }
                let row = &mut c.transitions[k][from];
                row[MATCH] += fv * t[from][MATCH] * to_match;
                row[INSERT] += fv * t[from][INSERT] * to_insert;
                row[DELETE] += fv * t[from][DELETE] * to_delete;
            }
        }
    }
    (ll, c)
}
