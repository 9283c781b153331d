//! Global alignment with affine gap costs (Gotoh recurrences).
//!
//! The DP is written over abstract columns so that the same code aligns two
//! sequences and two profiles. A gap of length `k` costs
//! `gap_open + (k - 1) * gap_extend`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nucleotide::{compatible_bases, is_base, GAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringScheme {
    #[serde(rename = "match")]
    pub match_score: i32,
    pub mismatch: i32,
    pub gap_open: i32,
    pub gap_extend: i32,
}

impl Default for ScoringScheme {
    fn default() -> Self {
        ScoringScheme {
            match_score: 5,
            mismatch: -4,
            gap_open: -10,
            gap_extend: -1,
        }
    }
}

impl ScoringScheme {
    pub fn validate(&self) -> Result<()> {
        let ok = self.match_score > 0
            && self.mismatch < 0
            && self.gap_open <= self.gap_extend
            && self.gap_extend < 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "scoring scheme needs match > 0, mismatch < 0, gap_open <= gap_extend < 0: {self:?}"
            )))
        }
    }

    /// Substitution score. Ambiguity codes score 0 against anything they
    /// could stand for and `mismatch` otherwise; a gap scores `gap_extend`
    /// against a residue and 0 against another gap (sum-of-pairs convention).
    pub fn pair(&self, a: u8, b: u8) -> i32 {
        if a == GAP || b == GAP {
            return if a == b { 0 } else { self.gap_extend };
        }
        if is_base(a) && is_base(b) {
            return if a == b {
                self.match_score
            } else {
                self.mismatch
            };
        }
        match (compatible_bases(a), compatible_bases(b)) {
            (Some(x), Some(y)) if x.iter().any(|c| y.contains(c)) => 0,
            _ => self.mismatch,
        }
    }
}

/// One column of a global alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Both(usize, usize),
    /// Column of the first input against a gap.
    First(usize),
    /// Column of the second input against a gap.
    Second(usize),
}

/// Column-level cost model for [`affine_global`].
pub(crate) trait ColumnScorer {
    fn substitute(&self, i: usize, j: usize) -> i64;
    /// Cost of first-input column `i` against a gap.
    fn gap_first(&self, i: usize, open: bool) -> i64;
    /// Cost of second-input column `j` against a gap.
    fn gap_second(&self, j: usize, open: bool) -> i64;
}

const NEG: i64 = i64::MIN / 4;

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Diag,
    Up,
    Left,
}

fn best3(m: i64, x: i64, y: i64) -> (i64, State) {
    // diagonal > up > left on ties
    let mut best = (m, State::Diag);
    if x > best.0 {
        best = (x, State::Up);
    }
    if y > best.0 {
        best = (y, State::Left);
    }
    best
}

/// Optimal global alignment of `n` first-input columns against `m`
/// second-input columns. Ties in traceback prefer diagonal, then up (gap in
/// the second input), then left.
pub(crate) fn affine_global(n: usize, m: usize, sc: &impl ColumnScorer) -> (Vec<Step>, i64) {
    let w = m + 1;
    let idx = |i: usize, j: usize| i * w + j;
    let mut dm = vec![NEG; (n + 1) * w];
    let mut dx = vec![NEG; (n + 1) * w];
    let mut dy = vec![NEG; (n + 1) * w];
    dm[0] = 0;
    for i in 1..=n {
        let open = i == 1;
        let prev = if open {
            dm[idx(0, 0)]
        } else {
            dx[idx(i - 1, 0)]
        };
        dx[idx(i, 0)] = prev + sc.gap_first(i - 1, open);
    }
    for j in 1..=m {
        let open = j == 1;
        let prev = if open {
            dm[idx(0, 0)]
        } else {
            dy[idx(0, j - 1)]
        };
        dy[idx(0, j)] = prev + sc.gap_second(j - 1, open);
    }
    for i in 1..=n {
        for j in 1..=m {
            let d = idx(i - 1, j - 1);
            dm[idx(i, j)] = best3(dm[d], dx[d], dy[d]).0 + sc.substitute(i - 1, j - 1);

            let u = idx(i - 1, j);
            let (open, ext) = (sc.gap_first(i - 1, true), sc.gap_first(i - 1, false));
            dx[idx(i, j)] = best3(dm[u] + open, dx[u] + ext, dy[u] + open).0;

            let l = idx(i, j - 1);
            let (open, ext) = (sc.gap_second(j - 1, true), sc.gap_second(j - 1, false));
            dy[idx(i, j)] = best3(dm[l] + open, dx[l] + open, dy[l] + ext).0;
        }
    }

    let end = idx(n, m);
    let (score, mut state) = if n == 0 && m == 0 {
        (0, State::Diag)
    } else {
        best3(dm[end], dx[end], dy[end])
    };
    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match state {
            State::Diag => {
                steps.push(Step::Both(i - 1, j - 1));
                let d = idx(i - 1, j - 1);
                state = best3(dm[d], dx[d], dy[d]).1;
                i -= 1;
                j -= 1;
            }
            State::Up => {
                steps.push(Step::First(i - 1));
                let u = idx(i - 1, j);
                let (open, ext) = (sc.gap_first(i - 1, true), sc.gap_first(i - 1, false));
                state = if i == 1 && j == 0 {
                    State::Diag
                } else {
                    best3(dm[u] + open, dx[u] + ext, dy[u] + open).1
                };
                i -= 1;
            }
            State::Left => {
                steps.push(Step::Second(j - 1));
                let l = idx(i, j - 1);
                let (open, ext) = (sc.gap_second(j - 1, true), sc.gap_second(j - 1, false));
                state = if i == 0 && j == 1 {
                    State::Diag
                } else {
                    best3(dm[l] + open, dx[l] + open, dy[l] + ext).1
                };
                j -= 1;
            }
        }
    }
    steps.reverse();
    (steps, score)
}

struct SequenceScorer<'a> {
    a: &'a [u8],
    b: &'a [u8],
    scheme: ScoringScheme,
}

impl ColumnScorer for SequenceScorer<'_> {
    fn substitute(&self, i: usize, j: usize) -> i64 {
        self.scheme.pair(self.a[i], self.b[j]) as i64
    }

    fn gap_first(&self, _i: usize, open: bool) -> i64 {
        if open {
            self.scheme.gap_open as i64
        } else {
            self.scheme.gap_extend as i64
        }
    }

    fn gap_second(&self, j: usize, open: bool) -> i64 {
        self.gap_first(j, open)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairAlignment {
    pub aligned_a: String,
    pub aligned_b: String,
    pub score: i64,
}

/// Global pairwise alignment under the affine scheme.
pub fn pairwise_align(a: &str, b: &str, scheme: &ScoringScheme) -> Result<PairAlignment> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "pairwise alignment needs two non-empty sequences".into(),
        ));
    }
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let (steps, score) = affine_global(
        a.len(),
        b.len(),
        &SequenceScorer {
            a,
            b,
            scheme: *scheme,
        },
    );
    let mut ra = Vec::with_capacity(steps.len());
    let mut rb = Vec::with_capacity(steps.len());
    for s in steps {
        match s {
            Step::Both(i, j) => {
                ra.push(a[i]);
                rb.push(b[j]);
            }
            Step::First(i) => {
                ra.push(a[i]);
                rb.push(GAP);
            }
            Step::Second(j) => {
                ra.push(GAP);
                rb.push(b[j]);
            }
        }
    }
    Ok(PairAlignment {
        aligned_a: String::from_utf8(ra).expect("ASCII"),
        aligned_b: String::from_utf8(rb).expect("ASCII"),
        score,
    })
}
