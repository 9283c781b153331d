//! Progressive multiple sequence alignment and column-consensus resolution
//! of IUPAC ambiguity codes.
//!
//! 1. Align every pair globally and take the p-distance of each alignment.
//! 2. Cluster with UPGMA (ties merge the lowest-index pair) to get the
//!    guide tree.
//! 3. Merge profiles along the guide tree with a sum-of-pairs, affine-gap
//!    profile-profile global alignment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{affine_global, pairwise_align, ColumnScorer, ScoringScheme, Step};
use crate::dataset::{parse_fasta_impl, SequenceRecord};
use crate::error::{Error, Result};
use crate::nucleotide::{base_index, compatible_bases, is_ambiguity, is_base, BASES, GAP};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsaRow {
    pub label: String,
    pub residues: Vec<u8>,
}

impl MsaRow {
    pub fn ungapped(&self) -> String {
        self.residues
            .iter()
            .filter(|&&b| b != GAP)
            .map(|&b| b as char)
            .collect()
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.residues).expect("ASCII residues")
    }
}

/// Gapped alignment; every row has the same width and no column is all gaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Msa {
    pub rows: Vec<MsaRow>,
}

impl Msa {
    pub fn new(rows: Vec<MsaRow>) -> Result<Self> {
        let msa = Msa { rows };
        msa.check()?;
        Ok(msa)
    }

    fn check(&self) -> Result<()> {
        let width = self.rows.first().map_or(0, |r| r.residues.len());
        if width == 0 {
            return Err(Error::InvalidInput(
                "alignment must have at least one column".into(),
            ));
        }
        for r in &self.rows {
            if r.residues.len() != width {
                return Err(Error::LengthMismatch {
                    left: width,
                    right: r.residues.len(),
                });
            }
        }
        if let Some(c) = (0..width).find(|&c| self.rows.iter().all(|r| r.residues[c] == GAP)) {
            return Err(Error::InvalidInput(format!("column {} is all gaps", c + 1)));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.residues.len())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = u8> + '_ {
        self.rows.iter().map(move |r| r.residues[c])
    }

    /// Number of non-gap cells in column `c`.
    pub fn occupancy(&self, c: usize) -> usize {
        self.column(c).filter(|&b| b != GAP).count()
    }

    pub fn gap_fraction(&self, c: usize) -> f64 {
        1.0 - self.occupancy(c) as f64 / self.rows.len() as f64
    }

    /// Gapped FASTA with `>label` headers.
    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push('>');
            out.push_str(&r.label);
            out.push('\n');
            for chunk in r.residues.chunks(70) {
                out.push_str(std::str::from_utf8(chunk).expect("ASCII"));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_fasta(text: &str) -> Result<Self> {
        let rows = parse_fasta_impl(text, true)?
            .into_iter()
            .map(|r| MsaRow {
                label: r.label,
                residues: r.residues.into_bytes(),
            })
            .collect();
        Msa::new(rows)
    }
}

/// Fraction of differing sites among columns where both rows hold a strict
/// base; 1.0 when no such column exists.
pub(crate) fn aligned_p_distance(a: &[u8], b: &[u8]) -> f64 {
    let (mut sites, mut diffs) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        if is_base(x) && is_base(y) {
            sites += 1;
            if x != y {
                diffs += 1;
            }
        }
    }
    if sites == 0 {
        1.0
    } else {
        diffs as f64 / sites as f64
    }
}

/// One UPGMA join. Leaves are nodes `0..n`; the k-th merge creates node `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideTree {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

/// Pairwise p-distances from global alignments, computed in parallel.
pub fn pairwise_p_distances(seqs: &[&str], scheme: &ScoringScheme) -> Result<Vec<Vec<f64>>> {
    let n = seqs.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            pairwise_align(seqs[i], seqs[j], scheme)
                .map(|al| aligned_p_distance(al.aligned_a.as_bytes(), al.aligned_b.as_bytes()))
        })
        .collect::<Result<_>>()?;
    let mut d = vec![vec![0.0; n]; n];
    for (&(i, j), &v) in pairs.iter().zip(&dists) {
        d[i][j] = v;
        d[j][i] = v;
    }
    Ok(d)
}

/// Average-linkage clustering of a distance matrix. Among equally close
/// pairs the one with the smallest `(left, right)` node ids merges first.
pub fn upgma(dist: &[Vec<f64>]) -> GuideTree {
    let n = dist.len();
    let total = 2 * n.max(1) - 1;
    let mut d = vec![vec![0.0; total]; total];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = dist[i][j];
        }
    }
    let mut size = vec![1usize; total];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                if best.is_none_or(|(bd, _, _)| d[a][b] < bd) {
                    best = Some((d[a][b], a, b));
                }
            }
        }
        let (dist_ab, a, b) = best.expect("two active clusters");
        let new = n + merges.len();
        size[new] = size[a] + size[b];
        for &c in &active {
            if c != a && c != b {
                let v = (d[a][c] * size[a] as f64 + d[b][c] * size[b] as f64) / size[new] as f64;
                d[new][c] = v;
                d[c][new] = v;
            }
        }
        merges.push(Merge {
            left: a,
            right: b,
            distance: dist_ab,
        });
        active.retain(|&c| c != a && c != b);
        active.push(new);
    }
    GuideTree { leaves: n, merges }
}

pub fn guide_tree(seqs: &[SequenceRecord], scheme: &ScoringScheme) -> Result<GuideTree> {
    if seqs.len() < 2 {
        return Err(Error::InvalidInput(
            "guide tree needs at least 2 sequences".into(),
        ));
    }
    let residues: Vec<&str> = seqs.iter().map(|s| s.residues.as_str()).collect();
    Ok(upgma(&pairwise_p_distances(&residues, scheme)?))
}

// Column symbols: 4 bases, gap, 11 ambiguity codes.
const SYMBOLS: &[u8; 16] = b"ACGT-RYSWKMBDHVN";

fn symbol_index(b: u8) -> usize {
    SYMBOLS
        .iter()
        .position(|&s| s == b)
        .expect("validated residue")
}

struct Profile {
    members: Vec<usize>,
    rows: Vec<Vec<u8>>,
}

impl Profile {
    fn width(&self) -> usize {
        self.rows[0].len()
    }

    /// Sparse symbol counts per column.
    fn column_counts(&self) -> Vec<Vec<(usize, i64)>> {
        (0..self.width())
            .map(|c| {
                let mut counts = [0i64; 16];
                for r in &self.rows {
                    counts[symbol_index(r[c])] += 1;
                }
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(s, &n)| (s, n))
                    .collect()
            })
            .collect()
    }

    fn residue_counts(&self) -> Vec<i64> {
        (0..self.width())
            .map(|c| self.rows.iter().filter(|r| r[c] != GAP).count() as i64)
            .collect()
    }
}

struct ProfileScorer {
    first: Vec<Vec<(usize, i64)>>,
    second: Vec<Vec<(usize, i64)>>,
    first_residues: Vec<i64>,
    second_residues: Vec<i64>,
    first_rows: i64,
    second_rows: i64,
    table: [[i64; 16]; 16],
    scheme: ScoringScheme,
}

impl ProfileScorer {
    fn new(p: &Profile, q: &Profile, scheme: ScoringScheme) -> Self {
        let mut table = [[0i64; 16]; 16];
        for (i, &a) in SYMBOLS.iter().enumerate() {
            for (j, &b) in SYMBOLS.iter().enumerate() {
                table[i][j] = scheme.pair(a, b) as i64;
            }
        }
        ProfileScorer {
            first: p.column_counts(),
            second: q.column_counts(),
            first_residues: p.residue_counts(),
            second_residues: q.residue_counts(),
            first_rows: p.rows.len() as i64,
            second_rows: q.rows.len() as i64,
            table,
            scheme,
        }
    }

    fn gap(&self, open: bool) -> i64 {
        if open {
            self.scheme.gap_open as i64
        } else {
            self.scheme.gap_extend as i64
        }
    }
}

impl ColumnScorer for ProfileScorer {
    fn substitute(&self, i: usize, j: usize) -> i64 {
        let mut s = 0;
        for &(a, na) in &self.first[i] {
            for &(b, nb) in &self.second[j] {
                s += na * nb * self.table[a][b];
            }
        }
        s
    }

    fn gap_first(&self, i: usize, open: bool) -> i64 {
        self.gap(open) * self.first_residues[i] * self.second_rows
    }

    fn gap_second(&self, j: usize, open: bool) -> i64 {
        self.gap(open) * self.second_residues[j] * self.first_rows
    }
}

fn merge_profiles(p: Profile, q: Profile, scheme: &ScoringScheme) -> Profile {
    let scorer = ProfileScorer::new(&p, &q, *scheme);
    let (steps, _) = affine_global(p.width(), q.width(), &scorer);
    let mut rows: Vec<Vec<u8>> = vec![Vec::with_capacity(steps.len()); p.rows.len() + q.rows.len()];
    let split = p.rows.len();
    for step in steps {
        let (ci, cj) = match step {
            Step::Both(i, j) => (Some(i), Some(j)),
            Step::First(i) => (Some(i), None),
            Step::Second(j) => (None, Some(j)),
        };
        for (k, row) in rows.iter_mut().enumerate() {
            let cell = if k < split {
                ci.map_or(GAP, |i| p.rows[k][i])
            } else {
                cj.map_or(GAP, |j| q.rows[k - split][j])
            };
            row.push(cell);
        }
    }
    let mut members = p.members;
    members.extend(q.members);
    Profile { members, rows }
}

/// Progressive alignment along the UPGMA guide tree. Rows come back in
/// input order and de-gap to the input residues.
pub fn progressive_align(seqs: &[SequenceRecord], scheme: &ScoringScheme) -> Result<Msa> {
    let tree = guide_tree(seqs, scheme)?;
    let n = seqs.len();
    let mut nodes: Vec<Option<Profile>> = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Some(Profile {
                members: vec![i],
                rows: vec![s.residues.as_bytes().to_vec()],
            })
        })
        .collect();
    for m in &tree.merges {
        let p = nodes[m.left].take().expect("unmerged node");
        let q = nodes[m.right].take().expect("unmerged node");
        nodes.push(Some(merge_profiles(p, q, scheme)));
    }
    let root = nodes.pop().flatten().expect("root profile");
    let mut ordered: Vec<Option<Vec<u8>>> = vec![None; n];
    for (member, row) in root.members.into_iter().zip(root.rows) {
        ordered[member] = Some(row);
    }
    let rows = seqs
        .iter()
        .zip(ordered)
        .map(|(s, r)| MsaRow {
            label: s.label.clone(),
            residues: r.expect("every member placed"),
        })
        .collect();
    Msa::new(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub label: String,
    /// 1-based alignment column.
    pub column: usize,
    pub from: char,
    pub to: char,
}

fn pick_base(code: u8, counts: &[usize; 4]) -> u8 {
    let compatible = compatible_bases(code).expect("ambiguity code");
    let mut best = compatible[0];
    let mut best_count = counts[base_index(best).unwrap()];
    for &b in &compatible[1..] {
        let c = counts[base_index(b).unwrap()];
        if c > best_count {
            best = b;
            best_count = c;
        }
    }
    best
}

/// Replaces each ambiguity cell with the most frequent compatible base in
/// its column (lexicographic on ties or when none occurs), returning the
/// edits made.
pub fn resolve_ambiguities_logged(msa: &Msa) -> (Msa, Vec<Replacement>) {
    let mut out = msa.clone();
    let mut log = Vec::new();
    for c in 0..msa.width() {
        if !msa.column(c).any(is_ambiguity) {
            continue;
        }
        let mut counts = [0usize; 4];
        for b in msa.column(c) {
            if let Some(i) = base_index(b) {
                counts[i] += 1;
            }
        }
        for row in out.rows.iter_mut() {
            let code = row.residues[c];
            if is_ambiguity(code) {
                let to = pick_base(code, &counts);
                row.residues[c] = to;
                log.push(Replacement {
                    label: row.label.clone(),
                    column: c + 1,
                    from: code as char,
                    to: to as char,
                });
            }
        }
    }
    (out, log)
}

pub fn resolve_ambiguities(msa: &Msa) -> Msa {
    resolve_ambiguities_logged(msa).0
}

/// True when every cell is a strict base or a gap.
pub fn is_strict(msa: &Msa) -> bool {
    msa.rows
        .iter()
        .all(|r| r.residues.iter().all(|&b| b == GAP || BASES.contains(&b)))
}
