//! Independent oracles shared by the integration tests. Nothing here calls
//! the library routine it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use mutarate::phmm::{ProfileHmm, DELETE, INSERT, MATCH};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- distances

pub fn jc_direct(d: f64) -> f64 {
    -0.75 * (1.0 - 4.0 * d / 3.0).ln()
}

pub fn kimura_direct(p: f64, q: f64) -> f64 {
    -0.5 * (1.0 - 2.0 * p - q).ln() - 0.25 * (1.0 - 2.0 * q).ln()
}

#[derive(Debug, Default, PartialEq, Eq, Clone, Copy)]
pub struct Classified {
    pub sites: usize,
    pub transitions: usize,
    pub transversions: usize,
}

/// Column-by-column: skip any column with a non-ACGT symbol, otherwise
/// count identities, purine/purine or pyrimidine/pyrimidine changes and
/// everything else.
pub fn classify_columns(a: &[u8], b: &[u8]) -> Classified {
    let group = |c: u8| match c {
        b'A' | b'G' => Some('R'),
        b'C' | b'T' => Some('Y'),
        _ => None,
    };
    let mut out = Classified::default();
    for (&x, &y) in a.iter().zip(b) {
        let (Some(gx), Some(gy)) = (group(x), group(y)) else {
            continue;
        };
        out.sites += 1;
        if x != y {
            if gx == gy {
                out.transitions += 1;
            } else {
                out.transversions += 1;
            }
        }
    }
    out
}

// ---------------------------------------------------------------- alignment

/// Best affine global alignment score by enumerating every alignment.
/// Column scores: match/mismatch for two strict bases; gaps cost
/// `open + (k - 1) * extend` per maximal run in one row.
pub fn brute_alignment_score(a: &[u8], b: &[u8], m: i64, mm: i64, open: i64, ext: i64) -> i64 {
    // state: 0 = last column diag, 1 = gap in b (a consumed), 2 = gap in a
    fn go(a: &[u8], b: &[u8], last: u8, m: i64, mm: i64, open: i64, ext: i64) -> i64 {
        if a.is_empty() && b.is_empty() {
            return 0;
        }
        let mut best = i64::MIN;
        if !a.is_empty() && !b.is_empty() {
            let s = if a[0] == b[0] { m } else { mm };
            best = best.max(s + go(&a[1..], &b[1..], 0, m, mm, open, ext));
        }
        if !a.is_empty() {
            let c = if last == 1 { ext } else { open };
            best = best.max(c + go(&a[1..], b, 1, m, mm, open, ext));
        }
        if !b.is_empty() {
            let c = if last == 2 { ext } else { open };
            best = best.max(c + go(a, &b[1..], 2, m, mm, open, ext));
        }
        best
    }
    go(a, b, 0, m, mm, open, ext)
}

/// Score of a given pairwise alignment under the same rules.
pub fn alignment_score(a: &[u8], b: &[u8], m: i64, mm: i64, open: i64, ext: i64) -> i64 {
    let mut s = 0;
    let mut last = 0;
    for (&x, &y) in a.iter().zip(b) {
        match (x == b'-', y == b'-') {
            (false, false) => {
                s += if x == y { m } else { mm };
                last = 0;
            }
            (false, true) => {
                s += if last == 1 { ext } else { open };
                last = 1;
            }
            (true, false) => {
                s += if last == 2 { ext } else { open };
                last = 2;
            }
            (true, true) => {}
        }
    }
    s
}

// ---------------------------------------------------------------- HMM

fn random_row<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    let mut r = [0.0; N];
    for v in r.iter_mut() {
        *v = rng.gen_range(0.05..1.0);
    }
    let s: f64 = r.iter().sum();
    r.map(|v| v / s)
}

pub fn random_hmm(len: usize, rng: &mut ChaCha8Rng) -> ProfileHmm {
    let mut h = ProfileHmm::uniform(len, [[1.0; 3]; 3]);
    for row in h.match_emissions.iter_mut() {
        *row = random_row(rng);
    }
    for row in h.insert_emissions.iter_mut() {
        *row = random_row(rng);
    }
    for node in h.transitions.iter_mut() {
        for row in node.iter_mut() {
            *row = random_row(rng);
        }
    }
    h.normalize_structure();
    h.check_invariants().unwrap();
    h
}

/// Sum over every state path by explicit depth-first enumeration.
/// State `(kind, k)`: M_k emits and sits at node k; I_k emits and stays at
/// node k; D_k is silent. Begin is `(MATCH, 0)`; End follows node L.
pub fn path_sum(h: &ProfileHmm, x: &[usize]) -> f64 {
    fn walk(h: &ProfileHmm, x: &[usize], kind: usize, k: usize, i: usize) -> f64 {
        let len = h.length;
        let t = h.transitions[k][kind];
        let mut total = 0.0;
        if k == len {
            if i == x.len() {
                total += t[MATCH];
            }
        } else if i < x.len() {
            let e = h.match_emissions[k][x[i]];
            total += t[MATCH] * e * walk(h, x, MATCH, k + 1, i + 1);
        }
        if i < x.len() {
            let e = h.insert_emissions[k][x[i]];
            total += t[INSERT] * e * walk(h, x, INSERT, k, i + 1);
        }
        if k < len {
            total += t[DELETE] * walk(h, x, DELETE, k + 1, i);
        }
        total
    }
    walk(h, x, MATCH, 0, 0)
}

pub fn encode(seq: &str) -> Vec<usize> {
    seq.bytes()
        .map(|b| match b {
            b'A' => 0,
            b'C' => 1,
            b'G' => 2,
            _ => 3,
        })
        .collect()
}

pub fn random_dna(len: usize, rng: &mut ChaCha8Rng) -> String {
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)] as char).collect()
}

/// Copies `s` with per-site substitution and deletion probabilities.
pub fn mutate(s: &str, sub: f64, del: f64, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if rng.gen_bool(del) {
            continue;
        }
        if rng.gen_bool(sub) {
            out.push(b"ACGT"[rng.gen_range(0..4)] as char);
        } else {
            out.push(c);
        }
    }
    if out.is_empty() {
        out.push('A');
    }
    out
}

// ---------------------------------------------------------------- trees

/// Unrooted tree as an edge list over vertices; leaves are `0..n`.
#[derive(Debug, Clone)]
pub struct EdgeTree {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeTree {
    pub fn leaf_name(i: usize) -> String {
        format!("t{i}")
    }

    fn adjacency(&self) -> HashMap<usize, Vec<(usize, usize)>> {
        let mut adj: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for (e, &(u, v, _)) in self.edges.iter().enumerate() {
            adj.entry(u).or_default().push((v, e));
            adj.entry(v).or_default().push((u, e));
        }
        adj
    }

    /// Edge indices on the path between two vertices.
    pub fn path_edges(&self, from: usize, to: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut stack = vec![from];
        let mut seen = BTreeSet::from([from]);
        while let Some(u) = stack.pop() {
            for &(v, e) in &adj[&u] {
                if seen.insert(v) {
                    prev.insert(v, (u, e));
                    stack.push(v);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = to;
        while cur != from {
            let (p, e) = prev[&cur];
            out.push(e);
            cur = p;
        }
        out
    }

    pub fn distances(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v: f64 = self.path_edges(i, j).iter().map(|&e| self.edges[e].2).sum();
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }

    /// Non-trivial splits, each as the side without leaf `t0`.
    pub fn splits(&self) -> BTreeSet<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        for (e, &(u, v, _)) in self.edges.iter().enumerate() {
            if u < self.n || v < self.n {
                continue;
            }
            let side: BTreeSet<usize> = (0..self.n)
                .filter(|&leaf| self.path_edges(0, leaf).contains(&e))
                .collect();
            if side.len() >= 2 && self.n - side.len() >= 2 {
                out.insert(side.into_iter().map(Self::leaf_name).collect());
            }
        }
        out
    }
}

/// Every unrooted binary topology on `n >= 3` leaves (unit lengths), built
/// by inserting leaves into each edge in turn.
pub fn all_topologies(n: usize) -> Vec<EdgeTree> {
    let hub = n;
    let start = EdgeTree {
        n,
        edges: vec![(0, hub, 1.0), (1, hub, 1.0), (2, hub, 1.0)],
    };
    let mut trees = vec![start];
    let mut next_internal = n + 1;
    for leaf in 3..n {
        let mut grown = Vec::new();
        for t in &trees {
            for e in 0..t.edges.len() {
                let mut edges = t.edges.clone();
                let (u, v, _) = edges.remove(e);
                edges.push((u, next_internal, 1.0));
                edges.push((next_internal, v, 1.0));
                edges.push((leaf, next_internal, 1.0));
                grown.push(EdgeTree { n, edges });
            }
        }
        trees = grown;
        next_internal += 1;
    }
    trees
}

/// Random binary tree with positive edge lengths in `[0.01, 1)`.
pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> EdgeTree {
    let hub = n;
    let mut t = EdgeTree {
        n,
        edges: (0..3).map(|i| (i, hub, rng.gen_range(0.01..1.0))).collect(),
    };
    for leaf in 3..n {
        let e = rng.gen_range(0..t.edges.len());
        let mut edges = t.edges.clone();
        let (u, v, w) = edges.remove(e);
        let mid = n + leaf - 2;
        let f = rng.gen_range(0.2..0.8);
        edges.push((u, mid, w * f));
        edges.push((mid, v, w * (1.0 - f)));
        edges.push((leaf, mid, rng.gen_range(0.01..1.0)));
        t = EdgeTree { n, edges };
    }
    t
}

/// Least-squares fit of edge lengths on a fixed topology; returns the
/// residual sum of squares against `d`.
pub fn topology_residual(t: &EdgeTree, d: &[Vec<f64>]) -> f64 {
    let n = t.n;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let a = nalgebra::DMatrix::from_fn(pairs.len(), t.edges.len(), |r, c| {
        let (i, j) = pairs[r];
        if t.path_edges(i, j).contains(&c) {
            1.0
        } else {
            0.0
        }
    });
    let y = nalgebra::DVector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| d[i][j]));
    let svd = a.clone().svd(true, true);
    let beta = svd.solve(&y, 1e-12).unwrap();
    (y - a * beta).norm_squared()
}

// ---------------------------------------------------------------- regression

pub fn closed_form_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
