//! Site comparison of aligned pairs and the Jukes-Cantor / Kimura
//! two-parameter corrections.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{pairwise_align, ScoringScheme};
use crate::error::{Error, Result};
use crate::nucleotide::{is_base, is_transition};

/// Counts over the columns where both sequences hold a strict base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteComparison {
    pub sites: usize,
    pub transitions: usize,
    pub transversions: usize,
}

impl SiteComparison {
    /// Transition fraction.
    pub fn p(&self) -> f64 {
        self.transitions as f64 / self.sites as f64
    }

    /// Transversion fraction.
    pub fn q(&self) -> f64 {
        self.transversions as f64 / self.sites as f64
    }

    /// Observed fraction of differing sites.
    pub fn d(&self) -> f64 {
        (self.transitions + self.transversions) as f64 / self.sites as f64
    }
}

/// Pairwise deletion: columns with a gap or ambiguity code in either row are
/// skipped.
pub fn compare_sites(a: &str, b: &str) -> Result<SiteComparison> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut c = SiteComparison {
        sites: 0,
        transitions: 0,
        transversions: 0,
    };
    for (x, y) in a.bytes().zip(b.bytes()) {
        let (x, y) = (x.to_ascii_uppercase(), y.to_ascii_uppercase());
        if !(is_base(x) && is_base(y)) {
            continue;
        }
        c.sites += 1;
        if x != y {
            if is_transition(x, y) {
                c.transitions += 1;
            } else {
                c.transversions += 1;
            }
        }
    }
    if c.sites == 0 {
        return Err(Error::NoComparableSites);
    }
    Ok(c)
}

pub fn p_distance(a: &str, b: &str) -> Result<f64> {
    Ok(compare_sites(a, b)?.d())
}

/// `-(3/4) ln(1 - (4/3) D)`, defined for `D < 0.75`.
pub fn jukes_cantor_from_d(d: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok(0.0);
    }
    let arg = 1.0 - 4.0 / 3.0 * d;
    if !(arg > 0.0) {
        return Err(Error::Saturation {
            method: "Jukes-Cantor",
            detail: format!("observed difference {d} >= 0.75"),
        });
    }
    Ok(-0.75 * arg.ln())
}

pub fn jukes_cantor(c: &SiteComparison) -> Result<f64> {
    jukes_cantor_from_d(c.d())
}

/// `-(1/2) ln((1 - 2P - Q) sqrt(1 - 2Q))` for transition fraction `P` and
/// transversion fraction `Q`.
pub fn kimura_from_pq(p: f64, q: f64) -> Result<f64> {
    let a = 1.0 - 2.0 * p - q;
    let b = 1.0 - 2.0 * q;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Saturation {
            method: "Kimura",
            detail: format!("P = {p}, Q = {q} outside the log domain"),
        });
    }
    let k = -0.5 * (a * b.sqrt()).ln();
    // exact zero for identical sequences instead of -0.0
    Ok(if p == 0.0 && q == 0.0 { 0.0 } else { k })
}

pub fn kimura(c: &SiteComparison) -> Result<f64> {
    kimura_from_pq(c.p(), c.q())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    #[serde(rename = "jc")]
    JukesCantor,
    Kimura,
    PDistance,
}

impl DistanceMethod {
    pub fn apply(self, c: &SiteComparison) -> Result<f64> {
        match self {
            DistanceMethod::JukesCantor => jukes_cantor(c),
            DistanceMethod::Kimura => kimura(c),
            DistanceMethod::PDistance => Ok(c.d()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceMethod::JukesCantor => "jc",
            DistanceMethod::Kimura => "kimura",
            DistanceMethod::PDistance => "p-distance",
        }
    }
}

impl fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jc" | "jukes-cantor" => Ok(DistanceMethod::JukesCantor),
            "kimura" | "k2p" => Ok(DistanceMethod::Kimura),
            "p" | "p-distance" => Ok(DistanceMethod::PDistance),
            other => Err(Error::Config(format!("unknown distance method {other:?}"))),
        }
    }
}

/// Symmetric matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(
                "matrix dimensions do not match labels".into(),
            ));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "non-zero diagonal at {}",
                    labels[i]
                )));
            }
            for j in 0..i {
                let (a, b) = (values[i][j], values[j][i]);
                if (a - b).abs() > 1e-12 || !(a >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "entry ({}, {}) is negative or asymmetric",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(DistanceMatrix { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.values[self.index_of(a)?][self.index_of(b)?])
    }

    /// Header row and column of labels, six decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            out.push_str(l);
            for v in row {
                let _ = write!(out, "\t{v:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty matrix file".into()))?;
        let labels: Vec<String> = header
            .split('\t')
            .skip(1)
            .map(|s| s.trim().to_string())
            .collect();
        let mut values = Vec::with_capacity(labels.len());
        for (i, line) in lines.enumerate() {
            let mut fields = line.split('\t');
            let label = fields.next().unwrap_or_default().trim();
            if labels.get(i).map(String::as_str) != Some(label) {
                return Err(Error::InvalidInput(format!(
                    "matrix row {} label {label:?} does not match the header",
                    i + 1
                )));
            }
            let row = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("matrix row {label}: {e}")))?;
            values.push(row);
        }
        DistanceMatrix::new(labels, values)
    }
}

/// Aligns every pair globally, compares sites and applies `method`.
/// Saturation errors name the offending pair.
pub fn distance_matrix(
    seqs: &[(String, String)],
    method: DistanceMethod,
    scheme: &ScoringScheme,
) -> Result<DistanceMatrix> {
    if seqs.len() < 2 {
        return Err(Error::InvalidInput(
            "distance matrix needs at least 2 sequences".into(),
        ));
    }
    let n = seqs.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            // tie-breaking is order-sensitive; align in label order so the
            // matrix does not depend on input order
            let (x, y) = if seqs[i].0 <= seqs[j].0 { (i, j) } else { (j, i) };
            let al = pairwise_align(&seqs[x].1, &seqs[y].1, scheme)?;
            let c = compare_sites(&al.aligned_a, &al.aligned_b)?;
            method.apply(&c).map_err(|e| match e {
                Error::Saturation { method, detail } => Error::Saturation {
                    method,
                    detail: format!("pair ({}, {}): {detail}", seqs[i].0, seqs[j].0),
                },
                e => e,
            })
        })
        .collect::<Result<_>>()?;
    let mut m = vec![vec![0.0; n]; n];
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        m[i][j] = v;
        m[j][i] = v;
    }
    DistanceMatrix::new(seqs.iter().map(|s| s.0.clone()).collect(), m)
}
