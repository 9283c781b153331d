use super::PhyloTree;
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

/// Saitou-Nei neighbor joining.
///
/// Each round joins the active pair minimizing
/// `Q(i, j) = (r - 2) d(i, j) - R(i) - R(j)`, scanning positions in order so
/// the lowest `(i, j)` wins ties. Negative limb lengths are clamped to 0 and
/// the raw value kept on the node. The last two clusters are joined by their
/// remaining distance, leaving the final internal node as a (usually
/// trifurcating) root.
pub fn neighbor_joining(d: &DistanceMatrix) -> Result<PhyloTree> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "neighbor joining needs at least 2 taxa".into(),
        ));
    }
    let mut tree = PhyloTree {
        nodes: Vec::with_capacity(2 * n),
        root: 0,
    };
    for l in &d.labels {
        tree.add_node(Some(l.clone()));
    }
    if n == 2 {
        let root = tree.add_node(None);
        let half = d.values[0][1] / 2.0;
        tree.attach(root, 0, half);
        tree.attach(root, 1, half);
        tree.root = root;
        return Ok(tree);
    }

    let mut active: Vec<usize> = (0..n).collect();
    let mut dist: Vec<Vec<f64>> = d.values.clone();
    while active.len() > 2 {
        let r = active.len();
        let sums: Vec<f64> = dist.iter().map(|row| row.iter().sum()).collect();
        let mut best = (f64::INFINITY, 0, 1);
        for i in 0..r {
            for j in i + 1..r {
                let q = (r as f64 - 2.0) * dist[i][j] - sums[i] - sums[j];
                if q < best.0 {
                    best = (q, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let dij = dist[i][j];
        let limb_i = dij / 2.0 + (sums[i] - sums[j]) / (2.0 * (r as f64 - 2.0));
        let limb_j = dij - limb_i;

        let u = tree.add_node(None);
        tree.attach(u, active[i], limb_i);
        tree.attach(u, active[j], limb_j);

        let new_row: Vec<f64> = (0..r)
            .map(|k| {
                if k == i || k == j {
                    0.0
                } else {
                    (dist[i][k] + dist[j][k] - dij) / 2.0
                }
            })
            .collect();
        for (k, row) in dist.iter_mut().enumerate() {
            row[i] = new_row[k];
        }
        dist[i] = new_row;
        dist[i][i] = 0.0;
        dist.remove(j);
        for row in dist.iter_mut() {
            row.remove(j);
        }
        active[i] = u;
        active.remove(j);
    }

    let (a, b) = (active[0], active[1]);
    let (root, other) = if a > b { (a, b) } else { (b, a) };
    tree.attach(root, other, dist[0][1]);
    tree.root = root;
    Ok(tree)
}
