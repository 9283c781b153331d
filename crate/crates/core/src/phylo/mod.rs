//! Phylogenetic trees: neighbor joining, Newick I/O and rerooting.

mod newick;
mod nj;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use newick::{parse_newick, to_newick};
pub use nj::neighbor_joining;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub label: Option<String>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Length of the edge to the parent; 0 for the root.
    pub length: f64,
    /// Pre-clamp value when a negative length was clamped to 0.
    pub raw_length: Option<f64>,
}

impl Node {
    fn new(label: Option<String>) -> Self {
        Node {
            label,
            parent: None,
            children: Vec::new(),
            length: 0.0,
            raw_length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyloTree {
    pub nodes: Vec<Node>,
    pub root: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    /// Leaves below the clamped edge.
    pub descendants: Vec<String>,
    pub raw_length: f64,
}

impl PhyloTree {
    pub(crate) fn add_node(&mut self, label: Option<String>) -> usize {
        self.nodes.push(Node::new(label));
        self.nodes.len() - 1
    }

    pub(crate) fn attach(&mut self, parent: usize, child: usize, length: f64) {
        let node = &mut self.nodes[child];
        node.parent = Some(parent);
        if length < 0.0 {
            node.raw_length = Some(length);
            node.length = 0.0;
        } else {
            node.length = length;
        }
        self.nodes[parent].children.push(child);
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Leaf ids in depth-first (Newick) order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if self.is_leaf(v) {
                out.push(v);
            }
            stack.extend(self.nodes[v].children.iter().rev());
        }
        out
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves()
            .into_iter()
            .map(|v| self.nodes[v].label.clone().unwrap_or_default())
            .collect()
    }

    pub fn find_leaf(&self, label: &str) -> Option<usize> {
        self.leaves()
            .into_iter()
            .find(|&v| self.nodes[v].label.as_deref() == Some(label))
    }

    fn neighbors(&self, v: usize) -> Vec<(usize, f64)> {
        let node = &self.nodes[v];
        let mut out: Vec<(usize, f64)> = node
            .children
            .iter()
            .map(|&c| (c, self.nodes[c].length))
            .collect();
        if let Some(p) = node.parent {
            out.push((p, node.length));
        }
        out
    }

    fn distances_from(&self, start: usize) -> Vec<f64> {
        let mut dist = vec![f64::NAN; self.nodes.len()];
        dist[start] = 0.0;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for (w, len) in self.neighbors(v) {
                if dist[w].is_nan() {
                    dist[w] = dist[v] + len;
                    stack.push(w);
                }
            }
        }
        dist
    }

    /// Leaf-to-leaf path lengths in the order of `labels`.
    pub fn path_length_matrix(&self, labels: &[String]) -> Result<Vec<Vec<f64>>> {
        let ids: Vec<usize> = labels
            .iter()
            .map(|l| {
                self.find_leaf(l)
                    .ok_or_else(|| Error::UnknownLabel(l.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(ids
            .iter()
            .map(|&a| {
                let d = self.distances_from(a);
                ids.iter().map(|&b| d[b]).collect()
            })
            .collect())
    }

    fn descendant_leaves(&self, v: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if self.is_leaf(u) {
                out.insert(self.nodes[u].label.clone().unwrap_or_default());
            }
            stack.extend(&self.nodes[u].children);
        }
        out
    }

    /// Non-trivial bipartitions of the leaf set, each given by the side
    /// that excludes the lexicographically smallest leaf. Root placement
    /// does not affect the result.
    pub fn splits(&self) -> BTreeSet<BTreeSet<String>> {
        let all: BTreeSet<String> = self.leaf_labels().into_iter().collect();
        let anchor = all.iter().next().cloned().unwrap_or_default();
        let mut out = BTreeSet::new();
        for v in 0..self.nodes.len() {
            if v == self.root {
                continue;
            }
            let below = self.descendant_leaves(v);
            let side: BTreeSet<String> = if below.contains(&anchor) {
                all.difference(&below).cloned().collect()
            } else {
                below
            };
            if side.len() >= 2 && all.len() - side.len() >= 2 {
                out.insert(side);
            }
        }
        out
    }

    pub fn clamp_events(&self) -> Vec<ClampEvent> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(v, n)| {
                n.raw_length.map(|raw| ClampEvent {
                    descendants: self.descendant_leaves(v).into_iter().collect(),
                    raw_length: raw,
                })
            })
            .collect()
    }

    /// Connected, acyclic, consistent parent links, labeled unique leaves
    /// and non-negative lengths.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Error::InvalidInput(format!("invalid tree: {m}"));
        if self.nodes[self.root].parent.is_some() {
            return Err(bad("root has a parent".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                return Err(bad("cycle".into()));
            }
            for &c in &self.nodes[v].children {
                if self.nodes[c].parent != Some(v) {
                    return Err(bad(format!("node {c} has an inconsistent parent link")));
                }
                stack.push(c);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("disconnected nodes".into()));
        }
        let mut labels = HashSet::new();
        for v in self.leaves() {
            let label = self.nodes[v]
                .label
                .as_ref()
                .ok_or_else(|| bad("unlabeled leaf".into()))?;
            if !labels.insert(label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        if self.nodes.iter().any(|n| !(n.length >= 0.0)) {
            return Err(bad("negative branch length".into()));
        }
        Ok(())
    }

    /// Roots the tree at the node the named leaf attaches to, so the leaf
    /// becomes a child of the root. Internal nodes left with a single child
    /// are dissolved, summing their edges; leaf-to-leaf path lengths are
    /// unchanged.
    pub fn reroot(&self, leaf_label: &str) -> Result<PhyloTree> {
        let leaf = self
            .find_leaf(leaf_label)
            .ok_or_else(|| Error::UnknownLabel(leaf_label.to_string()))?;
        let Some(anchor) = self.nodes[leaf].parent else {
            return Ok(self.clone());
        };

        let mut out = PhyloTree {
            nodes: Vec::with_capacity(self.nodes.len()),
            root: 0,
        };
        // (old id, new parent id, edge length, raw length)
        let mut stack: Vec<(usize, Option<usize>, f64, Option<f64>)> =
            vec![(anchor, None, 0.0, None)];
        let mut visited = vec![false; self.nodes.len()];
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        while let Some((old, parent, len, raw)) = stack.pop() {
            visited[old] = true;
            let id = out.add_node(self.nodes[old].label.clone());
            new_id[old] = id;
            if let Some(p) = parent {
                out.nodes[id].parent = Some(p);
                out.nodes[id].length = len;
                out.nodes[id].raw_length = raw;
                out.nodes[p].children.push(id);
            }
            // the edge to the old parent carries this node's own length
            let mut next: Vec<(usize, f64, Option<f64>)> = self.nodes[old]
                .children
                .iter()
                .map(|&c| (c, self.nodes[c].length, self.nodes[c].raw_length))
                .collect();
            if let Some(p) = self.nodes[old].parent {
                next.push((p, self.nodes[old].length, self.nodes[old].raw_length));
            }
            for (w, l, r) in next.into_iter().rev() {
                if !visited[w] {
                    stack.push((w, Some(id), l, r));
                }
            }
        }
        out.root = new_id[anchor];
        out.suppress_unary();
        Ok(out)
    }

    fn suppress_unary(&mut self) {
        loop {
            let Some(v) = (0..self.nodes.len()).find(|&v| {
                v != self.root
                    && self.nodes[v].children.len() == 1
                    && self.nodes[v].parent.is_some()
            }) else {
                break;
            };
            let child = self.nodes[v].children[0];
            let parent = self.nodes[v].parent.unwrap();
            let len = self.nodes[v].length + self.nodes[child].length;
            self.nodes[child].length = len;
            self.nodes[child].parent = Some(parent);
            let slot = self.nodes[parent]
                .children
                .iter()
                .position(|&c| c == v)
                .unwrap();
            self.nodes[parent].children[slot] = child;
            self.nodes[v].children.clear();
            self.nodes[v].parent = None;
            self.nodes[v].label = Some(String::new());
        }
        self.compact();
    }

    /// Drops nodes unreachable from the root and renumbers.
    fn compact(&mut self) {
        let mut order = Vec::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.nodes[v].children.iter().rev());
        }
        let mut map = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            map[old] = new;
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let n = &self.nodes[old];
                Node {
                    label: n.label.clone(),
                    parent: n.parent.map(|p| map[p]),
                    children: n.children.iter().map(|&c| map[c]).collect(),
                    length: n.length,
                    raw_length: n.raw_length,
                }
            })
            .collect();
        self.nodes = nodes;
        self.root = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::DistanceMatrix;

    fn canonical() -> DistanceMatrix {
        DistanceMatrix::new(
            ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
            vec![
                vec![0.0, 5.0, 9.0, 9.0],
                vec![5.0, 0.0, 10.0, 10.0],
                vec![9.0, 10.0, 0.0, 8.0],
                vec![9.0, 10.0, 8.0, 0.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn reroot_preserves_paths_and_puts_leaf_under_root() {
        let t = neighbor_joining(&canonical()).unwrap();
        let labels = t.leaf_labels();
        let before = t.path_length_matrix(&labels).unwrap();
        for l in &labels {
            let r = t.reroot(l).unwrap();
            r.check().unwrap();
            let leaf = r.find_leaf(l).unwrap();
            assert_eq!(r.nodes[leaf].parent, Some(r.root));
            let after = r.path_length_matrix(&labels).unwrap();
            for (x, y) in before.iter().flatten().zip(after.iter().flatten()) {
                assert!((x - y).abs() < 1e-12);
            }
            assert_eq!(r.splits(), t.splits());
        }
    }

    #[test]
    fn reroot_unknown_label_fails() {
        let t = neighbor_joining(&canonical()).unwrap();
        assert!(matches!(
            t.reroot("zz").unwrap_err(),
            Error::UnknownLabel(_)
        ));
    }

    #[test]
    fn reroot_two_leaf_tree_is_identity() {
        let t = parse_newick("(A:0.25,B:0.25);").unwrap();
        assert_eq!(to_newick(&t.reroot("A").unwrap()), "(A:0.25,B:0.25);");
    }

    #[test]
    fn reroot_dissolves_old_binary_root() {
        let t = parse_newick("((A:1,B:2):3,(C:4,D:5):6);").unwrap();
        let r = t.reroot("C").unwrap();
        r.check().unwrap();
        assert_eq!(r.nodes.len(), t.nodes.len() - 1);
        let labels: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let d = r.path_length_matrix(&labels).unwrap();
        assert_eq!(d[0][2], 1.0 + 3.0 + 6.0 + 4.0);
    }
}
