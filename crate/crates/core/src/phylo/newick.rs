use std::collections::HashSet;

use super::PhyloTree;
use crate::error::{Error, Result};

fn needs_quotes(label: &str) -> bool {
    label.is_empty()
        || label
            .chars()
            .any(|c| c.is_whitespace() || "()[]':;,".contains(c))
}

fn write_label(out: &mut String, label: &str) {
    if needs_quotes(label) {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    } else {
        out.push_str(label);
    }
}

fn write_node(t: &PhyloTree, v: usize, out: &mut String) {
    let node = &t.nodes[v];
    if !node.children.is_empty() {
        out.push('(');
        for (i, &c) in node.children.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_node(t, c, out);
        }
        out.push(')');
    }
    match node.label.as_deref() {
        Some(l) if node.children.is_empty() || !l.is_empty() => write_label(out, l),
        _ => {}
    }
    if v != t.root {
        out.push(':');
        out.push_str(&node.length.to_string());
    }
}

/// Newick text with branch lengths, semicolon-terminated. Lengths use the
/// shortest representation that parses back to the same `f64`.
pub fn to_newick(t: &PhyloTree) -> String {
    let mut out = String::new();
    write_node(t, t.root, &mut out);
    out.push(';');
    out
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    tree: PhyloTree,
}

impl Parser<'_> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Newick {
            position: self.pos,
            reason: reason.into(),
        })
    }

    fn skip_ws(&mut self) {
        loop {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.peek() == Some(b'[') {
                while self.pos < self.src.len() && self.src[self.pos] != b']' {
                    self.pos += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut s = Vec::new();
            loop {
                match self.peek() {
                    None => return self.err("unterminated quoted label"),
                    Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => {
                        s.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        s.push(c);
                        self.pos += 1;
                    }
                }
            }
            return Ok(Some(String::from_utf8_lossy(&s).into_owned()));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if b"()[]':;,".contains(&c) || c.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        Ok((self.pos > start)
            .then(|| String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()))
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_ws();
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => self.err(format!("bad branch length {text:?}")),
        }
    }

    fn subtree(&mut self, depth: usize) -> Result<usize> {
        if depth > 10_000 {
            return self.err("nesting too deep");
        }
        self.skip_ws();
        let id = self.tree.add_node(None);
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                let child = self.subtree(depth + 1)?;
                let len = self.length()?.unwrap_or(0.0);
                self.tree.attach(id, child, len);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return self.err("unbalanced parentheses: expected ',' or ')'"),
                }
            }
            self.tree.nodes[id].label = self.label()?;
        } else {
            match self.label()? {
                Some(l) => self.tree.nodes[id].label = Some(l),
                None => return self.err("unlabeled leaf"),
            }
        }
        Ok(id)
    }
}

/// Parses a Newick string. Unlabeled leaves and duplicate leaf labels are
/// rejected; missing branch lengths read as 0.
pub fn parse_newick(text: &str) -> Result<PhyloTree> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        tree: PhyloTree {
            nodes: Vec::new(),
            root: 0,
        },
    };
    let root = p.subtree(0)?;
    p.length()?;
    p.skip_ws();
    if p.peek() == Some(b')') {
        return p.err("unbalanced parentheses: unexpected ')'");
    }
    if p.peek() != Some(b';') {
        return p.err("expected ';'");
    }
    p.pos += 1;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing data after ';'");
    }
    let tree = PhyloTree { root, ..p.tree };
    let mut seen = HashSet::new();
    for v in tree.leaves() {
        let l = tree.nodes[v].label.clone().unwrap_or_default();
        if !seen.insert(l.clone()) {
            return Err(Error::DuplicateLabel(l));
        }
    }
    Ok(tree)
}
