//! Newick reader/writer. Branch lengths are written with 17 significant
//! digits so they round-trip exactly.

use std::collections::HashMap;

use super::{SpeciesTree, TreeBuilder};
use crate::numeric::format_g17;
use crate::{Error, Result};

pub(super) fn write(tree: &SpeciesTree) -> String {
    fn go(tree: &SpeciesTree, id: usize, out: &mut String) {
        let node = tree.node(id);
        match (node.children, node.taxon) {
            (Some([a, b]), _) => {
                out.push('(');
                go(tree, a, out);
                out.push(',');
                go(tree, b, out);
                out.push(')');
            }
            (None, Some(t)) => out.push_str(&tree.labels()[t]),
            (None, None) => unreachable!("validated at construction"),
        }
        if let Some(l) = node.length {
            out.push(':');
            out.push_str(&format_g17(l));
        }
    }
    let mut out = String::new();
    go(tree, tree.root(), &mut out);
    out.push(';');
    out
}

fn is_delimiter(c: u8) -> bool {
    matches!(c, b'(' | b')' | b',' | b':' | b';') || c.is_ascii_whitespace()
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Newick { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn token(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len() && !is_delimiter(self.text[self.pos]) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.text[start..self.pos]).unwrap_or("")
    }

    fn length(&mut self) -> Result<Option<f64>> {
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        let start = self.pos;
        let tok = self.token().to_string();
        tok.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Newick { position: start, message: format!("bad branch length '{tok}'") })
    }
}

/// Parsed node before taxa are assigned.
enum Raw {
    Leaf(String, Option<f64>),
    Internal(Box<Raw>, Box<Raw>, Option<f64>),
}

pub(super) fn parse(text: &str) -> Result<SpeciesTree> {
    let mut p = Parser { text: text.as_bytes(), pos: 0 };
    // open groups on an explicit stack so deep caterpillars do not recurse
    let mut stack: Vec<Vec<Raw>> = Vec::new();
    let mut finished: Option<Raw> = None;
    loop {
        match p.peek() {
            Some(b'(') => {
                p.pos += 1;
                stack.push(Vec::new());
                continue;
            }
            Some(b')') | Some(b',') | Some(b';') | None if stack.is_empty() && finished.is_none() => {
                return Err(p.err("expected a tree"));
            }
            _ => {}
        }
        // a leaf here, unless we just closed a group
        let node = match finished.take() {
            Some(n) => n,
            None => {
                let label = p.token().to_string();
                if label.is_empty() {
                    return Err(p.err("empty leaf label"));
                }
                let len = p.length()?;
                Raw::Leaf(label, len)
            }
        };
        match p.peek() {
            Some(b',') => {
                p.pos += 1;
                match stack.last_mut() {
                    Some(children) => children.push(node),
                    None => return Err(p.err("',' outside parentheses")),
                }
            }
            Some(b')') => {
                p.pos += 1;
                let Some(mut children) = stack.pop() else {
                    return Err(p.err("unbalanced ')'"));
                };
                children.push(node);
                if children.len() != 2 {
                    return Err(p.err(format!(
                        "internal node has {} children; only binary trees are supported",
                        children.len()
                    )));
                }
                // optional internal label (e.g. support value) is ignored
                let _ = p.token();
                let len = p.length()?;
                let b = children.pop().unwrap();
                let a = children.pop().unwrap();
                finished = Some(Raw::Internal(Box::new(a), Box::new(b), len));
                if stack.is_empty() {
                    break;
                }
            }
            Some(b';') | None if stack.is_empty() => {
                finished = Some(node);
                break;
            }
            _ => return Err(p.err("unexpected character")),
        }
    }
    p.expect(b';')?;
    if p.peek().is_some() {
        return Err(p.err("trailing text after ';'"));
    }
    let root = finished.expect("loop exits with a node");
    build(root)
}

/// `t<n>` labels covering exactly `0..k` map to taxon `n`; otherwise taxa
/// are numbered in order of appearance.
fn assign_taxa(labels: &[String]) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for l in labels {
        if map.insert(l.clone(), map.len()).is_some() {
            return Err(Error::Newick { position: 0, message: format!("duplicate leaf label '{l}'") });
        }
    }
    let numbered: Option<Vec<usize>> =
        labels.iter().map(|l| l.strip_prefix('t')?.parse::<usize>().ok().filter(|n| format!("t{n}") == *l)).collect();
    if let Some(nums) = numbered {
        if nums.iter().all(|&n| n < labels.len()) {
            // labels are distinct, so in-range numbers form a permutation
            return Ok(labels.iter().cloned().zip(nums).collect());
        }
    }
    Ok(map)
}

fn build(root: Raw) -> Result<SpeciesTree> {
    let mut labels = Vec::new();
    let mut stack = vec![&root];
    while let Some(r) = stack.pop() {
        match r {
            Raw::Leaf(l, _) => labels.push(l.clone()),
            Raw::Internal(a, b, _) => {
                stack.push(b);
                stack.push(a);
            }
        }
    }
    let taxa = assign_taxa(&labels)?;
    let mut ordered = vec![String::new(); labels.len()];
    for (l, &t) in &taxa {
        ordered[t] = l.clone();
    }

    let mut b = TreeBuilder::default();
    // post-order over the raw tree with an explicit stack
    let mut work: Vec<(&Raw, bool)> = vec![(&root, false)];
    let mut built: Vec<usize> = Vec::new();
    while let Some((r, expanded)) = work.pop() {
        match r {
            Raw::Leaf(l, len) => built.push(b.leaf(taxa[l], *len)),
            Raw::Internal(x, y, len) => {
                if expanded {
                    let right = built.pop().unwrap();
                    let left = built.pop().unwrap();
                    built.push(b.join(left, right, *len));
                } else {
                    work.push((r, true));
                    work.push((y, false));
                    work.push((x, false));
                }
            }
        }
    }
    let root_id = built.pop().expect("one root");
    b.set_length(root_id, None);
    b.finish(root_id, ordered).map_err(|e| match e {
        Error::Domain(m) => Error::Newick { position: 0, message: m },
        other => other,
    })
}
