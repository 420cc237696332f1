//! Precedence between events and its transitive closure.

use std::collections::{BTreeMap, BTreeSet};

use super::ReasonError;

/// Strict precedence `a ≺ b` between event ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemporalOrder {
    pairs: BTreeSet<(String, String)>,
}

impl TemporalOrder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build without consistency checks; [`temporal_closure`] reports cycles.
    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self {
            pairs: pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }

    /// Insert `before ≺ after`, refusing anything that would make the order
    /// reflexive or cyclic.
    pub fn insert(&mut self, before: &str, after: &str) -> Result<bool, ReasonError> {
        if before == after {
            return Err(ReasonError::TemporalCycle {
                cycle: vec![before.to_string(), before.to_string()],
            });
        }
        if let Some(mut path) = self.path(after, before) {
            path.push(after.to_string());
            return Err(ReasonError::TemporalCycle { cycle: path });
        }
        Ok(self.pairs.insert((before.to_string(), after.to_string())))
    }

    pub fn contains(&self, before: &str, after: &str) -> bool {
        self.pairs.contains(&(before.to_string(), after.to_string()))
    }

    pub fn pairs(&self) -> &BTreeSet<(String, String)> {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn successors(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b) in &self.pairs {
            succ.entry(a.as_str()).or_default().push(b.as_str());
        }
        succ
    }

    /// Some path `from → … → to` following the order, if one exists.
    fn path(&self, from: &str, to: &str) -> Option<Vec<String>> {
        let succ = self.successors();
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        let mut stack = vec![from];
        let mut seen = BTreeSet::from([from]);
        while let Some(node) = stack.pop() {
            if node == to {
                let mut path = vec![to.to_string()];
                let mut cur = to;
                while let Some(&p) = parent.get(cur) {
                    path.push(p.to_string());
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for &next in succ.get(node).into_iter().flatten() {
                if seen.insert(next) {
                    parent.insert(next, node);
                    stack.push(next);
                }
            }
        }
        None
    }

    /// A cycle in the order, as a closed walk `[a, b, …, a]`.
    pub fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let succ = self.successors();
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        for &root in succ.keys() {
            if marks.contains_key(root) {
                continue;
            }
            // iterative DFS keeping the current path on `trail`
            let mut trail: Vec<(&str, usize)> = vec![(root, 0)];
            marks.insert(root, Mark::Open);
            while let Some((node, idx)) = trail.last().copied() {
                let children = succ.get(node).map(Vec::as_slice).unwrap_or(&[]);
                if idx < children.len() {
                    trail.last_mut().expect("non-empty").1 += 1;
                    let child = children[idx];
                    match marks.get(child) {
                        Some(Mark::Open) => {
                            let start = trail.iter().position(|(n, _)| *n == child).expect("open node on trail");
                            let mut cycle: Vec<String> =
                                trail[start..].iter().map(|(n, _)| n.to_string()).collect();
                            cycle.push(child.to_string());
                            return Some(cycle);
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(child, Mark::Open);
                            trail.push((child, 0));
                        }
                    }
                } else {
                    marks.insert(node, Mark::Done);
                    trail.pop();
                }
            }
        }
        None
    }
}

/// Transitive closure of the precedence order:
/// `x ≺ y ∧ y ≺ z → x ≺ z`.
pub fn temporal_closure(order: &TemporalOrder) -> Result<TemporalOrder, ReasonError> {
    if let Some(cycle) = order.find_cycle() {
        return Err(ReasonError::TemporalCycle { cycle });
    }
    let succ = order.successors();
    let mut closed = BTreeSet::new();
    for &start in succ.keys() {
        let mut stack: Vec<&str> = succ[start].clone();
        let mut seen = BTreeSet::new();
        while let Some(node) = stack.pop() {
            if seen.insert(node) {
                closed.insert((start.to_string(), node.to_string()));
                stack.extend(succ.get(node).into_iter().flatten().copied());
            }
        }
    }
    Ok(TemporalOrder { pairs: closed })
}
