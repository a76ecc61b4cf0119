//! Truncated chronological trees.
//!
//! Individuals are stored in a flat arena. Each one lives on the interval
//! `(birth, death]` of absolute time and is identified by its Ulam-Harris
//! label, the sequence of birth ranks along its ancestral line.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;

use crate::model::Model;
use crate::rng::replica_rng;
use crate::{Error, Result};

/// Ulam-Harris label: the empty sequence is the root, `[2, 1]` is the first
/// child of the second child of the root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Label(pub Vec<u32>);

impl Label {
    pub fn root() -> Self {
        Label(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<Label> {
        if self.0.is_empty() {
            None
        } else {
            Some(Label(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, rank: u32) -> Label {
        let mut v = self.0.clone();
        v.push(rank);
        Label(v)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "∅" || s.is_empty() {
            return Ok(Label::root());
        }
        s.split('.')
            .map(|part| match part.parse::<u32>() {
                Ok(r) if r >= 1 => Ok(r),
                _ => Err(Error::invalid(
                    "label",
                    format!("`{s}` is not a valid label"),
                )),
            })
            .collect::<Result<Vec<_>>>()
            .map(Label)
    }
}

/// One individual of a [`ChronoTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub parent: Option<usize>,
    /// Birth rank among the siblings, starting at 1 (0 for the root).
    pub rank: u32,
    pub birth: f64,
    pub death: f64,
    /// Children in increasing order of birth.
    pub children: Vec<usize>,
}

impl Individual {
    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_alive_at(&self, t: f64) -> bool {
        self.birth < t && t <= self.death
    }
}

/// A finite chronological tree truncated at level `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChronoTree {
    nodes: Vec<Individual>,
    truncation: f64,
}

/// Limits for tree simulation.
#[derive(Debug, Clone, Copy)]
pub struct TreeOptions {
    pub max_nodes: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions {
            max_nodes: 10_000_000,
        }
    }
}

/// Simulates the tree started from a root of lifetime `x0`, truncated at `t_max`.
///
/// Uses the generator of replica 0 of `seed`; see [`simulate_tree_with`] to
/// supply another generator.
pub fn simulate_tree(model: &Model, x0: f64, t_max: f64, seed: u64) -> Result<ChronoTree> {
    let mut rng = replica_rng(seed, 0);
    simulate_tree_with(model, x0, t_max, TreeOptions::default(), &mut rng)
}

/// Simulates a truncated tree with the given generator.
///
/// Birth times along each life are the arrival times of a Poisson process of
/// intensity `b(t) dt`, drawn by inverting the cumulative rate. A child born at
/// `s` draws its lifetime from `K(s, ·)` and its death is capped at `t_max`.
pub fn simulate_tree_with<R: Rng + ?Sized>(
    model: &Model,
    x0: f64,
    t_max: f64,
    opts: TreeOptions,
    rng: &mut R,
) -> Result<ChronoTree> {
    if !t_max.is_finite() {
        return Err(Error::Unsupported("simulation of untruncated trees"));
    }
    if !(t_max > 0.0) {
        return Err(Error::invalid("t_max", "truncation level must be > 0"));
    }
    if !(x0 > 0.0) {
        return Err(Error::invalid(
            "x0",
            format!("root lifetime must be > 0, got {x0}"),
        ));
    }
    let mut nodes = vec![Individual {
        parent: None,
        rank: 0,
        birth: 0.0,
        death: x0.min(t_max),
        children: Vec::new(),
    }];
    let mut next = 0;
    while next < nodes.len() {
        let (start, end) = (nodes[next].birth, nodes[next].death);
        let mut s = start;
        let mut rank = 0;
        loop {
            let e: f64 = rng.sample(Exp1);
            match model.rate.ascend(s, e, end) {
                Some(birth) if birth < t_max => {
                    s = birth;
                    rank += 1;
                    let life = model.kernel.sample(birth, rng);
                    let death = (birth + life).min(t_max);
                    if nodes.len() >= opts.max_nodes {
                        return Err(Error::TreeTooLarge {
                            max_nodes: opts.max_nodes,
                        });
                    }
                    let id = nodes.len();
                    nodes.push(Individual {
                        parent: Some(next),
                        rank,
                        birth,
                        death,
                        children: Vec::new(),
                    });
                    nodes[next].children.push(id);
                }
                _ => break,
            }
        }
        next += 1;
    }
    Ok(ChronoTree {
        nodes,
        truncation: t_max,
    })
}

impl ChronoTree {
    /// Builds a tree from `(label, birth, death)` records, checking every
    /// structural invariant. Records may come in any order.
    pub fn from_records(records: &[(Label, f64, f64)], truncation: f64) -> Result<Self> {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[a].0.cmp(&records[b].0));
        if order.is_empty() || !records[order[0]].0.is_root() {
            return Err(Error::Consistency(String::from("tree has no root")));
        }
        let mut index: Vec<(Label, usize)> = Vec::with_capacity(records.len());
        let mut nodes: Vec<Individual> = Vec::with_capacity(records.len());
        for &r in &order {
            let (label, birth, death) = &records[r];
            let parent = match label.parent() {
                None => None,
                Some(p) => match index.binary_search_by(|(l, _)| l.cmp(&p)) {
                    Ok(pos) => Some(index[pos].1),
                    Err(_) => {
                        return Err(Error::Consistency(format!("parent of {label} is missing")));
                    }
                },
            };
            if index.last().is_some_and(|(l, _)| l == label) {
                return Err(Error::Consistency(format!("duplicate label {label}")));
            }
            let id = nodes.len();
            nodes.push(Individual {
                parent,
                rank: label.0.last().copied().unwrap_or(0),
                birth: *birth,
                death: *death,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            index.push((label.clone(), id));
        }
        let tree = ChronoTree { nodes, truncation };
        tree.validate()?;
        Ok(tree)
    }

    /// Checks the structural invariants of a chronological tree.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Consistency(msg));
        let root = &self.nodes[0];
        if root.parent.is_some() || root.birth != 0.0 {
            return fail(String::from("root must be born at 0"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if !(node.death > node.birth) {
                return fail(format!(
                    "individual {} dies before it is born",
                    self.label(i)
                ));
            }
            if node.death > self.truncation {
                return fail(format!(
                    "individual {} dies after the truncation level",
                    self.label(i)
                ));
            }
            let mut last = node.birth;
            for (k, &c) in node.children.iter().enumerate() {
                let child = &self.nodes[c];
                if child.rank as usize != k + 1 || child.parent != Some(i) {
                    return fail(format!("children of {} are not ranked 1..n", self.label(i)));
                }
                if !(child.birth > last) || child.birth > node.death {
                    return fail(format!(
                        "child {} is not born during its parent's life in rank order",
                        self.label(c)
                    ));
                }
                last = child.birth;
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Individual] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn root_lifetime(&self) -> f64 {
        self.nodes[0].death
    }

    /// Ulam-Harris label of individual `i`.
    pub fn label(&self, i: usize) -> Label {
        let mut ranks = Vec::new();
        let mut cur = i;
        while let Some(p) = self.nodes[cur].parent {
            ranks.push(self.nodes[cur].rank);
            cur = p;
        }
        ranks.reverse();
        Label(ranks)
    }

    /// Indices in depth-first order with children by increasing rank, which is
    /// the lexicographic order of labels.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(self.nodes[i].children.iter().rev());
        }
        out
    }

    /// `(label, parent label, birth, death)` in canonical order.
    pub fn records(&self) -> Vec<(Label, Option<Label>, f64, f64)> {
        self.canonical_order()
            .into_iter()
            .map(|i| {
                let n = &self.nodes[i];
                (
                    self.label(i),
                    n.parent.map(|p| self.label(p)),
                    n.birth,
                    n.death,
                )
            })
            .collect()
    }

    /// Number of individuals alive at `t`, that is with `birth < t <= death`.
    /// At `t = 0` this is 0 by the left-open convention.
    pub fn population_at(&self, t: f64) -> Result<usize> {
        if t > self.truncation || t < 0.0 {
            return Err(Error::OutOfRange {
                value: t,
                low: 0.0,
                high: self.truncation,
            });
        }
        Ok(self.nodes.iter().filter(|n| n.is_alive_at(t)).count())
    }

    /// Total length `Σ (death - birth)`.
    pub fn length(&self) -> f64 {
        self.nodes.iter().map(Individual::lifetime).sum()
    }

    /// Height `max death`.
    pub fn height(&self) -> f64 {
        self.nodes.iter().map(|n| n.death).fold(0.0, f64::max)
    }

    /// Whether every individual dies strictly before the truncation level.
    pub fn is_extinct(&self) -> bool {
        self.height() < self.truncation
    }
}
