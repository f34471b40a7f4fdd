//! One-step update operators.
//!
//! Every operator is synchronous: the next opinion of each node is computed
//! from the input configuration only. Large graphs are evaluated in parallel
//! over 64-node words; the result does not depend on the split.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, Configuration};
use crate::graph::{NodeId, SignedGraph};

/// Below this many nodes a step runs on the calling thread.
const PARALLEL_MIN_NODES: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("node {node} out of range for a graph on {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },
    #[error("threshold table covers degrees 0..{len} but the graph has degree {max_degree}")]
    TableTooShort { len: usize, max_degree: usize },
    #[error("threshold tables have different lengths ({plus} and {minus})")]
    TableShape { plus: usize, minus: usize },
    #[error("threshold {value} at degree {degree} exceeds the admissible maximum {max}")]
    ThresholdOutOfRange { degree: usize, value: u32, max: u32 },
    #[error("threshold file line {line}: {message}")]
    TableFile { line: usize, message: String },
    #[error("unknown dynamics `{0}` (expected majority, underpopulation:T1,T2 or a table)")]
    UnknownRule(String),
}

/// An update rule that maps a configuration to the next one.
pub trait Dynamics: Sync {
    fn label(&self) -> String;

    /// Rejects graphs the rule cannot be applied to (e.g. a short table).
    fn check_graph(&self, g: &SignedGraph) -> Result<(), DynamicsError>;

    /// Next opinion of `u` as a bit. Callers guarantee `check_graph` passed.
    fn next_bit(&self, g: &SignedGraph, w: &Configuration, u: NodeId) -> bool;

    /// The equivalent threshold tables for degrees `0..=delta`.
    fn thresholds(&self, delta: usize) -> ThresholdDynamics;

    fn step(&self, g: &SignedGraph, w: &Configuration) -> Result<Configuration, DynamicsError> {
        w.check_len(g.node_count())?;
        self.check_graph(g)?;
        Ok(self.step_unchecked(g, w))
    }

    /// Same as [`Dynamics::step`] without the shape checks.
    fn step_unchecked(&self, g: &SignedGraph, w: &Configuration) -> Configuration {
        let n = g.node_count();
        let word = |wi: usize| {
            let base = wi * 64;
            let mut bits = 0u64;
            for b in 0..64.min(n - base) {
                if self.next_bit(g, w, base + b) {
                    bits |= 1 << b;
                }
            }
            bits
        };
        let n_words = n.div_ceil(64);
        let words = if n >= PARALLEL_MIN_NODES {
            (0..n_words).into_par_iter().map(word).collect()
        } else {
            (0..n_words).map(word).collect()
        };
        Configuration::from_words(n, words)
    }
}

fn check_node(g: &SignedGraph, w: &Configuration, u: NodeId) -> Result<(), DynamicsError> {
    w.check_len(g.node_count())?;
    if u >= g.node_count() {
        return Err(DynamicsError::NodeOutOfRange {
            node: u,
            node_count: g.node_count(),
        });
    }
    Ok(())
}

#[inline]
fn push_count_unchecked(g: &SignedGraph, w: &Configuration, u: NodeId) -> usize {
    // v pushes u to +1 iff opinion(v) = +1 xor the arc is negative
    g.in_neighbors(u)
        .iter()
        .filter(|a| w.bit(a.source as usize) != a.sign.is_negative())
        .count()
}

#[inline]
fn influence_sum_unchecked(g: &SignedGraph, w: &Configuration, u: NodeId) -> i64 {
    g.in_neighbors(u)
        .iter()
        .map(|a| a.sign.value() * w.opinion(a.source as usize).value())
        .sum()
}

/// Number of in-neighbors of `u` that push it to `+1`.
pub fn push_count(g: &SignedGraph, w: &Configuration, u: NodeId) -> Result<usize, DynamicsError> {
    check_node(g, w, u)?;
    Ok(push_count_unchecked(g, w, u))
}

/// `sum over in-neighbors v of sign(v,u) * opinion(v)`, in the `±1` encoding.
pub fn influence_sum(g: &SignedGraph, w: &Configuration, u: NodeId) -> Result<i64, DynamicsError> {
    check_node(g, w, u)?;
    Ok(influence_sum_unchecked(g, w, u))
}

/// The deterministic majority rule: each node takes the sign of its influence
/// sum and keeps its opinion on a zero sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Majority;

impl Dynamics for Majority {
    fn label(&self) -> String {
        "majority".to_string()
    }

    fn check_graph(&self, _g: &SignedGraph) -> Result<(), DynamicsError> {
        Ok(())
    }

    #[inline]
    fn next_bit(&self, g: &SignedGraph, w: &Configuration, u: NodeId) -> bool {
        match influence_sum_unchecked(g, w, u) {
            s if s > 0 => true,
            0 => w.bit(u),
            _ => false,
        }
    }

    fn thresholds(&self, delta: usize) -> ThresholdDynamics {
        make_majority_thresholds(delta)
    }
}

pub fn majority_step(g: &SignedGraph, w: &Configuration) -> Result<Configuration, DynamicsError> {
    Majority.step(g, w)
}

/// Local threshold-based dynamics given by per-degree lookup tables.
///
/// A node at `+1` stays there iff its push count reaches `theta_plus[k]`; a
/// node at `-1` moves to `+1` iff its push count reaches `theta_minus[k]`,
/// where `k` is its in-degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdDynamics {
    theta_plus: Vec<u32>,
    theta_minus: Vec<u32>,
    label: String,
}

impl ThresholdDynamics {
    /// Tables cover degrees `0..len`; every entry must be at most `len`
    /// (that is, `delta + 1` for `delta = len - 1`).
    pub fn new(
        theta_plus: Vec<u32>,
        theta_minus: Vec<u32>,
        label: impl Into<String>,
    ) -> Result<Self, DynamicsError> {
        if theta_plus.len() != theta_minus.len() || theta_plus.is_empty() {
            return Err(DynamicsError::TableShape {
                plus: theta_plus.len(),
                minus: theta_minus.len(),
            });
        }
        let max = theta_plus.len() as u32;
        for (degree, &value) in theta_plus.iter().chain(&theta_minus).enumerate() {
            if value > max {
                return Err(DynamicsError::ThresholdOutOfRange {
                    degree: degree % theta_plus.len(),
                    value,
                    max,
                });
            }
        }
        Ok(ThresholdDynamics {
            theta_plus,
            theta_minus,
            label: label.into(),
        })
    }

    pub fn theta_plus(&self) -> &[u32] {
        &self.theta_plus
    }

    pub fn theta_minus(&self) -> &[u32] {
        &self.theta_minus
    }

    /// Largest degree the tables cover.
    pub fn max_degree(&self) -> usize {
        self.theta_plus.len() - 1
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Renders the table file format.
    pub fn to_table_file(&self) -> String {
        let mut out = format!("thresholds {}\n", self.theta_plus.len());
        for (k, (p, m)) in self.theta_plus.iter().zip(&self.theta_minus).enumerate() {
            out.push_str(&format!("{k} {p} {m}\n"));
        }
        out
    }

    /// Parses `thresholds <delta+1>` followed by one `k <theta_plus> <theta_minus>`
    /// line per degree. `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self, DynamicsError> {
        let bad = |line: usize, message: String| DynamicsError::TableFile { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines
            .next()
            .ok_or_else(|| bad(1, "missing `thresholds <n>` header".into()))?;
        let len: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["thresholds", n] => n
                .parse()
                .map_err(|_| bad(line, format!("bad table length `{n}`")))?,
            _ => return Err(bad(line, "missing `thresholds <n>` header".into())),
        };
        if len == 0 {
            return Err(bad(line, "table length must be at least 1".into()));
        }
        let mut plus = vec![None; len];
        let mut minus = vec![0; len];
        for (line, text) in lines {
            let nums: Vec<u32> = text
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad(line, format!("malformed line `{text}`")))?;
            let [k, p, m] = nums.as_slice() else {
                return Err(bad(line, format!("malformed line `{text}`")));
            };
            let k = *k as usize;
            if k >= len {
                return Err(bad(line, format!("degree {k} outside 0..{len}")));
            }
            if plus[k].is_some() {
                return Err(bad(line, format!("degree {k} listed twice")));
            }
            plus[k] = Some(*p);
            minus[k] = *m;
        }
        let plus = plus
            .into_iter()
            .enumerate()
            .map(|(k, p)| p.ok_or_else(|| bad(0, format!("degree {k} missing"))))
            .collect::<Result<Vec<_>, _>>()?;
        ThresholdDynamics::new(plus, minus, "table")
    }
}

impl Dynamics for ThresholdDynamics {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn check_graph(&self, g: &SignedGraph) -> Result<(), DynamicsError> {
        if self.theta_plus.len() <= g.max_in_degree() {
            return Err(DynamicsError::TableTooShort {
                len: self.theta_plus.len(),
                max_degree: g.max_in_degree(),
            });
        }
        Ok(())
    }

    #[inline]
    fn next_bit(&self, g: &SignedGraph, w: &Configuration, u: NodeId) -> bool {
        let k = g.in_degree(u);
        let pushes = push_count_unchecked(g, w, u) as u32;
        if w.bit(u) {
            pushes >= self.theta_plus[k]
        } else {
            pushes >= self.theta_minus[k]
        }
    }

    fn thresholds(&self, delta: usize) -> ThresholdDynamics {
        assert!(
            delta <= self.max_degree(),
            "table does not cover degree {delta}"
        );
        self.clone()
    }
}

pub fn threshold_step(
    g: &SignedGraph,
    dynamics: &ThresholdDynamics,
    w: &Configuration,
) -> Result<Configuration, DynamicsError> {
    dynamics.step(g, w)
}

/// Majority as threshold tables: `theta_plus[k] = ceil(k/2)`,
/// `theta_minus[k] = floor(k/2) + 1`.
pub fn make_majority_thresholds(delta: usize) -> ThresholdDynamics {
    let plus = (0..=delta).map(|k| k.div_ceil(2) as u32).collect();
    let minus = (0..=delta).map(|k| (k / 2 + 1) as u32).collect();
    ThresholdDynamics::new(plus, minus, "majority-thresholds")
        .expect("majority thresholds never exceed delta + 1")
}

/// Constant tables `theta_plus = t1`, `theta_minus = t2`.
pub fn make_underpopulation(
    t1: u32,
    t2: u32,
    delta: usize,
) -> Result<ThresholdDynamics, DynamicsError> {
    ThresholdDynamics::new(
        vec![t1; delta + 1],
        vec![t2; delta + 1],
        format!("underpopulation:{t1},{t2}"),
    )
}

/// Tables with each entry drawn uniformly from `0..=k+1`.
pub fn random_thresholds<R: Rng + ?Sized>(delta: usize, rng: &mut R) -> ThresholdDynamics {
    let plus = (0..=delta)
        .map(|k| rng.gen_range(0..=k as u32 + 1))
        .collect();
    let minus = (0..=delta)
        .map(|k| rng.gen_range(0..=k as u32 + 1))
        .collect();
    ThresholdDynamics::new(plus, minus, "random-table").expect("entries are at most delta + 1")
}

/// The rules the tools know by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Majority,
    /// Constant thresholds, sized to whatever graph they are applied to.
    Underpopulation {
        t1: u32,
        t2: u32,
    },
    Table(ThresholdDynamics),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Majority => f.write_str("majority"),
            Rule::Underpopulation { t1, t2 } => write!(f, "underpopulation:{t1},{t2}"),
            Rule::Table(t) => f.write_str(&t.label),
        }
    }
}

/// Parses `majority` or `underpopulation:T1,T2`. Tables are loaded with
/// [`ThresholdDynamics::parse_table`].
impl FromStr for Rule {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || DynamicsError::UnknownRule(s.to_string());
        if s == "majority" {
            return Ok(Rule::Majority);
        }
        let args = s.strip_prefix("underpopulation:").ok_or_else(unknown)?;
        let (a, b) = args.split_once(',').ok_or_else(unknown)?;
        Ok(Rule::Underpopulation {
            t1: a.trim().parse().map_err(|_| unknown())?,
            t2: b.trim().parse().map_err(|_| unknown())?,
        })
    }
}

impl Dynamics for Rule {
    fn label(&self) -> String {
        self.to_string()
    }

    fn check_graph(&self, g: &SignedGraph) -> Result<(), DynamicsError> {
        match self {
            Rule::Majority => Ok(()),
            Rule::Underpopulation { t1, t2 } => {
                make_underpopulation(*t1, *t2, g.max_in_degree()).map(|_| ())
            }
            Rule::Table(t) => t.check_graph(g),
        }
    }

    #[inline]
    fn next_bit(&self, g: &SignedGraph, w: &Configuration, u: NodeId) -> bool {
        match self {
            Rule::Majority => Majority.next_bit(g, w, u),
            Rule::Underpopulation { t1, t2 } => {
                let pushes = push_count_unchecked(g, w, u) as u32;
                pushes >= if w.bit(u) { *t1 } else { *t2 }
            }
            Rule::Table(t) => t.next_bit(g, w, u),
        }
    }

    fn thresholds(&self, delta: usize) -> ThresholdDynamics {
        match self {
            Rule::Majority => make_majority_thresholds(delta),
            Rule::Underpopulation { t1, t2 } => ThresholdDynamics {
                theta_plus: vec![*t1; delta + 1],
                theta_minus: vec![*t2; delta + 1],
                label: self.to_string(),
            },
            Rule::Table(t) => t.thresholds(delta),
        }
    }
}
