//! Signed directed and undirected graphs, their text format, and degree classes.
//!
//! Undirected graphs are kept as symmetric in-neighbor lists, so every update
//! rule reads `in_neighbors(u)` regardless of the direction flag. The arc list
//! keeps each undirected edge once, with `source < target`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identifier in `0..node_count`.
pub type NodeId = usize;

/// Label of an arc: trust (`Positive`) or distrust (`Negative`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    /// The label as `-1` or `+1`.
    pub fn value(self) -> i64 {
        match self {
            Sign::Negative => -1,
            Sign::Positive => 1,
        }
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Negative
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Negative => '-',
            Sign::Positive => '+',
        }
    }
}

/// A signed arc `source -> target`. For undirected graphs this is one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arc {
    pub source: NodeId,
    pub target: NodeId,
    pub sign: Sign,
}

impl Arc {
    pub fn new(source: NodeId, target: NodeId, sign: Sign) -> Self {
        Arc {
            source,
            target,
            sign,
        }
    }
}

/// One entry of a node's in-neighbor list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InArc {
    pub source: u32,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {node} out of range for a graph on {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({0}, {1}) appears with both signs in an undirected graph")]
    AsymmetricSign(NodeId, NodeId),
    #[error("{0} nodes exceeds the supported maximum")]
    TooLarge(usize),
}

/// A validated, immutable signed graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedGraph {
    node_count: usize,
    directed: bool,
    arcs: Vec<Arc>,
    in_offsets: Vec<usize>,
    in_arcs: Vec<InArc>,
    max_in_degree: usize,
}

impl SignedGraph {
    /// Builds and validates a graph. Arcs may come in any order; undirected
    /// edges may be given in either orientation.
    pub fn new(
        node_count: usize,
        directed: bool,
        arcs: impl IntoIterator<Item = Arc>,
    ) -> Result<Self, GraphError> {
        if node_count > u32::MAX as usize {
            return Err(GraphError::TooLarge(node_count));
        }
        let mut arcs: Vec<Arc> = arcs
            .into_iter()
            .map(|a| {
                for node in [a.source, a.target] {
                    if node >= node_count {
                        return Err(GraphError::NodeOutOfRange { node, node_count });
                    }
                }
                if a.source == a.target {
                    return Err(GraphError::SelfLoop(a.source));
                }
                if !directed && a.source > a.target {
                    Ok(Arc::new(a.target, a.source, a.sign))
                } else {
                    Ok(a)
                }
            })
            .collect::<Result<_, _>>()?;
        arcs.sort_unstable();
        for pair in arcs.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if (a.source, a.target) == (b.source, b.target) {
                return Err(if a.sign != b.sign && !directed {
                    GraphError::AsymmetricSign(a.source, a.target)
                } else {
                    GraphError::DuplicateEdge(a.source, a.target)
                });
            }
        }

        let mut in_degree = vec![0usize; node_count];
        for a in &arcs {
            in_degree[a.target] += 1;
            if !directed {
                in_degree[a.source] += 1;
            }
        }
        let mut in_offsets = Vec::with_capacity(node_count + 1);
        in_offsets.push(0);
        for d in &in_degree {
            in_offsets.push(in_offsets.last().unwrap() + d);
        }
        let max_in_degree = in_degree.iter().copied().max().unwrap_or(0);

        let mut cursor = in_offsets[..node_count].to_vec();
        let mut in_arcs = vec![
            InArc {
                source: 0,
                sign: Sign::Positive
            };
            in_offsets[node_count]
        ];
        let mut push = |to: NodeId, from: NodeId, sign: Sign| {
            in_arcs[cursor[to]] = InArc {
                source: from as u32,
                sign,
            };
            cursor[to] += 1;
        };
        for a in &arcs {
            push(a.target, a.source, a.sign);
            if !directed {
                push(a.source, a.target, a.sign);
            }
        }
        if !directed {
            for u in 0..node_count {
                in_arcs[in_offsets[u]..in_offsets[u + 1]].sort_unstable_by_key(|x| x.source);
            }
        }

        Ok(SignedGraph {
            node_count,
            directed,
            arcs,
            in_offsets,
            in_arcs,
            max_in_degree,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Arcs in ascending `(source, target)` order; undirected edges appear once.
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Number of arcs (directed) or edges (undirected).
    pub fn edge_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn in_neighbors(&self, u: NodeId) -> &[InArc] {
        &self.in_arcs[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    pub fn in_degree(&self, u: NodeId) -> usize {
        self.in_offsets[u + 1] - self.in_offsets[u]
    }

    /// Maximum in-degree over all nodes (the degree bound used by the dynamics).
    pub fn max_in_degree(&self) -> usize {
        self.max_in_degree
    }

    /// True when every arc is positive.
    pub fn is_unsigned(&self) -> bool {
        self.arcs.iter().all(|a| a.sign == Sign::Positive)
    }

    pub fn degree_partition(&self) -> DegreePartition {
        degree_partition(self)
    }

    /// Renders the graph in the line-oriented text format.
    pub fn to_graph_file(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SignedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.directed {
            "directed"
        } else {
            "undirected"
        };
        writeln!(f, "graph {} {}", kind, self.node_count)?;
        for a in &self.arcs {
            writeln!(f, "edge {} {} {}", a.source, a.target, a.sign.symbol())?;
        }
        Ok(())
    }
}

/// Nodes grouped by in-degree. Only non-empty classes are present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreePartition {
    classes: BTreeMap<usize, Vec<NodeId>>,
}

impl DegreePartition {
    pub fn classes(&self) -> &BTreeMap<usize, Vec<NodeId>> {
        &self.classes
    }

    /// Nodes of degree exactly `k` (empty if none).
    pub fn class(&self, k: usize) -> &[NodeId] {
        self.classes.get(&k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }
}

pub fn degree_partition(g: &SignedGraph) -> DegreePartition {
    let mut classes: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for u in 0..g.node_count() {
        classes.entry(g.in_degree(u)).or_default().push(u);
    }
    DegreePartition { classes }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected header `graph <directed|undirected> <n>`")]
    MissingHeader,
    #[error("malformed line `{0}`")]
    Malformed(String),
    #[error(transparent)]
    Invalid(#[from] GraphError),
}

/// A graph-file error, tagged with the 1-based line it was found on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

fn err(line: usize, kind: impl Into<ParseErrorKind>) -> ParseError {
    ParseError {
        line,
        kind: kind.into(),
    }
}

/// Parses the graph text format:
///
/// ```text
/// graph undirected 3
/// # comment
/// edge 0 1 +
/// edge 1 2 -
/// ```
pub fn parse_graph(text: &str) -> Result<SignedGraph, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or(err(1, ParseErrorKind::MissingHeader))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (directed, node_count) = match fields.as_slice() {
        ["graph", kind, n] => {
            let directed = match *kind {
                "directed" => true,
                "undirected" => false,
                _ => return Err(err(header_line, ParseErrorKind::MissingHeader)),
            };
            let n: usize = n
                .parse()
                .map_err(|_| err(header_line, ParseErrorKind::Malformed(header.to_string())))?;
            (directed, n)
        }
        _ => return Err(err(header_line, ParseErrorKind::MissingHeader)),
    };

    let mut seen: HashMap<(NodeId, NodeId), Sign> = HashMap::new();
    let mut arcs = Vec::new();
    for (line, text) in lines {
        let malformed = || err(line, ParseErrorKind::Malformed(text.to_string()));
        let fields: Vec<&str> = text.split_whitespace().collect();
        let ["edge", u, v, s] = fields.as_slice() else {
            return Err(malformed());
        };
        let u: NodeId = u.parse().map_err(|_| malformed())?;
        let v: NodeId = v.parse().map_err(|_| malformed())?;
        let sign = match *s {
            "+" | "+1" | "1" => Sign::Positive,
            "-" | "-1" => Sign::Negative,
            _ => return Err(malformed()),
        };
        for node in [u, v] {
            if node >= node_count {
                return Err(err(line, GraphError::NodeOutOfRange { node, node_count }));
            }
        }
        if u == v {
            return Err(err(line, GraphError::SelfLoop(u)));
        }
        let key = if directed || u < v { (u, v) } else { (v, u) };
        if let Some(&prev) = seen.get(&key) {
            return Err(err(
                line,
                if prev != sign && !directed {
                    GraphError::AsymmetricSign(key.0, key.1)
                } else {
                    GraphError::DuplicateEdge(key.0, key.1)
                },
            ));
        }
        seen.insert(key, sign);
        arcs.push(Arc::new(u, v, sign));
    }
    SignedGraph::new(node_count, directed, arcs).map_err(|e| err(header_line, e))
}

impl FromStr for SignedGraph {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_graph(s)
    }
}
