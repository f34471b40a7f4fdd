//! Seeded graph generators.
//!
//! Every generator is a pure function of its [`GeneratorSpec`]: the same spec
//! (including the seed) always yields the same arc list. Randomness comes from
//! ChaCha8, which is stable across platforms.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Arc, GraphError, NodeId, Sign, SignedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gnp,
    Path,
    Cycle,
    Complete,
    Star,
    Grid,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Gnp,
        Family::Path,
        Family::Cycle,
        Family::Complete,
        Family::Star,
        Family::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gnp => "gnp",
            Family::Path => "path",
            Family::Cycle => "cycle",
            Family::Complete => "complete",
            Family::Star => "star",
            Family::Grid => "grid",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| GenerateError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("{name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("node_count must be at least 1")]
    Empty,
    #[error("unknown graph family `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub node_count: usize,
    /// Only read by `gnp`.
    pub edge_probability: f64,
    pub negative_sign_probability: f64,
    pub directed: bool,
    pub seed: u64,
}

impl GeneratorSpec {
    /// An unsigned, undirected spec with seed 0.
    pub fn new(family: Family, node_count: usize) -> Self {
        GeneratorSpec {
            family,
            node_count,
            edge_probability: 0.5,
            negative_sign_probability: 0.0,
            directed: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        for (name, value) in [
            ("edge_probability", self.edge_probability),
            ("negative_sign_probability", self.negative_sign_probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(GenerateError::Probability { name, value });
            }
        }
        if self.node_count == 0 {
            return Err(GenerateError::Empty);
        }
        Ok(())
    }
}

/// Builds the graph described by `spec`.
///
/// Structural families orient each template edge from the lower to the higher
/// id when `directed` is set (the cycle closes with `n-1 -> 0`); `complete`
/// then contains both orientations. Each chosen edge is negative with
/// probability `negative_sign_probability`, drawn right after the edge itself.
pub fn generate(spec: &GeneratorSpec) -> Result<SignedGraph, GenerateError> {
    spec.validate()?;
    let n = spec.node_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let neg = spec.negative_sign_probability;
    let mut arcs = Vec::new();

    let mut template: Vec<(NodeId, NodeId)> = Vec::new();
    match spec.family {
        Family::Gnp => {
            let p = spec.edge_probability;
            if spec.directed {
                gnp_directed(n, p, &mut rng, |u, v, rng| {
                    arcs.push(Arc::new(u, v, draw_sign(rng, neg)))
                });
            } else {
                gnp_undirected(n, p, &mut rng, |u, v, rng| {
                    arcs.push(Arc::new(u, v, draw_sign(rng, neg)))
                });
            }
        }
        Family::Path => template.extend((1..n).map(|v| (v - 1, v))),
        Family::Cycle => {
            template.extend((1..n).map(|v| (v - 1, v)));
            if n >= 3 {
                template.push((n - 1, 0));
            }
        }
        Family::Complete => {
            for u in 0..n {
                for v in u + 1..n {
                    template.push((u, v));
                    if spec.directed {
                        template.push((v, u));
                    }
                }
            }
        }
        Family::Star => template.extend((1..n).map(|v| (0, v))),
        Family::Grid => {
            let rows = ((n as f64).sqrt().floor() as usize).max(1);
            let cols = n.div_ceil(rows);
            for i in 0..n {
                if (i + 1) % cols != 0 && i + 1 < n {
                    template.push((i, i + 1));
                }
                if i + cols < n {
                    template.push((i, i + cols));
                }
            }
        }
    }
    for (u, v) in template {
        arcs.push(Arc::new(u, v, draw_sign(&mut rng, neg)));
    }
    Ok(SignedGraph::new(n, spec.directed, arcs)?)
}

fn draw_sign(rng: &mut ChaCha8Rng, negative_probability: f64) -> Sign {
    if rng.gen_bool(negative_probability) {
        Sign::Negative
    } else {
        Sign::Positive
    }
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
fn geometric_skip(rng: &mut ChaCha8Rng, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let r: f64 = rng.gen();
    let skip = ((1.0 - r).ln() / (1.0 - p).ln()).floor();
    if skip >= u64::MAX as f64 {
        u64::MAX
    } else {
        skip as u64
    }
}

// Geometric skipping over the pairs w < v, in order of v then w, so sparse
// graphs cost O(n + m) instead of O(n^2).
fn gnp_undirected(
    n: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
    mut emit: impl FnMut(NodeId, NodeId, &mut ChaCha8Rng),
) {
    if p <= 0.0 {
        return;
    }
    let n = n as u64;
    let (mut v, mut w) = (1u64, 0u64);
    loop {
        w = w.saturating_add(geometric_skip(rng, p));
        while v < n && w >= v {
            w -= v;
            v += 1;
        }
        if v >= n {
            break;
        }
        emit(w as usize, v as usize, rng);
        w += 1;
    }
}

fn gnp_directed(
    n: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
    mut emit: impl FnMut(NodeId, NodeId, &mut ChaCha8Rng),
) {
    if p <= 0.0 || n < 2 {
        return;
    }
    let n = n as u64;
    let row = n - 1;
    let (mut u, mut j) = (0u64, 0u64);
    loop {
        j = j.saturating_add(geometric_skip(rng, p));
        while u < n && j >= row {
            j -= row;
            u += 1;
        }
        if u >= n {
            break;
        }
        let v = if j < u { j } else { j + 1 };
        emit(u as usize, v as usize, rng);
        j += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsigned_path_on_three_nodes() {
        let g = generate(&GeneratorSpec::new(Family::Path, 3)).unwrap();
        assert_eq!(
            g.to_graph_file(),
            "graph undirected 3\nedge 0 1 +\nedge 1 2 +\n"
        );
    }

    #[test]
    fn complete_graph_edge_count() {
        let g = generate(&GeneratorSpec::new(Family::Complete, 4)).unwrap();
        assert_eq!(g.edge_count(), 6);
        let mut spec = GeneratorSpec::new(Family::Complete, 4);
        spec.directed = true;
        assert_eq!(generate(&spec).unwrap().edge_count(), 12);
    }

    #[test]
    fn same_seed_same_graph() {
        let spec = GeneratorSpec {
            family: Family::Gnp,
            node_count: 40,
            edge_probability: 0.3,
            negative_sign_probability: 0.5,
            directed: false,
            seed: 7,
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.arcs(), b.arcs());
        assert!(!a.is_unsigned());
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(a.arcs(), generate(&other).unwrap().arcs());
    }

    #[test]
    fn gnp_extremes() {
        let mut spec = GeneratorSpec::new(Family::Gnp, 6);
        spec.edge_probability = 1.0;
        assert_eq!(generate(&spec).unwrap().edge_count(), 15);
        spec.directed = true;
        assert_eq!(generate(&spec).unwrap().edge_count(), 30);
        spec.edge_probability = 0.0;
        assert_eq!(generate(&spec).unwrap().edge_count(), 0);
    }

    #[test]
    fn gnp_density_is_plausible() {
        let mut spec = GeneratorSpec::new(Family::Gnp, 400);
        spec.edge_probability = 0.1;
        let m = generate(&spec).unwrap().edge_count() as f64;
        let expected = 0.1 * 400.0 * 399.0 / 2.0;
        assert!((m - expected).abs() < 0.05 * expected, "{m} vs {expected}");
        spec.directed = true;
        let m = generate(&spec).unwrap().edge_count() as f64;
        assert!((m - 2.0 * expected).abs() < 0.05 * 2.0 * expected);
    }

    #[test]
    fn structural_families() {
        let cycle = generate(&GeneratorSpec::new(Family::Cycle, 5)).unwrap();
        assert_eq!(cycle.edge_count(), 5);
        assert!((0..5).all(|u| cycle.in_degree(u) == 2));
        assert_eq!(
            generate(&GeneratorSpec::new(Family::Cycle, 2))
                .unwrap()
                .edge_count(),
            1
        );

        let star = generate(&GeneratorSpec::new(Family::Star, 5)).unwrap();
        assert_eq!(star.in_degree(0), 4);
        assert_eq!(star.max_in_degree(), 4);

        // 3x3 grid: 12 edges, centre has degree 4
        let grid = generate(&GeneratorSpec::new(Family::Grid, 9)).unwrap();
        assert_eq!(grid.edge_count(), 12);
        assert_eq!(grid.in_degree(4), 4);
        // 7 nodes as 2 rows of 4, last row short
        let grid = generate(&GeneratorSpec::new(Family::Grid, 7)).unwrap();
        assert_eq!(grid.edge_count(), 3 + 2 + 3);

        let single = generate(&GeneratorSpec::new(Family::Grid, 1)).unwrap();
        assert_eq!(single.edge_count(), 0);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = GeneratorSpec::new(Family::Gnp, 10);
        spec.edge_probability = 1.5;
        assert!(matches!(
            generate(&spec),
            Err(GenerateError::Probability { .. })
        ));
        spec.edge_probability = 0.5;
        spec.negative_sign_probability = -0.1;
        assert!(matches!(
            generate(&spec),
            Err(GenerateError::Probability { .. })
        ));
        assert_eq!(
            generate(&GeneratorSpec::new(Family::Path, 0)),
            Err(GenerateError::Empty)
        );
        assert!("hypercube".parse::<Family>().is_err());
        assert_eq!("grid".parse::<Family>().unwrap(), Family::Grid);
    }
}
