//! Test catalog and brute-force oracles.
//!
//! The oracles read the arc list directly and search lists linearly, so they
//! share no code path with the library's CSR neighborhoods, bit-packed steps,
//! hash index or cycle finder.

#![allow(dead_code)]

use opinion_core::{generate, Arc, Family, GeneratorSpec, Sign, SignedGraph};

/// Opinions as `+1` / `-1`.
pub type Plain = Vec<i64>;

pub fn to_plain(w: &opinion_core::Configuration) -> Plain {
    w.bits().map(|b| if b { 1 } else { -1 }).collect()
}

pub fn from_plain(p: &[i64]) -> opinion_core::Configuration {
    opinion_core::Configuration::from_bits(p.iter().map(|&x| x == 1))
}

/// `(source, target, sign)` for every directed influence, undirected edges
/// expanded in both directions.
pub fn influences(g: &SignedGraph) -> Vec<(usize, usize, i64)> {
    let mut out = Vec::new();
    for a in g.arcs() {
        out.push((a.source, a.target, a.sign.value()));
        if !g.is_directed() {
            out.push((a.target, a.source, a.sign.value()));
        }
    }
    out
}

pub fn naive_majority(g: &SignedGraph, w: &[i64]) -> Plain {
    let inf = influences(g);
    (0..w.len())
        .map(|u| {
            let s: i64 = inf.iter().filter(|x| x.1 == u).map(|x| x.2 * w[x.0]).sum();
            match s.signum() {
                1 => 1,
                -1 => -1,
                _ => w[u],
            }
        })
        .collect()
}

/// Four-clause threshold rule with tables indexed by in-degree.
pub fn naive_threshold(g: &SignedGraph, plus: &[u32], minus: &[u32], w: &[i64]) -> Plain {
    let inf = influences(g);
    (0..w.len())
        .map(|u| {
            let incoming: Vec<_> = inf.iter().filter(|x| x.1 == u).collect();
            let k = incoming.len();
            let pushes = incoming.iter().filter(|x| x.2 * w[x.0] == 1).count() as u32;
            let theta = if w[u] == 1 { plus[k] } else { minus[k] };
            if pushes >= theta {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Evolution set by linear search: `(configs, h)` with 1-based `h`.
pub fn naive_evolution(step: impl Fn(&[i64]) -> Plain, w0: &[i64]) -> (Vec<Plain>, usize) {
    let mut seen: Vec<Plain> = vec![w0.to_vec()];
    loop {
        let next = step(seen.last().unwrap());
        if let Some(i) = seen.iter().position(|c| *c == next) {
            return (seen, i + 1);
        }
        seen.push(next);
    }
}

/// `[y,v]` by explicit window enumeration over `'0'/'1'` strings.
pub fn naive_window_count(history: &str, pattern: &str) -> usize {
    let h: Vec<char> = history.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    if p.len() > h.len() {
        return 0;
    }
    (0..=h.len() - p.len())
        .filter(|&i| {
            p.iter()
                .enumerate()
                .all(|(j, &c)| c == '?' || c == h[i + j])
        })
        .count()
}

pub struct Entry {
    pub name: String,
    pub graph: SignedGraph,
}

fn spec(family: Family, n: usize, directed: bool, neg: f64, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        family,
        node_count: n,
        edge_probability: 0.5,
        negative_sign_probability: neg,
        directed,
        seed,
    }
}

/// Every path, cycle, star and complete graph on 1..=4 nodes, directed and
/// undirected, unsigned and with random signs; then 50 random signed
/// digraphs on 1..=4 nodes.
pub fn small_catalog() -> Vec<Entry> {
    let mut out = Vec::new();
    for family in [Family::Path, Family::Cycle, Family::Star, Family::Complete] {
        for n in 1..=4 {
            for directed in [false, true] {
                for (neg, tag) in [(0.0, "unsigned"), (0.5, "signed")] {
                    let s = spec(family, n, directed, neg, 1000 + n as u64);
                    out.push(Entry {
                        name: format!(
                            "{family}-{n}-{}-{tag}",
                            if directed { "directed" } else { "undirected" }
                        ),
                        graph: generate(&s).unwrap(),
                    });
                }
            }
        }
    }
    for i in 0..50u64 {
        let n = 1 + (i % 4) as usize;
        let mut s = spec(Family::Gnp, n, true, 0.5, 77 + i);
        s.edge_probability = 0.6;
        out.push(Entry {
            name: format!("random-digraph-{i}"),
            graph: generate(&s).unwrap(),
        });
    }
    out
}

/// A graph from explicit edges, for hand-built fixtures.
pub fn graph(n: usize, directed: bool, edges: &[(usize, usize, i64)]) -> SignedGraph {
    SignedGraph::new(
        n,
        directed,
        edges.iter().map(|&(u, v, s)| {
            Arc::new(
                u,
                v,
                if s < 0 {
                    Sign::Negative
                } else {
                    Sign::Positive
                },
            )
        }),
    )
    .unwrap()
}
