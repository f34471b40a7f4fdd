//! Deciders for the three reachability questions, and an exhaustive
//! attractor atlas used as their oracle on small graphs.
//!
//! "Reached" means "occurs in the evolution set": the dynamics is
//! deterministic, so nothing new appears after the first repetition.

use rayon::prelude::*;
use serde::ser::{Serialize, SerializeStruct, Serializer};
use thiserror::Error;

use crate::config::{Configuration, Opinion};
use crate::dynamics::{Dynamics, DynamicsError};
use crate::evolution::{walk, EvolutionError, WalkEnd, DEFAULT_MEMORY_CAP_BITS};
use crate::graph::{NodeId, SignedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Reachability,
    ReachTarget,
    ReachEquilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    BudgetExceeded,
}

/// Outcome of a decider. `witness_step` is the 1-based trajectory index at
/// which the property first holds; `trace` holds `w_1 ..= w_witness`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub problem: Problem,
    pub answer: Answer,
    pub witness_step: Option<usize>,
    pub steps_used: u64,
    pub trace: Option<Vec<Configuration>>,
}

impl Serialize for Decision {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Decision", 5)?;
        st.serialize_field("problem", &self.problem)?;
        st.serialize_field("answer", &self.answer)?;
        if let Some(t) = self.witness_step {
            st.serialize_field("witness_step", &t)?;
        } else {
            st.skip_field("witness_step")?;
        }
        st.serialize_field("steps_used", &self.steps_used)?;
        if let Some(trace) = &self.trace {
            let trace: Vec<String> = trace.iter().map(Configuration::to_bit_string).collect();
            st.serialize_field("trace", &trace)?;
        } else {
            st.skip_field("trace")?;
        }
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("target set is empty")]
    EmptyTargetSet,
    #[error("target node {node} out of range for a graph on {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },
    #[error("graph has {node_count} nodes; exhaustive enumeration is capped at {cap}")]
    TooLarge { node_count: usize, cap: usize },
}

impl From<DynamicsError> for ReachError {
    fn from(e: DynamicsError) -> Self {
        ReachError::Evolution(e.into())
    }
}

/// Search limits: the configuration budget plus the recording memory cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub budget: u64,
    pub memory_cap_bits: u64,
}

impl From<u64> for Limits {
    fn from(budget: u64) -> Self {
        Limits {
            budget,
            memory_cap_bits: DEFAULT_MEMORY_CAP_BITS,
        }
    }
}

fn search(
    problem: Problem,
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    limits: Limits,
    holds: impl Fn(&Configuration) -> bool,
) -> Result<Decision, ReachError> {
    let end = walk(
        g,
        dynamics,
        w0,
        limits.budget,
        limits.memory_cap_bits,
        |_, c| holds(c),
    )?;
    Ok(match end {
        WalkEnd::Stopped(rec) => Decision {
            problem,
            answer: Answer::Yes,
            witness_step: Some(rec.len()),
            steps_used: rec.len() as u64 - 1,
            trace: Some(rec.configs().to_vec()),
        },
        WalkEnd::Repeated(rec, _) => Decision {
            problem,
            answer: Answer::No,
            witness_step: None,
            steps_used: rec.len() as u64,
            trace: None,
        },
        WalkEnd::BudgetExceeded { steps_used } => Decision {
            problem,
            answer: Answer::BudgetExceeded,
            witness_step: None,
            steps_used,
            trace: None,
        },
    })
}

/// Does `target` occur in the evolution set of `w0`?
pub fn decide_reachability(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    target: &Configuration,
    limits: impl Into<Limits>,
) -> Result<Decision, ReachError> {
    target
        .check_len(g.node_count())
        .map_err(DynamicsError::from)?;
    search(Problem::Reachability, g, dynamics, w0, limits.into(), |c| {
        c == target
    })
}

/// Does some configuration in the evolution set of `w0` give every node of
/// `targets` the same opinion? With `opinion` set, that opinion is required.
pub fn decide_reach_target(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    targets: &[NodeId],
    opinion: Option<Opinion>,
    limits: impl Into<Limits>,
) -> Result<Decision, ReachError> {
    let (&first, rest) = targets.split_first().ok_or(ReachError::EmptyTargetSet)?;
    if let Some(&node) = targets.iter().find(|&&u| u >= g.node_count()) {
        return Err(ReachError::NodeOutOfRange {
            node,
            node_count: g.node_count(),
        });
    }
    search(Problem::ReachTarget, g, dynamics, w0, limits.into(), |c| {
        let bit = c.bit(first);
        opinion.is_none_or(|o| o.bit() == bit) && rest.iter().all(|&u| c.bit(u) == bit)
    })
}

/// Does the evolution set of `w0` end in a fixed point? The witness is `T`.
pub fn decide_reach_equilibrium(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    limits: impl Into<Limits>,
) -> Result<Decision, ReachError> {
    let limits = limits.into();
    let end = walk(
        g,
        dynamics,
        w0,
        limits.budget,
        limits.memory_cap_bits,
        |_, _| false,
    )?;
    Ok(match end {
        WalkEnd::Repeated(rec, i) if i + 1 == rec.len() => Decision {
            problem: Problem::ReachEquilibrium,
            answer: Answer::Yes,
            witness_step: Some(rec.len()),
            steps_used: rec.len() as u64,
            trace: Some(rec.configs().to_vec()),
        },
        WalkEnd::Repeated(rec, _) => Decision {
            problem: Problem::ReachEquilibrium,
            answer: Answer::No,
            witness_step: None,
            steps_used: rec.len() as u64,
            trace: None,
        },
        WalkEnd::BudgetExceeded { steps_used } => Decision {
            problem: Problem::ReachEquilibrium,
            answer: Answer::BudgetExceeded,
            witness_step: None,
            steps_used,
            trace: None,
        },
        WalkEnd::Stopped(_) => unreachable!("visitor never stops"),
    })
}

/// Default node cap for [`attractor_atlas`].
pub const DEFAULT_ATLAS_MAX_NODES: usize = 25;
const ATLAS_HARD_MAX_NODES: usize = 31;

/// A fixed point or cycle of the global successor map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attractor {
    /// Configuration indices in successor order, starting from the smallest.
    pub members: Vec<u32>,
    /// Number of configurations (members included) that end up here.
    pub basin_size: u64,
}

impl Attractor {
    pub fn is_fixed_point(&self) -> bool {
        self.members.len() == 1
    }
}

/// The full successor map on all `2^n` configurations with its attractors.
/// Configuration index `i` gives node `u` the opinion `+1` iff bit `u` of `i`
/// is set.
#[derive(Debug, Clone)]
pub struct AttractorAtlas {
    node_count: usize,
    successors: Vec<u32>,
    attractor_of: Vec<u32>,
    attractors: Vec<Attractor>,
}

impl AttractorAtlas {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn successor_index(&self, index: u32) -> u32 {
        self.successors[index as usize]
    }

    pub fn successor(&self, w: &Configuration) -> Configuration {
        let next = self.successor_index(w.to_index() as u32);
        Configuration::from_index(self.node_count, next as u64)
    }

    /// Attractors ordered by their smallest member.
    pub fn attractors(&self) -> &[Attractor] {
        &self.attractors
    }

    /// Position in [`AttractorAtlas::attractors`] of the attractor `w` flows into.
    pub fn attractor_of(&self, w: &Configuration) -> usize {
        self.attractor_of[w.to_index() as usize] as usize
    }
}

impl Serialize for AttractorAtlas {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(serde::Serialize)]
        struct Entry {
            kind: &'static str,
            length: usize,
            basin_size: u64,
            members: Vec<String>,
        }
        let entries: Vec<Entry> = self
            .attractors
            .iter()
            .map(|a| Entry {
                kind: if a.is_fixed_point() {
                    "fixed_point"
                } else {
                    "cycle"
                },
                length: a.members.len(),
                basin_size: a.basin_size,
                members: a
                    .members
                    .iter()
                    .map(|&i| Configuration::from_index(self.node_count, i as u64).to_bit_string())
                    .collect(),
            })
            .collect();
        let mut st = s.serialize_struct("AttractorAtlas", 3)?;
        st.serialize_field("node_count", &self.node_count)?;
        st.serialize_field("configurations", &self.successors.len())?;
        st.serialize_field("attractors", &entries)?;
        st.end()
    }
}

/// Enumerates all `2^n` configurations and extracts every attractor with its
/// basin. Refuses graphs with more than `max_nodes_cap` nodes.
pub fn attractor_atlas(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    max_nodes_cap: usize,
) -> Result<AttractorAtlas, ReachError> {
    let n = g.node_count();
    let cap = max_nodes_cap.min(ATLAS_HARD_MAX_NODES);
    if n > cap {
        return Err(ReachError::TooLarge { node_count: n, cap });
    }
    dynamics.check_graph(g)?;
    let total = 1usize << n;
    let succ_of = |i: usize| {
        let w = Configuration::from_index(n, i as u64);
        dynamics.step_unchecked(g, &w).to_index() as u32
    };
    let successors: Vec<u32> = if total >= 1 << 12 {
        (0..total).into_par_iter().map(succ_of).collect()
    } else {
        (0..total).map(succ_of).collect()
    };

    const UNSET: u32 = u32::MAX;
    let mut attractor_of = vec![UNSET; total];
    let mut on_path = vec![UNSET; total];
    let mut cycles: Vec<Vec<u32>> = Vec::new();
    let mut path = Vec::new();
    for start in 0..total {
        if attractor_of[start] != UNSET {
            continue;
        }
        path.clear();
        let mut x = start;
        while attractor_of[x] == UNSET && on_path[x] != start as u32 {
            on_path[x] = start as u32;
            path.push(x);
            x = successors[x] as usize;
        }
        let id = if attractor_of[x] != UNSET {
            attractor_of[x]
        } else {
            // x closed a new cycle on the current path
            let pos = path.iter().position(|&p| p == x).expect("x is on the path");
            let mut members: Vec<u32> = path[pos..].iter().map(|&p| p as u32).collect();
            let min_at = members
                .iter()
                .enumerate()
                .min_by_key(|(_, &m)| m)
                .map(|(i, _)| i)
                .unwrap();
            members.rotate_left(min_at);
            cycles.push(members);
            (cycles.len() - 1) as u32
        };
        for &p in &path {
            attractor_of[p] = id;
        }
    }

    // renumber by smallest member; cycles are discovered in increasing order
    // of their first-visited start, which need not be their minimum
    let mut order: Vec<usize> = (0..cycles.len()).collect();
    order.sort_by_key(|&i| cycles[i][0]);
    let mut rank = vec![0u32; cycles.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as u32;
    }
    let mut basins = vec![0u64; cycles.len()];
    for a in attractor_of.iter_mut() {
        *a = rank[*a as usize];
        basins[*a as usize] += 1;
    }
    let attractors = order
        .into_iter()
        .enumerate()
        .map(|(r, i)| Attractor {
            members: std::mem::take(&mut cycles[i]),
            basin_size: basins[r],
        })
        .collect();

    Ok(AttractorAtlas {
        node_count: n,
        successors,
        attractor_of,
        attractors,
    })
}
