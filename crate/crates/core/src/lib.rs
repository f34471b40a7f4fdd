//! Deterministic opinion dynamics on signed graphs.
//!
//! Nodes hold opinions `+1` / `-1` and update synchronously from their
//! in-neighbors. An in-neighbor `v` pushes `u` towards `+1` when
//! `opinion(v) * sign(v, u) = +1`. The crate provides:
//!
//! * [`graph`] / [`generate`]: signed graphs, their text format, seeded generators
//! * [`dynamics`]: the majority rule and per-degree threshold rules
//! * [`evolution`]: evolution sets up to the first repetition, cycle summaries
//!   and the polynomial length bound for undirected unsigned graphs
//! * [`reachability`]: deciders for target, consensus and equilibrium
//!   reachability, plus an exhaustive attractor atlas
//! * [`pattern`]: history pattern counters and the counting checks behind the bound
//! * [`campaign`]: randomized verification campaigns

pub mod campaign;
pub mod config;
pub mod dynamics;
pub mod evolution;
pub mod generate;
pub mod graph;
pub mod pattern;
pub mod reachability;

pub use config::{ConfigError, Configuration, Opinion};
pub use dynamics::{
    influence_sum, majority_step, make_majority_thresholds, make_underpopulation, push_count,
    threshold_step, Dynamics, DynamicsError, Majority, Rule, ThresholdDynamics,
};
pub use evolution::{
    default_budget, evolve_cycle_summary, evolve_recorded, is_equilibrium, trajectory_bound,
    CycleSummary, EvolutionError, Trajectory,
};
pub use generate::{generate, Family, GeneratorSpec};
pub use graph::{parse_graph, Arc, DegreePartition, NodeId, Sign, SignedGraph};
pub use reachability::{
    attractor_atlas, decide_reach_equilibrium, decide_reach_target, decide_reachability, Answer,
    AttractorAtlas, Decision, Limits, Problem, ReachError,
};
