//! Evolution sets: iterate a rule until the first repeated configuration.
//!
//! [`evolve_recorded`] keeps every configuration and an exact-membership
//! index. [`evolve_cycle_summary`] keeps O(1) configurations and recovers the
//! transient and cycle lengths with Brent's cycle finder.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::ser::{Serialize, SerializeStruct, Serializer};
use thiserror::Error;

use crate::config::Configuration;
use crate::dynamics::{Dynamics, DynamicsError};
use crate::graph::SignedGraph;

/// Default ceiling on `budget * node_count` for recorded evolution (1 GiB of bits).
pub const DEFAULT_MEMORY_CAP_BITS: u64 = 1 << 33;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("budget of {budget} distinct configurations exceeded after {steps_used} steps")]
    BudgetExceeded { budget: u64, steps_used: u64 },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error(
        "recording up to {required_bits} bits exceeds the cap of {cap_bits}; use the cycle summary instead"
    )]
    MemoryCap { required_bits: u64, cap_bits: u64 },
}

/// The evolution set `w_1 .. w_T` together with the cycle entry `h`
/// (1-based) such that `step(w_T) = w_h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    configs: Vec<Configuration>,
    cycle_entry: usize,
}

impl Trajectory {
    /// Validates the invariants against `dynamics` before accepting.
    pub fn from_parts(
        g: &SignedGraph,
        dynamics: &(impl Dynamics + ?Sized),
        configs: Vec<Configuration>,
        cycle_entry: usize,
    ) -> Result<Self, String> {
        if configs.is_empty() || cycle_entry == 0 || cycle_entry > configs.len() {
            return Err(format!(
                "cycle entry {cycle_entry} outside 1..={}",
                configs.len()
            ));
        }
        let t = Trajectory {
            configs,
            cycle_entry,
        };
        t.verify(g, dynamics)?;
        Ok(t)
    }

    /// Number of distinct configurations, `T`.
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    /// `w_t` for 1-based `t`.
    pub fn config(&self, t: usize) -> &Configuration {
        &self.configs[t - 1]
    }

    /// 1-based index `h` of the configuration that `w_T` steps to.
    pub fn cycle_entry(&self) -> usize {
        self.cycle_entry
    }

    pub fn is_equilibrium(&self) -> bool {
        self.cycle_entry == self.configs.len()
    }

    pub fn node_count(&self) -> usize {
        self.configs[0].len()
    }

    pub fn summary(&self) -> CycleSummary {
        CycleSummary {
            transient_length: (self.cycle_entry - 1) as u64,
            cycle_length: (self.configs.len() - self.cycle_entry + 1) as u64,
            total: self.configs.len() as u64,
        }
    }

    /// Checks every trajectory invariant directly, including pairwise
    /// distinctness and `w_t != w_(t+2)`.
    pub fn verify(
        &self,
        g: &SignedGraph,
        dynamics: &(impl Dynamics + ?Sized),
    ) -> Result<(), String> {
        let t_len = self.configs.len();
        for t in 1..t_len {
            let next = dynamics
                .step(g, &self.configs[t - 1])
                .map_err(|e| e.to_string())?;
            if next != self.configs[t] {
                return Err(format!("w_{} is not the successor of w_{}", t + 1, t));
            }
        }
        let last = dynamics
            .step(g, &self.configs[t_len - 1])
            .map_err(|e| e.to_string())?;
        if last != self.configs[self.cycle_entry - 1] {
            return Err(format!("step(w_T) != w_h for h = {}", self.cycle_entry));
        }
        let mut sorted: Vec<&Configuration> = self.configs.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|p| p[0] == p[1]) {
            return Err("configurations are not pairwise distinct".into());
        }
        if (0..t_len.saturating_sub(2)).any(|t| self.configs[t] == self.configs[t + 2]) {
            return Err("some w_t equals w_(t+2)".into());
        }
        Ok(())
    }
}

/// Serialized as `{"T", "h", "equilibrium", "configs": [bitstrings]}`.
impl Serialize for Trajectory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let configs: Vec<String> = self
            .configs
            .iter()
            .map(Configuration::to_bit_string)
            .collect();
        let mut st = s.serialize_struct("Trajectory", 4)?;
        st.serialize_field("T", &self.len())?;
        st.serialize_field("h", &self.cycle_entry)?;
        st.serialize_field("equilibrium", &self.is_equilibrium())?;
        st.serialize_field("configs", &configs)?;
        st.end()
    }
}

/// Transient and cycle lengths of an evolution set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleSummary {
    /// `h - 1`.
    pub transient_length: u64,
    /// `T - h + 1`.
    pub cycle_length: u64,
    /// `T`.
    pub total: u64,
}

/// `{"T", "h", "transient", "cycle", "equilibrium"}`, the trajectory header
/// without the configurations.
impl Serialize for CycleSummary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CycleSummary", 5)?;
        st.serialize_field("T", &self.total)?;
        st.serialize_field("h", &(self.transient_length + 1))?;
        st.serialize_field("transient", &self.transient_length)?;
        st.serialize_field("cycle", &self.cycle_length)?;
        st.serialize_field("equilibrium", &self.is_equilibrium())?;
        st.end()
    }
}

impl CycleSummary {
    pub fn is_equilibrium(&self) -> bool {
        self.cycle_length == 1
    }
}

/// `4|E| + 2|V| + 4 Δ (Δ+1) |V| + 2`, with `|E|` the number of edges (arcs
/// for directed graphs) and `Δ` the maximum in-degree.
///
/// For undirected unsigned graphs this bounds the length of every evolution
/// set under every threshold rule.
pub fn trajectory_bound(g: &SignedGraph) -> u64 {
    let v = g.node_count() as u64;
    let e = g.edge_count() as u64;
    let d = g.max_in_degree() as u64;
    (4 * e)
        .saturating_add(2 * v)
        .saturating_add(
            4u64.saturating_mul(d)
                .saturating_mul(d + 1)
                .saturating_mul(v),
        )
        .saturating_add(2)
}

/// The bound itself for undirected unsigned graphs, twice it otherwise.
pub fn default_budget(g: &SignedGraph) -> u64 {
    let bound = trajectory_bound(g);
    if !g.is_directed() && g.is_unsigned() {
        bound
    } else {
        bound.saturating_mul(2)
    }
}

/// True iff one step maps `w` to itself.
pub fn is_equilibrium(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w: &Configuration,
) -> Result<bool, DynamicsError> {
    Ok(dynamics.step(g, w)? == *w)
}

/// Configurations seen so far, with a hash index whose hits are confirmed by
/// full comparison.
pub(crate) struct Recorder {
    configs: Vec<Configuration>,
    index: HashMap<u64, Vec<usize>>,
}

fn fingerprint(c: &Configuration) -> u64 {
    let mut h = DefaultHasher::new();
    c.hash(&mut h);
    h.finish()
}

impl Recorder {
    pub(crate) fn new() -> Self {
        Recorder {
            configs: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// 0-based position of `c`, if recorded.
    pub(crate) fn position(&self, c: &Configuration) -> Option<usize> {
        self.index
            .get(&fingerprint(c))?
            .iter()
            .copied()
            .find(|&i| self.configs[i] == *c)
    }

    pub(crate) fn push(&mut self, c: Configuration) {
        self.index
            .entry(fingerprint(&c))
            .or_default()
            .push(self.configs.len());
        self.configs.push(c);
    }

    pub(crate) fn len(&self) -> usize {
        self.configs.len()
    }

    pub(crate) fn last(&self) -> &Configuration {
        self.configs
            .last()
            .expect("recorder is never empty when read")
    }

    pub(crate) fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub(crate) fn into_trajectory(self, cycle_entry: usize) -> Trajectory {
        Trajectory {
            configs: self.configs,
            cycle_entry,
        }
    }
}

pub(crate) fn check_memory(n: usize, budget: u64, cap_bits: u64) -> Result<(), EvolutionError> {
    let required_bits = budget.saturating_mul(n as u64);
    if required_bits > cap_bits {
        return Err(EvolutionError::MemoryCap {
            required_bits,
            cap_bits,
        });
    }
    Ok(())
}

/// How a recorded walk ended.
pub(crate) enum WalkEnd {
    /// `visit` asked to stop at the last recorded configuration.
    Stopped(Recorder),
    /// The successor of the last configuration was already recorded at this
    /// 0-based position.
    Repeated(Recorder, usize),
    BudgetExceeded {
        steps_used: u64,
    },
}

/// Steps from `w0`, calling `visit(t, w_t)` on each new configuration until
/// `visit` returns true, a configuration repeats, or the budget runs out.
pub(crate) fn walk(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    budget: u64,
    cap_bits: u64,
    mut visit: impl FnMut(usize, &Configuration) -> bool,
) -> Result<WalkEnd, EvolutionError> {
    if budget == 0 {
        return Err(EvolutionError::ZeroBudget);
    }
    w0.check_len(g.node_count()).map_err(DynamicsError::from)?;
    dynamics.check_graph(g)?;
    check_memory(g.node_count(), budget, cap_bits)?;

    let mut rec = Recorder::new();
    rec.push(w0.clone());
    if visit(1, w0) {
        return Ok(WalkEnd::Stopped(rec));
    }
    loop {
        let next = dynamics.step_unchecked(g, rec.last());
        if let Some(i) = rec.position(&next) {
            return Ok(WalkEnd::Repeated(rec, i));
        }
        if rec.len() as u64 >= budget {
            return Ok(WalkEnd::BudgetExceeded {
                steps_used: rec.len() as u64,
            });
        }
        rec.push(next);
        if visit(rec.len(), rec.last()) {
            return Ok(WalkEnd::Stopped(rec));
        }
    }
}

/// Computes the evolution set of `w0`, failing once more than `budget`
/// distinct configurations appear.
pub fn evolve_recorded(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    budget: u64,
) -> Result<Trajectory, EvolutionError> {
    evolve_recorded_capped(g, dynamics, w0, budget, DEFAULT_MEMORY_CAP_BITS)
}

/// [`evolve_recorded`] with an explicit cap on `budget * node_count` bits.
pub fn evolve_recorded_capped(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    budget: u64,
    cap_bits: u64,
) -> Result<Trajectory, EvolutionError> {
    match walk(g, dynamics, w0, budget, cap_bits, |_, _| false)? {
        WalkEnd::Repeated(rec, i) => Ok(rec.into_trajectory(i + 1)),
        WalkEnd::BudgetExceeded { steps_used } => {
            Err(EvolutionError::BudgetExceeded { budget, steps_used })
        }
        WalkEnd::Stopped(_) => unreachable!("visitor never stops"),
    }
}

/// Transient and cycle lengths using O(1) stored configurations.
pub fn evolve_cycle_summary(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    w0: &Configuration,
    budget: u64,
) -> Result<CycleSummary, EvolutionError> {
    if budget == 0 {
        return Err(EvolutionError::ZeroBudget);
    }
    w0.check_len(g.node_count()).map_err(DynamicsError::from)?;
    dynamics.check_graph(g)?;
    let f = |c: &Configuration| dynamics.step_unchecked(g, c);
    let mut steps: u64 = 0;

    // Brent: the tortoise parks at hare positions 1, 3, 7, ...; once it sits
    // inside the cycle and the window is at least the cycle length, the hare
    // meets it. That happens by hare index 3T, so 4 * budget steps without a
    // meeting means T > budget.
    let detect_limit = budget.saturating_mul(4).saturating_add(4);
    let mut power: u64 = 1;
    let mut cycle_length: u64 = 1;
    let mut tortoise = w0.clone();
    let mut hare = f(w0);
    steps += 1;
    while tortoise != hare {
        if steps >= detect_limit {
            return Err(EvolutionError::BudgetExceeded {
                budget,
                steps_used: steps,
            });
        }
        if power == cycle_length {
            tortoise = hare.clone();
            power *= 2;
            cycle_length = 0;
        }
        hare = f(&hare);
        steps += 1;
        cycle_length += 1;
    }

    // Offset the hare by one cycle length and walk both to the cycle entry.
    let mut transient_length: u64 = 0;
    let mut tortoise = w0.clone();
    let mut hare = w0.clone();
    for _ in 0..cycle_length {
        hare = f(&hare);
        steps += 1;
    }
    while tortoise != hare {
        if transient_length + cycle_length > budget {
            return Err(EvolutionError::BudgetExceeded {
                budget,
                steps_used: steps,
            });
        }
        tortoise = f(&tortoise);
        hare = f(&hare);
        steps += 2;
        transient_length += 1;
    }

    let total = transient_length + cycle_length;
    if total > budget {
        return Err(EvolutionError::BudgetExceeded {
            budget,
            steps_used: steps,
        });
    }
    Ok(CycleSummary {
        transient_length,
        cycle_length,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Opinion;
    use crate::dynamics::{make_underpopulation, Majority};
    use crate::graph::parse_graph;

    fn two_path() -> SignedGraph {
        parse_graph("graph undirected 2\nedge 0 1 +\n").unwrap()
    }

    fn three_path() -> SignedGraph {
        parse_graph("graph undirected 3\nedge 0 1 +\nedge 1 2 +\n").unwrap()
    }

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn bound_examples() {
        assert_eq!(trajectory_bound(&two_path()), 26);
        assert_eq!(trajectory_bound(&three_path()), 88);
        assert_eq!(
            trajectory_bound(&parse_graph("graph undirected 1\n").unwrap()),
            4
        );
    }

    #[test]
    fn default_budget_doubles_outside_the_proved_case() {
        let signed = parse_graph("graph undirected 2\nedge 0 1 -\n").unwrap();
        assert_eq!(default_budget(&two_path()), 26);
        assert_eq!(default_budget(&signed), 52);
        let directed = parse_graph("graph directed 2\nedge 0 1 +\n").unwrap();
        assert_eq!(default_budget(&directed), 2 * trajectory_bound(&directed));
    }

    #[test]
    fn oscillator_trajectory() {
        let t = evolve_recorded(&two_path(), &Majority, &cfg("+-"), 26).unwrap();
        assert_eq!(t.configs(), &[cfg("+-"), cfg("-+")]);
        assert_eq!(
            (t.len(), t.cycle_entry(), t.is_equilibrium()),
            (2, 1, false)
        );
        t.verify(&two_path(), &Majority).unwrap();
        let s = evolve_cycle_summary(&two_path(), &Majority, &cfg("+-"), 26).unwrap();
        assert_eq!(
            s,
            CycleSummary {
                transient_length: 0,
                cycle_length: 2,
                total: 2
            }
        );
        assert_eq!(s, t.summary());
    }

    #[test]
    fn three_path_reaches_all_ones() {
        let t = evolve_recorded(&three_path(), &Majority, &cfg("++-"), 88).unwrap();
        assert_eq!(t.configs(), &[cfg("++-"), cfg("+++")]);
        assert_eq!((t.len(), t.cycle_entry(), t.is_equilibrium()), (2, 2, true));
        let s = evolve_cycle_summary(&three_path(), &Majority, &cfg("++-"), 88).unwrap();
        assert_eq!((s.transient_length, s.cycle_length, s.total), (1, 1, 2));
    }

    #[test]
    fn fixed_point_has_length_one() {
        let ones = Configuration::uniform(3, Opinion::Positive);
        let t = evolve_recorded(&three_path(), &Majority, &ones, 1).unwrap();
        assert_eq!((t.len(), t.cycle_entry(), t.is_equilibrium()), (1, 1, true));
        let s = evolve_cycle_summary(&three_path(), &Majority, &ones, 1).unwrap();
        assert_eq!((s.transient_length, s.cycle_length, s.total), (0, 1, 1));
    }

    #[test]
    fn equilibrium_checks() {
        let ones = Configuration::uniform(2, Opinion::Positive);
        assert!(is_equilibrium(&two_path(), &Majority, &ones).unwrap());
        assert!(!is_equilibrium(&two_path(), &Majority, &cfg("+-")).unwrap());
        let isolated = parse_graph("graph undirected 3\n").unwrap();
        for i in 0..8 {
            let w = Configuration::from_index(3, i);
            assert!(is_equilibrium(&isolated, &Majority, &w).unwrap());
        }
    }

    #[test]
    fn budget_exceeded_in_both_modes() {
        // the oscillator needs two distinct configurations
        assert_eq!(
            evolve_recorded(&two_path(), &Majority, &cfg("+-"), 1),
            Err(EvolutionError::BudgetExceeded {
                budget: 1,
                steps_used: 1
            })
        );
        assert!(matches!(
            evolve_cycle_summary(&two_path(), &Majority, &cfg("+-"), 1),
            Err(EvolutionError::BudgetExceeded { .. })
        ));
        assert_eq!(
            evolve_recorded(&two_path(), &Majority, &cfg("+-"), 0),
            Err(EvolutionError::ZeroBudget)
        );
    }

    #[test]
    fn long_directed_transient_respects_budget() {
        // a directed path copies opinions forward: n - 1 steps of transient
        let n = 12;
        let text: String = std::iter::once(format!("graph directed {n}\n"))
            .chain((1..n).map(|v| format!("edge {} {v} +\n", v - 1)))
            .collect();
        let g = parse_graph(&text).unwrap();
        let w0 = Configuration::from_bits((0..n).map(|u| u == 0));
        let t = evolve_recorded(&g, &Majority, &w0, 100).unwrap();
        let s = evolve_cycle_summary(&g, &Majority, &w0, 100).unwrap();
        assert_eq!(s, t.summary());
        let need = t.len() as u64;
        assert!(evolve_recorded(&g, &Majority, &w0, need).is_ok());
        assert!(evolve_cycle_summary(&g, &Majority, &w0, need).is_ok());
        assert!(evolve_recorded(&g, &Majority, &w0, need - 1).is_err());
        assert!(evolve_cycle_summary(&g, &Majority, &w0, need - 1).is_err());
    }

    #[test]
    fn memory_cap_refuses_large_recordings() {
        assert_eq!(
            evolve_recorded_capped(&two_path(), &Majority, &cfg("+-"), 100, 150),
            Err(EvolutionError::MemoryCap {
                required_bits: 200,
                cap_bits: 150
            })
        );
    }

    #[test]
    fn table_shorter_than_degree_is_an_error() {
        let t = make_underpopulation(1, 1, 0).unwrap();
        assert!(matches!(
            evolve_recorded(&two_path(), &t, &cfg("+-"), 10),
            Err(EvolutionError::Dynamics(
                DynamicsError::TableTooShort { .. }
            ))
        ));
    }

    #[test]
    fn json_shapes() {
        let t = evolve_recorded(&two_path(), &Majority, &cfg("+-"), 26).unwrap();
        assert_eq!(
            serde_json::to_string(&t).unwrap(),
            r#"{"T":2,"h":1,"equilibrium":false,"configs":["10","01"]}"#
        );
        assert_eq!(
            serde_json::to_string(&t.summary()).unwrap(),
            r#"{"T":2,"h":1,"transient":0,"cycle":2,"equilibrium":false}"#
        );
    }
}
