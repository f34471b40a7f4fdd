//! Node histories and wildcard pattern counters over a recorded trajectory.
//!
//! Opinions are read as bits here (`-1` is `0`). A pattern is a string over
//! `{0, 1, ?}` where `?` matches either bit. Counters follow the usual
//! bracket notation:
//!
//! * `[y,v]`: windows of node `v`'s history matched by `y`; `[y]` sums over nodes
//! * `[y]^1` / `[y]^T`: nodes whose history starts / ends with a match of `y`
//! * `[y,k]`: `[y]` restricted to nodes of degree `k`
//! * `[y,z]`, `[y,z,k]`: per ordered edge `(u,v)`, window offsets where `u`
//!   matches `y` and `v` matches `z` (`u` of degree `k`)
//!
//! Windows never wrap around into the cycle: a history has exactly `T`
//! symbols. Everything beyond plain histories requires an undirected unsigned
//! graph.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::Dynamics;
use crate::evolution::{trajectory_bound, Trajectory};
use crate::graph::{DegreePartition, NodeId, SignedGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("pattern is empty")]
    EmptyPattern,
    #[error("invalid pattern symbol `{0}` (expected 0, 1 or ?)")]
    BadSymbol(char),
    #[error("pattern of length {len} is longer than the history length {t}")]
    PatternTooLong { len: usize, t: usize },
    #[error("paired patterns differ in length ({0} and {1})")]
    UnequalLengths(usize, usize),
    #[error("pattern analysis requires an undirected unsigned graph")]
    NotUndirectedUnsigned,
    #[error("trajectory has {got} nodes, graph has {expected}")]
    NodeCountMismatch { expected: usize, got: usize },
}

/// Per-node opinion strings `w_1(v) w_2(v) ... w_T(v)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySet {
    len: usize,
    histories: Vec<Vec<bool>>,
}

/// Transposes a trajectory into one history per node.
pub fn histories(traj: &Trajectory) -> HistorySet {
    let n = traj.node_count();
    let histories = (0..n)
        .map(|v| traj.configs().iter().map(|c| c.bit(v)).collect())
        .collect();
    HistorySet {
        len: traj.len(),
        histories,
    }
}

impl HistorySet {
    /// Builds a history set from explicit 0/1 strings (all the same length).
    pub fn from_strings<S: AsRef<str>>(rows: &[S]) -> Result<Self, AnalysisError> {
        let histories: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| {
                r.as_ref()
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(AnalysisError::BadSymbol(other)),
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let len = histories.first().map_or(0, Vec::len);
        assert!(
            histories.iter().all(|h| h.len() == len),
            "histories must share one length"
        );
        Ok(HistorySet { len, histories })
    }

    /// History length `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn node_count(&self) -> usize {
        self.histories.len()
    }

    pub fn history(&self, v: NodeId) -> &[bool] {
        &self.histories[v]
    }

    /// The period `w_[i,j](v)` for `1 <= i <= j <= T`.
    pub fn period(&self, v: NodeId, i: usize, j: usize) -> &[bool] {
        assert!(
            1 <= i && i <= j && j <= self.len,
            "period [{i},{j}] outside 1..={}",
            self.len
        );
        &self.histories[v][i - 1..j]
    }

    pub fn history_string(&self, v: NodeId) -> String {
        self.histories[v]
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

/// A fixed-length pattern over `{0, 1, ?}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    symbols: Vec<Option<bool>>,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The `≈` relation: every fixed symbol agrees with the window.
    pub fn matches(&self, window: &[bool]) -> bool {
        window.len() == self.symbols.len()
            && self
                .symbols
                .iter()
                .zip(window)
                .all(|(s, &b)| s.is_none_or(|s| s == b))
    }
}

impl FromStr for Pattern {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(Some(false)),
                '1' => Ok(Some(true)),
                '?' => Ok(None),
                other => Err(AnalysisError::BadSymbol(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if symbols.is_empty() {
            return Err(AnalysisError::EmptyPattern);
        }
        Ok(Pattern { symbols })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            let c = match s {
                Some(true) => '1',
                Some(false) => '0',
                None => '?',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn pat(s: &str) -> Pattern {
    s.parse().expect("built-in pattern")
}

/// Offsets (0-based) at which `y` matches each node's history. Empty rows
/// when `y` is longer than the history.
fn match_rows(h: &HistorySet, y: &Pattern) -> Vec<Vec<bool>> {
    h.histories
        .iter()
        .map(|hist| {
            if y.len() > hist.len() {
                Vec::new()
            } else {
                hist.windows(y.len()).map(|w| y.matches(w)).collect()
            }
        })
        .collect()
}

fn check_len(h: &HistorySet, y: &Pattern) -> Result<(), AnalysisError> {
    if y.len() > h.len() {
        return Err(AnalysisError::PatternTooLong {
            len: y.len(),
            t: h.len(),
        });
    }
    Ok(())
}

/// Single-pattern counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchReport {
    pub pattern: String,
    /// `[y]`
    pub total: u64,
    /// `[y,v]` indexed by node.
    pub per_node: Vec<u64>,
    /// `[y]^1`
    pub starts: u64,
    /// `[y]^T`
    pub ends: u64,
}

impl MatchReport {
    /// `[y,k]` for every degree class in `partition`.
    pub fn per_degree(&self, partition: &DegreePartition) -> BTreeMap<usize, u64> {
        partition
            .classes()
            .iter()
            .map(|(&k, nodes)| (k, nodes.iter().map(|&v| self.per_node[v]).sum()))
            .collect()
    }

    /// `[y,k]` for a single degree.
    pub fn degree_total(&self, partition: &DegreePartition, k: usize) -> u64 {
        partition.class(k).iter().map(|&v| self.per_node[v]).sum()
    }
}

// Counting without the length precondition: a pattern longer than T simply
// has no windows.
fn count(h: &HistorySet, y: &Pattern) -> MatchReport {
    let per_node: Vec<u64> = match_rows(h, y)
        .iter()
        .map(|row| row.iter().filter(|&&m| m).count() as u64)
        .collect();
    let (starts, ends) = boundaries(h, y);
    MatchReport {
        pattern: y.to_string(),
        total: per_node.iter().sum(),
        per_node,
        starts,
        ends,
    }
}

fn boundaries(h: &HistorySet, y: &Pattern) -> (u64, u64) {
    let k = y.len();
    let mut starts = 0;
    let mut ends = 0;
    for hist in &h.histories {
        if hist.len() >= k {
            starts += y.matches(&hist[..k]) as u64;
            ends += y.matches(&hist[hist.len() - k..]) as u64;
        }
    }
    (starts, ends)
}

/// `[y,v]` for every node plus `[y]`, `[y]^1` and `[y]^T`.
pub fn match_count(h: &HistorySet, y: &Pattern) -> Result<MatchReport, AnalysisError> {
    check_len(h, y)?;
    Ok(count(h, y))
}

/// `([y]^1, [y]^T)`.
pub fn boundary_counts(h: &HistorySet, y: &Pattern) -> Result<(u64, u64), AnalysisError> {
    check_len(h, y)?;
    Ok(boundaries(h, y))
}

/// Paired counters over ordered edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairMatchReport {
    pub left: String,
    pub right: String,
    /// `[y,z]`
    pub total: u64,
    /// `[y,z,k]`, keyed by the degree of the left endpoint.
    pub per_degree: BTreeMap<usize, u64>,
    /// `[y,z]^0` (alias `[y,z]^1`): first window offset only.
    pub boundary_start: u64,
    /// `[y,z]^T`: last window offset only.
    pub boundary_end: u64,
}

fn require_undirected_unsigned(g: &SignedGraph) -> Result<(), AnalysisError> {
    if g.is_directed() || !g.is_unsigned() {
        return Err(AnalysisError::NotUndirectedUnsigned);
    }
    Ok(())
}

fn require_same_nodes(g: &SignedGraph, n: usize) -> Result<(), AnalysisError> {
    if g.node_count() != n {
        return Err(AnalysisError::NodeCountMismatch {
            expected: g.node_count(),
            got: n,
        });
    }
    Ok(())
}

fn pair_count(g: &SignedGraph, h: &HistorySet, y: &Pattern, z: &Pattern) -> PairMatchReport {
    let left = match_rows(h, y);
    let right = match_rows(h, z);
    let offsets = (h.len() + 1).saturating_sub(y.len());
    let mut per_degree: BTreeMap<usize, u64> = BTreeMap::new();
    let (mut total, mut boundary_start, mut boundary_end) = (0, 0, 0);
    for (u, left_u) in left.iter().enumerate() {
        let mut here = 0;
        for a in g.in_neighbors(u) {
            let v = a.source as usize;
            let both = |i: usize| left_u[i] && right[v][i];
            here += (0..offsets).filter(|&i| both(i)).count() as u64;
            if offsets > 0 {
                boundary_start += both(0) as u64;
                boundary_end += both(offsets - 1) as u64;
            }
        }
        *per_degree.entry(g.in_degree(u)).or_default() += here;
        total += here;
    }
    PairMatchReport {
        left: y.to_string(),
        right: z.to_string(),
        total,
        per_degree,
        boundary_start,
        boundary_end,
    }
}

/// `[y,z]`, `[y,z,k]` and the boundary forms. Requires `|y| = |z| <= T`.
pub fn pair_match_count(
    g: &SignedGraph,
    h: &HistorySet,
    y: &Pattern,
    z: &Pattern,
) -> Result<PairMatchReport, AnalysisError> {
    require_undirected_unsigned(g)?;
    require_same_nodes(g, h.node_count())?;
    if y.len() != z.len() {
        return Err(AnalysisError::UnequalLengths(y.len(), z.len()));
    }
    check_len(h, y)?;
    Ok(pair_count(g, h, y, z))
}

/// The four patterns whose occurrences bound the trajectory length.
pub const SWITCH_PATTERNS: [&str; 4] = ["110", "100", "011", "001"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SwitchBoundReport {
    #[serde(rename = "T")]
    pub t: usize,
    /// `[110] + [100] + [011] + [001]`
    pub lhs: u64,
    /// `4|E| + 2|V| + 4|V|Δ(Δ+1)`
    pub rhs: u64,
    pub holds: bool,
}

/// Counts the length-3 switch patterns and compares them with
/// `4|E| + 2|V| + 4|V|Δ(Δ+1)`. Trajectories with `T < 3` have no windows,
/// so their left side is 0.
pub fn switch_bound_check(
    g: &SignedGraph,
    traj: &Trajectory,
) -> Result<SwitchBoundReport, AnalysisError> {
    require_undirected_unsigned(g)?;
    require_same_nodes(g, traj.node_count())?;
    let h = histories(traj);
    let lhs = SWITCH_PATTERNS
        .iter()
        .map(|y| count(&h, &pat(y)).total)
        .sum();
    let rhs = trajectory_bound(g) - 2;
    Ok(SwitchBoundReport {
        t: traj.len(),
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LengthBoundReport {
    #[serde(rename = "T")]
    pub t: usize,
    pub bound: u64,
    pub holds: bool,
    /// Every `t <= T-2` has a node whose window `w_t w_(t+1) w_(t+2)` is a
    /// switch pattern.
    pub witness_holds: bool,
}

pub fn length_bound_check(
    g: &SignedGraph,
    traj: &Trajectory,
) -> Result<LengthBoundReport, AnalysisError> {
    require_undirected_unsigned(g)?;
    require_same_nodes(g, traj.node_count())?;
    let h = histories(traj);
    let switch: Vec<Pattern> = SWITCH_PATTERNS.iter().map(|y| pat(y)).collect();
    let witness_holds = (0..traj.len().saturating_sub(2)).all(|t| {
        h.histories
            .iter()
            .any(|hist| switch.iter().any(|y| y.matches(&hist[t..t + 3])))
    });
    let bound = trajectory_bound(g);
    Ok(LengthBoundReport {
        t: traj.len(),
        bound,
        holds: traj.len() as u64 <= bound,
        witness_holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// One checked identity or inequality between two integer counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: i64,
    pub relation: Relation,
    pub rhs: i64,
    pub holds: bool,
}

impl IdentityCheck {
    fn new(name: impl Into<String>, lhs: i64, relation: Relation, rhs: i64) -> Self {
        let holds = match relation {
            Relation::Eq => lhs == rhs,
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
        };
        IdentityCheck {
            name: name.into(),
            lhs,
            relation,
            rhs,
            holds,
        }
    }
}

impl fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::Eq => "=",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        };
        let verdict = if self.holds { "ok" } else { "VIOLATED" };
        write!(
            f,
            "{}: {} {} {} [{}]",
            self.name, self.lhs, rel, self.rhs, verdict
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

/// Every counting identity and inequality used to bound the switch
/// patterns, evaluated on one recorded trajectory of `dynamics`:
///
/// * boundary decompositions of `[00]` and `[11]`
/// * `|[100] - [001]| <= |V|`, `|[011] - [110]| <= |V|`, also per degree class
/// * edge symmetry `[y,z] = [z,y]` for all pattern pairs of length 1 and 2
/// * the decompositions of `[?1,1?]` and `[1?,?1]` through length-3 windows
/// * `0 <= [?1,1?]^1, [1?,?1]^T <= 2|E|` and the resulting `±2|E|` window
/// * partition sums over degree classes
/// * the four per-degree threshold counting inequalities
pub fn counting_identities(
    g: &SignedGraph,
    dynamics: &(impl Dynamics + ?Sized),
    traj: &Trajectory,
) -> Result<IdentityReport, AnalysisError> {
    require_undirected_unsigned(g)?;
    require_same_nodes(g, traj.node_count())?;
    let h = histories(traj);
    let partition = g.degree_partition();
    let thresholds = dynamics.thresholds(g.max_in_degree());
    let v = g.node_count() as i64;
    let e = g.edge_count() as i64;
    let c = |y: &str| count(&h, &pat(y));
    let p = |y: &str, z: &str| pair_count(g, &h, &pat(y), &pat(z));
    let mut checks = Vec::new();
    let mut push = |name: String, lhs: u64, rel, rhs: u64| {
        checks.push(IdentityCheck::new(name, lhs as i64, rel, rhs as i64))
    };

    let [c00, c11, c000, c111, c100, c001, c011, c110] =
        ["00", "11", "000", "111", "100", "001", "011", "110"].map(c);
    push(
        "[00] = [00]^1 + [000] + [100]".into(),
        c00.total,
        Relation::Eq,
        c00.starts + c000.total + c100.total,
    );
    push(
        "[00] = [00]^T + [000] + [001]".into(),
        c00.total,
        Relation::Eq,
        c00.ends + c000.total + c001.total,
    );
    push(
        "[11] = [11]^1 + [011] + [111]".into(),
        c11.total,
        Relation::Eq,
        c11.starts + c011.total + c111.total,
    );
    push(
        "[11] = [11]^T + [110] + [111]".into(),
        c11.total,
        Relation::Eq,
        c11.ends + c110.total + c111.total,
    );
    push(
        "|[100] - [001]| <= |V|".into(),
        c100.total.abs_diff(c001.total),
        Relation::Le,
        v as u64,
    );
    push(
        "|[011] - [110]| <= |V|".into(),
        c011.total.abs_diff(c110.total),
        Relation::Le,
        v as u64,
    );
    for k in partition.degrees() {
        let d = |r: &MatchReport| r.degree_total(&partition, k);
        push(
            format!("|[100,{k}] - [001,{k}]| <= |V|"),
            d(&c100).abs_diff(d(&c001)),
            Relation::Le,
            v as u64,
        );
        push(
            format!("|[110,{k}] - [011,{k}]| <= |V|"),
            d(&c110).abs_diff(d(&c011)),
            Relation::Le,
            v as u64,
        );
    }

    for len in 1..=2usize {
        let all = wildcard_patterns(len);
        for y in &all {
            for z in &all {
                if y < z {
                    let yz = p(y, z).total;
                    let zy = p(z, y).total;
                    push(format!("[{y},{z}] = [{z},{y}]"), yz, Relation::Eq, zy);
                }
            }
        }
    }

    let a = p("?1", "1?");
    let b = p("1?", "?1");
    let [p0x1, p1x1, p1x0, p001, p011, p100, p110] = [
        ("0?1", "?1?"),
        ("1?1", "?1?"),
        ("1?0", "?1?"),
        ("001", "?1?"),
        ("011", "?1?"),
        ("100", "?1?"),
        ("110", "?1?"),
    ]
    .map(|(y, z)| p(y, z));
    push("[?1,1?] = [1?,?1]".into(), a.total, Relation::Eq, b.total);
    push(
        "[?1,1?] = [?1,1?]^1 + [0?1,?1?] + [1?1,?1?]".into(),
        a.total,
        Relation::Eq,
        a.boundary_start + p0x1.total + p1x1.total,
    );
    push(
        "[1?,?1] = [1?,?1]^T + [1?0,?1?] + [1?1,?1?]".into(),
        b.total,
        Relation::Eq,
        b.boundary_end + p1x0.total + p1x1.total,
    );
    push(
        "[0?1,?1?] = [001,?1?] + [011,?1?]".into(),
        p0x1.total,
        Relation::Eq,
        p001.total + p011.total,
    );
    push(
        "[1?0,?1?] = [100,?1?] + [110,?1?]".into(),
        p1x0.total,
        Relation::Eq,
        p100.total + p110.total,
    );
    push(
        "[?1,1?]^1 <= 2|E|".into(),
        a.boundary_start,
        Relation::Le,
        2 * e as u64,
    );
    push(
        "[1?,?1]^T <= 2|E|".into(),
        b.boundary_end,
        Relation::Le,
        2 * e as u64,
    );
    let swing = (p001.total + p011.total) as i64 - (p100.total + p110.total) as i64;
    checks.push(IdentityCheck::new(
        "[001,?1?] + [011,?1?] - [100,?1?] - [110,?1?] <= 2|E|",
        swing,
        Relation::Le,
        2 * e,
    ));
    checks.push(IdentityCheck::new(
        "[001,?1?] + [011,?1?] - [100,?1?] - [110,?1?] >= -2|E|",
        swing,
        Relation::Ge,
        -2 * e,
    ));

    let mut push = |name: String, lhs: u64, rel, rhs: u64| {
        checks.push(IdentityCheck::new(name, lhs as i64, rel, rhs as i64))
    };
    for r in [&c00, &c11, &c000, &c111, &c100, &c001, &c011, &c110] {
        let sum: u64 = r.per_degree(&partition).values().sum();
        push(
            format!("sum_k [{},k] = [{}]", r.pattern, r.pattern),
            sum,
            Relation::Eq,
            r.total,
        );
    }
    for r in [&a, &b, &p001, &p011, &p100, &p110] {
        let sum: u64 = r.per_degree.values().sum();
        push(
            format!(
                "sum_k [{},{},k] = [{},{}]",
                r.left, r.right, r.left, r.right
            ),
            sum,
            Relation::Eq,
            r.total,
        );
    }

    for k in partition.degrees() {
        let d = |r: &MatchReport| r.degree_total(&partition, k);
        let pk = |r: &PairMatchReport| r.per_degree.get(&k).copied().unwrap_or(0);
        let minus = thresholds.theta_minus()[k] as u64;
        let plus = thresholds.theta_plus()[k] as u64;
        // a node switches up iff at least theta pushers; stays down iff fewer
        push(
            format!("[001,?1?,{k}] >= theta-({k}) [001,{k}]"),
            pk(&p001),
            Relation::Ge,
            minus * d(&c001),
        );
        push(
            format!("[100,?1?,{k}] <= (theta-({k}) - 1) [100,{k}]"),
            pk(&p100),
            Relation::Le,
            minus.saturating_sub(1) * d(&c100),
        );
        push(
            format!("[011,?1?,{k}] >= theta+({k}) [011,{k}]"),
            pk(&p011),
            Relation::Ge,
            plus * d(&c011),
        );
        push(
            format!("[110,?1?,{k}] <= (theta+({k}) - 1) [110,{k}]"),
            pk(&p110),
            Relation::Le,
            plus.saturating_sub(1) * d(&c110),
        );
    }

    Ok(IdentityReport { checks })
}

/// All patterns of length `len` over `{0, 1, ?}`, in lexicographic order.
fn wildcard_patterns(len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| ['0', '1', '?'].map(|c| format!("{p}{c}")))
            .collect();
    }
    out.sort();
    out
}
