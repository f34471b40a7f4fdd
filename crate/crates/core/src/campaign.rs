//! Randomized verification campaigns.
//!
//! Each trial draws a graph, an update rule and an initial configuration from
//! its own seed (derived from the campaign seed and the trial id), evolves to
//! the first repetition, and runs the requested checks. Trials run in
//! parallel; the report is ordered by trial id and independent of scheduling.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::Configuration;
use crate::dynamics::{random_thresholds, Dynamics, Majority, Rule};
use crate::evolution::{default_budget, evolve_recorded, trajectory_bound, EvolutionError};
use crate::generate::{generate, Family, GeneratorSpec};
use crate::pattern::{counting_identities, length_bound_check, switch_bound_check};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error("trial_count must be at least 1")]
    NoTrials,
    #[error("node-count range {0}..={1} is empty or starts below 1")]
    EmptyRange(usize, usize),
    #[error("no graph families selected")]
    NoFamilies,
    #[error("no dynamics samplers selected")]
    NoSamplers,
    #[error("bound and identity checks need undirected unsigned graphs")]
    RequiresUndirectedUnsigned,
    #[error("invalid {what} `{value}`")]
    Parse { what: &'static str, value: String },
}

/// A graph family, with the edge probability for `gnp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyChoice {
    pub family: Family,
    pub edge_probability: f64,
}

impl fmt::Display for FamilyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Gnp => write!(f, "gnp:{}", self.edge_probability),
            other => write!(f, "{other}"),
        }
    }
}

/// `path`, `grid`, ... or `gnp:P`.
impl FromStr for FamilyChoice {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CampaignError::Parse {
            what: "family",
            value: s.to_string(),
        };
        let (name, p) = match s.split_once(':') {
            Some((name, p)) => (name, Some(p.parse::<f64>().map_err(|_| bad())?)),
            None => (s, None),
        };
        let family: Family = name.parse().map_err(|_| bad())?;
        let edge_probability = match (family, p) {
            (Family::Gnp, Some(p)) if (0.0..=1.0).contains(&p) => p,
            (Family::Gnp, None) => 0.3,
            (_, None) => 0.0,
            _ => return Err(bad()),
        };
        Ok(FamilyChoice {
            family,
            edge_probability,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsSampler {
    Majority,
    /// Constant thresholds `t1, t2` drawn uniformly from `0..=Δ+1`.
    Underpopulation,
    /// Each table entry at degree `k` drawn uniformly from `0..=k+1`.
    RandomTable,
}

impl FromStr for DynamicsSampler {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(DynamicsSampler::Majority),
            "underpopulation" => Ok(DynamicsSampler::Underpopulation),
            "random" | "random-table" | "random_table" => Ok(DynamicsSampler::RandomTable),
            _ => Err(CampaignError::Parse {
                what: "dynamics sampler",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Assertions {
    pub length_bound: bool,
    pub switch_bound: bool,
    pub identities: bool,
}

impl Assertions {
    pub const ALL: Assertions = Assertions {
        length_bound: true,
        switch_bound: true,
        identities: true,
    };
    pub const NONE: Assertions = Assertions {
        length_bound: false,
        switch_bound: false,
        identities: false,
    };

    pub fn any(&self) -> bool {
        self.length_bound || self.switch_bound || self.identities
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignConfig {
    pub trial_count: usize,
    pub families: Vec<FamilyChoice>,
    pub node_min: usize,
    pub node_max: usize,
    pub samplers: Vec<DynamicsSampler>,
    pub seed: u64,
    pub assertions: Assertions,
    pub directed: bool,
    pub negative_sign_probability: f64,
}

impl Default for CampaignConfig {
    /// 1000 trials over every family, `n` in `2..=32`, every sampler, every check.
    fn default() -> Self {
        let mut families: Vec<FamilyChoice> = [0.1, 0.3, 0.6]
            .map(|p| FamilyChoice {
                family: Family::Gnp,
                edge_probability: p,
            })
            .to_vec();
        families.extend(
            [
                Family::Path,
                Family::Cycle,
                Family::Complete,
                Family::Star,
                Family::Grid,
            ]
            .map(|family| FamilyChoice {
                family,
                edge_probability: 0.0,
            }),
        );
        CampaignConfig {
            trial_count: 1000,
            families,
            node_min: 2,
            node_max: 32,
            samplers: vec![
                DynamicsSampler::Majority,
                DynamicsSampler::Underpopulation,
                DynamicsSampler::RandomTable,
            ],
            seed: 0,
            assertions: Assertions::ALL,
            directed: false,
            negative_sign_probability: 0.0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.trial_count == 0 {
            return Err(CampaignError::NoTrials);
        }
        if self.node_min == 0 || self.node_min > self.node_max {
            return Err(CampaignError::EmptyRange(self.node_min, self.node_max));
        }
        if self.families.is_empty() {
            return Err(CampaignError::NoFamilies);
        }
        if self.samplers.is_empty() {
            return Err(CampaignError::NoSamplers);
        }
        if !(0.0..=1.0).contains(&self.negative_sign_probability) {
            return Err(CampaignError::Parse {
                what: "negative sign probability",
                value: self.negative_sign_probability.to_string(),
            });
        }
        if self.assertions.any() && (self.directed || self.negative_sign_probability > 0.0) {
            return Err(CampaignError::RequiresUndirectedUnsigned);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub family: String,
    pub nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub dynamics: String,
    /// `None` when the budget ran out.
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub bound: u64,
    pub equilibrium: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub trial: usize,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub trials: usize,
    pub seed: u64,
    pub assertions: Assertions,
    pub violations: Vec<Violation>,
    pub max_t: usize,
    /// Largest `T / bound` over completed trials.
    pub max_ratio: f64,
    pub trials_with_t_at_least_3: usize,
    pub equilibria: usize,
    pub budget_exceeded: usize,
    pub identity_checks: usize,
    pub records: Vec<TrialRecord>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-trial seed: SplitMix64 of the campaign seed offset by the trial id.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct TrialOutcome {
    record: TrialRecord,
    violations: Vec<Violation>,
    identity_checks: usize,
}

fn run_trial(config: &CampaignConfig, trial: usize) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, trial));
    let choice = *config
        .families
        .choose(&mut rng)
        .expect("validated non-empty");
    let n = rng.gen_range(config.node_min..=config.node_max);
    let spec = GeneratorSpec {
        family: choice.family,
        node_count: n,
        edge_probability: choice.edge_probability,
        negative_sign_probability: config.negative_sign_probability,
        directed: config.directed,
        seed: rng.gen(),
    };
    let g = generate(&spec).expect("campaign specs are validated");
    let delta = g.max_in_degree();
    let rule = match *config
        .samplers
        .choose(&mut rng)
        .expect("validated non-empty")
    {
        DynamicsSampler::Majority => Rule::Majority,
        DynamicsSampler::Underpopulation => Rule::Underpopulation {
            t1: rng.gen_range(0..=delta as u32 + 1),
            t2: rng.gen_range(0..=delta as u32 + 1),
        },
        DynamicsSampler::RandomTable => Rule::Table(random_thresholds(delta, &mut rng)),
    };
    let w0 = Configuration::from_bits((0..n).map(|_| rng.gen::<bool>()));

    let bound = trajectory_bound(&g);
    let budget = if config.assertions.any() {
        bound
    } else {
        default_budget(&g)
    };
    let mut violations = Vec::new();
    let mut violation = |check: &str, detail: String| {
        violations.push(Violation {
            trial,
            check: check.to_string(),
            detail,
        })
    };
    let mut record = TrialRecord {
        trial,
        family: choice.to_string(),
        nodes: n,
        edges: g.edge_count(),
        max_degree: delta,
        dynamics: rule.label(),
        t: None,
        bound,
        equilibrium: None,
    };
    let mut identity_checks = 0;

    let traj = match evolve_recorded(&g, &rule, &w0, budget) {
        Ok(t) => t,
        Err(EvolutionError::BudgetExceeded { steps_used, .. }) => {
            if config.assertions.length_bound {
                violation(
                    "length-bound",
                    format!("no repetition within {budget} configurations ({steps_used} steps) from {w0}"),
                );
            }
            return TrialOutcome {
                record,
                violations,
                identity_checks,
            };
        }
        Err(e) => {
            violation("evolution", e.to_string());
            return TrialOutcome {
                record,
                violations,
                identity_checks,
            };
        }
    };
    record.t = Some(traj.len());
    record.equilibrium = Some(traj.is_equilibrium());

    if let Err(e) = traj.verify(&g, &rule) {
        violation("trajectory", e);
    }
    if config.assertions.length_bound {
        match length_bound_check(&g, &traj) {
            Ok(r) if r.holds && r.witness_holds => {}
            Ok(r) => violation("length-bound", format!("{r:?} from {w0}")),
            Err(e) => violation("length-bound", e.to_string()),
        }
    }
    if config.assertions.switch_bound && traj.len() >= 3 {
        match switch_bound_check(&g, &traj) {
            Ok(r) if r.holds => {}
            Ok(r) => violation("switch-bound", format!("{r:?} from {w0}")),
            Err(e) => violation("switch-bound", e.to_string()),
        }
    }
    if config.assertions.identities {
        match counting_identities(&g, &rule, &traj) {
            Ok(r) => {
                identity_checks = r.checks.len();
                for c in r.violations() {
                    violation("identities", format!("{c} from {w0}"));
                }
            }
            Err(e) => violation("identities", e.to_string()),
        }
        // majority must agree with its own threshold tables along the way
        if rule == Rule::Majority {
            let tables = Majority.thresholds(delta);
            for w in traj.configs() {
                if tables.step_unchecked(&g, w) != Majority.step_unchecked(&g, w) {
                    violation("majority-tables", format!("tables disagree at {w}"));
                }
            }
        }
    }
    TrialOutcome {
        record,
        violations,
        identity_checks,
    }
}

pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    config.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..config.trial_count)
        .into_par_iter()
        .map(|trial| run_trial(config, trial))
        .collect();

    let mut report = CampaignReport {
        trials: config.trial_count,
        seed: config.seed,
        assertions: config.assertions,
        violations: Vec::new(),
        max_t: 0,
        max_ratio: 0.0,
        trials_with_t_at_least_3: 0,
        equilibria: 0,
        budget_exceeded: 0,
        identity_checks: 0,
        records: Vec::with_capacity(outcomes.len()),
    };
    for o in outcomes {
        match o.record.t {
            Some(t) => {
                report.max_t = report.max_t.max(t);
                report.max_ratio = report.max_ratio.max(t as f64 / o.record.bound as f64);
                report.trials_with_t_at_least_3 += (t >= 3) as usize;
                report.equilibria += (o.record.equilibrium == Some(true)) as usize;
            }
            None => report.budget_exceeded += 1,
        }
        report.identity_checks += o.identity_checks;
        report.violations.extend(o.violations);
        report.records.push(o.record);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_choices_parse() {
        let f: FamilyChoice = "gnp:0.6".parse().unwrap();
        assert_eq!((f.family, f.edge_probability), (Family::Gnp, 0.6));
        assert_eq!(f.to_string(), "gnp:0.6");
        assert_eq!("star".parse::<FamilyChoice>().unwrap().family, Family::Star);
        assert!("gnp:1.5".parse::<FamilyChoice>().is_err());
        assert!("path:0.3".parse::<FamilyChoice>().is_err());
        assert!("lattice".parse::<FamilyChoice>().is_err());
    }

    #[test]
    fn validation() {
        let mut c = CampaignConfig {
            trial_count: 0,
            ..Default::default()
        };
        assert_eq!(run_campaign(&c).unwrap_err(), CampaignError::NoTrials);
        c.trial_count = 5;
        c.directed = true;
        assert_eq!(
            run_campaign(&c).unwrap_err(),
            CampaignError::RequiresUndirectedUnsigned
        );
        c.assertions = Assertions::NONE;
        assert!(run_campaign(&c).is_ok());
        c.node_min = 10;
        c.node_max = 3;
        assert_eq!(
            run_campaign(&c).unwrap_err(),
            CampaignError::EmptyRange(10, 3)
        );
    }

    #[test]
    fn small_campaign_is_clean_and_reproducible() {
        let c = CampaignConfig {
            trial_count: 60,
            node_max: 12,
            seed: 11,
            ..Default::default()
        };
        let a = run_campaign(&c).unwrap();
        assert!(a.passed(), "{:?}", a.violations);
        assert_eq!(a.budget_exceeded, 0);
        assert!(a.identity_checks > 0);
        let b = run_campaign(&c).unwrap();
        assert_eq!(a, b);
        assert!(a.records.windows(2).all(|w| w[0].trial < w[1].trial));
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(0, 0), trial_seed(0, 1));
        assert_ne!(trial_seed(0, 0), trial_seed(1, 0));
    }
}
