//! `opdyn`: generate signed graphs, run opinion dynamics on them, decide
//! reachability questions and run verification campaigns.
//!
//! Exit codes: 0 success, 1 property violation or budget exceeded, 2 usage
//! error.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use opinion_core::campaign::{
    run_campaign, Assertions, CampaignConfig, DynamicsSampler, FamilyChoice,
};
use opinion_core::evolution::{evolve_recorded_capped, DEFAULT_MEMORY_CAP_BITS};
use opinion_core::pattern::{
    histories, length_bound_check, match_count, switch_bound_check, AnalysisError, MatchReport,
    Pattern,
};
use opinion_core::reachability::DEFAULT_ATLAS_MAX_NODES;
use opinion_core::{
    attractor_atlas, decide_reach_equilibrium, decide_reach_target, decide_reachability,
    default_budget, evolve_cycle_summary, generate, parse_graph, Answer, Configuration, Decision,
    EvolutionError, Family, GeneratorSpec, Limits, NodeId, Opinion, Rule, SignedGraph,
    ThresholdDynamics,
};

/// Default memory cap, in bits, for recorded trajectories.
const MEMORY_CAP_ENV: &str = "OPDYN_MEMORY_CAP_BITS";

#[derive(Parser)]
#[command(name = "opdyn", version, about = "Opinion dynamics on signed graphs")]
struct Cli {
    /// Output format (stats defaults to tsv, everything else to json).
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Print a random or structured graph in the edge-list format.
    Generate {
        #[arg(long, default_value = "gnp")]
        family: Family,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Edge probability (gnp only).
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        /// Probability that an edge is negative.
        #[arg(long, default_value_t = 0.0)]
        neg: f64,
        #[arg(long)]
        directed: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evolve an initial configuration until it repeats.
    Simulate {
        #[command(flatten)]
        input: Input,
        /// Maximum number of distinct configurations (default: from the graph).
        #[arg(long)]
        budget: Option<u64>,
        /// Store and print every configuration instead of only the lengths.
        #[arg(long)]
        record: bool,
        #[command(flatten)]
        memory: Memory,
    },
    /// Answer a reachability question about one evolution.
    Decide {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        problem: ProblemArg,
        /// Target configuration (reach).
        #[arg(long)]
        target: Option<String>,
        /// Comma-separated node ids that must agree (target).
        #[arg(long, value_delimiter = ',')]
        set: Vec<NodeId>,
        /// Required common opinion, `+`/`-` or `1`/`0` (target).
        #[arg(long)]
        opinion: Option<Opinion>,
        #[arg(long)]
        budget: Option<u64>,
        /// Include the configurations up to the witness.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        memory: Memory,
    },
    /// Enumerate every configuration and list the attractors with their basins.
    Atlas {
        #[arg(long)]
        graph: String,
        #[arg(long, default_value = "majority")]
        dynamics: String,
        #[arg(long, default_value_t = DEFAULT_ATLAS_MAX_NODES)]
        max_nodes: usize,
    },
    /// Run a randomized campaign checking the trajectory bound and the
    /// counting identities.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Comma-separated families; `gnp:P` sets the edge probability.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "gnp:0.1,gnp:0.3,gnp:0.6,path,cycle,complete,star,grid"
        )]
        families: Vec<FamilyChoice>,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 32)]
        n_max: usize,
        /// Comma-separated samplers: majority, underpopulation, random.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "majority,underpopulation,random"
        )]
        dynamics: Vec<DynamicsSampler>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated checks: length-bound, switch-bound, identities, all, none.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        assert: Vec<String>,
        #[arg(long)]
        directed: bool,
        #[arg(long, default_value_t = 0.0)]
        neg: f64,
        /// Leave per-trial records out of the report.
        #[arg(long)]
        summary_only: bool,
    },
    /// Count opinion-history patterns along one evolution.
    Stats {
        #[command(flatten)]
        input: Input,
        /// Comma-separated patterns over `0`, `1` and `?`.
        #[arg(long, value_delimiter = ',', default_value = "110,100,011,001")]
        patterns: Vec<String>,
        #[arg(long)]
        budget: Option<u64>,
        #[command(flatten)]
        memory: Memory,
    },
}

#[derive(clap::Args)]
struct Input {
    /// Graph file, or `-` for standard input.
    #[arg(long)]
    graph: String,
    /// Initial configuration as `+-+` or `101`.
    #[arg(long)]
    init: String,
    /// `majority`, `underpopulation:T1,T2` or `table:PATH`.
    #[arg(long, default_value = "majority")]
    dynamics: String,
}

#[derive(clap::Args)]
struct Memory {
    /// Cap on budget × nodes bits for recorded evolutions
    /// (default: $OPDYN_MEMORY_CAP_BITS or 2^33).
    #[arg(long)]
    memory_cap: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Reach,
    Target,
    Equilibrium,
}

/// Why a command did not succeed.
enum Failure {
    /// Bad flags or inputs: exit 2.
    Usage(anyhow::Error),
    /// The command ran, but found a violation or ran out of budget: exit 1.
    Property,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let format = cli.format;
    match cli.command {
        Command::Generate {
            family,
            n,
            p,
            neg,
            directed,
            seed,
        } => {
            let spec = GeneratorSpec {
                family,
                node_count: n,
                edge_probability: p,
                negative_sign_probability: neg,
                directed,
                seed,
            };
            let g = generate(&spec)?;
            emit(&g.to_graph_file())
        }
        Command::Simulate {
            input,
            budget,
            record,
            memory,
        } => simulate(
            &input,
            budget,
            record,
            &memory,
            format.unwrap_or(Format::Json),
        ),
        Command::Decide {
            input,
            problem,
            target,
            set,
            opinion,
            budget,
            trace,
            memory,
        } => {
            let (g, rule, w0) = load(&input)?;
            let limits = Limits {
                budget: budget.unwrap_or_else(|| default_budget(&g)),
                memory_cap_bits: memory.cap()?,
            };
            let mut d = match problem {
                ProblemArg::Reach => {
                    let target = target.ok_or_else(|| anyhow!("--problem reach needs --target"))?;
                    let target = parse_config(&target, g.node_count())?;
                    decide_reachability(&g, &rule, &w0, &target, limits)?
                }
                ProblemArg::Target => {
                    if set.is_empty() {
                        return Err(anyhow!("--problem target needs --set").into());
                    }
                    decide_reach_target(&g, &rule, &w0, &set, opinion, limits)?
                }
                ProblemArg::Equilibrium => decide_reach_equilibrium(&g, &rule, &w0, limits)?,
            };
            if !trace {
                d.trace = None;
            }
            match format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&d)?,
                Format::Tsv => emit(&decision_tsv(&d))?,
            }
            if d.answer == Answer::BudgetExceeded {
                return Err(Failure::Property);
            }
            Ok(())
        }
        Command::Atlas {
            graph,
            dynamics,
            max_nodes,
        } => {
            let g = load_graph(&graph)?;
            let rule = parse_rule(&dynamics)?;
            let atlas = attractor_atlas(&g, &rule, max_nodes)?;
            match format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&atlas),
                Format::Tsv => {
                    let mut out = String::from("kind\tlength\tbasin_size\tmembers\n");
                    for a in atlas.attractors() {
                        let members: Vec<String> = a
                            .members
                            .iter()
                            .map(|&m| {
                                Configuration::from_index(g.node_count(), m as u64).to_bit_string()
                            })
                            .collect();
                        let kind = if a.is_fixed_point() {
                            "fixed_point"
                        } else {
                            "cycle"
                        };
                        let _ = writeln!(
                            out,
                            "{kind}\t{}\t{}\t{}",
                            a.members.len(),
                            a.basin_size,
                            members.join(",")
                        );
                    }
                    emit(&out)
                }
            }
        }
        Command::Verify {
            trials,
            families,
            n_min,
            n_max,
            dynamics,
            seed,
            assert,
            directed,
            neg,
            summary_only,
        } => {
            let config = CampaignConfig {
                trial_count: trials,
                families,
                node_min: n_min,
                node_max: n_max,
                samplers: dynamics,
                seed,
                assertions: parse_assertions(&assert)?,
                directed,
                negative_sign_probability: neg,
            };
            let mut report = run_campaign(&config)?;
            for v in &report.violations {
                eprintln!("violation: trial {} [{}] {}", v.trial, v.check, v.detail);
            }
            if summary_only {
                report.records.clear();
            }
            match format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&report)?,
                Format::Tsv => {
                    let mut out =
                        String::from("trial\tfamily\tnodes\tedges\tmax_degree\tdynamics\tT\tbound\tequilibrium\n");
                    for r in &report.records {
                        let _ = writeln!(
                            out,
                            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                            r.trial,
                            r.family,
                            r.nodes,
                            r.edges,
                            r.max_degree,
                            r.dynamics,
                            r.t.map_or("-".into(), |t| t.to_string()),
                            r.bound,
                            r.equilibrium.map_or("-".into(), |e| e.to_string()),
                        );
                    }
                    emit(&out)?;
                }
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Property)
            }
        }
        Command::Stats {
            input,
            patterns,
            budget,
            memory,
        } => stats(
            &input,
            &patterns,
            budget,
            &memory,
            format.unwrap_or(Format::Tsv),
        ),
    }
}

fn simulate(
    input: &Input,
    budget: Option<u64>,
    record: bool,
    memory: &Memory,
    format: Format,
) -> CmdResult {
    let (g, rule, w0) = load(input)?;
    let budget = budget.unwrap_or_else(|| default_budget(&g));
    let result = if record {
        evolve_recorded_capped(&g, &rule, &w0, budget, memory.cap()?)
            .map(|t| (t.summary(), Some(t)))
    } else {
        evolve_cycle_summary(&g, &rule, &w0, budget).map(|s| (s, None))
    };
    match result {
        Ok((summary, traj)) => match format {
            Format::Json => match traj {
                Some(t) => emit_json(&t),
                None => emit_json(&summary),
            },
            Format::Tsv => {
                let mut out = String::from("T\th\ttransient\tcycle\tequilibrium\n");
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    summary.total,
                    summary.transient_length + 1,
                    summary.transient_length,
                    summary.cycle_length,
                    summary.is_equilibrium()
                );
                if let Some(t) = traj {
                    out.push_str("\nt\tconfiguration\n");
                    for (i, c) in t.configs().iter().enumerate() {
                        let _ = writeln!(out, "{}\t{}", i + 1, c.to_bit_string());
                    }
                }
                emit(&out)
            }
        },
        Err(EvolutionError::BudgetExceeded { budget, steps_used }) => {
            match format {
                Format::Json => emit_json(&BudgetExceeded {
                    budget_exceeded: true,
                    budget,
                    steps_used,
                })?,
                Format::Tsv => emit(&format!(
                    "budget_exceeded\tbudget\tsteps_used\ntrue\t{budget}\t{steps_used}\n"
                ))?,
            }
            Err(Failure::Property)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct BudgetExceeded {
    budget_exceeded: bool,
    budget: u64,
    steps_used: u64,
}

#[derive(Serialize)]
struct StatsReport<'a> {
    patterns: &'a [PatternRow],
    report: &'a BoundReport,
}

#[derive(Serialize)]
struct PatternRow {
    pattern: String,
    total: u64,
    starts: u64,
    ends: u64,
}

/// The combined switch-pattern and trajectory-length report.
#[derive(Serialize)]
struct BoundReport {
    #[serde(rename = "T")]
    t: usize,
    lhs: u64,
    rhs: u64,
    bound: u64,
    holds: bool,
}

fn stats(
    input: &Input,
    patterns: &[String],
    budget: Option<u64>,
    memory: &Memory,
    format: Format,
) -> CmdResult {
    let (g, rule, w0) = load(input)?;
    if g.is_directed() || !g.is_unsigned() {
        return Err(anyhow!("pattern statistics need an undirected unsigned graph").into());
    }
    let patterns: Vec<Pattern> = patterns
        .iter()
        .map(|p| p.parse().with_context(|| format!("pattern `{p}`")))
        .collect::<Result<_, _>>()?;
    let budget = budget.unwrap_or_else(|| default_budget(&g));
    let traj = match evolve_recorded_capped(&g, &rule, &w0, budget, memory.cap()?) {
        Err(EvolutionError::BudgetExceeded { budget, steps_used }) => {
            eprintln!("budget of {budget} configurations exceeded after {steps_used} steps");
            return Err(Failure::Property);
        }
        other => other?,
    };
    let h = histories(&traj);
    let rows: Vec<PatternRow> = patterns
        .iter()
        .map(|y| match match_count(&h, y) {
            Ok(MatchReport {
                pattern,
                total,
                starts,
                ends,
                ..
            }) => Ok(PatternRow {
                pattern,
                total,
                starts,
                ends,
            }),
            // a window longer than the trajectory never matches
            Err(AnalysisError::PatternTooLong { .. }) => Ok(PatternRow {
                pattern: y.to_string(),
                total: 0,
                starts: 0,
                ends: 0,
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let switch = switch_bound_check(&g, &traj)?;
    let length = length_bound_check(&g, &traj)?;
    let report = BoundReport {
        t: traj.len(),
        lhs: switch.lhs,
        rhs: switch.rhs,
        bound: length.bound,
        holds: switch.holds && length.holds && length.witness_holds,
    };
    match format {
        Format::Json => emit_json(&StatsReport {
            patterns: &rows,
            report: &report,
        })?,
        Format::Tsv => {
            let mut out = String::from("pattern\ttotal\tstarts\tends\n");
            for r in &rows {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", r.pattern, r.total, r.starts, r.ends);
            }
            out.push_str(&serde_json::to_string(&report)?);
            out.push('\n');
            emit(&out)?;
        }
    }
    if report.holds {
        Ok(())
    } else {
        Err(Failure::Property)
    }
}

fn decision_tsv(d: &Decision) -> String {
    let problem = serde_json::to_value(d.problem).unwrap_or_default();
    let answer = serde_json::to_value(d.answer).unwrap_or_default();
    format!(
        "problem\tanswer\twitness_step\tsteps_used\n{}\t{}\t{}\t{}\n",
        problem.as_str().unwrap_or(""),
        answer.as_str().unwrap_or(""),
        d.witness_step.map_or("-".into(), |s| s.to_string()),
        d.steps_used
    )
}

impl Memory {
    fn cap(&self) -> anyhow::Result<u64> {
        if let Some(cap) = self.memory_cap {
            return Ok(cap);
        }
        match std::env::var(MEMORY_CAP_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("{MEMORY_CAP_ENV}=`{v}` is not a bit count")),
            Err(_) => Ok(DEFAULT_MEMORY_CAP_BITS),
        }
    }
}

fn parse_assertions(items: &[String]) -> anyhow::Result<Assertions> {
    let mut a = Assertions::NONE;
    for item in items {
        match item.trim() {
            "all" => a = Assertions::ALL,
            "none" => {}
            "length-bound" | "length_bound" => a.length_bound = true,
            "switch-bound" | "switch_bound" => a.switch_bound = true,
            "identities" => a.identities = true,
            other => bail!("unknown assertion `{other}`"),
        }
    }
    Ok(a)
}

fn read_source(path: &str) -> anyhow::Result<String> {
    if path == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("reading standard input")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

fn load_graph(path: &str) -> anyhow::Result<SignedGraph> {
    let text = read_source(path)?;
    parse_graph(&text).with_context(|| format!("parsing {path}"))
}

fn parse_rule(s: &str) -> anyhow::Result<Rule> {
    if let Some(path) = s.strip_prefix("table:") {
        let text = read_source(path)?;
        let table =
            ThresholdDynamics::parse_table(&text).with_context(|| format!("parsing {path}"))?;
        return Ok(Rule::Table(table));
    }
    s.parse().with_context(|| format!("dynamics `{s}`"))
}

fn parse_config(s: &str, n: usize) -> anyhow::Result<Configuration> {
    let w: Configuration = s.parse().with_context(|| format!("configuration `{s}`"))?;
    w.check_len(n)?;
    Ok(w)
}

fn load(input: &Input) -> anyhow::Result<(SignedGraph, Rule, Configuration)> {
    let g = load_graph(&input.graph)?;
    let rule = parse_rule(&input.dynamics)?;
    let w0 = parse_config(&input.init, g.node_count())?;
    Ok((g, rule, w0))
}

fn emit(text: &str) -> CmdResult {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn emit_json(value: &impl Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(&text)
}
