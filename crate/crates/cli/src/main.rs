//! `mineral-pomdp`: run benchmark comparisons, validate configs, replay
//! open-loop plans and dump single episodes.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid config, 3 runtime failure.

mod output;
mod table;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mineral_pomdp::baselines::{
    plan_open_loop_deterministic, plan_open_loop_stochastic, OpenLoopPlan, OpenLoopPolicy,
    PolicyKind, PolicySettings,
};
use mineral_pomdp::harness::{
    compare_policies, policy_rng, run_episode, run_seeds, seed_range, summary_table,
    write_beliefs_csv, write_summary_csv, write_trace_csv, write_trace_jsonl, Comparison,
    EpisodeTrace, Scenario, ScenarioLabel,
};
use mineral_pomdp::planners::{DespotPlanner, PomcpowPlanner, RolloutKind, SearchReport};
use mineral_pomdp::{Error, ProblemConfig};

use output::OutputDir;

/// Env var naming the default output directory.
const OUT_ENV: &str = "MINERAL_POMDP_OUT";

#[derive(Parser)]
#[command(name = "mineral-pomdp", version, about = "Mineral sourcing POMDP benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare policies over paired seeds and write summary and trace files.
    Run(RunArgs),
    /// Check a config and print the resolved parameter table.
    Validate(ValidateArgs),
    /// Re-simulate a serialized open-loop plan.
    Replay(ReplayArgs),
    /// Run one episode and print every step.
    Trace(TraceArgs),
    /// Compute an open-loop plan from the prior and write it as JSON.
    Plan(PlanArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Config file; `table1.default` falls back to the bundled defaults.
    #[arg(long, short, default_value = "table1.default")]
    config: PathBuf,
}

#[derive(Args)]
struct OutArg {
    #[arg(long, short, env = OUT_ENV, default_value = "results")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct PlannerArgs {
    /// Simulations or trials per decision.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    ucb: Option<f64>,
    #[arg(long)]
    k_obs: Option<f64>,
    #[arg(long)]
    alpha_obs: Option<f64>,
    /// Determinized scenarios of the DESPOT-style search.
    #[arg(long)]
    scenarios: Option<usize>,
    /// Rollout policy: greedy or random.
    #[arg(long)]
    rollout: Option<String>,
    /// Fixed per-decision search seed.
    #[arg(long)]
    planner_seed: Option<u64>,
    /// Reserve scenarios of the stochastic open-loop plan.
    #[arg(long)]
    saa_scenarios: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
    Text,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "inaccurate")]
    scenario: String,
    /// Comma-separated policy names.
    #[arg(long, alias = "policy", value_delimiter = ',', default_value = "greedy")]
    policies: Vec<String>,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[command(flatten)]
    out: OutArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,jsonl,text")]
    format: Vec<Format>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Config file to check.
    #[arg(default_value = "table1.default")]
    path: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Plan JSON as written by `plan`.
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value = "inaccurate")]
    scenario: String,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[command(flatten)]
    out: OutArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,jsonl,text")]
    format: Vec<Format>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "inaccurate")]
    scenario: String,
    #[arg(long, default_value = "greedy")]
    policy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write trace, belief and search files here.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlanMethod {
    Deterministic,
    Stochastic,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_enum, default_value = "deterministic")]
    method: PlanMethod,
    #[arg(long, default_value_t = 1000)]
    saa_scenarios: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: `<out>/plan.json`).
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } | Error::InvalidConfig(_) => 2,
            Error::UnknownPolicy { .. } => 1,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_config(path: &Path) -> CliResult<ProblemConfig> {
    ProblemConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure {
            code: 2,
            message: e.to_string(),
        },
        other => other.into(),
    })
}

fn scenario(label: &str, config: ProblemConfig) -> CliResult<Scenario> {
    let label: ScenarioLabel = label.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    if label == ScenarioLabel::Custom {
        return Err(Failure::usage("custom scenarios are only available through the library"));
    }
    Scenario::from_label(label, config).map_err(|e| Failure {
        code: 2,
        message: format!("scenario: {e}"),
    })
}

fn parse_policies(names: &[String]) -> CliResult<Vec<PolicyKind>> {
    if names.is_empty() {
        return Err(Failure::usage(format!(
            "no policy given (valid: {})",
            PolicyKind::valid_names()
        )));
    }
    names
        .iter()
        .map(|n| n.parse::<PolicyKind>().map_err(Failure::from))
        .collect()
}

fn settings(args: &PlannerArgs) -> CliResult<PolicySettings> {
    let mut s = PolicySettings::default();
    let p = &mut s.planner;
    if let Some(v) = args.iterations {
        p.iterations = v;
    }
    if let Some(v) = args.depth {
        p.max_depth = v;
    }
    if let Some(v) = args.ucb {
        p.ucb = v;
    }
    if let Some(v) = args.k_obs {
        p.k_obs = v;
    }
    if let Some(v) = args.alpha_obs {
        p.alpha_obs = v;
    }
    if let Some(v) = args.scenarios {
        p.scenarios = v;
    }
    if let Some(v) = &args.rollout {
        p.rollout = v
            .parse::<RolloutKind>()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    p.seed = args.planner_seed;
    if let Some(v) = args.saa_scenarios {
        if v == 0 {
            return Err(Failure::usage("--saa-scenarios must be >= 1"));
        }
        s.saa_scenarios = v;
    }
    s.planner.check().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(s)
}

fn seeds(n: usize, base: u64) -> CliResult<Vec<u64>> {
    if n == 0 {
        return Err(Failure::usage("--seeds must be >= 1"));
    }
    Ok(seed_range(base, n))
}

fn write_outputs(
    dir: &Path,
    formats: &[Format],
    comparison: &Comparison,
    config: &ProblemConfig,
) -> CliResult<OutputDir> {
    let mut out = OutputDir::create(dir)?;
    let traces: Vec<EpisodeTrace> = comparison.traces.iter().flatten().cloned().collect();
    if formats.contains(&Format::Csv) {
        out.write("summary.csv", |w| write_summary_csv(w, &comparison.rows))?;
        out.write("traces.csv", |w| write_trace_csv(w, &traces, config))?;
        out.write("beliefs.csv", |w| write_beliefs_csv(w, &traces))?;
    }
    if formats.contains(&Format::Jsonl) {
        out.write("traces.jsonl", |w| write_trace_jsonl(w, &traces, config))?;
    }
    if formats.contains(&Format::Text) {
        let text = summary_table(&comparison.rows);
        out.write("summary.txt", |w| {
            w.write_all(text.as_bytes())
                .map_err(|e| Error::Output(e.to_string()))
        })?;
    }
    Ok(out)
}

fn report_written(out: &OutputDir) {
    for p in out.written() {
        eprintln!("wrote {}", p.display());
    }
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let policies = parse_policies(&args.policies)?;
    let settings = settings(&args.planner)?;
    let seeds = seeds(args.seeds, args.seed_base)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::usage(format!("--threads: {e}")))?;
    }
    let config = load_config(&args.config.config)?;
    let scenario = scenario(&args.scenario, config)?;
    let comparison = compare_policies(&scenario, &policies, &settings, &seeds)?;
    print!("{}", summary_table(&comparison.rows));
    let out = write_outputs(&args.out.out, &args.format, &comparison, &scenario.config)?;
    report_written(&out);
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> CliResult<()> {
    let config = load_config(&args.path)?;
    println!("{}: ok ({} sites)", args.path.display(), config.n_sites());
    print!("{}", table::render(&table::parameter_rows(&config)));
    Ok(())
}

fn read_plan(path: &Path) -> CliResult<OpenLoopPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })?;
    OpenLoopPlan::from_json(&text).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })
}

fn cmd_replay(args: ReplayArgs) -> CliResult<()> {
    let config = load_config(&args.config.config)?;
    let plan = read_plan(&args.plan)?;
    if plan.horizon != config.horizon {
        return Err(Failure {
            code: 3,
            message: format!(
                "plan horizon {} does not match config horizon {}",
                plan.horizon, config.horizon
            ),
        });
    }
    let scenario = scenario(&args.scenario, config)?;
    let seeds = seeds(args.seeds, args.seed_base)?;
    let traces = run_seeds(
        &scenario,
        || Box::new(OpenLoopPolicy::fixed(plan.clone())),
        &seeds,
    )?;
    let comparison = Comparison::from_traces(&scenario, &seeds, vec![traces]);
    if let Some(v) = plan.objective {
        println!("planned objective: {v:.3}");
    }
    print!("{}", summary_table(&comparison.rows));
    let out = write_outputs(&args.out.out, &args.format, &comparison, &scenario.config)?;
    report_written(&out);
    Ok(())
}

fn print_trace(trace: &EpisodeTrace) {
    println!(
        "{:>3}  {:<12}  {:>7}  {:>8}  {:>9}  {:>9}  {:>9}  {:>9}  {:>10}  belief mean / std",
        "t", "action", "demand", "feed", "r1", "r2", "r3", "r4", "reward"
    );
    for (s, b) in trace.steps.iter().zip(trace.beliefs.iter().skip(1)) {
        let r = &s.reward_parts;
        let belief: Vec<String> = b
            .mean
            .iter()
            .zip(&b.std)
            .map(|(m, d)| format!("{m:.0}/{d:.0}"))
            .collect();
        println!(
            "{:>3}  {:<12}  {:>7.0}  {:>8.0}  {:>9.3}  {:>9.3}  {:>9.1}  {:>9.3}  {:>10.3}  {}",
            s.state.t,
            s.action.to_string(),
            s.demand,
            s.feed,
            r.r1_domestic_penalty,
            r.r2_emissions,
            r.r3_unfulfilled,
            r.r4_profit,
            s.reward_total,
            belief.join(" ")
        );
    }
    let m = &trace.metrics;
    println!(
        "first domestic build: {}; processed {:.0}; CO2 {:.3}; unfulfilled {:.2}%; profit {:.1}; discounted reward {:.3}",
        m.first_domestic_year.map_or("never".into(), |t| t.to_string()),
        m.processed,
        m.co2,
        m.unfulfilled_pct,
        m.profit,
        m.discounted_reward
    );
}

fn cmd_trace(args: TraceArgs) -> CliResult<()> {
    let kind: PolicyKind = args.policy.parse()?;
    let mut settings = settings(&args.planner)?;
    let config = load_config(&args.config.config)?;
    let scenario = scenario(&args.scenario, config)?;
    settings.planner.record = true;
    let (trace, reports): (EpisodeTrace, Vec<SearchReport>) = match kind {
        PolicyKind::Pomcpow => {
            let mut p = PomcpowPlanner::new(settings.planner.clone());
            let t = run_episode(&scenario, &mut p, args.seed)?;
            (t, p.reports().to_vec())
        }
        PolicyKind::Despot => {
            let mut p = DespotPlanner::new(settings.planner.clone());
            let t = run_episode(&scenario, &mut p, args.seed)?;
            (t, p.reports().to_vec())
        }
        other => (
            run_episode(&scenario, other.build(&settings).as_mut(), args.seed)?,
            Vec::new(),
        ),
    };
    println!(
        "policy {} on {} scenario, seed {}, true reserves {:?}",
        trace.policy, scenario.label, trace.seed, trace.true_reserves
    );
    print_trace(&trace);
    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        let one = std::slice::from_ref(&trace);
        out.write("trace.csv", |w| write_trace_csv(w, one, &scenario.config))?;
        out.write("trace.jsonl", |w| write_trace_jsonl(w, one, &scenario.config))?;
        out.write("beliefs.csv", |w| write_beliefs_csv(w, one))?;
        if !reports.is_empty() {
            out.write("search.json", |w| {
                serde_json::to_writer_pretty(&mut *w, &reports)?;
                Ok(())
            })?;
        }
        report_written(&out);
    }
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> CliResult<()> {
    let config = load_config(&args.config.config)?;
    let belief = mineral_pomdp::Belief::prior(&config);
    let plan = match args.method {
        PlanMethod::Deterministic => plan_open_loop_deterministic(&belief, &config)?,
        PlanMethod::Stochastic => {
            if args.saa_scenarios == 0 {
                return Err(Failure::usage("--saa-scenarios must be >= 1"));
            }
            let mut rng = policy_rng(args.seed);
            plan_open_loop_stochastic(&belief, &config, args.saa_scenarios, &mut rng)?
        }
    };
    for (t, a) in plan.actions.iter().enumerate() {
        if *a != mineral_pomdp::Action::DoNothing {
            println!("t={t:>2}  {a}");
        }
    }
    if let Some(v) = plan.objective {
        println!("objective: {v:.3}");
    }
    let json = plan.to_json()?;
    let (dir, name) = match &args.output {
        Some(p) => (
            p.parent().filter(|d| !d.as_os_str().is_empty()).map_or(PathBuf::from("."), Path::to_path_buf),
            p.file_name()
                .ok_or_else(|| Failure::usage("--output needs a file name"))?
                .to_string_lossy()
                .into_owned(),
        ),
        None => (args.out.out.clone(), "plan.json".to_string()),
    };
    let mut out = OutputDir::create(&dir)?;
    out.write(&name, |w| {
        w.write_all(json.as_bytes())
            .map_err(|e| Error::Output(e.to_string()))
    })?;
    report_written(&out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Plan(a) => cmd_plan(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
