//! `rsreward` — score rollout groups, evaluate prediction files, serve the
//! scoring API, and run the template-policy simulator.
//!
//! Exit codes: 0 on success, 1 on internal errors, 2 on usage or input
//! errors (including malformed records in strict mode).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use rsreward::config::AppConfig;
use rsreward::eval::{evaluate, load_eval_file};
use rsreward::grpo::{KlEstimator, RewardWeights};
use rsreward::rewards::{MatchingPolicy, TaskType};
use rsreward::scoring::{ScoreRequest, ScoreResponse, ScoringEngine};
use rsreward::sim::{simulate, SimConfig, SimTrajectory, TemplateWorld};

#[derive(Parser)]
#[command(name = "rsreward", version, about = "Verifiable reward engine and evaluation toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Configuration file (TOML); defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Abort on malformed input records instead of skipping them.
    #[arg(long, global = true)]
    strict: bool,

    /// Simulation seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Reward weights as `srar,rpcr,evol`.
    #[arg(long, global = true, value_name = "A,B,C")]
    weights: Option<String>,

    /// OVD matching policy.
    #[arg(long, global = true, value_name = "one_to_one|literal")]
    matching: Option<String>,

    /// KL estimator for the objective terms.
    #[arg(long, global = true, value_name = "exact|k3")]
    kl: Option<String>,

    /// Output path (JSONL responses, JSON report, or CSV depending on the
    /// subcommand); stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Worker threads for record- or seed-parallel work.
    #[arg(long, global = true, value_name = "N")]
    parallel: Option<usize>,

    /// Print the fully resolved configuration to stderr before running.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Score line-delimited score requests into line-delimited responses.
    Score {
        /// Input file, one JSON score request per line.
        input: PathBuf,
    },
    /// Compute metrics over a line-delimited prediction/ground-truth file.
    Eval {
        /// Input file, one JSON evaluation record per line.
        input: PathBuf,
        /// Task the records must carry (REC, OVD, or VQA).
        #[arg(long)]
        task: TaskType,
        /// Metric thresholds, comma-separated (Acc@t cut-offs for REC, mAP
        /// IoU thresholds for OVD).
        #[arg(long, value_name = "T1,T2,...")]
        thresholds: Option<String>,
        /// Also print the JSON report to stdout after the table.
        #[arg(long)]
        json: bool,
    },
    /// Run the scoring service until interrupted.
    Serve,
    /// Run the template-policy simulator.
    Simulate {
        /// Number of consecutive seeds to sweep, starting at --seed.
        #[arg(long, value_name = "N")]
        seeds: Option<u64>,
        /// Steps per run.
        #[arg(long, value_name = "N")]
        steps: Option<usize>,
        /// Template count (2..=8 with the built-in bank).
        #[arg(long, value_name = "M")]
        m: Option<usize>,
        /// Rollouts sampled per step.
        #[arg(long, value_name = "G")]
        group_size: Option<usize>,
        /// Score-function learning rate.
        #[arg(long, value_name = "LR")]
        learning_rate: Option<f64>,
        /// Draw correctness as a coin flip at each template's rate.
        #[arg(long)]
        stochastic: bool,
        /// Run each seed with the configured weights and with the diversity
        /// weight zeroed, and report the entropy gap.
        #[arg(long)]
        compare_evol: bool,
    },
}

/// Failures mapped onto exit codes: usage/input errors exit 2, internal
/// errors exit 1.
enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Input(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            CliError::Internal(msg) => {
                eprintln!("internal error: {msg}");
                ExitCode::from(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => err.report(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.global)?;
    if cli.global.print_config {
        eprintln!("{}", cfg.to_toml_string());
    }
    if let Some(threads) = cli.global.parallel {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Score { input } => cmd_score(&cfg, &input, cli.global.output.as_deref()),
        Command::Eval {
            input,
            task,
            thresholds,
            json,
        } => cmd_eval(
            &cfg,
            &input,
            task,
            thresholds.as_deref(),
            json,
            cli.global.output.as_deref(),
        ),
        Command::Serve => {
            rsreward_service::run_blocking(&cfg).map_err(|e| CliError::Internal(e.to_string()))
        }
        Command::Simulate {
            seeds,
            steps,
            m,
            group_size,
            learning_rate,
            stochastic,
            compare_evol,
        } => {
            let mut sim = cfg.sim;
            sim.weights = cfg.weights;
            if let Some(steps) = steps {
                sim.steps = steps;
            }
            if let Some(m) = m {
                sim.m = m;
            }
            if let Some(g) = group_size {
                sim.group_size = g;
            }
            if let Some(lr) = learning_rate {
                sim.learning_rate = lr;
            }
            if stochastic {
                sim.stochastic_correctness = true;
            }
            cmd_simulate(sim, seeds, compare_evol, cli.global.output.as_deref())
        }
    }
}

/// Merge configuration sources: flags over environment over file over
/// defaults (environment overrides apply to the service address at serve
/// time).
fn resolve_config(global: &GlobalArgs) -> Result<AppConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => AppConfig::load(path).map_err(|e| CliError::Input(e.to_string()))?,
        None => AppConfig::default(),
    };
    if global.strict {
        cfg.strict = true;
    }
    if let Some(weights) = &global.weights {
        cfg.weights = parse_weights(weights)?;
    }
    if let Some(policy) = &global.matching {
        cfg.rewards.ovd.policy = policy.parse::<MatchingPolicy>().map_err(CliError::Input)?;
    }
    if let Some(kl) = &global.kl {
        cfg.grpo.kl_estimator = kl.parse::<KlEstimator>().map_err(CliError::Input)?;
    }
    if let Some(seed) = global.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn parse_weights(text: &str) -> Result<RewardWeights<f64>, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!(
            "--weights expects three comma-separated numbers, got `{text}`"
        )));
    }
    let mut values = [0.0f64; 3];
    for (v, part) in values.iter_mut().zip(&parts) {
        *v = part
            .parse()
            .map_err(|_| CliError::Input(format!("invalid weight `{part}`")))?;
        if !(v.is_finite() && *v >= 0.0) {
            return Err(CliError::Input(format!(
                "weights must be non-negative and finite, got `{part}`"
            )));
        }
    }
    Ok(RewardWeights::new(values[0], values[1], values[2]))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

fn cmd_score(cfg: &AppConfig, input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let file = File::open(input)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", input.display())))?;
    let lines: Vec<(usize, String)> = BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(idx, line)| line.map(|l| (idx + 1, l)))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", input.display())))?;

    let engine = ScoringEngine::new(cfg.weights, cfg.grpo, cfg.rewards, cfg.embedder);
    let results: Vec<(usize, Result<ScoreResponse, String>)> = lines
        .par_iter()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(line_no, line)| {
            let result = ScoreRequest::from_json(line)
                .and_then(|req| engine.handle_score(&req))
                .map_err(|e| e.to_string());
            (*line_no, result)
        })
        .collect();

    let mut out = open_output(output)?;
    let mut failures = 0usize;
    for (line_no, result) in results {
        match result {
            Ok(response) => {
                let line = serde_json::to_string(&response)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                writeln!(out, "{line}").map_err(|e| CliError::Internal(e.to_string()))?;
            }
            Err(message) => {
                failures += 1;
                eprintln!("line {line_no}: {message}");
            }
        }
    }
    out.flush().map_err(|e| CliError::Internal(e.to_string()))?;

    if failures > 0 && cfg.strict {
        return Err(CliError::Input(format!(
            "{failures} record(s) failed in strict mode"
        )));
    }
    Ok(())
}

fn parse_thresholds(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Input(format!("invalid threshold `{s}`")))
        })
        .collect()
}

fn cmd_eval(
    cfg: &AppConfig,
    input: &Path,
    task: TaskType,
    thresholds: Option<&str>,
    json_to_stdout: bool,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let load = load_eval_file(input, cfg.strict).map_err(|e| CliError::Input(e.to_string()))?;
    for issue in &load.skipped {
        eprintln!("line {}: skipped: {}", issue.line, issue.message);
    }
    let thresholds = thresholds.map(parse_thresholds).transpose()?;
    let report = evaluate(&load.records, task, thresholds.as_deref())
        .map_err(|e| CliError::Input(e.to_string()))?;

    print!("{}", report.to_table());
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(path) = output {
        std::fs::write(path, format!("{json}\n"))
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    if json_to_stdout || output.is_none() {
        println!("{json}");
    }
    Ok(())
}

/// Per-seed row of a sweep, written as CSV.
struct SweepRow {
    seed: u64,
    final_entropy: f64,
    reward_first: f64,
    reward_last: f64,
    /// Entropy of the paired run with the diversity weight zeroed.
    baseline_entropy: Option<f64>,
}

fn cmd_simulate(
    sim: SimConfig,
    seeds: Option<u64>,
    compare_evol: bool,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let world = TemplateWorld::default_world(sim.m).map_err(|e| CliError::Input(e.to_string()))?;

    match seeds {
        None => {
            let trajectory = run_one(&world, &sim)?;
            let summary = serde_json::to_string(&trajectory.summary(&sim))
                .map_err(|e| CliError::Internal(e.to_string()))?;
            let mut out = open_output(output)?;
            trajectory
                .write_csv(&mut out)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            out.flush().map_err(|e| CliError::Internal(e.to_string()))?;
            if output.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
            Ok(())
        }
        Some(count) => {
            if count == 0 {
                return Err(CliError::Input("--seeds must be at least 1".into()));
            }
            let seed_list: Vec<u64> = (0..count).map(|i| sim.seed.wrapping_add(i)).collect();
            let rows: Vec<SweepRow> = seed_list
                .par_iter()
                .map(|&seed| -> Result<SweepRow, CliError> {
                    let run_cfg = SimConfig { seed, ..sim };
                    let enabled = run_one(&world, &run_cfg)?;
                    let baseline_entropy = if compare_evol {
                        let disabled_cfg = SimConfig {
                            weights: run_cfg.weights.without_evolution(),
                            ..run_cfg
                        };
                        Some(run_one(&world, &disabled_cfg)?.final_entropy)
                    } else {
                        None
                    };
                    Ok(SweepRow {
                        seed,
                        final_entropy: enabled.final_entropy,
                        reward_first: enabled.steps.first().map_or(0.0, |s| s.mean_reward),
                        reward_last: enabled.steps.last().map_or(0.0, |s| s.mean_reward),
                        baseline_entropy,
                    })
                })
                .collect::<Result<_, _>>()?;

            let mut out = open_output(output)?;
            if compare_evol {
                writeln!(
                    out,
                    "seed,final_entropy,baseline_entropy,reward_first,reward_last,entropy_gap"
                )
            } else {
                writeln!(out, "seed,final_entropy,reward_first,reward_last")
            }
            .map_err(|e| CliError::Internal(e.to_string()))?;
            for row in &rows {
                match row.baseline_entropy {
                    Some(baseline) => writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        row.seed,
                        row.final_entropy,
                        baseline,
                        row.reward_first,
                        row.reward_last,
                        row.final_entropy - baseline
                    ),
                    None => writeln!(
                        out,
                        "{},{},{},{}",
                        row.seed, row.final_entropy, row.reward_first, row.reward_last
                    ),
                }
                .map_err(|e| CliError::Internal(e.to_string()))?;
            }
            out.flush().map_err(|e| CliError::Internal(e.to_string()))?;

            let summary = sweep_summary(&sim, &rows, compare_evol);
            if output.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
            Ok(())
        }
    }
}

fn run_one(world: &TemplateWorld, cfg: &SimConfig) -> Result<SimTrajectory, CliError> {
    simulate(world, cfg).map_err(|e| CliError::Input(e.to_string()))
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn sweep_summary(sim: &SimConfig, rows: &[SweepRow], compare_evol: bool) -> String {
    let entropies: Vec<f64> = rows.iter().map(|r| r.final_entropy).collect();
    let mut value = serde_json::json!({
        "seeds": rows.len(),
        "first_seed": sim.seed,
        "steps": sim.steps,
        "median_final_entropy": median(entropies),
    });
    if compare_evol {
        let baselines: Vec<f64> = rows.iter().filter_map(|r| r.baseline_entropy).collect();
        let wins = rows
            .iter()
            .filter(|r| r.baseline_entropy.is_some_and(|b| r.final_entropy > b))
            .count();
        value["median_baseline_entropy"] = median(baselines).into();
        value["entropy_win_fraction"] = (wins as f64 / rows.len() as f64).into();
    }
    value.to_string()
}
