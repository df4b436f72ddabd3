use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use safeprune::induced::{build_induced_dtmc, BuildLimits};
use safeprune::model::validate_model;
use safeprune::pruning::{prune, PruneSpec};
use safeprune::workflow::{
    load_model, load_policy_file, parse_grid, read_text, write_text, Experiment, Polarity,
    SafetyReport, SweepConfig, SweepMethod,
};
use safeprune::{Error, Result};

#[derive(Parser)]
#[command(name = "safeprune", version, about = "Prune RL policy networks and measure the safety impact exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure a property on the chain induced by a policy.
    Check(CheckArgs),
    /// Prune a policy, write it with its mask, optionally re-measure.
    Prune(PruneArgs),
    /// Sweep pruning fractions and write a CSV of measurements.
    Sweep(SweepArgs),
    /// Prune each input feature in turn and report the change.
    Features(CheckArgs),
    /// Explore the full MDP and report structural problems.
    Validate(ValidateArgs),
    /// Write the induced chain in the explicit model format.
    ExportDtmc(ExportArgs),
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long, default_value_t = 1_000_000)]
    max_states: usize,
    #[arg(long, default_value_t = 5_000_000)]
    max_transitions: usize,
}

impl LimitArgs {
    fn limits(&self) -> BuildLimits {
        BuildLimits {
            max_states: self.max_states,
            max_transitions: self.max_transitions,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// `builtin:<name>?key=value&...` or an explicit model file.
    #[arg(long)]
    model: String,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, conflicts_with = "prop_file")]
    prop: Option<String>,
    #[arg(long)]
    prop_file: Option<PathBuf>,
    #[command(flatten)]
    limits: LimitArgs,
    /// Treat lower probabilities as safer for `=?` queries.
    #[arg(long)]
    lower_is_safer: bool,
    /// Record wall-clock timings (output is then no longer reproducible).
    #[arg(long)]
    timings: bool,
}

impl CommonArgs {
    fn property_text(&self) -> Result<String> {
        match (&self.prop, &self.prop_file) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(path)) => Ok(strip_comments(&read_text(path)?)),
            (None, None) => Err(Error::Semantic("one of --prop or --prop-file is required".into())),
        }
    }

    fn experiment(&self) -> Result<Experiment> {
        let mut exp = Experiment::load(&self.model, &self.policy, &self.property_text()?)?
            .with_limits(self.limits.limits());
        if self.lower_is_safer {
            exp = exp.with_polarity(Polarity::LowerIsSafer);
        }
        exp.record_timings = self.timings;
        Ok(exp)
    }
}

/// Property files may carry `#` or `//` comment lines.
fn strip_comments(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with("//"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    L1,
    Random,
    Feature,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, requires = "model")]
    prop: Option<String>,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long)]
    lower_is_safer: bool,
    #[arg(long, value_enum)]
    method: Method,
    /// 1-based layer index (l1, random).
    #[arg(long, default_value_t = 1)]
    layer: usize,
    #[arg(long, default_value_t = 0.0)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    feature: Option<String>,
    /// Where to write the pruned policy.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the mask; defaults to `<out>.mask.json`.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, default_value_t = 1)]
    layer: usize,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    grid: String,
    /// Number of random-pruning seeds.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_states: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    policy: PathBuf,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long)]
    out: PathBuf,
}

fn print_report(report: &SafetyReport, json: bool) {
    if json {
        println!("{}", report.to_json());
        return;
    }
    println!("property: {}", report.property);
    println!(
        "m = {} ({} states, {} transitions)",
        report.m, report.original.states, report.original.transitions
    );
    if let (Some(m_hat), Some(delta), Some(pruned)) = (report.m_hat, report.delta, &report.pruned) {
        println!(
            "m_hat = {} ({} states, {} transitions)",
            m_hat, pruned.states, pruned.transitions
        );
        println!("delta = {delta}");
    }
    if let Some(v) = report.verdict {
        println!("verdict: {v}");
    }
}

fn spec_from(method: Method, layer: usize, fraction: f64, seed: u64, feature: Option<String>) -> Result<PruneSpec> {
    Ok(match method {
        Method::L1 => PruneSpec::L1 { layer, fraction },
        Method::Random => PruneSpec::Random {
            layer,
            fraction,
            seed,
        },
        Method::Feature => PruneSpec::Feature {
            feature: feature
                .ok_or_else(|| Error::InvalidPruneSpec("--feature is required for feature pruning".into()))?,
        },
    })
}

fn mask_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".mask.json");
    PathBuf::from(name)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Check(args) => {
            let exp = args.common.experiment()?;
            print_report(&exp.measure()?, args.json);
        }
        Command::Prune(args) => {
            let spec = spec_from(args.method, args.layer, args.fraction, args.seed, args.feature.clone())?;
            let (pruned, mask) = match (&args.model, &args.prop) {
                (Some(model), Some(prop)) => {
                    let mut exp = Experiment::load(model, &args.policy, prop)?.with_limits(args.limits.limits());
                    if args.lower_is_safer {
                        exp = exp.with_polarity(Polarity::LowerIsSafer);
                    }
                    let (report, pruned, mask) = exp.prune_and_measure(&spec)?;
                    print_report(&report, args.json);
                    (pruned, mask)
                }
                _ => {
                    let policy = load_policy_file(&args.policy)?;
                    let (pruned, mask) = prune(&policy, &spec)?;
                    if !args.json {
                        println!("pruned {} connections", mask.len());
                    }
                    (pruned, mask)
                }
            };
            write_text(&args.out, &pruned.to_document())?;
            let mask_out = args.mask.unwrap_or_else(|| mask_path(&args.out));
            write_text(&mask_out, &mask.to_document())?;
        }
        Command::Sweep(args) => {
            let method = match args.method {
                Method::L1 => SweepMethod::L1,
                Method::Random => SweepMethod::Random,
                Method::Feature => {
                    return Err(Error::InvalidPruneSpec(
                        "feature pruning has no fraction; use the `features` subcommand".into(),
                    ))
                }
            };
            let config = SweepConfig {
                method,
                layer: args.layer,
                fractions: parse_grid(&args.grid)?,
                seeds: (args.seed_base..args.seed_base + args.seeds).collect(),
            };
            let exp = args.common.experiment()?;
            exp.sweep_to_file(&config, &args.out)?;
        }
        Command::Features(args) => {
            let exp = args.common.experiment()?;
            let reports = exp.feature_importance()?;
            if args.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&reports).expect("report serialization")
                );
            } else {
                println!("{:<20} {:>14} {:>14} {:>14}  verdict", "feature", "m", "m_hat", "delta");
                for (feature, r) in exp.policy.feature_names().iter().zip(&reports) {
                    println!(
                        "{:<20} {:>14.10} {:>14.10} {:>14.10}  {}",
                        feature,
                        r.m,
                        r.m_hat.unwrap_or(f64::NAN),
                        r.delta.unwrap_or(f64::NAN),
                        r.verdict.map(|v| v.to_string()).unwrap_or_default()
                    );
                }
            }
        }
        Command::Validate(args) => {
            let env = load_model(&args.model)?;
            let report = validate_model(env.as_ref(), args.max_states)?;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serialization"));
            } else {
                println!("states: {}", report.states);
                println!("transitions: {}", report.transitions);
                for v in &report.violations {
                    println!("violation: {v}");
                }
            }
            if !report.is_valid() {
                return Ok(3);
            }
        }
        Command::ExportDtmc(args) => {
            let env = load_model(&args.model)?;
            let policy = load_policy_file(&args.policy)?;
            let built = build_induced_dtmc(env.as_ref(), &policy, args.limits.limits())?;
            let model = built.to_explicit_model(env.feature_schema().to_vec())?;
            write_text(&args.out, &model.to_document())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
