//! `cohortmn`: exact moments, microsimulation and Dirichlet posteriors for
//! closed-cohort Markov models described in the text model format.

pub mod error;
pub mod formats;
pub mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use cohort::bayes::{posterior_mean, posterior_update, DirichletRows, TransitionCounts};
use cohort::compare::{compare, CompareThresholds, ComparisonReport};
use cohort::microsim::{replicate_with, ReplicateOptions, RNG_ID};
use cohort::modelfile::{LoadOptions, Model};
use cohort::moment_trajectory;

pub use error::{exit, CliError};
use output::{sibling, write_all, CsvDoc};

/// Master seed when neither `--seed` nor the model file gives one.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "cohortmn",
    version,
    about = "Exact and simulated moments of Markov cohort models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact per-cycle mean, variance and covariance of the state counts.
    Moments(MomentsArgs),
    /// Replicated individual-level microsimulation.
    Simulate(SimulateArgs),
    /// Simulate and compare empirical against exact moments.
    Compare(CompareArgs),
    /// Dirichlet posterior of the transition matrix from observed data.
    Posterior(PosteriorArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Rescale rows that do not sum to 1 instead of rejecting the model.
    #[arg(long)]
    pub renormalize_rows: bool,
    /// Reuse the last matrix for cycles past the end of the schedule.
    #[arg(long)]
    pub hold_last: bool,
}

impl ModelArgs {
    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            renormalize_rows: self.renormalize_rows,
            hold_last: self.hold_last.then_some(true),
        }
    }
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Per-state moments CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Full covariance CSV [default: <out stem>_cov.csv].
    #[arg(long)]
    pub cov_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulationArgs {
    /// Number of simulated cohorts (at least 2).
    #[arg(long)]
    pub replications: usize,
    /// Master seed [default: model file `seed`, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores]. Does not affect results.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimulationArgs,
    /// Empirical moments CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every simulated individual path to this file.
    #[arg(long)]
    pub store_paths: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimulationArgs,
    /// Comparison CSV; a text summary is written to <report stem>.summary.txt.
    #[arg(long)]
    pub report: PathBuf,
    /// Model used for the exact moments [default: --model].
    #[arg(long)]
    pub analytic_model: Option<PathBuf>,
    /// Largest accepted |z| for the mean of a gated cell.
    #[arg(long, default_value_t = 4.0)]
    pub z_threshold: f64,
    /// Accepted empirical/analytic variance ratio, `low,high`.
    #[arg(long, default_value = "0.85,1.15", value_parser = parse_band)]
    pub ratio_band: (f64, f64),
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    /// Sparse transition counts CSV (`from,to,count`).
    #[arg(long, conflicts_with = "paths", required_unless_present = "paths")]
    pub counts: Option<PathBuf>,
    /// Individual paths file, as written by `simulate --store-paths`.
    #[arg(long)]
    pub paths: Option<PathBuf>,
    /// Dense prior CSV [default: all concentrations 1].
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Take state labels from this model file.
    #[arg(long, conflicts_with = "states")]
    pub model: Option<PathBuf>,
    /// Comma-separated state labels.
    #[arg(long, value_delimiter = ',')]
    pub states: Option<Vec<String>>,
    /// Posterior CSV.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `low,high`, found `{s}`"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad lower bound `{lo}`"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad upper bound `{hi}`"))?;
    if !(lo <= hi && lo >= 0.0) {
        return Err(format!("band [{lo}, {hi}] is empty or negative"));
    }
    Ok((lo, hi))
}

/// Runs a command and returns its exit code. Diagnostics go to `stderr`,
/// summaries to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32 {
    let result = match cli.command {
        Command::Moments(a) => cmd_moments(&a, stderr),
        Command::Simulate(a) => cmd_simulate(&a, stderr),
        Command::Compare(a) => cmd_compare(&a, stdout, stderr),
        Command::Posterior(a) => cmd_posterior(&a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_model(
    path: &Path,
    args: &ModelArgs,
    stderr: &mut dyn std::io::Write,
) -> Result<Model, CliError> {
    let text = read_text(path)?;
    let (model, repairs) = Model::parse(&text, args.load_options())?;
    for r in repairs {
        let _ = writeln!(
            stderr,
            "warning: matrix {} row {} summed to {}; renormalized",
            r.matrix, r.row, r.original_sum
        );
    }
    Ok(model)
}

fn model_meta(model: &Model) -> Vec<(&'static str, String)> {
    let spec = &model.spec;
    vec![
        ("states", spec.state_space().labels().join(",")),
        ("n0", spec.n0().to_string()),
        ("horizon", spec.horizon().to_string()),
        ("cycle_length", spec.cycle_length().to_string()),
        ("schedule_matrices", spec.schedule().len().to_string()),
    ]
}

pub fn cmd_moments(args: &MomentsArgs, stderr: &mut dyn std::io::Write) -> Result<i32, CliError> {
    let model = load_model(&args.model.model, &args.model, stderr)?;
    let traj = moment_trajectory(&model.spec).map_err(|e| CliError::Validation(e.to_string()))?;
    let labels = model.spec.state_space().labels();
    let meta = model_meta(&model);

    let mut moments = CsvDoc::new(
        "cohort-moments/1",
        &meta,
        &["cycle", "state", "mean", "variance", "sd"],
    );
    let mut cov = CsvDoc::new(
        "cohort-covariance/1",
        &meta,
        &["cycle", "state_u", "state_v", "cov"],
    );
    for (z, c) in traj.cycles.iter().enumerate() {
        for (k, label) in labels.iter().enumerate() {
            let var = c.covariance.get(k, k);
            moments.row([
                z.to_string(),
                label.clone(),
                c.mean[k].to_string(),
                var.to_string(),
                var.sqrt().to_string(),
            ]);
            for (v, other) in labels.iter().enumerate() {
                cov.row([
                    z.to_string(),
                    label.clone(),
                    other.clone(),
                    c.covariance.get(k, v).to_string(),
                ]);
            }
        }
    }
    let cov_path = args
        .cov_out
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "_cov.csv"));
    write_all(vec![
        (args.out.clone(), moments.finish()),
        (cov_path, cov.finish()),
    ])?;
    Ok(exit::PASS)
}

fn resolve_seed(cli_seed: Option<u64>, model: &Model) -> u64 {
    cli_seed.or(model.seed).unwrap_or(DEFAULT_SEED)
}

pub fn cmd_simulate(args: &SimulateArgs, stderr: &mut dyn std::io::Write) -> Result<i32, CliError> {
    let model = load_model(&args.model.model, &args.model, stderr)?;
    let seed = resolve_seed(args.sim.seed, &model);
    let opts = ReplicateOptions {
        workers: args.sim.workers,
        store_paths: args.store_paths.is_some(),
    };
    let out = replicate_with(&model.spec, args.sim.replications, seed, opts)?;
    let summary = &out.summary;
    let labels = model.spec.state_space().labels();

    let mut meta = model_meta(&model);
    meta.extend([
        ("rng", RNG_ID.to_string()),
        ("seed", seed.to_string()),
        ("replications", summary.replications.to_string()),
    ]);
    let header = [
        "cycle",
        "state",
        "empirical_mean",
        "empirical_variance",
        "replications",
        "seed",
    ];
    let mut doc = CsvDoc::new("cohort-simulation/1", &meta, &header);
    for (z, (means, vars)) in summary
        .empirical_mean
        .iter()
        .zip(&summary.empirical_variance)
        .enumerate()
    {
        for (k, label) in labels.iter().enumerate() {
            doc.row([
                z.to_string(),
                label.clone(),
                means[k].to_string(),
                vars[k].to_string(),
                summary.replications.to_string(),
                seed.to_string(),
            ]);
        }
    }
    let mut files = vec![(args.out.clone(), doc.finish())];
    if let (Some(path), Some(paths)) = (&args.store_paths, &out.paths) {
        files.push((
            path.clone(),
            formats::write_paths(labels, model.spec.schedule().len(), paths),
        ));
    }
    write_all(files)?;
    Ok(exit::PASS)
}

pub fn cmd_compare(
    args: &CompareArgs,
    stdout: &mut dyn std::io::Write,
    stderr: &mut dyn std::io::Write,
) -> Result<i32, CliError> {
    let simulated = load_model(&args.model.model, &args.model, stderr)?;
    let analytic = match &args.analytic_model {
        Some(path) => load_model(path, &args.model, stderr)?,
        None => simulated.clone(),
    };
    if analytic.spec.num_states() != simulated.spec.num_states()
        || analytic.spec.horizon() != simulated.spec.horizon()
    {
        return Err(CliError::DimensionMismatch(
            "analytic and simulated models differ in states or horizon".into(),
        ));
    }
    let seed = resolve_seed(args.sim.seed, &simulated);
    let opts = ReplicateOptions {
        workers: args.sim.workers,
        store_paths: false,
    };
    let summary = replicate_with(&simulated.spec, args.sim.replications, seed, opts)?.summary;
    let traj =
        moment_trajectory(&analytic.spec).map_err(|e| CliError::Validation(e.to_string()))?;
    let thresholds = CompareThresholds {
        z_max: args.z_threshold,
        ratio_band: args.ratio_band,
        ..CompareThresholds::default()
    };
    let report = compare(&summary, &traj, thresholds)
        .map_err(|e| CliError::DimensionMismatch(e.to_string()))?;

    let labels = simulated.spec.state_space().labels();
    let mut meta = model_meta(&simulated);
    meta.extend([
        ("rng", RNG_ID.to_string()),
        ("seed", seed.to_string()),
        ("replications", summary.replications.to_string()),
        ("z_threshold", thresholds.z_max.to_string()),
        (
            "ratio_band",
            format!("{},{}", thresholds.ratio_band.0, thresholds.ratio_band.1),
        ),
        ("variance_floor", thresholds.variance_floor.to_string()),
    ]);
    let header = [
        "cycle",
        "state",
        "analytic_mean",
        "empirical_mean",
        "mean_z",
        "analytic_variance",
        "empirical_variance",
        "variance_ratio",
        "degenerate",
        "pass",
    ];
    let mut doc = CsvDoc::new("cohort-comparison/1", &meta, &header);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &report.cells {
        doc.row([
            c.cycle.to_string(),
            labels[c.state].clone(),
            c.analytic_mean.to_string(),
            c.empirical_mean.to_string(),
            c.z.to_string(),
            c.analytic_variance.to_string(),
            c.empirical_variance.to_string(),
            opt(c.variance_ratio),
            u8::from(c.degenerate).to_string(),
            u8::from(c.passed).to_string(),
        ]);
    }
    let text = summary_text(&report, labels);
    write_all(vec![
        (args.report.clone(), doc.finish()),
        (
            sibling(&args.report, ".summary.txt"),
            text.clone().into_bytes(),
        ),
    ])?;
    let _ = stdout.write_all(text.as_bytes());
    Ok(if report.passed {
        exit::PASS
    } else {
        exit::STATISTICAL_FAILURE
    })
}

/// Human-readable verdict for a comparison.
pub fn summary_text(report: &ComparisonReport, labels: &[String]) -> String {
    let t = &report.thresholds;
    let mut s = String::new();
    writeln!(s, "replications: {}", report.replications).unwrap();
    writeln!(s, "cells: {}", report.cells.len()).unwrap();
    writeln!(s, "max |z|: {:.4}", report.max_abs_z).unwrap();
    writeln!(
        s,
        "cells with |z| <= {}: {:.2}% (required {:.0}%)",
        t.z_strict,
        100.0 * report.fraction_within_strict,
        100.0 * t.min_fraction_strict
    )
    .unwrap();
    match report.ratio_range {
        Some((lo, hi)) => writeln!(
            s,
            "variance ratio range (analytic variance >= {}): [{lo:.4}, {hi:.4}], band [{}, {}]",
            t.variance_floor, t.ratio_band.0, t.ratio_band.1
        )
        .unwrap(),
        None => writeln!(s, "variance ratio range: no cells above the variance floor").unwrap(),
    }
    let failures: Vec<_> = report.failures().collect();
    for c in failures.iter().take(20) {
        writeln!(
            s,
            "  FAIL cycle {} state {}: analytic mean {}, empirical mean {}, z {:.3}, ratio {}",
            c.cycle,
            labels[c.state],
            c.analytic_mean,
            c.empirical_mean,
            c.z,
            c.variance_ratio.map_or("-".into(), |r| format!("{r:.4}")),
        )
        .unwrap();
    }
    if failures.len() > 20 {
        writeln!(s, "  ... {} more failing cells", failures.len() - 20).unwrap();
    }
    writeln!(s, "result: {}", if report.passed { "PASS" } else { "FAIL" }).unwrap();
    s
}

pub fn cmd_posterior(
    args: &PosteriorArgs,
    stdout: &mut dyn std::io::Write,
) -> Result<i32, CliError> {
    let data_path = args
        .counts
        .as_ref()
        .or(args.paths.as_ref())
        .ok_or_else(|| CliError::BadArguments("one of --counts or --paths is required".into()))?;
    let data_text = read_text(data_path)?;

    let prior = match &args.prior {
        Some(path) => Some(formats::read_prior(&read_text(path)?)?),
        None => None,
    };
    let declared = match (&args.model, &args.states) {
        (Some(path), _) => {
            let (model, _) = Model::parse(&read_text(path)?, LoadOptions::default())?;
            Some(model.spec.state_space().labels().to_vec())
        }
        (None, Some(states)) => Some(states.clone()),
        (None, None) => None,
    };

    let (data_states, counts): (Option<Vec<String>>, Option<TransitionCounts>) =
        if args.paths.is_some() {
            let (states, set) = formats::read_paths(&data_text)?;
            let counts = cohort::bayes::count_transitions(&set)?;
            (Some(states), Some(counts))
        } else {
            (formats::meta_states(&data_text), None)
        };

    // Every source of labels that is present must agree.
    let sources = [
        ("data", data_states),
        ("prior", prior.as_ref().map(|(s, _)| s.clone())),
        ("states", declared),
    ];
    let mut states: Option<(&str, Vec<String>)> = None;
    for (name, labels) in sources {
        let Some(labels) = labels else { continue };
        match &states {
            None => states = Some((name, labels)),
            Some((first, known)) if *known != labels => {
                return Err(CliError::DimensionMismatch(format!(
                    "{first} states [{}] differ from {name} states [{}]",
                    known.join(","),
                    labels.join(",")
                )))
            }
            Some(_) => {}
        }
    }
    let (_, states) = states.ok_or_else(|| {
        CliError::BadArguments("state labels unknown: pass --prior, --model or --states".into())
    })?;

    let counts = match counts {
        Some(c) => c,
        None => formats::read_counts(&data_text, &states)?,
    };
    let (prior_source, prior) = match prior {
        Some((_, p)) => ("file", p),
        None => ("uniform", DirichletRows::uniform(states.len())),
    };
    let posterior = posterior_update(&prior, &counts)?;
    let mean = posterior_mean(&posterior);
    let mean = &mean.matrices()[0];

    let meta = [
        ("states", states.join(",")),
        ("prior", prior_source.to_string()),
    ];
    let header = [
        "from",
        "to",
        "prior_alpha",
        "count",
        "posterior_alpha",
        "posterior_mean",
    ];
    let mut doc = CsvDoc::new("cohort-posterior/1", &meta, &header);
    let mut echo = format!("prior ({prior_source}):\n");
    for (k, from) in states.iter().enumerate() {
        let row: Vec<String> = prior.row(k).iter().map(f64::to_string).collect();
        writeln!(echo, "  {from}: {}", row.join(" ")).unwrap();
        for (l, to) in states.iter().enumerate() {
            doc.row([
                from.clone(),
                to.clone(),
                prior.get(k, l).to_string(),
                counts.get(k, l).to_string(),
                posterior.get(k, l).to_string(),
                mean.get(k, l).to_string(),
            ]);
        }
    }
    write_all(vec![(args.out.clone(), doc.finish())])?;
    let _ = stdout.write_all(echo.as_bytes());
    Ok(exit::PASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_parsing() {
        assert_eq!(parse_band("0.85,1.15").unwrap(), (0.85, 1.15));
        assert!(parse_band("1.2,0.8").is_err());
        assert!(parse_band("0.8").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
