//! Command-line and TOML configuration, merged with precedence
//! command line > config file > defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fcast_core::evaltests::Estimator;
use fcast_core::scores::Restriction;
use fcast_core::simlab::{PowerConfig, ScenarioConfig, SweepConfig, TablesConfig};
use fcast_core::tslab::{ArPrior, RollingConfig};
use fcast_core::WeightFunction;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fcast", version, about = "Forecast evaluation experiments with proper and weighted scoring rules")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replications (cases for tables and sweep-sigma, Monte Carlo draws for impropriety-demo).
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Output file; defaults to $FCAST_OUT_DIR/<command>.<format> or standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with global keys and one table per command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true, hide = true)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point, probabilistic and weighted scores in the dilemma setting.
    Tables(TablesArgs),
    /// Mean and restricted scores as functions of sigma.
    SweepSigma(SweepArgs),
    /// Two-sided DM tests, N(0,1) against standardized t(5), left-tail weights.
    PowerDiks(PowerArgs),
    /// One-sided DM tests against the likelihood-ratio benchmark.
    PowerNp(PowerArgs),
    /// Mixture scenarios A and B with right-tail weights.
    ScenarioAb(ScenarioArgs),
    /// Score a forecast on observations from a CSV file.
    Score(ScoreArgs),
    /// Diebold-Mariano test on two score files.
    DmTest(DmArgs),
    /// Rolling evaluation of a Bayesian AR(p) forecaster on a quarterly series.
    ArEval(ArEvalArgs),
    /// Impropriety of quadratic CL/CSL approximations and the hedging example.
    ImproprietyDemo(ImproprietyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tables(_) => "tables",
            Command::SweepSigma(_) => "sweep-sigma",
            Command::PowerDiks(_) => "power-diks",
            Command::PowerNp(_) => "power-np",
            Command::ScenarioAb(_) => "scenario-ab",
            Command::Score(_) => "score",
            Command::DmTest(_) => "dm-test",
            Command::ArEval(_) => "ar-eval",
            Command::ImproprietyDemo(_) => "impropriety-demo",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TablesArgs {
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Scale of the Gaussian CDF weight.
    #[arg(long)]
    pub weight_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepArgs {
    /// Comma-separated sigma values in (0,1).
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PowerArgs {
    /// Comma-separated thresholds, e.g. --r-grid=-3,-2,-1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub r_grid: Option<Vec<f64>>,
    /// Expected number of observations below the threshold.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub min_n: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScenarioArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub r_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Horizon of the k-dependence variance estimator.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Crps,
    Logs,
    Twcrps,
    Cl,
    Csl,
    Twcrls,
    Brier,
    Dss,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScoreArgs {
    /// normal:MU:SIGMA, std-t:NU, uniform:A:B, heavy-tail or normal-heavy-mixture.
    #[arg(long)]
    pub forecast: Option<String>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    /// one, indicator-right:R, indicator-left:R, gaussian-right:R:S or gaussian-left:R:S.
    #[arg(long, allow_hyphen_values = true)]
    pub weight: Option<String>,
    /// Event threshold for the Brier score.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<f64>,
    /// CSV with an `observation` column (or a single column of numbers).
    #[arg(long)]
    pub observations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorArg {
    Kdep,
    Hac,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DmArgs {
    /// Score file of forecaster F (case_index,observation,score).
    #[arg(long)]
    pub scores_f: Option<PathBuf>,
    #[arg(long)]
    pub scores_g: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ArEvalArgs {
    /// CSV with columns quarter (YYYYQn) and the value column.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Posterior draws per fit.
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated forecast horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub start_index: Option<usize>,
    /// Lower-tail threshold for restricted scores and twCRPS.
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<f64>,
    /// Upper-tail threshold for restricted scores and twCRPS.
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<f64>,
    #[arg(long)]
    pub paths_per_draw: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ImproprietyArgs {
    /// Draws for the hedging example.
    #[arg(long)]
    pub hedge_draws: Option<usize>,
}

/// Contents of a `--config` TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub tables: Option<TablesArgs>,
    pub sweep_sigma: Option<SweepArgs>,
    pub power_diks: Option<PowerArgs>,
    pub power_np: Option<PowerArgs>,
    pub scenario_ab: Option<ScenarioArgs>,
    pub score: Option<ScoreArgs>,
    pub dm_test: Option<DmArgs>,
    pub ar_eval: Option<ArEvalArgs>,
    pub impropriety_demo: Option<ImproprietyArgs>,
}

/// Invalid user input; reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> UsageError {
    UsageError(format!("invalid value for `{field}`: {reason}"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreParams {
    pub forecast: String,
    pub rule: RuleArg,
    pub weight: WeightFunction,
    pub z: Option<f64>,
    pub observations: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmParams {
    pub scores_f: PathBuf,
    pub scores_g: PathBuf,
    pub estimator: Estimator,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArEvalParams {
    pub input: PathBuf,
    pub column: String,
    pub rolling: RollingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandConfig {
    Tables(TablesConfig),
    SweepSigma(SweepConfig),
    PowerDiks(PowerConfig),
    PowerNp(PowerConfig),
    ScenarioAb(ScenarioConfig),
    Score(ScoreParams),
    DmTest(DmParams),
    ArEval(ArEvalParams),
    ImproprietyDemo { draws: usize, hedge_draws: usize },
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command_name: String,
    pub seed: u64,
    pub replications: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threads: Option<usize>,
    pub command: CommandConfig,
    #[serde(skip)]
    pub print_config: bool,
}

macro_rules! fill {
    ($cli:expr, $file:expr; $($f:ident),+) => {
        if let Some(file) = $file {
            $( if $cli.$f.is_none() { $cli.$f = file.$f.clone(); } )+
        }
    };
}

fn check_alpha(alpha: f64) -> Result<f64, UsageError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(invalid("alpha", format!("must lie in (0,1), got {alpha}")))
    }
}

fn check_positive(field: &str, v: usize) -> Result<usize, UsageError> {
    if v > 0 {
        Ok(v)
    } else {
        Err(invalid(field, "must be at least 1"))
    }
}

fn check_grid(field: &str, grid: &[f64]) -> Result<(), UsageError> {
    if grid.is_empty() || grid.iter().any(|r| !r.is_finite()) {
        return Err(invalid(field, "need a nonempty list of finite numbers"));
    }
    Ok(())
}

fn required<T>(field: &str, v: Option<T>) -> Result<T, UsageError> {
    v.ok_or_else(|| UsageError(format!("missing required value `{field}`")))
}

fn power_config(mut a: PowerArgs, file: Option<&PowerArgs>, reps: Option<usize>) -> Result<PowerConfig, UsageError> {
    fill!(a, file; r_grid, c, alpha, min_n);
    let d = PowerConfig::default();
    let cfg = PowerConfig {
        r_grid: a.r_grid.unwrap_or(d.r_grid),
        c: a.c.unwrap_or(d.c),
        alpha: check_alpha(a.alpha.unwrap_or(d.alpha))?,
        reps: check_positive("reps", reps.unwrap_or(d.reps))?,
        min_n: a.min_n.unwrap_or(d.min_n),
        max_n: d.max_n,
    };
    check_grid("r-grid", &cfg.r_grid)?;
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(invalid("c", format!("must be positive, got {}", cfg.c)));
    }
    if cfg.min_n < 2 {
        return Err(invalid("min-n", "must be at least 2"));
    }
    Ok(cfg)
}

/// Merges command-line arguments with the optional config file contents.
pub fn resolve(cli: Cli, file: FileConfig) -> Result<RunConfig, UsageError> {
    let mut g = cli.global;
    fill!(g, Some(&file); seed, reps, out, format, threads);
    if g.threads == Some(0) {
        return Err(invalid("threads", "must be at least 1"));
    }
    let name = cli.command.name().to_string();
    let reps = g.reps;
    let (replications, command) = match cli.command {
        Command::Tables(mut a) => {
            fill!(a, file.tables.as_ref(); sigma2, threshold, weight_scale);
            let d = TablesConfig::default();
            let cfg = TablesConfig {
                sigma2: a.sigma2.unwrap_or(d.sigma2),
                n: check_positive("reps", reps.unwrap_or(d.n))?,
                threshold: a.threshold.unwrap_or(d.threshold),
                weight_scale: a.weight_scale.unwrap_or(d.weight_scale),
            };
            if !(cfg.sigma2 > 0.0 && cfg.sigma2 < 1.0) {
                return Err(invalid("sigma2", format!("must lie in (0,1), got {}", cfg.sigma2)));
            }
            if !(cfg.weight_scale > 0.0) {
                return Err(invalid("weight-scale", "must be positive"));
            }
            (cfg.n, CommandConfig::Tables(cfg))
        }
        Command::SweepSigma(mut a) => {
            fill!(a, file.sweep_sigma.as_ref(); sigmas, threshold);
            let d = SweepConfig::default();
            let cfg = SweepConfig {
                sigmas: a.sigmas.unwrap_or(d.sigmas),
                n: check_positive("reps", reps.unwrap_or(d.n))?,
                threshold: a.threshold.unwrap_or(d.threshold),
            };
            check_grid("sigmas", &cfg.sigmas)?;
            if let Some(s) = cfg.sigmas.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
                return Err(invalid("sigmas", format!("each value must lie in (0,1), got {s}")));
            }
            (cfg.n, CommandConfig::SweepSigma(cfg))
        }
        Command::PowerDiks(a) => {
            let cfg = power_config(a, file.power_diks.as_ref(), reps)?;
            (cfg.reps, CommandConfig::PowerDiks(cfg))
        }
        Command::PowerNp(a) => {
            let cfg = power_config(a, file.power_np.as_ref(), reps)?;
            (cfg.reps, CommandConfig::PowerNp(cfg))
        }
        Command::ScenarioAb(mut a) => {
            fill!(a, file.scenario_ab.as_ref(); r_grid, n, alpha, k);
            let d = ScenarioConfig::default();
            let cfg = ScenarioConfig {
                r_grid: a.r_grid.unwrap_or(d.r_grid),
                n: a.n.unwrap_or(d.n),
                alpha: check_alpha(a.alpha.unwrap_or(d.alpha))?,
                reps: check_positive("reps", reps.unwrap_or(d.reps))?,
                k: check_positive("k", a.k.unwrap_or(d.k))?,
            };
            check_grid("r-grid", &cfg.r_grid)?;
            if cfg.n < 2 {
                return Err(invalid("n", "must be at least 2"));
            }
            (cfg.reps, CommandConfig::ScenarioAb(cfg))
        }
        Command::Score(mut a) => {
            fill!(a, file.score.as_ref(); forecast, rule, weight, z, observations);
            let weight = match a.weight.as_deref() {
                None => WeightFunction::ConstantOne,
                Some(s) => s.parse().map_err(|e| invalid("weight", e))?,
            };
            let rule = a.rule.unwrap_or(RuleArg::Crps);
            if rule == RuleArg::Brier && a.z.is_none() {
                return Err(UsageError("missing required value `z` for the Brier score".into()));
            }
            let p = ScoreParams {
                forecast: a.forecast.unwrap_or_else(|| "normal:0:1".into()),
                rule,
                weight,
                z: a.z,
                observations: required("observations", a.observations)?,
            };
            crate::run::parse_forecast(&p.forecast).map_err(|e| invalid("forecast", e))?;
            (0, CommandConfig::Score(p))
        }
        Command::DmTest(mut a) => {
            fill!(a, file.dm_test.as_ref(); scores_f, scores_g, k, estimator, alpha);
            let k = check_positive("k", a.k.unwrap_or(1))?;
            let estimator = match a.estimator.unwrap_or(EstimatorArg::Kdep) {
                EstimatorArg::Kdep => Estimator::Kdep(k),
                EstimatorArg::Hac => Estimator::Hac,
            };
            let p = DmParams {
                scores_f: required("scores-f", a.scores_f)?,
                scores_g: required("scores-g", a.scores_g)?,
                estimator,
                alpha: check_alpha(a.alpha.unwrap_or(0.05))?,
            };
            (0, CommandConfig::DmTest(p))
        }
        Command::ArEval(mut a) => {
            fill!(a, file.ar_eval.as_ref(); input, column, p, m, horizons, start_index, lower, upper, paths_per_draw);
            let d = RollingConfig::default();
            let lower = a.lower.unwrap_or(0.1);
            let upper = a.upper.unwrap_or(0.98);
            let p = a.p.unwrap_or(d.p);
            if p == 0 {
                return Err(invalid("p", "lag order must be at least 1"));
            }
            let horizons = a.horizons.unwrap_or(d.horizons);
            if horizons.is_empty() || horizons.contains(&0) {
                return Err(invalid("horizons", "each horizon must be at least 1"));
            }
            let rolling = RollingConfig {
                p,
                m: check_positive("m", a.m.unwrap_or(d.m))?,
                horizons,
                start_index: a.start_index.unwrap_or(d.start_index),
                weights: vec![WeightFunction::indicator_left(lower), WeightFunction::indicator_right(upper)],
                restrictions: vec![Restriction::Below(lower), Restriction::Above(upper)],
                prior: ArPrior::default(),
                paths_per_draw: a.paths_per_draw.unwrap_or(d.paths_per_draw),
            };
            if rolling.paths_per_draw < 2 {
                return Err(invalid("paths-per-draw", "must be at least 2"));
            }
            let params = ArEvalParams {
                input: required("input", a.input)?,
                column: a.column.unwrap_or_else(|| "value".into()),
                rolling,
            };
            (params.rolling.m, CommandConfig::ArEval(params))
        }
        Command::ImproprietyDemo(mut a) => {
            fill!(a, file.impropriety_demo.as_ref(); hedge_draws);
            let draws = reps.unwrap_or(1_000_000);
            let hedge_draws = a.hedge_draws.unwrap_or(100_000);
            if draws < 2 || hedge_draws < 2 {
                return Err(invalid("reps", "need at least two draws"));
            }
            (draws, CommandConfig::ImproprietyDemo { draws, hedge_draws })
        }
    };
    Ok(RunConfig {
        command_name: name,
        seed: g.seed.unwrap_or(DEFAULT_SEED),
        replications,
        output: g.out,
        format: g.format.unwrap_or(Format::Csv),
        threads: g.threads,
        command,
        print_config: g.print_config,
    })
}

/// Parses the command line (excluding nothing: `argv[0]` is the program
/// name), reads the config file it names, and resolves the configuration.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseOutcome::Clap)?;
    let file = match &cli.global.config {
        None => FileConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ParseOutcome::Usage(UsageError(format!("cannot read config {}: {e}", path.display()))))?;
            toml::from_str(&text)
                .map_err(|e| ParseOutcome::Usage(UsageError(format!("invalid config {}: {e}", path.display()))))?
        }
    };
    resolve(cli, file).map_err(ParseOutcome::Usage)
}

#[derive(Debug)]
pub enum ParseOutcome {
    /// Help, version or a malformed command line.
    Clap(clap::Error),
    Usage(UsageError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, ParseOutcome> {
        parse_config(std::iter::once("fcast").chain(args.iter().copied()))
    }

    #[test]
    fn tables_defaults() {
        let cfg = parse(&["tables", "--seed", "42"]).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.format, Format::Csv);
        match cfg.command {
            CommandConfig::Tables(t) => assert_eq!(t, TablesConfig::default()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_alpha_names_field() {
        match parse(&["power-diks", "--alpha", "1.5"]) {
            Err(ParseOutcome::Usage(e)) => assert!(e.0.contains("alpha"), "{e}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_grids_parse() {
        let cfg = parse(&["power-diks", "--r-grid", "-3,-1.5,0"]).unwrap();
        match cfg.command {
            CommandConfig::PowerDiks(p) => assert_eq!(p.r_grid, vec![-3.0, -1.5, 0.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_values_and_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 9\nreps = 77\n[power-diks]\nalpha = 0.1\nc = 4.0\n").unwrap();
        let p = path.to_str().unwrap();
        let cfg = parse(&["power-diks", "--config", p, "--alpha", "0.01"]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.replications, 77);
        match cfg.command {
            CommandConfig::PowerDiks(pc) => {
                assert_eq!(pc.alpha, 0.01);
                assert_eq!(pc.c, 4.0);
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "seed = 9\nbogus = 1\n").unwrap();
        assert!(matches!(parse(&["tables", "--config", p]), Err(ParseOutcome::Usage(_))));
        std::fs::write(&path, "[tables]\nsigma = 0.5\n").unwrap();
        assert!(matches!(parse(&["tables", "--config", p]), Err(ParseOutcome::Usage(_))));
    }
}
