//! Dispatch of a resolved configuration to the library and output handling.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use fcast_core::evaltests::dm_test;
use fcast_core::report::ExperimentReport;
use fcast_core::simlab;
use fcast_core::tslab;
use fcast_core::{scores, wscores, Error, ForecastDistribution, Result, RngStream, ScoreSeries};

use crate::config::{CommandConfig, Format, RuleArg, RunConfig};

pub const OUT_DIR_ENV: &str = "FCAST_OUT_DIR";

/// `normal:MU:SIGMA`, `std-t:NU`, `uniform:A:B`, `heavy-tail` or
/// `normal-heavy-mixture`.
pub fn parse_forecast(spec: &str) -> std::result::Result<ForecastDistribution, String> {
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let num = |i: usize| -> std::result::Result<f64, String> {
        parts
            .get(i)
            .ok_or_else(|| format!("`{spec}` is missing a parameter"))?
            .parse::<f64>()
            .map_err(|e| format!("`{spec}`: {e}"))
    };
    let f = match (parts[0], parts.len()) {
        ("normal", 3) => ForecastDistribution::gaussian(num(1)?, num(2)?),
        ("std-t", 2) => {
            let nu = parts[1].parse::<u32>().map_err(|e| format!("`{spec}`: {e}"))?;
            ForecastDistribution::standardized_t(nu)
        }
        ("uniform", 3) => ForecastDistribution::uniform(num(1)?, num(2)?),
        ("heavy-tail", 1) => Ok(ForecastDistribution::heavy_tail()),
        ("normal-heavy-mixture", 1) => Ok(simlab::mixture_f()),
        _ => return Err(format!("unrecognised forecast `{spec}`")),
    };
    f.map_err(|e| e.to_string())
}

pub struct Output {
    pub content: String,
    pub cells: usize,
}

fn render(report: &ExperimentReport, format: Format) -> Result<Output> {
    let content = match format {
        Format::Csv => report.to_csv_string()?,
        Format::Json => report.to_json_string()? + "\n",
    };
    Ok(Output {
        content,
        cells: report.cell_count(),
    })
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn score_one(rule: RuleArg, f: &ForecastDistribution, y: f64, w: &fcast_core::WeightFunction, z: Option<f64>) -> Result<f64> {
    Ok(match rule {
        RuleArg::Crps => scores::crps(f, y),
        RuleArg::Logs => scores::logs(f, y),
        RuleArg::Twcrps => wscores::twcrps(f, y, w),
        RuleArg::Cl => wscores::cl(f, y, w)?,
        RuleArg::Csl => wscores::csl(f, y, w)?,
        RuleArg::Twcrls => wscores::twcrls(f, y, w),
        RuleArg::Brier => scores::brier(f, y, z.expect("validated")),
        RuleArg::Dss => scores::dss(f, y)?,
    })
}

/// Runs the configured command and renders its output.
pub fn execute(cfg: &RunConfig) -> Result<Output> {
    let stream = RngStream::new(cfg.seed, 0);
    match &cfg.command {
        CommandConfig::Tables(c) => render(&simlab::run_tables_1_to_3(c, &stream)?, cfg.format),
        CommandConfig::SweepSigma(c) => render(&simlab::sweep_sigma(c, &stream)?, cfg.format),
        CommandConfig::PowerDiks(c) => render(&simlab::diks_power_study(c, &stream)?, cfg.format),
        CommandConfig::PowerNp(c) => render(&simlab::np_study(c, &stream)?, cfg.format),
        CommandConfig::ScenarioAb(c) => render(&simlab::scenario_ab_study(c, &stream)?, cfg.format),
        CommandConfig::ImproprietyDemo { draws, hedge_draws } => {
            let rep = simlab::impropriety_demo(*draws, *hedge_draws, &stream)?;
            for (rule, label) in [("cl_q", "CL^q"), ("csl_q", "CSL^q")] {
                let v = rep.find("impropriety", "analytic", rule, Some(1.0)).map(|r| r.value).unwrap_or(f64::NAN);
                let sign = if v < 0.0 { "negative: the misspecified forecast is preferred" } else { "nonnegative" };
                eprintln!("{label} expected score difference {v:.6} ({sign})");
            }
            render(&rep, cfg.format)
        }
        CommandConfig::ArEval(p) => {
            let series = tslab::load_series(&p.input, &p.column)?;
            render(&tslab::rolling_eval(&series, &p.rolling, &stream)?, cfg.format)
        }
        CommandConfig::Score(p) => {
            let f = parse_forecast(&p.forecast).map_err(|e| Error::param("forecast", e))?;
            let ys = scores::read_observations(open(&p.observations)?)?;
            let values = ys
                .iter()
                .map(|y| score_one(p.rule, &f, *y, &p.weight, p.z))
                .collect::<Result<Vec<_>>>()?;
            let rule_id = serde_json::to_value(p.rule).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let series = ScoreSeries::new(rule_id, p.forecast.clone(), ys, values)?;
            let content = match cfg.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    series.write_csv(&mut buf)?;
                    String::from_utf8(buf).expect("CSV is UTF-8")
                }
                Format::Json => json(&series)?,
            };
            Ok(Output {
                content,
                cells: series.len(),
            })
        }
        CommandConfig::DmTest(p) => {
            let sf = ScoreSeries::read_csv(open(&p.scores_f)?, "score", "F")?;
            let sg = ScoreSeries::read_csv(open(&p.scores_g)?, "score", "G")?;
            if sf.observations != sg.observations {
                return Err(Error::param("scores", "the two score files do not share the same observations"));
            }
            let r = dm_test(&sf, &sg, p.estimator, p.alpha)?;
            let content = match cfg.format {
                Format::Json => json(&r)?,
                Format::Csv => format!(
                    "statistic,variance,n,estimator,p_two,p_one,preferred\n{},{},{},{},{},{},{}\n",
                    r.statistic,
                    r.variance_estimate,
                    r.n,
                    r.estimator,
                    r.p_two_sided,
                    r.p_one_sided,
                    serde_json::to_value(r.preferred).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
                ),
            };
            Ok(Output { content, cells: 1 })
        }
    }
}

/// Explicit `--out`, else `$FCAST_OUT_DIR/<command>.<ext>`, else standard output.
pub fn destination(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.output.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(format!("{}.{}", cfg.command_name, cfg.format.extension())))
    })
}

/// Writes through a sibling temporary file so a failed write leaves nothing behind.
pub fn write_output(dest: Option<&Path>, content: &str) -> io::Result<()> {
    let Some(path) = dest else {
        let mut out = io::stdout().lock();
        out.write_all(content.as_bytes())?;
        return out.flush();
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let res = fs::write(&tmp, content).and_then(|_| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecast_specs() {
        assert!(parse_forecast("normal:0:1").unwrap().is_gaussian().is_some());
        assert!(matches!(parse_forecast("std-t:5").unwrap(), ForecastDistribution::StudentT(_)));
        assert!(matches!(parse_forecast("heavy-tail").unwrap(), ForecastDistribution::HeavyTail(_)));
        assert!(parse_forecast("normal-heavy-mixture").is_ok());
        assert!(parse_forecast("uniform:-1:1").is_ok());
        for bad in ["normal:0", "normal:0:-1", "std-t:2", "cauchy", "uniform:1:0"] {
            assert!(parse_forecast(bad).is_err(), "{bad}");
        }
    }
}
