use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rpf_core::experiments::{
    exp_ess_spacing, exp_filter, exp_lnas, exp_logistic, exp_shifted_prior, exp_stationary, synthetic_weather,
    ExperimentConfig, LnasScenario, LogisticScenario, MethodResult, Quench, Scenario, StationaryScenario,
};
use rpf_core::kalman::checks::run_oracle_checks;
use rpf_core::models::Weather;
use rpf_core::smc::{BandwidthSchedule, ResamplingPolicy};

use crate::settings::{Settings, Subcommand};

/// What a finished run reports back to `main`.
pub enum Outcome {
    Written(Vec<PathBuf>),
    Checks { failed: usize },
}

pub fn execute(settings: &Settings, out: Option<&Path>) -> Result<Outcome> {
    match settings.command {
        Subcommand::OracleCheck => oracle_check(settings),
        command => {
            let out = out.expect("output directory for a writing subcommand");
            std::fs::create_dir_all(out)
                .with_context(|| format!("cannot create output directory {}", out.display()))?;
            let mut written = match command {
                Subcommand::Stationary => {
                    let report = exp_stationary(&experiment(settings)?, &stationary(settings)?)?;
                    print_final(&report.result);
                    report.write_csv(out)?
                }
                Subcommand::ShiftedPrior => {
                    let report = exp_shifted_prior(&experiment(settings)?, &stationary(settings)?)?;
                    let count = |v: &[bool]| v.iter().filter(|c| **c).count();
                    println!("kalman sd {:.6e}", report.kalman_sd);
                    println!(
                        "rpf collapsed in {}/{} replicates",
                        count(&report.rpf_collapsed),
                        report.rpf_collapsed.len()
                    );
                    println!(
                        "sir collapsed in {}/{} replicates",
                        count(&report.sir_collapsed),
                        report.sir_collapsed.len()
                    );
                    report.write_csv(out)?
                }
                Subcommand::EssSpacing => {
                    let report = exp_ess_spacing(&experiment(settings)?, &stationary(settings)?)?;
                    if let Some(p) = report.predicted_ratio {
                        println!("predicted spacing ratio {p:.4}");
                    }
                    for run in &report.runs {
                        let ratios: Vec<String> = run.ratios.iter().map(|r| format!("{r:.3}")).collect();
                        println!("seed {}: resampled at {:?}, ratios [{}]", run.seed, run.times, ratios.join(", "));
                    }
                    report.write_csv(out)?
                }
                Subcommand::Logistic => {
                    let report = exp_logistic(&experiment(settings)?, &logistic(settings)?)?;
                    for (noisy, oracle) in report.noisy.iter().zip(&report.oracle) {
                        let last = |m: &MethodResult| m.summary.rows.last().map_or(f64::NAN, |r| r.rmse_mean);
                        println!("{}: final rmse {:.6} (oracle {:.6})", noisy.method.label, last(noisy), last(oracle));
                    }
                    report.write_csv(out)?
                }
                Subcommand::Lnas => {
                    let (scenario, synthetic) = lnas(settings)?;
                    let report = exp_lnas(&experiment(settings)?, &scenario)?;
                    println!("table at step {}", report.table_step);
                    for row in &report.table {
                        println!(
                            "{:<13} {:<6} {:<4} {:.6} ({:.6})",
                            row.method, row.parameter, row.statistic, row.value, row.std
                        );
                    }
                    let mut written = report.write_csv(out)?;
                    if synthetic {
                        written.push(write_weather(&scenario.weather, out)?);
                    }
                    written
                }
                Subcommand::Filter => {
                    let scenario = filter_scenario(settings)?;
                    let result = exp_filter(&experiment(settings)?, &scenario)?;
                    print_final(&result);
                    let mut written = result.write_csv(out)?;
                    if let Scenario::Lnas(s) = &scenario {
                        if settings.raw("weather") == "synthetic" {
                            written.push(write_weather(&s.weather, out)?);
                        }
                    }
                    written
                }
                Subcommand::OracleCheck => unreachable!(),
            };
            written.push(settings.write_manifest(out)?);
            Ok(Outcome::Written(written))
        }
    }
}

fn oracle_check(settings: &Settings) -> Result<Outcome> {
    let outcomes = run_oracle_checks(settings.get("seed")?);
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(Outcome::Checks { failed: outcomes.iter().filter(|c| !c.passed).count() })
}

fn print_final(result: &MethodResult) {
    if let Some(last) = result.summary.rows.last() {
        println!(
            "{}: step {} rmse {:.6} ± {:.6}, mean ess {:.1}, plateau {:.6}",
            result.method.label,
            last.step,
            last.rmse_mean,
            last.rmse_std,
            last.ess_mean,
            result.summary.plateau()
        );
    }
}

fn has_key(settings: &Settings, key: &str) -> bool {
    settings.command.keys().iter().any(|k| k.name == key)
}

/// Shared settings. Subcommands without policy keys run their own fixed
/// method sets, so the placeholders below are never used.
fn experiment(settings: &Settings) -> Result<ExperimentConfig> {
    let policy = if has_key(settings, "policy") { settings.get("policy")? } else { ResamplingPolicy::Always };
    let schedule =
        if has_key(settings, "schedule") { settings.get("schedule")? } else { BandwidthSchedule::RuleOfThumb };
    let oracle = if has_key(settings, "oracle") { settings.flag("oracle")? } else { false };
    let config = ExperimentConfig {
        n_particles: settings.get("n-particles")?,
        policy,
        schedule,
        horizon: settings.get("steps")?,
        replicates: settings.get("replicates")?,
        seed: settings.get("seed")?,
        oracle,
    };
    config.validate()?;
    Ok(config)
}

fn parse_quench(raw: &str) -> Result<Option<Quench>> {
    if raw == "none" {
        return Ok(None);
    }
    let Some((step, ratio)) = raw.split_once(':') else {
        bail!("invalid value `{raw}` for --quench: expected STEP:RATIO or none");
    };
    let step = step.trim().parse().with_context(|| format!("invalid quench step in `{raw}`"))?;
    let ratio = ratio.trim().parse().with_context(|| format!("invalid quench ratio in `{raw}`"))?;
    Ok(Some(Quench { step, ratio }))
}

fn stationary(settings: &Settings) -> Result<StationaryScenario> {
    let s = StationaryScenario {
        sigma0: settings.get("sigma0")?,
        ratio: settings.get("ratio")?,
        x0: settings.get("x0")?,
        shift: settings.get("shift")?,
        quench: parse_quench(settings.raw("quench"))?,
    };
    s.validate()?;
    Ok(s)
}

fn logistic(settings: &Settings) -> Result<LogisticScenario> {
    let s = LogisticScenario {
        a_true: settings.get("a-true")?,
        prior_mean: settings.get("prior-mean")?,
        prior_sd: settings.get("prior-sd")?,
        x0: settings.get("x0")?,
        r: settings.get("r")?,
    };
    s.model()?;
    Ok(s)
}

/// Synthetic weather is seeded by the run seed and covers the horizon.
fn weather(settings: &Settings) -> Result<(Weather, bool)> {
    match settings.raw("weather") {
        "synthetic" => Ok((synthetic_weather(settings.get("steps")?, settings.get("seed")?), true)),
        path => {
            let w = Weather::from_path(path).with_context(|| format!("cannot load weather from `{path}`"))?;
            Ok((w, false))
        }
    }
}

fn lnas(settings: &Settings) -> Result<(LnasScenario, bool)> {
    let (weather, synthetic) = weather(settings)?;
    let mut scenario = LnasScenario::new(weather);
    scenario.r = settings.get("r")?;
    if has_key(settings, "table-step") {
        let step: usize = settings.get("table-step")?;
        let steps: usize = settings.get("steps")?;
        if step == 0 || step > steps {
            bail!("--table-step must lie in [1, {steps}], got {step}");
        }
        scenario.table_step = step;
    }
    Ok((scenario, synthetic))
}

fn filter_scenario(settings: &Settings) -> Result<Scenario> {
    match settings.raw("model") {
        "stationary" => {
            let s = StationaryScenario { ratio: settings.get("ratio")?, ..StationaryScenario::default() };
            s.validate()?;
            Ok(Scenario::Stationary(s))
        }
        "logistic" => {
            let s = LogisticScenario { r: settings.get("r")?, ..LogisticScenario::default() };
            s.model()?;
            Ok(Scenario::Logistic(s))
        }
        "lnas" => Ok(Scenario::Lnas(lnas(settings)?.0)),
        other => bail!("invalid value `{other}` for --model: expected stationary, logistic or lnas"),
    }
}

fn write_weather(weather: &Weather, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("weather.csv");
    let file = std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    weather.write_csv(std::io::BufWriter::new(file))?;
    Ok(path)
}
