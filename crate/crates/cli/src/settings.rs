//! Run settings: every option is a named key with a per-subcommand default.
//!
//! Values resolve as flag, then config file, then default. Config files and
//! manifests share one flat `key = value` format, so a manifest can be fed
//! back with `--config` to repeat a run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Stationary,
    ShiftedPrior,
    EssSpacing,
    Logistic,
    Lnas,
    Filter,
    OracleCheck,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Stationary,
        Subcommand::ShiftedPrior,
        Subcommand::EssSpacing,
        Subcommand::Logistic,
        Subcommand::Lnas,
        Subcommand::Filter,
        Subcommand::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Stationary => "stationary",
            Subcommand::ShiftedPrior => "shifted-prior",
            Subcommand::EssSpacing => "ess-spacing",
            Subcommand::Logistic => "logistic",
            Subcommand::Lnas => "lnas",
            Subcommand::Filter => "filter",
            Subcommand::OracleCheck => "oracle-check",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Subcommand::Stationary => {
                "RMSE of one filter on the stationary model, with Kalman and fixed-point overlays"
            }
            Subcommand::ShiftedPrior => "Regularized vs bootstrap filter under a prior shifted away from the truth",
            Subcommand::EssSpacing => "Spacing between consecutive resampling times under an ESS trigger",
            Subcommand::Logistic => "Growth-rate estimation for the logistic map, noisy and noiseless data",
            Subcommand::Lnas => "Parameter estimation for the LNAS growth model and the summary table",
            Subcommand::Filter => "The configured filter on any model, one trace per replicate",
            Subcommand::OracleCheck => "Run the exact linear-Gaussian checks and print pass/fail per property",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Whether the subcommand writes an output directory.
    pub fn writes_output(self) -> bool {
        self != Subcommand::OracleCheck
    }

    pub fn keys(self) -> Vec<Key> {
        use Subcommand::*;
        let stationary = |policy, steps, reps, shift, oracle| {
            vec![
                Key::new("n-particles", "1000", "number of particles"),
                Key::new("policy", policy, "resampling policy: always, never, periodic:P or ess:E"),
                Key::new(
                    "schedule",
                    "rule-of-thumb",
                    "bandwidth: rule-of-thumb, silverman, harmonic[:A], exp-decay[:A], west[:A], none",
                ),
                Key::new("steps", steps, "number of observations"),
                Key::new("replicates", reps, "independent replicates; replicate r uses seed + r"),
                Key::new("seed", "1", "base seed"),
                Key::new("oracle", oracle, "filter noiseless observations"),
                Key::new("ratio", "0.25", "noise variance over prior variance"),
                Key::new("sigma0", "1", "prior variance"),
                Key::new("x0", "0", "true state"),
                Key::new("shift", shift, "prior mean offset from the truth, in prior standard deviations"),
                Key::new("quench", "none", "switch the noise ratio from a step on: STEP:RATIO or none"),
            ]
        };
        match self {
            Stationary => stationary("always", "1000", "20", "1", "false"),
            ShiftedPrior => stationary("ess:0.5", "500", "10", "3", "false"),
            EssSpacing => stationary("ess:0.5", "5000", "5", "1", "true"),
            Logistic => vec![
                Key::new("n-particles", "1000", "number of particles"),
                Key::new("steps", "1000", "number of observations"),
                Key::new("replicates", "10", "independent replicates; replicate r uses seed + r"),
                Key::new("seed", "1", "base seed"),
                Key::new("a-true", "3.33", "true growth rate"),
                Key::new("prior-mean", "3.0", "prior mean of the growth rate"),
                Key::new("prior-sd", "0.3", "prior sd of the growth rate"),
                Key::new("x0", "0.5", "initial population"),
                Key::new("r", "0.1", "lognormal noise level"),
            ],
            Lnas => vec![
                Key::new("n-particles", "1000", "number of particles"),
                Key::new("steps", "100", "number of daily observations"),
                Key::new("replicates", "10", "independent replicates; replicate r uses seed + r"),
                Key::new("seed", "1", "base seed"),
                Key::new("oracle", "false", "filter noiseless observations"),
                Key::new("weather", "synthetic", "weather CSV (day,temp_c,rad_mj) or `synthetic`"),
                Key::new("r", "0.1", "lognormal noise level"),
                Key::new("table-step", "100", "step of the summary table"),
            ],
            Filter => vec![
                Key::new("model", "stationary", "stationary, logistic or lnas"),
                Key::new("n-particles", "1000", "number of particles"),
                Key::new("policy", "ess:0.5", "resampling policy: always, never, periodic:P or ess:E"),
                Key::new(
                    "schedule",
                    "rule-of-thumb",
                    "bandwidth: rule-of-thumb, silverman, harmonic[:A], exp-decay[:A], west[:A], none",
                ),
                Key::new("steps", "100", "number of observations"),
                Key::new("replicates", "1", "independent replicates; replicate r uses seed + r"),
                Key::new("seed", "1", "base seed"),
                Key::new("oracle", "false", "filter noiseless observations"),
                Key::new("ratio", "0.25", "stationary model: noise variance over prior variance"),
                Key::new("r", "0.1", "logistic and lnas: lognormal noise level"),
                Key::new("weather", "synthetic", "lnas: weather CSV or `synthetic`"),
            ],
            OracleCheck => vec![Key::new("seed", "1", "seed of the randomized checks")],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

impl Key {
    fn new(name: &'static str, default: &'static str, help: &'static str) -> Self {
        Self { name, default, help }
    }

    pub fn is_flag(&self) -> bool {
        self.name == "oracle"
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{line}`", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            bail!("line {}: duplicate key `{k}`", i + 1);
        }
    }
    Ok(out)
}

/// Resolved key values of one run, in key order.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub command: Subcommand,
    values: Vec<(&'static str, String)>,
}

impl Settings {
    /// `flags` win over `file`, which wins over the defaults.
    pub fn resolve(
        command: Subcommand,
        mut file: BTreeMap<String, String>,
        flags: &BTreeMap<&'static str, String>,
    ) -> Result<Self> {
        if let Some(c) = file.remove("command") {
            if c != command.name() {
                bail!("config file is for `{c}`, not `{}`", command.name());
            }
        }
        file.remove("version");
        let keys = command.keys();
        if let Some(unknown) = file.keys().find(|k| !keys.iter().any(|key| key.name == k.as_str())) {
            let known: Vec<&str> = keys.iter().map(|k| k.name).collect();
            bail!("unknown config key `{unknown}` for `{}` (known: {})", command.name(), known.join(", "));
        }
        let values = keys
            .iter()
            .map(|k| {
                let v = flags
                    .get(k.name)
                    .cloned()
                    .or_else(|| file.get(k.name).cloned())
                    .unwrap_or_else(|| k.default.to_string());
                (k.name, v)
            })
            .collect();
        Ok(Self { command, values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("`{key}` is not a key of `{}`", self.command.name()))
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse::<T>().map_err(|e| anyhow!("invalid value `{raw}` for --{key}: {e}"))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => bail!("invalid value `{other}` for --{key}: expected true or false"),
        }
    }

    /// The manifest: command, version, then every resolved key.
    pub fn manifest(&self) -> String {
        let mut s = format!("# rpf run manifest\ncommand = {}\nversion = {VERSION}\n", self.command.name());
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn write_manifest(&self, dir: &std::path::Path) -> Result<std::path::PathBuf> {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.manifest()).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
