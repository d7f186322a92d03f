//! `rpf`: run the particle-filter experiments from the command line.
//!
//! Exit codes: 0 on success, 1 on configuration errors or failed oracle
//! checks, 2 when a filter degenerates.

mod run;
mod settings;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Arg, ArgMatches, Command};

use run::Outcome;
use settings::{parse_config, Settings, Subcommand, VERSION};

const OUTPUT_ROOT_ENV: &str = "RPF_OUTPUT_ROOT";

fn cli() -> Command {
    let mut cmd = Command::new("rpf")
        .version(VERSION)
        .about("Regularized particle filter experiments")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in Subcommand::ALL {
        let mut c = Command::new(sub.name()).about(sub.about());
        for key in sub.keys() {
            let mut arg = Arg::new(key.name).long(key.name).help(format!("{} [default: {}]", key.help, key.default));
            if key.is_flag() {
                arg = arg.num_args(0..=1).require_equals(true).default_missing_value("true").value_name("BOOL");
            } else {
                arg = arg.value_name("VALUE");
            }
            c = c.arg(arg);
        }
        c = c.arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat `key = value` file; flags override its values"),
        );
        if sub.writes_output() {
            c = c.arg(Arg::new("out").long("out").value_name("DIR").help(format!(
                "output directory [default: ${OUTPUT_ROOT_ENV}/<command>-seed<seed>, or ./rpf-output/...]"
            )));
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

fn settings_from(sub: Subcommand, m: &ArgMatches) -> Result<Settings> {
    let file = match m.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file `{path}`"))?;
            parse_config(&text).with_context(|| format!("malformed config file `{path}`"))?
        }
        None => BTreeMap::new(),
    };
    let flags = sub.keys().iter().filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name, v.clone()))).collect();
    Settings::resolve(sub, file, &flags)
}

fn output_dir(settings: &Settings, m: &ArgMatches) -> PathBuf {
    if let Some(out) = m.get_one::<String>("out") {
        return PathBuf::from(out);
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("rpf-output"));
    root.join(format!("{}-seed{}", settings.command.name(), settings.raw("seed")))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let degenerate =
        err.chain().any(|e| matches!(e.downcast_ref::<rpf_core::Error>(), Some(rpf_core::Error::Degeneracy { .. })));
    if degenerate {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (name, m) = matches.subcommand().expect("subcommand is required");
    let sub = Subcommand::from_name(name).expect("registered subcommand");

    let result = settings_from(sub, m).and_then(|settings| {
        let out = sub.writes_output().then(|| output_dir(&settings, m));
        run::execute(&settings, out.as_deref())
    });
    match result {
        Ok(Outcome::Written(paths)) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Ok(Outcome::Checks { failed: 0 }) => ExitCode::SUCCESS,
        Ok(Outcome::Checks { failed }) => {
            eprintln!("error: {failed} oracle check(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
