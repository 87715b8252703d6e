use clap::{Arg, ArgAction, ArgMatches, Command};
use std::path::PathBuf;
use std::process::ExitCode;

use jointrecon::pipeline::{
    apply_overrides, cmd_batch, cmd_evaluate, cmd_reconstruct, cmd_simulate, eval_csv, exit_code, BatchConfig,
    ExperimentConfig, Method, RECONSTRUCTION_KEYS,
};
use jointrecon::{Error, Result};

fn config_flags(cmd: Command, keys: &[&'static str]) -> Command {
    keys.iter().fold(cmd, |cmd, &key| cmd.arg(Arg::new(key).long(key).value_name("VALUE").help_heading("Config")))
}

fn config_file_arg() -> Arg {
    Arg::new("config").long("config").value_name("FILE").help("key = value experiment config")
}

fn cli() -> Command {
    Command::new("jointrecon")
        .about("Joint motion estimation and reconstruction for sub-sampled multi-coil MRI")
        .subcommand_required(true)
        .subcommand(config_flags(
            Command::new("simulate").about("Write a simulated data bundle to output_dir").arg(config_file_arg()),
            &ExperimentConfig::KEYS,
        ))
        .subcommand(config_flags(
            Command::new("reconstruct")
                .about("Reconstruct a bundle with joint, l1-corrupt or l1-clean")
                .arg(Arg::new("bundle").long("bundle").required(true).value_name("DIR"))
                .arg(Arg::new("method").long("method").required(true).value_name("METHOD")),
            &RECONSTRUCTION_KEYS,
        ))
        .subcommand(
            Command::new("evaluate")
                .about("Score reconstructions against the bundle phantom")
                .arg(Arg::new("bundle").long("bundle").required(true).value_name("DIR"))
                .arg(Arg::new("recon").required(true).action(ArgAction::Append).value_name("RECON")),
        )
        .subcommand(config_flags(
            Command::new("batch")
                .about("Simulate, reconstruct and evaluate a grid of instances and accelerations")
                .arg(config_file_arg())
                .arg(Arg::new("accelerations").long("accelerations").default_value("4,8").value_name("LIST"))
                .arg(Arg::new("instances").long("instances").default_value("5").value_name("COUNT"))
                .arg(Arg::new("methods").long("methods").default_value("joint,l1-corrupt,l1-clean").value_name("LIST"))
                .arg(Arg::new("workers").long("workers").default_value("1").value_name("COUNT")),
            &ExperimentConfig::KEYS,
        ))
}

fn overrides(m: &ArgMatches, keys: &[&str]) -> Vec<(String, String)> {
    keys.iter()
        .filter_map(|&k| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn load_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for (k, v) in overrides(m, &ExperimentConfig::KEYS) {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(m: &ArgMatches, key: &str) -> Result<Vec<T>> {
    m.get_one::<String>(key)
        .expect("defaulted")
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn run(matches: ArgMatches) -> Result<()> {
    match matches.subcommand() {
        Some(("simulate", m)) => {
            let cfg = load_config(m)?;
            let manifest = cmd_simulate(&cfg)?;
            println!("wrote {} ({} motion states)", cfg.output_dir.display(), manifest.num_trs);
        }
        Some(("reconstruct", m)) => {
            let bundle = m.get_one::<String>("bundle").expect("required");
            let method: Method = m.get_one::<String>("method").expect("required").parse()?;
            let mut check = ExperimentConfig::default();
            let ov = overrides(m, &RECONSTRUCTION_KEYS);
            apply_overrides(&mut check, &ov)?;
            let out = cmd_reconstruct(bundle, method, &ov)?;
            println!("wrote {}", out.dir.display());
        }
        Some(("evaluate", m)) => {
            let bundle = m.get_one::<String>("bundle").expect("required");
            let recons: Vec<PathBuf> = m.get_many::<String>("recon").expect("required").map(PathBuf::from).collect();
            print!("{}", eval_csv(&cmd_evaluate(bundle, &recons)?));
        }
        Some(("batch", m)) => {
            let base = load_config(m)?;
            let batch = BatchConfig {
                accelerations: parse_list(m, "accelerations")?,
                instances: parse_list::<usize>(m, "instances")?.first().copied().unwrap_or(0),
                methods: parse_list(m, "methods")?,
                workers: parse_list::<usize>(m, "workers")?.first().copied().unwrap_or(0),
                base,
            };
            let rows = cmd_batch(&batch)?;
            println!("wrote {} rows to {}", rows.len(), batch.base.output_dir.join("batch_results.csv").display());
        }
        _ => unreachable!("subcommand required"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
