use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use toric_mirror::config::JobConfig;
use toric_mirror::divisor::{box_elements, semipositive_check};
use toric_mirror::error::Error;
use toric_mirror::integrate::{eta_sigma, integrate_cycle};
use toric_mirror::verify::{chain_dump, run_suite, series_csv};

#[derive(Parser)]
#[command(name = "toric-mirror", version, about = "Central charges of mirror cycles for toric orbifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Job configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the config and validate the fan and divisor data.
    Validate(Common),
    /// Charges, group orders, box elements and splittings as JSON.
    FanInfo(Common),
    /// CSV of the localized I-function series at every fixed point.
    Series(Common),
    /// Dump of the configured cycle chain and its boundary check.
    Cycle(Common),
    /// Integral of the configured chain.
    Integrate {
        #[command(flatten)]
        common: Common,
        /// Max cone whose splitting is used.
        #[arg(long, default_value_t = 0)]
        sigma: usize,
    },
    /// Run the verification suite and write the JSON report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run only these checks (repeatable).
        #[arg(long = "check")]
        checks: Vec<String>,
        #[arg(long)]
        parallel: bool,
    },
}

enum Failure {
    Check(String),
    Config(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            e => Failure::Check(e.to_string()),
        }
    }
}

fn load(c: &Common) -> Result<(JobConfig, u64), Failure> {
    let cfg = JobConfig::load(&c.config)?;
    let seed = c.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Internal(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Paths in the output table are relative to the config file.
fn resolve(config: &Path, p: &str) -> PathBuf {
    config.parent().unwrap_or(Path::new(".")).join(p)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate(c) => {
            let (cfg, _) = load(&c)?;
            let mut failures = cfg.fan().validate().failures;
            if let Err(e) = cfg.divisor_data() {
                failures.push(e.to_string());
            }
            if failures.is_empty() {
                emit(c.out.as_deref(), "ok\n")
            } else {
                emit(c.out.as_deref(), &(failures.join("\n") + "\n"))?;
                Err(Failure::Check("validation failed".into()))
            }
        }
        Command::FanInfo(c) => {
            let (cfg, _) = load(&c)?;
            let dd = cfg.divisor_data()?;
            let cones: Vec<_> = (0..dd.fan.max_cones.len())
                .map(|s| {
                    json!({
                        "sigma": s,
                        "rays": dd.fan.max_cones[s],
                        "group_order": dd.group_orders[s].to_string(),
                        "box": box_elements(&dd, s),
                        "eta": eta_sigma(&dd, s)
                            .map(|e| json!(e.eta.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>()))
                            .unwrap_or_else(|e| json!(e.to_string())),
                    })
                })
                .collect();
            let info = json!({
                "n": dd.n(),
                "r": dd.r(),
                "k": dd.k,
                "charges": dd.d.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "semipositive": semipositive_check(&dd),
                "max_cones": cones,
            });
            emit(c.out.as_deref(), &(serde_json::to_string_pretty(&info).expect("json") + "\n"))
        }
        Command::Series(c) => {
            let (cfg, seed) = load(&c)?;
            emit(c.out.as_deref(), &series_csv(&cfg, seed)?)
        }
        Command::Cycle(c) => {
            let (cfg, _) = load(&c)?;
            let (dump, closed) = chain_dump(&cfg)?;
            emit(c.out.as_deref(), &dump)?;
            if closed {
                Ok(())
            } else {
                Err(Failure::Check("chain is not closed".into()))
            }
        }
        Command::Integrate { common: c, sigma } => {
            let (cfg, seed) = load(&c)?;
            let dd = cfg.divisor_data()?;
            let p = cfg.params(&dd, seed)?;
            let s = eta_sigma(&dd, sigma)?;
            let r = integrate_cycle(&cfg.fan(), &cfg.chain()?, &p, &s, &cfg.quadrature)?;
            if let Some(t) = &cfg.output.trace_csv {
                emit(Some(&resolve(&c.config, t)), &r.trace_csv())?;
            }
            let out = json!({ "params": p, "result": r, "budget": r.budget() });
            emit(c.out.as_deref(), &(serde_json::to_string_pretty(&out).expect("json") + "\n"))
        }
        Command::Verify { common: c, checks, parallel } => {
            let (cfg, seed) = load(&c)?;
            for name in &checks {
                if !toric_mirror::config::CHECK_NAMES.contains(&name.as_str()) {
                    return Err(Failure::Config(format!("unknown check {name:?}")));
                }
            }
            let report = run_suite(&cfg, seed, &checks, parallel);
            let out = c.out.clone().or_else(|| cfg.output.report.as_ref().map(|p| resolve(&c.config, p)));
            emit(out.as_deref(), &(report.to_json() + "\n"))?;
            if let Some(p) = &cfg.output.series_csv {
                emit(Some(&resolve(&c.config, p)), &series_csv(&cfg, seed)?)?;
            }
            if let Some(p) = &cfg.output.chain_dump {
                emit(Some(&resolve(&c.config, p)), &chain_dump(&cfg)?.0)?;
            }
            for e in &report.checks {
                eprintln!("{:<18} {:?}  residual {:.3e}  budget {:.3e}", e.name, e.status, e.residual, e.budget);
            }
            if report.summary.ok {
                Ok(())
            } else {
                Err(Failure::Check(format!("{} check(s) failed", report.summary.failed)))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Check(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Config(m))) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(m))) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
        Err(_) => ExitCode::from(3),
    }
}
