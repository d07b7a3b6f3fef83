use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use zakharov::experiments::config::Config;
use zakharov::experiments::decoherence::{run_decoherence_cct, run_decoherence_exact};
use zakharov::experiments::diagnostics::run_norms;
use zakharov::experiments::inflation::{run_inflation, InflationSchedule};
use zakharov::experiments::interactions::{run_first_iterate, run_suppression};
use zakharov::experiments::non_c2::run_non_c2;
use zakharov::experiments::selftest::run_selftest;
use zakharov::experiments::{ExperimentReport, Overrides};
use zakharov::Result;

#[derive(Parser)]
#[command(name = "zakharov", version, about = "Ill-posedness experiments for the 1D Zakharov system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Norm inflation sweep from two-box data.
    Inflation(Common),
    /// Decoherence of the exact soliton pair.
    DecohereExact(Common),
    /// Small-dispersion construction at desk-scale parameters.
    DecohereCct(Common),
    /// Growth of the second derivative of the solution map.
    NonC2(Common),
    /// Space-time norm diagnostics.
    Norms(Common),
    /// Quick deterministic run of every experiment.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json, samples.csv and verdicts.txt.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    box_length: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Worker threads for sweep points.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(Config, Overrides)> {
        let config = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let ov = Overrides {
            grid_points: self.grid_points,
            box_length: self.box_length,
            dt: self.dt,
            jobs: self.jobs,
        };
        Ok((config, ov))
    }
}

fn run(command: &Command) -> Result<(ExperimentReport, PathBuf)> {
    let (common, report) = match command {
        Command::Inflation(c) => {
            let (cfg, ov) = c.load()?;
            let i = &cfg.inflation;
            let sched = InflationSchedule::from_config(i)?;
            let main = run_inflation(&sched, &cfg.solver, &ov)?;
            let report = if i.interaction_checks {
                let first = run_first_iterate(&i.check_n_list, sched.data_k, i.s, i.check_time, &ov)?;
                let supp = run_suppression(&i.suppression_n_list, sched.data_k, i.s, i.suppression_time, &ov)?;
                ExperimentReport::merge("inflation", serde_json::to_value(&cfg)?, vec![main, first, supp])
            } else {
                main
            };
            (c, report)
        }
        Command::DecohereExact(c) => {
            let (cfg, ov) = c.load()?;
            (c, run_decoherence_exact(&cfg.decohere_exact, &ov)?)
        }
        Command::DecohereCct(c) => {
            let (cfg, ov) = c.load()?;
            (c, run_decoherence_cct(&cfg.decohere_cct, &cfg.solver, &ov)?)
        }
        Command::NonC2(c) => {
            let (cfg, ov) = c.load()?;
            (c, run_non_c2(&cfg.non_c2, &ov)?)
        }
        Command::Norms(c) => {
            let (cfg, ov) = c.load()?;
            (c, run_norms(&cfg.norms, &ov)?)
        }
        Command::Selftest(c) => {
            let (_, ov) = c.load()?;
            (c, run_selftest(&ov)?)
        }
    };
    Ok((report, common.out.clone()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = run(&cli.command).and_then(|(report, out)| {
        report.write(&out, Some(start.elapsed()))?;
        Ok((report, out))
    });
    match result {
        Ok((report, out)) => {
            print!("{}", report.verdicts_text());
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
