use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convex_hinf::central::{ConditionMargin, VerifyReport};
use convex_hinf::config::{RunConfig, SimulationSpec};
use convex_hinf::error::{HinfError, Result};
use convex_hinf::run;

/// H∞ synthesis, verification and simulation with nonquadratic costs.
#[derive(Parser)]
#[command(name = "convex-hinf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and verify a certificate from a run configuration.
    Synthesize {
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        grid_scale: f64,
    },
    /// Re-check a certificate file, optionally on denser grids.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        grid_scale: f64,
    },
    /// Simulate the central controller against the quadratic baseline.
    Simulate {
        #[arg(long)]
        certificate: PathBuf,
        /// Run configuration holding the `simulation` block.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a case-study preset end to end.
    Reproduce {
        #[arg(long, value_parser = ["fig1", "fig2", "fig3"])]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        grid_scale: f64,
    },
}

fn print_margins(report: &VerifyReport, design: &[ConditionMargin]) {
    println!("gamma {}", report.gamma);
    for c in report.conditions.iter().chain(design) {
        let status = if c.passed { "ok  " } else { "FAIL" };
        println!("{status} {:<24} worst {:>12.4e}  tol {:>8.1e}  samples {}", c.name, c.worst, c.tolerance, c.samples);
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synthesize { config, preset, out, grid_scale } => {
            let cfg = match (config, preset) {
                (Some(path), _) => RunConfig::load(&path)?,
                (None, Some(name)) => RunConfig::preset(&name)?,
                (None, None) => unreachable!("clap enforces one of --config and --preset"),
            };
            let dir = run::output_dir(out.as_deref(), Some(&cfg))?;
            let outcome = run::cmd_synthesize(&cfg, &dir, grid_scale);
            let file = match &outcome {
                Ok(s) => Some(&s.file),
                Err(_) => None,
            };
            if let Some(f) = file {
                print_margins(&f.report, &f.design_conditions);
                println!("certificate written to {}", dir.join("certificate.json").display());
            }
            outcome.map(|_| ())
        }
        Command::Verify { certificate, grid_scale } => {
            let (report, design) = run::cmd_verify(&certificate, grid_scale)?;
            print_margins(&report, &design);
            let failed: Vec<&str> = report
                .failures()
                .into_iter()
                .chain(design.iter().filter(|c| !c.passed))
                .map(|c| c.name.as_str())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(HinfError::Infeasible(format!("violated conditions: {}", failed.join(", "))))
            }
        }
        Command::Simulate { certificate, config, out, seed } => {
            let cfg = RunConfig::load(&config)?;
            let sim: SimulationSpec = cfg
                .simulation
                .clone()
                .ok_or_else(|| HinfError::Config("config has no `simulation` block".into()))?;
            let sim = match seed {
                Some(s) => sim.reseeded(s),
                None => sim,
            };
            let dir = run::output_dir(out.as_deref(), Some(&cfg))?;
            let manifest = run::cmd_simulate(&certificate, &sim, &dir, Some(cfg.hash()))?;
            for r in &manifest.runs {
                let jg = r.metrics.j_g.map_or("undefined".to_string(), |v| format!("{v:.6}"));
                println!("{:<9} {:<22} J_G {jg:>10}  J_T {:>12.4e}  max|u| {:.4}", r.controller, r.model.kind.label(), r.metrics.j_t, r.metrics.max_abs_u);
            }
            println!("manifest written to {}", dir.join("manifest.json").display());
            Ok(())
        }
        Command::Reproduce { preset, out, seed, grid_scale } => {
            let summary = run::cmd_reproduce(&preset, &out, seed, grid_scale)?;
            println!("{preset}: certificate passed {}", summary.certificate_passed);
            println!("closed-form law max deviation {:.3e}", summary.closed_form_max_deviation);
            println!("outputs in {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
