//! The file-level workflow: load a JSON config, synthesize a certificate,
//! verify it from disk on a denser grid, then simulate and write CSVs.
//!
//! `cargo run --example certificate_roundtrip -- examples/configs/two_state_quadratic.json`

use std::path::PathBuf;

use convex_hinf::config::RunConfig;
use convex_hinf::{run, Result};

fn main() -> Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/fig3.json"));
    let cfg = RunConfig::load(&path)?;
    let out = std::env::temp_dir().join("convex_hinf_roundtrip");

    let synth = run::cmd_synthesize(&cfg, &out, 1.0)?;
    println!("synthesized {} design at gamma = {:.6}", cfg.design.mode(), synth.file.gamma);

    let cert = out.join("certificate.json");
    let (report, design) = run::cmd_verify(&cert, 2.0)?;
    for c in report.conditions.iter().chain(&design) {
        println!("  {:<22} {:>11.3e}  {}", c.name, c.worst, if c.passed { "ok" } else { "FAIL" });
    }

    if let Some(simulation) = &cfg.simulation {
        let manifest = run::cmd_simulate(&cert, simulation, &out, Some(cfg.hash()))?;
        for r in &manifest.runs {
            println!("  {:<10} {:<22} J_G {:?}", r.controller, r.model.kind.label(), r.metrics.j_g);
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}
