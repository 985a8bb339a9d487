//! Seeded Monte Carlo of the central law and the quadratic baseline under
//! random and adversarial disturbances. Every run must respect `J_G ≤ γ²`.

use convex_hinf::cases::CaseStudy;
use convex_hinf::run;
use convex_hinf::sim::{self, DisturbanceKind, DisturbanceModel};
use convex_hinf::Result;

fn main() -> Result<()> {
    for preset in ["fig1", "fig2", "fig3"] {
        let case = CaseStudy::preset(preset)?;
        let cert = &case.certificate;
        let base = run::baseline(&cert.sys, &case.baseline_weights())?;
        let mut models = Vec::new();
        for kind in DisturbanceKind::NOISE {
            models.extend((0..200).map(|seed| DisturbanceModel::new(kind, 0.5, seed)));
        }
        models.extend((0..20).map(|seed| DisturbanceModel::new(DisturbanceKind::WorstCaseCentral, 0.5, seed)));
        models.extend((0..20).map(|seed| DisturbanceModel::new(DisturbanceKind::WorstCaseQuadratic, 0.5, seed)));

        let central = case.central();
        let summary = sim::monte_carlo(cert, &central, &models, 100, Some(&base.worst_case_gain))?;
        println!(
            "{preset}: {} runs, max J_G {:.4} (gamma^2 {:.4}), min J_T {:.2e}, max |u| {:.3}, violations {}",
            summary.runs,
            summary.max_j_g,
            cert.gamma * cert.gamma,
            summary.min_j_t,
            summary.max_abs_u,
            summary.violations
        );
    }
    Ok(())
}
