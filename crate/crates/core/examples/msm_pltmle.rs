//! Pooled longitudinal TMLE of the trajectory-group model with
//! influence-function standard errors.
//!
//! Usage: `cargo run --release --example msm_pltmle`

use trajcausal::msm::{trajmsm_pltmle, PltmleConfig, Report};
use trajcausal::sim::{simulate_cohort, true_msm_oracle, DgpSpec, OracleConfig, PatternWeighting};
use trajcausal::{fit_lcga, LcgaConfig};

fn main() -> trajcausal::Result<()> {
    let spec = DgpSpec::new(10_000, 4, 4);
    let cohort = simulate_cohort(&spec)?;
    let model = fit_lcga(&cohort, &LcgaConfig::new(2, 1, 1))?;
    let fit = trajmsm_pltmle(&cohort, &model, &PltmleConfig::new(0))?;
    let report = Report::from_fit(&fit);
    print!("{}", report.table());
    println!("diagnostics {}", serde_json::Value::Object(report.diagnostics.clone()));
    let truth = true_msm_oracle(&spec, &model, &OracleConfig::new(PatternWeighting::Uniform, 0))?;
    println!("truth {:.4?}", truth.beta);
    Ok(())
}
