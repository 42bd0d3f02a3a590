//! Weighted Cox model of time to event by trajectory group.
//!
//! Usage: `cargo run --release --example survival_ipw`

use trajcausal::msm::{trajmsm_ipw, IpwConfig, OutcomeFamily, Report};
use trajcausal::sim::{simulate_cohort, DgpSpec};
use trajcausal::{fit_lcga, LcgaConfig};

fn main() -> trajcausal::Result<()> {
    let spec = DgpSpec { survival: true, ..DgpSpec::new(5000, 4, 5) };
    let cohort = simulate_cohort(&spec)?;
    let model = fit_lcga(&cohort, &LcgaConfig::new(2, 1, 1))?;
    let cfg = IpwConfig { family: OutcomeFamily::Survival, ..IpwConfig::default() };
    let (fit, _) = trajmsm_ipw(&cohort, &model, &cfg)?;
    print!("{}", Report::from_fit(&fit).table());
    println!("hazard ratio group2 vs group1: {:.3}", fit.coefficients.last().copied().unwrap_or(f64::NAN).exp());
    Ok(())
}
