//! Trajectory-group effects by iterated conditional expectations with
//! bootstrap standard errors, plus the per-pattern counterfactual means.
//!
//! Usage: `cargo run --release --example msm_gform`

use trajcausal::msm::{trajmsm_gform, GformConfig, Report};
use trajcausal::sim::{simulate_cohort, DgpSpec};
use trajcausal::{fit_lcga, LcgaConfig};

fn main() -> trajcausal::Result<()> {
    let cohort = simulate_cohort(&DgpSpec::new(5000, 4, 3))?;
    let model = fit_lcga(&cohort, &LcgaConfig::new(2, 1, 1))?;
    let fit = trajmsm_gform(&cohort, &model, &GformConfig { rep: 50, ..GformConfig::new(0, 11) })?;
    print!("{}", Report::from_fit(&fit).table());
    if let Some(cf) = &fit.counterfactual {
        println!("\npattern means:");
        cf.write_csv(std::io::stdout())?;
    }
    Ok(())
}
