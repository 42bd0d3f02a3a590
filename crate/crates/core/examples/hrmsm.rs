//! History-restricted analysis of a time-dependent outcome with all three
//! estimators.
//!
//! Usage: `cargo run --release --example hrmsm`

use trajcausal::hrmsm::{trajhrmsm_gform, trajhrmsm_ipw, trajhrmsm_pltmle, HrmsmConfig};
use trajcausal::sim::{simulate_cohort, DgpSpec};
use trajcausal::LcgaConfig;

fn main() -> trajcausal::Result<()> {
    let spec = DgpSpec { timedep_outcome: true, ..DgpSpec::new(4000, 8, 7) };
    let panel = simulate_cohort(&spec)?.to_panel(&spec.roles())?;
    let mut cfg = HrmsmConfig::new(6, LcgaConfig::new(3, 1, 2));
    cfg.rep = 30;
    for fit in [trajhrmsm_ipw(&panel, &cfg)?, trajhrmsm_gform(&panel, &cfg)?, trajhrmsm_pltmle(&panel, &cfg)?] {
        println!("{:?} ({:?} variance), reference group {}", fit.fit.estimator, fit.variance, fit.fit.reference + 1);
        print!("{}", fit.report().table());
        println!("mean treatment per group {:.3?}\n", fit.treatment_means);
    }
    Ok(())
}
