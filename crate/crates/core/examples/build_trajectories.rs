//! Fit latent-class growth models with one to three groups, compare them by
//! BIC and print the observed treatment means of the chosen model.
//!
//! Usage: `cargo run --release --example build_trajectories`

use trajcausal::cli::group_time_means;
use trajcausal::lcga::Classifier;
use trajcausal::sim::{simulate_cohort, DgpSpec};
use trajcausal::{fit_lcga, LcgaConfig};

fn main() -> trajcausal::Result<()> {
    let cohort = simulate_cohort(&DgpSpec::new(3000, 6, 1))?;
    let mut best = None;
    for groups in 1..=3 {
        let model = fit_lcga(&cohort, &LcgaConfig::new(groups, 2, 7))?;
        println!("J={groups}: loglik {:.2} BIC {:.2} pi {:.3?}", model.loglik, model.bic, model.pi);
        if best.as_ref().is_none_or(|b: &trajcausal::LcgaModel| model.bic < b.bic) {
            best = Some(model);
        }
    }
    let model = best.expect("at least one model");
    println!("\nchosen J={} (group 1 has the highest treatment probability)", model.groups);
    let classes: Vec<Option<usize>> = (0..cohort.n()).map(|i| model.classify_history(cohort.treatment.row(i))).collect();
    println!("time,group,mean");
    for (t, g, m) in group_time_means(&cohort, &classes, model.groups) {
        println!("{t},{g},{m:.3}");
    }
    Ok(())
}
