//! Compare the three estimators with the counterfactual truth over a few
//! simulated replicates.
//!
//! Usage: `cargo run --release --example oracle_check -- [reps] [n]`

use std::time::Instant;

use trajcausal::msm::{trajmsm_gform, trajmsm_ipw, trajmsm_pltmle, GformConfig, IpwConfig, PltmleConfig};
use trajcausal::sim::{simulate_cohort, true_msm_oracle, DgpSpec, OracleConfig, PatternWeighting};
use trajcausal::{fit_lcga, LcgaConfig};

fn main() -> trajcausal::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let reps = args.first().copied().unwrap_or(5);
    let n = args.get(1).copied().unwrap_or(10_000);
    let mut bias = [[0.0f64; 2]; 3];
    let mut covered = [[0usize; 2]; 3];
    let start = Instant::now();
    for r in 0..reps {
        let spec = DgpSpec::new(n, 4, 1000 + r as u64);
        let cohort = simulate_cohort(&spec)?;
        let model = fit_lcga(&cohort, &LcgaConfig::new(2, 1, r as u64))?;
        let stab = true_msm_oracle(&spec, &model, &OracleConfig::new(PatternWeighting::Stabilized, 0))?;
        let unif = true_msm_oracle(&spec, &model, &OracleConfig::new(PatternWeighting::Uniform, 0))?;
        let (ipw, _) = trajmsm_ipw(&cohort, &model, &IpwConfig::default())?;
        let gf = trajmsm_gform(&cohort, &model, &GformConfig { rep: 100, ..GformConfig::new(0, r as u64) })?;
        let tm = trajmsm_pltmle(&cohort, &model, &PltmleConfig::new(0))?;
        for (e, (fit, truth)) in [(&ipw, &stab), (&gf, &unif), (&tm, &unif)].into_iter().enumerate() {
            for j in 0..2 {
                bias[e][j] += (fit.coefficients[j] - truth.beta[j]) / reps as f64;
                covered[e][j] += (fit.ci_lower[j] <= truth.beta[j] && truth.beta[j] <= fit.ci_upper[j]) as usize;
            }
        }
        if reps <= 5 {
            println!(
            "rep {r}: truth stab {:?} unif {:?}\n  ipw {:?} se {:?}\n  gform {:?} se {:?}\n  pltmle {:?} se {:?}",
            stab.beta, unif.beta, ipw.coefficients, ipw.se, gf.coefficients, gf.se, tm.coefficients, tm.se
            );
        }
    }
    for ((name, b), c) in ["ipw", "gform", "pltmle"].iter().zip(bias).zip(covered) {
        let cov = |k: usize| k as f64 / reps as f64;
        println!("{name:>7} mean bias {:+.4} {:+.4}  coverage {:.3} {:.3}", b[0], b[1], cov(c[0]), cov(c[1]));
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
