use super::*;
use crate::glm::{expit, logit};
use crate::lcga::ExplicitClasses;
use crate::paneldata::{Layout, PanelData, Roles};
use crate::sim::{simulate_cohort, Coefficients, DgpSpec};
use crate::weights::{History, Numerator, WeightConfig};

/// Sixteen rows with one binary confounder. Cell sizes (a, l):
/// (0,0)=4, (0,1)=2, (1,0)=2, (1,1)=8 with outcome risks 1/4, 1/2, 1/2, 3/4,
/// which are additive on the logit scale.
fn sixteen_rows() -> Cohort {
    let cells: [(u8, u8, usize, usize); 4] = [(0, 0, 4, 1), (0, 1, 2, 1), (1, 0, 2, 1), (1, 1, 8, 6)];
    let mut csv = String::from("id,a1,l1,y\n");
    let mut id = 0;
    for (a, l, size, events) in cells {
        for r in 0..size {
            id += 1;
            csv.push_str(&format!("{id},{a},{l},{}\n", (r < events) as u8));
        }
    }
    let roles = Roles { treatment: "a".into(), covariates: vec!["l".into()], outcome: Some("y".into()), ..Roles::default() };
    PanelData::read_csv(csv.as_bytes(), roles, Layout::Wide).unwrap().cohort().unwrap()
}

/// Standardization by exhaustive enumeration of the confounder.
fn standardized(c: &Cohort) -> [f64; 2] {
    let mut out = [0.0; 2];
    let n = c.n() as f64;
    for a in 0..2 {
        for l in 0..2 {
            let in_l: Vec<usize> = (0..c.n()).filter(|&i| c.cov(0, i, 0) == l as f64).collect();
            let cell: Vec<usize> = in_l.iter().copied().filter(|&i| c.a(i, 0) == a as f64).collect();
            let risk = cell.iter().map(|&i| c.terminal_outcome(i)).sum::<f64>() / cell.len() as f64;
            out[a] += risk * in_l.len() as f64 / n;
        }
    }
    out
}

#[test]
fn single_time_estimators_equal_standardization() {
    let c = sixteen_rows();
    let [m0, m1] = standardized(&c);
    assert!((m1 - 10.5 / 16.0).abs() < 1e-15 && (m0 - 6.5 / 16.0).abs() < 1e-15);
    // class 1 = treated (reference), class 2 = untreated
    let truth = [logit(m1), logit(m0) - logit(m1)];
    let classes = ExplicitClasses::by_last_treatment(1);
    let close = |b: &[f64]| (b[0] - truth[0]).abs() < 1e-8 && (b[1] - truth[1]).abs() < 1e-8;

    for numerator in [Numerator::Stabilized, Numerator::Unstabilized] {
        let cfg = IpwConfig { weights: WeightConfig { numerator, ..WeightConfig::default() }, ..IpwConfig::default() };
        let (fit, _) = trajmsm_ipw(&c, &classes, &cfg).unwrap();
        assert!(close(&fit.coefficients), "ipw {:?} vs {truth:?}", fit.coefficients);
    }
    let g = trajmsm_gform(&c, &classes, &GformConfig { rep: 5, ..GformConfig::new(0, 1) }).unwrap();
    assert!(close(&g.coefficients), "gform {:?} vs {truth:?}", g.coefficients);
    let t = trajmsm_pltmle(&c, &classes, &PltmleConfig::new(0)).unwrap();
    assert!(close(&t.coefficients), "pltmle {:?} vs {truth:?}", t.coefficients);
    let eps = t.fluctuation.unwrap();
    assert!(eps[0].iter().all(|e| e.abs() < 1e-8));
}

fn default_cohort(n: usize, k: usize, seed: u64) -> Cohort {
    simulate_cohort(&DgpSpec::new(n, k, seed)).unwrap()
}

#[test]
fn influence_function_has_mean_zero() {
    let c = default_cohort(3000, 4, 21);
    let fit = trajmsm_pltmle(&c, &ExplicitClasses::by_last_treatment(4), &PltmleConfig::new(0)).unwrap();
    let inf = fit.influence.unwrap();
    for j in 0..2 {
        let m = inf.iter().map(|r| r[j]).sum::<f64>() / inf.len() as f64;
        assert!(m.abs() < 1e-6, "coefficient {j}: influence mean {m}");
    }
}

/// Under the null every pattern mean estimates the marginal outcome mean.
/// Deviations from the sample mean are averaged over replicates and compared
/// with their Monte Carlo standard error.
#[test]
fn null_effect_means_equal_outcome_mean() {
    let reps = 20;
    let mut dev = vec![Vec::new(); 16];
    for r in 0..reps {
        let spec = DgpSpec { coefficients: Coefficients::null_effect(), ..DgpSpec::new(20000, 4, 100 + r) };
        let c = simulate_cohort(&spec).unwrap();
        let ybar = (0..c.n()).map(|i| c.terminal_outcome(i)).sum::<f64>() / c.n() as f64;
        for (p, m) in gform_pattern_means(&c, History::Markov).unwrap().iter().enumerate() {
            dev[p].push(m - ybar);
        }
    }
    let n = reps as f64;
    for (p, d) in dev.iter().enumerate() {
        let mu = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mu.abs() < 2.0 * sd / n.sqrt(), "pattern {p}: mean deviation {mu}, sd {sd}");
    }
}

#[test]
fn null_effect_contrasts_vanish() {
    let spec = DgpSpec { coefficients: Coefficients::null_effect(), ..DgpSpec::new(20000, 4, 31) };
    let c = simulate_cohort(&spec).unwrap();
    let classes = ExplicitClasses::by_last_treatment(4);
    let g = trajmsm_gform(&c, &classes, &GformConfig { rep: 30, ..GformConfig::new(0, 2) }).unwrap();
    let t = trajmsm_pltmle(&c, &classes, &PltmleConfig::new(0)).unwrap();
    let (i, _) = trajmsm_ipw(&c, &classes, &IpwConfig::default()).unwrap();
    for f in [&g, &t, &i] {
        assert!(f.coefficients[1].abs() < 2.0 * f.se[1], "{:?}: {} se {}", f.estimator, f.coefficients[1], f.se[1]);
    }
}

#[test]
fn estimators_agree_on_default_data() {
    let c = default_cohort(10000, 4, 41);
    let classes = ExplicitClasses::by_last_treatment(4);
    // unstabilized weights target the same uniform pattern weighting as the others
    let ipw_cfg = IpwConfig {
        weights: WeightConfig { numerator: Numerator::Unstabilized, ..WeightConfig::default() },
        ..IpwConfig::default()
    };
    let (i, _) = trajmsm_ipw(&c, &classes, &ipw_cfg).unwrap();
    let g = trajmsm_gform(&c, &classes, &GformConfig { rep: 40, ..GformConfig::new(0, 3) }).unwrap();
    let t = trajmsm_pltmle(&c, &classes, &PltmleConfig::new(0)).unwrap();
    let fits = [&i, &g, &t];
    for a in 0..3 {
        for b in a + 1..3 {
            let d = (fits[a].coefficients[1] - fits[b].coefficients[1]).abs();
            let se = fits[a].se[1].max(fits[b].se[1]);
            assert!(d < 3.0 * se, "{:?} vs {:?}: {d} > 3 x {se}", fits[a].estimator, fits[b].estimator);
        }
    }
}

#[test]
fn reference_choice_reparameterizes_every_estimator() {
    let c = default_cohort(2000, 3, 51);
    let classes = ExplicitClasses::by_last_treatment(3);
    let check = |a: &MsmFit, b: &MsmFit| {
        assert!((a.coefficients[1] + b.coefficients[1]).abs() < 1e-8);
        assert!((a.coefficients[0] + a.coefficients[1] - b.coefficients[0]).abs() < 1e-8);
        assert!((a.se[1] - b.se[1]).abs() < 1e-8 * a.se[1].max(1.0));
        assert_eq!(b.names[1], format!("{}group1", a.estimator.prefix()));
    };
    let (a, _) = trajmsm_ipw(&c, &classes, &IpwConfig::default()).unwrap();
    let (b, _) = trajmsm_ipw(&c, &classes, &IpwConfig { reference: 1, ..IpwConfig::default() }).unwrap();
    check(&a, &b);
    let a = trajmsm_gform(&c, &classes, &GformConfig { rep: 10, ..GformConfig::new(0, 4) }).unwrap();
    let b = trajmsm_gform(&c, &classes, &GformConfig { rep: 10, ..GformConfig::new(1, 4) }).unwrap();
    check(&a, &b);
    let a = trajmsm_pltmle(&c, &classes, &PltmleConfig::new(0)).unwrap();
    let b = trajmsm_pltmle(&c, &classes, &PltmleConfig::new(1)).unwrap();
    check(&a, &b);
}

#[test]
fn well_specified_fluctuation_is_small() {
    let c = default_cohort(50000, 1, 61);
    let fit = trajmsm_pltmle(&c, &ExplicitClasses::by_last_treatment(1), &PltmleConfig::new(0)).unwrap();
    for e in fit.fluctuation.unwrap().iter().flatten() {
        assert!(e.abs() < 0.05, "fluctuation {e}");
    }
}

#[test]
fn working_model_reproduces_class_means() {
    // working model fitted on known means reproduces class means on the risk scale
    let means = [0.1, 0.2, 0.3, 0.4];
    let fit = msm_working_model(&means, &[0, 0, 1, 1], None, 2, 0, crate::glm::Family::Binomial, crate::glm::Link::Logit).unwrap();
    assert!((expit(fit.coefficients[0]) - 0.15).abs() < 1e-10);
    assert!((expit(fit.coefficients[0] + fit.coefficients[1]) - 0.35).abs() < 1e-10);
}

#[test]
fn bootstrap_is_thread_count_invariant() {
    let c = default_cohort(1500, 4, 71);
    let classes = ExplicitClasses::by_last_treatment(4);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| trajmsm_gform(&c, &classes, &GformConfig { rep: 12, ..GformConfig::new(0, 9) }).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.bootstrap, b.bootstrap);
    assert_eq!(a.se, b.se);
}

#[test]
fn naive_regression_is_confounded() {
    let (mut naive_bias, mut ipw_bias) = (0.0, 0.0);
    let reps = 5;
    for r in 0..reps {
        let spec = DgpSpec::new(10000, 4, 500 + r);
        let c = simulate_cohort(&spec).unwrap();
        let model = crate::lcga::fit_lcga(&c, &crate::lcga::LcgaConfig::new(2, 1, r)).unwrap();
        let truth = crate::sim::true_msm_oracle(
            &spec,
            &model,
            &crate::sim::OracleConfig::new(crate::sim::PatternWeighting::Stabilized, 0),
        )
        .unwrap();
        let naive = naive_adjusted(&c, &model, 0).unwrap();
        let (ipw, _) = trajmsm_ipw(&c, &model, &IpwConfig::default()).unwrap();
        naive_bias += (naive.coefficients[1] - truth.beta[1]) / reps as f64;
        ipw_bias += (ipw.coefficients[1] - truth.beta[1]) / reps as f64;
    }
    assert!(naive_bias.abs() > 3.0 * ipw_bias.abs(), "naive {naive_bias} ipw {ipw_bias}");
}
