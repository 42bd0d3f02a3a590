//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p trajcausal --test acceptance`. The Monte Carlo
//! criteria dominate the runtime (a few minutes with optimizations).

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use trajcausal::glm::{cox_log_partial_likelihood, cox_score, expit, fit_cox, fit_glm, log_likelihood, logit, score, Family, Link};
use trajcausal::hrmsm::{pooled_influence_variance, trajhrmsm_gform, trajhrmsm_ipw, trajhrmsm_pltmle, HrmsmConfig, HrmsmFamily, IntervalInfluence};
use trajcausal::lcga::{em_trace, fit_lcga_weighted, Classifier, ExplicitClasses};
use trajcausal::msm::{class_design_row, naive_adjusted, trajmsm_gform, trajmsm_ipw, trajmsm_pltmle, GformConfig, IpwConfig, MsmFit, PltmleConfig, Report};
use trajcausal::paneldata::split_data;
use trajcausal::sim::{simulate_cohort, true_msm_oracle, DgpSpec, OracleConfig, PatternWeighting};
use trajcausal::weights::{compute_weights, WeightConfig};
use trajcausal::{fit_lcga, Cohort, Error, LcgaConfig, Layout, PanelData, Roles};

/// Outcome of one sub-check: pass flag and a short description.
type Check = (bool, String);

fn check(pass: bool, detail: impl Into<String>) -> Check {
    (pass, detail.into())
}

fn report(id: usize, title: &str, checks: Vec<Check>) -> bool {
    let pass = checks.iter().all(|c| c.0);
    let detail: Vec<String> = checks.iter().map(|(ok, d)| if *ok { d.clone() } else { format!("FAILED {d}") }).collect();
    println!("criterion {id} [{title}]: {} | {}", if pass { "PASS" } else { "FAIL" }, detail.join("; "));
    pass
}

// ---------------------------------------------------------------- Monte Carlo

const MC_N: usize = 10_000;
const MC_K: usize = 4;
const BIAS_REPS: usize = 100;
const COVERAGE_REPS: usize = 200;
const GFORM_REP: usize = 100;
const ESTIMATORS: [&str; 3] = ["ipw", "gform", "pltmle"];

struct Replicate {
    /// `[estimator][coefficient]` estimate minus truth.
    error: [[f64; 2]; 3],
    covered: [[bool; 2]; 3],
    naive_error: f64,
}

fn replicate(r: usize) -> Replicate {
    let spec = DgpSpec::new(MC_N, MC_K, 10_000 + r as u64);
    let cohort = simulate_cohort(&spec).unwrap();
    let model = fit_lcga(&cohort, &LcgaConfig::new(2, 1, r as u64)).unwrap();
    // stabilized weights target the observed-transition pattern weighting
    let stab = true_msm_oracle(&spec, &model, &OracleConfig::new(PatternWeighting::Stabilized, 0)).unwrap();
    let unif = true_msm_oracle(&spec, &model, &OracleConfig::new(PatternWeighting::Uniform, 0)).unwrap();
    let (ipw, _) = trajmsm_ipw(&cohort, &model, &IpwConfig::default()).unwrap();
    let gf = trajmsm_gform(&cohort, &model, &GformConfig { rep: GFORM_REP, ..GformConfig::new(0, r as u64) }).unwrap();
    let tm = trajmsm_pltmle(&cohort, &model, &PltmleConfig::new(0)).unwrap();
    let naive = naive_adjusted(&cohort, &model, 0).unwrap();
    let mut out = Replicate { error: [[0.0; 2]; 3], covered: [[false; 2]; 3], naive_error: naive.coefficients[1] - stab.beta[1] };
    for (e, (fit, truth)) in [(&ipw, &stab), (&gf, &unif), (&tm, &unif)].into_iter().enumerate() {
        for j in 0..2 {
            out.error[e][j] = fit.coefficients[j] - truth.beta[j];
            out.covered[e][j] = fit.ci_lower[j] <= truth.beta[j] && truth.beta[j] <= fit.ci_upper[j];
        }
    }
    out
}

fn mean_error(reps: &[Replicate], e: usize, j: usize) -> f64 {
    reps.iter().map(|r| r.error[e][j]).sum::<f64>() / reps.len() as f64
}

fn criterion_1(reps: &[Replicate], elapsed: Duration) -> Vec<Check> {
    let mut out = Vec::new();
    for (e, name) in ESTIMATORS.iter().enumerate() {
        for j in 0..2 {
            let b = mean_error(reps, e, j);
            out.push(check(b.abs() <= 0.03, format!("{name} b{j} bias {b:+.4}")));
        }
    }
    out.push(check(elapsed <= Duration::from_secs(600), format!("{BIAS_REPS} reps in {:.0}s", elapsed.as_secs_f64())));
    out
}

fn criterion_2(reps: &[Replicate], elapsed: Duration) -> Vec<Check> {
    let mut out = Vec::new();
    for (e, name) in ESTIMATORS.iter().enumerate() {
        let range = if *name == "gform" { 0.90..=0.98 } else { 0.91..=0.98 };
        for j in 0..2 {
            let c = reps.iter().filter(|r| r.covered[e][j]).count() as f64 / reps.len() as f64;
            out.push(check(range.contains(&c), format!("{name} b{j} coverage {c:.3}")));
        }
    }
    out.push(check(elapsed <= Duration::from_secs(1800), format!("{COVERAGE_REPS} reps in {:.0}s", elapsed.as_secs_f64())));
    out
}

fn criterion_3(reps: &[Replicate]) -> Vec<Check> {
    let naive = reps.iter().map(|r| r.naive_error).sum::<f64>() / reps.len() as f64;
    let ipw = mean_error(reps, 0, 1);
    vec![check(naive.abs() > 3.0 * ipw.abs(), format!("naive contrast bias {naive:+.4} vs ipw {ipw:+.4}"))]
}

// ------------------------------------------------------------ exact instance

/// Sixteen rows, one binary confounder, cells (a, l, size, events).
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

/// Standardization over every confounder level and treatment value.
fn enumerated_means(c: &Cohort) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (a, slot) in out.iter_mut().enumerate() {
        for l in 0..2 {
            let stratum: Vec<usize> = (0..c.n()).filter(|&i| c.cov(0, i, 0) == l as f64).collect();
            let cell: Vec<usize> = stratum.iter().copied().filter(|&i| c.a(i, 0) == a as f64).collect();
            let risk = cell.iter().map(|&i| c.terminal_outcome(i)).sum::<f64>() / cell.len() as f64;
            *slot += risk * stratum.len() as f64 / c.n() as f64;
        }
    }
    out
}

fn criterion_4() -> Vec<Check> {
    let c = sixteen_rows();
    let [m0, m1] = enumerated_means(&c);
    // class 1 = treated (reference), class 2 = untreated
    let truth = [logit(m1), logit(m0) - logit(m1)];
    let classes = ExplicitClasses::by_last_treatment(1);
    let gap = |f: &MsmFit| f.coefficients.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (ipw, _) = trajmsm_ipw(&c, &classes, &IpwConfig::default()).unwrap();
    let gf = trajmsm_gform(&c, &classes, &GformConfig { rep: 5, ..GformConfig::new(0, 1) }).unwrap();
    let tm = trajmsm_pltmle(&c, &classes, &PltmleConfig::new(0)).unwrap();
    [("ipw", &ipw), ("gform", &gf), ("pltmle", &tm)]
        .into_iter()
        .map(|(name, f)| {
            let g = gap(f);
            check(g < 1e-8, format!("{name} gap {g:.1e}"))
        })
        .collect()
}

// ---------------------------------------------------------------------- LCGA

fn criterion_5() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let p = [0.85, 0.5, 0.1][i % 3];
            (0..7).map(|_| (rng.random::<f64>() < p) as u8 as f64).collect()
        })
        .collect();
    let mut worst_drop = 0.0f64;
    for degree in 1..=2 {
        for restart in 0..5 {
            let tr = em_trace(&rows, &LcgaConfig::new(3, degree, 5), restart);
            for w in tr.windows(2) {
                worst_drop = worst_drop.max(w[0] - w[1]);
            }
        }
    }
    out.push(check(worst_drop <= 1e-10, format!("largest EM decrease {worst_drop:.1e}")));

    let m = fit_lcga_weighted(&rows, &vec![1.0; rows.len()], &LcgaConfig::new(3, 2, 5)).unwrap();
    let row_gap = m.posterior.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    out.push(check(row_gap <= 1e-10, format!("posterior row-sum gap {row_gap:.1e}")));

    let mut sep = vec![vec![1.0; 5]; 100];
    sep.extend(vec![vec![0.0; 5]; 100]);
    let m = fit_lcga_weighted(&sep, &vec![1.0; 200], &LcgaConfig::new(2, 1, 7)).unwrap();
    let pi_gap = (m.pi[0] - 0.5).abs().max((m.pi[1] - 0.5).abs());
    let correct = m.assignments.iter().enumerate().filter(|&(i, &g)| g == usize::from(i >= 100)).count();
    out.push(check(pi_gap <= 1e-3, format!("separated pi gap {pi_gap:.1e}")));
    out.push(check(correct == 200, format!("{correct}/200 classified")));

    let mut guard = true;
    for k in 2..=10usize {
        for j in 1..=6usize {
            let r = fit_lcga_weighted(&sep.iter().map(|r| vec![r[0]; k]).collect::<Vec<_>>(), &vec![1.0; 200], &LcgaConfig::new(j, 1, 1));
            let rejected = matches!(r, Err(Error::Identifiability { .. }));
            guard &= rejected == (2 * j > k);
        }
    }
    out.push(check(guard, "identifiability guard exact for J<=6, K<=10"));
    out
}

// ------------------------------------------------------------------- weights

fn criterion_6() -> Vec<Check> {
    let cohort = simulate_cohort(&DgpSpec::new(5000, 4, 61)).unwrap();
    let ws = compute_weights(&cohort, &WeightConfig::default()).unwrap();
    let mut gap = 0.0f64;
    for i in 0..cohort.n() {
        let prod: f64 = (0..cohort.k()).filter(|&t| cohort.present(i, t)).map(|t| ws.treat_numerator.get(i, t)).product();
        gap = gap.max((ws.sw[i] - ws.w[i] * prod).abs() / ws.sw[i].abs().max(1.0));
    }
    let mean_sw = ws.sw.iter().sum::<f64>() / ws.sw.len() as f64;
    let cens = compute_weights(&cohort, &WeightConfig { include_censor: true, ..WeightConfig::default() }).unwrap();
    let unit = cens.wc.iter().chain(&cens.swc).all(|&v| v == 1.0);
    vec![
        check(gap <= 1e-12, format!("SW vs W x numerator gap {gap:.1e}")),
        check((0.9..=1.1).contains(&mean_sw), format!("mean SW {mean_sw:.4} at n=5000")),
        check(unit, "WC = SWC = 1 without censoring"),
    ]
}

// --------------------------------------------------------------------- HRMSM

fn risks(beta: &[f64], groups: usize, reference: usize, link: fn(f64) -> f64) -> Vec<f64> {
    (0..groups)
        .map(|g| link(class_design_row(g, groups, reference).iter().zip(beta).map(|(a, b)| a * b).sum()))
        .collect()
}

/// Direct evaluation of the pooled variance display, one entry at a time.
fn brute_display(parts: &[IntervalInfluence]) -> DMatrix<f64> {
    let p = parts[0].values[0].len();
    let mut ids: Vec<usize> = parts.iter().flat_map(|x| x.ids.clone()).collect();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len() as f64;
    DMatrix::from_fn(p, p, |a, b| {
        let mut s = 0.0;
        for x in parts {
            let m = x.values.len() as f64;
            let ma = x.values.iter().map(|v| v[a]).sum::<f64>() / m;
            let mb = x.values.iter().map(|v| v[b]).sum::<f64>() / m;
            s += m * x.values.iter().map(|v| (v[a] - ma) * (v[b] - mb)).sum::<f64>() / (m - 1.0);
        }
        for d in 0..parts.len() {
            for e in d + 1..parts.len() {
                let common: Vec<(usize, usize)> = parts[d]
                    .ids
                    .iter()
                    .enumerate()
                    .filter_map(|(r, id)| parts[e].ids.iter().position(|x| x == id).map(|q| (r, q)))
                    .collect();
                let m = common.len() as f64;
                let cov = |u: usize, v: usize| {
                    let mu = common.iter().map(|&(r, _)| parts[d].values[r][u]).sum::<f64>() / m;
                    let mv = common.iter().map(|&(_, q)| parts[e].values[q][v]).sum::<f64>() / m;
                    common.iter().map(|&(r, q)| (parts[d].values[r][u] - mu) * (parts[e].values[q][v] - mv)).sum::<f64>() / (m - 1.0)
                };
                s += m * (cov(a, b) + cov(b, a));
            }
        }
        s / (n * n)
    })
}

fn criterion_7() -> Vec<Check> {
    let mut out = Vec::new();
    let mut split_ok = true;
    for k in 2..=10usize {
        let spec = DgpSpec { timedep_outcome: true, ..DgpSpec::new(40, k, k as u64) };
        let panel = simulate_cohort(&spec).unwrap().to_panel(&spec.roles()).unwrap();
        for s in 2..=k {
            let set = split_data(&panel, s).unwrap();
            split_ok &= set.n_intervals() == k - s + 1;
            for d in 0..set.n_intervals() {
                let slice = set.slice(d);
                let ids = slice.distinct_ids().len();
                split_ok &= slice.time_labels().len() == s && slice.n_rows() == s * ids;
            }
        }
    }
    out.push(check(split_ok, "K-s+1 intervals of size s for 2<=s<=K<=10"));

    let spec = DgpSpec { timedep_outcome: true, ..DgpSpec::new(2000, 4, 8) };
    let data = simulate_cohort(&spec).unwrap().to_panel(&spec.roles()).unwrap();
    let cohort = data.cohort().unwrap();
    let mut cfg = HrmsmConfig::new(4, LcgaConfig::new(2, 1, 5));
    cfg.family = HrmsmFamily::Binomial;
    cfg.rep = 5;
    let gap = |h: &[f64], m: &[f64], r: usize| {
        risks(h, 2, r, f64::exp).iter().zip(risks(m, 2, r, expit)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let h = trajhrmsm_ipw(&data, &cfg).unwrap();
    let r = h.fit.reference;
    let (m, _) = trajmsm_ipw(&cohort, &h.model, &IpwConfig { reference: r, ..IpwConfig::default() }).unwrap();
    let g_ipw = gap(&h.fit.coefficients, &m.coefficients, r);
    let h = trajhrmsm_gform(&data, &cfg).unwrap();
    let m = trajmsm_gform(&cohort, &h.model, &GformConfig { rep: 5, ..GformConfig::new(r, 1) }).unwrap();
    let g_gf = gap(&h.fit.coefficients, &m.coefficients, r);
    let h = trajhrmsm_pltmle(&data, &cfg).unwrap();
    let m = trajmsm_pltmle(&cohort, &h.model, &PltmleConfig::new(r)).unwrap();
    let g_tm = gap(&h.fit.coefficients, &m.coefficients, r);
    for (name, g) in [("ipw", g_ipw), ("gform", g_gf), ("pltmle", g_tm)] {
        out.push(check(g < 1e-8, format!("D=1 {name} risk gap {g:.1e}")));
    }

    let mut var_gap = 0.0f64;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts: Vec<IntervalInfluence> = [(0usize, 40usize), (5, 38), (12, 50)]
            .iter()
            .map(|&(lo, hi)| IntervalInfluence {
                ids: (lo..hi).rev().collect(),
                values: (lo..hi).map(|_| DVector::from_fn(3, |_, _| rng.random::<f64>() - 0.3)).collect(),
            })
            .collect();
        let a = pooled_influence_variance(&parts).unwrap();
        var_gap = var_gap.max((a - brute_display(&parts)).abs().max());
    }
    out.push(check(var_gap < 1e-12, format!("variance display gap {var_gap:.1e}")));
    out
}

// ----------------------------------------------------------------------- GLM

fn relative_gap(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0)).fold(0.0, f64::max)
}

fn central_difference(f: impl Fn(&[f64]) -> f64, beta: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..beta.len())
        .map(|j| {
            let (mut up, mut dn) = (beta.to_vec(), beta.to_vec());
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn criterion_8() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = [
        (Family::Binomial, Link::Logit),
        (Family::Binomial, Link::Log),
        (Family::Poisson, Link::Log),
        (Family::Gaussian, Link::Identity),
    ];
    for (family, link) in cases {
        let n = 300;
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() - 0.5 });
        let beta = if family == Family::Binomial && link == Link::Log { [-1.5, 0.3, -0.2] } else { [0.2, -0.4, 0.7] };
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let eta: f64 = (0..3).map(|j| x[(i, j)] * beta[j]).sum();
                match family {
                    Family::Binomial => (rng.random::<f64>() < link.inverse(eta)) as u8 as f64,
                    Family::Poisson => (rng.random::<f64>() * 3.0).floor(),
                    Family::Gaussian => eta + rng.random::<f64>() - 0.5,
                }
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
        let at = [beta[0] + 0.05, beta[1] - 0.1, beta[2] + 0.1];
        let analytic = score(&x, &y, &w, family, link, &at);
        let numeric = central_difference(|b| log_likelihood(&x, &y, &w, family, link, b), &at);
        let g = relative_gap(&analytic, &numeric);
        out.push(check(g < 1e-5, format!("{family:?}/{link:?} gradient gap {g:.1e}")));
    }
    {
        let n = 200;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>() - 0.5);
        let time: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 20.0).round()).collect();
        let event: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() < 0.7) as u8 as f64).collect();
        let w: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
        let beta = [0.3, -0.6];
        let analytic = cox_score(&time, &event, &x, &w, &beta);
        let numeric = central_difference(|b| cox_log_partial_likelihood(&time, &event, &x, &w, b), &beta);
        let g = relative_gap(&analytic, &numeric);
        out.push(check(g < 1e-5, format!("Cox gradient gap {g:.1e}")));
    }
    {
        // A=0: 20/100 events, A=1: 60/100 events
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for a in 0..2 {
            let events = if a == 0 { 20 } else { 60 };
            for k in 0..100 {
                rows.push([1.0, a as f64]);
                y.push((k < events) as u8 as f64);
            }
        }
        let x = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
        let fit = fit_glm(&x, &y, Family::Binomial, Link::Logit, &vec![1.0; y.len()], None).unwrap();
        let b0 = (0.2f64 / 0.8).ln();
        let b1 = (0.6f64 / 0.4).ln() - b0;
        let g = (fit.coefficients[0] - b0).abs().max((fit.coefficients[1] - b1).abs());
        out.push(check(g < 1e-6, format!("2x2 logit gap {g:.1e}")));
    }
    {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 2000;
        let group: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let time: Vec<f64> = group.iter().map(|&g| Exp::new(if g == 1.0 { 2.0 } else { 1.0 }).unwrap().sample(&mut rng)).collect();
        let w: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
        let x = DMatrix::from_column_slice(n, 1, &group);
        let cluster: Vec<usize> = (0..n).collect();
        let fit = fit_cox(&time, &vec![1.0; n], &x, &w, &cluster).unwrap();
        let se = fit.vcov_robust[(0, 0)].sqrt();
        let z = (fit.coefficients[0] - 2f64.ln()) / se;
        out.push(check(z.abs() < 3.0, format!("weighted Cox log HR {:.4} ({z:+.2} robust SE from ln 2)", fit.coefficients[0])));
    }
    out
}

// --------------------------------------------------------------- determinism

fn pipeline_bytes() -> Vec<u8> {
    let cohort = simulate_cohort(&DgpSpec::new(1500, 4, 91)).unwrap();
    let model = fit_lcga(&cohort, &LcgaConfig::new(2, 1, 3)).unwrap();
    let (ipw, _) = trajmsm_ipw(&cohort, &model, &IpwConfig::default()).unwrap();
    let gf = trajmsm_gform(&cohort, &model, &GformConfig { rep: 10, ..GformConfig::new(0, 4) }).unwrap();
    let tm = trajmsm_pltmle(&cohort, &model, &PltmleConfig::new(0)).unwrap();
    let spec = DgpSpec { timedep_outcome: true, ..DgpSpec::new(1500, 5, 92) };
    let panel = simulate_cohort(&spec).unwrap().to_panel(&spec.roles()).unwrap();
    let mut hcfg = HrmsmConfig::new(4, LcgaConfig::new(2, 1, 6));
    hcfg.rep = 6;
    let h = trajhrmsm_gform(&panel, &hcfg).unwrap();
    let mut bytes = serde_json::to_vec(&model).unwrap();
    for f in [&ipw, &gf, &tm] {
        bytes.extend(Report::from_fit(f).to_json().unwrap().into_bytes());
        bytes.extend(serde_json::to_vec(&f.bootstrap).unwrap());
    }
    bytes.extend(h.report().to_json().unwrap().into_bytes());
    // class membership of every pattern, as a byte-level cross-check of the model
    bytes.extend((0..16u8).map(|p| model.classify(&[p & 8, p & 4, p & 2, p & 1].map(|b| (b > 0) as u8)) as u8));
    bytes
}

fn criterion_9() -> Vec<Check> {
    let run = |threads: usize| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(pipeline_bytes);
    let a = run(1);
    let b = run(1);
    let c = run(4);
    vec![check(a == b, format!("rerun identical ({} bytes)", a.len())), check(a == c, "1 vs 4 threads identical")]
}

fn main() {
    // the harness passes its own flags; listing must not run the suite
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut reps = Vec::with_capacity(COVERAGE_REPS);
    let mut bias_elapsed = Duration::ZERO;
    for r in 0..COVERAGE_REPS {
        reps.push(replicate(r));
        if r + 1 == BIAS_REPS {
            bias_elapsed = start.elapsed();
        }
    }
    let mc_elapsed = start.elapsed();
    let results = [
        report(1, "oracle bias", criterion_1(&reps[..BIAS_REPS], bias_elapsed)),
        report(2, "coverage", criterion_2(&reps, mc_elapsed)),
        report(3, "naive regression bias", criterion_3(&reps[..BIAS_REPS])),
        report(4, "single-time exactness", criterion_4()),
        report(5, "trajectory model", criterion_5()),
        report(6, "weight identities", criterion_6()),
        report(7, "history-restricted structure", criterion_7()),
        report(8, "regression engine", criterion_8()),
        report(9, "determinism", criterion_9()),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed in {:.0}s", results.len(), start.elapsed().as_secs_f64());
    if passed != results.len() {
        std::process::exit(1);
    }
}
