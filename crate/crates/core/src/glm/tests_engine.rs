use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::*;

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() - 0.5 })
}

fn relative_gap(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn central_difference(f: impl Fn(&[f64]) -> f64, beta: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..beta.len())
        .map(|j| {
            let mut up = beta.to_vec();
            let mut dn = beta.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn glm_score_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = [
        (Family::Binomial, Link::Logit),
        (Family::Binomial, Link::Log),
        (Family::Poisson, Link::Log),
        (Family::Gaussian, Link::Identity),
    ];
    for (family, link) in cases {
        let x = random_design(&mut rng, 200, 3);
        let beta = match link {
            Link::Log if family == Family::Binomial => vec![-1.5, 0.3, -0.2],
            _ => vec![0.2, -0.4, 0.7],
        };
        let y: Vec<f64> = (0..200)
            .map(|i| {
                let eta: f64 = (0..3).map(|j| x[(i, j)] * beta[j]).sum();
                match family {
                    Family::Binomial => (rng.random::<f64>() < link.inverse(eta)) as u8 as f64,
                    Family::Poisson => (rng.random::<f64>() * 3.0).floor(),
                    Family::Gaussian => eta + rng.random::<f64>() - 0.5,
                }
            })
            .collect();
        let w: Vec<f64> = (0..200).map(|_| 0.5 + rng.random::<f64>()).collect();
        let at = [beta[0] + 0.05, beta[1] - 0.1, beta[2] + 0.1];
        let analytic = score(&x, &y, &w, family, link, &at);
        let numeric = central_difference(|b| log_likelihood(&x, &y, &w, family, link, b), &at);
        let gap = relative_gap(&analytic, &numeric);
        assert!(gap < 1e-5, "{family:?}/{link:?}: {analytic:?} vs {numeric:?}");
    }
}

#[test]
fn cox_score_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 150;
    let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>() - 0.5);
    // rounded times create ties
    let time: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 20.0).round()).collect();
    let event: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() < 0.7) as u8 as f64).collect();
    let w: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let beta = [0.3, -0.6];
    let analytic = cox_score(&time, &event, &x, &w, &beta);
    let numeric = central_difference(|b| cox_log_partial_likelihood(&time, &event, &x, &w, b), &beta);
    assert!(relative_gap(&analytic, &numeric) < 1e-5, "{analytic:?} vs {numeric:?}");
}

#[test]
fn cox_recovers_hazard_ratio_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 2000;
    let group: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let time: Vec<f64> = group
        .iter()
        .map(|&g| Exp::new(if g == 1.0 { 2.0 } else { 1.0 }).unwrap().sample(&mut rng))
        .collect();
    let event = vec![1.0; n];
    let x = DMatrix::from_column_slice(n, 1, &group);
    let cluster: Vec<usize> = (0..n).collect();
    let fit = fit_cox(&time, &event, &x, &vec![1.0; n], &cluster).unwrap();
    let se = fit.vcov_robust[(0, 0)].sqrt();
    assert!((fit.coefficients[0] - 2f64.ln()).abs() < 3.0 * se, "{} vs ln 2 (se {se})", fit.coefficients[0]);
}

#[test]
fn robust_and_model_variance_agree_under_correct_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 5000;
    let x = random_design(&mut rng, n, 3);
    let beta = [-0.3, 1.0, -0.8];
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta: f64 = (0..3).map(|j| x[(i, j)] * beta[j]).sum();
            (rng.random::<f64>() < expit(eta)) as u8 as f64
        })
        .collect();
    let fit = fit_glm(&x, &y, Family::Binomial, Link::Logit, &vec![1.0; n], None).unwrap();
    for j in 0..3 {
        let ratio = fit.vcov_robust[(j, j)] / fit.vcov_model[(j, j)];
        assert!((0.8..=1.25).contains(&ratio), "column {j}: ratio {ratio}");
    }
}
