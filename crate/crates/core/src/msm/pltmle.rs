use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::gform::check_binary_outcome;
use super::ice::IceDesign;
use super::{all_patterns, class_design_row, msm_working_model, pattern_classes, pattern_index, CounterfactualTable, Estimator, MsmFit, OutcomeFamily};
use crate::error::{Error, Result, Warning};
use crate::glm::{expit, Family, Link, PROB_CLAMP};
use crate::lcga::Classifier;
use crate::linalg;
use crate::paneldata::Cohort;
use crate::weights::{compute_weights, History, Numerator, WeightConfig};

#[derive(Debug, Clone)]
pub struct PltmleConfig {
    /// Zero-based reference class.
    pub reference: usize,
    pub history: History,
    pub include_censor: bool,
}

impl PltmleConfig {
    pub fn new(reference: usize) -> Self {
        PltmleConfig { reference, history: History::Markov, include_censor: true }
    }
}

/// Targeted counterfactual means and the per-individual, per-pattern
/// influence terms `D_i(ā)`.
pub(crate) struct PltmleCore {
    pub psi: Vec<f64>,
    /// `d[i][p]`.
    pub d: Vec<Vec<f64>>,
    /// Fluctuation coefficients per time.
    pub epsilon: Vec<Vec<f64>>,
    pub warnings: Vec<Warning>,
}

/// Solve the pooled fluctuation score `Σ W z (R - expit(η + ε·z)) = 0`.
fn fluctuate(entries: &[(f64, f64, usize, f64)], z: &[Vec<f64>], t: usize) -> Result<Vec<f64>> {
    // entries: (offset η, response R, pattern, weight W)
    let p = z[0].len();
    let objective = |eps: &DVector<f64>| -> f64 {
        entries
            .iter()
            .map(|&(eta, r, pat, w)| {
                let e = eta + z[pat].iter().zip(eps.iter()).map(|(a, b)| a * b).sum::<f64>();
                let m = expit(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                w * (r * m.ln() + (1.0 - r) * (1.0 - m).ln())
            })
            .sum()
    };
    let total_w: f64 = entries.iter().map(|e| e.3).sum();
    let mut eps = DVector::<f64>::zeros(p);
    let mut cur = objective(&eps);
    for _ in 0..100 {
        let mut g = DVector::<f64>::zeros(p);
        let mut h = DMatrix::<f64>::zeros(p, p);
        for &(eta, r, pat, w) in entries {
            let zz = &z[pat];
            let m = expit(eta + zz.iter().zip(eps.iter()).map(|(a, b)| a * b).sum::<f64>());
            for a in 0..p {
                g[a] += w * (r - m) * zz[a];
                for b in 0..p {
                    h[(a, b)] += w * m * (1.0 - m) * zz[a] * zz[b];
                }
            }
        }
        if g.amax() < 1e-12 * total_w.max(1.0) {
            return Ok(eps.iter().copied().collect());
        }
        let step = linalg::solve_spd(&h, &g).ok_or_else(|| Error::Fluctuation {
            time: t + 1,
            reason: "singular information H'WH".into(),
        })?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &eps + &step * scale;
            let val = objective(&cand);
            if val >= cur - 1e-14 * cur.abs() {
                eps = cand;
                cur = val;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || step.amax() * scale < 1e-13 {
            return Ok(eps.iter().copied().collect());
        }
    }
    Err(Error::Fluctuation { time: t + 1, reason: "Newton iterations did not converge".into() })
}

/// Backward pass with a pooled per-time fluctuation, then the influence terms.
pub(crate) fn pltmle_core(
    cohort: &Cohort,
    z: &[Vec<f64>],
    history: History,
    include_censor: bool,
) -> Result<PltmleCore> {
    let (n, k) = (cohort.n(), cohort.k());
    let patterns = all_patterns(k);
    let n_pat = patterns.len();
    let design = IceDesign::new(cohort, history.lags(k));
    let flows = design.flows(&vec![1.0; n]);
    let ws = compute_weights(
        cohort,
        &WeightConfig {
            numerator: Numerator::Unstabilized,
            include_censor: include_censor && cohort.has_censoring(),
            history,
            ..WeightConfig::default()
        },
    )?;
    let cum_w: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut g = 1.0;
            (0..k)
                .map(|t| {
                    if !cohort.present(i, t) {
                        return f64::NAN;
                    }
                    g *= ws.treat_denominator.get(i, t);
                    if ws.include_censor {
                        g *= ws.censor_denominator.get(i, t);
                    }
                    1.0 / g
                })
                .collect()
        })
        .collect();
    let prefix: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..k)
                .map(|t| {
                    let bits: Vec<u8> = (0..=t).map(|s| cohort.a(i, s) as u8).collect();
                    pattern_index(&bits)
                })
                .collect()
        })
        .collect();

    let mut qstar: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    let mut epsilon = vec![Vec::new(); k];
    for t in (0..k).rev() {
        let mut eta_hat: Vec<Vec<f64>> = Vec::with_capacity(n_pat);
        for (pi, pat) in patterns.iter().enumerate() {
            let next = (t + 1 < k).then(|| qstar[t + 1][pi].as_slice());
            let (ybar, sw) = design.aggregate(t, &flows, next);
            let coef = design.fit_cells(t, &ybar, &sw, &format!("pattern {pi}"))?;
            eta_hat.push((0..design.n_cells(t)).map(|c| design.eta(t, c, &coef, pat)).collect());
        }
        // followers of each prefix, collapsed by (prefix, cell, next cell or outcome)
        let mut acc: HashMap<(usize, u32, u32), f64> = HashMap::new();
        for i in 0..n {
            if !design.continues(t, i) {
                continue;
            }
            let c = design.cell(t, i).unwrap() as u32;
            let next = if t + 1 < k { design.cell(t + 1, i).map_or(u32::MAX, |d| d as u32) } else { design.y[i] as u32 };
            *acc.entry((prefix[i][t], c, next)).or_insert(0.0) += cum_w[i][t];
        }
        let mut keys: Vec<_> = acc.into_iter().collect();
        keys.sort_unstable_by_key(|e| e.0);
        let n_suffix = 1usize << (k - 1 - t);
        let mut entries = Vec::with_capacity(keys.len() * n_suffix);
        for ((pre, c, next), w) in keys {
            for s in 0..n_suffix {
                let pi = (pre << (k - 1 - t)) | s;
                let r = match (t + 1 < k, next) {
                    (true, u32::MAX) => 1.0,
                    (true, d) => qstar[t + 1][pi][d as usize],
                    (false, y) => y as f64,
                };
                entries.push((eta_hat[pi][c as usize], r, pi, w));
            }
        }
        let eps = fluctuate(&entries, z, t)?;
        qstar[t] = (0..n_pat)
            .map(|pi| {
                let shift: f64 = z[pi].iter().zip(&eps).map(|(a, b)| a * b).sum();
                eta_hat[pi].iter().map(|e| expit(e + shift)).collect()
            })
            .collect();
        epsilon[t] = eps;
    }
    let psi: Vec<f64> = (0..n_pat).map(|pi| design.marginal(&flows, &qstar[0][pi])).collect();

    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let c0 = design.cell(0, i).unwrap();
            patterns
                .iter()
                .enumerate()
                .map(|(pi, pat)| {
                    let mut v = qstar[0][pi][c0] - psi[pi];
                    for t in 0..k {
                        if cohort.a(i, t) as u8 != pat[t] || !design.continues(t, i) {
                            break;
                        }
                        let ct = design.cell(t, i).unwrap();
                        let r = if t + 1 < k { design.next_value(t, i, &qstar[t + 1][pi]) } else { design.y[i] };
                        v += cum_w[i][t] * (r - qstar[t][pi][ct]);
                    }
                    v
                })
                .collect()
        })
        .collect();
    Ok(PltmleCore { psi, d, epsilon, warnings: ws.warnings })
}

/// `M⁻¹ Σ_ā z(ā) D_i(ā)` with `M = Σ_ā z zᵀ μ'(ā)` for the working model.
pub(crate) fn working_influence(core_d: &[Vec<f64>], z: &[Vec<f64>], beta: &[f64], link: Link) -> Result<Vec<DVector<f64>>> {
    let p = beta.len();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for zz in z {
        let eta: f64 = zz.iter().zip(beta).map(|(a, b)| a * b).sum();
        let deriv = match link {
            Link::Logit => {
                let mu = expit(eta);
                mu * (1.0 - mu)
            }
            Link::Log => eta.exp(),
            Link::Identity => 1.0,
        };
        for a in 0..p {
            for b in 0..p {
                m[(a, b)] += deriv * zz[a] * zz[b];
            }
        }
    }
    let minv = linalg::inverse_spd(&m).ok_or_else(|| Error::SingularInformation("working-model derivative".into()))?;
    Ok(core_d
        .iter()
        .map(|di| {
            let mut acc = DVector::<f64>::zeros(p);
            for (pi, zz) in z.iter().enumerate() {
                for a in 0..p {
                    acc[a] += zz[a] * di[pi];
                }
            }
            &minv * acc
        })
        .collect())
}

/// Pooled LTMLE of the trajectory-group working model with influence-function
/// standard errors.
pub fn trajmsm_pltmle(cohort: &Cohort, classifier: &dyn Classifier, cfg: &PltmleConfig) -> Result<MsmFit> {
    check_binary_outcome(cohort)?;
    let k = cohort.k();
    let n_classes = classifier.n_classes();
    let classes = pattern_classes(classifier, k)?;
    let z: Vec<Vec<f64>> = classes.iter().map(|&c| class_design_row(c, n_classes, cfg.reference)).collect();
    let core = pltmle_core(cohort, &z, cfg.history, cfg.include_censor)?;
    let wm = msm_working_model(&core.psi, &classes, None, n_classes, cfg.reference, Family::Binomial, Link::Logit)?;
    let beta: Vec<f64> = wm.coefficients.iter().copied().collect();
    let inf = working_influence(&core.d, &z, &beta, Link::Logit)?;
    let n = cohort.n() as f64;
    let cov = linalg::sample_covariance(&inf);
    let se = (0..beta.len()).map(|j| (cov[(j, j)] / n).sqrt()).collect();
    let mut fit = MsmFit::assemble(Estimator::Pltmle, OutcomeFamily::Binomial, cfg.reference, cohort.n(), n_classes, beta, se)?;
    fit.influence = Some(inf.iter().map(|v| v.iter().copied().collect()).collect());
    fit.counterfactual = Some(CounterfactualTable { k, means: core.psi, classes });
    fit.fluctuation = Some(core.epsilon);
    fit.warnings = core.warnings;
    Ok(fit)
}
