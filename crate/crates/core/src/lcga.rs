//! Latent-class growth analysis for binary treatment histories.
//!
//! Each individual belongs to one of `J` latent groups; within group `j` the
//! treatment at time `t` is Bernoulli with `logit p_jt = θ_j · (1, x_t, …, x_t^deg)`
//! where `x_t` is the centred time index. Groups are mixed with proportions
//! `π`. Estimation is EM over random restarts.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::glm::{expit, PROB_CLAMP};
use crate::paneldata::Cohort;

#[derive(Debug, Clone, PartialEq)]
pub struct LcgaConfig {
    pub groups: usize,
    /// 1 linear, 2 quadratic, 3 cubic.
    pub degree: usize,
    pub n_starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl LcgaConfig {
    pub fn new(groups: usize, degree: usize, seed: u64) -> Self {
        LcgaConfig { groups, degree, n_starts: 20, max_iter: 500, tol: 1e-8, seed }
    }
}

/// Parse `linear|quadratic|cubic` (or 1..3).
pub fn parse_degree(s: &str) -> Result<usize> {
    match s {
        "linear" | "1" => Ok(1),
        "quadratic" | "2" => Ok(2),
        "cubic" | "3" => Ok(3),
        other => Err(Error::Config(format!("degree_traj '{other}' must be linear, quadratic or cubic"))),
    }
}

/// A fitted (or hand-specified) trajectory mixture. Group indices are
/// zero-based internally; reports print them one-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LcgaModel {
    #[serde(rename = "J")]
    pub groups: usize,
    pub degree: usize,
    /// Number of time points.
    pub k: usize,
    /// Centre subtracted from the one-based time index.
    pub center: f64,
    pub pi: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub loglik: f64,
    pub bic: f64,
    pub n_individuals: usize,
    pub class_counts: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub posterior: Vec<Vec<f64>>,
    #[serde(skip)]
    pub assignments: Vec<usize>,
    #[serde(skip)]
    pub warnings: Vec<Warning>,
}

fn time_design(k: usize, degree: usize) -> (f64, Vec<Vec<f64>>) {
    let center = (k as f64 + 1.0) / 2.0;
    let rows = (1..=k)
        .map(|t| {
            let x = t as f64 - center;
            (0..=degree).map(|p| x.powi(p as i32)).collect()
        })
        .collect();
    (center, rows)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LcgaModel {
    /// Model with given coefficients and proportions, not fitted to data.
    pub fn new(k: usize, degree: usize, theta: Vec<Vec<f64>>, pi: Vec<f64>) -> Result<Self> {
        if theta.len() != pi.len() || theta.iter().any(|t| t.len() != degree + 1) {
            return Err(Error::Shape("theta must be J x (degree + 1) with J = len(pi)".into()));
        }
        let (center, _) = time_design(k, degree);
        Ok(LcgaModel {
            groups: pi.len(),
            degree,
            k,
            center,
            pi,
            theta,
            loglik: f64::NAN,
            bic: f64::NAN,
            n_individuals: 0,
            class_counts: Vec::new(),
            iterations: 0,
            converged: true,
            posterior: Vec::new(),
            assignments: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn n_params(&self) -> usize {
        self.groups * (self.degree + 1) + self.groups - 1
    }

    /// `P(A_t = 1 | group j)` for zero-based `t`.
    pub fn group_probability(&self, j: usize, t: usize) -> f64 {
        let x = (t + 1) as f64 - self.center;
        let eta: f64 = self.theta[j].iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum();
        expit(eta)
    }

    /// Posterior group membership for each pattern; `NaN` entries are
    /// treated as unobserved.
    pub fn posterior_probs(&self, patterns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let logp = self.log_prob_table();
        patterns
            .iter()
            .map(|p| {
                if p.len() != self.k {
                    return Err(Error::Shape(format!("pattern has {} entries, model expects {}", p.len(), self.k)));
                }
                if p.iter().any(|&a| !a.is_nan() && a != 0.0 && a != 1.0) {
                    return Err(Error::Shape("pattern entries must be 0, 1 or missing".into()));
                }
                Ok(self.posterior_row(p, &logp).0)
            })
            .collect()
    }

    /// Most probable group (ties go to the lower index).
    pub fn predict_class(&self, pattern: &[u8]) -> usize {
        let p: Vec<f64> = pattern.iter().map(|&a| a as f64).collect();
        argmax(&self.posterior_row(&p, &self.log_prob_table()).0)
    }

    /// Per-time `(log p, log(1-p))` for every group.
    fn log_prob_table(&self) -> Vec<Vec<(f64, f64)>> {
        (0..self.groups)
            .map(|j| {
                (0..self.k)
                    .map(|t| {
                        let p = self.group_probability(j, t).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                        (p.ln(), (1.0 - p).ln())
                    })
                    .collect()
            })
            .collect()
    }

    /// Posterior row and the log marginal likelihood of the pattern.
    fn posterior_row(&self, pattern: &[f64], logp: &[Vec<(f64, f64)>]) -> (Vec<f64>, f64) {
        let mut lj: Vec<f64> = (0..self.groups)
            .map(|j| {
                let mut s = self.pi[j].max(f64::MIN_POSITIVE).ln();
                for (t, &a) in pattern.iter().enumerate() {
                    if a == 1.0 {
                        s += logp[j][t].0;
                    } else if a == 0.0 {
                        s += logp[j][t].1;
                    }
                }
                s
            })
            .collect();
        let m = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = lj.iter().map(|v| (v - m).exp()).sum();
        let lse = m + total.ln();
        for v in lj.iter_mut() {
            *v = (*v - lse).exp();
        }
        (lj, lse)
    }

    /// Observed-data log-likelihood of the given patterns.
    pub fn loglik_of(&self, patterns: &[Vec<f64>]) -> f64 {
        let logp = self.log_prob_table();
        patterns.iter().map(|p| self.posterior_row(p, &logp).1).sum()
    }

    /// Mean fitted treatment probability per group, used for ordering.
    pub fn mean_probability(&self, j: usize) -> f64 {
        (0..self.k).map(|t| self.group_probability(j, t)).sum::<f64>() / self.k as f64
    }

    pub fn bic_value(&self) -> f64 {
        -2.0 * self.loglik + self.n_params() as f64 * (self.n_individuals as f64).ln()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("model serializes")
    }
}

/// Maps a complete treatment pattern to a zero-based class.
pub trait Classifier: Sync {
    fn n_classes(&self) -> usize;
    fn classify(&self, pattern: &[u8]) -> usize;
    /// Class of an observed history; `NaN` marks unobserved times.
    fn classify_history(&self, history: &[f64]) -> Option<usize> {
        if history.iter().any(|v| v.is_nan()) {
            return None;
        }
        let p: Vec<u8> = history.iter().map(|&v| v as u8).collect();
        Some(self.classify(&p))
    }
}

impl Classifier for LcgaModel {
    fn n_classes(&self) -> usize {
        self.groups
    }
    fn classify(&self, pattern: &[u8]) -> usize {
        self.predict_class(pattern)
    }
    fn classify_history(&self, history: &[f64]) -> Option<usize> {
        Some(argmax(&self.posterior_row(history, &self.log_prob_table()).0))
    }
}

/// Classes given by an explicit pattern-to-class table.
#[derive(Debug, Clone)]
pub struct ExplicitClasses {
    n_classes: usize,
    table: HashMap<Vec<u8>, usize>,
}

impl ExplicitClasses {
    pub fn new(n_classes: usize, table: impl IntoIterator<Item = (Vec<u8>, usize)>) -> Self {
        ExplicitClasses { n_classes, table: table.into_iter().collect() }
    }

    /// One class per value of the treatment at the last time.
    pub fn by_last_treatment(k: usize) -> Self {
        let table = (0..1usize << k).map(|p| {
            let pat = crate::msm::pattern_bits(p, k);
            let last = pat[k - 1] as usize;
            (pat, 1 - last)
        });
        ExplicitClasses::new(2, table)
    }
}

impl Classifier for ExplicitClasses {
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn classify(&self, pattern: &[u8]) -> usize {
        *self.table.get(pattern).expect("pattern missing from class table")
    }
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = j;
        }
    }
    best
}

/// Class label per row of a posterior matrix.
pub fn assign_groups(posterior: &[Vec<f64>]) -> Vec<usize> {
    posterior.iter().map(|r| argmax(r)).collect()
}

/// Unique treatment patterns (with missing entries) and their multiplicities.
struct Collapsed {
    patterns: Vec<Vec<f64>>,
    count: Vec<f64>,
    row_pattern: Vec<usize>,
}

fn collapse(rows: &[Vec<f64>], mult: &[f64]) -> Collapsed {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut patterns = Vec::new();
    let mut count = Vec::new();
    let mut row_pattern = Vec::with_capacity(rows.len());
    for (r, m) in rows.iter().zip(mult) {
        let key: Vec<u64> = r.iter().map(|v| if v.is_nan() { 2 } else { *v as u64 }).collect();
        let u = *index.entry(key).or_insert_with(|| {
            patterns.push(r.clone());
            count.push(0.0);
            patterns.len() - 1
        });
        count[u] += m;
        row_pattern.push(u);
    }
    Collapsed { patterns, count, row_pattern }
}

/// Maximise a weighted binomial log-likelihood over K time rows with Newton
/// steps and step halving. `ones[t]` and `total[t]` are weighted counts.
fn logistic_newton(x: &[Vec<f64>], ones: &[f64], total: &[f64], start: &[f64]) -> Vec<f64> {
    let p = start.len();
    let objective = |b: &[f64]| -> f64 {
        x.iter()
            .enumerate()
            .map(|(t, row)| {
                let pr = expit(dot(row, b)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                ones[t] * pr.ln() + (total[t] - ones[t]) * (1.0 - pr).ln()
            })
            .sum()
    };
    let mut beta = start.to_vec();
    let mut cur = objective(&beta);
    for _ in 0..50 {
        let mut g = nalgebra::DVector::<f64>::zeros(p);
        let mut h = nalgebra::DMatrix::<f64>::zeros(p, p);
        for (t, row) in x.iter().enumerate() {
            if total[t] <= 0.0 {
                continue;
            }
            let pr = expit(dot(row, &beta));
            let r = ones[t] - total[t] * pr;
            let w = total[t] * pr * (1.0 - pr);
            for a in 0..p {
                g[a] += r * row[a];
                for b in 0..p {
                    h[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        if g.amax() < 1e-10 {
            break;
        }
        // a tiny ridge keeps the step finite when a group sits at 0 or 1
        for a in 0..p {
            h[(a, a)] += 1e-10;
        }
        let Some(step) = crate::linalg::solve_spd(&h, &g) else { break };
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let val = objective(&cand);
            if val >= cur {
                let gain = val - cur;
                beta = cand;
                cur = val;
                moved = gain > 1e-14 * (1.0 + cur.abs());
                break;
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    beta
}

struct EmRun {
    theta: Vec<Vec<f64>>,
    pi: Vec<f64>,
    loglik: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn em_run(data: &Collapsed, cfg: &LcgaConfig, k: usize, restart: usize) -> EmRun {
    let j_count = cfg.groups;
    let (center, x) = time_design(k, cfg.degree);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);

    // Dirichlet(1, ..., 1) responsibilities per distinct pattern
    let n_unique = data.patterns.len();
    let resp: Vec<Vec<f64>> = (0..n_unique)
        .map(|_| {
            let draws: Vec<f64> = (0..j_count).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = draws.iter().sum();
            draws.iter().map(|d| d / s).collect()
        })
        .collect();
    let mut model = LcgaModel {
        groups: j_count,
        degree: cfg.degree,
        k,
        center,
        pi: vec![1.0 / j_count as f64; j_count],
        theta: vec![vec![0.0; cfg.degree + 1]; j_count],
        loglik: f64::NEG_INFINITY,
        bic: f64::NAN,
        n_individuals: 0,
        class_counts: vec![],
        iterations: 0,
        converged: false,
        posterior: vec![],
        assignments: vec![],
        warnings: vec![],
    };
    let first_weights: Vec<Vec<f64>> = (0..n_unique)
        .map(|u| resp[u].iter().map(|r| r * data.count[u]).collect())
        .collect();
    let total_n: f64 = data.count.iter().sum();
    let mut weights = first_weights;
    let mut prev = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut it = 0;
    while it < cfg.max_iter {
        it += 1;
        // M-step
        for j in 0..j_count {
            let mut ones = vec![0.0; k];
            let mut total = vec![0.0; k];
            let mut wsum = 0.0;
            for u in 0..n_unique {
                let w = weights[u][j];
                wsum += w;
                if w == 0.0 {
                    continue;
                }
                for (t, &a) in data.patterns[u].iter().enumerate() {
                    if !a.is_nan() {
                        total[t] += w;
                        ones[t] += w * a;
                    }
                }
            }
            model.pi[j] = wsum / total_n;
            if wsum > 0.0 {
                model.theta[j] = logistic_newton(&x, &ones, &total, &model.theta[j]);
            }
        }
        // E-step
        let logp = model.log_prob_table();
        let mut ll = 0.0;
        for u in 0..n_unique {
            let (row, lse) = model.posterior_row(&data.patterns[u], &logp);
            ll += data.count[u] * lse;
            for j in 0..j_count {
                weights[u][j] = row[j] * data.count[u];
            }
        }
        trace.push(ll);
        if (ll - prev).abs() < cfg.tol {
            prev = ll;
            converged = true;
            break;
        }
        prev = ll;
    }
    EmRun { theta: model.theta, pi: model.pi, loglik: prev, iterations: it, converged, trace }
}

/// Fit the mixture to the treatment histories of `cohort`.
pub fn fit_lcga(cohort: &Cohort, cfg: &LcgaConfig) -> Result<LcgaModel> {
    let rows: Vec<Vec<f64>> = (0..cohort.n()).map(|i| cohort.treatment.row(i).to_vec()).collect();
    fit_lcga_weighted(&rows, &vec![1.0; rows.len()], cfg)
}

/// Fit on explicit histories (`NaN` = unobserved) with per-row multiplicities,
/// as used by bootstrap replicates.
pub fn fit_lcga_weighted(rows: &[Vec<f64>], mult: &[f64], cfg: &LcgaConfig) -> Result<LcgaModel> {
    let k = rows.first().map_or(0, |r| r.len());
    if cfg.groups == 0 || cfg.degree == 0 || cfg.degree > 3 {
        return Err(Error::Config("need J >= 1 and degree in 1..=3".into()));
    }
    if 2 * cfg.groups > k {
        return Err(Error::Identifiability { groups: cfg.groups, times: k });
    }
    if rows.iter().flatten().any(|&a| !a.is_nan() && a != 0.0 && a != 1.0) {
        return Err(Error::Schema("treatment must be binary".into()));
    }
    let data = collapse(rows, mult);
    let n_starts = cfg.n_starts.max(1);
    let runs: Vec<EmRun> = (0..n_starts)
        .into_par_iter()
        .map(|r| em_run(&data, cfg, k, r))
        .collect();
    // best log-likelihood, earliest restart on ties
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.loglik > runs[best].loglik {
            best = r;
        }
    }
    let run = &runs[best];
    let (center, _) = time_design(k, cfg.degree);
    let mut model = LcgaModel {
        groups: cfg.groups,
        degree: cfg.degree,
        k,
        center,
        pi: run.pi.clone(),
        theta: run.theta.clone(),
        loglik: run.loglik,
        bic: f64::NAN,
        n_individuals: 0,
        class_counts: vec![],
        iterations: run.iterations,
        converged: run.converged,
        posterior: vec![],
        assignments: vec![],
        warnings: vec![],
    };
    // relabel by decreasing mean fitted probability
    let means: Vec<f64> = (0..cfg.groups).map(|j| model.mean_probability(j)).collect();
    let mut order: Vec<usize> = (0..cfg.groups).collect();
    order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap().then(a.cmp(&b)));
    model.theta = order.iter().map(|&j| run.theta[j].clone()).collect();
    model.pi = order.iter().map(|&j| run.pi[j]).collect();

    let n_total: f64 = mult.iter().sum();
    model.n_individuals = n_total.round() as usize;
    let logp = model.log_prob_table();
    let post_unique: Vec<(Vec<f64>, f64)> =
        data.patterns.iter().map(|p| model.posterior_row(p, &logp)).collect();
    model.loglik = post_unique.iter().zip(&data.count).map(|((_, l), c)| c * l).sum();
    model.bic = model.bic_value();
    model.posterior = data.row_pattern.iter().map(|&u| post_unique[u].0.clone()).collect();
    model.assignments = assign_groups(&model.posterior);
    model.class_counts = vec![0; cfg.groups];
    for (r, &g) in model.assignments.iter().enumerate() {
        if mult[r] > 0.0 {
            model.class_counts[g] += mult[r].round() as usize;
        }
    }
    for j in 0..cfg.groups {
        if model.pi[j] < 1.0 / (2.0 * n_total) {
            model.warnings.push(Warning::DegenerateGroup { group: j + 1, proportion: model.pi[j] });
        }
    }
    if !run.converged {
        log::warn!("trajectory EM stopped at {} iterations without meeting tolerance", run.iterations);
    }
    Ok(model)
}

/// EM log-likelihood trace of a single restart, for monotonicity checks.
pub fn em_trace(rows: &[Vec<f64>], cfg: &LcgaConfig, restart: usize) -> Vec<f64> {
    let k = rows.first().map_or(0, |r| r.len());
    let mult = vec![1.0; rows.len()];
    let data = collapse(rows, &mult);
    em_run(&data, cfg, k, restart).trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{logit, Glm};

    fn separated(n: usize, k: usize) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![1.0; k]; n];
        rows.extend(vec![vec![0.0; k]; n]);
        rows
    }

    #[test]
    fn hand_posterior_two_groups() {
        let th = |p: f64| vec![logit(p), 0.0];
        let m = LcgaModel::new(2, 1, vec![th(0.9), th(0.1)], vec![0.5, 0.5]).unwrap();
        let post = m.posterior_probs(&[vec![1.0, 1.0]]).unwrap();
        assert!((post[0][0] - 0.81 / 0.82).abs() < 1e-10);
        assert!((post[0][0] - 0.9878).abs() < 1e-4);
        assert!(m.posterior_probs(&[vec![1.0]]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.70, 0.22, 0.08]), 0);
        assert_eq!(argmax(&[0.20, 0.34, 0.46]), 2);
    }

    #[test]
    fn separated_patterns_split_evenly() {
        let rows = separated(100, 5);
        let m = fit_lcga_weighted(&rows, &vec![1.0; 200], &LcgaConfig::new(2, 1, 7)).unwrap();
        assert!((m.pi[0] - 0.5).abs() < 1e-3);
        assert!(m.posterior[0][0] > 0.999 && m.posterior[150][1] > 0.999);
        assert_eq!(m.predict_class(&[1, 1, 1, 1, 1]), 0);
        assert_eq!(m.predict_class(&[0, 0, 0, 0, 0]), 1);
        let one = fit_lcga_weighted(&rows, &vec![1.0; 200], &LcgaConfig::new(1, 1, 7)).unwrap();
        assert!(m.bic < one.bic);
    }

    #[test]
    fn one_group_is_pooled_logistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 4;
        let rows: Vec<Vec<f64>> = (0..150)
            .map(|_| (0..k).map(|t| (rng.random::<f64>() < 0.2 + 0.15 * t as f64) as u8 as f64).collect())
            .collect();
        let m = fit_lcga_weighted(&rows, &vec![1.0; 150], &LcgaConfig::new(1, 2, 1)).unwrap();
        assert!(m.posterior.iter().all(|r| r[0] == 1.0));
        let (_, xrows) = time_design(k, 2);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for r in &rows {
            for t in 0..k {
                x.extend_from_slice(&xrows[t]);
                y.push(r[t]);
            }
        }
        let xm = nalgebra::DMatrix::from_row_slice(y.len(), 3, &x);
        let fit = Glm::logistic().fit(&xm, &y, None, None, None).unwrap();
        assert!((fit.loglik() - m.loglik).abs() < 1e-8);
        let glm_bic = -2.0 * fit.loglik() + 3.0 * (150f64).ln();
        assert!((glm_bic - m.bic).abs() < 1e-8);
        assert!((m.bic - m.bic_value()).abs() < 1e-12);
    }

    #[test]
    fn identifiability_bound() {
        let rows = separated(5, 4);
        let r = fit_lcga_weighted(&rows, &[1.0; 10], &LcgaConfig::new(3, 1, 0));
        assert!(matches!(r, Err(Error::Identifiability { .. })));
    }

    #[test]
    fn em_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|i| {
                let p = [0.85, 0.5, 0.1][i % 3];
                (0..6).map(|_| (rng.random::<f64>() < p) as u8 as f64).collect()
            })
            .collect();
        for restart in 0..3 {
            let tr = em_trace(&rows, &LcgaConfig::new(2, 2, 5), restart);
            for w in tr.windows(2) {
                assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn bic_matches_direct_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..90)
            .map(|i| {
                let p = if i % 2 == 0 { 0.8 } else { 0.15 };
                (0..5).map(|_| (rng.random::<f64>() < p) as u8 as f64).collect()
            })
            .collect();
        let m = fit_lcga_weighted(&rows, &vec![1.0; 90], &LcgaConfig::new(2, 1, 9)).unwrap();
        // brute-force mixture density
        let mut ll = 0.0;
        for r in &rows {
            let mut s = 0.0;
            for j in 0..2 {
                let mut prod = m.pi[j];
                for (t, &a) in r.iter().enumerate() {
                    let p = m.group_probability(j, t);
                    prod *= if a == 1.0 { p } else { 1.0 - p };
                }
                s += prod;
            }
            ll += s.ln();
        }
        assert!((ll - m.loglik).abs() < 1e-9);
        let bic = -2.0 * ll + 5.0 * 90f64.ln();
        assert!((bic - m.bic).abs() < 1e-8);
        let again = m.posterior_probs(&rows).unwrap();
        for (a, b) in again.iter().zip(&m.posterior) {
            assert!((a[0] - b[0]).abs() < 1e-10);
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        assert!((m.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
