//! Generalized linear models fitted by iteratively reweighted least squares.
//!
//! Supported family/link pairs are binomial-logit, binomial-log,
//! Poisson-log and Gaussian-identity. Every fit carries the model-based
//! covariance (inverse Fisher information) and a sandwich covariance which
//! can be aggregated by cluster (GEE with an independence working
//! correlation).

mod cox;
mod grouped;

pub use cox::{cox_log_partial_likelihood, cox_score, fit_cox, CoxFit};
pub use grouped::GroupedDesign;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::linalg;

/// Fitted probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Binomial,
    Poisson,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Logit,
    Log,
    Identity,
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = clamp_prob(p);
    (p / (1.0 - p)).ln()
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

impl Link {
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Logit => clamp_prob(expit(eta)),
            Link::Log => eta.min(700.0).exp(),
            Link::Identity => eta,
        }
    }

    pub fn apply(self, mu: f64) -> f64 {
        match self {
            Link::Logit => logit(mu),
            Link::Log => mu.ln(),
            Link::Identity => mu,
        }
    }

    /// dmu/deta evaluated at the mean.
    fn mu_eta(self, mu: f64) -> f64 {
        match self {
            Link::Logit => mu * (1.0 - mu),
            Link::Log => mu,
            Link::Identity => 1.0,
        }
    }
}

impl Family {
    fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Binomial => mu * (1.0 - mu),
            Family::Poisson => mu,
            Family::Gaussian => 1.0,
        }
    }

    fn start_mu(self, y: f64) -> f64 {
        match self {
            Family::Binomial => (y + 0.5) / 2.0,
            Family::Poisson => y + 0.1,
            Family::Gaussian => y,
        }
    }

    fn unit_deviance(self, y: f64, mu: f64) -> f64 {
        match self {
            Family::Binomial => 2.0 * (xlogy(y, y / mu) + xlogy(1.0 - y, (1.0 - y) / (1.0 - mu))),
            Family::Poisson => 2.0 * (xlogy(y, y / mu) - (y - mu)),
            Family::Gaussian => (y - mu) * (y - mu),
        }
    }

    /// Log-likelihood contribution with unit dispersion, dropping terms free of mu.
    fn unit_loglik(self, y: f64, mu: f64) -> f64 {
        match self {
            Family::Binomial => xlogy(y, mu) + xlogy(1.0 - y, 1.0 - mu),
            Family::Poisson => xlogy(y, mu) - mu,
            Family::Gaussian => -0.5 * (y - mu) * (y - mu),
        }
    }

    fn valid_mu(self, link: Link, eta: f64) -> bool {
        if !eta.is_finite() {
            return false;
        }
        match (self, link) {
            // log-binomial: mean must stay below one
            (Family::Binomial, Link::Log) => eta < -PROB_CLAMP,
            (Family::Poisson, Link::Identity) => eta > 0.0,
            _ => true,
        }
    }

    fn clamp_mu(self, mu: f64) -> f64 {
        match self {
            Family::Binomial => clamp_prob(mu),
            Family::Poisson => mu.max(1e-300),
            Family::Gaussian => mu,
        }
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// A fitted generalized linear model.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: DVector<f64>,
    pub vcov_model: DMatrix<f64>,
    pub vcov_robust: DMatrix<f64>,
    pub fitted: Vec<f64>,
    pub linear_predictor: Vec<f64>,
    pub family: Family,
    pub link: Link,
    pub prior_weights: Vec<f64>,
    pub converged: bool,
    pub deviance: f64,
    pub n_iter: usize,
    /// `true` for columns dropped as linearly dependent; their coefficient is zero.
    pub aliased: Vec<bool>,
    pub deviance_trace: Vec<f64>,
    pub dispersion: f64,
    pub warnings: Vec<Warning>,
    design: Option<DMatrix<f64>>,
    response: Vec<f64>,
}

impl GlmFit {
    pub fn n_params(&self) -> usize {
        self.aliased.iter().filter(|a| !**a).count()
    }

    pub fn loglik(&self) -> f64 {
        self.response
            .iter()
            .zip(&self.fitted)
            .zip(&self.prior_weights)
            .map(|((&y, &mu), &w)| w * self.family.unit_loglik(y, mu))
            .sum()
    }

    pub fn std_errors_robust(&self) -> Vec<f64> {
        (0..self.coefficients.len())
            .map(|j| self.vcov_robust[(j, j)].max(0.0).sqrt())
            .collect()
    }

    /// Linear predictor for new rows (aliased columns contribute nothing).
    pub fn predict_eta(&self, row: &[f64]) -> f64 {
        row.iter().zip(self.coefficients.iter()).map(|(x, b)| x * b).sum()
    }

    pub fn predict_mean(&self, row: &[f64]) -> f64 {
        self.family.clamp_mu(self.link.inverse(self.predict_eta(row)))
    }

    pub fn design(&self) -> Option<&DMatrix<f64>> {
        self.design.as_ref()
    }
}

/// Fitting options. Construct with [`Glm::new`] and adjust fields as needed.
#[derive(Debug, Clone)]
pub struct Glm {
    pub family: Family,
    pub link: Link,
    pub max_iter: usize,
    pub tol: f64,
    /// Compute model-based and sandwich covariances (and keep the design).
    pub with_vcov: bool,
}

impl Glm {
    pub fn new(family: Family, link: Link) -> Self {
        Glm {
            family,
            link,
            max_iter: 100,
            tol: 1e-8,
            with_vcov: true,
        }
    }

    pub fn logistic() -> Self {
        Glm::new(Family::Binomial, Link::Logit)
    }

    pub fn point_estimate_only(mut self) -> Self {
        self.with_vcov = false;
        self
    }

    pub fn fit(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        weights: Option<&[f64]>,
        offset: Option<&[f64]>,
        start: Option<&[f64]>,
    ) -> Result<GlmFit> {
        let n = x.nrows();
        let p = x.ncols();
        if y.len() != n {
            return Err(Error::Shape(format!("response has {} rows, design has {n}", y.len())));
        }
        let w: Vec<f64> = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::Shape(format!("weights have {} rows, design has {n}", w.len())));
                }
                if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Config("prior weights must be finite and non-negative".into()));
                }
                w.to_vec()
            }
            None => vec![1.0; n],
        };
        let off: Vec<f64> = match offset {
            Some(o) => o.to_vec(),
            None => vec![0.0; n],
        };
        if self.family == Family::Binomial && y.iter().zip(&w).any(|(v, wi)| *wi > 0.0 && !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("binomial response must lie in [0, 1]".into()));
        }

        let aliased = detect_aliased(x, &w);
        let kept: Vec<usize> = (0..p).filter(|j| !aliased[*j]).collect();
        let xk = x.select_columns(&kept);
        let pk = kept.len();

        let family = self.family;
        let link = self.link;

        let eta_of = |beta: &DVector<f64>| -> Vec<f64> {
            let lin = &xk * beta;
            lin.iter().zip(&off).map(|(l, o)| l + o).collect()
        };
        let deviance_of = |eta: &[f64]| -> Option<(f64, Vec<f64>)> {
            let mut dev = 0.0;
            let mut mu = Vec::with_capacity(n);
            for i in 0..n {
                if w[i] > 0.0 && !family.valid_mu(link, eta[i]) {
                    return None;
                }
                let m = family.clamp_mu(link.inverse(eta[i]));
                if w[i] > 0.0 {
                    dev += w[i] * family.unit_deviance(y[i], m);
                }
                mu.push(m);
            }
            if dev.is_finite() {
                Some((dev, mu))
            } else {
                None
            }
        };

        // Initial state: either from supplied coefficients or from the
        // family's starting means.
        let (mut beta, mut eta, mut mu, mut dev) = match start {
            Some(s) if s.len() == p => {
                let b = DVector::from_iterator(pk, kept.iter().map(|&j| s[j]));
                let e = eta_of(&b);
                match deviance_of(&e) {
                    Some((d, m)) => (Some(b), e, m, d),
                    None => {
                        let m: Vec<f64> = y.iter().map(|&v| family.start_mu(v)).collect();
                        let e = m.iter().map(|&v| link.apply(v)).collect();
                        (None, e, m, f64::INFINITY)
                    }
                }
            }
            _ => {
                let m: Vec<f64> = y.iter().map(|&v| family.start_mu(v)).collect();
                let e = m.iter().map(|&v| link.apply(v)).collect();
                (None, e, m, f64::INFINITY)
            }
        };

        let mut converged = false;
        let mut n_iter = 0;
        let mut trace = Vec::new();
        if pk == 0 {
            converged = true;
        }
        while !converged && n_iter < self.max_iter {
            n_iter += 1;
            // working weights and response
            let mut wx = DMatrix::<f64>::zeros(n, pk);
            let mut wz = DVector::<f64>::zeros(n);
            for i in 0..n {
                if w[i] <= 0.0 {
                    continue;
                }
                let d = link.mu_eta(mu[i]);
                let v = family.variance(mu[i]);
                let wi = w[i] * d * d / v;
                if !(wi > 0.0) || !wi.is_finite() {
                    continue;
                }
                let z = eta[i] - off[i] + (y[i] - mu[i]) / d;
                let s = wi.sqrt();
                for j in 0..pk {
                    wx[(i, j)] = xk[(i, j)] * s;
                }
                wz[i] = z * s;
            }
            let xtwx = wx.tr_mul(&wx);
            let xtwz = wx.tr_mul(&wz);
            let proposal = match linalg::solve_spd(&xtwx, &xtwz) {
                Some(b) => b,
                None => {
                    return Err(Error::SingularInformation(
                        "weighted cross-product is singular during IRLS".into(),
                    ))
                }
            };

            // step halving keeps the deviance non-increasing
            let mut step = proposal.clone();
            let mut accepted = None;
            for _ in 0..40 {
                let e = eta_of(&step);
                if let Some((d, m)) = deviance_of(&e) {
                    if d <= dev + 1e-10 * (dev.abs() + 1.0) || !dev.is_finite() {
                        accepted = Some((step.clone(), e, m, d));
                        break;
                    }
                }
                match &beta {
                    Some(b) => step = (&step + b) * 0.5,
                    None => break,
                }
            }
            let Some((b_new, e_new, m_new, d_new)) = accepted else {
                // no improving step: treat current iterate as the optimum
                if beta.is_some() {
                    converged = true;
                    break;
                }
                return Err(Error::convergence(
                    format!("no valid starting coefficients for {family:?}/{link:?}"),
                    n_iter,
                    proposal.as_slice(),
                ));
            };
            let coef_change = match &beta {
                Some(b) => b_new
                    .iter()
                    .zip(b.iter())
                    .map(|(a, o)| (a - o).abs() / (a.abs() + 0.1))
                    .fold(0.0, f64::max),
                None => f64::INFINITY,
            };
            let dev_change = if dev.is_finite() {
                (dev - d_new).abs() / (d_new.abs() + 0.1)
            } else {
                f64::INFINITY
            };
            beta = Some(b_new);
            eta = e_new;
            mu = m_new;
            dev = d_new;
            trace.push(dev);
            if coef_change < self.tol || dev_change < 1e-13 {
                converged = true;
            }
        }
        let beta_k = beta.unwrap_or_else(|| DVector::zeros(pk));
        if pk == 0 {
            let e = eta_of(&beta_k);
            if let Some((d, m)) = deviance_of(&e) {
                eta = e;
                mu = m;
                dev = d;
            }
        }
        if !converged {
            let mut full = vec![0.0; p];
            for (k, &j) in kept.iter().enumerate() {
                full[j] = beta_k[k];
            }
            return Err(Error::convergence(
                format!("IRLS for {family:?}/{link:?} exceeded {} iterations", self.max_iter),
                n_iter,
                &full,
            ));
        }

        let mut coefficients = DVector::zeros(p);
        for (k, &j) in kept.iter().enumerate() {
            coefficients[j] = beta_k[k];
        }

        let mut warnings = Vec::new();
        if family == Family::Binomial {
            let sep = (0..n)
                .filter(|&i| w[i] > 0.0 && (eta[i].abs() > 30.0 || mu[i] <= PROB_CLAMP || mu[i] >= 1.0 - PROB_CLAMP))
                .count();
            if sep > 0 {
                warnings.push(Warning::Separation { rows: sep });
            }
        }
        if aliased.iter().any(|a| *a) {
            warnings.push(Warning::Aliased {
                columns: (0..p).filter(|j| aliased[*j]).map(|j| format!("column {j}")).collect(),
            });
        }

        let mut fit = GlmFit {
            coefficients,
            vcov_model: DMatrix::zeros(p, p),
            vcov_robust: DMatrix::zeros(p, p),
            fitted: mu,
            linear_predictor: eta,
            family,
            link,
            prior_weights: w,
            converged,
            deviance: dev,
            n_iter,
            aliased,
            deviance_trace: trace,
            dispersion: 1.0,
            warnings,
            design: None,
            response: y.to_vec(),
        };
        if self.with_vcov {
            fit.design = Some(x.clone());
            let info = fit.information()?;
            let inv = linalg::inverse_spd(&info)
                .ok_or_else(|| Error::SingularInformation("Fisher information".into()))?;
            if family == Family::Gaussian {
                let nobs = fit.prior_weights.iter().filter(|v| **v > 0.0).count();
                let rss: f64 = (0..n)
                    .map(|i| fit.prior_weights[i] * (y[i] - fit.fitted[i]).powi(2))
                    .sum();
                let df = nobs.saturating_sub(pk).max(1);
                fit.dispersion = rss / df as f64;
            }
            fit.vcov_model = expand(&(inv * fit.dispersion), &fit.aliased);
            fit.vcov_robust = sandwich_vcov(&fit, None)?;
        }
        Ok(fit)
    }
}

impl GlmFit {
    /// Expected information restricted to non-aliased columns.
    fn information(&self) -> Result<DMatrix<f64>> {
        let x = self
            .design
            .as_ref()
            .ok_or_else(|| Error::Config("fit was computed without keeping the design".into()))?;
        let kept: Vec<usize> = (0..x.ncols()).filter(|j| !self.aliased[*j]).collect();
        let mut info = DMatrix::zeros(kept.len(), kept.len());
        for i in 0..x.nrows() {
            let w = self.prior_weights[i];
            if w <= 0.0 {
                continue;
            }
            let mu = self.fitted[i];
            let d = self.link.mu_eta(mu);
            let wi = w * d * d / self.family.variance(mu);
            for (a, &ja) in kept.iter().enumerate() {
                let xa = x[(i, ja)] * wi;
                if xa == 0.0 {
                    continue;
                }
                for (b, &jb) in kept.iter().enumerate().skip(a) {
                    info[(a, b)] += xa * x[(i, jb)];
                }
            }
        }
        for a in 0..kept.len() {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        Ok(info)
    }

    /// Per-row score contributions (non-aliased columns only).
    fn score_rows(&self) -> Result<Vec<DVector<f64>>> {
        let x = self
            .design
            .as_ref()
            .ok_or_else(|| Error::Config("fit was computed without keeping the design".into()))?;
        let kept: Vec<usize> = (0..x.ncols()).filter(|j| !self.aliased[*j]).collect();
        Ok((0..x.nrows())
            .map(|i| {
                let mu = self.fitted[i];
                let c = self.prior_weights[i] * (self.response[i] - mu) * self.link.mu_eta(mu)
                    / self.family.variance(mu);
                DVector::from_iterator(kept.len(), kept.iter().map(|&j| x[(i, j)] * c))
            })
            .collect())
    }
}

fn expand(m: &DMatrix<f64>, aliased: &[bool]) -> DMatrix<f64> {
    let p = aliased.len();
    let kept: Vec<usize> = (0..p).filter(|j| !aliased[*j]).collect();
    let mut out = DMatrix::zeros(p, p);
    for (a, &ja) in kept.iter().enumerate() {
        for (b, &jb) in kept.iter().enumerate() {
            out[(ja, jb)] = m[(a, b)];
        }
    }
    out
}

/// Sandwich covariance `A^-1 B A^-1`. `A` is the expected information with
/// prior weights, `B` the outer product of score contributions summed within
/// clusters (each row is its own cluster when `cluster` is `None`).
pub fn sandwich_vcov(fit: &GlmFit, cluster: Option<&[usize]>) -> Result<DMatrix<f64>> {
    if !fit.converged {
        return Err(Error::Config("sandwich requested for a non-converged fit".into()));
    }
    let info = fit.information()?;
    let bread = linalg::inverse_spd(&info)
        .ok_or_else(|| Error::SingularInformation("Fisher information".into()))?;
    let scores = fit.score_rows()?;
    let meat = meat_matrix(&scores, cluster, info.nrows())?;
    let v = &bread * meat * &bread;
    Ok(expand(&linalg::symmetrize(&v), &fit.aliased))
}

pub(crate) fn meat_matrix(
    scores: &[DVector<f64>],
    cluster: Option<&[usize]>,
    dim: usize,
) -> Result<DMatrix<f64>> {
    let mut meat = DMatrix::zeros(dim, dim);
    match cluster {
        None => {
            for s in scores {
                meat += s * s.transpose();
            }
        }
        Some(c) => {
            if c.len() != scores.len() {
                return Err(Error::Shape(format!(
                    "cluster vector has {} entries for {} rows",
                    c.len(),
                    scores.len()
                )));
            }
            let mut order: Vec<usize> = (0..c.len()).collect();
            order.sort_by_key(|&i| (c[i], i));
            let mut acc = DVector::zeros(dim);
            let mut current = None;
            for &i in &order {
                if current != Some(c[i]) {
                    if current.is_some() {
                        meat += &acc * acc.transpose();
                    }
                    acc.fill(0.0);
                    current = Some(c[i]);
                }
                acc += &scores[i];
            }
            if current.is_some() {
                meat += &acc * acc.transpose();
            }
        }
    }
    Ok(meat)
}

/// Fit a GLM; when `cluster` is given the robust covariance aggregates score
/// contributions by cluster.
pub fn fit_glm(
    design: &DMatrix<f64>,
    response: &[f64],
    family: Family,
    link: Link,
    weights: &[f64],
    cluster: Option<&[usize]>,
) -> Result<GlmFit> {
    let mut fit = Glm::new(family, link).fit(design, response, Some(weights), None, None)?;
    if cluster.is_some() {
        fit.vcov_robust = sandwich_vcov(&fit, cluster)?;
    }
    Ok(fit)
}

/// Weighted log-likelihood (unit dispersion) at arbitrary coefficients.
pub fn log_likelihood(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    family: Family,
    link: Link,
    beta: &[f64],
) -> f64 {
    (0..x.nrows())
        .map(|i| {
            let eta: f64 = (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum();
            let mu = family.clamp_mu(link.inverse(eta));
            weights[i] * family.unit_loglik(y[i], mu)
        })
        .sum()
}

/// Analytic score of [`log_likelihood`].
pub fn score(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    family: Family,
    link: Link,
    beta: &[f64],
) -> Vec<f64> {
    let mut g = vec![0.0; x.ncols()];
    for i in 0..x.nrows() {
        let eta: f64 = (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum();
        let mu = family.clamp_mu(link.inverse(eta));
        let c = weights[i] * (y[i] - mu) * link.mu_eta(mu) / family.variance(mu);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += c * x[(i, j)];
        }
    }
    g
}

/// Flags columns that are (numerically) linear combinations of earlier
/// columns, using rows with positive weight.
pub fn detect_aliased(x: &DMatrix<f64>, w: &[f64]) -> Vec<bool> {
    let p = x.ncols();
    let rows: Vec<usize> = (0..x.nrows()).filter(|&i| w[i] > 0.0).collect();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    for &i in &rows {
        for a in 0..p {
            let xa = x[(i, a)];
            if xa == 0.0 {
                continue;
            }
            for b in a..p {
                gram[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    let norms: Vec<f64> = (0..p).map(|j| gram[(j, j)].sqrt()).collect();
    // incremental Cholesky on the correlation-scaled Gram matrix
    let mut aliased = vec![false; p];
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..p {
        if norms[j] == 0.0 {
            aliased[j] = true;
            continue;
        }
        let g = |a: usize, b: usize| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            gram[(lo, hi)] / (norms[a] * norms[b])
        };
        let mut row = vec![0.0; kept.len()];
        for (r, &k) in kept.iter().enumerate() {
            let mut s = g(j, k);
            for q in 0..r {
                s -= row[q] * l[(r, q)];
            }
            row[r] = s / l[(r, r)];
        }
        let d = 1.0 - row.iter().map(|v| v * v).sum::<f64>();
        if d < 1e-10 {
            aliased[j] = true;
            continue;
        }
        let r = kept.len();
        for (q, v) in row.iter().enumerate() {
            l[(r, q)] = *v;
        }
        l[(r, r)] = d.sqrt();
        kept.push(j);
    }
    aliased
}

#[cfg(test)]
mod tests_engine;
