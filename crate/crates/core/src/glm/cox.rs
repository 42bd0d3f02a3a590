use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Weighted Cox proportional hazards fit with Breslow ties.
#[derive(Debug, Clone)]
pub struct CoxFit {
    pub coefficients: DVector<f64>,
    pub vcov_model: DMatrix<f64>,
    /// Sandwich built from weighted score residuals summed by cluster.
    pub vcov_robust: DMatrix<f64>,
    pub loglik: f64,
    pub n_iter: usize,
    pub n_events: usize,
    /// Distinct event times and the Breslow cumulative baseline hazard there.
    pub event_times: Vec<f64>,
    pub baseline_cumhaz: Vec<f64>,
}

impl CoxFit {
    pub fn std_errors_robust(&self) -> Vec<f64> {
        (0..self.coefficients.len())
            .map(|j| self.vcov_robust[(j, j)].max(0.0).sqrt())
            .collect()
    }
}

struct RiskSums {
    loglik: f64,
    grad: DVector<f64>,
    info: DMatrix<f64>,
}

/// Indices sorted by decreasing time, ties kept in input order.
fn descending(time: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..time.len()).collect();
    idx.sort_by(|&a, &b| time[b].partial_cmp(&time[a]).unwrap().then(a.cmp(&b)));
    idx
}

fn risk_sums(time: &[f64], event: &[f64], x: &DMatrix<f64>, w: &[f64], beta: &DVector<f64>, order: &[usize]) -> RiskSums {
    let p = x.ncols();
    let mut s0 = 0.0;
    let mut s1 = DVector::<f64>::zeros(p);
    let mut s2 = DMatrix::<f64>::zeros(p, p);
    let mut loglik = 0.0;
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let n = order.len();
    let mut k = 0;
    while k < n {
        // add the whole tie block to the risk set before scoring its events
        let t = time[order[k]];
        let mut end = k;
        while end < n && time[order[end]] == t {
            let i = order[end];
            let xi = x.row(i).transpose();
            let eta = xi.dot(beta);
            let r = w[i] * eta.exp();
            s0 += r;
            s1 += &xi * r;
            s2 += &xi * xi.transpose() * r;
            end += 1;
        }
        let xbar = &s1 / s0;
        for &i in &order[k..end] {
            if event[i] > 0.0 && w[i] > 0.0 {
                let xi = x.row(i).transpose();
                loglik += w[i] * (xi.dot(beta) - s0.ln());
                grad += (&xi - &xbar) * w[i];
                info += (&s2 / s0 - &xbar * xbar.transpose()) * w[i];
            }
        }
        k = end;
    }
    RiskSums { loglik, grad, info }
}

/// Weighted log partial likelihood (Breslow) at arbitrary coefficients.
pub fn cox_log_partial_likelihood(time: &[f64], event: &[f64], x: &DMatrix<f64>, w: &[f64], beta: &[f64]) -> f64 {
    let order = descending(time);
    risk_sums(time, event, x, w, &DVector::from_column_slice(beta), &order).loglik
}

/// Analytic gradient of [`cox_log_partial_likelihood`].
pub fn cox_score(time: &[f64], event: &[f64], x: &DMatrix<f64>, w: &[f64], beta: &[f64]) -> Vec<f64> {
    let order = descending(time);
    risk_sums(time, event, x, w, &DVector::from_column_slice(beta), &order)
        .grad
        .as_slice()
        .to_vec()
}

/// Newton-Raphson on the weighted partial likelihood with a cluster-robust
/// sandwich from weighted score residuals.
pub fn fit_cox(
    stop_time: &[f64],
    event: &[f64],
    design: &DMatrix<f64>,
    weights: &[f64],
    cluster: &[usize],
) -> Result<CoxFit> {
    let n = stop_time.len();
    let p = design.ncols();
    if event.len() != n || design.nrows() != n || weights.len() != n || cluster.len() != n {
        return Err(Error::Shape("cox inputs must have equal length".into()));
    }
    if stop_time.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("event times must be positive".into()));
    }
    let n_events = (0..n).filter(|&i| event[i] > 0.0 && weights[i] > 0.0).count();
    if n_events == 0 {
        return Err(Error::convergence("partial likelihood undefined: no events", 0, &vec![0.0; p]));
    }

    // centring leaves the coefficients unchanged and keeps exp() finite
    let wsum: f64 = weights.iter().sum();
    let center: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| weights[i] * design[(i, j)]).sum::<f64>() / wsum)
        .collect();
    let xc = DMatrix::from_fn(n, p, |i, j| design[(i, j)] - center[j]);
    let order = descending(stop_time);

    let mut beta = DVector::<f64>::zeros(p);
    let mut cur = risk_sums(stop_time, event, &xc, weights, &beta, &order);
    let mut converged = false;
    let mut n_iter = 0;
    let max_iter = 50;
    while n_iter < max_iter {
        n_iter += 1;
        let Some(step) = linalg::solve_spd(&cur.info, &cur.grad) else {
            return Err(Error::convergence("singular information in Cox fit", n_iter, beta.as_slice()));
        };
        let mut scale = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let cand = &beta + &step * scale;
            let s = risk_sums(stop_time, event, &xc, weights, &cand, &order);
            if s.loglik.is_finite() && s.loglik >= cur.loglik - 1e-12 * cur.loglik.abs() {
                next = Some((cand, s));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, s)) = next else {
            converged = true;
            break;
        };
        let change = (&cand - &beta).amax();
        let ll_change = (s.loglik - cur.loglik).abs() / (s.loglik.abs() + 0.1);
        beta = cand;
        cur = s;
        if change < 1e-9 || ll_change < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged || beta.iter().any(|b| b.abs() > 25.0) {
        return Err(Error::convergence(
            "partial likelihood appears monotone (coefficients diverge)",
            n_iter,
            beta.as_slice(),
        ));
    }

    let vcov_model = linalg::inverse_spd(&cur.info)
        .ok_or_else(|| Error::SingularInformation("Cox information".into()))?;

    // score residuals, ascending in time
    let eta: Vec<f64> = (0..n).map(|i| xc.row(i).transpose().dot(&beta)).collect();
    let mut asc = order.clone();
    asc.reverse();
    // risk-set sums at each distinct time, computed from the descending pass
    let mut s0_at = vec![0.0; n];
    let mut xbar_at: Vec<DVector<f64>> = vec![DVector::zeros(p); n];
    {
        let mut s0 = 0.0;
        let mut s1 = DVector::<f64>::zeros(p);
        let mut k = 0;
        while k < n {
            let t = stop_time[order[k]];
            let mut end = k;
            while end < n && stop_time[order[end]] == t {
                let i = order[end];
                let r = weights[i] * eta[i].exp();
                s0 += r;
                s1 += xc.row(i).transpose() * r;
                end += 1;
            }
            for &i in &order[k..end] {
                s0_at[i] = s0;
                xbar_at[i] = &s1 / s0;
            }
            k = end;
        }
    }
    // cumulative hazard increments H and G accumulated over event times
    let mut resid: Vec<DVector<f64>> = vec![DVector::zeros(p); n];
    let mut h = 0.0;
    let mut g = DVector::<f64>::zeros(p);
    let mut event_times = Vec::new();
    let mut baseline_cumhaz = Vec::new();
    let shift: f64 = center.iter().zip(beta.iter()).map(|(c, b)| c * b).sum();
    let mut k = 0;
    while k < n {
        let t = stop_time[asc[k]];
        let mut end = k;
        let mut dh = 0.0;
        let mut dg = DVector::<f64>::zeros(p);
        while end < n && stop_time[asc[end]] == t {
            let i = asc[end];
            if event[i] > 0.0 && weights[i] > 0.0 {
                dh += weights[i] / s0_at[i];
                dg += &xbar_at[i] * (weights[i] / s0_at[i]);
            }
            end += 1;
        }
        h += dh;
        g += &dg;
        if dh > 0.0 {
            event_times.push(t);
            // baseline on the original (uncentred) covariate scale
            baseline_cumhaz.push(h * (-shift).exp());
        }
        for &i in &asc[k..end] {
            let xi = xc.row(i).transpose();
            let mut u = if event[i] > 0.0 { &xi - &xbar_at[i] } else { DVector::zeros(p) };
            u -= (&xi * h - &g) * eta[i].exp();
            resid[i] = u * weights[i];
        }
        k = end;
    }
    let meat = super::meat_matrix(&resid, Some(cluster), p)?;
    let vcov_robust = linalg::symmetrize(&(&vcov_model * meat * &vcov_model));

    Ok(CoxFit {
        coefficients: beta,
        vcov_model,
        vcov_robust,
        loglik: cur.loglik,
        n_iter,
        n_events,
        event_times,
        baseline_cumhaz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_events_is_a_convergence_error() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 1.0]);
        let r = fit_cox(&[1.0, 2.0, 3.0], &[0.0; 3], &x, &[1.0; 3], &[0, 1, 2]);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn perfect_separation_is_a_convergence_error() {
        // every treated subject fails before every control
        let x = DMatrix::from_column_slice(6, 1, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = fit_cox(&t, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], &x, &[1.0; 6], &[0, 1, 2, 3, 4, 5]);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn constant_weights_do_not_change_the_fit() {
        let x = DMatrix::from_column_slice(8, 1, &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let t = [2.0, 1.0, 5.0, 3.0, 3.0, 4.0, 6.0, 7.0];
        let d = [1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
        let ids: Vec<usize> = (0..8).collect();
        let a = fit_cox(&t, &d, &x, &[1.0; 8], &ids).unwrap();
        let b = fit_cox(&t, &d, &x, &[3.5; 8], &ids).unwrap();
        assert!((a.coefficients[0] - b.coefficients[0]).abs() < 1e-10);
        assert!((a.vcov_robust[(0, 0)] - b.vcov_robust[(0, 0)]).abs() < 1e-10);
    }
}
