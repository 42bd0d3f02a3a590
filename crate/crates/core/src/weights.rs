//! Inverse probability of treatment and censoring weights.
//!
//! Denominators are pooled logistic regressions over time with time dummies;
//! numerators condition on the time and the previous treatment only.

use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::glm::{Glm, GroupedDesign, PROB_CLAMP};
use crate::paneldata::{Cohort, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Numerator {
    Stabilized,
    Unstabilized,
}

impl std::str::FromStr for Numerator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stabilized" => Ok(Numerator::Stabilized),
            "unstabilized" => Ok(Numerator::Unstabilized),
            other => Err(Error::Config(format!("numerator '{other}' must be stabilized or unstabilized"))),
        }
    }
}

/// How much past treatment and covariate history enters a nuisance model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum History {
    /// Previous treatment, current and previous covariates, baseline.
    Markov,
    /// Every earlier treatment and covariate value.
    Full,
}

impl History {
    pub fn lags(self, k: usize) -> usize {
        match self {
            History::Markov => 1,
            History::Full => k.saturating_sub(1).max(1),
        }
    }
}

/// Regressors for time `t` of individual `i`: treatment lags `1..=lags`,
/// current covariates and their lags, then baseline covariates. Values before
/// the prior period are zero. With `current_a` the treatment at `t` leads.
pub fn history_row(c: &Cohort, i: usize, t: usize, lags: usize, current_a: bool) -> Vec<f64> {
    let mut row = Vec::new();
    if current_a {
        row.push(c.a(i, t));
    }
    for l in 1..=lags {
        row.push(if l <= t { c.a(i, t - l) } else if l == t + 1 { c.prior_treatment[i] } else { 0.0 });
    }
    for j in 0..c.covariates.len() {
        row.push(c.cov(j, i, t));
        for l in 1..=lags {
            row.push(if l <= t {
                c.cov(j, i, t - l)
            } else if l == t + 1 {
                c.prior_covariates[j][i]
            } else {
                0.0
            });
        }
    }
    for b in &c.baseline {
        row.push(b[i]);
    }
    row
}

fn time_dummies(k: usize, t: usize) -> Vec<f64> {
    // intercept plus K - 1 indicator columns
    let mut v = vec![1.0];
    v.extend((1..k).map(|s| if s == t { 1.0 } else { 0.0 }));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightConfig {
    pub numerator: Numerator,
    pub include_censor: bool,
    /// Clip the final weights at their `(q, 1 - q)` quantiles.
    pub truncate: Option<f64>,
    pub history: History,
    /// Separate model per time instead of one pooled model with time dummies.
    pub per_time: bool,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            numerator: Numerator::Stabilized,
            include_censor: false,
            truncate: None,
            history: History::Markov,
            per_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub quantile: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_truncated: usize,
}

/// Per-individual weights and the per-time probabilities they are built from.
#[derive(Debug, Clone)]
pub struct WeightSet {
    pub ids: Vec<String>,
    pub w: Vec<f64>,
    pub sw: Vec<f64>,
    pub wc: Vec<f64>,
    pub swc: Vec<f64>,
    /// `W·WC` or `SW·SWC` depending on the numerator, after truncation.
    pub combined: Vec<f64>,
    pub numerator: Numerator,
    pub include_censor: bool,
    /// Fitted probability of the observed treatment at each present time.
    pub treat_denominator: Grid,
    pub treat_numerator: Grid,
    /// Fitted probability of remaining uncensored at each present time.
    pub censor_denominator: Grid,
    pub censor_numerator: Grid,
    pub truncation: Option<TruncationReport>,
    pub warnings: Vec<Warning>,
}

impl WeightSet {
    /// `1 / Π_{s ≤ t} g_s` for treatment (and censoring when included).
    pub fn cumulative_inverse(&self, i: usize, t: usize) -> f64 {
        let mut p = 1.0;
        for s in 0..=t {
            p *= self.treat_denominator.get(i, s);
            if self.include_censor {
                p *= self.censor_denominator.get(i, s);
            }
        }
        1.0 / p
    }

    pub fn summary(&self) -> WeightSummary {
        WeightSummary::of(&self.combined)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "W", "SW", "WC", "SWC", "combined"])?;
        for i in 0..self.ids.len() {
            let f = crate::paneldata::format_number;
            w.write_record([
                self.ids[i].clone(),
                f(self.w[i]),
                f(self.sw[i]),
                f(self.wc[i]),
                f(self.swc[i]),
                f(self.combined[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<weights>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q01: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q99: f64,
}

impl WeightSummary {
    pub fn of(v: &[f64]) -> Self {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        WeightSummary {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: s[0],
            max: s[s.len() - 1],
            q01: quantile(&s, 0.01),
            q25: quantile(&s, 0.25),
            q50: quantile(&s, 0.5),
            q75: quantile(&s, 0.75),
            q99: quantile(&s, 0.99),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A fitted pooled logistic model for one binary transition, evaluated on
/// the rows it was fitted to.
struct PooledFit {
    /// Fitted P(response = 1) per (i, t); NaN where the row was not at risk.
    prob: Grid,
}

/// Fit `response(i, t)` on `row(i, t)` over at-risk cells, pooled with time
/// dummies or per time.
fn pooled_fit(
    c: &Cohort,
    at_risk: &dyn Fn(usize, usize) -> bool,
    response: &dyn Fn(usize, usize) -> f64,
    row: &dyn Fn(usize, usize) -> Vec<f64>,
    per_time: bool,
) -> Result<PooledFit> {
    let (n, k) = (c.n(), c.k());
    let mut prob = Grid::new(n, k, f64::NAN);
    let glm = Glm::logistic();
    let groups: Vec<Vec<usize>> = if per_time { (0..k).map(|t| vec![t]).collect() } else { vec![(0..k).collect()] };
    for times in groups {
        let mut cells = Vec::new();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            for &t in &times {
                if at_risk(i, t) {
                    let mut r = if per_time { vec![1.0] } else { time_dummies(k, t) };
                    r.extend(row(i, t));
                    rows.push(r);
                    y.push(response(i, t));
                    cells.push((i, t));
                }
            }
        }
        if rows.is_empty() {
            continue;
        }
        let gd = GroupedDesign::from_rows(&rows);
        let fit = gd.fit(&glm, &y, &vec![1.0; y.len()], None)?;
        for (r, &(i, t)) in cells.iter().enumerate() {
            prob.set(i, t, fit.fitted[gd.group_of(r)]);
        }
    }
    Ok(PooledFit { prob })
}

/// Treatment and censoring weights for every individual in the cohort.
pub fn compute_weights(c: &Cohort, cfg: &WeightConfig) -> Result<WeightSet> {
    let (n, k) = (c.n(), c.k());
    let lags = cfg.history.lags(k);
    let present = |i: usize, t: usize| c.present(i, t);
    let treat = |i: usize, t: usize| c.a(i, t);
    let denom = pooled_fit(c, &present, &treat, &|i, t| history_row(c, i, t, lags, false), cfg.per_time)?;
    // numerator saturated in (time, previous treatment)
    let numer_row = |i: usize, t: usize| {
        let a = c.lag_a(i, t);
        let mut r = vec![a];
        r.extend((1..k).map(|s| if s == t { a } else { 0.0 }));
        r
    };
    let numer = pooled_fit(c, &present, &treat, &numer_row, cfg.per_time)?;

    let mut treat_denominator = Grid::new(n, k, f64::NAN);
    let mut treat_numerator = Grid::new(n, k, f64::NAN);
    let mut censor_denominator = Grid::new(n, k, f64::NAN);
    let mut censor_numerator = Grid::new(n, k, f64::NAN);
    let mut boundary = Vec::new();
    let observed = |p: f64, a: f64| if a == 1.0 { p } else { 1.0 - p };
    for i in 0..n {
        for t in 0..k {
            if !c.present(i, t) {
                continue;
            }
            let a = c.a(i, t);
            let pd = denom.prob.get(i, t);
            if pd <= PROB_CLAMP || pd >= 1.0 - PROB_CLAMP {
                boundary.push((c.ids[i].clone(), c.time_labels[t] as usize));
            }
            treat_denominator.set(i, t, observed(pd, a).max(PROB_CLAMP));
            treat_numerator.set(i, t, observed(numer.prob.get(i, t), a).max(PROB_CLAMP));
            censor_denominator.set(i, t, 1.0);
            censor_numerator.set(i, t, 1.0);
        }
    }

    if cfg.include_censor && c.has_censoring() {
        let uncensored = |i: usize, t: usize| if c.censored_at(i, t) { 0.0 } else { 1.0 };
        let cd = pooled_fit(c, &present, &uncensored, &|i, t| history_row(c, i, t, lags, false), cfg.per_time)?;
        let cn = pooled_fit(c, &present, &uncensored, &numer_row, cfg.per_time)?;
        for i in 0..n {
            for t in 0..k {
                if c.present(i, t) {
                    // only the uncensored probability enters the product
                    censor_denominator.set(i, t, cd.prob.get(i, t).max(PROB_CLAMP));
                    censor_numerator.set(i, t, cn.prob.get(i, t).max(PROB_CLAMP));
                }
            }
        }
    }

    let prod = |g: &Grid, i: usize| (0..k).filter(|&t| c.present(i, t)).map(|t| g.get(i, t)).product::<f64>();
    let mut w = Vec::with_capacity(n);
    let mut sw = Vec::with_capacity(n);
    let mut wc = Vec::with_capacity(n);
    let mut swc = Vec::with_capacity(n);
    for i in 0..n {
        let wi = 1.0 / prod(&treat_denominator, i);
        w.push(wi);
        sw.push(wi * prod(&treat_numerator, i));
        let wci = 1.0 / prod(&censor_denominator, i);
        wc.push(wci);
        swc.push(wci * prod(&censor_numerator, i));
    }
    let mut combined: Vec<f64> = (0..n)
        .map(|i| match (cfg.numerator, cfg.include_censor) {
            (Numerator::Unstabilized, true) => w[i] * wc[i],
            (Numerator::Unstabilized, false) => w[i],
            (Numerator::Stabilized, true) => sw[i] * swc[i],
            (Numerator::Stabilized, false) => sw[i],
        })
        .collect();
    if combined.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::DegenerateDesign("weights are not finite and positive".into()));
    }
    let truncation = match cfg.truncate {
        None => None,
        Some(q) => {
            if !(0.0..0.5).contains(&q) {
                return Err(Error::Config(format!("truncation quantile {q} must lie in [0, 0.5)")));
            }
            let mut s = combined.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (lo, hi) = (quantile(&s, q), quantile(&s, 1.0 - q));
            let mut n_truncated = 0;
            for v in combined.iter_mut() {
                let clipped = v.clamp(lo, hi);
                if clipped != *v {
                    n_truncated += 1;
                    *v = clipped;
                }
            }
            Some(TruncationReport { quantile: q, lower: lo, upper: hi, n_truncated })
        }
    };
    let mut warnings = Vec::new();
    if !boundary.is_empty() {
        warnings.push(Warning::Positivity { cells: boundary });
    }
    Ok(WeightSet {
        ids: c.ids.clone(),
        w,
        sw,
        wc,
        swc,
        combined,
        numerator: cfg.numerator,
        include_censor: cfg.include_censor,
        treat_denominator,
        treat_numerator,
        censor_denominator,
        censor_numerator,
        truncation,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paneldata::{Layout, PanelData, Roles};

    fn single_time(a: &[f64], l: Option<&[f64]>) -> Cohort {
        let n = a.len();
        let roles = Roles {
            treatment: "a".into(),
            covariates: if l.is_some() { vec!["l".into()] } else { vec![] },
            ..Roles::default()
        };
        let mut cols = vec![("a1".to_string(), a.to_vec())];
        if let Some(l) = l {
            cols.push(("l1".to_string(), l.to_vec()));
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        PanelData::new(Layout::Wide, roles, ids, cols, vec![]).unwrap().cohort().unwrap()
    }

    #[test]
    fn single_time_hand_weights() {
        let a = [1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let ws = compute_weights(&single_time(&a, None), &WeightConfig::default()).unwrap();
        for i in 0..a.len() {
            let expect = if a[i] == 1.0 { 2.5 } else { 1.0 / 0.6 };
            assert!((ws.w[i] - expect).abs() < 1e-9);
            assert!((ws.sw[i] - 1.0).abs() < 1e-9);
            assert_eq!(ws.wc[i], 1.0);
        }
    }

    #[test]
    fn perfect_prediction_gives_unit_weights() {
        let a = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let ws = compute_weights(&single_time(&a, Some(&a)), &WeightConfig::default()).unwrap();
        for i in 0..a.len() {
            assert!((ws.w[i] - 1.0).abs() < 1e-8);
        }
        assert!(matches!(ws.warnings[0], Warning::Positivity { .. }));
    }

    #[test]
    fn stabilized_is_w_times_numerator_product() {
        let a = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let l = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let ws = compute_weights(&single_time(&a, Some(&l)), &WeightConfig::default()).unwrap();
        for i in 0..a.len() {
            assert!((ws.sw[i] - ws.w[i] * ws.treat_numerator.get(i, 0)).abs() < 1e-12);
            assert!((1.0 / ws.w[i] - ws.treat_denominator.get(i, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_censoring_gives_unit_censor_weights() {
        let a = [1.0, 0.0, 1.0, 0.0];
        let cfg = WeightConfig { include_censor: true, ..WeightConfig::default() };
        let ws = compute_weights(&single_time(&a, None), &cfg).unwrap();
        assert!(ws.wc.iter().chain(&ws.swc).all(|&v| v == 1.0));
    }

    #[test]
    fn truncation_clips_to_quantiles() {
        let a = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let cfg = WeightConfig { numerator: Numerator::Unstabilized, truncate: Some(0.1), ..WeightConfig::default() };
        let ws = compute_weights(&single_time(&a, None), &cfg).unwrap();
        let t = ws.truncation.unwrap();
        assert!(ws.combined.iter().all(|&v| v >= t.lower && v <= t.upper));
        assert_eq!(t.n_truncated, 1);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0], 0.0), 1.0);
    }
}
