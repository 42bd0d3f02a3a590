//! History-restricted marginal structural models: follow-up is cut into
//! overlapping windows of length `s`, one trajectory model is fitted to all
//! windows, and a log-linear working model with shared class contrasts is
//! pooled over windows.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::glm::{fit_glm, Family, Glm, GlmFit, Link};
use crate::lcga::{fit_lcga, Classifier, LcgaConfig, LcgaModel};
use crate::linalg;
use crate::msm::gform::{check_binary_outcome, resample_counts};
use crate::msm::ice::{gform_means, IceDesign};
use crate::msm::pltmle::pltmle_core;
use crate::msm::{
    all_patterns, class_design_row, coefficient_names, column_sd, pattern_classes, Estimator, MsmFit, OutcomeFamily,
    Report,
};
use crate::paneldata::{split_data, Cohort, IntervalSet, PanelData};
use crate::weights::{compute_weights, History, WeightConfig};

/// Working-model loss for the log-linear risk model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HrmsmFamily {
    Poisson,
    /// Log-binomial, falling back to Poisson when the fit fails.
    Binomial,
}

impl std::str::FromStr for HrmsmFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(HrmsmFamily::Poisson),
            "binomial" => Ok(HrmsmFamily::Binomial),
            other => Err(Error::Config(format!("family '{other}' must be poisson or binomial"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HrmsmConfig {
    /// Interval length `s`.
    pub s: usize,
    pub lcga: LcgaConfig,
    pub family: HrmsmFamily,
    /// One intercept per interval; otherwise a single pooled intercept.
    pub interval_effects: bool,
    /// Zero-based reference class; `None` picks the class with the lowest
    /// observed mean treatment.
    pub reference: Option<usize>,
    pub weights: WeightConfig,
    pub history: History,
    pub include_censor: bool,
    pub rep: usize,
    pub seed: u64,
}

impl HrmsmConfig {
    pub fn new(s: usize, lcga: LcgaConfig) -> Self {
        HrmsmConfig {
            s,
            seed: lcga.seed,
            lcga,
            family: HrmsmFamily::Poisson,
            interval_effects: true,
            reference: None,
            weights: WeightConfig::default(),
            history: History::Markov,
            include_censor: true,
            rep: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceKind {
    GeeSandwich,
    BlockBootstrap,
    PooledInfluence,
}

#[derive(Debug, Clone, Serialize)]
pub struct HrmsmFit {
    /// Coefficients: intercept, shared class contrasts, then interval effects.
    pub fit: MsmFit,
    pub n_intervals: usize,
    pub interval_size: usize,
    /// Mean observed treatment per class over the pooled windows.
    pub treatment_means: Vec<f64>,
    /// Windows per class and interval, `class_counts[d][j]`.
    pub class_counts: Vec<Vec<usize>>,
    pub variance: VarianceKind,
    #[serde(skip)]
    pub vcov: DMatrix<f64>,
    #[serde(skip)]
    pub model: LcgaModel,
}

impl HrmsmFit {
    pub fn report(&self) -> Report {
        Report::from_fit(&self.fit)
            .with_diagnostic("intervals", self.n_intervals.into())
            .with_diagnostic("interval_size", self.interval_size.into())
            .with_diagnostic("treatment_means", serde_json::json!(self.treatment_means))
    }

    /// Class, mean treatment table as CSV.
    pub fn write_treatment_means<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "mean_treatment"])?;
        for (j, m) in self.treatment_means.iter().enumerate() {
            w.write_record([format!("{}", j + 1), format!("{m}")])?;
        }
        w.flush().map_err(|e| Error::io("<treatment means>", e))?;
        Ok(())
    }
}

/// Intervals, the pooled trajectory model and each window's class.
struct Setup {
    set: IntervalSet,
    cohorts: Vec<Cohort>,
    model: LcgaModel,
    /// `classes[d][r]` for row `r` of interval `d`.
    classes: Vec<Vec<Option<usize>>>,
    reference: usize,
    treatment_means: Vec<f64>,
    class_counts: Vec<Vec<usize>>,
}

fn setup(data: &PanelData, cfg: &HrmsmConfig) -> Result<Setup> {
    let set = split_data(data, cfg.s)?;
    let cohorts: Vec<Cohort> = (0..set.n_intervals()).map(|d| set.interval_cohort(d)).collect();
    let pooled = set.pooled_cohort()?;
    let model = fit_lcga(&pooled, &cfg.lcga)?;
    let j = model.n_classes();
    let classes: Vec<Vec<Option<usize>>> = cohorts
        .iter()
        .map(|c| (0..c.n()).map(|i| model.classify_history(c.treatment.row(i))).collect())
        .collect();
    let treatment_means = class_treatment_means(&cohorts, &classes, j);
    let reference = match cfg.reference {
        Some(r) if r >= j => return Err(Error::Config(format!("reference class {} out of range 1..={j}", r + 1))),
        Some(r) => r,
        None => lowest_mean(&treatment_means),
    };
    let class_counts: Vec<Vec<usize>> = classes
        .iter()
        .map(|cl| (0..j).map(|g| cl.iter().filter(|&&c| c == Some(g)).count()).collect())
        .collect();
    for (d, counts) in class_counts.iter().enumerate() {
        if let Some(g) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyGroup { class: g + 1, interval: Some(d + 1) });
        }
    }
    Ok(Setup { set, cohorts, model, classes, reference, treatment_means, class_counts })
}

/// Mean observed treatment over present person-times per class.
fn class_treatment_means(cohorts: &[Cohort], classes: &[Vec<Option<usize>>], j: usize) -> Vec<f64> {
    let mut sum = vec![0.0; j];
    let mut cnt = vec![0.0; j];
    for (c, cl) in cohorts.iter().zip(classes) {
        for i in 0..c.n() {
            let Some(g) = cl[i] else { continue };
            for t in 0..c.k() {
                if c.present(i, t) {
                    sum[g] += c.a(i, t);
                    cnt[g] += 1.0;
                }
            }
        }
    }
    sum.iter().zip(&cnt).map(|(s, n)| if *n > 0.0 { s / n } else { f64::NAN }).collect()
}

/// Index of the smallest mean; ties go to the lower label.
pub fn lowest_mean(means: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..means.len() {
        if means[j] < means[best] {
            best = j;
        }
    }
    best
}

/// Working-model row: class design then interval indicators for `d >= 1`.
fn design_row(class: usize, d: usize, n_classes: usize, reference: usize, n_intervals: usize, fe: bool) -> Vec<f64> {
    let mut r = class_design_row(class, n_classes, reference);
    if fe {
        r.extend((1..n_intervals).map(|e| if e == d { 1.0 } else { 0.0 }));
    }
    r
}

fn names(estimator: Estimator, n_classes: usize, reference: usize, n_intervals: usize, fe: bool) -> Vec<String> {
    let mut v = coefficient_names(estimator, n_classes, reference);
    if fe {
        v.extend((2..=n_intervals).map(|d| format!("interval{d}")));
    }
    v
}

/// Log-link fit with the requested loss; log-binomial falls back to Poisson.
fn log_link_fit(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    cluster: Option<&[usize]>,
    family: HrmsmFamily,
) -> Result<(GlmFit, Vec<Warning>)> {
    match family {
        HrmsmFamily::Poisson => Ok((fit_glm(x, y, Family::Poisson, Link::Log, w, cluster)?, Vec::new())),
        HrmsmFamily::Binomial => match fit_glm(x, y, Family::Binomial, Link::Log, w, cluster) {
            Ok(f) if f.fitted.iter().all(|&m| m < 1.0) => Ok((f, Vec::new())),
            Ok(_) => fallback(x, y, w, cluster, "fitted risk reached 1".into()),
            Err(e) => fallback(x, y, w, cluster, e.to_string()),
        },
    }
}

fn fallback(x: &DMatrix<f64>, y: &[f64], w: &[f64], cluster: Option<&[usize]>, reason: String) -> Result<(GlmFit, Vec<Warning>)> {
    log::warn!("log-binomial fit failed ({reason}); using the Poisson loss");
    let f = fit_glm(x, y, Family::Poisson, Link::Log, w, cluster)?;
    Ok((f, vec![Warning::LinkFallback { reason }]))
}

/// Point-estimate log-link fit of pattern means.
fn means_fit(x: &DMatrix<f64>, y: &[f64], family: HrmsmFamily) -> Result<Vec<f64>> {
    let fam = match family {
        HrmsmFamily::Poisson => Family::Poisson,
        HrmsmFamily::Binomial => Family::Binomial,
    };
    let fit = Glm::new(fam, Link::Log).point_estimate_only().fit(x, y, None, None, None);
    let fit = match (fit, family) {
        (Ok(f), _) => f,
        (Err(_), HrmsmFamily::Binomial) => {
            Glm::new(Family::Poisson, Link::Log).point_estimate_only().fit(x, y, None, None, None)?
        }
        (Err(e), _) => return Err(e),
    };
    Ok(fit.coefficients.iter().copied().collect())
}

fn outcome_family(family: HrmsmFamily) -> OutcomeFamily {
    match family {
        HrmsmFamily::Poisson => OutcomeFamily::Poisson,
        HrmsmFamily::Binomial => OutcomeFamily::Binomial,
    }
}

fn finish(
    st: Setup,
    estimator: Estimator,
    cfg: &HrmsmConfig,
    beta: Vec<f64>,
    vcov: DMatrix<f64>,
    variance: VarianceKind,
    warnings: Vec<Warning>,
) -> Result<HrmsmFit> {
    let j = st.model.n_classes();
    let d = st.set.n_intervals();
    let n = st.set.source().n_clusters;
    let se = (0..beta.len()).map(|a| vcov[(a, a)].max(0.0).sqrt()).collect();
    let mut fit = MsmFit::assemble(estimator, outcome_family(cfg.family), st.reference, n, j, beta, se)?;
    fit.names = names(estimator, j, st.reference, d, cfg.interval_effects);
    fit.warnings = warnings;
    Ok(HrmsmFit {
        fit,
        n_intervals: d,
        interval_size: cfg.s,
        treatment_means: st.treatment_means,
        class_counts: st.class_counts,
        variance,
        vcov,
        model: st.model,
    })
}

/// Pooled weighted log-linear regression of each window's end outcome on its
/// class, with interval-local weights and a sandwich clustered on the
/// original individual.
pub fn trajhrmsm_ipw(data: &PanelData, cfg: &HrmsmConfig) -> Result<HrmsmFit> {
    let st = setup(data, cfg)?;
    let (j, nd) = (st.model.n_classes(), st.set.n_intervals());
    let weight_sets: Vec<_> = st
        .cohorts
        .par_iter()
        .map(|c| compute_weights(c, &cfg.weights))
        .collect::<Result<Vec<_>>>()?;
    let (mut rows, mut y, mut w, mut cluster) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut warnings = Vec::new();
    for (d, (c, ws)) in st.cohorts.iter().zip(&weight_sets).enumerate() {
        warnings.extend(ws.warnings.iter().cloned());
        let mut seen = vec![false; j];
        for i in 0..c.n() {
            let (Some(g), yi) = (st.classes[d][i], c.terminal_outcome(i)) else { continue };
            if yi.is_nan() {
                continue;
            }
            seen[g] = true;
            rows.push(design_row(g, d, j, st.reference, nd, cfg.interval_effects));
            y.push(yi);
            w.push(ws.combined[i]);
            cluster.push(c.cluster[i]);
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyGroup { class: g + 1, interval: Some(d + 1) });
        }
    }
    let p = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), p, |r, c| rows[r][c]);
    let (fit, extra) = log_link_fit(&x, &y, &w, Some(&cluster), cfg.family)?;
    warnings.extend(fit.warnings.iter().cloned());
    warnings.extend(extra);
    let vcov = fit.vcov_robust.clone();
    let beta = fit.coefficients.iter().copied().collect();
    finish(st, Estimator::Ipw, cfg, beta, vcov, VarianceKind::GeeSandwich, warnings)
}

/// Design and response for the pooled regression of pattern means.
fn pattern_design(
    means: &[Vec<f64>],
    classes: &[usize],
    j: usize,
    reference: usize,
    fe: bool,
) -> (DMatrix<f64>, Vec<f64>) {
    let nd = means.len();
    let rows: Vec<Vec<f64>> = (0..nd)
        .flat_map(|d| classes.iter().map(move |&c| design_row(c, d, j, reference, nd, fe)))
        .collect();
    let x = DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]);
    (x, means.concat())
}

/// Iterated-expectation means per interval and pattern, pooled log-linear
/// working model, block bootstrap over original individuals.
pub fn trajhrmsm_gform(data: &PanelData, cfg: &HrmsmConfig) -> Result<HrmsmFit> {
    let st = setup(data, cfg)?;
    for c in &st.cohorts {
        check_binary_outcome(c)?;
    }
    if cfg.rep < 2 {
        return Err(Error::Bootstrap(format!("rep = {} but at least 2 replicates are needed", cfg.rep)));
    }
    let j = st.model.n_classes();
    let patterns = all_patterns(cfg.s);
    let classes = pattern_classes(&st.model, cfg.s)?;
    let designs: Vec<IceDesign> = st.cohorts.iter().map(|c| IceDesign::new(c, cfg.history.lags(cfg.s))).collect();
    let estimate = |mult: Option<&[f64]>| -> Result<Vec<f64>> {
        let means = designs
            .iter()
            .enumerate()
            .map(|(d, des)| {
                let m: Vec<f64> = match mult {
                    None => vec![1.0; des.n()],
                    Some(m) => st.set.members(d).iter().map(|&r| m[r]).collect(),
                };
                gform_means(des, &des.flows(&m), &patterns)
            })
            .collect::<Result<Vec<_>>>()?;
        let (x, y) = pattern_design(&means, &classes, j, st.reference, cfg.interval_effects);
        means_fit(&x, &y, cfg.family)
    };
    let beta = estimate(None)?;
    let n_source = st.set.source().n();
    let replicates: Vec<Result<Vec<f64>>> = (0..cfg.rep)
        .into_par_iter()
        .map(|b| estimate(Some(&resample_counts(n_source, cfg.seed, b))))
        .collect();
    let (ok, failed): (Vec<_>, Vec<_>) = replicates.into_iter().partition(|r| r.is_ok());
    let boot: Vec<Vec<f64>> = ok.into_iter().map(|r| r.unwrap()).collect();
    if boot.len() < 2 || failed.len() * 10 > cfg.rep {
        let first = failed.into_iter().next().and_then(|r| r.err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Bootstrap(format!("{} of {} replicates failed; first error: {first}", cfg.rep - boot.len(), cfg.rep)));
    }
    let sd = column_sd(&boot);
    let p = beta.len();
    let mean: Vec<f64> = (0..p).map(|a| boot.iter().map(|r| r[a]).sum::<f64>() / boot.len() as f64).collect();
    let vcov = DMatrix::from_fn(p, p, |a, b| {
        if a == b {
            sd[a] * sd[a]
        } else {
            boot.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (boot.len() as f64 - 1.0)
        }
    });
    let mut out = finish(st, Estimator::Gform, cfg, beta, vcov, VarianceKind::BlockBootstrap, Vec::new())?;
    out.fit.bootstrap = Some(boot);
    Ok(out)
}

/// Influence values of one interval, keyed by original individual.
#[derive(Debug, Clone)]
pub struct IntervalInfluence {
    pub ids: Vec<usize>,
    pub values: Vec<DVector<f64>>,
}

/// `(1/n²)[Σ_d n_d Cov_d + Σ_{d<d'} n_{dd'} (C_{dd'} + C_{dd'}ᵀ)]`, where
/// `Cov_d` is the sample covariance of interval `d`, `C_{dd'}` the sample
/// cross-covariance over individuals present in both intervals, `n_{dd'}`
/// their number and `n` the number of distinct individuals.
pub fn pooled_influence_variance(parts: &[IntervalInfluence]) -> Result<DMatrix<f64>> {
    let first = parts.first().ok_or_else(|| Error::Shape("no intervals".into()))?;
    let p = first.values.first().map_or(0, |v| v.len());
    let mut all_ids = Vec::new();
    let mut index = Vec::with_capacity(parts.len());
    for (d, part) in parts.iter().enumerate() {
        if part.ids.len() != part.values.len() {
            return Err(Error::MismatchedId(format!(
                "interval {} has {} ids but {} influence values",
                d + 1,
                part.ids.len(),
                part.values.len()
            )));
        }
        let mut map = std::collections::HashMap::with_capacity(part.ids.len());
        for (r, &id) in part.ids.iter().enumerate() {
            if map.insert(id, r).is_some() {
                return Err(Error::MismatchedId(format!("individual {id} appears twice in interval {}", d + 1)));
            }
            if part.values[r].len() != p {
                return Err(Error::MismatchedId(format!("influence length differs for individual {id}")));
            }
        }
        all_ids.extend_from_slice(&part.ids);
        index.push(map);
    }
    all_ids.sort_unstable();
    all_ids.dedup();
    let n = all_ids.len() as f64;
    let mut total = DMatrix::<f64>::zeros(p, p);
    for part in parts {
        total += linalg::sample_covariance(&part.values) * part.values.len() as f64;
    }
    for d in 0..parts.len() {
        for e in d + 1..parts.len() {
            let pairs: Vec<(usize, usize)> = parts[d]
                .ids
                .iter()
                .enumerate()
                .filter_map(|(r, id)| index[e].get(id).map(|&q| (r, q)))
                .collect();
            if pairs.len() < 2 {
                continue;
            }
            let m = pairs.len() as f64;
            let mean_d = pairs.iter().fold(DVector::zeros(p), |acc, &(r, _)| acc + &parts[d].values[r]) / m;
            let mean_e = pairs.iter().fold(DVector::zeros(p), |acc, &(_, q)| acc + &parts[e].values[q]) / m;
            let mut c = DMatrix::<f64>::zeros(p, p);
            for &(r, q) in &pairs {
                c += (&parts[d].values[r] - &mean_d) * (&parts[e].values[q] - &mean_e).transpose();
            }
            c /= m - 1.0;
            total += (&c + c.transpose()) * m;
        }
    }
    Ok(total / (n * n))
}

/// Pooled LTMLE per interval, pooled log-linear working model, variance from
/// influence values aligned across intervals by original individual.
pub fn trajhrmsm_pltmle(data: &PanelData, cfg: &HrmsmConfig) -> Result<HrmsmFit> {
    let st = setup(data, cfg)?;
    for c in &st.cohorts {
        check_binary_outcome(c)?;
    }
    let j = st.model.n_classes();
    let nd = st.set.n_intervals();
    let classes = pattern_classes(&st.model, cfg.s)?;
    let z: Vec<Vec<f64>> = classes.iter().map(|&c| class_design_row(c, j, st.reference)).collect();
    let cores = st
        .cohorts
        .par_iter()
        .map(|c| pltmle_core(c, &z, cfg.history, cfg.include_censor))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<Vec<f64>> = cores.iter().map(|c| c.psi.clone()).collect();
    let (x, y) = pattern_design(&means, &classes, j, st.reference, cfg.interval_effects);
    let beta = means_fit(&x, &y, cfg.family)?;
    let bvec = DVector::from_column_slice(&beta);
    // derivative of the pooled estimating equation
    let p = beta.len();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for r in 0..x.nrows() {
        let row = x.row(r).transpose();
        let mu = (row.dot(&bvec)).exp();
        m += &row * row.transpose() * mu;
    }
    let minv = linalg::inverse_spd(&m).ok_or_else(|| Error::SingularInformation("pooled working-model derivative".into()))?;
    let n = st.set.source().n_clusters as f64;
    let n_pat = classes.len();
    let mut parts = Vec::with_capacity(nd);
    let mut warnings = Vec::new();
    for (d, (core, c)) in cores.iter().zip(&st.cohorts).enumerate() {
        warnings.extend(core.warnings.iter().cloned());
        let nd_rows = c.n() as f64;
        let rows: Vec<Vec<f64>> = (0..n_pat)
            .map(|pi| design_row(classes[pi], d, j, st.reference, nd, cfg.interval_effects))
            .collect();
        let values = core
            .d
            .iter()
            .map(|di| {
                let mut acc = DVector::<f64>::zeros(p);
                for (pi, row) in rows.iter().enumerate() {
                    for a in 0..p {
                        acc[a] += row[a] * di[pi];
                    }
                }
                // scaled so the pooled display applies with n distinct individuals
                &minv * acc * (n / nd_rows)
            })
            .collect();
        parts.push(IntervalInfluence { ids: c.cluster.clone(), values });
    }
    let vcov = pooled_influence_variance(&parts)?;
    let mut out = finish(st, Estimator::Pltmle, cfg, beta, vcov, VarianceKind::PooledInfluence, warnings)?;
    out.fit.influence = None;
    Ok(out)
}
