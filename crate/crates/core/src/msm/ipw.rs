use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{class_design_row, Estimator, MsmFit};
use crate::error::{Error, Result};
use crate::glm::{fit_cox, fit_glm, Family, GlmFit, Link};
use crate::lcga::Classifier;
use crate::paneldata::Cohort;
use crate::weights::{compute_weights, WeightConfig, WeightSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeFamily {
    Binomial,
    Gaussian,
    Poisson,
    Survival,
}

impl std::str::FromStr for OutcomeFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binomial" => Ok(OutcomeFamily::Binomial),
            "gaussian" => Ok(OutcomeFamily::Gaussian),
            "poisson" => Ok(OutcomeFamily::Poisson),
            "survival" => Ok(OutcomeFamily::Survival),
            other => Err(Error::Config(format!(
                "family '{other}' must be binomial, gaussian, poisson or survival"
            ))),
        }
    }
}

impl OutcomeFamily {
    pub(crate) fn glm(self) -> Option<(Family, Link)> {
        match self {
            OutcomeFamily::Binomial => Some((Family::Binomial, Link::Logit)),
            OutcomeFamily::Gaussian => Some((Family::Gaussian, Link::Identity)),
            OutcomeFamily::Poisson => Some((Family::Poisson, Link::Log)),
            OutcomeFamily::Survival => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpwConfig {
    pub family: OutcomeFamily,
    pub weights: WeightConfig,
    /// Zero-based reference class.
    pub reference: usize,
}

impl Default for IpwConfig {
    fn default() -> Self {
        IpwConfig { family: OutcomeFamily::Binomial, weights: WeightConfig::default(), reference: 0 }
    }
}

/// Class of every individual from their observed history.
pub(crate) fn assign_individuals(cohort: &Cohort, classifier: &dyn Classifier) -> Vec<Option<usize>> {
    (0..cohort.n()).map(|i| classifier.classify_history(cohort.treatment.row(i))).collect()
}

/// Rows entering the outcome regression: observed outcome and class.
fn analysis_rows(cohort: &Cohort, classes: &[Option<usize>], family: OutcomeFamily) -> Vec<usize> {
    (0..cohort.n())
        .filter(|&i| {
            classes[i].is_some()
                && !cohort.terminal_outcome(i).is_nan()
                && (family != OutcomeFamily::Survival
                    || cohort.event_time.as_ref().is_some_and(|e| !e[i].is_nan()))
        })
        .collect()
}

fn check_classes(rows: &[usize], classes: &[Option<usize>], y: &[f64], n_classes: usize, binary: bool) -> Result<()> {
    for j in 0..n_classes {
        let ys: Vec<f64> = rows.iter().filter(|&&i| classes[i] == Some(j)).map(|&i| y[i]).collect();
        if ys.is_empty() {
            return Err(Error::EmptyGroup { class: j + 1, interval: None });
        }
        if binary && n_classes > 1 && ys.iter().all(|&v| v == ys[0]) {
            return Err(Error::DegenerateDesign(format!(
                "every outcome in group {} equals {}; the log odds is unbounded",
                j + 1,
                ys[0]
            )));
        }
    }
    Ok(())
}

/// Weighted working-model regression given precomputed weights.
pub(crate) fn ipw_with_weights(
    cohort: &Cohort,
    classes: &[Option<usize>],
    n_classes: usize,
    weights: &[f64],
    family: OutcomeFamily,
    reference: usize,
) -> Result<MsmFit> {
    if reference >= n_classes {
        return Err(Error::Config(format!("reference class {} out of range 1..={n_classes}", reference + 1)));
    }
    let y: Vec<f64> = (0..cohort.n()).map(|i| cohort.terminal_outcome(i)).collect();
    let rows = analysis_rows(cohort, classes, family);
    let binary = matches!(family, OutcomeFamily::Binomial);
    check_classes(&rows, classes, &y, n_classes, binary)?;
    let x = DMatrix::from_fn(rows.len(), n_classes, |r, c| {
        class_design_row(classes[rows[r]].unwrap(), n_classes, reference)[c]
    });
    let w: Vec<f64> = rows.iter().map(|&i| weights[i]).collect();
    let cluster: Vec<usize> = rows.iter().map(|&i| cohort.cluster[i]).collect();
    let n_ids = {
        let mut c = cluster.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    };
    match family.glm() {
        Some((fam, link)) => {
            let yy: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let fit = fit_glm(&x, &yy, fam, link, &w, Some(&cluster))?;
            let mut out = MsmFit::assemble(
                Estimator::Ipw,
                family,
                reference,
                n_ids,
                n_classes,
                fit.coefficients.iter().copied().collect(),
                fit.std_errors_robust(),
            )?;
            out.warnings = fit.warnings;
            Ok(out)
        }
        None => {
            let times = cohort.event_time.as_ref().ok_or_else(|| Error::Schema("survival outcome needs an event time column".into()))?;
            let t: Vec<f64> = rows.iter().map(|&i| times[i]).collect();
            let d: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let xc = x.columns(1, n_classes - 1).into_owned();
            let fit = fit_cox(&t, &d, &xc, &w, &cluster)?;
            let mut out = MsmFit::assemble(
                Estimator::Ipw,
                family,
                reference,
                n_ids,
                n_classes,
                fit.coefficients.iter().copied().collect(),
                fit.std_errors_robust(),
            )?;
            out.names.remove(0);
            Ok(out)
        }
    }
}

/// IPW estimate of the trajectory-group working model.
pub fn trajmsm_ipw(cohort: &Cohort, classifier: &dyn Classifier, cfg: &IpwConfig) -> Result<(MsmFit, WeightSet)> {
    let ws = compute_weights(cohort, &cfg.weights)?;
    let classes = assign_individuals(cohort, classifier);
    let mut fit = ipw_with_weights(cohort, &classes, classifier.n_classes(), &ws.combined, cfg.family, cfg.reference)?;
    fit.warnings.extend(ws.warnings.iter().cloned());
    Ok((fit, ws))
}

/// Conventional outcome regression of `Y` on class dummies adjusted for every
/// time-varying covariate and the baseline covariates, unweighted.
pub fn naive_adjusted(cohort: &Cohort, classifier: &dyn Classifier, reference: usize) -> Result<GlmFit> {
    let classes = assign_individuals(cohort, classifier);
    let j = classifier.n_classes();
    let rows = analysis_rows(cohort, &classes, OutcomeFamily::Binomial);
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            let mut r = class_design_row(classes[i].unwrap(), j, reference);
            for g in &cohort.covariates {
                r.extend(g.row(i).iter().map(|v| if v.is_nan() { 0.0 } else { *v }));
            }
            r.extend(cohort.baseline.iter().map(|b| b[i]));
            r
        })
        .collect();
    let p = design[0].len();
    let x = DMatrix::from_fn(rows.len(), p, |r, c| design[r][c]);
    let y: Vec<f64> = rows.iter().map(|&i| cohort.terminal_outcome(i)).collect();
    fit_glm(&x, &y, Family::Binomial, Link::Logit, &vec![1.0; rows.len()], None)
}
