//! Marginal structural models with trajectory groups as the exposure.
//!
//! Three estimators share the working model `g(E[Y^ā]) = β₀ + Σ_j β_j 1{class(ā) = j}`:
//! weighted regression ([`trajmsm_ipw`]), iterated conditional expectations
//! with bootstrap inference ([`trajmsm_gform`]) and pooled longitudinal TMLE
//! with influence-function inference ([`trajmsm_pltmle`]).

pub(crate) mod gform;
pub(crate) mod ice;
mod ipw;
pub(crate) mod pltmle;
mod report;
#[cfg(test)]
mod tests_estimators;

pub use gform::{gform_pattern_means, trajmsm_gform, GformConfig, MAX_ENUMERATED_K};
pub use ipw::{naive_adjusted, trajmsm_ipw, IpwConfig, OutcomeFamily};
pub use pltmle::{trajmsm_pltmle, PltmleConfig};
pub use report::{CoefficientRow, Report};

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result, Warning};
use crate::glm::{Family, Glm, GlmFit, Link};
use crate::lcga::Classifier;
use crate::paneldata::Cohort;

/// Two-sided 97.5% standard normal quantile.
pub const Z975: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ipw,
    Gform,
    Pltmle,
}

impl Estimator {
    fn prefix(self) -> &'static str {
        match self {
            Estimator::Ipw => "",
            Estimator::Gform => "gform_",
            Estimator::Pltmle => "pltmle_",
        }
    }
}

/// Pattern number `p` as treatment bits, first time most significant.
pub fn pattern_bits(p: usize, k: usize) -> Vec<u8> {
    (0..k).map(|t| ((p >> (k - 1 - t)) & 1) as u8).collect()
}

pub fn pattern_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// All `2^k` patterns in index order.
pub fn all_patterns(k: usize) -> Vec<Vec<u8>> {
    (0..1usize << k).map(|p| pattern_bits(p, k)).collect()
}

/// Class of every pattern; errors if a class receives no pattern.
pub fn pattern_classes(classifier: &dyn Classifier, k: usize) -> Result<Vec<usize>> {
    let classes: Vec<usize> = all_patterns(k).iter().map(|p| classifier.classify(p)).collect();
    for j in 0..classifier.n_classes() {
        if !classes.contains(&j) {
            return Err(Error::EmptyGroup { class: j + 1, interval: None });
        }
    }
    Ok(classes)
}

/// Intercept plus one dummy per non-reference class.
pub fn class_design_row(class: usize, n_classes: usize, reference: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    row.extend((0..n_classes).filter(|&j| j != reference).map(|j| if j == class { 1.0 } else { 0.0 }));
    row
}

pub fn coefficient_names(estimator: Estimator, n_classes: usize, reference: usize) -> Vec<String> {
    let mut names = vec!["(Intercept)".to_string()];
    names.extend(
        (0..n_classes)
            .filter(|&j| j != reference)
            .map(|j| format!("{}group{}", estimator.prefix(), j + 1)),
    );
    names
}

/// Regression of (counterfactual or observed) means on class dummies.
pub fn msm_working_model(
    means: &[f64],
    classes: &[usize],
    weights: Option<&[f64]>,
    n_classes: usize,
    reference: usize,
    family: Family,
    link: Link,
) -> Result<GlmFit> {
    if reference >= n_classes {
        return Err(Error::Config(format!("reference class {} out of range 1..={n_classes}", reference + 1)));
    }
    let p = n_classes;
    let x = DMatrix::from_fn(means.len(), p, |r, c| class_design_row(classes[r], n_classes, reference)[c]);
    Glm::new(family, link).fit(&x, means, weights, None, None)
}

/// Class with the lowest observed mean treatment; ties go to the lower label.
pub fn lowest_treatment_class(cohort: &Cohort, assignments: &[usize], n_classes: usize) -> usize {
    let means = observed_treatment_means(cohort, assignments, n_classes);
    let mut best = 0;
    for j in 1..n_classes {
        if means[j] < means[best] {
            best = j;
        }
    }
    best
}

/// Mean observed treatment over present person-times, per class.
pub fn observed_treatment_means(cohort: &Cohort, assignments: &[usize], n_classes: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n_classes];
    let mut cnt = vec![0.0; n_classes];
    for i in 0..cohort.n() {
        for t in 0..cohort.k() {
            if cohort.present(i, t) {
                sum[assignments[i]] += cohort.a(i, t);
                cnt[assignments[i]] += 1.0;
            }
        }
    }
    sum.iter().zip(&cnt).map(|(s, c)| if *c > 0.0 { s / c } else { f64::NAN }).collect()
}

/// Per-pattern counterfactual means with their classes.
#[derive(Debug, Clone, Serialize)]
pub struct CounterfactualTable {
    pub k: usize,
    pub means: Vec<f64>,
    pub classes: Vec<usize>,
}

impl CounterfactualTable {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["pattern", "mean", "class"])?;
        for (p, (m, c)) in self.means.iter().zip(&self.classes).enumerate() {
            let bits: String = pattern_bits(p, self.k).iter().map(|b| char::from(b'0' + b)).collect();
            w.write_record([bits, format!("{m}"), format!("{}", c + 1)])?;
        }
        w.flush().map_err(|e| Error::io("<counterfactual>", e))?;
        Ok(())
    }
}

/// Working-model estimates with standard errors and Wald intervals.
#[derive(Debug, Clone, Serialize)]
pub struct MsmFit {
    pub estimator: Estimator,
    pub family: OutcomeFamily,
    /// Zero-based reference class.
    pub reference: usize,
    pub n: usize,
    pub n_classes: usize,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    /// Bootstrap replicate coefficients (g-computation).
    #[serde(skip)]
    pub bootstrap: Option<Vec<Vec<f64>>>,
    /// Per-individual influence-function values (pooled LTMLE).
    #[serde(skip)]
    pub influence: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    pub counterfactual: Option<CounterfactualTable>,
    /// Fluctuation coefficients per time (pooled LTMLE).
    #[serde(skip)]
    pub fluctuation: Option<Vec<Vec<f64>>>,
    pub warnings: Vec<Warning>,
}

impl MsmFit {
    pub(crate) fn assemble(
        estimator: Estimator,
        family: OutcomeFamily,
        reference: usize,
        n: usize,
        n_classes: usize,
        coefficients: Vec<f64>,
        se: Vec<f64>,
    ) -> Result<MsmFit> {
        let (p_values, ci_lower, ci_upper) = wald(&coefficients, &se);
        if se.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::SingularInformation(format!("non-positive standard error in {se:?}")));
        }
        Ok(MsmFit {
            estimator,
            family,
            reference,
            n,
            n_classes,
            names: coefficient_names(estimator, n_classes, reference),
            coefficients,
            se,
            p_values,
            ci_lower,
            ci_upper,
            bootstrap: None,
            influence: None,
            counterfactual: None,
            fluctuation: None,
            warnings: Vec::new(),
        })
    }
}

pub(crate) fn wald(beta: &[f64], se: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let normal = Normal::standard();
    let p = beta
        .iter()
        .zip(se)
        .map(|(b, s)| 2.0 * (1.0 - normal.cdf((b / s).abs())))
        .collect();
    let lo = beta.iter().zip(se).map(|(b, s)| b - Z975 * s).collect();
    let hi = beta.iter().zip(se).map(|(b, s)| b + Z975 * s).collect();
    (p, lo, hi)
}

/// Sample standard deviation per column.
pub(crate) fn column_sd(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    (0..p)
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            (rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect()
}
