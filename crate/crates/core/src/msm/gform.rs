use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ice::{gform_means, IceDesign};
use super::{all_patterns, column_sd, msm_working_model, pattern_classes, CounterfactualTable, Estimator, MsmFit, OutcomeFamily};
use crate::error::{Error, Result};
use crate::glm::{Family, Link};
use crate::lcga::{fit_lcga_weighted, Classifier, LcgaConfig};
use crate::paneldata::Cohort;
use crate::weights::History;

#[derive(Debug, Clone)]
pub struct GformConfig {
    /// Zero-based reference class.
    pub reference: usize,
    pub rep: usize,
    pub seed: u64,
    pub history: History,
    /// Refit the trajectory model inside each bootstrap replicate; `None`
    /// keeps the classes fixed.
    pub refit: Option<LcgaConfig>,
}

impl GformConfig {
    pub fn new(reference: usize, seed: u64) -> Self {
        GformConfig { reference, rep: 50, seed, history: History::Markov, refit: None }
    }
}

/// Largest follow-up for which all `2^K` patterns are enumerated.
pub const MAX_ENUMERATED_K: usize = 16;

pub(crate) fn check_binary_outcome(cohort: &Cohort) -> Result<()> {
    for i in 0..cohort.n() {
        let y = cohort.terminal_outcome(i);
        if !y.is_nan() && y != 0.0 && y != 1.0 {
            return Err(Error::Config("g-computation and pooled LTMLE need a binary outcome".into()));
        }
    }
    if cohort.k() > MAX_ENUMERATED_K {
        return Err(Error::Config(format!("K = {} exceeds the pattern enumeration limit {MAX_ENUMERATED_K}", cohort.k())));
    }
    Ok(())
}

/// Multinomial resample counts for `n` individuals.
pub(crate) fn resample_counts(n: usize, seed: u64, replicate: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 + 1);
    let mut m = vec![0.0; n];
    for _ in 0..n {
        m[rng.random_range(0..n)] += 1.0;
    }
    m
}

fn working_coefficients(means: &[f64], classes: &[usize], n_classes: usize, reference: usize) -> Result<Vec<f64>> {
    let fit = msm_working_model(means, classes, None, n_classes, reference, Family::Binomial, Link::Logit)?;
    Ok(fit.coefficients.iter().copied().collect())
}

/// Counterfactual means of every pattern by iterated regressions, the
/// working model on those means, and bootstrap standard errors.
pub fn trajmsm_gform(cohort: &Cohort, classifier: &dyn Classifier, cfg: &GformConfig) -> Result<MsmFit> {
    check_binary_outcome(cohort)?;
    if cfg.rep < 2 {
        return Err(Error::Bootstrap(format!("rep = {} but at least 2 replicates are needed", cfg.rep)));
    }
    let k = cohort.k();
    let n_classes = classifier.n_classes();
    let patterns = all_patterns(k);
    let design = IceDesign::new(cohort, cfg.history.lags(k));
    let flows = design.flows(&vec![1.0; cohort.n()]);
    let means = gform_means(&design, &flows, &patterns)?;
    let classes = pattern_classes(classifier, k)?;
    let beta = working_coefficients(&means, &classes, n_classes, cfg.reference)?;

    let rows: Vec<Vec<f64>> = (0..cohort.n()).map(|i| cohort.treatment.row(i).to_vec()).collect();
    let replicates: Vec<Result<Vec<f64>>> = (0..cfg.rep)
        .into_par_iter()
        .map(|b| {
            let mult = resample_counts(cohort.n(), cfg.seed, b);
            let flows = design.flows(&mult);
            let means = gform_means(&design, &flows, &patterns)?;
            let classes = match &cfg.refit {
                Some(lc) => pattern_classes(&fit_lcga_weighted(&rows, &mult, lc)?, k)?,
                None => classes.clone(),
            };
            working_coefficients(&means, &classes, n_classes, cfg.reference)
        })
        .collect();
    let (boot, failed): (Vec<_>, Vec<_>) = replicates.into_iter().partition(|r| r.is_ok());
    let boot: Vec<Vec<f64>> = boot.into_iter().map(|r| r.unwrap()).collect();
    if boot.len() < 2 || failed.len() * 10 > cfg.rep {
        let first = failed.into_iter().next().and_then(|r| r.err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Bootstrap(format!("{} of {} replicates failed; first error: {first}", cfg.rep - boot.len(), cfg.rep)));
    }
    if !failed.is_empty() {
        log::warn!("{} of {} bootstrap replicates failed and were dropped", failed.len(), cfg.rep);
    }
    let se = column_sd(&boot);
    let mut fit = MsmFit::assemble(Estimator::Gform, OutcomeFamily::Binomial, cfg.reference, cohort.n(), n_classes, beta, se)?;
    fit.bootstrap = Some(boot);
    fit.counterfactual = Some(CounterfactualTable { k, means, classes });
    Ok(fit)
}

/// Counterfactual means only, for checks against the oracle.
pub fn gform_pattern_means(cohort: &Cohort, history: History) -> Result<Vec<f64>> {
    let design = IceDesign::new(cohort, history.lags(cohort.k()));
    let flows = design.flows(&vec![1.0; cohort.n()]);
    gform_means(&design, &flows, &all_patterns(cohort.k()))
}
