//! Simulated cohorts with treatment-confounder feedback and their exact
//! counterfactual truth.
//!
//! Per time `t`: binary covariates `hyper_t` and `bmi_t` depend on their own
//! previous value, the previous treatment and the baseline pair `(age, sex)`;
//! treatment `A_t` depends on `A_{t-1}`, `L_t` and `V`; the outcome depends on
//! the last two treatments, the last covariates and `V`. Values before the
//! first time are zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{expit, logit};
use crate::lcga::Classifier;
use crate::msm::{all_patterns, coefficient_names, pattern_classes, Estimator};
use crate::paneldata::{Cohort, Grid, Layout, Outcome, PanelData, Roles};

/// Coefficients of a binary covariate given its lag, the lagged treatment and `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateCoef {
    pub intercept: f64,
    pub lag: f64,
    pub lag_treatment: f64,
    pub age: f64,
    pub sex: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentCoef {
    pub intercept: f64,
    pub lag_treatment: f64,
    pub hyper: f64,
    pub bmi: f64,
    pub age: f64,
    pub sex: f64,
}

/// Outcome logit (terminal) or per-time hazard logit (time-dependent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeCoef {
    pub intercept: f64,
    pub treatment: f64,
    pub lag_treatment: f64,
    pub hyper: f64,
    pub bmi: f64,
    pub age: f64,
    pub sex: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensorCoef {
    pub intercept: f64,
    pub lag_treatment: f64,
    pub hyper: f64,
    pub bmi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coefficients {
    pub p_age: f64,
    pub p_sex: f64,
    pub hyper: CovariateCoef,
    pub bmi: CovariateCoef,
    pub treatment: TreatmentCoef,
    pub outcome: OutcomeCoef,
    pub hazard: OutcomeCoef,
    pub censor: CensorCoef,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            p_age: 0.4,
            p_sex: 0.5,
            hyper: CovariateCoef { intercept: -1.0, lag: 1.5, lag_treatment: -0.8, age: 0.4, sex: 0.0 },
            bmi: CovariateCoef { intercept: -0.5, lag: 1.2, lag_treatment: -0.5, age: 0.0, sex: 0.3 },
            treatment: TreatmentCoef { intercept: -0.6, lag_treatment: 1.8, hyper: 0.7, bmi: 0.4, age: 0.3, sex: -0.2 },
            outcome: OutcomeCoef { intercept: -1.0, treatment: -0.6, lag_treatment: -0.4, hyper: 0.8, bmi: 0.5, age: 0.3, sex: 0.2 },
            hazard: OutcomeCoef { intercept: -2.6, treatment: -0.6, lag_treatment: -0.4, hyper: 0.8, bmi: 0.5, age: 0.3, sex: 0.2 },
            censor: CensorCoef { intercept: -3.0, lag_treatment: 0.4, hyper: 0.6, bmi: 0.3 },
        }
    }
}

impl Coefficients {
    /// No path from treatment to the outcome: treatment enters neither the
    /// outcome nor the covariates.
    pub fn null_effect() -> Self {
        let mut c = Coefficients::default();
        c.hyper.lag_treatment = 0.0;
        c.bmi.lag_treatment = 0.0;
        for o in [&mut c.outcome, &mut c.hazard] {
            o.treatment = 0.0;
            o.lag_treatment = 0.0;
        }
        c
    }

    fn check(&self) -> Result<()> {
        let bound = |name: &str, v: &[f64]| -> Result<()> {
            let s: f64 = v.iter().map(|x| x.abs()).sum();
            if !s.is_finite() || s > 6.0 {
                return Err(Error::Config(format!("{name} coefficients allow |logit| = {s:.3} > 6")));
            }
            Ok(())
        };
        for (name, c) in [("hyper", &self.hyper), ("bmi", &self.bmi)] {
            bound(name, &[c.intercept, c.lag, c.lag_treatment, c.age, c.sex])?;
        }
        let t = &self.treatment;
        bound("treatment", &[t.intercept, t.lag_treatment, t.hyper, t.bmi, t.age, t.sex])?;
        for (name, o) in [("outcome", &self.outcome), ("hazard", &self.hazard)] {
            bound(name, &[o.intercept, o.treatment, o.lag_treatment, o.hyper, o.bmi, o.age, o.sex])?;
        }
        let c = &self.censor;
        bound("censor", &[c.intercept, c.lag_treatment, c.hyper, c.bmi])?;
        for (name, p) in [("p_age", self.p_age), ("p_sex", self.p_sex)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} = {p} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpSpec {
    pub n: usize,
    /// Total follow-up `K`.
    pub k: usize,
    pub layout: Layout,
    pub seed: u64,
    pub include_censor: bool,
    /// Outcome recorded at every time as a cumulative event indicator.
    pub timedep_outcome: bool,
    /// Add an `event_time` column (first event time, or `K` when event free).
    pub survival: bool,
    pub start_year: i64,
    pub coefficients: Coefficients,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            n: 1000,
            k: 6,
            layout: Layout::Wide,
            seed: 1,
            include_censor: false,
            timedep_outcome: false,
            survival: false,
            start_year: 2011,
            coefficients: Coefficients::default(),
        }
    }
}

impl DgpSpec {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        DgpSpec { n, k, seed, ..DgpSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.coefficients.check()
    }

    /// Column roles of the generated data.
    pub fn roles(&self) -> Roles {
        Roles {
            treatment: "statins".into(),
            covariates: vec!["hyper".into(), "bmi".into()],
            baseline: vec!["age".into(), "sex".into()],
            outcome: Some("y".into()),
            censor: self.include_censor.then(|| "censor".into()),
            event_time: self.survival.then(|| "event_time".into()),
            ..Roles::default()
        }
    }
}

fn covariate_prob(c: &CovariateCoef, lag: f64, lag_a: f64, age: f64, sex: f64) -> f64 {
    expit(c.intercept + c.lag * lag + c.lag_treatment * lag_a + c.age * age + c.sex * sex)
}

fn treatment_prob(c: &TreatmentCoef, lag_a: f64, hyper: f64, bmi: f64, age: f64, sex: f64) -> f64 {
    expit(c.intercept + c.lag_treatment * lag_a + c.hyper * hyper + c.bmi * bmi + c.age * age + c.sex * sex)
}

fn outcome_prob(c: &OutcomeCoef, a: f64, lag_a: f64, hyper: f64, bmi: f64, age: f64, sex: f64) -> f64 {
    expit(c.intercept + c.treatment * a + c.lag_treatment * lag_a + c.hyper * hyper + c.bmi * bmi + c.age * age + c.sex * sex)
}

fn censor_prob(c: &CensorCoef, lag_a: f64, hyper: f64, bmi: f64) -> f64 {
    expit(c.intercept + c.lag_treatment * lag_a + c.hyper * hyper + c.bmi * bmi)
}

/// One simulated person. Vectors are indexed by time; entries after
/// censoring are `NaN`.
struct Person {
    age: f64,
    sex: f64,
    a: Vec<f64>,
    hyper: Vec<f64>,
    bmi: Vec<f64>,
    y_t: Vec<f64>,
    censor: Vec<f64>,
    y: f64,
    event_time: f64,
}

fn draw(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Draws in a fixed order from the individual's own stream; `forced`
/// replaces the treatment draws by a pattern.
fn simulate_person(spec: &DgpSpec, forced: Option<&[u8]>, rng: &mut ChaCha8Rng) -> Person {
    let c = &spec.coefficients;
    let k = spec.k;
    let age = draw(rng, c.p_age);
    let sex = draw(rng, c.p_sex);
    let mut p = Person {
        age,
        sex,
        a: vec![f64::NAN; k],
        hyper: vec![f64::NAN; k],
        bmi: vec![f64::NAN; k],
        y_t: vec![f64::NAN; k],
        censor: vec![f64::NAN; k],
        y: f64::NAN,
        event_time: f64::NAN,
    };
    let (mut lag_a, mut lag_h, mut lag_b) = (0.0, 0.0, 0.0);
    let mut event = false;
    let mut first_event = None;
    for t in 0..k {
        let h = draw(rng, covariate_prob(&c.hyper, lag_h, lag_a, age, sex));
        let b = draw(rng, covariate_prob(&c.bmi, lag_b, lag_a, age, sex));
        let u = rng.random::<f64>();
        let a = match forced {
            Some(pat) => pat[t] as f64,
            None => (u < treatment_prob(&c.treatment, lag_a, h, b, age, sex)) as u8 as f64,
        };
        p.hyper[t] = h;
        p.bmi[t] = b;
        p.a[t] = a;
        if spec.timedep_outcome || spec.survival {
            let u = rng.random::<f64>();
            if !event && u < outcome_prob(&c.hazard, a, lag_a, h, b, age, sex) {
                event = true;
                first_event = Some(t);
            }
            p.y_t[t] = event as u8 as f64;
        }
        let censored = spec.include_censor && forced.is_none() && draw(rng, censor_prob(&c.censor, lag_a, h, b)) == 1.0;
        p.censor[t] = censored as u8 as f64;
        if censored {
            return p;
        }
        lag_a = a;
        lag_h = h;
        lag_b = b;
    }
    if spec.timedep_outcome || spec.survival {
        p.y = event as u8 as f64;
        p.event_time = first_event.map_or(k as f64, |t| (t + 1) as f64);
    } else {
        let (a, la) = (p.a[k - 1], if k >= 2 { p.a[k - 2] } else { 0.0 });
        p.y = draw(rng, outcome_prob(&c.outcome, a, la, p.hyper[k - 1], p.bmi[k - 1], age, sex));
    }
    p
}

fn person_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Simulated cohort in the analysis view.
pub fn simulate_cohort(spec: &DgpSpec) -> Result<Cohort> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    let people: Vec<Person> = (1..=n as u64)
        .into_par_iter()
        .map(|id| simulate_person(spec, None, &mut person_rng(spec.seed, id)))
        .collect();
    let grid = |f: &dyn Fn(&Person) -> &Vec<f64>| Grid::from_rows(&people.iter().map(|p| f(p).clone()).collect::<Vec<_>>());
    let outcome = if spec.timedep_outcome {
        Outcome::TimeVarying(grid(&|p| &p.y_t))
    } else {
        Outcome::Terminal(people.iter().map(|p| p.y).collect())
    };
    let mut censor = grid(&|p| &p.censor);
    if !spec.include_censor {
        censor = Grid::new(n, k, 0.0);
    }
    Ok(Cohort {
        ids: (1..=n).map(|i| i.to_string()).collect(),
        time_labels: (0..k as i64).map(|t| spec.start_year + t).collect(),
        treatment: grid(&|p| &p.a),
        covariate_names: vec!["hyper".into(), "bmi".into()],
        covariates: vec![grid(&|p| &p.hyper), grid(&|p| &p.bmi)],
        baseline_names: vec!["age".into(), "sex".into()],
        baseline: vec![people.iter().map(|p| p.age).collect(), people.iter().map(|p| p.sex).collect()],
        outcome: Some(outcome),
        censor,
        event_time: spec.survival.then(|| people.iter().map(|p| p.event_time).collect()),
        prior_treatment: vec![0.0; n],
        prior_covariates: vec![vec![0.0; n]; 2],
        cluster: (0..n).collect(),
        n_clusters: n,
        interval: vec![0; n],
    })
}

/// Simulated data in the requested layout.
pub fn gendata(spec: &DgpSpec) -> Result<PanelData> {
    if spec.k < 2 {
        return Err(Error::Config(format!("k = {} but at least 2 times are needed", spec.k)));
    }
    let cohort = simulate_cohort(spec)?;
    cohort.to_panel(&spec.roles())?.reshape(spec.layout)
}

/// Largest follow-up for which the oracle is computed exactly.
pub const MAX_EXACT_K: usize = 6;
/// Total Monte Carlo draws of the fallback oracle.
pub const ORACLE_MC_DRAWS: usize = 1_000_000;

/// How pattern means are weighted in the working-model regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternWeighting {
    /// Every pattern counts once (g-computation, pooled LTMLE, unstabilized IPW).
    Uniform,
    /// Patterns weighted by `Π_t P(A_t = a_t | A_{t-1} = a_{t-1})` in the
    /// uncensored observational population (stabilized IPW).
    Stabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    /// Exact up to [`MAX_EXACT_K`], Monte Carlo beyond.
    Auto,
    /// Exact; larger follow-up is an error.
    Exact,
    /// Monte Carlo with the given total number of draws.
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub weighting: PatternWeighting,
    pub method: OracleMethod,
    /// Zero-based reference class.
    pub reference: usize,
    /// Log link instead of logit for the working model.
    pub log_link: bool,
}

impl OracleConfig {
    pub fn new(weighting: PatternWeighting, reference: usize) -> Self {
        OracleConfig { weighting, method: OracleMethod::Auto, reference, log_link: false }
    }
}

/// Counterfactual truth for every treatment pattern.
#[derive(Debug, Clone, Serialize)]
pub struct PatternTruth {
    pub means: Vec<f64>,
    /// Monte Carlo standard errors; absent for the exact computation.
    pub se: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleTruth {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub pattern: PatternTruth,
    pub pattern_weights: Vec<f64>,
    pub classes: Vec<usize>,
}

/// Joint law of `(hyper, bmi)` at one time given `V`, as four probabilities
/// indexed by `2 * hyper + bmi`, together with the survival mass for the
/// time-dependent outcome.
fn covariate_step(c: &Coefficients, prev: &[f64; 4], lag_a: f64, age: f64, sex: f64) -> [f64; 4] {
    let mut next = [0.0; 4];
    for (s, &mass) in prev.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let (lh, lb) = ((s >> 1) as f64, (s & 1) as f64);
        let ph = covariate_prob(&c.hyper, lh, lag_a, age, sex);
        let pb = covariate_prob(&c.bmi, lb, lag_a, age, sex);
        for (ns, slot) in next.iter_mut().enumerate() {
            let (h, b) = (ns >> 1, ns & 1);
            let fh = if h == 1 { ph } else { 1.0 - ph };
            let fb = if b == 1 { pb } else { 1.0 - pb };
            *slot += mass * fh * fb;
        }
    }
    next
}

fn baseline_cells(c: &Coefficients) -> [(f64, f64, f64); 4] {
    let mut out = [(0.0, 0.0, 0.0); 4];
    for (v, slot) in out.iter_mut().enumerate() {
        let (age, sex) = ((v >> 1) as f64, (v & 1) as f64);
        let pa = if age == 1.0 { c.p_age } else { 1.0 - c.p_age };
        let ps = if sex == 1.0 { c.p_sex } else { 1.0 - c.p_sex };
        *slot = (age, sex, pa * ps);
    }
    out
}

/// Exact `E[Y^ā]` by forward recursion over the covariate state. Summing
/// over the four states at each time is the same as summing over all `4^K`
/// covariate paths because the covariates are first-order Markov.
/// Also returns the total probability mass, which must be one.
fn exact_mean(spec: &DgpSpec, pattern: &[u8]) -> (f64, f64) {
    let c = &spec.coefficients;
    let k = spec.k;
    let mut total = 0.0;
    let mut mass_total = 0.0;
    for (age, sex, pv) in baseline_cells(c) {
        // state distribution of L_{t-1}; before the first time L = 0
        let mut dist = [1.0, 0.0, 0.0, 0.0];
        // event-free mass per state, for the time-dependent outcome
        let mut alive = [1.0, 0.0, 0.0, 0.0];
        let mut event_mass = 0.0;
        let mut lag_a = 0.0;
        for t in 0..k {
            let a = pattern[t] as f64;
            let timedep = spec.timedep_outcome || spec.survival;
            if timedep {
                // hazard depends on L_t, which evolves independently of events
                let next_alive = covariate_step(c, &alive, lag_a, age, sex);
                let mut survivors = [0.0; 4];
                for s in 0..4 {
                    let h = outcome_prob(&c.hazard, a, lag_a, (s >> 1) as f64, (s & 1) as f64, age, sex);
                    event_mass += next_alive[s] * h;
                    survivors[s] = next_alive[s] * (1.0 - h);
                }
                alive = survivors;
            }
            dist = covariate_step(c, &dist, lag_a, age, sex);
            lag_a = a;
        }
        let mean_v = if spec.timedep_outcome || spec.survival {
            event_mass
        } else {
            let a = pattern[k - 1] as f64;
            let la = if k >= 2 { pattern[k - 2] as f64 } else { 0.0 };
            (0..4)
                .map(|s| dist[s] * outcome_prob(&c.outcome, a, la, (s >> 1) as f64, (s & 1) as f64, age, sex))
                .sum()
        };
        total += pv * mean_v;
        mass_total += pv * dist.iter().sum::<f64>();
    }
    (total, mass_total)
}

/// Probability mass of the covariate law summed over every path, per pattern.
pub fn oracle_total_mass(spec: &DgpSpec) -> Vec<f64> {
    all_patterns(spec.k).iter().map(|p| exact_mean(spec, p).1).collect()
}

fn monte_carlo_means(spec: &DgpSpec, draws: usize, seed: u64) -> PatternTruth {
    let patterns = all_patterns(spec.k);
    let per = (draws / patterns.len()).max(2);
    let stats: Vec<(f64, f64)> = patterns
        .par_iter()
        .enumerate()
        .map(|(pi, pat)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(pi as u64 + 1);
            let mut s = 0.0;
            for _ in 0..per {
                s += simulate_person(spec, Some(pat), &mut rng).y;
            }
            let m = s / per as f64;
            (m, (m * (1.0 - m) / per as f64).sqrt())
        })
        .collect();
    PatternTruth { means: stats.iter().map(|s| s.0).collect(), se: Some(stats.iter().map(|s| s.1).collect()) }
}

/// `E[Y^ā]` for every pattern, exactly or by Monte Carlo.
pub fn true_pattern_means(spec: &DgpSpec, method: OracleMethod) -> Result<PatternTruth> {
    spec.validate()?;
    match method {
        OracleMethod::MonteCarlo { draws, seed } => Ok(monte_carlo_means(spec, draws, seed)),
        OracleMethod::Exact | OracleMethod::Auto if spec.k <= MAX_EXACT_K => Ok(PatternTruth {
            means: all_patterns(spec.k).iter().map(|p| exact_mean(spec, p).0).collect(),
            se: None,
        }),
        OracleMethod::Auto => Ok(monte_carlo_means(spec, ORACLE_MC_DRAWS, spec.seed)),
        OracleMethod::Exact => Err(Error::OracleSize(format!(
            "K = {} exceeds the exact limit {MAX_EXACT_K}; use the Monte Carlo fallback",
            spec.k
        ))),
    }
}

/// Observational `P(A_t = 1 | A_{t-1} = a)` for `a = 0, 1`, per time, with
/// no censoring. Returns `[t][a]`; at `t = 0` both entries are `P(A_0 = 1)`.
pub fn treatment_transitions(spec: &DgpSpec) -> Vec<[f64; 2]> {
    let c = &spec.coefficients;
    let k = spec.k;
    // joint mass over (A_{t-1}, L_{t-1}) pooled over V, kept per V
    let mut num = vec![[0.0f64; 2]; k];
    let mut den = vec![[0.0f64; 2]; k];
    for (age, sex, pv) in baseline_cells(c) {
        let mut joint = [[0.0f64; 4]; 2];
        joint[0][0] = pv;
        for t in 0..k {
            let mut next = [[0.0f64; 4]; 2];
            for la in 0..2 {
                let cur = covariate_step(c, &joint[la], la as f64, age, sex);
                for s in 0..4 {
                    if cur[s] == 0.0 {
                        continue;
                    }
                    let pa = treatment_prob(&c.treatment, la as f64, (s >> 1) as f64, (s & 1) as f64, age, sex);
                    let key = if t == 0 { 0 } else { la };
                    num[t][key] += cur[s] * pa;
                    den[t][key] += cur[s];
                    next[1][s] += cur[s] * pa;
                    next[0][s] += cur[s] * (1.0 - pa);
                }
            }
            joint = next;
        }
    }
    (0..k)
        .map(|t| {
            if t == 0 {
                let p = num[0][0] / den[0][0];
                [p, p]
            } else {
                [num[t][0] / den[t][0], num[t][1] / den[t][1]]
            }
        })
        .collect()
}

/// Weight of each pattern in the working-model regression.
pub fn pattern_weights(spec: &DgpSpec, weighting: PatternWeighting) -> Vec<f64> {
    let patterns = all_patterns(spec.k);
    match weighting {
        PatternWeighting::Uniform => vec![1.0; patterns.len()],
        PatternWeighting::Stabilized => {
            let tr = treatment_transitions(spec);
            patterns
                .iter()
                .map(|p| {
                    let mut w = 1.0;
                    let mut lag = 0usize;
                    for t in 0..spec.k {
                        let q = tr[t][lag];
                        w *= if p[t] == 1 { q } else { 1.0 - q };
                        lag = p[t] as usize;
                    }
                    w
                })
                .collect()
        }
    }
}

/// True working-model coefficients. With class dummies the working model is
/// saturated in the classes, so its fitted value for a class is the weighted
/// mean of the pattern means in that class.
pub fn true_msm_oracle(spec: &DgpSpec, classifier: &dyn Classifier, cfg: &OracleConfig) -> Result<OracleTruth> {
    let n_classes = classifier.n_classes();
    if cfg.reference >= n_classes {
        return Err(Error::Config(format!("reference class {} out of range 1..={n_classes}", cfg.reference + 1)));
    }
    let truth = true_pattern_means(spec, cfg.method)?;
    let classes = pattern_classes(classifier, spec.k)?;
    let weights = pattern_weights(spec, cfg.weighting);
    let mut sw = vec![0.0; n_classes];
    let mut swm = vec![0.0; n_classes];
    for ((m, c), w) in truth.means.iter().zip(&classes).zip(&weights) {
        sw[*c] += w;
        swm[*c] += w * m;
    }
    let link = |p: f64| if cfg.log_link { p.ln() } else { logit(p) };
    let class_link: Vec<f64> = (0..n_classes).map(|j| link(swm[j] / sw[j])).collect();
    let mut beta = vec![class_link[cfg.reference]];
    beta.extend((0..n_classes).filter(|&j| j != cfg.reference).map(|j| class_link[j] - class_link[cfg.reference]));
    Ok(OracleTruth {
        names: coefficient_names(Estimator::Ipw, n_classes, cfg.reference),
        beta,
        pattern: truth,
        pattern_weights: weights,
        classes,
    })
}
