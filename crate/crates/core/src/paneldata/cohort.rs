use super::{Layout, PanelData, Roles};
use crate::error::{Error, Result};

/// Dense individual-by-time matrix, row major. `NaN` marks unobserved cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, k: usize, fill: f64) -> Self {
        Grid { n, k, data: vec![fill; n * k] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let k = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * k);
        for r in rows {
            assert_eq!(r.len(), k, "ragged grid rows");
            data.extend_from_slice(r);
        }
        Grid { n, k, data }
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.data[i * self.k + t]
    }

    #[inline]
    pub fn set(&mut self, i: usize, t: usize, v: f64) {
        self.data[i * self.k + t] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn select(&self, rows: &[usize], times: std::ops::Range<usize>) -> Grid {
        let k = times.len();
        let mut data = Vec::with_capacity(rows.len() * k);
        for &i in rows {
            data.extend_from_slice(&self.row(i)[times.clone()]);
        }
        Grid { n: rows.len(), k, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// One value per individual, measured at the end of follow-up.
    Terminal(Vec<f64>),
    /// One value per individual and time.
    TimeVarying(Grid),
}

/// Validated analysis view of a panel: treatment, covariates, censoring and
/// outcome as dense grids over internal times `0..k`.
///
/// An individual is *present* at `t` when their treatment is observed.
/// Records may stop only after a censoring flag or after an outcome event.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub ids: Vec<String>,
    pub time_labels: Vec<i64>,
    pub treatment: Grid,
    pub covariate_names: Vec<String>,
    pub covariates: Vec<Grid>,
    pub baseline_names: Vec<String>,
    /// `baseline[b][i]`.
    pub baseline: Vec<Vec<f64>>,
    pub outcome: Option<Outcome>,
    /// `1` when follow-up ends (censored) after time `t`; zero if there is no
    /// censoring column.
    pub censor: Grid,
    pub event_time: Option<Vec<f64>>,
    /// Treatment and covariate values just before the first time (zero at the
    /// start of follow-up; carried from the preceding time for interval slices).
    pub prior_treatment: Vec<f64>,
    /// `prior_covariates[j][i]`.
    pub prior_covariates: Vec<Vec<f64>>,
    /// Index of the original individual; differs from the row index for
    /// stacked interval slices.
    pub cluster: Vec<usize>,
    pub n_clusters: usize,
    /// Zero-based interval index for stacked slices, zero otherwise.
    pub interval: Vec<usize>,
}

impl Cohort {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn k(&self) -> usize {
        self.time_labels.len()
    }

    #[inline]
    pub fn present(&self, i: usize, t: usize) -> bool {
        !self.treatment.get(i, t).is_nan()
    }

    #[inline]
    pub fn a(&self, i: usize, t: usize) -> f64 {
        self.treatment.get(i, t)
    }

    /// Treatment at `t - 1`, using the prior value at `t = 0`.
    #[inline]
    pub fn lag_a(&self, i: usize, t: usize) -> f64 {
        if t == 0 {
            self.prior_treatment[i]
        } else {
            self.treatment.get(i, t - 1)
        }
    }

    #[inline]
    pub fn cov(&self, j: usize, i: usize, t: usize) -> f64 {
        self.covariates[j].get(i, t)
    }

    #[inline]
    pub fn lag_cov(&self, j: usize, i: usize, t: usize) -> f64 {
        if t == 0 {
            self.prior_covariates[j][i]
        } else {
            self.covariates[j].get(i, t - 1)
        }
    }

    #[inline]
    pub fn censored_at(&self, i: usize, t: usize) -> bool {
        self.censor.get(i, t) == 1.0
    }

    /// Present at `t`, not censored at `t`, and observed at the next step
    /// (the next record, or the outcome when `t` is the last time).
    pub fn continues(&self, i: usize, t: usize) -> bool {
        if !self.present(i, t) || self.censored_at(i, t) {
            return false;
        }
        if t + 1 < self.k() {
            self.present(i, t + 1)
        } else {
            !self.terminal_outcome(i).is_nan()
        }
    }

    /// Outcome value at `t` (time-varying) or the terminal value at the last time.
    pub fn outcome_at(&self, i: usize, t: usize) -> f64 {
        match &self.outcome {
            None => f64::NAN,
            Some(Outcome::TimeVarying(g)) => g.get(i, t),
            Some(Outcome::Terminal(v)) => {
                if t + 1 == self.k() {
                    v[i]
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// End-of-follow-up outcome; for time-varying outcomes an earlier event
    /// counts when records stop after it.
    pub fn terminal_outcome(&self, i: usize) -> f64 {
        match &self.outcome {
            None => f64::NAN,
            Some(Outcome::Terminal(v)) => v[i],
            Some(Outcome::TimeVarying(g)) => {
                let k = self.k();
                if self.present(i, k - 1) {
                    return g.get(i, k - 1);
                }
                if (0..k).any(|t| g.get(i, t) == 1.0) {
                    1.0
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Treatment pattern when the individual is present at every time.
    pub fn pattern(&self, i: usize) -> Option<Vec<u8>> {
        let row = self.treatment.row(i);
        if row.iter().any(|v| v.is_nan()) {
            return None;
        }
        Some(row.iter().map(|&v| v as u8).collect())
    }

    pub fn has_censoring(&self) -> bool {
        (0..self.n()).any(|i| (0..self.k()).any(|t| self.censored_at(i, t)))
    }

    /// Rows restricted to `rows`, keeping every time.
    pub fn subset(&self, rows: &[usize]) -> Cohort {
        self.slice(rows, 0..self.k(), None)
    }

    /// Rows `rows` over times `times`; prior values come from the time just
    /// before the window unless it starts at zero.
    pub(crate) fn slice(&self, rows: &[usize], times: std::ops::Range<usize>, interval: Option<usize>) -> Cohort {
        let start = times.start;
        let pick = |v: &Vec<f64>| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let prior_treatment = if start == 0 {
            pick(&self.prior_treatment)
        } else {
            rows.iter().map(|&i| self.treatment.get(i, start - 1)).collect()
        };
        let prior_covariates = (0..self.covariates.len())
            .map(|j| {
                if start == 0 {
                    pick(&self.prior_covariates[j])
                } else {
                    rows.iter().map(|&i| self.covariates[j].get(i, start - 1)).collect()
                }
            })
            .collect();
        let outcome = self.outcome.as_ref().map(|o| match o {
            Outcome::Terminal(v) if times.end == self.k() && start == 0 => Outcome::Terminal(pick(v)),
            Outcome::Terminal(v) => {
                // terminal values exist only at the last time
                let mut g = Grid::new(rows.len(), times.len(), f64::NAN);
                if times.end == self.k() {
                    for (r, &i) in rows.iter().enumerate() {
                        g.set(r, times.len() - 1, v[i]);
                    }
                }
                Outcome::TimeVarying(g)
            }
            Outcome::TimeVarying(g) => Outcome::TimeVarying(g.select(rows, times.clone())),
        });
        Cohort {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            time_labels: self.time_labels[times.clone()].to_vec(),
            treatment: self.treatment.select(rows, times.clone()),
            covariate_names: self.covariate_names.clone(),
            covariates: self.covariates.iter().map(|g| g.select(rows, times.clone())).collect(),
            baseline_names: self.baseline_names.clone(),
            baseline: self.baseline.iter().map(pick).collect(),
            outcome,
            censor: self.censor.select(rows, times),
            event_time: self.event_time.as_ref().map(pick),
            prior_treatment,
            prior_covariates,
            cluster: rows.iter().map(|&i| self.cluster[i]).collect(),
            n_clusters: self.n_clusters,
            interval: rows.iter().map(|&i| interval.unwrap_or(self.interval[i])).collect(),
        }
    }

    /// Stack cohorts with the same times and variables.
    pub(crate) fn stack(parts: Vec<Cohort>) -> Result<Cohort> {
        let mut it = parts.into_iter();
        let mut out = it.next().ok_or_else(|| Error::Shape("nothing to stack".into()))?;
        for p in it {
            if p.k() != out.k() || p.covariates.len() != out.covariates.len() {
                return Err(Error::Shape("stacked cohorts differ in shape".into()));
            }
            out.ids.extend(p.ids);
            out.treatment = concat(&out.treatment, &p.treatment);
            for (a, b) in out.covariates.iter_mut().zip(&p.covariates) {
                *a = concat(a, b);
            }
            for (a, b) in out.baseline.iter_mut().zip(p.baseline) {
                a.extend(b);
            }
            out.outcome = match (out.outcome.take(), p.outcome) {
                (None, None) => None,
                (Some(Outcome::TimeVarying(a)), Some(Outcome::TimeVarying(b))) => Some(Outcome::TimeVarying(concat(&a, &b))),
                (Some(Outcome::Terminal(mut a)), Some(Outcome::Terminal(b))) => {
                    a.extend(b);
                    Some(Outcome::Terminal(a))
                }
                _ => return Err(Error::Shape("stacked cohorts differ in outcome type".into())),
            };
            out.censor = concat(&out.censor, &p.censor);
            out.event_time = match (out.event_time.take(), p.event_time) {
                (Some(mut a), Some(b)) => {
                    a.extend(b);
                    Some(a)
                }
                _ => None,
            };
            out.prior_treatment.extend(p.prior_treatment);
            for (a, b) in out.prior_covariates.iter_mut().zip(p.prior_covariates) {
                a.extend(b);
            }
            out.cluster.extend(p.cluster);
            out.interval.extend(p.interval);
            out.n_clusters = out.n_clusters.max(p.n_clusters);
        }
        Ok(out)
    }

    /// Write back to a wide panel with the given roles. Baseline and
    /// covariate names come from the cohort itself.
    pub fn to_panel(&self, roles: &Roles) -> Result<PanelData> {
        let n = self.n();
        let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
        for (name, v) in self.baseline_names.iter().zip(&self.baseline) {
            cols.push((name.clone(), v.clone()));
        }
        let timevarying = matches!(self.outcome, Some(Outcome::TimeVarying(_)));
        if let (Some(y), Some(Outcome::Terminal(v))) = (&roles.outcome, &self.outcome) {
            cols.push((y.clone(), v.clone()));
        }
        if let (Some(e), Some(v)) = (&roles.event_time, &self.event_time) {
            cols.push((e.clone(), v.clone()));
        }
        let mut grid_cols = |stem: &str, g: &Grid| {
            for (t, label) in self.time_labels.iter().enumerate() {
                cols.push((format!("{stem}{label}"), (0..n).map(|i| g.get(i, t)).collect()));
            }
        };
        grid_cols(&roles.treatment, &self.treatment);
        for (name, g) in self.covariate_names.iter().zip(&self.covariates) {
            grid_cols(name, g);
        }
        if let (Some(y), Some(Outcome::TimeVarying(g))) = (&roles.outcome, &self.outcome) {
            grid_cols(y, g);
        }
        if let Some(c) = &roles.censor {
            let mut g = self.censor.clone();
            for i in 0..n {
                for t in 0..self.k() {
                    if !self.present(i, t) {
                        g.set(i, t, f64::NAN);
                    }
                }
            }
            grid_cols(c, &g);
        }
        let roles = Roles {
            covariates: self.covariate_names.clone(),
            baseline: self.baseline_names.clone(),
            ..roles.clone()
        };
        PanelData::new(Layout::Wide, roles, self.ids.clone(), cols, vec![])
            .map(|p| p.with_timevarying_outcome(timevarying))
    }
}

fn concat(a: &Grid, b: &Grid) -> Grid {
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    Grid { n: a.n + b.n, k: a.k, data }
}

impl PanelData {
    /// Validate and convert to the analysis view.
    pub fn cohort(&self) -> Result<Cohort> {
        let wide = self.reshape(Layout::Wide)?;
        let roles = &wide.roles;
        let n = wide.n_rows();
        let k = wide.n_times();
        let labels = wide.time_labels.clone();
        let grid = |stem: &str| -> Result<Grid> {
            let mut g = Grid::new(n, k, f64::NAN);
            for (t, label) in labels.iter().enumerate() {
                let col = wide.numeric(&format!("{stem}{label}"))?;
                for i in 0..n {
                    g.set(i, t, col[i]);
                }
            }
            Ok(g)
        };
        let mut treatment = grid(&roles.treatment)?;
        let mut covariates = roles.covariates.iter().map(|c| grid(c)).collect::<Result<Vec<_>>>()?;
        let mut censor = match &roles.censor {
            Some(c) => grid(c)?,
            None => Grid::new(n, k, 0.0),
        };
        let outcome = match &roles.outcome {
            None => None,
            Some(y) if wide.timevarying_outcome => Some(Outcome::TimeVarying(grid(y)?)),
            Some(y) => Some(Outcome::Terminal(wide.numeric(y)?.to_vec())),
        };
        let baseline = roles
            .baseline
            .iter()
            .map(|b| wide.numeric(b).map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        for (b, name) in roles.baseline.iter().enumerate() {
            if let Some(i) = (0..n).find(|&i| baseline[b][i].is_nan()) {
                return Err(Error::MissingCell { id: wide.ids[i].clone(), time: labels[0], column: name.clone() });
            }
        }

        for i in 0..n {
            let mut stopped = false;
            for t in 0..k {
                let a = treatment.get(i, t);
                if stopped {
                    if a.is_nan() {
                        // keep the stopped region uniformly unobserved
                        for g in covariates.iter_mut() {
                            g.set(i, t, f64::NAN);
                        }
                        censor.set(i, t, f64::NAN);
                        continue;
                    }
                } else if a.is_nan() {
                    return Err(Error::MissingCell {
                        id: wide.ids[i].clone(),
                        time: labels[t],
                        column: format!("{}{}", roles.treatment, labels[t]),
                    });
                }
                if a != 0.0 && a != 1.0 {
                    return Err(Error::Schema(format!(
                        "treatment must be binary; id {} time {} has {a}",
                        wide.ids[i], labels[t]
                    )));
                }
                for (j, g) in covariates.iter().enumerate() {
                    if g.get(i, t).is_nan() {
                        return Err(Error::MissingCell {
                            id: wide.ids[i].clone(),
                            time: labels[t],
                            column: format!("{}{}", roles.covariates[j], labels[t]),
                        });
                    }
                }
                let c = censor.get(i, t);
                if c.is_nan() {
                    censor.set(i, t, 0.0);
                } else if c != 0.0 && c != 1.0 {
                    return Err(Error::Schema(format!("censor must be binary; id {} has {c}", wide.ids[i])));
                }
                if censor.get(i, t) == 1.0 {
                    stopped = true;
                    // values recorded after a censoring flag are discarded
                    for s in t + 1..k {
                        treatment.set(i, s, f64::NAN);
                    }
                }
                if let Some(Outcome::TimeVarying(g)) = &outcome {
                    if g.get(i, t) == 1.0 {
                        stopped = true;
                    }
                }
            }
        }

        let cov_names = roles.covariates.clone();
        let event_time = match &roles.event_time {
            Some(e) => Some(wide.numeric(e)?.to_vec()),
            None => None,
        };
        let n_cov = cov_names.len();
        Ok(Cohort {
            ids: wide.ids.clone(),
            time_labels: labels,
            treatment,
            covariate_names: cov_names,
            covariates,
            baseline_names: roles.baseline.clone(),
            baseline,
            outcome,
            censor,
            event_time,
            prior_treatment: vec![0.0; n],
            prior_covariates: vec![vec![0.0; n]; n_cov],
            cluster: (0..n).collect(),
            n_clusters: n,
            interval: vec![0; n],
        })
    }
}
