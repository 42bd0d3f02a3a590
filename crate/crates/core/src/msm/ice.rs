//! Iterated conditional expectation machinery on collapsed history cells.
//!
//! At each time the regressors `(1, A_t, A_{t-1..t-lags}, L_t, L_{t-1..}, V)`
//! take few distinct values, so outcome regressions are fitted on distinct
//! rows ("cells") with summed weights. Individuals only enter through how
//! much weight flows from a cell at `t` to a cell at `t + 1`, which makes
//! bootstrap replicates cheap: only the flows change.
//!
//! With a time-varying outcome the event is absorbing: cells whose event
//! already occurred have `Q = 1` and are left out of the regressions, and a
//! record ending right after an event flows to a sink worth one.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::glm::{expit, Family, Glm, Link};
use crate::paneldata::{Cohort, Outcome};
use crate::weights::history_row;

const NONE: u32 = u32::MAX;

pub(crate) struct Level {
    pub rows: Vec<Vec<f64>>,
    /// Per cell: the event occurred before this time.
    pub done: Vec<bool>,
    pub cell_of: Vec<u32>,
    pub cont: Vec<bool>,
}

pub(crate) struct IceDesign {
    pub k: usize,
    pub lags: usize,
    pub levels: Vec<Level>,
    pub y: Vec<f64>,
}

/// Weight moving between cells, aggregated over individuals.
pub(crate) struct Flows {
    /// For `t < k - 1`: `(cell_t, cell_{t+1}, weight)` over continuing
    /// individuals; the next cell is `NONE` for records ending after an event.
    pub trans: Vec<Vec<(u32, u32, f64)>>,
    /// At the last time: `(cell, weight, weight * y)`.
    pub last: Vec<(u32, f64, f64)>,
    /// Cells at the first time with their weights.
    pub base: Vec<(u32, f64)>,
    pub total: f64,
}

impl IceDesign {
    pub fn new(c: &Cohort, lags: usize) -> Self {
        let (n, k) = (c.n(), c.k());
        let mut levels = Vec::with_capacity(k);
        let timevarying = matches!(c.outcome, Some(Outcome::TimeVarying(_)));
        let event = |i: usize, t: usize| timevarying && c.outcome_at(i, t) == 1.0;
        for t in 0..k {
            let mut index: HashMap<Vec<u64>, u32> = HashMap::new();
            let mut rows = Vec::new();
            let mut done = Vec::new();
            let mut cell_of = vec![NONE; n];
            let mut cont = vec![false; n];
            for i in 0..n {
                if !c.present(i, t) {
                    continue;
                }
                let mut r = vec![1.0];
                r.extend(history_row(c, i, t, lags, true));
                let is_done = t > 0 && event(i, t - 1);
                let mut key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
                key.push(is_done as u64);
                let id = *index.entry(key).or_insert_with(|| {
                    rows.push(r);
                    done.push(is_done);
                    (rows.len() - 1) as u32
                });
                cell_of[i] = id;
                cont[i] = c.continues(i, t) || (t + 1 < k && event(i, t) && !c.censored_at(i, t));
            }
            levels.push(Level { rows, done, cell_of, cont });
        }
        let y = (0..n).map(|i| c.terminal_outcome(i)).collect();
        IceDesign { k, lags, levels, y }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_cells(&self, t: usize) -> usize {
        self.levels[t].rows.len()
    }

    pub fn cell(&self, t: usize, i: usize) -> Option<usize> {
        let c = self.levels[t].cell_of[i];
        (c != NONE).then_some(c as usize)
    }

    pub fn continues(&self, t: usize, i: usize) -> bool {
        self.levels[t].cont[i]
    }

    /// Next-step value of an individual continuing at `t`: the prediction at
    /// their next cell, or one past an event.
    pub fn next_value(&self, t: usize, i: usize, next_pred: &[f64]) -> f64 {
        match self.cell(t + 1, i) {
            Some(d) => next_pred[d],
            None => 1.0,
        }
    }

    /// Linear predictor under the pattern; infinite for cells past an event.
    pub fn eta(&self, t: usize, cell: usize, coef: &[f64], pattern: &[u8]) -> f64 {
        if self.levels[t].done[cell] {
            return f64::INFINITY;
        }
        let r = &self.levels[t].rows[cell];
        let mut s: f64 = r.iter().zip(coef).map(|(x, b)| x * b).sum();
        // adjust only the substituted treatment columns
        let mut fix = |pos: usize, v: f64| s += (v - r[pos]) * coef[pos];
        fix(1, pattern[t] as f64);
        for l in 1..=self.lags.min(t) {
            fix(1 + l, pattern[t - l] as f64);
        }
        s
    }

    pub fn flows(&self, mult: &[f64]) -> Flows {
        let k = self.k;
        let mut trans = Vec::with_capacity(k.saturating_sub(1));
        for t in 0..k - 1 {
            let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
            let lv = &self.levels[t];
            for i in 0..self.n() {
                if mult[i] == 0.0 || !lv.cont[i] {
                    continue;
                }
                let next = self.levels[t + 1].cell_of[i];
                *acc.entry((lv.cell_of[i], next)).or_insert(0.0) += mult[i];
            }
            let mut v: Vec<(u32, u32, f64)> = acc.into_iter().map(|((a, b), w)| (a, b, w)).collect();
            v.sort_unstable_by_key(|e| (e.0, e.1));
            trans.push(v);
        }
        let lv = &self.levels[k - 1];
        let mut acc: HashMap<u32, (f64, f64)> = HashMap::new();
        for i in 0..self.n() {
            if mult[i] == 0.0 || !lv.cont[i] {
                continue;
            }
            let e = acc.entry(lv.cell_of[i]).or_insert((0.0, 0.0));
            e.0 += mult[i];
            e.1 += mult[i] * self.y[i];
        }
        let mut last: Vec<(u32, f64, f64)> = acc.into_iter().map(|(c, (w, wy))| (c, w, wy)).collect();
        last.sort_unstable_by_key(|e| e.0);
        let mut acc: HashMap<u32, f64> = HashMap::new();
        let mut total = 0.0;
        for i in 0..self.n() {
            if mult[i] == 0.0 {
                continue;
            }
            *acc.entry(self.levels[0].cell_of[i]).or_insert(0.0) += mult[i];
            total += mult[i];
        }
        let mut base: Vec<(u32, f64)> = acc.into_iter().collect();
        base.sort_unstable_by_key(|e| e.0);
        Flows { trans, last, base, total }
    }

    /// Weighted-mean response and summed weight per cell at `t`, given the
    /// predicted next-step values per cell at `t + 1`.
    pub fn aggregate(&self, t: usize, flows: &Flows, next_pred: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let nc = self.n_cells(t);
        let mut sw = vec![0.0; nc];
        let mut swy = vec![0.0; nc];
        match next_pred {
            None => {
                for &(c, w, wy) in &flows.last {
                    if self.levels[t].done[c as usize] {
                        continue;
                    }
                    sw[c as usize] += w;
                    swy[c as usize] += wy;
                }
            }
            Some(pred) => {
                for &(c, d, w) in &flows.trans[t] {
                    if self.levels[t].done[c as usize] {
                        continue;
                    }
                    sw[c as usize] += w;
                    swy[c as usize] += w * if d == NONE { 1.0 } else { pred[d as usize] };
                }
            }
        }
        let ybar = sw.iter().zip(&swy).map(|(s, v)| if *s > 0.0 { v / s } else { 0.0 }).collect();
        (ybar, sw)
    }

    /// Quasi-binomial logistic fit on the cells at `t` with positive weight.
    pub fn fit_cells(&self, t: usize, ybar: &[f64], sw: &[f64], context: &str) -> Result<Vec<f64>> {
        let active: Vec<usize> = (0..ybar.len()).filter(|&c| sw[c] > 0.0).collect();
        if active.is_empty() {
            return Err(Error::DegenerateDesign(format!("no individuals at risk at time {} ({context})", t + 1)));
        }
        let p = self.levels[t].rows[0].len();
        let x = DMatrix::from_fn(active.len(), p, |r, j| self.levels[t].rows[active[r]][j]);
        let y: Vec<f64> = active.iter().map(|&c| ybar[c].clamp(0.0, 1.0)).collect();
        let w: Vec<f64> = active.iter().map(|&c| sw[c]).collect();
        let glm = Glm::new(Family::Binomial, Link::Logit).point_estimate_only();
        match glm.fit(&x, &y, Some(&w), None, None) {
            Ok(f) => Ok(f.coefficients.iter().copied().collect()),
            Err(Error::Convergence { iterations, last_iterate, context: inner }) => Err(Error::Convergence {
                context: format!("outcome regression at time {} for {context}: {inner}", t + 1),
                iterations,
                last_iterate,
            }),
            Err(e) => Err(e),
        }
    }

    /// Predicted `Q_t` under the pattern for every cell at `t`.
    pub fn predict(&self, t: usize, coef: &[f64], pattern: &[u8]) -> Vec<f64> {
        (0..self.n_cells(t)).map(|c| expit(self.eta(t, c, coef, pattern))).collect()
    }

    /// Weighted mean of the first-time predictions.
    pub fn marginal(&self, flows: &Flows, pred0: &[f64]) -> f64 {
        flows.base.iter().map(|&(c, w)| w * pred0[c as usize]).sum::<f64>() / flows.total
    }
}

/// Counterfactual means for each pattern by iterated regressions. Fits are
/// shared between patterns whose relevant suffix agrees.
pub(crate) fn gform_means(design: &IceDesign, flows: &Flows, patterns: &[Vec<u8>]) -> Result<Vec<f64>> {
    let k = design.k;
    let mut memo: HashMap<(usize, Vec<u8>), Vec<f64>> = HashMap::new();
    let mut means = Vec::with_capacity(patterns.len());
    for (pi, pat) in patterns.iter().enumerate() {
        let mut next_pred: Option<Vec<f64>> = None;
        let mut coef = Vec::new();
        for t in (0..k).rev() {
            let key_start = if t == k - 1 { k } else { (t + 1).saturating_sub(design.lags) };
            let key = (t, pat[key_start..].to_vec());
            coef = match memo.get(&key) {
                Some(c) => c.clone(),
                None => {
                    let (ybar, sw) = design.aggregate(t, flows, next_pred.as_deref());
                    let c = design.fit_cells(t, &ybar, &sw, &format!("pattern {pi}"))?;
                    memo.insert(key, c.clone());
                    c
                }
            };
            if t > 0 {
                next_pred = Some(design.predict(t, &coef, pat));
            }
        }
        means.push(design.marginal(flows, &design.predict(0, &coef, pat)));
    }
    Ok(means)
}
