//! Longitudinal panel data: role declarations, wide/long reshaping, CSV
//! input/output, validation into an analysis [`Cohort`], and splitting into
//! sliding intervals for history-restricted models.

mod cohort;
mod csvio;
mod roles;
mod split;

pub use cohort::{Cohort, Grid, Outcome};
pub(crate) use csvio::format_number;
pub use roles::Roles;
pub use split::{split_data, IntervalSet};

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Wide,
    Long,
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            other => Err(Error::Config(format!("unknown layout '{other}' (expected wide or long)"))),
        }
    }
}

/// A rectangular longitudinal table with declared column roles.
///
/// Wide layout has one row per individual and time-varying columns named
/// `<stem><time label>`; long layout has one row per (individual, time).
/// Numeric cells use `NaN` for missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub(crate) layout: Layout,
    pub(crate) roles: Roles,
    pub(crate) time_labels: Vec<i64>,
    pub(crate) ids: Vec<String>,
    pub(crate) columns: Vec<(String, Vec<f64>)>,
    pub(crate) text_columns: Vec<(String, Vec<String>)>,
    pub(crate) timevarying_outcome: bool,
}

impl PanelData {
    /// Build from raw columns; time labels are inferred from the layout.
    pub fn new(
        layout: Layout,
        roles: Roles,
        ids: Vec<String>,
        columns: Vec<(String, Vec<f64>)>,
        text_columns: Vec<(String, Vec<String>)>,
    ) -> Result<Self> {
        let n = ids.len();
        for (name, c) in &columns {
            if c.len() != n {
                return Err(Error::Schema(format!("column '{name}' has {} rows, expected {n}", c.len())));
            }
        }
        for (name, c) in &text_columns {
            if c.len() != n {
                return Err(Error::Schema(format!("column '{name}' has {} rows, expected {n}", c.len())));
            }
        }
        let mut data = PanelData {
            layout,
            roles,
            time_labels: Vec::new(),
            ids,
            columns,
            text_columns,
            timevarying_outcome: false,
        };
        match layout {
            Layout::Long => {
                let time = data.numeric(&data.roles.time.clone())?;
                let mut labels: Vec<i64> = Vec::new();
                for &t in time {
                    if !t.is_finite() || t.fract() != 0.0 {
                        return Err(Error::Schema(format!("time value {t} is not an integer label")));
                    }
                    labels.push(t as i64);
                }
                labels.sort_unstable();
                labels.dedup();
                data.time_labels = labels;
                if let Some(y) = data.roles.outcome.clone() {
                    data.timevarying_outcome = data.outcome_varies_within_id(&y)?;
                }
            }
            Layout::Wide => {
                data.time_labels = data.stem_labels(&data.roles.treatment.clone());
                if data.time_labels.is_empty() {
                    return Err(Error::Schema(format!(
                        "no wide columns found for treatment stem '{}'",
                        data.roles.treatment
                    )));
                }
                if let Some(y) = data.roles.outcome.clone() {
                    if data.numeric(&y).is_err() && !data.stem_labels(&y).is_empty() {
                        data.timevarying_outcome = true;
                    }
                }
            }
        }
        data.validate_schema()?;
        Ok(data)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn time_labels(&self) -> &[i64] {
        &self.time_labels
    }

    pub fn n_times(&self) -> usize {
        self.time_labels.len()
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![self.roles.identifier.clone()];
        names.extend(self.columns.iter().map(|(n, _)| n.clone()));
        names.extend(self.text_columns.iter().map(|(n, _)| n.clone()));
        names
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found")))
    }

    pub fn text(&self, name: &str) -> Result<&[String]> {
        self.text_columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
            .ok_or_else(|| Error::Schema(format!("text column '{name}' not found")))
    }

    /// Marks the outcome as time-varying (`y` per time) rather than terminal.
    pub fn with_timevarying_outcome(mut self, flag: bool) -> Self {
        self.timevarying_outcome = flag;
        self
    }

    pub fn has_timevarying_outcome(&self) -> bool {
        self.timevarying_outcome
    }

    fn stem_labels(&self, stem: &str) -> Vec<i64> {
        let mut labels: Vec<i64> = self
            .columns
            .iter()
            .filter_map(|(name, _)| wide_suffix(name, stem))
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Stems whose values vary over time: treatment, covariates, censor and
    /// (when time-varying) outcome.
    fn time_varying_stems(&self) -> Vec<String> {
        let mut stems = vec![self.roles.treatment.clone()];
        stems.extend(self.roles.covariates.iter().cloned());
        if let Some(c) = &self.roles.censor {
            stems.push(c.clone());
        }
        if self.timevarying_outcome {
            if let Some(y) = &self.roles.outcome {
                stems.push(y.clone());
            }
        }
        stems
    }

    fn fixed_columns(&self) -> Vec<String> {
        let mut fixed = self.roles.baseline.clone();
        if !self.timevarying_outcome {
            if let Some(y) = &self.roles.outcome {
                fixed.push(y.clone());
            }
        }
        if let Some(e) = &self.roles.event_time {
            fixed.push(e.clone());
        }
        if let Some(c) = &self.roles.class {
            fixed.push(c.clone());
        }
        fixed
    }

    fn outcome_varies_within_id(&self, y: &str) -> Result<bool> {
        let yv = self.numeric(y)?;
        let mut first: HashMap<&str, f64> = HashMap::new();
        for (id, v) in self.ids.iter().zip(yv) {
            match first.get(id.as_str()) {
                Some(prev) if !(prev.to_bits() == v.to_bits()) => return Ok(true),
                Some(_) => {}
                None => {
                    first.insert(id, *v);
                }
            }
        }
        Ok(false)
    }

    fn validate_schema(&self) -> Result<()> {
        match self.layout {
            Layout::Wide => {
                let mut seen = std::collections::HashSet::new();
                for id in &self.ids {
                    if !seen.insert(id) {
                        return Err(Error::Schema(format!("identifier '{id}' repeated in wide layout")));
                    }
                }
                for stem in self.time_varying_stems() {
                    let labels = self.stem_labels(&stem);
                    if labels != self.time_labels {
                        return Err(Error::Schema(format!(
                            "stem '{stem}' has time labels {labels:?}, treatment has {:?}",
                            self.time_labels
                        )));
                    }
                }
                for col in self.fixed_columns() {
                    self.numeric(&col)?;
                }
            }
            Layout::Long => {
                let time = self.numeric(&self.roles.time)?;
                let mut seen = std::collections::HashSet::new();
                for (id, t) in self.ids.iter().zip(time) {
                    if !seen.insert((id.as_str(), *t as i64)) {
                        return Err(Error::Schema(format!("(id {id}, time {t}) occurs more than once")));
                    }
                }
                for stem in self.time_varying_stems() {
                    self.numeric(&stem)?;
                }
                for col in self.fixed_columns() {
                    self.numeric(&col)?;
                }
            }
        }
        Ok(())
    }

    /// Distinct identifiers in order of first appearance.
    pub fn distinct_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.ids.iter().filter(|id| seen.insert(id.as_str())).cloned().collect()
    }

    /// Convert between wide and long layouts.
    pub fn reshape(&self, target: Layout) -> Result<PanelData> {
        if target == self.layout {
            return Ok(self.clone());
        }
        match target {
            Layout::Long => self.to_long(),
            Layout::Wide => self.to_wide(),
        }
    }

    fn to_long(&self) -> Result<PanelData> {
        let stems = self.time_varying_stems();
        let fixed = self.fixed_columns();
        let censor = self.roles.censor.clone();
        let mut ids = Vec::new();
        let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut time_col = Vec::new();
        let mut text: Vec<(String, Vec<String>)> =
            self.text_columns.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
        for r in 0..self.n_rows() {
            let mut censored = false;
            for &label in &self.time_labels {
                let values: Vec<f64> = stems
                    .iter()
                    .map(|s| self.numeric(&format!("{s}{label}")).map(|c| c[r]))
                    .collect::<Result<_>>()?;
                if values.iter().all(|v| v.is_nan()) {
                    if censored {
                        continue;
                    }
                    return Err(Error::MissingCell {
                        id: self.ids[r].clone(),
                        time: label,
                        column: format!("{}{label}", self.roles.treatment),
                    });
                }
                ids.push(self.ids[r].clone());
                time_col.push(label as f64);
                for (s, v) in stems.iter().zip(&values) {
                    cols.entry(s.clone()).or_default().push(*v);
                }
                for f in &fixed {
                    cols.entry(f.clone()).or_default().push(self.numeric(f)?[r]);
                }
                for (k, (_, src)) in self.text_columns.iter().enumerate() {
                    text[k].1.push(src[r].clone());
                }
                if let Some(c) = &censor {
                    if self.numeric(&format!("{c}{label}"))?[r] == 1.0 {
                        censored = true;
                    }
                }
                if self.timevarying_outcome {
                    if let Some(y) = &self.roles.outcome {
                        if self.numeric(&format!("{y}{label}"))?[r] == 1.0 {
                            censored = true;
                        }
                    }
                }
            }
        }
        let mut columns = Vec::new();
        let order = long_order(&self.roles, self.timevarying_outcome);
        for name in order {
            if name == self.roles.time {
                columns.push((name, std::mem::take(&mut time_col)));
            } else if let Some(c) = cols.remove(&name) {
                columns.push((name, c));
            }
        }
        columns.extend(cols);
        PanelData::new(Layout::Long, self.roles.clone(), ids, columns, text)
            .map(|p| p.with_timevarying_outcome(self.timevarying_outcome))
    }

    fn to_wide(&self) -> Result<PanelData> {
        let stems = self.time_varying_stems();
        let fixed = self.fixed_columns();
        let time = self.numeric(&self.roles.time)?;
        let ids = self.distinct_ids();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let tindex: HashMap<i64, usize> = self.time_labels.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let n = ids.len();
        let k = self.time_labels.len();
        let mut grid: Vec<Vec<f64>> = vec![vec![f64::NAN; n * k]; stems.len()];
        let mut present = vec![false; n * k];
        let mut fixed_vals: Vec<Vec<f64>> = vec![vec![f64::NAN; n]; fixed.len()];
        let mut text: Vec<(String, Vec<String>)> = self
            .text_columns
            .iter()
            .map(|(name, _)| (name.clone(), vec![String::new(); n]))
            .collect();
        for r in 0..self.n_rows() {
            let i = index[self.ids[r].as_str()];
            let t = tindex[&(time[r] as i64)];
            present[i * k + t] = true;
            for (s, stem) in stems.iter().enumerate() {
                grid[s][i * k + t] = self.numeric(stem)?[r];
            }
            for (f, name) in fixed.iter().enumerate() {
                let v = self.numeric(name)?[r];
                let slot = &mut fixed_vals[f][i];
                if slot.is_nan() {
                    *slot = v;
                } else if !v.is_nan() && slot.to_bits() != v.to_bits() {
                    return Err(Error::Schema(format!(
                        "column '{name}' is not constant within id {}",
                        self.ids[r]
                    )));
                }
            }
            for (c, (_, src)) in self.text_columns.iter().enumerate() {
                text[c].1[i] = src[r].clone();
            }
        }
        // absent rows are legal only after a censoring flag or an outcome event
        let censor_pos = self.roles.censor.as_ref().and_then(|c| stems.iter().position(|s| s == c));
        let event_pos = if self.timevarying_outcome {
            self.roles.outcome.as_ref().and_then(|y| stems.iter().position(|s| s == y))
        } else {
            None
        };
        for i in 0..n {
            let mut censored = false;
            for t in 0..k {
                if !present[i * k + t] && !censored {
                    return Err(Error::MissingCell {
                        id: ids[i].clone(),
                        time: self.time_labels[t],
                        column: self.roles.treatment.clone(),
                    });
                }
                for pos in [censor_pos, event_pos].into_iter().flatten() {
                    if grid[pos][i * k + t] == 1.0 {
                        censored = true;
                    }
                }
            }
        }
        let mut columns = Vec::new();
        for (f, name) in fixed.iter().enumerate() {
            columns.push((name.clone(), fixed_vals[f].clone()));
        }
        for (s, stem) in stems.iter().enumerate() {
            for (t, label) in self.time_labels.iter().enumerate() {
                columns.push((format!("{stem}{label}"), (0..n).map(|i| grid[s][i * k + t]).collect()));
            }
        }
        PanelData::new(Layout::Wide, self.roles.clone(), ids, columns, text)
            .map(|p| p.with_timevarying_outcome(self.timevarying_outcome))
    }

    /// Equality up to row and column order.
    pub fn equivalent(&self, other: &PanelData) -> bool {
        if self.layout != other.layout || self.time_labels != other.time_labels || self.n_rows() != other.n_rows() {
            return false;
        }
        let key = |p: &PanelData, r: usize| -> (String, i64) {
            let t = match p.layout {
                Layout::Long => p.numeric(&p.roles.time).map(|c| c[r] as i64).unwrap_or(0),
                Layout::Wide => 0,
            };
            (p.ids[r].clone(), t)
        };
        let rows_a: HashMap<(String, i64), usize> = (0..self.n_rows()).map(|r| (key(self, r), r)).collect();
        let mut names_a: Vec<&String> = self.columns.iter().map(|(n, _)| n).collect();
        let mut names_b: Vec<&String> = other.columns.iter().map(|(n, _)| n).collect();
        names_a.sort();
        names_b.sort();
        if names_a != names_b {
            return false;
        }
        for r in 0..other.n_rows() {
            let Some(&ra) = rows_a.get(&key(other, r)) else {
                return false;
            };
            for (name, col) in &other.columns {
                let a = self.numeric(name).unwrap()[ra];
                if a.to_bits() != col[r].to_bits() && !(a.is_nan() && col[r].is_nan()) {
                    return false;
                }
            }
        }
        true
    }
}

fn wide_suffix(name: &str, stem: &str) -> Option<i64> {
    let rest = name.strip_prefix(stem)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Column order used when writing long data: id, baseline, outcome, time,
/// treatment, covariates, censor.
fn long_order(roles: &Roles, timevarying_outcome: bool) -> Vec<String> {
    let mut order = roles.baseline.clone();
    if let Some(y) = &roles.outcome {
        if !timevarying_outcome {
            order.push(y.clone());
        }
    }
    if let Some(e) = &roles.event_time {
        order.push(e.clone());
    }
    order.push(roles.time.clone());
    order.push(roles.treatment.clone());
    order.extend(roles.covariates.iter().cloned());
    if timevarying_outcome {
        if let Some(y) = &roles.outcome {
            order.push(y.clone());
        }
    }
    if let Some(c) = &roles.censor {
        order.push(c.clone());
    }
    if let Some(c) = &roles.class {
        order.push(c.clone());
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> Roles {
        Roles {
            identifier: "id".into(),
            time: "time".into(),
            treatment: "statins".into(),
            covariates: vec!["hyper".into(), "bmi".into()],
            baseline: vec!["age".into(), "sex".into()],
            outcome: Some("y".into()),
            ..Roles::default()
        }
    }

    fn table2_row2() -> PanelData {
        let cols = vec![
            ("age".to_string(), vec![0.0]),
            ("sex".to_string(), vec![0.0]),
            ("y".to_string(), vec![0.0]),
            ("statins2011".to_string(), vec![1.0]),
            ("statins2012".to_string(), vec![0.0]),
            ("statins2013".to_string(), vec![0.0]),
            ("hyper2011".to_string(), vec![1.0]),
            ("hyper2012".to_string(), vec![0.0]),
            ("hyper2013".to_string(), vec![1.0]),
            ("bmi2011".to_string(), vec![1.0]),
            ("bmi2012".to_string(), vec![1.0]),
            ("bmi2013".to_string(), vec![0.0]),
        ];
        PanelData::new(Layout::Wide, roles(), vec!["2".into()], cols, vec![]).unwrap()
    }

    #[test]
    fn wide_row_becomes_three_long_rows() {
        let long = table2_row2().reshape(Layout::Long).unwrap();
        assert_eq!(long.n_rows(), 3);
        assert_eq!(long.numeric("time").unwrap(), &[2011.0, 2012.0, 2013.0]);
        assert_eq!(long.numeric("statins").unwrap(), &[1.0, 0.0, 0.0]);
        assert_eq!(long.numeric("hyper").unwrap(), &[1.0, 0.0, 1.0]);
        assert_eq!(long.numeric("bmi").unwrap(), &[1.0, 1.0, 0.0]);
        assert_eq!(long.numeric("age").unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn inconsistent_stems_are_schema_errors() {
        let mut p = table2_row2();
        p.columns.retain(|(n, _)| n != "hyper2012");
        let r = PanelData::new(Layout::Wide, roles(), p.ids.clone(), p.columns.clone(), vec![]);
        assert!(matches!(r, Err(Error::Schema(_))));
    }

    #[test]
    fn missing_long_row_without_censoring_is_an_error() {
        let long = table2_row2().reshape(Layout::Long).unwrap();
        // id 2 lacks 2012 while id 3 has all three years
        let keep = [0usize, 2, 0, 1, 2];
        let cols = long
            .columns
            .iter()
            .map(|(n, c)| (n.clone(), keep.iter().map(|&r| c[r]).collect()))
            .collect();
        let ids = ["2", "2", "3", "3", "3"].iter().map(|s| s.to_string()).collect();
        let gap = PanelData::new(Layout::Long, roles(), ids, cols, vec![]).unwrap();
        assert!(matches!(gap.reshape(Layout::Wide), Err(Error::MissingCell { .. })));
    }

    #[test]
    fn duplicate_id_time_rejected() {
        let cols = vec![
            ("time".to_string(), vec![1.0, 1.0]),
            ("statins".to_string(), vec![1.0, 0.0]),
            ("hyper".to_string(), vec![0.0, 0.0]),
            ("bmi".to_string(), vec![0.0, 0.0]),
            ("age".to_string(), vec![0.0, 0.0]),
            ("sex".to_string(), vec![0.0, 0.0]),
            ("y".to_string(), vec![0.0, 0.0]),
        ];
        let r = PanelData::new(Layout::Long, roles(), vec!["1".into(), "1".into()], cols, vec![]);
        assert!(matches!(r, Err(Error::Schema(_))));
    }
}
