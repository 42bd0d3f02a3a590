use std::collections::HashMap;

use super::{Cohort, Layout, PanelData, Roles};
use crate::error::{Error, Result};

pub const INTERVAL_COLUMN: &str = "Interv";
pub const LOCAL_TIME_COLUMN: &str = "time2";
pub const COMPOSITE_ID_COLUMN: &str = "identifier2";

/// Sliding windows of length `s` over a follow-up of `k` times.
///
/// Interval `d` (1-based) covers original times `d..d+s-1`, re-indexed to
/// local times `1..s`. An individual contributes to interval `d` when no
/// outcome event occurred before the window starts and their records cover
/// the whole window, with censoring inside the window padded by rows flagged
/// as censored.
#[derive(Debug, Clone)]
pub struct IntervalSet {
    s: usize,
    k: usize,
    source: Cohort,
    members: Vec<Vec<usize>>,
    slices: Vec<PanelData>,
}

impl IntervalSet {
    pub fn interval_length(&self) -> usize {
        self.s
    }

    pub fn total_followup(&self) -> usize {
        self.k
    }

    pub fn n_intervals(&self) -> usize {
        self.members.len()
    }

    /// Long-layout slice for interval `d` (zero-based here).
    pub fn slice(&self, d: usize) -> &PanelData {
        &self.slices[d]
    }

    /// Source-cohort rows contributing to interval `d` (zero-based).
    pub fn members(&self, d: usize) -> &[usize] {
        &self.members[d]
    }

    pub fn source(&self) -> &Cohort {
        &self.source
    }

    /// Analysis view of interval `d`: local times, prior values carried from
    /// the time before the window, clusters pointing at original individuals.
    pub fn interval_cohort(&self, d: usize) -> Cohort {
        let mut c = self.source.slice(&self.members[d], d..d + self.s, Some(d));
        for id in c.ids.iter_mut() {
            *id = format!("{id}_{}", d + 1);
        }
        c.time_labels = (1..=self.s as i64).collect();
        c
    }

    /// All interval slices stacked, composite ids unique.
    pub fn pooled_cohort(&self) -> Result<Cohort> {
        Cohort::stack((0..self.n_intervals()).map(|d| self.interval_cohort(d)).collect())
    }

    /// All slices concatenated into one long table.
    pub fn pooled(&self) -> Result<PanelData> {
        let first = &self.slices[0];
        let mut ids = Vec::new();
        let mut columns: Vec<(String, Vec<f64>)> = first.columns.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
        let mut text: Vec<(String, Vec<String>)> =
            first.text_columns.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
        for s in &self.slices {
            ids.extend(s.ids.iter().cloned());
            for (dst, (_, src)) in columns.iter_mut().zip(&s.columns) {
                dst.1.extend_from_slice(src);
            }
            for (dst, (_, src)) in text.iter_mut().zip(&s.text_columns) {
                dst.1.extend(src.iter().cloned());
            }
        }
        PanelData::new(Layout::Long, first.roles.clone(), ids, columns, text)
            .map(|p| p.with_timevarying_outcome(first.timevarying_outcome))
    }
}

/// Split a panel into the `k - s + 1` history-restricted intervals.
pub fn split_data(data: &PanelData, s: usize) -> Result<IntervalSet> {
    let long = data.reshape(Layout::Long)?;
    let cohort = long.cohort()?;
    let k = cohort.k();
    if s < 2 || s > k {
        return Err(Error::Interval(format!("interval length {s} must satisfy 2 <= s <= K = {k}")));
    }
    let n_int = k - s + 1;
    let mut members = vec![Vec::new(); n_int];
    for (d, m) in members.iter_mut().enumerate() {
        for i in 0..cohort.n() {
            let event_before = (0..d).any(|t| cohort.outcome_at(i, t) == 1.0);
            if event_before || !cohort.present(i, d) {
                continue;
            }
            let mut complete = true;
            for t in d + 1..d + s {
                if !cohort.present(i, t) && !cohort.censored_at(i, t - 1) && !cohort.censor.get(i, t - 1).is_nan() {
                    complete = false;
                    break;
                }
            }
            if complete {
                m.push(i);
            }
        }
    }
    let slices = (0..n_int)
        .map(|d| build_slice(&long, &cohort, &members[d], d, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntervalSet { s, k, source: cohort, members, slices })
}

fn build_slice(long: &PanelData, cohort: &Cohort, members: &[usize], d: usize, s: usize) -> Result<PanelData> {
    let roles = &long.roles;
    let time = long.numeric(&roles.time)?;
    let mut row_of: HashMap<(&str, i64), usize> = HashMap::new();
    let mut first_row: HashMap<&str, usize> = HashMap::new();
    for r in 0..long.n_rows() {
        row_of.insert((long.ids[r].as_str(), time[r] as i64), r);
        first_row.entry(long.ids[r].as_str()).or_insert(r);
    }
    let fixed: Vec<&str> = long.fixed_columns_for_split();
    let mut ids = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> = long.columns.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
    let mut text: Vec<(String, Vec<String>)> = vec![(roles.identifier.clone(), Vec::new())];
    text.extend(long.text_columns.iter().map(|(n, _)| (n.clone(), Vec::new())));
    let mut interv = Vec::new();
    let mut time2 = Vec::new();
    for &i in members {
        let id = cohort.ids[i].as_str();
        for local in 0..s {
            let label = cohort.time_labels[d + local];
            ids.push(format!("{id}_{}", d + 1));
            interv.push((d + 1) as f64);
            time2.push((local + 1) as f64);
            text[0].1.push(id.to_string());
            match row_of.get(&(id, label)) {
                Some(&r) => {
                    for (dst, (_, src)) in columns.iter_mut().zip(&long.columns) {
                        dst.1.push(src[r]);
                    }
                    for (dst, (_, src)) in text[1..].iter_mut().zip(&long.text_columns) {
                        dst.1.push(src[r].clone());
                    }
                }
                None => {
                    // censored earlier in the window
                    let r0 = first_row[id];
                    for (dst, (name, src)) in columns.iter_mut().zip(&long.columns) {
                        let v = if *name == roles.time {
                            label as f64
                        } else if Some(name) == roles.censor.as_ref() {
                            1.0
                        } else if fixed.contains(&name.as_str()) {
                            src[r0]
                        } else {
                            f64::NAN
                        };
                        dst.1.push(v);
                    }
                    for (dst, (_, src)) in text[1..].iter_mut().zip(&long.text_columns) {
                        dst.1.push(src[r0].clone());
                    }
                }
            }
        }
    }
    columns.push((INTERVAL_COLUMN.to_string(), interv));
    columns.push((LOCAL_TIME_COLUMN.to_string(), time2));
    let slice_roles = Roles {
        identifier: COMPOSITE_ID_COLUMN.to_string(),
        time: LOCAL_TIME_COLUMN.to_string(),
        ..roles.clone()
    };
    PanelData::new(Layout::Long, slice_roles, ids, columns, text)
        .map(|p| p.with_timevarying_outcome(long.timevarying_outcome))
}

impl PanelData {
    fn fixed_columns_for_split(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.roles.baseline.iter().map(String::as_str).collect();
        if !self.timevarying_outcome {
            v.extend(self.roles.outcome.as_deref());
        }
        v.extend(self.roles.event_time.as_deref());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> Roles {
        Roles {
            treatment: "a".into(),
            covariates: vec!["l".into()],
            outcome: Some("y".into()),
            censor: Some("c".into()),
            ..Roles::default()
        }
    }

    /// Long panel with per-id (last time, event time, censor time).
    fn panel(k: usize, spec: &[(&str, usize, Option<usize>, Option<usize>)]) -> PanelData {
        let mut ids = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 5];
        for &(id, last, event, cens) in spec {
            for t in 1..=last.min(k) {
                ids.push(id.to_string());
                cols[0].push(t as f64);
                cols[1].push((t % 2) as f64);
                cols[2].push(((t + 1) % 2) as f64);
                cols[3].push(if event.is_some_and(|e| t >= e) { 1.0 } else { 0.0 });
                cols[4].push(if cens == Some(t) { 1.0 } else { 0.0 });
            }
        }
        let names = ["time", "a", "l", "y", "c"];
        let columns = names.iter().map(|n| n.to_string()).zip(cols).collect();
        PanelData::new(Layout::Long, roles(), ids, columns, vec![]).unwrap()
    }

    #[test]
    fn k8_s6_gives_three_windows() {
        let p = panel(8, &[("1", 8, None, None), ("2", 8, None, None)]);
        let set = split_data(&p, 6).unwrap();
        assert_eq!(set.n_intervals(), 3);
        for d in 0..3 {
            let sl = set.slice(d);
            assert_eq!(sl.n_rows(), 12);
            let t = sl.numeric("time").unwrap();
            assert_eq!(t[0], (d + 1) as f64);
            assert_eq!(t[5], (d + 6) as f64);
            assert_eq!(sl.time_labels(), &[1, 2, 3, 4, 5, 6]);
            assert_eq!(sl.ids()[0], format!("1_{}", d + 1));
            assert!(sl.numeric(INTERVAL_COLUMN).unwrap().iter().all(|&v| v == (d + 1) as f64));
        }
    }

    #[test]
    fn s_equal_k_is_one_reindexed_copy() {
        let p = panel(3, &[("1", 3, None, None), ("2", 3, Some(2), None)]);
        let set = split_data(&p, 3).unwrap();
        assert_eq!(set.n_intervals(), 1);
        let c = set.interval_cohort(0);
        let orig = p.cohort().unwrap();
        assert_eq!(c.treatment, orig.treatment);
        assert_eq!(c.covariates, orig.covariates);
        assert_eq!(c.time_labels, vec![1, 2, 3]);
    }

    #[test]
    fn event_at_time_four_leaves_later_windows() {
        // records end at the event
        let p = panel(5, &[("7", 4, Some(4), None), ("8", 5, None, None)]);
        let set = split_data(&p, 3).unwrap();
        assert_eq!(set.n_intervals(), 3);
        let has7 = |d: usize| set.slice(d).ids().iter().any(|s| s.starts_with("7_"));
        assert!(has7(0) && has7(1));
        assert!(!has7(2));
    }

    #[test]
    fn censoring_inside_window_is_padded() {
        let p = panel(4, &[("1", 3, None, Some(3)), ("2", 4, None, None)]);
        let set = split_data(&p, 2).unwrap();
        assert_eq!(set.n_intervals(), 3);
        // window (3,4): id 1 censored at 3 so its time-4 row is padded
        let sl = set.slice(2);
        assert_eq!(sl.n_rows(), 4);
        let a = sl.numeric("a").unwrap();
        let c = sl.numeric("c").unwrap();
        assert!(a[1].is_nan());
        assert_eq!(c[1], 1.0);
        let coh = set.interval_cohort(2);
        assert!(!coh.continues(0, 0));
    }

    #[test]
    fn invalid_lengths() {
        let p = panel(3, &[("1", 3, None, None)]);
        assert!(matches!(split_data(&p, 4), Err(Error::Interval(_))));
        assert!(matches!(split_data(&p, 1), Err(Error::Interval(_))));
    }

    #[test]
    fn exhaustive_window_counts() {
        for k in 2..=10 {
            let p = panel(k, &[("1", k, None, None)]);
            for s in 2..=k {
                let set = split_data(&p, s).unwrap();
                assert_eq!(set.n_intervals(), k - s + 1);
                for d in 0..set.n_intervals() {
                    assert_eq!(set.slice(d).time_labels().len(), s);
                }
                let pooled = set.pooled().unwrap();
                let mut ids: Vec<&String> = pooled.ids().iter().collect();
                ids.sort();
                ids.dedup();
                assert_eq!(ids.len(), set.n_intervals());
            }
        }
    }
}
