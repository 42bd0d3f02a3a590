use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{Glm, GlmFit};
use crate::error::Result;

/// Rows of a design matrix collapsed to their distinct values.
///
/// For GLMs the score equations only depend on the weighted sums of the
/// response within identical design rows, so a fit on the collapsed rows
/// (summed weights, weighted-mean response) gives the same coefficients as a
/// fit on the full data. Used for nuisance regressions that are refit many
/// times with new responses or weights on a fixed design.
#[derive(Debug, Clone)]
pub struct GroupedDesign {
    unique: DMatrix<f64>,
    group_of: Vec<usize>,
}

impl GroupedDesign {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut uniq: Vec<&Vec<f64>> = Vec::new();
        let mut group_of = Vec::with_capacity(rows.len());
        for r in rows {
            let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            let g = *index.entry(key).or_insert_with(|| {
                uniq.push(r);
                uniq.len() - 1
            });
            group_of.push(g);
        }
        let p = rows.first().map_or(0, |r| r.len());
        let unique = DMatrix::from_fn(uniq.len(), p, |i, j| uniq[i][j]);
        GroupedDesign { unique, group_of }
    }

    pub fn n_groups(&self) -> usize {
        self.unique.nrows()
    }

    pub fn n_rows(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, row: usize) -> usize {
        self.group_of[row]
    }

    pub fn unique_rows(&self) -> &DMatrix<f64> {
        &self.unique
    }

    pub fn unique_row(&self, g: usize) -> Vec<f64> {
        self.unique.row(g).iter().copied().collect()
    }

    /// Summed weights and weighted-mean response per group.
    pub fn aggregate(&self, y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = self.n_groups();
        let mut sw = vec![0.0; g];
        let mut swy = vec![0.0; g];
        for (i, &grp) in self.group_of.iter().enumerate() {
            if w[i] != 0.0 {
                sw[grp] += w[i];
                swy[grp] += w[i] * y[i];
            }
        }
        let ybar = sw
            .iter()
            .zip(&swy)
            .map(|(s, t)| if *s > 0.0 { t / s } else { 0.0 })
            .collect();
        (ybar, sw)
    }

    /// Point-estimate fit on the collapsed rows.
    pub fn fit(&self, glm: &Glm, y: &[f64], w: &[f64], start: Option<&[f64]>) -> Result<GlmFit> {
        let (mut ybar, sw) = self.aggregate(y, w);
        if glm.family == super::Family::Binomial {
            // rounding in the weighted mean can step just outside [0, 1]
            ybar.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        }
        let glm = glm.clone().point_estimate_only();
        glm.fit(&self.unique, &ybar, Some(&sw), None, start)
    }
}
