use std::fmt::Write as _;

use serde::Serialize;

use super::{Estimator, MsmFit};
use crate::error::{Error, Result, Warning};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Serializable summary of a fitted working model.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub estimator: Estimator,
    /// One-based reference group.
    #[serde(rename = "ref")]
    pub reference: usize,
    pub coefficients: Vec<CoefficientRow>,
    pub n: usize,
    #[serde(rename = "J")]
    pub n_classes: usize,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
    pub warnings: Vec<Warning>,
}

impl Report {
    pub fn from_fit(fit: &MsmFit) -> Report {
        let coefficients = (0..fit.coefficients.len())
            .map(|j| CoefficientRow {
                name: fit.names[j].clone(),
                estimate: fit.coefficients[j],
                se: fit.se[j],
                p: fit.p_values[j],
                lo: fit.ci_lower[j],
                hi: fit.ci_upper[j],
            })
            .collect();
        let mut diagnostics = serde_json::Map::new();
        if let Some(b) = &fit.bootstrap {
            diagnostics.insert("bootstrap_replicates".into(), b.len().into());
        }
        if let Some(inf) = &fit.influence {
            let p = fit.coefficients.len();
            let means: Vec<f64> = (0..p).map(|j| inf.iter().map(|r| r[j]).sum::<f64>() / inf.len() as f64).collect();
            let max = means.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            diagnostics.insert("max_abs_influence_mean".into(), serde_json::json!(max));
        }
        if let Some(eps) = &fit.fluctuation {
            let max = eps.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            diagnostics.insert("max_abs_fluctuation".into(), serde_json::json!(max));
        }
        Report {
            estimator: fit.estimator,
            reference: fit.reference + 1,
            coefficients,
            n: fit.n,
            n_classes: fit.n_classes,
            diagnostics,
            warnings: fit.warnings.clone(),
        }
    }

    pub fn with_diagnostic(mut self, key: &str, value: serde_json::Value) -> Report {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width coefficient table.
    pub fn table(&self) -> String {
        let width = self.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(0).max(11);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "", "Estimate", "Std.Error", "p.value", "CI.lower", "CI.upper"
        );
        for c in &self.coefficients {
            let _ = writeln!(
                s,
                "{:<width$} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                c.name, c.estimate, c.se, c.p, c.lo, c.hi
            );
        }
        s
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "estimate", "se", "p", "lo", "hi"])?;
        for c in &self.coefficients {
            w.write_record([
                c.name.clone(),
                c.estimate.to_string(),
                c.se.to_string(),
                c.p.to_string(),
                c.lo.to_string(),
                c.hi.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }
}
