use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which columns play which part in the analysis.
///
/// Time-varying roles (treatment, covariates, censor and a time-varying
/// outcome) name stems: in wide data the columns are `<stem><time label>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Roles {
    pub identifier: String,
    pub time: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    pub baseline: Vec<String>,
    pub outcome: Option<String>,
    pub censor: Option<String>,
    pub event_time: Option<String>,
    pub class: Option<String>,
}

impl Default for Roles {
    fn default() -> Self {
        Roles {
            identifier: "id".into(),
            time: "time".into(),
            treatment: String::new(),
            covariates: Vec::new(),
            baseline: Vec::new(),
            outcome: None,
            censor: None,
            event_time: None,
            class: None,
        }
    }
}

impl Roles {
    /// Parse a sidecar: either a JSON object or `key=value` lines with
    /// comma-separated lists. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Roles> {
        let trimmed = text.trim_start();
        let roles = if trimmed.starts_with('{') {
            serde_json::from_str(trimmed).map_err(|e| Error::Config(format!("roles sidecar: {e}")))?
        } else {
            let mut r = Roles::default();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("roles sidecar line {}: expected key=value", lineno + 1)))?;
                let value = value.trim();
                let single = || (!value.is_empty()).then(|| value.to_string());
                let list = || {
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect::<Vec<_>>()
                };
                match key.trim() {
                    "identifier" => r.identifier = value.to_string(),
                    "time" => r.time = value.to_string(),
                    "treatment" => r.treatment = value.to_string(),
                    "covariates" => r.covariates = list(),
                    "baseline" => r.baseline = list(),
                    "outcome" => r.outcome = single(),
                    "censor" => r.censor = single(),
                    "event_time" => r.event_time = single(),
                    "class" => r.class = single(),
                    other => return Err(Error::Config(format!("roles sidecar: unknown key '{other}'"))),
                }
            }
            r
        };
        roles.check()?;
        Ok(roles)
    }

    pub fn check(&self) -> Result<()> {
        if self.identifier.is_empty() {
            return Err(Error::Config("roles: identifier is required".into()));
        }
        if self.treatment.is_empty() {
            return Err(Error::Config("roles: treatment is required".into()));
        }
        let mut names: Vec<&str> = vec![&self.identifier, &self.time, &self.treatment];
        names.extend(self.covariates.iter().map(String::as_str));
        names.extend(self.baseline.iter().map(String::as_str));
        names.extend(self.outcome.as_deref());
        names.extend(self.censor.as_deref());
        names.extend(self.event_time.as_deref());
        names.extend(self.class.as_deref());
        let mut sorted = names.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Config(format!("roles: column '{}' assigned twice", w[0])));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv = "identifier=id\ntreatment=statins\ncovariates=hyper, bmi\nbaseline=age,sex\noutcome=y\n";
        let js = r#"{"identifier":"id","treatment":"statins","covariates":["hyper","bmi"],"baseline":["age","sex"],"outcome":"y"}"#;
        assert_eq!(Roles::parse(kv).unwrap(), Roles::parse(js).unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Roles::parse("treatment=a\nweight=w"), Err(Error::Config(_))));
        assert!(matches!(Roles::parse(r#"{"treatment":"a","weight":"w"}"#), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_assignment_rejected() {
        assert!(Roles::parse("treatment=a\ncovariates=a").is_err());
    }
}
