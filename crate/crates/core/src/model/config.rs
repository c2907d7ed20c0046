//! TOML model configuration files.
//!
//! ```toml
//! name = "birth"
//! dimension = 1
//! x0 = [1.0]
//! jumps = [[1]]
//! rates = [[{ exponents = [1], coeff = 1.0 }]]
//!
//! [domain.box]
//! lower = [0.0]
//! upper = [inf]
//! ```
//!
//! or, for a reference model, `builtin = "contact"` with `params.lambda = 2.0`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{builtin, Builtin, Domain, ModelError, ModelSpec, Monomial, Polynomial};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<Monomial>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

impl ModelConfig {
    pub fn from_builtin(kind: Builtin, params: &[(&str, f64)]) -> Self {
        Self {
            builtin: Some(kind.to_string()),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ..Self::default()
        }
    }

    /// Resolves the configuration into a model specification. A builtin
    /// supplies jumps, rates and domain; an explicit `x0` still overrides it.
    pub fn to_spec(&self) -> Result<ModelSpec, ConfigError> {
        if let Some(name) = &self.builtin {
            let kind: Builtin = name.parse()?;
            let mut spec = builtin(kind, &self.params)?;
            if let Some(x0) = &self.x0 {
                spec.x0 = x0.clone();
            }
            if let Some(n) = &self.name {
                spec.name = n.clone();
            }
            return Ok(spec);
        }
        let dimension = self.dimension.ok_or(ConfigError::MissingField("dimension"))?;
        let x0 = self.x0.clone().ok_or(ConfigError::MissingField("x0"))?;
        let jumps = self.jumps.clone().ok_or(ConfigError::MissingField("jumps"))?;
        let rates = self
            .rates
            .clone()
            .ok_or(ConfigError::MissingField("rates"))?
            .into_iter()
            .map(Polynomial::new)
            .collect();
        Ok(ModelSpec {
            name: self.name.clone().unwrap_or_else(|| "custom".to_string()),
            params: self.params.clone(),
            dimension,
            jumps,
            rates,
            domain: self.domain.clone().unwrap_or_default(),
            x0,
        })
    }
}

pub fn parse_model_config(text: &str) -> Result<ModelConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn load_model_config(path: &Path) -> Result<ModelConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_yule_parses() {
        let text = r#"
            name = "birth"
            dimension = 1
            x0 = [1.0]
            jumps = [[1]]
            rates = [[{ exponents = [1], coeff = 2.0 }]]
            [domain.box]
            lower = [0.0]
            upper = [inf]
        "#;
        let spec = parse_model_config(text).unwrap().to_spec().unwrap();
        assert_eq!(spec.name, "birth");
        assert_eq!(spec.rates[0].eval(&[3.0]), 6.0);
        assert_eq!(spec.domain, Domain::interval(0.0, f64::INFINITY));
    }

    #[test]
    fn builtin_with_params() {
        let text = "builtin = \"contact\"\nparams.lambda = 2.0\n";
        let spec = parse_model_config(text).unwrap().to_spec().unwrap();
        assert_eq!(spec.jumps, vec![vec![1], vec![-1]]);
        assert_eq!(spec.params["lambda"], 2.0);
    }

    #[test]
    fn missing_rates_is_reported() {
        let text = "dimension = 1\nx0 = [1.0]\njumps = [[1]]\n";
        let err = parse_model_config(text).unwrap().to_spec().unwrap_err();
        assert!(matches!(err, ConfigError::MissingField("rates")));
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        let err = parse_model_config("dimension = \n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn halfspaces_parse() {
        let text = r#"
            dimension = 2
            x0 = [0.5, 0.1]
            jumps = [[0, -1], [-1, 1]]
            rates = [[{ exponents = [0, 1], coeff = 1.0 }], [{ exponents = [1, 1], coeff = 3.0 }]]
            [domain]
            halfspaces = [{ a = [1.0, 1.0], c = 1.0 }, { a = [-1.0, 0.0], c = 0.0 }, { a = [0.0, -1.0], c = 0.0 }]
        "#;
        let spec = parse_model_config(text).unwrap().to_spec().unwrap();
        assert_eq!(spec.domain.halfspaces.len(), 3);
        assert!(spec.domain.contains(&[0.5, 0.5], 0.0));
        assert!(!spec.domain.contains(&[0.6, 0.5], 1e-12));
    }
}
