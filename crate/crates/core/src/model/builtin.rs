use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Domain, ModelError, ModelSpec, Polynomial};

/// The four reference models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    /// Contact process on the complete graph, `d = 1`.
    Contact,
    /// SIR epidemic on the complete graph, state `(S, I)`.
    Sir,
    /// `R1 + R2 <-> R3`.
    Chemical,
    /// Pure-birth chain with per-capita rate `lambda`.
    Yule,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [Builtin::Contact, Builtin::Sir, Builtin::Chemical, Builtin::Yule];

    pub fn as_str(self) -> &'static str {
        match self {
            Builtin::Contact => "contact",
            Builtin::Sir => "sir",
            Builtin::Chemical => "chemical",
            Builtin::Yule => "yule",
        }
    }

    /// Parameter defaults; user values override these.
    pub fn default_params(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            Builtin::Contact => &[("lambda", 2.0), ("x0", 0.2)],
            Builtin::Sir => &[("lambda", 3.0), ("x0", 0.7), ("y0", 0.1)],
            Builtin::Chemical => &[("lambda", 1.0), ("mu", 1.0), ("x0", 0.3), ("y0", 0.2), ("z0", 0.1)],
            Builtin::Yule => &[("lambda", 1.0), ("x0", 1.0)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Builtin {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "contact" => Ok(Builtin::Contact),
            "sir" => Ok(Builtin::Sir),
            "chemical" => Ok(Builtin::Chemical),
            "yule" => Ok(Builtin::Yule),
            other => Err(ModelError::UnknownName(other.to_string())),
        }
    }
}

/// Builds one of the reference models. Missing parameters take the values
/// from [`Builtin::default_params`]; unknown keys are rejected.
pub fn builtin(kind: Builtin, params: &BTreeMap<String, f64>) -> Result<ModelSpec, ModelError> {
    let mut p = kind.default_params();
    for (k, v) in params {
        if !p.contains_key(k) {
            return Err(ModelError::BadParams(format!("`{k}` is not a parameter of {kind}")));
        }
        if !v.is_finite() {
            return Err(ModelError::BadParams(format!("`{k}` must be finite")));
        }
        p.insert(k.clone(), *v);
    }
    let get = |k: &str| p[k];
    let positive = |k: &str| -> Result<f64, ModelError> {
        let v = get(k);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ModelError::BadParams(format!("`{k}` must be positive, got {v}")))
        }
    };

    let spec = match kind {
        Builtin::Contact => {
            let lambda = positive("lambda")?;
            let x0 = get("x0");
            if !(0.0..=1.0).contains(&x0) {
                return Err(ModelError::BadParams(format!("x0 = {x0} outside [0, 1]")));
            }
            ModelSpec {
                name: kind.to_string(),
                params: p.clone(),
                dimension: 1,
                jumps: vec![vec![1], vec![-1]],
                rates: vec![
                    Polynomial::monomial(&[1], lambda).plus(&[2], -lambda),
                    Polynomial::monomial(&[1], 1.0),
                ],
                domain: Domain::interval(0.0, 1.0),
                x0: vec![x0],
            }
        }
        Builtin::Sir => {
            let lambda = positive("lambda")?;
            let (s0, i0) = (get("x0"), get("y0"));
            if s0 < 0.0 || i0 < 0.0 || s0 + i0 > 1.0 {
                return Err(ModelError::BadParams(format!("(x0, y0) = ({s0}, {i0}) outside the simplex")));
            }
            ModelSpec {
                name: kind.to_string(),
                params: p.clone(),
                dimension: 2,
                jumps: vec![vec![0, -1], vec![-1, 1]],
                rates: vec![
                    Polynomial::monomial(&[0, 1], 1.0),
                    Polynomial::monomial(&[1, 1], lambda),
                ],
                domain: Domain::weighted_simplex(&[1.0, 1.0]),
                x0: vec![s0, i0],
            }
        }
        Builtin::Chemical => {
            let lambda = positive("lambda")?;
            let mu = positive("mu")?;
            let (x0, y0, z0) = (get("x0"), get("y0"), get("z0"));
            if x0 < 0.0 || y0 < 0.0 || z0 < 0.0 || x0 + y0 + 2.0 * z0 > 1.0 {
                return Err(ModelError::BadParams(format!(
                    "(x0, y0, z0) = ({x0}, {y0}, {z0}) outside the domain"
                )));
            }
            ModelSpec {
                name: kind.to_string(),
                params: p.clone(),
                dimension: 3,
                jumps: vec![vec![-1, -1, 1], vec![1, 1, -1]],
                rates: vec![
                    Polynomial::monomial(&[1, 1, 0], lambda),
                    Polynomial::monomial(&[0, 0, 1], mu),
                ],
                domain: Domain::weighted_simplex(&[1.0, 1.0, 2.0]),
                x0: vec![x0, y0, z0],
            }
        }
        Builtin::Yule => {
            let lambda = positive("lambda")?;
            let x0 = get("x0");
            if x0 < 0.0 {
                return Err(ModelError::BadParams(format!("x0 = {x0} must be nonnegative")));
            }
            ModelSpec {
                name: kind.to_string(),
                params: p.clone(),
                dimension: 1,
                jumps: vec![vec![1]],
                rates: vec![Polynomial::monomial(&[1], lambda)],
                domain: Domain::interval(0.0, f64::INFINITY),
                x0: vec![x0],
            }
        }
    };
    Ok(spec)
}
