//! JSON market schema.
//!
//! ```json
//! {
//!   "n": 1,
//!   "nu": [0.07],
//!   "sigma": [0.15],
//!   "rho": [[1.0]],
//!   "r": 0.03,
//!   "lambda": 1.0,
//!   "atoms": [{"x": [1.0], "p": 0.5}, {"x": [-0.5], "p": 0.5}]
//! }
//! ```
//!
//! Exactly one of `nu` (geometric drift) or `mu` (arithmetic drift) must be
//! given. `rho` defaults to the identity. For single-stock markets vectors may
//! be written as plain numbers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DiffusionParams, JumpAtom, JumpModel, MarketSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Numbers {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Numbers {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Numbers::Scalar(v) => vec![v],
            Numbers::Vector(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDocument {
    x: Numbers,
    p: f64,
}

/// Serialized form of a [`MarketSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketDocument {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<Numbers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<Numbers>,
    sigma: Numbers,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<Vec<Vec<f64>>>,
    r: f64,
    lambda: f64,
    atoms: Vec<AtomDocument>,
}

impl MarketDocument {
    /// Document describing `spec`, with the drift written as `mu`.
    pub fn from_spec(spec: &MarketSpec) -> Self {
        let d = spec.diffusion();
        let n = spec.n();
        Self {
            n,
            nu: None,
            mu: Some(Numbers::Vector(d.mu().iter().copied().collect())),
            sigma: Numbers::Vector(d.sigma().iter().copied().collect()),
            rho: Some(
                (0..n)
                    .map(|i| d.rho().row(i).iter().copied().collect())
                    .collect(),
            ),
            r: d.r(),
            lambda: spec.jumps().lambda(),
            atoms: spec
                .jumps()
                .atoms()
                .iter()
                .map(|a| AtomDocument {
                    x: Numbers::Vector(a.x.iter().copied().collect()),
                    p: a.p,
                })
                .collect(),
        }
    }

    pub fn into_spec(self) -> std::result::Result<MarketSpec, String> {
        self.build().map_err(|e| e.message)
    }

    fn build(self) -> std::result::Result<MarketSpec, SchemaError> {
        let n = self.n;
        if n == 0 {
            return Err(SchemaError::at("n", "`n` must be at least 1"));
        }
        let sized = |name: &'static str, v: Vec<f64>| {
            if v.len() == n {
                Ok(DVector::from_vec(v))
            } else {
                Err(SchemaError::at(
                    name,
                    format!("`{name}` has {} entries, expected n = {n}", v.len()),
                ))
            }
        };
        let sigma = sized("sigma", self.sigma.into_vec())?;
        let rho = match self.rho {
            None => DMatrix::identity(n, n),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|row| row.len() != n) {
                    return Err(SchemaError::at(
                        "rho",
                        format!("`rho` must be an {n}x{n} matrix"),
                    ));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        let (key, diffusion) = match (self.nu, self.mu) {
            (Some(nu), None) => (
                "nu",
                DiffusionParams::from_geometric_drift(
                    sized("nu", nu.into_vec())?,
                    sigma,
                    rho,
                    self.r,
                ),
            ),
            (None, Some(mu)) => (
                "mu",
                DiffusionParams::new(sized("mu", mu.into_vec())?, sigma, rho, self.r),
            ),
            (Some(_), Some(_)) => {
                return Err(SchemaError::at(
                    "mu",
                    "give exactly one of `nu` or `mu`, not both",
                ))
            }
            (None, None) => {
                return Err(SchemaError::document(
                    "missing drift: give exactly one of `nu` or `mu`",
                ))
            }
        };
        let diffusion = diffusion.map_err(|e| SchemaError::at(key, e.to_string()))?;

        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (k, a) in self.atoms.into_iter().enumerate() {
            let x = a.x.into_vec();
            if x.len() != n {
                return Err(SchemaError::at(
                    "atoms",
                    format!("atom {k}: `x` has {} entries, expected n = {n}", x.len()),
                ));
            }
            atoms.push(JumpAtom::new(&x, a.p));
        }
        MarketSpec::new(diffusion, JumpModel::new(self.lambda, atoms))
            .map_err(|e| SchemaError::document(e.to_string()))
    }
}

struct SchemaError {
    key: Option<&'static str>,
    message: String,
}

impl SchemaError {
    fn at(key: &'static str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key),
            message: message.into(),
        }
    }

    fn document(message: impl Into<String>) -> Self {
        Self {
            key: None,
            message: message.into(),
        }
    }
}

/// 1-based line and column of byte offset `at`.
fn position(text: &str, at: usize) -> (usize, usize) {
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses a market document. Errors carry the line and column of the
/// offending key, or of the end of the document for whole-market problems.
pub fn parse_market(text: &str) -> Result<MarketSpec> {
    let doc: MarketDocument = serde_json::from_str(text).map_err(|e| {
        Error::MarketFile(format!(
            "line {}, column {}: {}",
            e.line(),
            e.column(),
            strip_position(&e.to_string())
        ))
    })?;
    doc.build().map_err(|e| {
        let at = e
            .key
            .and_then(|key| text.find(&format!("\"{key}\"")))
            .unwrap_or_else(|| text.trim_end().len().saturating_sub(1));
        let (line, column) = position(text, at);
        Error::MarketFile(format!("line {line}, column {column}: {}", e.message))
    })
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}
