//! Normalized histogram feature vectors and their text encoding.
//!
//! ```text
//! kind=hinge dim=465
//! 1.23456789012e-3 0.00000000000e0 ...
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a histogram sum from 1.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Hinge,
    Fraglet,
    FragletCos,
    Adjoined,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Hinge => "hinge",
            FeatureKind::Fraglet => "fraglet",
            FeatureKind::FragletCos => "fraglet-cos",
            FeatureKind::Adjoined => "adjoined",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hinge" => FeatureKind::Hinge,
            "fraglet" => FeatureKind::Fraglet,
            "fraglet-cos" => FeatureKind::FragletCos,
            "adjoined" => FeatureKind::Adjoined,
            other => {
                return Err(Error::parse(
                    "feature kind",
                    format!("unknown kind `{other}`"),
                ))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    kind: FeatureKind,
    values: Vec<f64>,
}

impl FeatureVector {
    /// Wraps values that must already be a normalized histogram.
    pub fn new(kind: FeatureKind, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty feature vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "histogram entry {v} is not a non-negative number"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "histogram sums to {sum}, expected 1"
            )));
        }
        Ok(Self { kind, values })
    }

    /// Normalizes raw non-negative counts to unit sum.
    pub fn from_counts(kind: FeatureKind, counts: &[f64]) -> Result<Self> {
        let sum: f64 = counts.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InsufficientInk);
        }
        Self::new(kind, counts.iter().map(|c| c / sum).collect())
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("kind={} dim={}\n", self.kind, self.dim());
        let body: Vec<String> = self.values.iter().map(|v| format!("{v:.11e}")).collect();
        out.push_str(&body.join(" "));
        out.push('\n');
        out
    }

    /// Parses the text form. Values written with 12 significant digits are
    /// renormalized after reading.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("feature file", "missing header"))?;
        let mut kind = None;
        let mut dim = None;
        for tok in header.split_whitespace() {
            match tok.split_once('=') {
                Some(("kind", v)) => kind = Some(v.parse::<FeatureKind>()?),
                Some(("dim", v)) => {
                    dim = Some(
                        v.parse::<usize>()
                            .map_err(|e| Error::parse("feature file", e.to_string()))?,
                    )
                }
                _ => {
                    return Err(Error::parse(
                        "feature file",
                        format!("bad header token `{tok}`"),
                    ))
                }
            }
        }
        let (kind, dim) = match (kind, dim) {
            (Some(k), Some(d)) => (k, d),
            _ => return Err(Error::parse("feature file", "header needs kind= and dim=")),
        };
        let values = lines
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::parse("feature file", e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        Self::from_counts(kind, &values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized() {
        assert!(FeatureVector::new(FeatureKind::Hinge, vec![0.5, 0.6]).is_err());
        assert!(FeatureVector::new(FeatureKind::Hinge, vec![-0.5, 1.5]).is_err());
        assert!(FeatureVector::from_counts(FeatureKind::Hinge, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let v = FeatureVector::from_counts(FeatureKind::FragletCos, &[1.0, 2.0, 0.0, 7.0]).unwrap();
        let text = v.to_text();
        assert!(text.starts_with("kind=fraglet-cos dim=4\n"));
        let back = FeatureVector::from_text(&text).unwrap();
        assert_eq!(back.kind(), FeatureKind::FragletCos);
        for (a, b) in back.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dim_mismatch_detected() {
        assert!(matches!(
            FeatureVector::from_text("kind=hinge dim=3\n0.5 0.5\n"),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
