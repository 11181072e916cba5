//! Distance metrics, selectable per pipeline layer.
//!
//! Config spelling: `EU`, `CB`, `COS`, `JA`, `MINK(p)` (case-insensitive).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{IflError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    Euclidean,
    CityBlock,
    /// 1 - cos(x, y). A zero vector on either side yields 1 (the angle is
    /// undefined, so "no similarity" by convention).
    Cosine,
    /// Fraction of coordinates that differ, counted over the coordinates
    /// where either vector is nonzero. 0/0 yields 0.
    Jaccard,
    /// Minkowski distance of order `p > 0`.
    Minkowski(f64),
}

impl MetricKind {
    /// Checked constructor for the Minkowski family.
    pub fn minkowski(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 {
            return Err(IflError::invalid_parameter(format!(
                "minkowski order must be positive and finite, got {p}"
            )));
        }
        Ok(MetricKind::Minkowski(p))
    }

    /// Distance between two equal-length vectors.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(IflError::invalid_parameter(format!(
                "distance between vectors of unequal length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if let MetricKind::Minkowski(p) = *self {
            if !p.is_finite() || p <= 0.0 {
                return Err(IflError::invalid_parameter(format!(
                    "minkowski order must be positive and finite, got {p}"
                )));
            }
        }
        Ok(self.distance_unchecked(x, y))
    }

    /// Same as [`MetricKind::distance`] without the length check, for hot
    /// loops where the caller guarantees shapes.
    #[inline]
    pub fn distance_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            MetricKind::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            MetricKind::CityBlock => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            MetricKind::Cosine => cosine(x, y),
            MetricKind::Jaccard => jaccard(x, y),
            MetricKind::Minkowski(p) => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p),
        }
    }
}

fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 || ny == 0.0 {
        return 1.0;
    }
    // Clamp: rounding can push the similarity a hair past 1.
    (1.0 - dot / (nx.sqrt() * ny.sqrt())).max(0.0)
}

fn jaccard(x: &[f64], y: &[f64]) -> f64 {
    let mut differing = 0usize;
    let mut support = 0usize;
    for (a, b) in x.iter().zip(y) {
        if *a != 0.0 || *b != 0.0 {
            support += 1;
            if a != b {
                differing += 1;
            }
        }
    }
    if support == 0 {
        0.0
    } else {
        differing as f64 / support as f64
    }
}

/// Absolute difference; the 1-D companion of the vector metrics.
#[inline]
pub fn scalar_distance(a: f64, b: f64) -> f64 {
    (a - b).abs()
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Euclidean => write!(f, "EU"),
            MetricKind::CityBlock => write!(f, "CB"),
            MetricKind::Cosine => write!(f, "COS"),
            MetricKind::Jaccard => write!(f, "JA"),
            MetricKind::Minkowski(p) => write!(f, "MINK({p})"),
        }
    }
}

impl FromStr for MetricKind {
    type Err = IflError;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        let upper = trimmed.to_ascii_uppercase();
        match upper.as_str() {
            "EU" => Ok(MetricKind::Euclidean),
            "CB" => Ok(MetricKind::CityBlock),
            "COS" => Ok(MetricKind::Cosine),
            "JA" => Ok(MetricKind::Jaccard),
            _ => {
                if let Some(rest) = upper.strip_prefix("MINK(") {
                    if let Some(inner) = rest.strip_suffix(')') {
                        let p: f64 = inner.trim().parse().map_err(|_| {
                            IflError::invalid_parameter(format!(
                                "unreadable minkowski order in metric string {trimmed:?}"
                            ))
                        })?;
                        return MetricKind::minkowski(p);
                    }
                }
                Err(IflError::invalid_parameter(format!(
                    "unknown metric {trimmed:?}; expected EU, CB, COS, JA, or MINK(p)"
                )))
            }
        }
    }
}

impl Serialize for MetricKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MetricKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
