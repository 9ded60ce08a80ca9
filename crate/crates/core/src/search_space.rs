//! Mixed search spaces and their continuous relaxation.
//!
//! Real and integer dimensions occupy one encoded coordinate each; a
//! categorical dimension with `m` labels occupies a one-hot block of `m`
//! coordinates. [`SearchSpace::transform`] snaps any relaxed point onto the
//! nearest valid configuration: integers are rounded (half up) and every
//! one-hot block is replaced by the indicator of its largest coordinate
//! (lowest index on ties).

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One input variable of the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dimension {
    Real { lower: f64, upper: f64 },
    Integer { lower: i64, upper: i64 },
    Categorical { labels: Vec<String> },
}

impl Dimension {
    pub fn real(lower: f64, upper: f64) -> Self {
        Dimension::Real { lower, upper }
    }

    pub fn integer(lower: i64, upper: i64) -> Self {
        Dimension::Integer { lower, upper }
    }

    pub fn categorical<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Dimension::Categorical {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    /// Number of encoded coordinates this dimension occupies.
    pub fn encoded_width(&self) -> usize {
        match self {
            Dimension::Categorical { labels } => labels.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Dimension::Real { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(Error::InvalidSpace(format!(
                        "real dimension needs finite lower < upper, got [{lower}, {upper}]"
                    )));
                }
            }
            Dimension::Integer { lower, upper } => {
                if lower > upper {
                    return Err(Error::InvalidSpace(format!(
                        "integer dimension needs lower <= upper, got [{lower}, {upper}]"
                    )));
                }
            }
            Dimension::Categorical { labels } => {
                if labels.len() < 2 {
                    return Err(Error::InvalidSpace(
                        "categorical dimension needs at least 2 labels".into(),
                    ));
                }
                for (i, l) in labels.iter().enumerate() {
                    if labels[..i].contains(l) {
                        return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A value assigned to one dimension of a configuration.
///
/// Serialized untagged, so a configuration is a plain JSON array such as
/// `[0.25, 3, "relu"]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Integer(i64),
    Real(f64),
    Label(String),
}

/// A point at which the objective can actually be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidConfig(pub Vec<Value>);

impl ValidConfig {
    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configs always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A point of the continuous relaxation, one coordinate per encoded column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelaxedPoint(Vec<f64>);

impl RelaxedPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        RelaxedPoint(coords)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RelaxedPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for RelaxedPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RelaxedPoint {
    fn from(v: Vec<f64>) -> Self {
        RelaxedPoint(v)
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    dims: Vec<Dimension>,
}

/// Ordered list of dimensions plus the layout of their encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SearchSpace {
    dims: Vec<Dimension>,
    offsets: Vec<usize>,
    width: usize,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        SearchSpace::new(raw.dims)
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(s: SearchSpace) -> Self {
        RawSpace { dims: s.dims }
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("at least one dimension required".into()));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut width = 0;
        for d in &dims {
            d.validate()?;
            offsets.push(width);
            width += d.encoded_width();
        }
        Ok(SearchSpace {
            dims,
            offsets,
            width,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn encoded_width(&self) -> usize {
        self.width
    }

    /// First encoded coordinate of dimension `i`.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Box bounds of every encoded coordinate.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.width);
        for d in &self.dims {
            match d {
                Dimension::Real { lower, upper } => out.push((*lower, *upper)),
                Dimension::Integer { lower, upper } => out.push((*lower as f64, *upper as f64)),
                Dimension::Categorical { labels } => {
                    out.extend(std::iter::repeat_n((0.0, 1.0), labels.len()))
                }
            }
        }
        out
    }

    /// True when every coordinate is finite and inside its box.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.width
            && p
                .iter()
                .zip(self.bounds())
                .all(|(&x, (lo, hi))| x.is_finite() && x >= lo && x <= hi)
    }

    /// True when the space has no real dimension, so it has finitely many
    /// configurations.
    pub fn is_finite(&self) -> bool {
        !self.dims.iter().any(|d| matches!(d, Dimension::Real { .. }))
    }

    pub fn check_width(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.width {
            return Err(Error::Dimension {
                expected: self.width,
                found: p.len(),
            });
        }
        Ok(())
    }

    pub fn encode(&self, config: &ValidConfig) -> Result<RelaxedPoint> {
        let values = config.values();
        if values.len() != self.dims.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} values, got {}",
                self.dims.len(),
                values.len()
            )));
        }
        let mut out = vec![0.0; self.width];
        for ((d, v), &off) in self.dims.iter().zip(values).zip(&self.offsets) {
            match (d, v) {
                (Dimension::Real { lower, upper }, Value::Real(x)) => {
                    if !(x >= lower && x <= upper) {
                        return Err(Error::InvalidConfig(format!(
                            "{x} outside [{lower}, {upper}]"
                        )));
                    }
                    out[off] = *x;
                }
                (Dimension::Real { lower, upper }, Value::Integer(i)) => {
                    let x = *i as f64;
                    if !(x >= *lower && x <= *upper) {
                        return Err(Error::InvalidConfig(format!(
                            "{x} outside [{lower}, {upper}]"
                        )));
                    }
                    out[off] = x;
                }
                (Dimension::Integer { lower, upper }, Value::Integer(i)) => {
                    if i < lower || i > upper {
                        return Err(Error::InvalidConfig(format!(
                            "{i} outside [{lower}, {upper}]"
                        )));
                    }
                    out[off] = *i as f64;
                }
                (Dimension::Categorical { labels }, Value::Label(l)) => {
                    let idx = labels.iter().position(|x| x == l).ok_or_else(|| {
                        Error::InvalidConfig(format!("unknown label {l:?}"))
                    })?;
                    out[off + idx] = 1.0;
                }
                (d, v) => {
                    return Err(Error::InvalidConfig(format!(
                        "value {v:?} does not fit dimension {d:?}"
                    )))
                }
            }
        }
        Ok(RelaxedPoint(out))
    }

    /// Snaps a relaxed point onto the encoding of the nearest valid
    /// configuration.
    ///
    /// # Panics
    ///
    /// Panics if `p` does not have the encoded width.
    pub fn transform(&self, p: &[f64]) -> RelaxedPoint {
        let mut out = p.to_vec();
        self.transform_in_place(&mut out);
        RelaxedPoint(out)
    }

    /// In-place variant of [`transform`](Self::transform).
    pub fn transform_in_place(&self, p: &mut [f64]) {
        assert_eq!(p.len(), self.width, "relaxed point has wrong width");
        for (d, &off) in self.dims.iter().zip(&self.offsets) {
            match d {
                Dimension::Real { .. } => {}
                Dimension::Integer { lower, upper } => {
                    p[off] = round_half_up(p[off]).clamp(*lower as f64, *upper as f64);
                }
                Dimension::Categorical { labels } => {
                    let block = &mut p[off..off + labels.len()];
                    let hot = argmax_first(block);
                    for (i, x) in block.iter_mut().enumerate() {
                        *x = if i == hot { 1.0 } else { 0.0 };
                    }
                }
            }
        }
    }

    pub fn is_fixed_point(&self, p: &[f64]) -> bool {
        p.len() == self.width && *self.transform(p) == *p
    }

    /// Decodes the snapped version of `p` into a configuration.
    ///
    /// # Panics
    ///
    /// Panics if `p` does not have the encoded width.
    pub fn decode(&self, p: &[f64]) -> ValidConfig {
        assert_eq!(p.len(), self.width, "relaxed point has wrong width");
        let values = self
            .dims
            .iter()
            .zip(&self.offsets)
            .map(|(d, &off)| match d {
                Dimension::Real { lower, upper } => Value::Real(p[off].clamp(*lower, *upper)),
                Dimension::Integer { lower, upper } => {
                    Value::Integer((round_half_up(p[off]) as i64).clamp(*lower, *upper))
                }
                Dimension::Categorical { labels } => {
                    let hot = argmax_first(&p[off..off + labels.len()]);
                    Value::Label(labels[hot].clone())
                }
            })
            .collect();
        ValidConfig(values)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> RelaxedPoint {
        RelaxedPoint(
            self.bounds()
                .into_iter()
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
        )
    }

    pub fn sample_uniform_seeded(&self, seed: u64) -> RelaxedPoint {
        self.sample_uniform(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Nearest integer, with exact halves going up (2.5 -> 3, -2.5 -> -2).
pub fn round_half_up(x: f64) -> f64 {
    let f = x.floor();
    if x - f >= 0.5 {
        f + 1.0
    } else {
        f
    }
}

fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
