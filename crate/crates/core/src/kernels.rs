//! Stationary covariance functions with per-coordinate lengthscales.
//!
//! A [`KernelSpec`] built with [`KernelSpec::transformed`] evaluates the base
//! kernel on snapped inputs, `k'(a, b) = k(T(a), T(b))`, which makes any GP
//! using it exactly constant on each cell of the snapping map.

use std::borrow::Cow;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::SearchSpace;

/// Diagonal jitter added to every Gram matrix, relative to the amplitude.
pub const DEFAULT_JITTER: f64 = 1e-8;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    Matern32,
    SquaredExponential,
}

impl KernelFamily {
    /// Covariance at unit-lengthscale distance `r`, for unit amplitude.
    #[inline]
    pub fn correlation(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern32 => {
                let s = SQRT_3 * r;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::SquaredExponential => (-0.5 * r * r).exp(),
        }
    }

    #[inline]
    fn correlation_sq(self, r2: f64) -> f64 {
        match self {
            KernelFamily::Matern32 => self.correlation(r2.sqrt()),
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub amplitude: f64,
    pub family: KernelFamily,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, amplitude: f64, family: KernelFamily) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidParameter("no lengthscales".into()));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidParameter(format!("lengthscale {l} must be positive")));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude {amplitude} must be positive"
            )));
        }
        Ok(KernelParams {
            lengthscales,
            amplitude,
            family,
        })
    }

    pub fn isotropic(width: usize, lengthscale: f64, amplitude: f64, family: KernelFamily) -> Result<Self> {
        Self::new(vec![lengthscale; width], amplitude, family)
    }

    pub fn width(&self) -> usize {
        self.lengthscales.len()
    }
}

/// ARD distance `sqrt(sum_j ((a_j - b_j) / l_j)^2)`.
pub fn scaled_distance(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64> {
    check_len(params.width(), a.len())?;
    check_len(params.width(), b.len())?;
    Ok(scaled_sq_distance(a, b, &params.lengthscales).sqrt())
}

#[inline]
fn scaled_sq_distance(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((x, y), l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum()
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::Dimension { expected, found })
    } else {
        Ok(())
    }
}

/// Kernel parameters plus the choice between the plain kernel and the
/// input-transformed kernel.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    params: KernelParams,
    space: Option<Arc<SearchSpace>>,
}

impl KernelSpec {
    pub fn plain(params: KernelParams) -> Self {
        KernelSpec {
            params,
            space: None,
        }
    }

    pub fn transformed(params: KernelParams, space: Arc<SearchSpace>) -> Result<Self> {
        check_len(space.encoded_width(), params.width())?;
        Ok(KernelSpec {
            params,
            space: Some(space),
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn amplitude(&self) -> f64 {
        self.params.amplitude
    }

    pub fn width(&self) -> usize {
        self.params.width()
    }

    pub fn transforms_inputs(&self) -> bool {
        self.space.is_some()
    }

    pub fn space(&self) -> Option<&Arc<SearchSpace>> {
        self.space.as_ref()
    }

    /// Same input handling, different parameters.
    pub fn with_params(&self, params: KernelParams) -> Result<Self> {
        check_len(self.width(), params.width())?;
        Ok(KernelSpec {
            params,
            space: self.space.clone(),
        })
    }

    /// Maps an input to the coordinates the base kernel sees.
    pub fn prepare<'a>(&self, x: &'a [f64]) -> Cow<'a, [f64]> {
        match &self.space {
            Some(space) => Cow::Owned(space.transform(x).into_inner()),
            None => Cow::Borrowed(x),
        }
    }

    /// Base kernel on already-prepared inputs.
    #[inline]
    pub fn eval_prepared(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2 = scaled_sq_distance(a, b, &self.params.lengthscales);
        self.params.amplitude * self.params.family.correlation_sq(r2)
    }

    pub fn value(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_len(self.width(), a.len())?;
        check_len(self.width(), b.len())?;
        Ok(self.eval_prepared(&self.prepare(a), &self.prepare(b)))
    }
}

/// Gram matrix with `jitter` added to the diagonal.
pub fn gram_matrix<P: AsRef<[f64]>>(points: &[P], spec: &KernelSpec, jitter: f64) -> Result<DMatrix<f64>> {
    let prepared = points
        .iter()
        .map(|p| {
            check_len(spec.width(), p.as_ref().len())?;
            Ok(spec.prepare(p.as_ref()).into_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gram_prepared(&prepared, spec, jitter))
}

pub(crate) fn gram_prepared(prepared: &[Vec<f64>], spec: &KernelSpec, jitter: f64) -> DMatrix<f64> {
    let n = prepared.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.amplitude() + jitter;
        for j in 0..i {
            let v = spec.eval_prepared(&prepared[i], &prepared[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
