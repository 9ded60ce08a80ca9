//! Exact GP regression with a zero prior mean.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernels::{gram_prepared, KernelSpec, DEFAULT_JITTER};
use crate::search_space::RelaxedPoint;

/// Jitter escalates by 10x from `DEFAULT_JITTER` up to this multiple of the
/// amplitude.
pub const MAX_JITTER: f64 = 1e-4;

/// Observations in the encoded space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    inputs: Vec<RelaxedPoint>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<RelaxedPoint>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Dimension {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        if let Some(y) = targets.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidObservation(*y));
        }
        if let Some(first) = inputs.first() {
            if let Some(bad) = inputs.iter().find(|p| p.len() != first.len()) {
                return Err(Error::Dimension {
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn push(&mut self, x: RelaxedPoint, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::InvalidObservation(y));
        }
        if let Some(first) = self.inputs.first() {
            if first.len() != x.len() {
                return Err(Error::Dimension {
                    expected: first.len(),
                    found: x.len(),
                });
            }
        }
        self.inputs.push(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn inputs(&self) -> &[RelaxedPoint] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Smallest observed target, if any.
    pub fn incumbent(&self) -> Option<f64> {
        self.targets.iter().copied().reduce(f64::min)
    }

    /// Index of the smallest target (first one on ties).
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, y) in self.targets.iter().enumerate() {
            if best.is_none_or(|b| *y < self.targets[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Same inputs with targets mapped through `f`.
    pub fn map_targets(&self, f: impl Fn(f64) -> f64) -> Dataset {
        Dataset {
            inputs: self.inputs.clone(),
            targets: self.targets.iter().map(|&y| f(y)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Factorized posterior, reusable for any number of predictions.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kernel: KernelSpec,
    noise: f64,
    jitter: f64,
    prepared: Vec<Vec<f64>>,
    targets: Vec<f64>,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
}

struct Factor {
    l: DMatrix<f64>,
    jitter: f64,
}

/// Cholesky of `K + noise*I` with escalating diagonal jitter.
fn factorize(prepared: &[Vec<f64>], kernel: &KernelSpec, noise: f64) -> Result<Factor> {
    let amp = kernel.amplitude();
    let base = gram_prepared(prepared, kernel, noise);
    let mut jitter = DEFAULT_JITTER * amp;
    loop {
        let mut k = base.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        match Cholesky::new(k.clone()) {
            Some(c) => {
                return Ok(Factor {
                    l: c.unpack(),
                    jitter,
                })
            }
            None if jitter < MAX_JITTER * amp * (1.0 - 1e-9) => jitter *= 10.0,
            None => {
                let eig = SymmetricEigen::new(k).eigenvalues;
                let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
                let condition = if min > 0.0 { max / min } else { f64::INFINITY };
                return Err(Error::SingularModel { condition });
            }
        }
    }
}

fn check_noise(noise: f64) -> Result<()> {
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance {noise} must be >= 0")));
    }
    Ok(())
}

fn prepare_inputs(data: &Dataset, kernel: &KernelSpec) -> Result<Vec<Vec<f64>>> {
    data.inputs()
        .iter()
        .map(|x| {
            if x.len() != kernel.width() {
                return Err(Error::Dimension {
                    expected: kernel.width(),
                    found: x.len(),
                });
            }
            Ok(kernel.prepare(x).into_owned())
        })
        .collect()
}

/// Solves `L v = b` in place for lower-triangular `L`.
fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    for i in 0..b.len() {
        let mut s = b[i];
        for (j, bj) in b.iter().enumerate().take(i) {
            s -= l[(i, j)] * bj;
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L^T x = b` in place.
fn backward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for (j, bj) in b.iter().enumerate().skip(i + 1) {
            s -= l[(j, i)] * bj;
        }
        b[i] = s / l[(i, i)];
    }
}

impl GpPosterior {
    pub fn fit(data: &Dataset, kernel: KernelSpec, noise: f64) -> Result<Self> {
        check_noise(noise)?;
        let prepared = prepare_inputs(data, &kernel)?;
        let Factor { l, jitter } = factorize(&prepared, &kernel, noise)?;
        let mut alpha = data.targets().to_vec();
        forward_substitute(&l, &mut alpha);
        backward_substitute(&l, &mut alpha);
        Ok(GpPosterior {
            kernel,
            noise,
            jitter,
            prepared,
            targets: data.targets().to_vec(),
            chol_l: l,
            alpha: DVector::from_vec(alpha),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Diagonal jitter that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_observations(&self) -> usize {
        self.prepared.len()
    }

    /// Lower Cholesky factor of `K + (noise + jitter) I`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Mean and variance with the variance left unclamped.
    pub fn predict_unclamped(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.kernel.width() {
            return Err(Error::Dimension {
                expected: self.kernel.width(),
                found: x.len(),
            });
        }
        let x = self.kernel.prepare(x);
        let mut kstar: Vec<f64> = self
            .prepared
            .iter()
            .map(|xi| self.kernel.eval_prepared(&x, xi))
            .collect();
        let mean = kstar.iter().zip(self.alpha.iter()).map(|(k, a)| k * a).sum();
        forward_substitute(&self.chol_l, &mut kstar);
        let explained: f64 = kstar.iter().map(|v| v * v).sum();
        Ok(Prediction {
            mean,
            variance: self.kernel.amplitude() - explained,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let mut p = self.predict_unclamped(x)?;
        p.variance = p.variance.max(0.0);
        Ok(p)
    }

    /// Log evidence of the data this posterior was fitted on.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.prepared.len() as f64;
        let fit: f64 = self.targets.iter().zip(self.alpha.iter()).map(|(y, a)| y * a).sum();
        let logdet: f64 = (0..self.chol_l.nrows()).map(|i| self.chol_l[(i, i)].ln()).sum();
        -0.5 * fit - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// `-1/2 y^T (K + noise I)^-1 y - 1/2 log|K + noise I| - N/2 log 2pi`.
pub fn log_marginal_likelihood(data: &Dataset, kernel: &KernelSpec, noise: f64) -> Result<f64> {
    check_noise(noise)?;
    let prepared = prepare_inputs(data, kernel)?;
    let Factor { l, .. } = factorize(&prepared, kernel, noise)?;
    let mut v = data.targets().to_vec();
    forward_substitute(&l, &mut v);
    let fit: f64 = v.iter().map(|x| x * x).sum();
    let logdet: f64 = (0..l.nrows()).map(|i| l[(i, i)].ln()).sum();
    let n = data.len() as f64;
    Ok(-0.5 * fit - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelFamily, KernelParams};
    use crate::search_space::{Dimension, SearchSpace};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn plain(width: usize, ls: f64, amp: f64) -> KernelSpec {
        KernelSpec::plain(KernelParams::isotropic(width, ls, amp, KernelFamily::Matern32).unwrap())
    }

    fn pt(v: &[f64]) -> RelaxedPoint {
        RelaxedPoint::new(v.to_vec())
    }

    #[test]
    fn prior_only() {
        let post = GpPosterior::fit(&Dataset::default(), plain(2, 1.0, 1.7), 0.0).unwrap();
        let p = post.predict(&[0.3, 0.4]).unwrap();
        assert_eq!(p.mean, 0.0);
        assert_eq!(p.variance, 1.7);
    }

    #[test]
    fn noiseless_interpolation() {
        let data = Dataset::new(vec![pt(&[0.25])], vec![1.5]).unwrap();
        let post = GpPosterior::fit(&data, plain(1, 0.5, 1.0), 0.0).unwrap();
        let p = post.predict(&[0.25]).unwrap();
        assert_relative_eq!(p.mean, 1.5, epsilon = 1e-6);
        assert!(p.variance < 1e-6);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![pt(&[0.0])], vec![]).is_err());
        assert!(matches!(
            Dataset::new(vec![pt(&[0.0])], vec![f64::NAN]),
            Err(Error::InvalidObservation(_))
        ));
        let mut d = Dataset::default();
        d.push(pt(&[0.0, 1.0]), 1.0).unwrap();
        assert!(d.push(pt(&[0.0]), 1.0).is_err());
        assert!(d.push(pt(&[0.0, 2.0]), f64::INFINITY).is_err());
        d.push(pt(&[0.5, 2.0]), -1.0).unwrap();
        assert_eq!(d.incumbent(), Some(-1.0));
        assert_eq!(d.argmin(), Some(1));
    }

    #[test]
    fn predict_checks_width() {
        let post = GpPosterior::fit(&Dataset::default(), plain(2, 1.0, 1.0), 0.0).unwrap();
        assert!(matches!(post.predict(&[0.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn single_point_evidence() {
        let data = Dataset::new(vec![pt(&[0.0])], vec![0.0]).unwrap();
        let lml = log_marginal_likelihood(&data, &plain(1, 1.0, 1.0), 0.0).unwrap();
        assert_relative_eq!(lml, -0.91894, epsilon = 1e-5);
    }

    #[test]
    fn evidence_matches_posterior_method() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<RelaxedPoint> = (0..6).map(|_| pt(&[rng.random(), rng.random()])).collect();
        let ys: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        let data = Dataset::new(xs, ys).unwrap();
        let k = plain(2, 0.4, 1.2);
        let a = log_marginal_likelihood(&data, &k, 0.01).unwrap();
        let b = GpPosterior::fit(&data, k, 0.01).unwrap().log_marginal_likelihood();
        assert_relative_eq!(a, b, epsilon = 1e-10);
    }

    #[test]
    fn evidence_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<RelaxedPoint> = (0..7).map(|_| pt(&[rng.random(), 3.0 * rng.random::<f64>()])).collect();
        let ys: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        let k = plain(2, 0.6, 0.9);
        let base = log_marginal_likelihood(&Dataset::new(xs.clone(), ys.clone()).unwrap(), &k, 0.05).unwrap();
        let perm = [3usize, 0, 6, 2, 5, 1, 4];
        let px = perm.iter().map(|&i| xs[i].clone()).collect();
        let py = perm.iter().map(|&i| ys[i]).collect();
        let permuted = log_marginal_likelihood(&Dataset::new(px, py).unwrap(), &k, 0.05).unwrap();
        assert!((base - permuted).abs() < 1e-10);
    }

    #[test]
    fn duplicate_inputs_factorize_with_jitter() {
        let data = Dataset::new(vec![pt(&[1.0]), pt(&[1.0]), pt(&[1.0])], vec![0.5, 0.5, 0.5]).unwrap();
        let post = GpPosterior::fit(&data, plain(1, 1.0, 1.0), 0.0).unwrap();
        assert!(post.jitter() >= DEFAULT_JITTER);
        let p = post.predict(&[1.0]).unwrap();
        assert_relative_eq!(p.mean, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn conflicting_duplicates_need_no_singular_error_with_jitter() {
        // jitter makes conflicting duplicates solvable, just badly conditioned
        let data = Dataset::new(vec![pt(&[1.0]), pt(&[1.0])], vec![0.0, 1.0]).unwrap();
        let post = GpPosterior::fit(&data, plain(1, 1.0, 1.0), 0.0).unwrap();
        let p = post.predict(&[1.0]).unwrap();
        assert_relative_eq!(p.mean, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn transformed_predictions_constant_on_cells() {
        let space = Arc::new(SearchSpace::new(vec![Dimension::real(0.0, 1.0), Dimension::integer(0, 4)]).unwrap());
        let k = KernelSpec::transformed(
            KernelParams::isotropic(2, 0.8, 1.0, KernelFamily::Matern32).unwrap(),
            space,
        )
        .unwrap();
        let data = Dataset::new(vec![pt(&[0.2, 1.3]), pt(&[0.7, 3.0])], vec![0.4, -0.2]).unwrap();
        let post = GpPosterior::fit(&data, k, 1e-4).unwrap();
        let a = post.predict(&[0.5, 2.1]).unwrap();
        let b = post.predict(&[0.5, 1.6]).unwrap();
        assert_eq!(a, b);
    }
}
