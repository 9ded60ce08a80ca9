//! Slice sampling of GP hyperparameters.
//!
//! All parameters are positive and are updated one at a time in log space,
//! using stepping-out followed by shrinkage. The target is the GP log
//! evidence plus Gaussian priors on the log-parameters.

use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp_model::{log_marginal_likelihood, Dataset};
use crate::kernels::{KernelFamily, KernelParams, KernelSpec};
use crate::search_space::{Dimension, SearchSpace};

/// Shrinkage steps allowed before a slice update gives up.
pub const MAX_SHRINK_STEPS: usize = 1000;
const MAX_STEP_OUT: usize = 64;

/// Noise variance used when observations are treated as noiseless.
pub const NOISELESS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperSample {
    pub lengthscales: Vec<f64>,
    pub amplitude: f64,
    pub noise: f64,
}

impl HyperSample {
    pub fn kernel_params(&self, family: KernelFamily) -> Result<KernelParams> {
        KernelParams::new(self.lengthscales.clone(), self.amplitude, family)
    }

    pub fn is_valid(&self) -> bool {
        self.lengthscales.iter().all(|l| l.is_finite() && *l > 0.0)
            && self.amplitude.is_finite()
            && self.amplitude > 0.0
            && self.noise.is_finite()
            && self.noise >= 0.0
    }
}

/// Gaussian prior on the logarithm of a positive parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalPrior {
    pub log_mean: f64,
    pub log_std: f64,
}

impl LogNormalPrior {
    pub fn new(log_mean: f64, log_std: f64) -> Result<Self> {
        if !(log_std.is_finite() && log_std > 0.0 && log_mean.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "log-normal prior needs finite mean and positive std, got ({log_mean}, {log_std})"
            )));
        }
        Ok(LogNormalPrior { log_mean, log_std })
    }

    /// Log density of the log-parameter, up to a constant.
    fn log_density(&self, z: f64) -> f64 {
        let d = (z - self.log_mean) / self.log_std;
        -0.5 * d * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPrior {
    pub lengthscale: LogNormalPrior,
    pub amplitude: LogNormalPrior,
    pub noise: LogNormalPrior,
}

impl Default for HyperPrior {
    fn default() -> Self {
        HyperPrior {
            lengthscale: LogNormalPrior { log_mean: 0.0, log_std: 1.0 },
            amplitude: LogNormalPrior { log_mean: 0.0, log_std: 1.0 },
            noise: LogNormalPrior { log_mean: -4.0, log_std: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    Sampled,
    Fixed(f64),
}

/// One univariate slice update on an unbounded variable.
fn slice_step<R, F>(z0: f64, mut log_density: F, rng: &mut R, width: f64) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let f0 = log_density(z0);
    if !f0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "log density not finite at current state {z0}"
        )));
    }
    let level = f0 + (1.0 - rng.random::<f64>()).ln();

    let mut left = z0 - width * rng.random::<f64>();
    let mut right = left + width;
    for _ in 0..MAX_STEP_OUT {
        if log_density(left) <= level {
            break;
        }
        left -= width;
    }
    for _ in 0..MAX_STEP_OUT {
        if log_density(right) <= level {
            break;
        }
        right += width;
    }

    for _ in 0..MAX_SHRINK_STEPS {
        let z1 = left + (right - left) * rng.random::<f64>();
        if log_density(z1) > level {
            return Ok(z1);
        }
        if z1 < z0 {
            left = z1;
        } else {
            right = z1;
        }
    }
    Err(Error::SamplerStuck(MAX_SHRINK_STEPS))
}

/// One slice-sampling update of a positive parameter whose log density is
/// `log_density`; the walk happens in log space.
pub fn slice_sample_step<R, F>(current: f64, mut log_density: F, rng: &mut R, step_width: f64) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    if !(current > 0.0 && current.is_finite()) {
        return Err(Error::InvalidParameter(format!("{current} is not a positive value")));
    }
    if !(step_width > 0.0 && step_width.is_finite()) {
        return Err(Error::InvalidParameter(format!("step width {step_width} must be positive")));
    }
    // density of z = ln x picks up the Jacobian e^z
    let z = slice_step(current.ln(), |z| log_density(z.exp()) + z, rng, step_width)?;
    Ok(z.exp())
}

/// One lengthscale per group of encoded coordinates: a real or integer
/// dimension is its own group, a one-hot block shares a single lengthscale.
pub fn lengthscale_groups(space: &SearchSpace) -> Vec<Range<usize>> {
    space
        .dims()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let off = space.offset(i);
            off..off + d.encoded_width()
        })
        .collect()
}

/// Typical length of each group, used to scale the lengthscale prior.
pub fn lengthscale_scales(space: &SearchSpace) -> Vec<f64> {
    space
        .dims()
        .iter()
        .map(|d| match d {
            Dimension::Real { lower, upper } => upper - lower,
            Dimension::Integer { lower, upper } if upper > lower => (upper - lower) as f64,
            _ => 1.0,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub prior: HyperPrior,
    pub noise: NoiseMode,
    /// Coordinates sharing each sampled lengthscale.
    pub groups: Vec<Range<usize>>,
    /// Multiplies the lengthscale prior median of each group.
    pub scales: Vec<f64>,
    pub step_width: f64,
    pub thin: usize,
}

impl ChainConfig {
    /// Independent lengthscale per coordinate, unit scales.
    pub fn per_coordinate(width: usize, prior: HyperPrior, noise: NoiseMode) -> Self {
        ChainConfig {
            prior,
            noise,
            groups: (0..width).map(|j| j..j + 1).collect(),
            scales: vec![1.0; width],
            step_width: 1.0,
            thin: 1,
        }
    }

    pub fn for_space(space: &SearchSpace, prior: HyperPrior, noise: NoiseMode) -> Self {
        ChainConfig {
            prior,
            noise,
            groups: lengthscale_groups(space),
            scales: lengthscale_scales(space),
            step_width: 1.0,
            thin: 1,
        }
    }

    fn width(&self) -> usize {
        self.groups.iter().map(|g| g.end).max().unwrap_or(0)
    }
}

/// Persistent Markov chain over hyperparameters, so that successive calls
/// continue from the last state.
#[derive(Debug, Clone)]
pub struct HyperChain {
    config: ChainConfig,
    // log lengthscale per group, log amplitude, log noise
    state: Vec<f64>,
}

impl HyperChain {
    pub fn new(config: ChainConfig) -> Result<Self> {
        if config.groups.is_empty() || config.groups.len() != config.scales.len() {
            return Err(Error::InvalidParameter("lengthscale groups and scales must match".into()));
        }
        if let NoiseMode::Fixed(v) = config.noise {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("fixed noise {v} must be >= 0")));
            }
        }
        let mut chain = HyperChain { state: Vec::new(), config };
        chain.reset();
        Ok(chain)
    }

    /// Moves the chain back to the prior medians.
    pub fn reset(&mut self) {
        let p = &self.config.prior;
        let mut state: Vec<f64> = self
            .config
            .scales
            .iter()
            .map(|s| p.lengthscale.log_mean + s.ln())
            .collect();
        state.push(p.amplitude.log_mean);
        state.push(p.noise.log_mean);
        self.state = state;
    }

    pub fn current(&self) -> HyperSample {
        self.decode(&self.state)
    }

    fn decode(&self, state: &[f64]) -> HyperSample {
        let mut lengthscales = vec![0.0; self.config.width()];
        for (g, z) in self.config.groups.iter().zip(state) {
            for l in &mut lengthscales[g.clone()] {
                *l = z.exp();
            }
        }
        let n = self.config.groups.len();
        HyperSample {
            lengthscales,
            amplitude: state[n].exp(),
            noise: match self.config.noise {
                NoiseMode::Sampled => state[n + 1].exp(),
                NoiseMode::Fixed(v) => v,
            },
        }
    }

    fn log_target(&self, state: &[f64], data: &Dataset, template: &KernelSpec) -> f64 {
        let cfg = &self.config;
        let n = cfg.groups.len();
        let mut lp = 0.0;
        for (z, s) in state[..n].iter().zip(&cfg.scales) {
            lp += cfg.prior.lengthscale.log_density(z - s.ln());
        }
        lp += cfg.prior.amplitude.log_density(state[n]);
        if cfg.noise == NoiseMode::Sampled {
            lp += cfg.prior.noise.log_density(state[n + 1]);
        }
        let h = self.decode(state);
        let Ok(params) = h.kernel_params(template.params().family) else {
            return f64::NEG_INFINITY;
        };
        let Ok(kernel) = template.with_params(params) else {
            return f64::NEG_INFINITY;
        };
        match log_marginal_likelihood(data, &kernel, h.noise) {
            Ok(lml) if lml.is_finite() => lp + lml,
            _ => f64::NEG_INFINITY,
        }
    }

    fn sweep<R: Rng + ?Sized>(&mut self, data: &Dataset, template: &KernelSpec, rng: &mut R) -> Result<()> {
        let n_params = match self.config.noise {
            NoiseMode::Sampled => self.config.groups.len() + 2,
            NoiseMode::Fixed(_) => self.config.groups.len() + 1,
        };
        for i in 0..n_params {
            let mut trial = self.state.clone();
            let z = slice_step(
                self.state[i],
                |z| {
                    trial[i] = z;
                    self.log_target(&trial, data, template)
                },
                rng,
                self.config.step_width,
            )?;
            self.state[i] = z;
        }
        Ok(())
    }

    /// Runs `burn_in` sweeps, then records `n_samples` states spaced `thin`
    /// sweeps apart.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        data: &Dataset,
        template: &KernelSpec,
        n_samples: usize,
        burn_in: usize,
        rng: &mut R,
    ) -> Result<Vec<HyperSample>> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
        }
        if template.width() != self.config.width() {
            return Err(Error::Dimension {
                expected: self.config.width(),
                found: template.width(),
            });
        }
        if !self.log_target(&self.state, data, template).is_finite() {
            self.reset();
            if !self.log_target(&self.state, data, template).is_finite() {
                return Err(Error::InvalidParameter(
                    "hyperparameter target is not finite at the prior median".into(),
                ));
            }
        }
        for _ in 0..burn_in {
            self.sweep(data, template, rng)?;
        }
        let mut out = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            for _ in 0..self.config.thin.max(1) {
                self.sweep(data, template, rng)?;
            }
            out.push(self.current());
        }
        Ok(out)
    }
}

/// Samples hyperparameters with one lengthscale per coordinate and sampled
/// noise, starting from the prior medians.
pub fn sample_hypers<R: Rng + ?Sized>(
    data: &Dataset,
    template: &KernelSpec,
    prior: HyperPrior,
    n_samples: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Vec<HyperSample>> {
    let cfg = ChainConfig::per_coordinate(template.width(), prior, NoiseMode::Sampled);
    HyperChain::new(cfg)?.run(data, template, n_samples, burn_in, rng)
}
