//! Non-GP baselines: a factorized Tree-structured Parzen Estimator and
//! uniform random search.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::acquisition::{normal_cdf, normal_pdf};
use crate::error::{Error, Result};
use crate::search_space::{Dimension, SearchSpace, ValidConfig, Value};

/// Width of the Gaussian bump placed at each continuous observation. Both
/// rules start from the distance to the farther adjacent observation, with
/// the box bounds standing in for missing neighbors, and cap it at the box
/// width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Floor at a fixed fraction of the box width.
    AdjacentClipped { min_fraction: f64 },
    /// Floor at `width / min(100, n + 1)` for `n` observations, so bumps
    /// narrow only as evidence accumulates.
    AdjacentShrinking,
}

impl BandwidthRule {
    fn floor(&self, width: f64, n: usize) -> f64 {
        match *self {
            BandwidthRule::AdjacentClipped { min_fraction } => min_fraction * width,
            BandwidthRule::AdjacentShrinking => width / (n + 1).min(100) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeConfig {
    /// Fraction of observations that build the "good" density.
    pub gamma: f64,
    pub n_candidates: usize,
    pub bandwidth_rule: BandwidthRule,
    /// Weight of the uniform prior component in every density.
    pub prior_weight: f64,
    /// Observations below which suggestions are uniform random draws.
    pub n_startup: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            gamma: 0.25,
            n_candidates: 24,
            bandwidth_rule: BandwidthRule::AdjacentShrinking,
            prior_weight: 1.0,
            n_startup: 20,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma {} not in (0, 1)", self.gamma)));
        }
        if self.n_candidates == 0 {
            return Err(Error::InvalidParameter("n_candidates must be >= 1".into()));
        }
        if !(self.prior_weight >= 0.0 && self.prior_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior weight {} must be >= 0",
                self.prior_weight
            )));
        }
        if let BandwidthRule::AdjacentClipped { min_fraction } = self.bandwidth_rule {
            if !(min_fraction > 0.0 && min_fraction <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "bandwidth floor {min_fraction} not in (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

type Observations = Vec<(ValidConfig, f64)>;

/// Splits observations at the `gamma` quantile: the lower part holds every
/// observation with `y <= y*`, where `y*` is the `ceil(gamma * n)`-th
/// smallest value.
pub fn split_observations(
    data: &[(ValidConfig, f64)],
    gamma: f64,
) -> Result<(Observations, Observations)> {
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: data.len(),
        });
    }
    let mut ys: Vec<f64> = data.iter().map(|(_, y)| *y).collect();
    ys.sort_by(f64::total_cmp);
    let k = ((gamma * data.len() as f64).ceil() as usize).clamp(1, data.len());
    let threshold = ys[k - 1];
    Ok(data.iter().cloned().partition(|(_, y)| *y <= threshold))
}

/// Per-dimension density of one group of observations.
#[derive(Debug, Clone, PartialEq)]
pub enum DimDensity {
    /// Truncated Gaussian bumps plus a uniform component over `[lower, upper]`.
    Continuous {
        lower: f64,
        upper: f64,
        centers: Vec<f64>,
        bandwidths: Vec<f64>,
        /// One weight per bump, then the uniform weight; sums to 1.
        weights: Vec<f64>,
    },
    /// Smoothed frequencies over integer values or labels, in declared order.
    Discrete { probs: Vec<f64> },
}

impl DimDensity {
    fn continuous(lower: f64, upper: f64, obs: &[f64], prior_weight: f64, rule: BandwidthRule) -> Self {
        let width = upper - lower;
        let floor = rule.floor(width, obs.len());
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| obs[a].total_cmp(&obs[b]));
        let mut bandwidths = vec![0.0; obs.len()];
        for (rank, &i) in order.iter().enumerate() {
            let left = if rank == 0 { lower } else { obs[order[rank - 1]] };
            let right = if rank + 1 == order.len() { upper } else { obs[order[rank + 1]] };
            let bw = (obs[i] - left).max(right - obs[i]);
            bandwidths[i] = bw.clamp(floor, width);
        }
        let total = obs.len() as f64 + prior_weight;
        let mut weights: Vec<f64>;
        if total > 0.0 {
            weights = vec![1.0 / total; obs.len()];
            weights.push(prior_weight / total);
        } else {
            weights = vec![1.0];
        }
        DimDensity::Continuous {
            lower,
            upper,
            centers: obs.to_vec(),
            bandwidths,
            weights,
        }
    }

    fn discrete(n_values: usize, counts: &[usize], prior_weight: f64) -> Self {
        let total = counts.iter().sum::<usize>() as f64 + prior_weight * n_values as f64;
        let probs = if total > 0.0 {
            counts.iter().map(|&c| (c as f64 + prior_weight) / total).collect()
        } else {
            vec![1.0 / n_values as f64; n_values]
        };
        DimDensity::Discrete { probs }
    }

    /// Density (continuous) or probability mass (discrete) at `x`, where
    /// discrete values are given by index.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            DimDensity::Continuous {
                lower,
                upper,
                centers,
                bandwidths,
                weights,
            } => {
                if x < *lower || x > *upper {
                    return 0.0;
                }
                let mut d = weights[centers.len()] / (upper - lower);
                for ((c, s), w) in centers.iter().zip(bandwidths).zip(weights) {
                    let mass = normal_cdf((upper - c) / s) - normal_cdf((lower - c) / s);
                    d += w * normal_pdf((x - c) / s) / (s * mass);
                }
                d
            }
            DimDensity::Discrete { probs } => {
                let i = x as usize;
                if x < 0.0 || i >= probs.len() {
                    0.0
                } else {
                    probs[i]
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DimDensity::Continuous {
                lower,
                upper,
                centers,
                bandwidths,
                weights,
            } => {
                let k = pick(weights, rng);
                if k == centers.len() {
                    return lower + (upper - lower) * rng.random::<f64>();
                }
                let std = Normal::new(0.0, 1.0).expect("standard normal");
                let (c, s) = (centers[k], bandwidths[k]);
                let a = normal_cdf((lower - c) / s);
                let b = normal_cdf((upper - c) / s);
                let u = a + (b - a) * rng.random::<f64>();
                (c + s * std.inverse_cdf(u)).clamp(*lower, *upper)
            }
            DimDensity::Discrete { probs } => pick(probs, rng) as f64,
        }
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Factorized density over a search space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenDensity {
    dims: Vec<DimDensity>,
}

/// Position of a value within its dimension: the number itself for real
/// dimensions, an index for integer values and labels.
fn coordinate(dim: &Dimension, v: &Value) -> Result<f64> {
    match (dim, v) {
        (Dimension::Real { .. }, Value::Real(x)) => Ok(*x),
        (Dimension::Real { .. }, Value::Integer(i)) => Ok(*i as f64),
        (Dimension::Integer { lower, upper }, Value::Integer(i)) if i >= lower && i <= upper => {
            Ok((i - lower) as f64)
        }
        (Dimension::Categorical { labels }, Value::Label(l)) => labels
            .iter()
            .position(|x| x == l)
            .map(|i| i as f64)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown label {l:?}"))),
        (d, v) => Err(Error::InvalidConfig(format!("value {v:?} does not fit dimension {d:?}"))),
    }
}

fn value_at(dim: &Dimension, x: f64) -> Value {
    match dim {
        Dimension::Real { .. } => Value::Real(x),
        Dimension::Integer { lower, .. } => Value::Integer(lower + x as i64),
        Dimension::Categorical { labels } => Value::Label(labels[x as usize].clone()),
    }
}

impl ParzenDensity {
    pub fn dims(&self) -> &[DimDensity] {
        &self.dims
    }

    pub fn log_density(&self, space: &SearchSpace, config: &ValidConfig) -> Result<f64> {
        if config.values().len() != space.dims().len() {
            return Err(Error::InvalidConfig("config length differs from space".into()));
        }
        let mut total = 0.0;
        for ((dim, v), dens) in space.dims().iter().zip(config.values()).zip(&self.dims) {
            total += dens.density(coordinate(dim, v)?).ln();
        }
        Ok(total)
    }

    pub fn sample<R: Rng + ?Sized>(&self, space: &SearchSpace, rng: &mut R) -> ValidConfig {
        ValidConfig(
            space
                .dims()
                .iter()
                .zip(&self.dims)
                .map(|(dim, dens)| value_at(dim, dens.sample(rng)))
                .collect(),
        )
    }
}

pub fn fit_parzen(observations: &[ValidConfig], space: &SearchSpace, config: &TpeConfig) -> Result<ParzenDensity> {
    config.validate()?;
    let mut dims = Vec::with_capacity(space.dims().len());
    for (j, dim) in space.dims().iter().enumerate() {
        let coords = observations
            .iter()
            .map(|c| {
                let v = c
                    .values()
                    .get(j)
                    .ok_or_else(|| Error::InvalidConfig("config shorter than space".into()))?;
                coordinate(dim, v)
            })
            .collect::<Result<Vec<f64>>>()?;
        let density = match dim {
            Dimension::Real { lower, upper } => DimDensity::continuous(*lower, *upper, &coords, config.prior_weight, config.bandwidth_rule),
            Dimension::Integer { lower, upper } => {
                let n = (upper - lower + 1) as usize;
                DimDensity::discrete(n, &counts(n, &coords), config.prior_weight)
            }
            Dimension::Categorical { labels } => {
                DimDensity::discrete(labels.len(), &counts(labels.len(), &coords), config.prior_weight)
            }
        };
        dims.push(density);
    }
    Ok(ParzenDensity { dims })
}

fn counts(n: usize, coords: &[f64]) -> Vec<usize> {
    let mut c = vec![0; n];
    for &x in coords {
        c[x as usize] += 1;
    }
    c
}

/// Index of the highest score, first one on ties.
pub fn select_candidate(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn tpe_suggest<R: Rng + ?Sized>(
    data: &[(ValidConfig, f64)],
    space: &SearchSpace,
    config: &TpeConfig,
    rng: &mut R,
) -> Result<ValidConfig> {
    config.validate()?;
    if data.len() < config.n_startup.max(2) {
        return Ok(random_suggest(space, rng));
    }
    let (lower, upper) = split_observations(data, config.gamma)?;
    let good: Vec<ValidConfig> = lower.into_iter().map(|(c, _)| c).collect();
    let bad: Vec<ValidConfig> = upper.into_iter().map(|(c, _)| c).collect();
    let l = fit_parzen(&good, space, config)?;
    let g = fit_parzen(&bad, space, config)?;
    let candidates: Vec<ValidConfig> = (0..config.n_candidates).map(|_| l.sample(space, rng)).collect();
    let scores = candidates
        .iter()
        .map(|c| Ok(l.log_density(space, c)? - g.log_density(space, c)?))
        .collect::<Result<Vec<f64>>>()?;
    let best = select_candidate(&scores).expect("at least one candidate");
    Ok(candidates.into_iter().nth(best).expect("index in range"))
}

pub fn random_suggest<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> ValidConfig {
    space.decode(&space.sample_uniform(rng))
}
