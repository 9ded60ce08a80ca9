//! Expected improvement averaged over hyperparameter samples, and a
//! derivative-free maximizer over the relaxed box.

use rand::Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp_model::GpPosterior;
use crate::search_space::{RelaxedPoint, SearchSpace};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Expected improvement below `incumbent` of a Normal(mean, std^2) outcome.
pub fn expected_improvement(mean: f64, std: f64, incumbent: f64) -> f64 {
    if !(std > 0.0) {
        return 0.0;
    }
    let gamma = (incumbent - mean) / std;
    (std * (gamma * normal_cdf(gamma) + normal_pdf(gamma))).max(0.0)
}

/// GP posteriors under different hyperparameter samples, all fitted on the
/// same data.
#[derive(Debug, Clone)]
pub struct AveragedPredictor {
    posteriors: Vec<GpPosterior>,
}

impl AveragedPredictor {
    pub fn new(posteriors: Vec<GpPosterior>) -> Result<Self> {
        if posteriors.is_empty() {
            return Err(Error::InvalidParameter("averaged predictor needs at least one posterior".into()));
        }
        Ok(AveragedPredictor { posteriors })
    }

    pub fn posteriors(&self) -> &[GpPosterior] {
        &self.posteriors
    }

    pub fn averaged_ei(&self, x: &[f64], incumbent: f64) -> Result<f64> {
        let mut total = 0.0;
        for post in &self.posteriors {
            let p = post.predict(x)?;
            total += expected_improvement(p.mean, p.std(), incumbent);
        }
        Ok(total / self.posteriors.len() as f64)
    }

    /// Posterior mean averaged over samples.
    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for post in &self.posteriors {
            total += post.predict(x)?.mean;
        }
        Ok(total / self.posteriors.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptBudget {
    pub n_random: usize,
    pub n_starts: usize,
    /// Final pattern-search step, as a fraction of each coordinate's range.
    pub tol: f64,
}

impl Default for OptBudget {
    fn default() -> Self {
        OptBudget {
            n_random: 1000,
            n_starts: 10,
            tol: 1e-4,
        }
    }
}

const INITIAL_STEP: f64 = 0.25;
const MAX_EVALS_PER_START: usize = 20_000;

/// Coordinate-wise pattern search from `start`, maximizing `f` inside `bounds`.
fn pattern_search<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: Vec<f64>,
    start_value: f64,
    bounds: &[(f64, f64)],
    tol: f64,
) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut best = start_value;
    let mut step = INITIAL_STEP;
    let mut evals = 0;
    let mut cand = x.clone();
    while step >= tol && evals < MAX_EVALS_PER_START {
        let mut improved = false;
        'coords: for (j, &(lo, hi)) in bounds.iter().enumerate() {
            let delta = step * (hi - lo);
            if delta <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let v = (x[j] + dir * delta).clamp(lo, hi);
                if v == x[j] {
                    continue;
                }
                cand.copy_from_slice(&x);
                cand[j] = v;
                let fv = f(&cand);
                evals += 1;
                if fv > best {
                    best = fv;
                    x.copy_from_slice(&cand);
                    improved = true;
                    break 'coords;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best)
}

/// Random sampling of the box followed by pattern search from the best
/// samples. Ties keep the earliest candidate.
pub fn maximize<F, R>(mut f: F, space: &SearchSpace, budget: OptBudget, rng: &mut R) -> (RelaxedPoint, f64)
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let bounds = space.bounds();
    let n_random = budget.n_random.max(1);
    let mut samples: Vec<(Vec<f64>, f64)> = (0..n_random)
        .map(|_| {
            let p = space.sample_uniform(rng).into_inner();
            let v = f(&p);
            (p, v)
        })
        .collect();

    let mut best = 0;
    for i in 1..samples.len() {
        if samples[i].1 > samples[best].1 {
            best = i;
        }
    }
    let (mut best_x, mut best_v) = samples[best].clone();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    // stable: equal values keep sampling order
    order.sort_by(|&a, &b| samples[b].1.total_cmp(&samples[a].1));
    for &i in order.iter().take(budget.n_starts) {
        let (x0, v0) = std::mem::take(&mut samples[i]);
        let (x, v) = pattern_search(&mut f, x0, v0, &bounds, budget.tol);
        if v > best_v {
            best_x = x;
            best_v = v;
        }
    }
    (RelaxedPoint::new(best_x), best_v)
}

pub fn maximize_acquisition<R: Rng + ?Sized>(
    pred: &AveragedPredictor,
    space: &SearchSpace,
    incumbent: f64,
    budget: OptBudget,
    rng: &mut R,
) -> Result<RelaxedPoint> {
    let width = pred.posteriors[0].kernel().width();
    if width != space.encoded_width() {
        return Err(Error::Dimension {
            expected: space.encoded_width(),
            found: width,
        });
    }
    let (x, _) = maximize(
        |x| pred.averaged_ei(x, incumbent).unwrap_or(f64::NEG_INFINITY),
        space,
        budget,
        rng,
    );
    Ok(x)
}
