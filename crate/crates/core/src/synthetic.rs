//! Benchmark objectives drawn from a GP prior over a mixed space.
//!
//! The ground-truth kernel is a squared exponential evaluated on snapped
//! inputs, so every objective is constant on each cell of the snapping map.
//! Because that kernel factorizes over dimensions, the latent function is
//! drawn jointly on a product grid as `f = s (L_1 ⊗ ... ⊗ L_D) z`, where
//! `L_d` is the Cholesky factor of the per-dimension correlation matrix and
//! `s` the square root of the amplitude. Off-grid real coordinates take the
//! conditional mean given the grid values. The whole function is fixed at
//! construction, so query order never changes any value.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelParams, KernelSpec};
use crate::search_space::{Dimension, SearchSpace, ValidConfig, Value};

/// Largest number of grid points an objective may enumerate.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    TwoDInteger,
    TwoDCategorical,
    FourDInteger,
    FourDCategorical,
}

impl Layout {
    pub const ALL: [Layout; 4] = [
        Layout::TwoDInteger,
        Layout::TwoDCategorical,
        Layout::FourDInteger,
        Layout::FourDCategorical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layout::TwoDInteger => "2d-int",
            Layout::TwoDCategorical => "2d-cat",
            Layout::FourDInteger => "4d-int",
            Layout::FourDCategorical => "4d-cat",
        }
    }

    /// Grid points per real dimension used to locate the optimum.
    pub fn grid_density(self) -> usize {
        match self {
            Layout::TwoDInteger | Layout::TwoDCategorical => 200,
            Layout::FourDInteger | Layout::FourDCategorical => 50,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Layout::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown layout {s:?} (expected 2d-int, 2d-cat, 4d-int or 4d-cat)")))
    }
}

pub fn make_experiment_space(layout: Layout) -> SearchSpace {
    let unit = || Dimension::real(0.0, 1.0);
    let dims = match layout {
        Layout::TwoDInteger => vec![unit(), Dimension::integer(0, 4)],
        Layout::TwoDCategorical => vec![unit(), Dimension::categorical(["a", "b", "c", "d", "e"])],
        Layout::FourDInteger => vec![unit(), unit(), Dimension::integer(0, 4), Dimension::integer(0, 4)],
        Layout::FourDCategorical => vec![
            unit(),
            unit(),
            Dimension::categorical(["a", "b", "c"]),
            Dimension::categorical(["a", "b", "c"]),
        ],
    };
    SearchSpace::new(dims).expect("layouts are valid spaces")
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    variance: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {variance} must be >= 0")));
        }
        Ok(NoiseModel { variance })
    }

    pub fn noiseless() -> Self {
        NoiseModel { variance: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Hyperparameters of the ground-truth kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub amplitude: f64,
    /// Lengthscale per encoded coordinate. Real dimensions scale it by
    /// their range; integer steps and one-hot coordinates use it as is.
    pub lengthscale: f64,
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth {
            amplitude: 1.0,
            lengthscale: 0.3,
        }
    }
}

impl GroundTruth {
    fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude {} must be positive", self.amplitude)));
        }
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lengthscale {} must be positive",
                self.lengthscale
            )));
        }
        Ok(())
    }

    fn dim_lengthscale(&self, dim: &Dimension) -> f64 {
        match dim {
            Dimension::Real { lower, upper } if upper > lower => self.lengthscale * (upper - lower),
            _ => self.lengthscale,
        }
    }

    /// The transformed kernel this ground truth samples from.
    pub fn kernel_spec(&self, space: &Arc<SearchSpace>) -> Result<KernelSpec> {
        self.validate()?;
        let mut ls = Vec::with_capacity(space.encoded_width());
        for d in space.dims() {
            ls.extend(std::iter::repeat_n(self.dim_lengthscale(d), d.encoded_width()));
        }
        let params = KernelParams::new(ls, self.amplitude, KernelFamily::SquaredExponential)?;
        KernelSpec::transformed(params, Arc::clone(space))
    }
}

/// Grid nodes and Cholesky factor of one dimension.
#[derive(Debug, Clone)]
struct Axis {
    /// Node positions for real dimensions, empty otherwise.
    nodes: Vec<f64>,
    lengthscale: f64,
    chol: DMatrix<f64>,
}

impl Axis {
    fn len(&self) -> usize {
        self.chol.nrows()
    }
}

/// Coordinate of a configuration along one axis.
#[derive(Debug, Clone, Copy)]
enum Coord {
    Index(usize),
    Real(f64),
}

fn linspace(lower: f64, upper: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lower + upper)];
    }
    (0..n)
        .map(|i| if i + 1 == n { upper } else { lower + (upper - lower) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn se(dx: f64, ls: f64) -> f64 {
    let r = dx / ls;
    (-0.5 * r * r).exp()
}

/// Cholesky factor with relative jitter escalated until it succeeds.
fn robust_cholesky(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut jitter = 1e-10;
    while jitter <= 1e-4 {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::SingularModel { condition: f64::INFINITY })
}

/// Multiplies mode `axis` of a row-major tensor with shape `shape` by `m`.
fn mode_product(x: &[f64], shape: &[usize], axis: usize, m: &DMatrix<f64>) -> Vec<f64> {
    let n = shape[axis];
    let post: usize = shape[axis + 1..].iter().product();
    let pre = x.len() / (n * post);
    let mut out = vec![0.0; x.len()];
    for p in 0..pre {
        for i in 0..n {
            let dst = (p * n + i) * post;
            for j in 0..=i.min(n - 1) {
                let a = m[(i, j)];
                if a == 0.0 {
                    continue;
                }
                let src = (p * n + j) * post;
                for q in 0..post {
                    out[dst + q] += a * x[src + q];
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GpSampleObjective {
    space: Arc<SearchSpace>,
    truth: GroundTruth,
    seed: u64,
    grid_density: usize,
    axes: Vec<Axis>,
    /// Standard normal weights, row-major over the grid.
    z: Vec<f64>,
    minimum: (ValidConfig, f64),
    grid_minimum: (ValidConfig, f64),
    memo: Vec<(ValidConfig, f64)>,
    memo_index: HashMap<String, usize>,
}

impl GpSampleObjective {
    pub fn new(space: SearchSpace, truth: GroundTruth, grid_density: usize, seed: u64) -> Result<Self> {
        Self::with_cap(space, truth, grid_density, seed, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(space: SearchSpace, truth: GroundTruth, grid_density: usize, seed: u64, cap: usize) -> Result<Self> {
        truth.validate()?;
        if grid_density == 0 {
            return Err(Error::InvalidParameter("grid density must be >= 1".into()));
        }
        let mut size: usize = 1;
        for d in space.dims() {
            let n = match d {
                Dimension::Real { .. } => grid_density,
                Dimension::Integer { lower, upper } => usize::try_from(upper - lower + 1).unwrap_or(usize::MAX),
                Dimension::Categorical { labels } => labels.len(),
            };
            size = size.saturating_mul(n);
        }
        if size > cap {
            return Err(Error::GridTooLarge { size, cap });
        }

        let mut axes = Vec::with_capacity(space.dims().len());
        for d in space.dims() {
            let ls = truth.dim_lengthscale(d);
            let (nodes, k) = match d {
                Dimension::Real { lower, upper } => {
                    let nodes = linspace(*lower, *upper, grid_density);
                    let k = DMatrix::from_fn(nodes.len(), nodes.len(), |i, j| se(nodes[i] - nodes[j], ls));
                    (nodes, k)
                }
                Dimension::Integer { lower, upper } => {
                    let n = (upper - lower + 1) as usize;
                    (Vec::new(), DMatrix::from_fn(n, n, |i, j| se(i as f64 - j as f64, ls)))
                }
                Dimension::Categorical { labels } => {
                    let off = (-1.0 / (ls * ls)).exp();
                    let n = labels.len();
                    (Vec::new(), DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { off }))
                }
            };
            axes.push(Axis {
                nodes,
                lengthscale: ls,
                chol: robust_cholesky(&k)?,
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..size).map(|_| StandardNormal.sample(&mut rng)).collect();

        let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
        let mut values = z.clone();
        for (a, axis) in axes.iter().enumerate() {
            values = mode_product(&values, &shape, a, &axis.chol);
        }
        let mut best = 0;
        for i in 1..values.len() {
            if values[i] < values[best] {
                best = i;
            }
        }
        let space = Arc::new(space);
        let mut obj = GpSampleObjective {
            space,
            truth,
            seed,
            grid_density,
            axes,
            z,
            minimum: (ValidConfig(Vec::new()), 0.0),
            grid_minimum: (ValidConfig(Vec::new()), 0.0),
            memo: Vec::new(),
            memo_index: HashMap::new(),
        };
        let best_idx = unravel(best, &shape);
        let grid_best = obj.config_at(&best_idx);
        let v = obj.evaluate(&grid_best)?;
        obj.grid_minimum = (grid_best, v);
        obj.minimum = obj.refine_minimum(&values, &shape);
        Ok(obj)
    }

    /// Objective for one of the benchmark layouts at its default grid density.
    pub fn for_layout(layout: Layout, truth: GroundTruth, seed: u64) -> Result<Self> {
        Self::new(make_experiment_space(layout), truth, layout.grid_density(), seed)
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid_density(&self) -> usize {
        self.grid_density
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Configurations queried so far with their latent values, in first-query
    /// order.
    pub fn memo(&self) -> &[(ValidConfig, f64)] {
        &self.memo
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.truth.kernel_spec(&self.space)
    }

    /// Minimum over the enumerated grid.
    pub fn grid_minimum(&self) -> (&ValidConfig, f64) {
        (&self.grid_minimum.0, self.grid_minimum.1)
    }

    /// Grid minimum polished along the real dimensions; the regret reference.
    pub fn true_minimum(&self) -> (&ValidConfig, f64) {
        (&self.minimum.0, self.minimum.1)
    }

    /// Every grid configuration with its latent value, row-major over the
    /// dimensions in declared order.
    pub fn grid(&self) -> Vec<(ValidConfig, f64)> {
        let shape: Vec<usize> = self.axes.iter().map(Axis::len).collect();
        let size: usize = shape.iter().product();
        (0..size)
            .map(|i| {
                let c = self.config_at(&unravel(i, &shape));
                let v = self.evaluate(&c).expect("grid configs are valid");
                (c, v)
            })
            .collect()
    }

    fn config_at(&self, idx: &[usize]) -> ValidConfig {
        ValidConfig(
            self.space
                .dims()
                .iter()
                .zip(&self.axes)
                .zip(idx)
                .map(|((d, axis), &i)| match d {
                    Dimension::Real { .. } => Value::Real(axis.nodes[i]),
                    Dimension::Integer { lower, .. } => Value::Integer(lower + i as i64),
                    Dimension::Categorical { labels } => Value::Label(labels[i].clone()),
                })
                .collect(),
        )
    }

    fn coords(&self, c: &ValidConfig) -> Result<Vec<Coord>> {
        // encode validates ranges and labels
        self.space.encode(c)?;
        Ok(self
            .space
            .dims()
            .iter()
            .zip(&self.axes)
            .zip(c.values())
            .map(|((d, axis), v)| match (d, v) {
                (Dimension::Real { .. }, v) => {
                    let x = match v {
                        Value::Real(x) => *x,
                        Value::Integer(i) => *i as f64,
                        Value::Label(_) => unreachable!("validated by encode"),
                    };
                    match axis.nodes.iter().position(|n| *n == x) {
                        Some(i) => Coord::Index(i),
                        None => Coord::Real(x),
                    }
                }
                (Dimension::Integer { lower, .. }, Value::Integer(i)) => Coord::Index((i - lower) as usize),
                (Dimension::Categorical { labels }, Value::Label(l)) => {
                    Coord::Index(labels.iter().position(|x| x == l).expect("validated by encode"))
                }
                _ => unreachable!("validated by encode"),
            })
            .collect())
    }

    fn latent(&self, coords: &[Coord]) -> f64 {
        // contract z with one vector per axis, last axis first
        let mut t = self.z.clone();
        for (axis, c) in self.axes.iter().zip(coords).rev() {
            let n = axis.len();
            let v: DVector<f64> = match *c {
                Coord::Index(i) => axis.chol.row(i).transpose(),
                Coord::Real(x) => {
                    let k = DVector::from_iterator(n, axis.nodes.iter().map(|node| se(x - node, axis.lengthscale)));
                    axis.chol.solve_lower_triangular(&k).expect("factor has a positive diagonal")
                }
            };
            t = t.chunks_exact(n).map(|row| row.iter().zip(v.iter()).map(|(a, b)| a * b).sum()).collect();
        }
        self.truth.amplitude.sqrt() * t[0]
    }

    /// Noiseless latent value without touching the memo.
    pub fn evaluate(&self, c: &ValidConfig) -> Result<f64> {
        Ok(self.latent(&self.coords(c)?))
    }

    /// Latent value at `c`, recorded in the memo.
    pub fn latent_value(&mut self, c: &ValidConfig) -> Result<f64> {
        let key = c.to_json();
        if let Some(&i) = self.memo_index.get(&key) {
            return Ok(self.memo[i].1);
        }
        let v = self.evaluate(c)?;
        self.memo_index.insert(key, self.memo.len());
        self.memo.push((c.clone(), v));
        Ok(v)
    }

    /// Observation `f(c) + e` with `e ~ Normal(0, noise.variance())`.
    pub fn query<R: Rng + ?Sized>(&mut self, c: &ValidConfig, noise: NoiseModel, rng: &mut R) -> Result<f64> {
        let f = self.latent_value(c)?;
        if noise.variance() == 0.0 {
            return Ok(f);
        }
        let n = Normal::new(0.0, noise.variance().sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(f + n.sample(rng))
    }

    /// Coordinate search along the real axes from the best grid points.
    fn refine_minimum(&self, values: &[f64], shape: &[usize]) -> (ValidConfig, f64) {
        let scale = self.truth.amplitude.sqrt();
        let real_axes: Vec<usize> = (0..self.axes.len()).filter(|&a| !self.axes[a].nodes.is_empty()).collect();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best_grid = (self.grid_minimum.0.clone(), self.grid_minimum.1);
        if real_axes.is_empty() {
            return best_grid;
        }
        let mut best: (Vec<Coord>, f64) = (Vec::new(), best_grid.1);
        for &g in order.iter().take(8) {
            let idx = unravel(g, shape);
            let mut coords: Vec<Coord> = idx.iter().map(|&i| Coord::Index(i)).collect();
            let mut xs: Vec<f64> = real_axes.iter().map(|&a| self.axes[a].nodes[idx[a]]).collect();
            let mut fx = scale * values[g];
            let bounds: Vec<(f64, f64)> = real_axes
                .iter()
                .map(|&a| match self.space.dims()[a] {
                    Dimension::Real { lower, upper } => (lower, upper),
                    _ => unreachable!(),
                })
                .collect();
            let mut step = 1.0 / self.grid_density.max(2) as f64;
            while step > 1e-9 {
                let mut improved = false;
                for k in 0..xs.len() {
                    let (lo, hi) = bounds[k];
                    for dir in [1.0, -1.0] {
                        let x = (xs[k] + dir * step * (hi - lo)).clamp(lo, hi);
                        if x == xs[k] {
                            continue;
                        }
                        let mut trial = coords.clone();
                        for (j, &a) in real_axes.iter().enumerate() {
                            trial[a] = Coord::Real(if j == k { x } else { xs[j] });
                        }
                        let ft = self.latent(&trial);
                        if ft < fx {
                            fx = ft;
                            xs[k] = x;
                            coords = trial;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            if fx < best.1 {
                best = (coords, fx);
            }
        }
        if best.0.is_empty() {
            return best_grid;
        }
        let config = ValidConfig(
            self.space
                .dims()
                .iter()
                .zip(&self.axes)
                .zip(&best.0)
                .map(|((d, axis), c)| match (d, *c) {
                    (Dimension::Real { .. }, Coord::Real(x)) => Value::Real(x),
                    (Dimension::Real { .. }, Coord::Index(i)) => Value::Real(axis.nodes[i]),
                    (Dimension::Integer { lower, .. }, Coord::Index(i)) => Value::Integer(lower + i as i64),
                    (Dimension::Categorical { labels }, Coord::Index(i)) => Value::Label(labels[i].clone()),
                    _ => unreachable!(),
                })
                .collect(),
        );
        // reported values come from the same path as queries
        let v = self.evaluate(&config).expect("refined config is valid");
        if v <= best_grid.1 {
            (config, v)
        } else {
            best_grid
        }
    }
}

fn unravel(mut i: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        idx[a] = i % shape[a];
        i /= shape[a];
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_space() -> SearchSpace {
        SearchSpace::new(vec![Dimension::real(0.0, 1.0), Dimension::integer(0, 4)]).unwrap()
    }

    #[test]
    fn layout_widths() {
        let w: Vec<usize> = Layout::ALL.iter().map(|l| make_experiment_space(*l).encoded_width()).collect();
        assert_eq!(w, [2, 6, 4, 8]);
        for l in Layout::ALL {
            assert_eq!(l.name().parse::<Layout>().unwrap(), l);
        }
        assert!("3d".parse::<Layout>().is_err());
    }

    #[test]
    fn memo_consistency() {
        let mut obj = GpSampleObjective::new(small_space(), GroundTruth::default(), 20, 3).unwrap();
        let c = ValidConfig(vec![Value::Real(0.377), Value::Integer(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = obj.query(&c, NoiseModel::noiseless(), &mut rng).unwrap();
        let b = obj.query(&c, NoiseModel::noiseless(), &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(obj.memo().len(), 1);
        let noisy = obj.query(&c, NoiseModel::new(0.01).unwrap(), &mut rng).unwrap();
        assert_ne!(noisy, a);
        assert_eq!(obj.memo().len(), 1);
        assert!(NoiseModel::new(-1.0).is_err());
    }

    #[test]
    fn query_order_is_irrelevant() {
        let space = make_experiment_space(Layout::TwoDCategorical);
        let configs: Vec<ValidConfig> = (0..5).map(|s| space.decode(&space.sample_uniform_seeded(s))).collect();
        let mut a = GpSampleObjective::new(space.clone(), GroundTruth::default(), 50, 9).unwrap();
        let mut b = a.clone();
        let va: Vec<f64> = configs.iter().map(|c| a.latent_value(c).unwrap()).collect();
        let mut vb = vec![0.0; 5];
        for i in [3, 0, 4, 1, 2] {
            vb[i] = b.latent_value(&configs[i]).unwrap();
        }
        for (x, y) in va.iter().zip(&vb) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn constant_on_cells() {
        let obj = GpSampleObjective::for_layout(Layout::FourDInteger, GroundTruth::default(), 1).unwrap();
        let space = obj.space().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = space.sample_uniform(&mut rng);
            let mut q = p.clone().into_inner();
            // nudge the integer coordinates within their cells
            q[2] = crate::search_space::round_half_up(q[2]) + 0.3 * (rng.random::<f64>() - 0.5);
            q[3] = crate::search_space::round_half_up(q[3]) + 0.3 * (rng.random::<f64>() - 0.5);
            let q = crate::search_space::RelaxedPoint::new(q);
            let a = obj.evaluate(&space.decode(&p)).unwrap();
            let b = obj.evaluate(&space.decode(&space.transform(&q))).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn first_query_is_a_prior_draw() {
        // latent values across seeds have the prior variance
        let space = SearchSpace::new(vec![Dimension::integer(0, 4)]).unwrap();
        let c = ValidConfig(vec![Value::Integer(1)]);
        let n = 10_000;
        let vals: Vec<f64> = (0..n)
            .map(|s| {
                let obj = GpSampleObjective::new(space.clone(), GroundTruth::default(), 1, s).unwrap();
                obj.evaluate(&c).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn monte_carlo_covariance_matches_kernel() {
        let space = Arc::new(small_space());
        let truth = GroundTruth::default();
        let spec = truth.kernel_spec(&space).unwrap();
        let pairs = [
            (
                ValidConfig(vec![Value::Real(0.33), Value::Integer(1)]),
                ValidConfig(vec![Value::Real(0.41), Value::Integer(1)]),
            ),
            (
                ValidConfig(vec![Value::Real(0.5), Value::Integer(2)]),
                ValidConfig(vec![Value::Real(0.55), Value::Integer(3)]),
            ),
            (
                ValidConfig(vec![Value::Real(0.9), Value::Integer(4)]),
                ValidConfig(vec![Value::Real(0.9), Value::Integer(4)]),
            ),
            (
                ValidConfig(vec![Value::Real(0.05), Value::Integer(0)]),
                ValidConfig(vec![Value::Real(0.2), Value::Integer(0)]),
            ),
        ];
        let n = 10_000;
        let mut sums = vec![(0.0, 0.0, 0.0); pairs.len()];
        for s in 0..n {
            let obj = GpSampleObjective::new((*space).clone(), truth, 12, 1000 + s).unwrap();
            for (acc, (a, b)) in sums.iter_mut().zip(&pairs) {
                let (fa, fb) = (obj.evaluate(a).unwrap(), obj.evaluate(b).unwrap());
                acc.0 += fa;
                acc.1 += fb;
                acc.2 += fa * fb;
            }
        }
        for (acc, (a, b)) in sums.iter().zip(&pairs) {
            let nf = n as f64;
            let cov = acc.2 / nf - (acc.0 / nf) * (acc.1 / nf);
            let k = spec.value(&space.encode(a).unwrap(), &space.encode(b).unwrap()).unwrap();
            // relative for strong covariances, on the amplitude scale for near-zero ones
            let tol = if k >= 0.5 * truth.amplitude { 0.05 * k } else { 0.05 * truth.amplitude };
            assert!((cov - k).abs() <= tol, "cov {cov} vs kernel {k}");
        }
    }

    #[test]
    fn minimum_enumerates_single_integer() {
        let space = SearchSpace::new(vec![Dimension::integer(0, 4)]).unwrap();
        let mut obj = GpSampleObjective::new(space, GroundTruth::default(), 7, 11).unwrap();
        let vals: Vec<f64> = (0..5)
            .map(|i| obj.latent_value(&ValidConfig(vec![Value::Integer(i)])).unwrap())
            .collect();
        assert_eq!(obj.grid().len(), 5);
        let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(obj.true_minimum().1, m);
        assert!(obj.memo().iter().all(|(_, v)| obj.true_minimum().1 <= *v));
    }

    #[test]
    fn grid_minimum_matches_reenumeration() {
        let obj = GpSampleObjective::new(small_space(), GroundTruth::default(), 200, 17).unwrap();
        // independent enumeration of every (real node, integer) pair
        let mut best = (ValidConfig(vec![]), f64::INFINITY);
        for i in 0..200 {
            let x = if i == 199 { 1.0 } else { i as f64 / 199.0 };
            for k in 0..5 {
                let c = ValidConfig(vec![Value::Real(x), Value::Integer(k)]);
                let v = obj.evaluate(&c).unwrap();
                if v < best.1 {
                    best = (c, v);
                }
            }
        }
        assert_eq!(obj.grid_minimum().0, &best.0);
        assert_eq!(obj.grid_minimum().1, best.1);
        assert!(obj.true_minimum().1 <= obj.grid_minimum().1);
        let (c, v) = obj.true_minimum();
        assert_eq!(obj.evaluate(c).unwrap(), v);
    }

    #[test]
    fn grid_values_match_direct_evaluation() {
        let obj = GpSampleObjective::for_layout(Layout::FourDCategorical, GroundTruth::default(), 2).unwrap();
        let grid = obj.grid();
        assert_eq!(grid.len(), 50 * 50 * 9);
        let min = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        assert!((min - obj.grid_minimum().1).abs() < 1e-12);
    }

    #[test]
    fn grid_cap() {
        let r = GpSampleObjective::with_cap(small_space(), GroundTruth::default(), 300, 0, 1000);
        assert!(matches!(r, Err(Error::GridTooLarge { size: 1500, cap: 1000 })));
    }
}
