//! Sequential Bayesian optimization with three ways of handling integer and
//! categorical variables.
//!
//! All strategies maximize expected improvement over the continuous
//! relaxation and evaluate the objective at the decoded argmax. They differ
//! in what is stored as the training input and in the kernel:
//!
//! | strategy   | stored input            | kernel        |
//! |------------|-------------------------|---------------|
//! | `Naive`    | snapped argmax          | plain         |
//! | `Basic`    | raw argmax              | plain         |
//! | `Proposed` | raw argmax              | transformed   |

use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize, maximize_acquisition, AveragedPredictor, OptBudget};
use crate::error::{Error, Result};
use crate::gp_model::{Dataset, GpPosterior};
use crate::hyper_sampler::{ChainConfig, HyperChain, HyperPrior, HyperSample, NoiseMode, NOISELESS_FLOOR};
use crate::kernels::{KernelFamily, KernelParams, KernelSpec};
use crate::search_space::{RelaxedPoint, SearchSpace, ValidConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Naive,
    Basic,
    Proposed,
}

impl Strategy {
    pub fn transforms_inputs(self) -> bool {
        self == Strategy::Proposed
    }

    /// Builds the suggestion for an acquisition maximizer `argmax`.
    pub fn suggestion(self, space: &SearchSpace, argmax: RelaxedPoint) -> Suggestion {
        let eval_config = space.decode(&argmax);
        let stored_input = match self {
            Strategy::Naive => space.transform(&argmax),
            Strategy::Basic | Strategy::Proposed => argmax.clone(),
        };
        Suggestion {
            acq_argmax: argmax,
            eval_config,
            stored_input,
        }
    }

    pub fn kernel_template(self, space: &Arc<SearchSpace>, family: KernelFamily) -> KernelSpec {
        let params = KernelParams::isotropic(space.encoded_width(), 1.0, 1.0, family)
            .expect("unit parameters are valid");
        if self.transforms_inputs() {
            KernelSpec::transformed(params, space.clone()).expect("width matches the space")
        } else {
            KernelSpec::plain(params)
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "basic" => Ok(Strategy::Basic),
            "proposed" => Ok(Strategy::Proposed),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recommendation {
    PosteriorMeanMin,
    BestObserved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub acq_argmax: RelaxedPoint,
    pub eval_config: ValidConfig,
    pub stored_input: RelaxedPoint,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub family: KernelFamily,
    pub n_init: usize,
    pub hyper_samples: usize,
    pub burn_in: usize,
    pub budget: OptBudget,
    /// Fix the noise variance at a tiny floor instead of sampling it.
    pub noiseless: bool,
    pub prior: HyperPrior,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            family: KernelFamily::Matern32,
            n_init: 3,
            hyper_samples: 10,
            burn_in: 50,
            budget: OptBudget::default(),
            noiseless: false,
            prior: HyperPrior::default(),
        }
    }
}

/// Something that can be evaluated at a configuration.
pub trait Objective {
    fn evaluate(&mut self, config: &ValidConfig) -> Result<f64>;
}

impl<F> Objective for F
where
    F: FnMut(&ValidConfig) -> Result<f64>,
{
    fn evaluate(&mut self, config: &ValidConfig) -> Result<f64> {
        self(config)
    }
}

/// `n_init` uniform points of the relaxed box. Depends only on `seed`, so
/// every strategy run with the same seed starts from the same design.
pub fn initial_design(space: &SearchSpace, n_init: usize, seed: u64) -> Vec<RelaxedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..n_init).map(|_| space.sample_uniform(&mut rng)).collect()
}

#[derive(Debug, Clone)]
pub struct BoState {
    space: Arc<SearchSpace>,
    strategy: Strategy,
    config: EngineConfig,
    seed: u64,
    dataset: Dataset,
    rng: ChaCha8Rng,
    chain: HyperChain,
    hypers: Vec<HyperSample>,
}

impl BoState {
    pub fn new(space: Arc<SearchSpace>, strategy: Strategy, config: EngineConfig, seed: u64) -> Result<Self> {
        if config.n_init == 0 {
            return Err(Error::InvalidParameter("n_init must be >= 1".into()));
        }
        if config.hyper_samples == 0 {
            return Err(Error::InvalidParameter("hyper_samples must be >= 1".into()));
        }
        let noise = if config.noiseless {
            NoiseMode::Fixed(NOISELESS_FLOOR)
        } else {
            NoiseMode::Sampled
        };
        let chain = HyperChain::new(ChainConfig::for_space(&space, config.prior, noise))?;
        Ok(BoState {
            space,
            strategy,
            config,
            seed,
            dataset: Dataset::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            chain,
            hypers: Vec::new(),
        })
    }

    pub fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Observations told after the initial design.
    pub fn iteration(&self) -> usize {
        self.dataset.len().saturating_sub(self.config.n_init)
    }

    pub fn incumbent(&self) -> Option<f64> {
        self.dataset.incumbent()
    }

    /// Hyperparameter samples drawn by the last `suggest` or `recommend`.
    pub fn hypers(&self) -> &[HyperSample] {
        &self.hypers
    }

    pub fn initial_suggestions(&self) -> Vec<Suggestion> {
        initial_design(&self.space, self.config.n_init, self.seed)
            .into_iter()
            .map(|p| self.strategy.suggestion(&self.space, p))
            .collect()
    }

    /// Targets shifted to zero mean and scaled to unit variance.
    fn standardized(&self) -> Dataset {
        let y = self.dataset.targets();
        let n = y.len() as f64;
        if y.is_empty() {
            return self.dataset.clone();
        }
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        self.dataset.map_targets(|v| (v - mean) / scale)
    }

    fn template(&self) -> KernelSpec {
        self.strategy.kernel_template(&self.space, self.config.family)
    }

    fn resample_hypers(&mut self, data: &Dataset) -> Result<()> {
        let template = self.template();
        self.hypers = self.chain.run(
            data,
            &template,
            self.config.hyper_samples,
            self.config.burn_in,
            &mut self.rng,
        )?;
        Ok(())
    }

    fn build_predictor(&self, data: &Dataset) -> Result<AveragedPredictor> {
        let template = self.template();
        let posteriors = self
            .hypers
            .iter()
            .map(|h| {
                let kernel = template.with_params(h.kernel_params(self.config.family)?)?;
                GpPosterior::fit(data, kernel, h.noise)
            })
            .collect::<Result<Vec<_>>>()?;
        AveragedPredictor::new(posteriors)
    }

    /// Hyper-averaged predictor on standardized targets, using the current
    /// hyperparameter samples (drawing them first if there are none).
    pub fn predictor(&mut self) -> Result<AveragedPredictor> {
        let data = self.standardized();
        if self.hypers.is_empty() {
            self.resample_hypers(&data)?;
        }
        self.build_predictor(&data)
    }

    pub fn suggest(&mut self) -> Result<Suggestion> {
        if self.dataset.is_empty() {
            return Err(Error::InsufficientData { needed: 1, found: 0 });
        }
        let data = self.standardized();
        self.resample_hypers(&data)?;
        let pred = self.build_predictor(&data)?;
        let incumbent = data.incumbent().expect("dataset is nonempty");
        let argmax = maximize_acquisition(&pred, &self.space, incumbent, self.config.budget, &mut self.rng)?;
        Ok(self.strategy.suggestion(&self.space, argmax))
    }

    pub fn tell(&mut self, suggestion: &Suggestion, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::InvalidObservation(y));
        }
        if !self.space.contains(&suggestion.stored_input) {
            return Err(Error::InvalidConfig(format!(
                "stored input {:?} outside the encoded box",
                &*suggestion.stored_input
            )));
        }
        self.dataset.push(suggestion.stored_input.clone(), y)
    }

    pub fn recommend(&mut self, mode: Recommendation) -> Result<ValidConfig> {
        let best = self
            .dataset
            .argmin()
            .ok_or(Error::InsufficientData { needed: 1, found: 0 })?;
        match mode {
            Recommendation::BestObserved => Ok(self.space.decode(&self.dataset.inputs()[best])),
            Recommendation::PosteriorMeanMin => {
                let pred = self.predictor()?;
                let (x, _) = maximize(
                    |x| -pred.mean(x).unwrap_or(f64::INFINITY),
                    &self.space,
                    self.config.budget,
                    &mut self.rng,
                );
                Ok(self.space.decode(&x))
            }
        }
    }
}

/// Creates a state and evaluates its initial design.
pub fn initialize<O: Objective + ?Sized>(
    space: Arc<SearchSpace>,
    strategy: Strategy,
    config: EngineConfig,
    seed: u64,
    objective: &mut O,
) -> Result<BoState> {
    let mut state = BoState::new(space, strategy, config, seed)?;
    for s in state.initial_suggestions() {
        let y = objective.evaluate(&s.eval_config).map_err(|e| match e {
            e @ Error::Objective { .. } => e,
            other => Error::Objective {
                config: s.eval_config.to_json(),
                message: other.to_string(),
            },
        })?;
        state.tell(&s, y)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::{Dimension, Value};

    fn int_space(hi: i64) -> Arc<SearchSpace> {
        Arc::new(SearchSpace::new(vec![Dimension::integer(0, hi)]).unwrap())
    }

    fn quick() -> EngineConfig {
        EngineConfig {
            hyper_samples: 3,
            burn_in: 5,
            budget: OptBudget { n_random: 100, n_starts: 2, tol: 1e-3 },
            ..EngineConfig::default()
        }
    }

    fn quadratic(c: &ValidConfig) -> Result<f64> {
        match c.values()[0] {
            Value::Integer(i) => Ok(((i - 3) * (i - 3)) as f64),
            _ => unreachable!(),
        }
    }

    #[test]
    fn strategy_suggestions() {
        let space = int_space(4);
        let argmax = RelaxedPoint::new(vec![2.4]);
        let naive = Strategy::Naive.suggestion(&space, argmax.clone());
        assert_eq!(*naive.stored_input, [2.0]);
        assert_eq!(naive.eval_config, ValidConfig(vec![Value::Integer(2)]));
        for s in [Strategy::Basic, Strategy::Proposed] {
            let sg = s.suggestion(&space, argmax.clone());
            assert_eq!(sg.stored_input, argmax);
            assert_eq!(sg.eval_config, ValidConfig(vec![Value::Integer(2)]));
        }
    }

    #[test]
    fn initialize_contract() {
        let space = int_space(4);
        let a = initialize(space.clone(), Strategy::Basic, quick(), 7, &mut quadratic).unwrap();
        let b = initialize(space.clone(), Strategy::Proposed, quick(), 7, &mut quadratic).unwrap();
        assert_eq!(a.dataset().len(), 3);
        assert_eq!(a.dataset(), b.dataset());
        assert_eq!(a.iteration(), 0);
        assert!(a.dataset().inputs().iter().all(|p| space.contains(p)));
    }

    #[test]
    fn objective_errors_carry_config() {
        let mut failing = |_: &ValidConfig| -> Result<f64> { Err(Error::InvalidObservation(f64::NAN)) };
        let err = initialize(int_space(4), Strategy::Basic, quick(), 1, &mut failing).unwrap_err();
        match err {
            Error::Objective { config, .. } => assert!(config.starts_with('[')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn suggest_and_tell() {
        let space = int_space(4);
        let mut st = initialize(space.clone(), Strategy::Proposed, quick(), 3, &mut quadratic).unwrap();
        let s = st.suggest().unwrap();
        assert!(matches!(s.eval_config.values()[0], Value::Integer(0..=4)));
        let before = st.incumbent().unwrap();
        let mut copy = st.clone();
        st.tell(&s, -1.0).unwrap();
        copy.tell(&s, -1.0).unwrap();
        assert_eq!(st.dataset(), copy.dataset());
        assert_eq!(st.dataset().len(), 4);
        assert_eq!(st.iteration(), 1);
        assert_eq!(st.incumbent().unwrap(), before.min(-1.0));
        assert!(matches!(st.tell(&s, f64::NAN), Err(Error::InvalidObservation(_))));
    }

    #[test]
    fn naive_stores_fixed_points() {
        let space = int_space(6);
        let mut st = initialize(space.clone(), Strategy::Naive, quick(), 5, &mut quadratic).unwrap();
        for _ in 0..4 {
            let s = st.suggest().unwrap();
            assert!(space.is_fixed_point(&s.stored_input));
            assert_eq!(s.stored_input, space.encode(&s.eval_config).unwrap());
            let y = quadratic(&s.eval_config).unwrap();
            st.tell(&s, y).unwrap();
        }
    }

    #[test]
    fn suggest_needs_data() {
        let mut st = BoState::new(int_space(4), Strategy::Basic, quick(), 0).unwrap();
        assert!(matches!(st.suggest(), Err(Error::InsufficientData { .. })));
        assert!(st.recommend(Recommendation::BestObserved).is_err());
    }

    #[test]
    fn best_observed_recommendation() {
        let space = int_space(4);
        let mut st = BoState::new(space.clone(), Strategy::Basic, quick(), 0).unwrap();
        for (x, y) in [(2.0, 1.0), (3.0, 0.2)] {
            let s = Strategy::Basic.suggestion(&space, RelaxedPoint::new(vec![x]));
            st.tell(&s, y).unwrap();
        }
        assert_eq!(
            st.recommend(Recommendation::BestObserved).unwrap(),
            ValidConfig(vec![Value::Integer(3)])
        );
    }

    #[test]
    fn mean_recommendation_is_valid() {
        let space = Arc::new(
            SearchSpace::new(vec![Dimension::real(0.0, 1.0), Dimension::categorical(["a", "b", "c"])]).unwrap(),
        );
        let mut obj = |c: &ValidConfig| -> Result<f64> {
            match (&c.values()[0], &c.values()[1]) {
                (Value::Real(x), Value::Label(l)) => Ok((x - 0.3).powi(2) + if l == "b" { 0.0 } else { 1.0 }),
                _ => unreachable!(),
            }
        };
        for strategy in [Strategy::Naive, Strategy::Basic, Strategy::Proposed] {
            let mut st = initialize(space.clone(), strategy, quick(), 2, &mut obj).unwrap();
            let rec = st.recommend(Recommendation::PosteriorMeanMin).unwrap();
            assert!(space.encode(&rec).is_ok());
        }
    }
}
