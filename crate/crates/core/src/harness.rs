//! Paired benchmark runs, regret curves with bootstrap error bars, and the
//! files written for them.
//!
//! Within one repetition every strategy faces the same objective, the same
//! initial design and the same observation-noise stream. Iterations are
//! counted from the first evaluation after the initial design.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{random_suggest, tpe_suggest, TpeConfig};
use crate::bo_engine::{initial_design, initialize, EngineConfig, Objective, Recommendation, Strategy};
use crate::error::{Error, Result};
use crate::plot::regret_svg;
use crate::search_space::{Dimension, SearchSpace, ValidConfig};
use crate::synthetic::{GpSampleObjective, GroundTruth, Layout, NoiseModel, DEFAULT_GRID_CAP};

/// Added to every regret before taking log10.
pub const REGRET_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Gp(Strategy),
    Tpe,
    Random,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Gp(Strategy::Naive) => "naive",
            StrategyKind::Gp(Strategy::Basic) => "basic",
            StrategyKind::Gp(Strategy::Proposed) => "proposed",
            StrategyKind::Tpe => "tpe",
            StrategyKind::Random => "random",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tpe" => Ok(StrategyKind::Tpe),
            "random" => Ok(StrategyKind::Random),
            other => other.parse().map(StrategyKind::Gp).map_err(|_| {
                Error::InvalidConfig(format!(
                    "unknown strategy {other:?} (expected naive, basic, proposed, tpe or random)"
                ))
            }),
        }
    }
}

/// Parses a comma-separated strategy list.
pub fn parse_strategies(s: &str) -> Result<Vec<StrategyKind>> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Debug, Clone)]
pub enum ObjectiveSource {
    /// GP-prior draws on a benchmark layout.
    Layout(Layout),
    /// GP-prior draws on a user space, gridded at `grid_density` points per
    /// real dimension.
    Space { space: SearchSpace, grid_density: usize },
    /// A shell command reading one JSON config on stdin and printing a float.
    External { space: SearchSpace, command: String },
}

impl ObjectiveSource {
    pub fn space(&self) -> SearchSpace {
        match self {
            ObjectiveSource::Layout(l) => crate::synthetic::make_experiment_space(*l),
            ObjectiveSource::Space { space, .. } | ObjectiveSource::External { space, .. } => space.clone(),
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, ObjectiveSource::External { .. })
    }
}

/// Largest per-real-dimension grid density, at most 200, that keeps the grid
/// of `space` under the default cap.
pub fn default_grid_density(space: &SearchSpace) -> usize {
    let mut discrete: usize = 1;
    let mut n_real = 0u32;
    for d in space.dims() {
        match d {
            Dimension::Real { .. } => n_real += 1,
            Dimension::Integer { lower, upper } => {
                discrete = discrete.saturating_mul(usize::try_from(upper - lower + 1).unwrap_or(usize::MAX))
            }
            Dimension::Categorical { labels } => discrete = discrete.saturating_mul(labels.len()),
        }
    }
    let mut n = 200usize;
    while n > 2 && n.saturating_pow(n_real).saturating_mul(discrete) > DEFAULT_GRID_CAP {
        n -= 1;
    }
    n
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: ObjectiveSource,
    pub strategies: Vec<StrategyKind>,
    pub iterations: usize,
    pub repetitions: usize,
    pub noise_variance: f64,
    pub bootstrap_samples: usize,
    pub seed: u64,
    /// Engine settings shared by the GP strategies; `noiseless` is derived
    /// from `noise_variance` for synthetic objectives.
    pub engine: EngineConfig,
    pub truth: GroundTruth,
    pub tpe: TpeConfig,
}

impl ExperimentConfig {
    pub fn new(source: ObjectiveSource, strategies: Vec<StrategyKind>) -> Self {
        ExperimentConfig {
            source,
            strategies,
            iterations: 50,
            repetitions: 100,
            noise_variance: 0.0,
            bootstrap_samples: 200,
            seed: 0,
            engine: EngineConfig::default(),
            truth: GroundTruth::default(),
            tpe: TpeConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("no strategies".into()));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::InvalidConfig(format!("strategy {s} listed twice")));
            }
        }
        if self.iterations == 0 || self.repetitions == 0 {
            return Err(Error::InvalidConfig("iterations and repetitions must be >= 1".into()));
        }
        NoiseModel::new(self.noise_variance)?;
        self.tpe.validate()
    }

    /// Recommendations optimize the posterior mean on synthetic objectives
    /// and take the best observation on external ones.
    pub fn recommendation(&self) -> Recommendation {
        if self.source.is_external() {
            Recommendation::BestObserved
        } else {
            Recommendation::PosteriorMeanMin
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub strategy: StrategyKind,
    pub repetition: usize,
    /// 1-based, counted after the initial design.
    pub iteration: usize,
    /// Acquisition argmax in the relaxed space; `None` for TPE and random.
    pub suggested: Option<Vec<f64>>,
    pub eval_config: ValidConfig,
    pub observed_y: f64,
    pub recommendation: ValidConfig,
    /// Noiseless objective at the recommendation, when known.
    pub recommendation_value: Option<f64>,
    pub regret: Option<f64>,
}

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub strategy: String,
    pub repetition: usize,
    pub iteration: usize,
    pub eval_config_json: String,
    pub observed_y: f64,
    pub recommendation_json: String,
    pub regret: Option<f64>,
}

impl From<&RunRecord> for CsvRecord {
    fn from(r: &RunRecord) -> Self {
        CsvRecord {
            strategy: r.strategy.name().to_string(),
            repetition: r.repetition,
            iteration: r.iteration,
            eval_config_json: r.eval_config.to_json(),
            observed_y: r.observed_y,
            recommendation_json: r.recommendation.to_json(),
            regret: r.regret,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub strategy: StrategyKind,
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

/// Spreads `(seed, repetition, role)` into an independent 64-bit seed.
fn derive_seed(seed: u64, repetition: usize, role: u64) -> u64 {
    let mut x = seed ^ (repetition as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ role.wrapping_mul(0xD1B5_4A32_D192_ED03);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Subprocess objective: writes the config JSON and a newline to the
/// command's stdin and parses its stdout as one float.
#[derive(Debug, Clone)]
pub struct ExternalObjective {
    pub command: String,
}

impl Objective for ExternalObjective {
    fn evaluate(&mut self, config: &ValidConfig) -> Result<f64> {
        let json = config.to_json();
        let fail = |message: String| Error::Objective {
            config: json.clone(),
            message,
        };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(format!("cannot start {:?}: {e}", self.command)))?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            // a command that exits without reading stdin is not an error
            let _ = writeln!(stdin, "{json}");
        }
        let mut out = String::new();
        child
            .stdout
            .take()
            .expect("stdout is piped")
            .read_to_string(&mut out)
            .map_err(|e| fail(e.to_string()))?;
        let status = child.wait().map_err(|e| fail(e.to_string()))?;
        if !status.success() {
            return Err(fail(format!("command exited with {status}")));
        }
        let y: f64 = out
            .trim()
            .parse()
            .map_err(|_| fail(format!("output {:?} is not a number", out.trim())))?;
        if !y.is_finite() {
            return Err(fail(format!("non-finite output {y}")));
        }
        Ok(y)
    }
}

enum RunObjective {
    Synthetic {
        obj: GpSampleObjective,
        noise: NoiseModel,
        rng: ChaCha8Rng,
    },
    External(ExternalObjective),
}

impl RunObjective {
    fn regret_of(&self, config: &ValidConfig) -> Result<(Option<f64>, Option<f64>)> {
        match self {
            RunObjective::Synthetic { obj, .. } => {
                let v = obj.evaluate(config)?;
                Ok((Some(v), Some((v - obj.true_minimum().1).abs())))
            }
            RunObjective::External(_) => Ok((None, None)),
        }
    }
}

impl Objective for RunObjective {
    fn evaluate(&mut self, config: &ValidConfig) -> Result<f64> {
        match self {
            RunObjective::Synthetic { obj, noise, rng } => obj.query(config, *noise, rng),
            RunObjective::External(e) => e.evaluate(config),
        }
    }
}

/// Runs every strategy on every repetition. Failed runs are reported in
/// `failures` and keep the records of the iterations they completed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let space = Arc::new(cfg.source.space());
    let noise = NoiseModel::new(cfg.noise_variance)?;
    let mut outcome = ExperimentOutcome::default();
    for rep in 0..cfg.repetitions {
        let base = match &cfg.source {
            ObjectiveSource::Layout(l) => Some(GpSampleObjective::for_layout(*l, cfg.truth, derive_seed(cfg.seed, rep, 0))?),
            ObjectiveSource::Space { space, grid_density } => Some(GpSampleObjective::new(
                space.clone(),
                cfg.truth,
                *grid_density,
                derive_seed(cfg.seed, rep, 0),
            )?),
            ObjectiveSource::External { .. } => None,
        };
        for &strategy in &cfg.strategies {
            let mut objective = match (&base, &cfg.source) {
                (Some(obj), _) => RunObjective::Synthetic {
                    obj: obj.clone(),
                    noise,
                    rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, rep, 2)),
                },
                (None, ObjectiveSource::External { command, .. }) => {
                    RunObjective::External(ExternalObjective { command: command.clone() })
                }
                (None, _) => unreachable!("synthetic sources build an objective"),
            };
            let mut records = Vec::with_capacity(cfg.iterations);
            let result = run_one(cfg, &space, strategy, rep, &mut objective, &mut records);
            outcome.records.extend(records);
            if let Err(e) = result {
                outcome.failures.push(RunFailure {
                    strategy,
                    repetition: rep,
                    message: e.to_string(),
                });
            }
        }
    }
    let order = |s: StrategyKind| cfg.strategies.iter().position(|x| *x == s);
    outcome
        .records
        .sort_by_key(|r| (order(r.strategy), r.repetition, r.iteration));
    Ok(outcome)
}

fn run_one(
    cfg: &ExperimentConfig,
    space: &Arc<SearchSpace>,
    strategy: StrategyKind,
    rep: usize,
    objective: &mut RunObjective,
    records: &mut Vec<RunRecord>,
) -> Result<()> {
    let run_seed = derive_seed(cfg.seed, rep, 1);
    match strategy {
        StrategyKind::Gp(s) => {
            let mut engine = cfg.engine.clone();
            if !cfg.source.is_external() {
                engine.noiseless = cfg.noise_variance == 0.0;
            }
            let mut state = initialize(space.clone(), s, engine, run_seed, objective)?;
            for iteration in 1..=cfg.iterations {
                let sugg = state.suggest()?;
                let y = objective.evaluate(&sugg.eval_config)?;
                state.tell(&sugg, y)?;
                let recommendation = state.recommend(cfg.recommendation())?;
                let (recommendation_value, regret) = objective.regret_of(&recommendation)?;
                records.push(RunRecord {
                    strategy,
                    repetition: rep,
                    iteration,
                    suggested: Some(sugg.acq_argmax.into_inner()),
                    eval_config: sugg.eval_config,
                    observed_y: y,
                    recommendation,
                    recommendation_value,
                    regret,
                });
            }
        }
        StrategyKind::Tpe | StrategyKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, rep, 3));
            let mut history: Vec<(ValidConfig, f64)> = Vec::new();
            for p in initial_design(space, cfg.engine.n_init, run_seed) {
                let c = space.decode(&p);
                let y = objective.evaluate(&c)?;
                history.push((c, y));
            }
            for iteration in 1..=cfg.iterations {
                let c = if strategy == StrategyKind::Tpe {
                    tpe_suggest(&history, space, &cfg.tpe, &mut rng)?
                } else {
                    random_suggest(space, &mut rng)
                };
                let y = objective.evaluate(&c)?;
                history.push((c.clone(), y));
                let recommendation = best_observed(&history).clone();
                let (recommendation_value, regret) = objective.regret_of(&recommendation)?;
                records.push(RunRecord {
                    strategy,
                    repetition: rep,
                    iteration,
                    suggested: None,
                    eval_config: c,
                    observed_y: y,
                    recommendation,
                    recommendation_value,
                    regret,
                });
            }
        }
    }
    Ok(())
}

/// Configuration with the lowest observation, first one on ties.
///
/// # Panics
///
/// Panics if `history` is empty.
pub fn best_observed(history: &[(ValidConfig, f64)]) -> &ValidConfig {
    let mut best = 0;
    for (i, (_, y)) in history.iter().enumerate() {
        if *y < history[best].1 {
            best = i;
        }
    }
    &history[best].0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub iteration: usize,
    pub mean_log10_regret: f64,
    pub bootstrap_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveSummary {
    pub rows: Vec<SummaryRow>,
}

impl CurveSummary {
    pub fn strategies(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.strategy.as_str()) {
                out.push(&r.strategy);
            }
        }
        out
    }

    pub fn curve(&self, strategy: &str) -> Vec<&SummaryRow> {
        self.rows.iter().filter(|r| r.strategy == strategy).collect()
    }
}

/// `log10(regret + floor)` for every (strategy, iteration, repetition)
/// cell, or the list of missing cells.
struct LogRegretGrid {
    strategies: Vec<StrategyKind>,
    iterations: usize,
    repetitions: usize,
    /// Indexed `[strategy][iteration - 1][repetition]`.
    values: Vec<Vec<Vec<f64>>>,
}

fn log_regret_grid(records: &[RunRecord]) -> Result<LogRegretGrid> {
    let mut strategies: Vec<StrategyKind> = Vec::new();
    let mut cells: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let (mut iterations, mut repetitions) = (0, 0);
    let mut gaps = Vec::new();
    for r in records {
        let s = match strategies.iter().position(|x| *x == r.strategy) {
            Some(i) => i,
            None => {
                strategies.push(r.strategy);
                strategies.len() - 1
            }
        };
        iterations = iterations.max(r.iteration);
        repetitions = repetitions.max(r.repetition + 1);
        match r.regret {
            Some(g) if g >= 0.0 && r.iteration >= 1 => {
                cells.insert((s, r.iteration, r.repetition), (g + REGRET_FLOOR).log10());
            }
            _ => gaps.push(format!("{} rep {} iter {}: no regret", r.strategy, r.repetition, r.iteration)),
        }
    }
    if strategies.is_empty() {
        return Err(Error::IncompleteGrid("no records".into()));
    }
    let mut values = vec![vec![vec![0.0; repetitions]; iterations]; strategies.len()];
    for (s, strat) in strategies.iter().enumerate() {
        for it in 1..=iterations {
            for rep in 0..repetitions {
                match cells.get(&(s, it, rep)) {
                    Some(v) => values[s][it - 1][rep] = *v,
                    None => gaps.push(format!("{strat} rep {rep} iter {it}")),
                }
            }
        }
    }
    if !gaps.is_empty() {
        gaps.dedup();
        return Err(Error::IncompleteGrid(gaps.join(", ")));
    }
    Ok(LogRegretGrid {
        strategies,
        iterations,
        repetitions,
        values,
    })
}

fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn bootstrap_resamples<R: Rng + ?Sized>(n: usize, samples: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..samples)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

/// Mean log10 regret per (strategy, iteration) with the standard deviation
/// of that mean over bootstrap resamples of the repetitions. The same
/// resamples are used for every cell.
pub fn summarize<R: Rng + ?Sized>(records: &[RunRecord], bootstrap_samples: usize, rng: &mut R) -> Result<CurveSummary> {
    let grid = log_regret_grid(records)?;
    let resamples = bootstrap_resamples(grid.repetitions, bootstrap_samples, rng);
    let mut rows = Vec::with_capacity(grid.strategies.len() * grid.iterations);
    for (s, strat) in grid.strategies.iter().enumerate() {
        for it in 0..grid.iterations {
            let v = &grid.values[s][it];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let std = if resamples.is_empty() {
                0.0
            } else {
                let means: Vec<f64> = resamples
                    .iter()
                    .map(|idx| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64)
                    .collect();
                population_std(&means)
            };
            rows.push(SummaryRow {
                strategy: strat.name().to_string(),
                iteration: it + 1,
                mean_log10_regret: mean,
                bootstrap_std: std,
            });
        }
    }
    Ok(CurveSummary { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    /// Mean over repetitions of `log10 regret(a) - log10 regret(b)`.
    pub mean: f64,
    pub bootstrap_std: f64,
}

/// Paired comparison of two strategies at one iteration.
pub fn paired_difference<R: Rng + ?Sized>(
    records: &[RunRecord],
    a: StrategyKind,
    b: StrategyKind,
    iteration: usize,
    bootstrap_samples: usize,
    rng: &mut R,
) -> Result<PairedDifference> {
    let grid = log_regret_grid(records)?;
    let idx = |s: StrategyKind| {
        grid.strategies
            .iter()
            .position(|x| *x == s)
            .ok_or_else(|| Error::IncompleteGrid(format!("no records for {s}")))
    };
    if iteration == 0 || iteration > grid.iterations {
        return Err(Error::IncompleteGrid(format!("no iteration {iteration}")));
    }
    let (ia, ib) = (idx(a)?, idx(b)?);
    let diffs: Vec<f64> = grid.values[ia][iteration - 1]
        .iter()
        .zip(&grid.values[ib][iteration - 1])
        .map(|(x, y)| x - y)
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let resamples = bootstrap_resamples(diffs.len(), bootstrap_samples, rng);
    let bootstrap_std = if resamples.is_empty() {
        0.0
    } else {
        let means: Vec<f64> = resamples
            .iter()
            .map(|idx| idx.iter().map(|&i| diffs[i]).sum::<f64>() / idx.len() as f64)
            .collect();
        population_std(&means)
    };
    Ok(PairedDifference { mean, bootstrap_std })
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_records(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in records {
        w.serialize(CsvRecord::from(r))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<CsvRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_summary(summary: &CurveSummary, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in &summary.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Writes `records.csv`, `summary.csv` and `regret.svg` into `outdir`,
/// creating it if needed, and returns the written paths.
pub fn emit_outputs(summary: &CurveSummary, records: &[RunRecord], outdir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| io_error(outdir, e))?;
    let records_path = outdir.join("records.csv");
    let summary_path = outdir.join("summary.csv");
    let svg_path = outdir.join("regret.svg");
    write_records(records, &records_path)?;
    write_summary(summary, &summary_path)?;
    fs::write(&svg_path, regret_svg(summary)).map_err(|e| io_error(&svg_path, e))?;
    Ok(vec![records_path, summary_path, svg_path])
}

/// Observation columns of a history file; other columns are ignored.
#[derive(Debug, Clone, Deserialize)]
struct HistoryRow {
    eval_config_json: String,
    observed_y: f64,
}

/// Reads `(config, y)` pairs from any CSV with `eval_config_json` and
/// `observed_y` columns, such as `records.csv`.
pub fn read_history(path: &Path) -> Result<Vec<(ValidConfig, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<HistoryRow>()
        .map(|row| {
            let row = row?;
            Ok((ValidConfig::from_json(&row.eval_config_json)?, row.observed_y))
        })
        .collect()
}

/// Next configuration to evaluate given past observations. The first
/// `engine.n_init` calls return the initial design.
pub fn suggest_next(
    space: &Arc<SearchSpace>,
    history: &[(ValidConfig, f64)],
    strategy: StrategyKind,
    engine: &EngineConfig,
    tpe: &TpeConfig,
    seed: u64,
) -> Result<ValidConfig> {
    for (c, y) in history {
        space.encode(c)?;
        if !y.is_finite() {
            return Err(Error::InvalidObservation(*y));
        }
    }
    if history.len() < engine.n_init {
        let design = initial_design(space, engine.n_init, seed);
        return Ok(space.decode(&design[history.len()]));
    }
    match strategy {
        StrategyKind::Gp(s) => {
            let mut state = crate::bo_engine::BoState::new(space.clone(), s, engine.clone(), seed)?;
            for (c, y) in history {
                let x = space.encode(c)?;
                let sugg = crate::bo_engine::Suggestion {
                    acq_argmax: x.clone(),
                    eval_config: c.clone(),
                    stored_input: x,
                };
                state.tell(&sugg, *y)?;
            }
            Ok(state.suggest()?.eval_config)
        }
        StrategyKind::Tpe | StrategyKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, history.len(), 3));
            if strategy == StrategyKind::Tpe {
                tpe_suggest(history, space, tpe, &mut rng)
            } else {
                Ok(random_suggest(space, &mut rng))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::Value;

    fn record(strategy: StrategyKind, repetition: usize, iteration: usize, regret: f64) -> RunRecord {
        RunRecord {
            strategy,
            repetition,
            iteration,
            suggested: None,
            eval_config: ValidConfig(vec![Value::Integer(1)]),
            observed_y: 0.5,
            recommendation: ValidConfig(vec![Value::Integer(1)]),
            recommendation_value: None,
            regret: Some(regret),
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in ["naive", "basic", "proposed", "tpe", "random"] {
            assert_eq!(s.parse::<StrategyKind>().unwrap().name(), s);
        }
        assert_eq!(
            parse_strategies("basic, proposed,tpe").unwrap(),
            [StrategyKind::Gp(Strategy::Basic), StrategyKind::Gp(Strategy::Proposed), StrategyKind::Tpe]
        );
        assert!(parse_strategies("smac").is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(ObjectiveSource::Layout(Layout::TwoDInteger), vec![StrategyKind::Random]);
        assert!(cfg.validate().is_ok());
        cfg.iterations = 0;
        assert!(cfg.validate().is_err());
        cfg.iterations = 1;
        cfg.strategies = vec![StrategyKind::Tpe, StrategyKind::Tpe];
        assert!(cfg.validate().is_err());
        cfg.strategies.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..4).flat_map(|rep| (0..4).map(move |role| derive_seed(42, rep, role))).collect();
        for i in 0..seeds.len() {
            for j in 0..i {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }

    #[test]
    fn grid_density_respects_cap() {
        let s = crate::synthetic::make_experiment_space(Layout::TwoDInteger);
        assert_eq!(default_grid_density(&s), 200);
        let s = SearchSpace::new(vec![
            Dimension::real(0.0, 1.0),
            Dimension::real(0.0, 1.0),
            Dimension::real(0.0, 1.0),
            Dimension::integer(0, 4),
        ])
        .unwrap();
        assert_eq!(default_grid_density(&s), 58);
    }

    #[test]
    fn constant_regret_summary() {
        let recs: Vec<RunRecord> = (0..4).flat_map(|rep| (1..=3).map(move |it| record(StrategyKind::Random, rep, it, 0.25))).collect();
        let s = summarize(&recs, 50, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.rows.len(), 3);
        for r in &s.rows {
            assert!((r.mean_log10_regret - (0.25f64 + REGRET_FLOOR).log10()).abs() < 1e-12);
            assert!(r.bootstrap_std.abs() < 1e-12);
        }
    }

    #[test]
    fn single_repetition_has_zero_std() {
        let recs = vec![record(StrategyKind::Tpe, 0, 1, 0.3), record(StrategyKind::Tpe, 0, 2, 0.01)];
        let s = summarize(&recs, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(s.rows.iter().all(|r| r.bootstrap_std.abs() < 1e-12));
    }

    #[test]
    fn zero_regret_uses_floor() {
        let s = summarize(&[record(StrategyKind::Tpe, 0, 1, 0.0)], 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s.rows[0].mean_log10_regret, -8.0);
    }

    #[test]
    fn two_point_bootstrap_matches_enumeration() {
        let recs = vec![record(StrategyKind::Random, 0, 1, 0.1), record(StrategyKind::Random, 1, 1, 1.0)];
        // the four equally likely resamples have means a, (a+b)/2, (a+b)/2, b
        let a = (0.1f64 + REGRET_FLOOR).log10();
        let b = (1.0f64 + REGRET_FLOOR).log10();
        let means = [a, 0.5 * (a + b), 0.5 * (a + b), b];
        let exact = population_std(&means);
        let s = summarize(&recs, 10_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!((s.rows[0].bootstrap_std - exact).abs() <= 0.05 * exact);
    }

    #[test]
    fn missing_cells_are_listed() {
        let recs = vec![
            record(StrategyKind::Random, 0, 1, 0.1),
            record(StrategyKind::Random, 0, 2, 0.1),
            record(StrategyKind::Random, 1, 1, 0.1),
        ];
        match summarize(&recs, 10, &mut ChaCha8Rng::seed_from_u64(0)) {
            Err(Error::IncompleteGrid(msg)) => assert!(msg.contains("random rep 1 iter 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn paired_difference_of_identical_runs_is_zero() {
        let mut recs = Vec::new();
        for rep in 0..5 {
            recs.push(record(StrategyKind::Tpe, rep, 1, 0.1 * (rep + 1) as f64));
            recs.push(record(StrategyKind::Random, rep, 1, 0.1 * (rep + 1) as f64));
        }
        let d = paired_difference(&recs, StrategyKind::Tpe, StrategyKind::Random, 1, 100, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(d.mean, 0.0);
        assert_eq!(d.bootstrap_std, 0.0);
    }

    #[test]
    fn best_observed_takes_first_minimum() {
        let h = vec![
            (ValidConfig(vec![Value::Integer(0)]), 1.0),
            (ValidConfig(vec![Value::Integer(1)]), -1.0),
            (ValidConfig(vec![Value::Integer(2)]), -1.0),
        ];
        assert_eq!(best_observed(&h), &h[1].0);
    }

    #[test]
    fn external_objective_round_trip() {
        let mut obj = ExternalObjective {
            command: "read line; echo 2.5".into(),
        };
        assert_eq!(obj.evaluate(&ValidConfig(vec![Value::Integer(3)])).unwrap(), 2.5);
        let mut bad = ExternalObjective { command: "echo nope".into() };
        assert!(matches!(bad.evaluate(&ValidConfig(vec![])), Err(Error::Objective { .. })));
        let mut failing = ExternalObjective { command: "exit 3".into() };
        assert!(failing.evaluate(&ValidConfig(vec![])).is_err());
    }

    #[test]
    fn small_experiment_counts_and_pairing() {
        let mut cfg = ExperimentConfig::new(
            ObjectiveSource::Layout(Layout::TwoDInteger),
            vec![StrategyKind::Gp(Strategy::Basic), StrategyKind::Gp(Strategy::Proposed)],
        );
        cfg.iterations = 5;
        cfg.repetitions = 2;
        cfg.seed = 7;
        cfg.engine.budget = crate::acquisition::OptBudget { n_random: 100, n_starts: 2, tol: 1e-3 };
        cfg.engine.burn_in = 10;
        cfg.engine.hyper_samples = 3;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert_eq!(out.records.len(), 20);
        assert!(out.records.iter().all(|r| r.regret.unwrap() >= 0.0));
        assert!(out.records.iter().all(|r| (1..=5).contains(&r.iteration)));
    }

    #[test]
    fn random_regret_is_monotone_under_best_observed() {
        let mut cfg = ExperimentConfig::new(ObjectiveSource::Layout(Layout::TwoDCategorical), vec![StrategyKind::Random]);
        cfg.iterations = 40;
        cfg.repetitions = 5;
        let out = run_experiment(&cfg).unwrap();
        for rep in 0..5 {
            let regrets: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.repetition == rep)
                .map(|r| r.regret.unwrap())
                .collect();
            assert!(regrets.windows(2).all(|w| w[1] <= w[0]), "{regrets:?}");
        }
    }
}
