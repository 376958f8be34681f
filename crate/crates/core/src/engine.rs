//! The Monte Carlo experiment.
//!
//! Generators are fitted once on the real sample. Every (generator,
//! iteration) cell then draws a population, evaluates the true
//! characteristics, refits each strategy on the simulated sample block and
//! records the PLUG-IN prediction errors. Cells are independent and each
//! owns a random stream derived from the master seed and its indices, so the
//! result does not depend on how cells are scheduled.

use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accuracy::{
    build_accuracy_matrix, AccuracyMatrix, AxisNames, CellErrors, EffectiveIterations, ErrorTensor,
    MeasureSpec, TensorDims,
};
use crate::dataset::{ColumnSchema, StudyFrame};
use crate::error::{Result, WaspError};
use crate::generator::{BandwidthRule, PreparedGenerator};
use crate::matrix::RowLabel;
use crate::prediction::{plug_in_predict, Characteristic, PredictionStrategy};
use crate::voting::{hold_election, Election, VotingSystem};
use crate::zoo::{self, ModelSpec};

/// A data-generation model with a display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    pub model: ModelSpec,
}

impl GeneratorSpec {
    pub fn new(name: &str, model: ModelSpec) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            model,
        }
    }
}

fn default_iterations() -> usize {
    5000
}

fn default_failure_ceiling() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// How to read the input table. Only needed when loading from CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<ColumnSchema>,
    pub generators: Vec<GeneratorSpec>,
    pub strategies: Vec<PredictionStrategy>,
    pub characteristics: Vec<Characteristic>,
    pub measures: Vec<MeasureSpec>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Largest tolerated share of failed strategy fits.
    #[serde(default = "default_failure_ceiling")]
    pub failure_ceiling: f64,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
}

fn unique<'a>(what: &str, names: impl Iterator<Item = &'a String>) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if name.is_empty() {
            return Err(WaspError::Config(format!("{what} names must be nonempty")));
        }
        if !seen.insert(name) {
            return Err(WaspError::Config(format!("duplicate {what} name `{name}`")));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(WaspError::Config("at least one generator is required".into()));
        }
        if self.strategies.len() < 2 {
            return Err(WaspError::Config("at least two strategies are required".into()));
        }
        if self.characteristics.is_empty() {
            return Err(WaspError::Config("at least one characteristic is required".into()));
        }
        if self.measures.is_empty() {
            return Err(WaspError::Config("at least one accuracy measure is required".into()));
        }
        if self.iterations < 2 {
            return Err(WaspError::Config(format!(
                "iterations must be at least 2, got {}",
                self.iterations
            )));
        }
        if self.iterations > u32::MAX as usize || self.generators.len() > u32::MAX as usize {
            return Err(WaspError::Config("too many iterations or generators".into()));
        }
        if self.workers == Some(0) {
            return Err(WaspError::Config("workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_ceiling) {
            return Err(WaspError::Config(format!(
                "failure_ceiling must lie in [0, 1], got {}",
                self.failure_ceiling
            )));
        }
        if let BandwidthRule::Fixed { bandwidth } = self.bandwidth {
            if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(WaspError::Config(format!("fixed bandwidth must be positive, got {bandwidth}")));
            }
        }
        unique("generator", self.generators.iter().map(|g| &g.name))?;
        unique("strategy", self.strategies.iter().map(|s| &s.name))?;
        unique("characteristic", self.characteristics.iter().map(|c| &c.name))?;
        let labels: Vec<String> = self.measures.iter().map(MeasureSpec::label).collect();
        unique("measure", labels.iter())?;
        for g in &self.generators {
            g.model.validate()?;
        }
        for s in &self.strategies {
            s.model.validate()?;
        }
        for c in &self.characteristics {
            c.validate()?;
        }
        for m in &self.measures {
            m.validate()?;
        }
        Ok(())
    }

    pub fn axis_names(&self) -> AxisNames {
        AxisNames {
            generators: self.generators.iter().map(|g| g.name.clone()).collect(),
            characteristics: self.characteristics.iter().map(|c| c.name.clone()).collect(),
            strategies: self.strategies.iter().map(|s| s.name.clone()).collect(),
        }
    }
}

/// The random stream of cell `(g, b)`.
///
/// All cells share the key derived from `master_seed` and differ in the
/// ChaCha stream id `(g << 32) | b`, so distinct cells never share a
/// keystream. Any single cell can be replayed in isolation.
pub fn derive_stream(master_seed: u64, g: usize, b: usize) -> ChaCha8Rng {
    debug_assert!(g <= u32::MAX as usize && b <= u32::MAX as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((g as u64) << 32) | b as u64);
    rng
}

/// Fits every generator on the real sample and precomputes what it needs
/// to draw populations.
pub fn prepare_generators(config: &RunConfig, frame: &StudyFrame) -> Result<Vec<PreparedGenerator>> {
    let x_full = frame.x_full();
    config
        .generators
        .iter()
        .map(|g| {
            zoo::fit(&g.model, frame.x_sample(), frame.y_sample())
                .and_then(|fitted| PreparedGenerator::from_model(&fitted, &x_full, config.bandwidth))
                .map_err(|e| WaspError::GeneratorFit {
                    generator: g.name.clone(),
                    source: Box::new(e),
                })
        })
        .collect()
}

struct Experiment<'a> {
    config: &'a RunConfig,
    frame: &'a StudyFrame,
    generators: Vec<PreparedGenerator>,
}

impl Experiment<'_> {
    fn cell(&self, g: usize, b: usize) -> CellErrors {
        let (c_n, p_n) = (self.config.characteristics.len(), self.config.strategies.len());
        let mut errors = vec![f64::NAN; c_n * p_n];
        let mut failed = vec![true; p_n];

        let mut rng = derive_stream(self.config.master_seed, g, b);
        let y_full = self.generators[g].draw(&mut rng);
        if y_full.iter().any(|v| !v.is_finite()) {
            log::debug!("cell ({g}, {b}): generated population is not finite");
            return CellErrors { errors, failed };
        }
        let truth: Vec<f64> = self.config.characteristics.iter().map(|c| c.eval(&y_full)).collect();
        let y_s = &y_full[..self.frame.n()];

        for (p, strategy) in self.config.strategies.iter().enumerate() {
            match plug_in_predict(strategy, self.frame, y_s, &self.config.characteristics) {
                Ok(predicted) => {
                    for c in 0..c_n {
                        errors[c * p_n + p] = predicted[c] - truth[c];
                    }
                    failed[p] = false;
                }
                Err(e) => log::debug!("cell ({g}, {b}): {e}"),
            }
        }
        CellErrors { errors, failed }
    }

    fn cells_sequential(&self) -> Vec<CellErrors> {
        let b_n = self.config.iterations;
        (0..self.generators.len() * b_n).map(|i| self.cell(i / b_n, i % b_n)).collect()
    }

    #[cfg(feature = "parallel")]
    fn cells(&self) -> Result<Vec<CellErrors>> {
        use rayon::prelude::*;

        if self.config.workers == Some(1) {
            return Ok(self.cells_sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.unwrap_or(0))
            .build()
            .map_err(|e| WaspError::Config(format!("cannot start worker pool: {e}")))?;
        let b_n = self.config.iterations;
        Ok(pool.install(|| {
            (0..self.generators.len() * b_n)
                .into_par_iter()
                .map(|i| self.cell(i / b_n, i % b_n))
                .collect()
        }))
    }

    #[cfg(not(feature = "parallel"))]
    fn cells(&self) -> Result<Vec<CellErrors>> {
        Ok(self.cells_sequential())
    }
}

/// Runs the Monte Carlo loop and returns the error tensor.
pub fn simulate(config: &RunConfig, frame: &StudyFrame) -> Result<ErrorTensor> {
    config.validate()?;
    let experiment = Experiment {
        config,
        frame,
        generators: prepare_generators(config, frame)?,
    };
    let dims = TensorDims {
        generators: config.generators.len(),
        iterations: config.iterations,
        characteristics: config.characteristics.len(),
        strategies: config.strategies.len(),
    };
    ErrorTensor::from_cells(dims, experiment.cells()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalPrediction {
    pub strategy: String,
    pub elected_by: Vec<VotingSystem>,
    /// `(characteristic, predicted value)` on the real sample.
    pub predictions: Vec<(String, f64)>,
}

/// A winner's accuracy under every scenario of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerAccuracy {
    pub strategy: String,
    pub rows: Vec<(RowLabel, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub master_seed: u64,
    pub iterations: usize,
    pub effective_iterations: Vec<EffectiveIterations>,
    pub failure_rate: f64,
    pub wall_time_seconds: f64,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tensor: ErrorTensor,
    pub accuracy: AccuracyMatrix,
    pub election: Election,
    pub final_predictions: Vec<FinalPrediction>,
    pub winner_accuracy: Vec<WinnerAccuracy>,
    pub metadata: RunMetadata,
}

pub fn run(config: &RunConfig, frame: &StudyFrame) -> Result<RunOutput> {
    let started = Instant::now();
    let tensor = simulate(config, frame)?;

    let failure_rate = tensor.failure_rate();
    if failure_rate > config.failure_ceiling {
        return Err(WaspError::FailureCeiling {
            rate: failure_rate,
            ceiling: config.failure_ceiling,
        });
    }
    if failure_rate > 0.0 {
        log::warn!(
            "{} of {} strategy fits failed and were masked",
            tensor.failure_count(),
            config.generators.len() * config.iterations * config.strategies.len()
        );
    }

    let accuracy = build_accuracy_matrix(&tensor, &config.measures, &config.axis_names())?;
    let election = hold_election(&accuracy)?;

    let mut final_predictions = Vec::new();
    let mut winner_accuracy = Vec::new();
    for name in election.all_winners() {
        let p = config
            .strategies
            .iter()
            .position(|s| s.name == name)
            .expect("winners are configured strategies");
        let values = plug_in_predict(
            &config.strategies[p],
            frame,
            frame.y_sample(),
            &config.characteristics,
        )?;
        final_predictions.push(FinalPrediction {
            strategy: name.clone(),
            elected_by: election
                .selections
                .iter()
                .filter(|s| s.winners.contains(&name))
                .map(|s| s.system)
                .collect(),
            predictions: config
                .characteristics
                .iter()
                .map(|c| c.name.clone())
                .zip(values)
                .collect(),
        });
        winner_accuracy.push(WinnerAccuracy {
            strategy: name,
            rows: accuracy
                .values
                .row_labels()
                .iter()
                .cloned()
                .zip(accuracy.values.column(p))
                .collect(),
        });
    }

    let metadata = RunMetadata {
        master_seed: config.master_seed,
        iterations: config.iterations,
        effective_iterations: accuracy.effective_iterations.clone(),
        failure_rate,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(RunOutput {
        tensor,
        accuracy,
        election,
        final_predictions,
        winner_accuracy,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn noiseless_frame() -> StudyFrame {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        StudyFrame::new(
            DMatrix::from_column_slice(30, 1, &x),
            y,
            DMatrix::from_column_slice(3, 1, &[20.0, 21.0, 22.0]),
            vec!["x".into()],
        )
        .unwrap()
    }

    fn noisy_frame() -> StudyFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.8 * v + rng.random_range(-2.0..2.0)).collect();
        StudyFrame::new(
            DMatrix::from_column_slice(n, 1, &x),
            y,
            DMatrix::from_column_slice(4, 1, &[1.0, 4.0, 7.0, 9.5]),
            vec!["x".into()],
        )
        .unwrap()
    }

    fn config(strategies: Vec<PredictionStrategy>, iterations: usize) -> RunConfig {
        RunConfig {
            schema: None,
            generators: vec![
                GeneratorSpec::new("ols", ModelSpec::ols()),
                GeneratorSpec::new("tree", ModelSpec::tree(3, 5)),
            ],
            strategies,
            characteristics: vec![Characteristic::total(), Characteristic::median()],
            measures: vec![MeasureSpec::Rmse, MeasureSpec::Qape { p: 0.5 }],
            iterations,
            master_seed: 2024,
            workers: None,
            failure_ceiling: 0.01,
            bandwidth: BandwidthRule::Silverman,
        }
    }

    fn two_strategies() -> Vec<PredictionStrategy> {
        vec![
            PredictionStrategy::plug_in("ols", ModelSpec::ols()),
            PredictionStrategy::plug_in("mean", ModelSpec::intercept_only()),
        ]
    }

    #[test]
    fn streams_are_distinct_and_replayable() {
        let first = |g, b| derive_stream(7, g, b).random::<u64>();
        assert_ne!(first(1, 1), first(1, 2));
        assert_ne!(first(1, 2), first(2, 1));
        assert_ne!(derive_stream(7, 0, 0).random::<u64>(), derive_stream(8, 0, 0).random::<u64>());
        let a: Vec<f64> = (0..5).map(|_| 0.0).scan(derive_stream(7, 3, 4), |r, _| Some(r.random())).collect();
        let b: Vec<f64> = (0..5).map(|_| 0.0).scan(derive_stream(7, 3, 4), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let ok = config(two_strategies(), 10);
        assert!(ok.validate().is_ok());

        let mut bad = ok.clone();
        bad.strategies.truncate(1);
        assert!(matches!(bad.validate(), Err(WaspError::Config(m)) if m.contains("two strategies")));

        let mut bad = ok.clone();
        bad.iterations = 1;
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.strategies[1].name = "ols".into();
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.characteristics.clear();
        assert!(bad.validate().is_err());

        let mut bad = ok;
        bad.measures = vec![MeasureSpec::Qape { p: 1.5 }];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let text = r#"{
            "generators": [{"name": "m1", "model": {"family": "ols_normal"}}],
            "strategies": [
                {"name": "a", "model": {"family": "ols_normal"}},
                {"name": "b", "model": {"family": "knn", "k_neighbors": 3}}
            ],
            "characteristics": [{"name": "total", "kind": "total"}],
            "measures": [{"kind": "rmse"}, {"kind": "qape", "p": 0.95}]
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.iterations, 5000);
        assert_eq!(cfg.failure_ceiling, 0.01);
        assert_eq!(cfg.workers, None);
        assert_eq!(cfg.strategies[1].model, ModelSpec::knn(3));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn noiseless_data_elects_ols_everywhere() {
        let frame = noiseless_frame();
        let mut cfg = config(two_strategies(), 50);
        cfg.generators = vec![GeneratorSpec::new("ols", ModelSpec::ols())];
        cfg.characteristics = vec![Characteristic::total()];
        cfg.measures = vec![MeasureSpec::Rmse];
        let out = run(&cfg, &frame).unwrap();
        assert!(out.accuracy.values.get(0, 0) < 1e-9);
        assert!(out.accuracy.values.get(0, 1) > 1.0);
        for s in &out.election.selections {
            assert_eq!(s.winners, vec!["ols"], "{:?}", s.system);
        }
        assert_eq!(out.final_predictions.len(), 1);
        let total: f64 = frame.y_sample().iter().sum::<f64>() + 3.0 * 2.0 + 3.0 * (20.0 + 21.0 + 22.0);
        assert!((out.final_predictions[0].predictions[0].1 - total).abs() < 1e-8);
    }

    /// Straight-line reference loop sharing only the stream derivation.
    fn reference_errors(cfg: &RunConfig, frame: &StudyFrame) -> Vec<f64> {
        let x_full = frame.x_full();
        let n = frame.n();
        let mut out = Vec::new();
        for (g, gen) in cfg.generators.iter().enumerate() {
            let fitted = zoo::fit(&gen.model, frame.x_sample(), frame.y_sample()).unwrap();
            let prepared = PreparedGenerator::from_model(&fitted, &x_full, cfg.bandwidth).unwrap();
            for b in 0..cfg.iterations {
                let y = prepared.draw(&mut derive_stream(cfg.master_seed, g, b));
                for c in &cfg.characteristics {
                    let truth = c.eval(&y);
                    for s in &cfg.strategies {
                        let model = zoo::fit(&s.model, frame.x_sample(), &y[..n]).unwrap();
                        let mut composite = y[..n].to_vec();
                        composite.extend(model.predict(frame.x_out()).unwrap());
                        out.push(c.eval(&composite) - truth);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn engine_matches_reference_loop() {
        let frame = noisy_frame();
        let cfg = config(two_strategies(), 200);
        let tensor = simulate(&cfg, &frame).unwrap();
        let d = tensor.dims();
        let mut engine = Vec::new();
        for g in 0..d.generators {
            for b in 0..d.iterations {
                for c in 0..d.characteristics {
                    for p in 0..d.strategies {
                        engine.push(tensor.get(g, b, c, p));
                    }
                }
            }
        }
        assert_eq!(engine, reference_errors(&cfg, &frame));
    }

    #[test]
    fn adding_a_strategy_keeps_existing_errors() {
        let frame = noisy_frame();
        let small = simulate(&config(two_strategies(), 20), &frame).unwrap();
        let mut more = two_strategies();
        more.insert(1, PredictionStrategy::plug_in("knn", ModelSpec::knn(5)));
        let large = simulate(&config(more, 20), &frame).unwrap();
        for g in 0..2 {
            for b in 0..20 {
                for c in 0..2 {
                    assert_eq!(small.get(g, b, c, 0), large.get(g, b, c, 0));
                    assert_eq!(small.get(g, b, c, 1), large.get(g, b, c, 2));
                }
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let frame = noisy_frame();
        let mut cfg = config(two_strategies(), 40);
        cfg.workers = Some(1);
        let one = run(&cfg, &frame).unwrap();
        cfg.workers = Some(4);
        let four = run(&cfg, &frame).unwrap();
        assert_eq!(one.tensor, four.tensor);
        assert_eq!(one.accuracy.values.to_csv_string(), four.accuracy.values.to_csv_string());
    }

    #[test]
    fn failures_beyond_ceiling_are_fatal() {
        // A gamma strategy cannot fit the negative responses the ols
        // generator produces around zero.
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| if (*v as i32) % 2 == 0 { 0.5 } else { 1.5 }).collect();
        let frame = StudyFrame::new(
            DMatrix::from_column_slice(20, 1, &x),
            y,
            DMatrix::from_column_slice(1, 1, &[3.0]),
            vec!["x".into()],
        )
        .unwrap();
        let mut cfg = config(
            vec![
                PredictionStrategy::plug_in("ols", ModelSpec::ols()),
                PredictionStrategy::plug_in("gamma", ModelSpec::gamma()),
            ],
            30,
        );
        cfg.generators.truncate(1);
        let err = run(&cfg, &frame).unwrap_err();
        assert!(matches!(err, WaspError::FailureCeiling { .. }), "{err}");

        cfg.failure_ceiling = 1.0;
        match run(&cfg, &frame) {
            Ok(out) => assert!(out.metadata.failure_rate > 0.0),
            Err(e) => assert!(matches!(e, WaspError::Assembly { .. }), "{e}"),
        }
    }

    #[test]
    fn generator_fit_failure_names_the_generator() {
        let frame = noisy_frame();
        let mut cfg = config(two_strategies(), 5);
        cfg.generators.push(GeneratorSpec::new("bad-gamma", ModelSpec::gamma()));
        let mut y = frame.y_sample().to_vec();
        y[0] = -1.0;
        let frame = StudyFrame::new(frame.x_sample().clone(), y, frame.x_out().clone(), vec!["x".into()]).unwrap();
        let err = run(&cfg, &frame).unwrap_err();
        assert!(matches!(err, WaspError::GeneratorFit { ref generator, .. } if generator == "bad-gamma"));
    }
}
