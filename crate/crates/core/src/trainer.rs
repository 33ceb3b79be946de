//! Training loop: batching, corruption, gradient steps and validation.

use std::io::{self, Write};
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{FilterIndex, Triple, TripleStore};
use crate::evaluator::{evaluate, MetricsReport};
use crate::gradients::{loss_gradients, Batch, GradientSet, LossSettings, Regularization};
use crate::householder::{norm, DEGENERATE_NORM};
use crate::model::{fill_gaussian_nondegenerate, HouseModel, ModelError, ParamKind, Side};
use crate::optimizer::{AdamConfig, OptimizerState};
use crate::sampling::sample_negatives;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite gradient at step {step}")]
    NonFinite { step: u64 },
    #[error("dataset has no training triples")]
    NoTrainingData,
    #[error("dataset does not fit the model: {0}")]
    DataMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Positives per batch.
    pub b: usize,
    /// Negatives per positive.
    pub l: usize,
    /// Temperature of the negative weighting.
    pub alpha: f64,
    pub gamma: f64,
    pub lr: f64,
    pub lambda: f64,
    pub max_steps: u64,
    /// Validation interval in steps; 0 disables periodic validation.
    pub valid_every: u64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Halve the learning rate once after this many evaluations without a
    /// better validation MRR; 0 disables.
    pub halve_after: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            b: 64,
            l: 16,
            alpha: 1.0,
            gamma: 6.0,
            lr: 0.01,
            lambda: 0.0,
            max_steps: 2000,
            valid_every: 500,
            seed: 0,
            adam: AdamConfig::default(),
            halve_after: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if self.b < 1 {
            return bad("batch size must be >= 1");
        }
        if self.l < 1 {
            return bad("negatives per positive must be >= 1");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be > 0");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be > 0");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        if !self.alpha.is_finite() {
            return bad("alpha must be finite");
        }
        Ok(())
    }

    pub fn loss_settings(&self) -> LossSettings {
        LossSettings {
            gamma: self.gamma,
            alpha: self.alpha,
            lambda: self.lambda,
            regularization: Regularization::Decoupled,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    /// Mean batch loss since the previous entry (without the regularizer).
    pub loss: f64,
    pub valid: Option<MetricsReport>,
    pub seconds: f64,
}

pub const LOG_HEADER: &str = "step\tloss\tMR\tMRR\tH@1\tH@3\tH@10\tseconds";

impl LogEntry {
    pub fn tsv(&self) -> String {
        let metrics = match &self.valid {
            Some(m) => format!("{:.4}\t{:.6}\t{:.6}\t{:.6}\t{:.6}", m.mr, m.mrr, m.hits1, m.hits3, m.hits10),
            None => "-\t-\t-\t-\t-".to_string(),
        };
        format!("{}\t{:.6}\t{}\t{:.3}", self.step, self.loss, metrics, self.seconds)
    }
}

pub fn write_log<W: Write>(out: &mut W, log: &[LogEntry]) -> io::Result<()> {
    writeln!(out, "{LOG_HEADER}")?;
    for e in log {
        writeln!(out, "{}", e.tsv())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation MRR, or the final ones when no
    /// validation ran.
    pub model: HouseModel,
    pub log: Vec<LogEntry>,
    /// Loss of every step, in order.
    pub losses: Vec<f64>,
    pub best_step: u64,
    pub best_valid: Option<MetricsReport>,
    pub steps_run: u64,
}

/// Cycles through shuffled training triples and pairs each with negatives.
pub struct BatchSampler<'a> {
    train: &'a [Triple],
    order: Vec<usize>,
    cursor: usize,
    /// Positives drawn so far; even counts corrupt the tail, odd the head.
    drawn: u64,
    known: &'a FilterIndex,
    num_entities: usize,
    rng: ChaCha8Rng,
}

impl<'a> BatchSampler<'a> {
    pub fn new(train: &'a [Triple], known: &'a FilterIndex, num_entities: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { train, order: (0..train.len()).collect(), cursor: train.len(), drawn: 0, known, num_entities, rng }
    }

    pub fn next_batch(&mut self, b: usize, l: usize) -> Batch {
        let mut positives = Vec::with_capacity(b);
        let mut negatives = Vec::with_capacity(b * l);
        for _ in 0..b {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            let t = self.train[self.order[self.cursor]];
            self.cursor += 1;
            let side = if self.drawn % 2 == 0 { Side::Tail } else { Side::Head };
            self.drawn += 1;
            positives.push(t);
            negatives.extend(sample_negatives(t, l, side, &mut self.rng, self.known, self.num_entities));
        }
        Batch { positives, negatives, negatives_per_positive: l }
    }
}

/// Redraws any reflection vector or axis whose norm fell below the
/// degeneracy threshold. Returns how many were replaced.
fn repair_degenerate(model: &mut HouseModel, grads: &GradientSet, rng: &mut ChaCha8Rng) -> usize {
    let k = model.config().k;
    let mut fixed = 0;
    for kind in [ParamKind::Rotation, ParamKind::HeadAxis, ParamKind::TailAxis] {
        for r in grads.touched(kind) {
            for chunk in model.table_mut(kind).row_mut(r).chunks_exact_mut(k) {
                if norm(chunk) < DEGENERATE_NORM {
                    fill_gaussian_nondegenerate(chunk, k, rng);
                    fixed += 1;
                }
            }
        }
    }
    fixed
}

fn check_store(model: &HouseModel, store: &TripleStore) -> Result<(), TrainError> {
    let cfg = model.config();
    if store.num_entities > cfg.num_entities || store.num_relations > cfg.num_relations {
        return Err(TrainError::DataMismatch(format!(
            "data has {} entities / {} relations, model has {} / {}",
            store.num_entities, store.num_relations, cfg.num_entities, cfg.num_relations
        )));
    }
    Ok(())
}

/// Trains `model` on `store.train`, validating on `store.valid` with
/// filtering by `filter` every `valid_every` steps and after the last step.
///
/// Gradients use the current rayon pool; everything else is sequential, so a
/// one-thread pool gives bitwise-repeatable runs.
pub fn train(
    mut model: HouseModel,
    store: &TripleStore,
    filter: &FilterIndex,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    check_store(&model, store)?;
    let start = Instant::now();
    let mut log = Vec::new();
    let mut losses = Vec::new();
    if config.max_steps == 0 {
        return Ok(TrainOutcome { model, log, losses, best_step: 0, best_valid: None, steps_run: 0 });
    }
    if store.train.is_empty() {
        return Err(TrainError::NoTrainingData);
    }

    let train_index = FilterIndex::from_triples(&store.train);
    let num_entities = model.config().num_entities;
    let mut sampler = BatchSampler::new(&store.train, &train_index, num_entities, config.seed);
    let mut repair_rng = ChaCha8Rng::seed_from_u64(config.seed);
    repair_rng.set_stream(2);
    let mut state = OptimizerState::new(&model, config.adam, config.lambda);
    let mut settings = config.loss_settings();
    settings.regularization = Regularization::Decoupled;

    let mut lr = config.lr;
    let mut halved = false;
    let mut stalls = 0usize;
    let mut best: Option<(u64, MetricsReport, HouseModel)> = None;
    let mut window = (0.0, 0u64);

    for step in 1..=config.max_steps {
        let batch = sampler.next_batch(config.b, config.l);
        let entities = batch.positives.iter().chain(&batch.negatives).flat_map(|t| [t.head, t.tail]);
        state.catch_up(&mut model, entities);
        let (loss, grads) = loss_gradients(&batch, &model, &settings)?;
        if !grads.is_finite() || !loss.is_finite() {
            return Err(TrainError::NonFinite { step });
        }
        state.adam_step(&mut model, &grads, lr);
        let repaired = repair_degenerate(&mut model, &grads, &mut repair_rng);
        if repaired > 0 {
            warn!("step {step}: redrew {repaired} degenerate vectors");
        }
        losses.push(loss);
        window.0 += loss;
        window.1 += 1;

        let periodic = config.valid_every > 0 && step % config.valid_every == 0;
        if periodic || step == config.max_steps {
            state.flush(&mut model);
            let valid = if store.valid.is_empty() { None } else { Some(evaluate(&model, &store.valid, filter)?) };
            let entry = LogEntry { step, loss: window.0 / window.1 as f64, valid, seconds: start.elapsed().as_secs_f64() };
            info!("{}", entry.tsv());
            log.push(entry);
            window = (0.0, 0);
            if let Some(v) = valid {
                if best.as_ref().is_none_or(|(_, b, _)| v.mrr > b.mrr) {
                    best = Some((step, v, model.clone()));
                    stalls = 0;
                } else {
                    stalls += 1;
                    if config.halve_after > 0 && stalls >= config.halve_after && !halved {
                        lr *= 0.5;
                        halved = true;
                        info!("step {step}: validation stalled, learning rate now {lr}");
                    }
                }
            }
        }
    }
    state.flush(&mut model);
    let steps_run = config.max_steps;
    Ok(match best {
        Some((best_step, v, best_model)) => {
            TrainOutcome { model: best_model, log, losses, best_step, best_valid: Some(v), steps_run }
        }
        None => TrainOutcome { model, log, losses, best_step: steps_run, best_valid: None, steps_run },
    })
}
