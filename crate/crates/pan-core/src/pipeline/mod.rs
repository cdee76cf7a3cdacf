//! Training loop, evaluation, and the noise-rate comparison experiment.
//!
//! Training updates after every bag (the bag is the unit the loss is defined
//! over), shuffling bag order each epoch with a seeded generator. Evaluation
//! has two faces: `evaluate` scores single-sentence test mentions — where
//! every attention mode collapses to the same representation — and
//! `evaluate_bags` measures how well the model fits whole training bags
//! using the same per-type attention assembly as the loss.

pub mod metrics;
pub mod optimizer;

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use thiserror::Error;

pub use metrics::{EvalReport, MentionScore};
pub use optimizer::{Optimizer, OptimizerKind};

use crate::attention::Mode;
use crate::classifier::predict_types;
use crate::data::{synth_corpus, DataError, Mention, SentenceBag, SynthConfig};
use crate::encoder::EncoderKind;
use crate::hierarchy::TypeHierarchy;
use crate::mathx;
use crate::model::{bind, forward_bag, Dims, ModelParams};
use crate::numerics::{Graph, NumericsError, Tensor};
use optimizer::OptimError;

/// Everything that fixes a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub encoder: EncoderKind,
    pub dims: Dims,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::PanA,
            encoder: EncoderKind::Lstm,
            dims: Dims::default(),
            lr: 1e-3,
            epochs: 50,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is allowed (a run that provably changes
    /// nothing); negative or non-finite is not.
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |reason: String| Err(TrainError::BadConfig { reason });
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(alloc::format!("learning rate {} invalid", self.lr));
        }
        if self.epochs == 0 {
            return bad("at least one epoch".into());
        }
        if self.dims.d_w == 0 || self.dims.d == 0 {
            return bad("zero-width embedding or representation".into());
        }
        if self.encoder == EncoderKind::Lstm && self.dims.d_h == 0 {
            return bad("recurrent encoder needs a hidden width".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("bad training configuration: {reason}")]
    BadConfig { reason: String },
    #[error("loss became non-finite at epoch {epoch} on entity {entity:?}")]
    NonFiniteLoss { epoch: usize, entity: String },
    #[error("update failed at epoch {epoch} on entity {entity:?}: {source}")]
    Update {
        epoch: usize,
        entity: String,
        source: OptimError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Loss bookkeeping for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub total_loss: f64,
    pub mean_loss: f64,
}

fn check_corpus(
    params: &ModelParams,
    hierarchy: &TypeHierarchy,
    bags: &[SentenceBag],
) -> Result<(), TrainError> {
    if bags.is_empty() {
        return Err(TrainError::Data(DataError::EmptyCorpus));
    }
    if hierarchy.len() != params.n_types() {
        return Err(TrainError::BadConfig {
            reason: alloc::format!(
                "model scores {} types, hierarchy defines {}",
                params.n_types(),
                hierarchy.len()
            ),
        });
    }
    let vocab_size = params.vocab_size();
    for bag in bags {
        bag.validate(hierarchy)?;
        for s in &bag.sentences {
            if let Some(&t) = s.token_ids.iter().find(|&&t| t >= vocab_size) {
                return Err(TrainError::BadConfig {
                    reason: alloc::format!(
                        "token id {t} outside vocabulary of {vocab_size} (entity {:?})",
                        bag.entity
                    ),
                });
            }
        }
    }
    Ok(())
}

const SHUFFLE_SALT: u64 = 0x53_48_55_46_46_4c_45_31;

/// Continue training from existing parameters. `train` is the fresh-start
/// wrapper; this entry exists so checkpoints can be resumed.
pub fn train_from(
    mut params: ModelParams,
    hierarchy: &TypeHierarchy,
    bags: &[SentenceBag],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>), TrainError> {
    cfg.validate()?;
    check_corpus(&params, hierarchy, bags)?;
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.lr, &params);
    let mut shuffle_rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SALT);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..bags.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total_loss = 0.0;
        for &idx in &order {
            let bag = &bags[idx];
            let mut g = Graph::new();
            let bound = bind(&mut g, &params);
            let fwd = forward_bag(&mut g, &bound, hierarchy, cfg.mode, bag)?;
            let loss = g.value(fwd.loss).item();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    entity: bag.entity.clone(),
                });
            }
            total_loss += loss;
            g.backward(fwd.loss)?;
            let grads: Vec<Tensor> = bound
                .bound()
                .iter()
                .map(|&(_, node)| {
                    g.grad(node)
                        .cloned()
                        .unwrap_or_else(|| Tensor::zeros_like(g.value(node)))
                })
                .collect();
            optimizer
                .step(&mut params, &grads)
                .map_err(|source| TrainError::Update {
                    epoch,
                    entity: bag.entity.clone(),
                    source,
                })?;
        }
        trace.push(EpochStats {
            epoch,
            total_loss,
            mean_loss: total_loss / bags.len() as f64,
        });
    }
    Ok((params, trace))
}

/// Initialize from the seed and train on the bags.
pub fn train(
    hierarchy: &TypeHierarchy,
    vocab_size: usize,
    bags: &[SentenceBag],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>), TrainError> {
    cfg.validate()?;
    let params = ModelParams::init(
        cfg.seed,
        vocab_size,
        hierarchy.len(),
        cfg.dims,
        cfg.encoder,
        cfg.mode,
    );
    train_from(params, hierarchy, bags, cfg)
}

fn bag_predictions(
    params: &ModelParams,
    hierarchy: &TypeHierarchy,
    mode: Mode,
    bag: &SentenceBag,
) -> Result<alloc::collections::BTreeSet<usize>, TrainError> {
    let mut g = Graph::new();
    let bound = bind(&mut g, params);
    let fwd = forward_bag(&mut g, &bound, hierarchy, mode, bag)?;
    let probs: Vec<f64> = fwd.probs.iter().map(|&p| g.value(p).item()).collect();
    Ok(predict_types(&probs))
}

/// Predicted type set for each single-sentence test mention, in input order.
pub fn predict_mentions(
    params: &ModelParams,
    hierarchy: &TypeHierarchy,
    mode: Mode,
    mentions: &[Mention],
) -> Result<Vec<alloc::collections::BTreeSet<usize>>, TrainError> {
    if mentions.is_empty() {
        return Err(TrainError::Data(DataError::EmptyCorpus));
    }
    let mut preds = Vec::with_capacity(mentions.len());
    for m in mentions {
        let bag = SentenceBag {
            entity: m.entity.clone(),
            sentences: alloc::vec![m.sentence.clone()],
            labels: m.gold.clone(),
        };
        preds.push(bag_predictions(params, hierarchy, mode, &bag)?);
    }
    Ok(preds)
}

/// Score single-sentence test mentions. With one sentence per bag every
/// attention mode produces the same representation, so the comparison across
/// modes isolates what training did.
pub fn evaluate(
    params: &ModelParams,
    hierarchy: &TypeHierarchy,
    mode: Mode,
    mentions: &[Mention],
) -> Result<EvalReport, TrainError> {
    let preds = predict_mentions(params, hierarchy, mode, mentions)?;
    let pairs: Vec<_> = mentions
        .iter()
        .zip(preds)
        .map(|(m, pred)| (m.gold.clone(), pred))
        .collect();
    Ok(EvalReport::from_pairs(&pairs))
}

/// Score whole training bags with the training-time attention assembly:
/// how well the model fits what it was optimized on.
pub fn evaluate_bags(
    params: &ModelParams,
    hierarchy: &TypeHierarchy,
    mode: Mode,
    bags: &[SentenceBag],
) -> Result<EvalReport, TrainError> {
    if bags.is_empty() {
        return Err(TrainError::Data(DataError::EmptyCorpus));
    }
    let mut pairs = Vec::with_capacity(bags.len());
    for bag in bags {
        let pred = bag_predictions(params, hierarchy, mode, bag)?;
        pairs.push((bag.labels.clone(), pred));
    }
    Ok(EvalReport::from_pairs(&pairs))
}

/// One (mode, seed) cell of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub mode: Mode,
    pub seed: u64,
    pub report: EvalReport,
}

/// Mean and population standard deviation per metric across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: Mode,
    pub runs: usize,
    pub strict_mean: f64,
    pub strict_std: f64,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub micro_mean: f64,
    pub micro_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<ModeSummary>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, mathx::sqrt(var))
}

/// For each seed: generate one corpus, train every mode on the same bags
/// with the same seed (so shared tensors start identical), and score the
/// clean test split.
pub fn run_noise_experiment(
    synth: &SynthConfig,
    base: &TrainConfig,
    modes: &[Mode],
    seeds: &[u64],
) -> Result<ExperimentTable, TrainError> {
    if modes.is_empty() {
        return Err(TrainError::BadConfig {
            reason: "at least one mode".into(),
        });
    }
    if seeds.is_empty() {
        return Err(TrainError::BadConfig {
            reason: "at least one seed".into(),
        });
    }
    let mut rows = Vec::with_capacity(modes.len() * seeds.len());
    for &seed in seeds {
        let corpus = synth_corpus(&SynthConfig {
            seed,
            ..synth.clone()
        })?;
        for &mode in modes {
            let cfg = TrainConfig {
                mode,
                seed,
                ..base.clone()
            };
            let (params, _) = train(&corpus.hierarchy, corpus.vocab.len(), &corpus.train, &cfg)?;
            let report = evaluate(&params, &corpus.hierarchy, mode, &corpus.test)?;
            rows.push(ExperimentRow { mode, seed, report });
        }
    }
    let mut summaries = Vec::with_capacity(modes.len());
    for &mode in modes {
        let of = |f: fn(&EvalReport) -> f64| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.mode == mode)
                .map(|r| f(&r.report))
                .collect()
        };
        let strict = mean_std(&of(|r| r.strict_acc));
        let macro_f1 = mean_std(&of(|r| r.loose_macro_f1));
        let micro_f1 = mean_std(&of(|r| r.loose_micro_f1));
        summaries.push(ModeSummary {
            mode,
            runs: seeds.len(),
            strict_mean: strict.0,
            strict_std: strict.1,
            macro_mean: macro_f1.0,
            macro_std: macro_f1.1,
            micro_mean: micro_f1.0,
            micro_std: micro_f1.1,
        });
    }
    Ok(ExperimentTable { rows, summaries })
}
