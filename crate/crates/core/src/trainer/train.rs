use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compute::{GradStore, Tape};
use crate::corpus::{LabeledExample, Polarity, Vocab};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::trainer::adam::Adam;
use crate::trainer::metrics::{compute_metrics, Metrics};
use crate::trainer::model::{DamModel, Hyperparams, ModelVariant, PreparedExample};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Objective summed over the epoch's batches, divided by the number of examples.
    pub loss: f64,
    /// Accuracy of the end-of-epoch parameters on the training set.
    pub train_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_accuracy: Option<f64>,
    /// Gold-class probabilities that hit the log floor during the epoch.
    pub clamped: usize,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub dev: Option<Vec<LabeledExample>>,
    pub pretrained: Option<EmbeddingTable>,
    /// Use this vocabulary instead of building one from the training set.
    pub vocab: Option<Vocab>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best-on-dev parameters when a dev set was given, otherwise the last epoch's.
    pub model: DamModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
}

pub fn train(
    examples: &[LabeledExample],
    hp: &Hyperparams,
    variant: ModelVariant,
    options: TrainOptions,
) -> Result<TrainOutcome> {
    train_with(examples, hp, variant, options, |_, _| ControlFlow::Continue(()))
}

/// Like [`train`], calling `on_epoch` after every epoch; returning
/// `ControlFlow::Break` stops training early.
pub fn train_with(
    examples: &[LabeledExample],
    hp: &Hyperparams,
    variant: ModelVariant,
    options: TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog, &DamModel) -> ControlFlow<()>,
) -> Result<TrainOutcome> {
    if examples.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let vocab = options.vocab.unwrap_or_else(|| Vocab::build(examples, hp.min_count));
    let mut model = DamModel::assemble(variant, hp, vocab, options.pretrained)?;
    let prepared = model.prepare_all(examples)?;
    let dev = options.dev.as_deref().map(|d| model.prepare_all(d)).transpose()?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut adam = Adam::new(&model.params, hp.learning_rate);
    let mut grads = GradStore::for_params(&model.params);
    let mut log = Vec::with_capacity(hp.epochs);
    let mut best: Option<(f64, usize, DamModel)> = None;

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut clamped = 0;
        for batch in order.chunks(hp.batch_size) {
            for &i in batch {
                let mut tape = Tape::new();
                let (_, loss) = model.record_loss(&mut tape, &prepared[i])?;
                tape.evaluate(&model.params)?;
                let value = tape.value(loss).map(|t| t.item()).ok_or(Error::NotEvaluated)?;
                if !value.is_finite() {
                    return Err(Error::NonFinite { epoch, loss: value });
                }
                total += value;
                clamped += tape.clamped_count();
                tape.backward_scalar(&model.params, loss, &mut grads)?;
            }
            total += model.params.apply_l2(hp.lambda, &mut grads);
            adam.step(&mut model.params, &mut grads)?;
        }
        let loss = total / prepared.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite { epoch, loss });
        }
        let train_accuracy = evaluate_prepared(&model, &prepared)?.accuracy;
        let dev_accuracy = dev.as_ref().map(|d| evaluate_prepared(&model, d)).transpose()?.map(|m| m.accuracy);
        if let Some(acc) = dev_accuracy {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.clone()));
            }
        }
        let entry = EpochLog { epoch, loss, train_accuracy, dev_accuracy, clamped };
        let flow = on_epoch(&entry, &model);
        log.push(entry);
        if flow.is_break() {
            break;
        }
    }

    Ok(match best {
        Some((_, epoch, m)) => TrainOutcome { model: m, log, best_epoch: Some(epoch) },
        None => TrainOutcome { model, log, best_epoch: None },
    })
}

pub fn predictions(model: &DamModel, examples: &[PreparedExample]) -> Result<Vec<Polarity>> {
    examples.iter().map(|e| Ok(model.distribution(e)?.predicted())).collect()
}

pub fn evaluate_prepared(model: &DamModel, examples: &[PreparedExample]) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let gold: Vec<Polarity> = examples.iter().map(|e| e.polarity).collect();
    compute_metrics(&gold, &predictions(model, examples)?)
}

pub fn evaluate(model: &DamModel, examples: &[LabeledExample]) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    evaluate_prepared(model, &model.prepare_all(examples)?)
}
