//! Workloads shared by the criterion benches in `benches/`.

use dam_core::corpus::synthetic::fixture_corpus;
use dam_core::corpus::{LabeledExample, Vocab};
use dam_core::trainer::{DamModel, Hyperparams, ModelVariant, PreparedExample};

/// A freshly initialized model over the fixture vocabulary.
pub fn fixture_model(variant: ModelVariant, hp: &Hyperparams) -> DamModel {
    let data = fixture_corpus();
    DamModel::assemble(variant, hp, Vocab::build(&data, hp.min_count), None).expect("fixture model assembles")
}

pub fn fixture_examples(model: &DamModel) -> (Vec<LabeledExample>, Vec<PreparedExample>) {
    let data = fixture_corpus();
    let prepared = model.prepare_all(&data).expect("fixture examples prepare");
    (data, prepared)
}
