//! Line-oriented JSON checkpoints.
//!
//! The first line is a header with the format tag, variant, class order,
//! hyperparameters and vocabulary. Each following line holds one parameter as
//! `{"name", "shape", "values"}` in registration order. Floats are written in
//! shortest round-trip form, so loading and re-saving reproduces the same bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Polarity, Vocab};
use crate::error::{Error, Result};
use crate::trainer::model::{DamModel, Hyperparams, ModelVariant};

pub const CHECKPOINT_FORMAT: &str = "dam-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    variant: ModelVariant,
    class_order: Vec<Polarity>,
    hyperparams: Hyperparams,
    vocab: Vocab,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamLine {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

pub fn checkpoint_to_string(model: &DamModel) -> Result<String> {
    let header = Header {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        variant: model.variant,
        class_order: Polarity::ALL.to_vec(),
        hyperparams: model.hp.clone(),
        vocab: model.vocab.clone(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for (_, p) in model.params.iter() {
        if !p.value.is_finite() {
            return Err(Error::Checkpoint(format!("parameter {} holds non-finite values", p.name)));
        }
        let line = ParamLine { name: p.name.clone(), shape: p.value.shape(), values: p.value.data().to_vec() };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn checkpoint_from_str(text: &str) -> Result<DamModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Checkpoint("empty checkpoint".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format {} v{}",
            header.format, header.version
        )));
    }
    if header.class_order != Polarity::ALL {
        return Err(Error::Checkpoint(format!("class order {:?} does not match {:?}", header.class_order, Polarity::ALL)));
    }

    // every parameter is overwritten below, so skip sampling
    let skeleton_hp = Hyperparams { epsilon_init: 0.0, ..header.hyperparams.clone() };
    let mut model = DamModel::assemble(header.variant, &skeleton_hp, header.vocab, None)
        .map_err(|e| Error::Checkpoint(format!("header describes an invalid model: {e}")))?;
    model.hp = header.hyperparams;

    let mut seen = vec![false; model.params.len()];
    for (i, line) in lines {
        let p: ParamLine = serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        let id = model
            .params
            .id(&p.name)
            .map_err(|_| Error::Checkpoint(format!("unexpected parameter {}", p.name)))?;
        if seen[id.index()] {
            return Err(Error::Checkpoint(format!("parameter {} appears twice", p.name)));
        }
        seen[id.index()] = true;
        let dst = model.params.value_mut(id);
        if dst.shape() != p.shape || p.values.len() != p.shape[0] * p.shape[1] {
            return Err(Error::Checkpoint(format!(
                "parameter {} has shape {:?} with {} values, expected {:?}",
                p.name,
                p.shape,
                p.values.len(),
                dst.shape()
            )));
        }
        dst.data_mut().copy_from_slice(&p.values);
    }
    if let Some(missing) = model.params.iter().find(|(id, _)| !seen[id.index()]) {
        return Err(Error::Checkpoint(format!("parameter {} is missing", missing.1.name)));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &DamModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, checkpoint_to_string(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DamModel> {
    checkpoint_from_str(&fs::read_to_string(path)?)
}
