//! Model assembly and the forward pass for every variant.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{aspect_attention, dependency_attention, reweight_rows, AttentionTrace, DepAttention};
use crate::classifier::{example_loss, fuse_and_score, predict, Mlp, PolarityDistribution};
use crate::compute::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::corpus::{build_adjacency, dep_label_sequence, LabeledExample, Polarity, Vocab};
use crate::embeddings::{lookup, EmbeddingTable};
use crate::encoder::{bilstm_encode, BiLstm};
use crate::error::{Error, Result};
use crate::gcn::{gcn_forward, normalize_adjacency, Activation, GcnStack};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Aspect and dependency attention in parallel, outputs concatenated.
    Dual,
    /// No label embedding, label GCN or dependency attention.
    NonDep,
    /// Dependency-attention weights rescale the word-GCN rows before aspect attention.
    Serial,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [ModelVariant::Dual, ModelVariant::NonDep, ModelVariant::Serial];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Dual => "dual",
            ModelVariant::NonDep => "non_dep",
            ModelVariant::Serial => "serial",
        }
    }

    pub fn uses_dependencies(self) -> bool {
        self != ModelVariant::NonDep
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected dual, non_dep or serial)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub dim_w: usize,
    pub dim_l: usize,
    pub d_h: usize,
    pub dim_depgcn: usize,
    pub d_att: usize,
    pub gcn_layers: usize,
    pub mlp_hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub epsilon_init: f64,
    pub epochs: usize,
    pub seed: u64,
    pub min_count: usize,
    pub freeze_embeddings: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim_w: 300,
            dim_l: 300,
            d_h: 100,
            dim_depgcn: 200,
            d_att: 200,
            gcn_layers: 2,
            mlp_hidden: 200,
            learning_rate: 1e-3,
            batch_size: 32,
            lambda: 1e-5,
            epsilon_init: 0.01,
            epochs: 30,
            seed: 1,
            min_count: 1,
            freeze_embeddings: false,
        }
    }
}

impl Hyperparams {
    /// Defaults with the hidden size changed and every width tied to it rescaled.
    pub fn with_hidden(d_h: usize) -> Self {
        Self { d_h, dim_depgcn: 2 * d_h, d_att: 2 * d_h, mlp_hidden: 2 * d_h, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("dim_w", self.dim_w),
            ("dim_l", self.dim_l),
            ("d_h", self.d_h),
            ("dim_depgcn", self.dim_depgcn),
            ("d_att", self.d_att),
            ("gcn_layers", self.gcn_layers),
            ("mlp_hidden", self.mlp_hidden),
            ("batch_size", self.batch_size),
            ("min_count", self.min_count),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if !(self.epsilon_init.is_finite() && self.epsilon_init >= 0.0) {
            return Err(Error::Config("epsilon_init must be non-negative".into()));
        }
        Ok(())
    }
}

pub const WORD_EMBEDDING: &str = "embed.word";
pub const LABEL_EMBEDDING: &str = "embed.label";
pub const SENTENCE_ENCODER: &str = "encoder.sentence";
pub const ASPECT_ENCODER: &str = "encoder.aspect";
pub const WORD_GCN: &str = "gcn.word";
pub const LABEL_GCN: &str = "gcn.label";
pub const DEP_ATTENTION: &str = "attention.dep";
pub const MLP: &str = "mlp";

/// Parameter-name prefixes that exist only when dependency labels are used.
pub const DEPENDENCY_PREFIXES: [&str; 3] = [LABEL_EMBEDDING, LABEL_GCN, DEP_ATTENTION];

#[derive(Clone, Debug, PartialEq, Eq)]
struct Blocks {
    word_emb: ParamId,
    sentence: BiLstm,
    aspect: BiLstm,
    word_gcn: GcnStack,
    dep: Option<DepBlocks>,
    mlp: Mlp,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct DepBlocks {
    label_emb: ParamId,
    label_gcn: GcnStack,
    attention: DepAttention,
}

/// One example converted to indices and a normalized graph.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedExample {
    pub word_ids: Vec<usize>,
    pub aspect_ids: Vec<usize>,
    pub label_ids: Vec<usize>,
    pub ghat: Tensor,
    pub polarity: Polarity,
}

/// Handles into a tape after recording one example.
#[derive(Clone, Copy, Debug)]
pub struct Recorded {
    pub logits: Var,
    pub aspect_weights: Var,
    pub dep_weights: Option<Var>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub tokens: Vec<String>,
    pub aspect_from: usize,
    pub aspect_to: usize,
    pub gold: Polarity,
    pub predicted: Polarity,
    pub distribution: PolarityDistribution,
    pub aspect_attention: AttentionTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependency_attention: Option<AttentionTrace>,
}

#[derive(Clone, Debug)]
pub struct DamModel {
    pub variant: ModelVariant,
    pub hp: Hyperparams,
    pub vocab: Vocab,
    pub params: ParamStore,
    blocks: Blocks,
}

impl DamModel {
    /// Builds all parameters for `variant`, sampling from `U(-epsilon_init, epsilon_init)`
    /// with a generator seeded from `hp.seed`. A supplied word table replaces the
    /// sampled one.
    pub fn assemble(
        variant: ModelVariant,
        hp: &Hyperparams,
        vocab: Vocab,
        pretrained: Option<EmbeddingTable>,
    ) -> Result<Self> {
        hp.validate()?;
        if variant.uses_dependencies() && vocab.num_labels() < 2 {
            return Err(Error::Config(format!("variant {variant} needs a dependency-label vocabulary")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let eps = hp.epsilon_init;
        let mut ps = ParamStore::new();
        let words = match pretrained {
            Some(t) => {
                if t.matrix.shape() != [vocab.num_words(), hp.dim_w] {
                    return Err(Error::Config(format!(
                        "pretrained table is {:?}, expected [{}, {}]",
                        t.matrix.shape(),
                        vocab.num_words(),
                        hp.dim_w
                    )));
                }
                t.matrix
            }
            None => EmbeddingTable::random_words(&vocab, hp.dim_w, eps, &mut rng).matrix,
        };
        let trainable_emb = !hp.freeze_embeddings;
        let word_emb = ps.add(WORD_EMBEDDING, words, trainable_emb)?;
        let two_h = 2 * hp.d_h;
        let sentence = BiLstm::register(&mut ps, SENTENCE_ENCODER, hp.dim_w, hp.d_h, eps, &mut rng)?;
        let aspect = BiLstm::register(&mut ps, ASPECT_ENCODER, hp.dim_w, hp.d_h, eps, &mut rng)?;
        let word_gcn = GcnStack::register(&mut ps, WORD_GCN, &vec![two_h; hp.gcn_layers + 1], Activation::Relu, eps, &mut rng)?;
        let dep = if variant.uses_dependencies() {
            let label_emb = ps.add(
                LABEL_EMBEDDING,
                EmbeddingTable::random(vocab.num_labels(), hp.dim_l, eps, &mut rng).matrix,
                trainable_emb,
            )?;
            let mut dims = vec![hp.dim_l];
            dims.extend(std::iter::repeat_n(hp.dim_depgcn, hp.gcn_layers));
            let label_gcn = GcnStack::register(&mut ps, LABEL_GCN, &dims, Activation::Relu, eps, &mut rng)?;
            let attention = DepAttention::register(&mut ps, DEP_ATTENTION, hp.dim_depgcn, two_h, hp.d_att, eps, &mut rng)?;
            Some(DepBlocks { label_emb, label_gcn, attention })
        } else {
            None
        };
        let mlp_in = if variant == ModelVariant::Dual { 2 * two_h } else { two_h };
        let mlp = Mlp::register(&mut ps, MLP, mlp_in, hp.mlp_hidden, eps, &mut rng)?;
        let blocks = Blocks { word_emb, sentence, aspect, word_gcn, dep, mlp };
        Ok(Self { variant, hp: hp.clone(), vocab, params: ps, blocks })
    }

    /// Rebinds a model to a parameter store with the same inventory, e.g. one
    /// read from a checkpoint. Names and shapes must match exactly.
    pub fn with_params(&self, params: ParamStore) -> Result<Self> {
        let mine: Vec<(&str, [usize; 2])> = self.params.iter().map(|(_, p)| (p.name.as_str(), p.value.shape())).collect();
        let theirs: Vec<(&str, [usize; 2])> = params.iter().map(|(_, p)| (p.name.as_str(), p.value.shape())).collect();
        if mine != theirs {
            return Err(Error::Checkpoint("parameter inventory does not match the model".into()));
        }
        Ok(Self { params, ..self.clone() })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.params.names().map(str::to_owned).collect()
    }

    pub fn prepare(&self, ex: &LabeledExample) -> Result<PreparedExample> {
        let tokens = ex.sentence.tokens();
        let adjacency = build_adjacency(&ex.sentence);
        Ok(PreparedExample {
            word_ids: self.vocab.word_ids(tokens),
            aspect_ids: self.vocab.word_ids(ex.aspect_tokens()),
            label_ids: dep_label_sequence(&ex.sentence, &self.vocab),
            ghat: normalize_adjacency(&adjacency)?.into_matrix(),
            polarity: ex.polarity,
        })
    }

    pub fn prepare_all(&self, examples: &[LabeledExample]) -> Result<Vec<PreparedExample>> {
        examples.iter().map(|e| self.prepare(e)).collect()
    }

    /// Records the forward pass of one example.
    pub fn record(&self, tape: &mut Tape, ex: &PreparedExample) -> Result<Recorded> {
        let ps = &self.params;
        let b = &self.blocks;
        let emb = tape.param(ps, b.word_emb);
        let x = lookup(tape, emb, &ex.word_ids)?;
        let h_s = bilstm_encode(tape, ps, &b.sentence, x)?;
        let ghat = tape.input(ex.ghat.clone());
        let h_s_k = gcn_forward(tape, ps, h_s, ghat, &b.word_gcn)?;
        let x_a = lookup(tape, emb, &ex.aspect_ids)?;
        let h_a = bilstm_encode(tape, ps, &b.aspect, x_a)?;

        let dep = match &b.dep {
            Some(d) => {
                let table = tape.param(ps, d.label_emb);
                let l0 = lookup(tape, table, &ex.label_ids)?;
                let d_k = gcn_forward(tape, ps, l0, ghat, &d.label_gcn)?;
                Some(dependency_attention(tape, ps, d_k, h_s, &d.attention)?)
            }
            None => None,
        };
        let (asp, parts) = match (self.variant, dep) {
            (ModelVariant::Dual, Some(dep)) => {
                let asp = aspect_attention(tape, h_a, h_s_k)?;
                (asp, vec![asp.pooled, dep.pooled])
            }
            (ModelVariant::Serial, Some(dep)) => {
                let rescaled = reweight_rows(tape, h_s_k, dep.weights)?;
                let asp = aspect_attention(tape, h_a, rescaled)?;
                (asp, vec![asp.pooled])
            }
            (ModelVariant::NonDep, None) => {
                let asp = aspect_attention(tape, h_a, h_s_k)?;
                (asp, vec![asp.pooled])
            }
            _ => unreachable!("dependency blocks exist exactly for dependency variants"),
        };
        let logits = fuse_and_score(tape, ps, &parts, &b.mlp)?;
        Ok(Recorded { logits, aspect_weights: asp.weights, dep_weights: dep.map(|d| d.weights) })
    }

    /// Records the forward pass plus the example's cross-entropy term.
    pub fn record_loss(&self, tape: &mut Tape, ex: &PreparedExample) -> Result<(Recorded, Var)> {
        let rec = self.record(tape, ex)?;
        let loss = example_loss(tape, rec.logits, ex.polarity)?;
        Ok((rec, loss))
    }

    pub fn distribution(&self, ex: &PreparedExample) -> Result<PolarityDistribution> {
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, ex)?;
        tape.evaluate(&self.params)?;
        Ok(logits_distribution(&tape, rec.logits))
    }

    pub fn predict(&self, ex: &LabeledExample) -> Result<PolarityDistribution> {
        self.distribution(&self.prepare(ex)?)
    }

    pub fn explain(&self, ex: &LabeledExample) -> Result<Explanation> {
        let prepared = self.prepare(ex)?;
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, &prepared)?;
        tape.evaluate(&self.params)?;
        let distribution = logits_distribution(&tape, rec.logits);
        Ok(Explanation {
            tokens: ex.sentence.tokens().to_vec(),
            aspect_from: ex.aspect_from,
            aspect_to: ex.aspect_to,
            gold: ex.polarity,
            predicted: distribution.predicted(),
            distribution,
            aspect_attention: AttentionTrace::read(&tape, rec.aspect_weights)?,
            dependency_attention: rec.dep_weights.map(|w| AttentionTrace::read(&tape, w)).transpose()?,
        })
    }
}

fn logits_distribution(tape: &Tape, logits: Var) -> PolarityDistribution {
    let v = tape.value(logits).expect("logits are evaluated").data();
    predict(&[v[0], v[1], v[2]])
}
