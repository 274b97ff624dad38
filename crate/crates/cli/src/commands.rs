use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use dam_core::corpus::synthetic::{fixture_corpus, label_cue_corpus};
use dam_core::corpus::{load_dataset, write_dataset, Polarity, Vocab};
use dam_core::embeddings::load_pretrained;
use dam_core::trainer::{
    evaluate, load_checkpoint, save_checkpoint, train_with, DamModel, Metrics, TrainOptions,
};
use dam_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::RunConfig;

pub const LOG_FILE: &str = "train_log.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.conf";
pub const DEFAULT_CHECKPOINT_FILE: &str = "model.ckpt";
pub const TEST_REPORT_FILE: &str = "test_metrics.json";

/// 2 for numeric failures, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NonFinite { .. }) => 2,
        _ => 1,
    }
}

fn load_examples(path: &Path) -> Result<Vec<dam_core::corpus::LabeledExample>> {
    let data = load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    if data.is_empty() {
        bail!("dataset {} is empty", path.display());
    }
    Ok(data)
}

pub fn train(config_path: &Path, overrides: &[(String, String)]) -> Result<()> {
    let mut cfg = RunConfig::load(config_path)?;
    for (k, v) in overrides {
        cfg.set(k, v, Path::new("")).with_context(|| format!("override --{k}"))?;
    }
    cfg.check_inputs()?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| base.join("out"));
    let ckpt_path = cfg.checkpoint.clone().unwrap_or_else(|| out_dir.join(DEFAULT_CHECKPOINT_FILE));
    cfg.output_dir = Some(out_dir.clone());
    cfg.checkpoint = Some(ckpt_path.clone());

    let train_path = cfg.train.as_deref().expect("checked above");
    let train_set = load_examples(train_path)?;
    let dev = cfg.dev.as_deref().map(load_examples).transpose()?;
    let test = cfg.test.as_deref().map(load_examples).transpose()?;

    let vocab = Vocab::build(&train_set, cfg.hp.min_count);
    let pretrained = match &cfg.pretrained {
        Some(p) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.hp.seed);
            rng.set_stream(2);
            let t = load_pretrained(p, &vocab, cfg.hp.dim_w, cfg.hp.epsilon_init, &mut rng)
                .with_context(|| format!("loading embeddings {}", p.display()))?;
            Some(t)
        }
        None => None,
    };

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    if let Some(parent) = ckpt_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out_dir.join(RESOLVED_CONFIG_FILE), cfg.to_text())?;
    let mut log_file = fs::File::create(out_dir.join(LOG_FILE))?;

    let options = TrainOptions { dev, pretrained, vocab: Some(vocab) };
    let mut write_err = None;
    let outcome = train_with(&train_set, &cfg.hp, cfg.variant, options, |entry, _| {
        let line = serde_json::to_string(entry).expect("log entries serialize");
        if let Err(e) = writeln!(log_file, "{line}") {
            write_err = Some(e);
            return std::ops::ControlFlow::Break(());
        }
        match entry.dev_accuracy {
            Some(d) => println!(
                "epoch {:>3}  loss {:.4}  train_acc {:.4}  dev_acc {:.4}",
                entry.epoch, entry.loss, entry.train_accuracy, d
            ),
            None => println!("epoch {:>3}  loss {:.4}  train_acc {:.4}", entry.epoch, entry.loss, entry.train_accuracy),
        }
        std::ops::ControlFlow::Continue(())
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing training log");
    }
    if let Some(best) = outcome.best_epoch {
        println!("kept epoch {best} (best dev accuracy)");
    }
    save_checkpoint(&outcome.model, &ckpt_path).with_context(|| format!("writing {}", ckpt_path.display()))?;
    println!("checkpoint {}", ckpt_path.display());

    if let Some(test) = test {
        let m = evaluate(&outcome.model, &test)?;
        print_metrics("test", &m);
        fs::write(out_dir.join(TEST_REPORT_FILE), report_line(&m))?;
    }
    Ok(())
}

fn report_line(m: &Metrics) -> String {
    let per_class: serde_json::Map<String, serde_json::Value> =
        Polarity::ALL.iter().map(|p| (p.as_str().to_string(), json!(m.per_class_f1[p.index()]))).collect();
    let v = json!({
        "accuracy": m.accuracy,
        "macro_f1": m.macro_f1,
        "n_examples": m.n_examples,
        "per_class_f1": per_class,
    });
    format!("{v}\n")
}

fn print_metrics(label: &str, m: &Metrics) {
    println!("{label} accuracy {:.4}", m.accuracy);
    println!("{label} macro_f1 {:.4}", m.macro_f1);
}

fn beside(checkpoint: &Path, name: &str) -> PathBuf {
    checkpoint.parent().unwrap_or(Path::new(".")).join(name)
}

fn load_model(path: &Path) -> Result<DamModel> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn eval(checkpoint: &Path, data: &Path, report: Option<&Path>) -> Result<()> {
    let model = load_model(checkpoint)?;
    let examples = load_examples(data)?;
    let m = evaluate(&model, &examples)?;
    println!("accuracy {:.4}", m.accuracy);
    println!("macro_f1 {:.4}", m.macro_f1);
    let path = report.map(Path::to_path_buf).unwrap_or_else(|| beside(checkpoint, "metrics.json"));
    fs::write(&path, report_line(&m)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn explain(checkpoint: &Path, data: &Path, index: usize, out: Option<&Path>) -> Result<()> {
    let model = load_model(checkpoint)?;
    let examples = load_examples(data)?;
    let ex = examples
        .get(index)
        .ok_or_else(|| anyhow!("index {index} is out of range for {} examples", examples.len()))?;
    let e = model.explain(ex)?;
    println!("tokens     {}", e.tokens.join(" "));
    println!("aspect     {}", e.tokens[e.aspect_from..e.aspect_to].join(" "));
    println!("gold       {}", e.gold);
    println!(
        "predicted  {}  ({})",
        e.predicted,
        Polarity::ALL.iter().map(|p| format!("{p} {:.4}", e.distribution.prob(*p))).collect::<Vec<_>>().join(", ")
    );
    for (r, row) in e.aspect_attention.weights.iter().enumerate() {
        println!("aspect[{r}]  {}", fmt_weights(&e.tokens, row));
    }
    if let Some(dep) = &e.dependency_attention {
        println!("dependency {}", fmt_weights(&e.tokens, &dep.weights[0]));
    }
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| beside(checkpoint, "explain.json"));
    fs::write(&path, format!("{}\n", serde_json::to_string(&e)?)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn fmt_weights(tokens: &[String], w: &[f64]) -> String {
    tokens.iter().zip(w).map(|(t, w)| format!("{t}:{w:.3}")).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKind {
    /// 32 hand-parsed review sentences.
    Fixture,
    /// Two-class corpus whose label is carried only by a dependency label.
    LabelCue,
}

pub fn synth(kind: SynthKind, count: usize, seed: u64, out: &Path) -> Result<()> {
    let data = match kind {
        SynthKind::Fixture => fixture_corpus(),
        SynthKind::LabelCue => label_cue_corpus(count, seed),
    };
    fs::write(out, write_dataset(&data)).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} examples to {}", data.len(), out.display());
    Ok(())
}
