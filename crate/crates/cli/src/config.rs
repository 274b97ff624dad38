//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dam_core::trainer::{Hyperparams, ModelVariant};
use serde_json::Value;

pub const HYPERPARAM_KEYS: [&str; 15] = [
    "dim_w",
    "dim_l",
    "d_h",
    "dim_depgcn",
    "d_att",
    "gcn_layers",
    "mlp_hidden",
    "learning_rate",
    "batch_size",
    "lambda",
    "epsilon_init",
    "epochs",
    "seed",
    "min_count",
    "freeze_embeddings",
];

pub const PATH_KEYS: [&str; 6] = ["train", "dev", "test", "pretrained", "checkpoint", "output_dir"];

pub fn all_keys() -> impl Iterator<Item = &'static str> {
    std::iter::once("variant").chain(HYPERPARAM_KEYS).chain(PATH_KEYS)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub variant: ModelVariant,
    pub hp: Hyperparams,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub pretrained: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Dual,
            hp: Hyperparams::default(),
            train: None,
            dev: None,
            test: None,
            pretrained: None,
            checkpoint: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Parses config text. Relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, found `{}`", i + 1, raw.trim()))?;
            cfg.set(key.trim(), value.trim(), base).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || std::path::absolute(base.join(value)).unwrap_or_else(|_| base.join(value));
        match key {
            "variant" => self.variant = value.parse()?,
            "train" => self.train = Some(path()),
            "dev" => self.dev = Some(path()),
            "test" => self.test = Some(path()),
            "pretrained" => self.pretrained = Some(path()),
            "checkpoint" => self.checkpoint = Some(path()),
            "output_dir" => self.output_dir = Some(path()),
            k if HYPERPARAM_KEYS.contains(&k) => self.set_hyperparam(k, value)?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    fn set_hyperparam(&mut self, key: &str, value: &str) -> Result<()> {
        let mut map = match serde_json::to_value(&self.hp)? {
            Value::Object(m) => m,
            _ => unreachable!("hyperparameters serialize to an object"),
        };
        let current = map.get(key).ok_or_else(|| anyhow!("unknown config key `{key}`"))?;
        let bad = || anyhow!("`{key}` expects {}, got `{value}`", kind(current));
        let parsed = match current {
            Value::Bool(_) => Value::Bool(value.parse().map_err(|_| bad())?),
            Value::Number(n) if n.is_f64() => {
                let v: f64 = value.parse().map_err(|_| bad())?;
                serde_json::Number::from_f64(v).map(Value::Number).ok_or_else(bad)?
            }
            Value::Number(_) => Value::Number(value.parse::<u64>().map_err(|_| bad())?.into()),
            _ => return Err(bad()),
        };
        map.insert(key.to_string(), parsed);
        self.hp = serde_json::from_value(Value::Object(map))?;
        Ok(())
    }

    /// Every key with its effective value, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let hp = serde_json::to_value(&self.hp).expect("hyperparameters serialize");
        let mut out = format!("variant = {}\n", self.variant);
        for key in HYPERPARAM_KEYS {
            out.push_str(&format!("{key} = {}\n", hp[key]));
        }
        let paths = [
            ("train", &self.train),
            ("dev", &self.dev),
            ("test", &self.test),
            ("pretrained", &self.pretrained),
            ("checkpoint", &self.checkpoint),
            ("output_dir", &self.output_dir),
        ];
        for (key, p) in paths {
            if let Some(p) = p {
                out.push_str(&format!("{key} = {}\n", p.display()));
            }
        }
        out
    }

    /// Checks that every input file named by the config exists.
    pub fn check_inputs(&self) -> Result<()> {
        if self.train.is_none() {
            bail!("config does not name a `train` dataset");
        }
        for (key, p) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test), ("pretrained", &self.pretrained)] {
            if let Some(p) = p {
                if !p.is_file() {
                    bail!("`{key}` file {} does not exist", p.display());
                }
            }
        }
        self.hp.validate()?;
        Ok(())
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Bool(_) => "true or false",
        Value::Number(n) if n.is_f64() => "a number",
        _ => "a non-negative integer",
    }
}
