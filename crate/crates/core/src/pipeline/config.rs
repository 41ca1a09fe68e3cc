use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{FinetuneConfig, Padding, PipelineError, PretrainConfig, SplitKind, TaskKind};
use crate::masking::MaskStrategy;

/// `key = value` settings; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

const PRETRAIN_KEYS: &[&str] = &[
    "d_model",
    "transformer_layers",
    "heads",
    "ffn_width",
    "gnn_layers",
    "gnn_width",
    "max_positions",
    "fingerprint_width",
    "r_t",
    "r_f",
    "modality_coin",
    "mask_strategy",
    "mask_seed",
    "tau",
    "epochs",
    "batch_size",
    "seed",
    "peak_lr",
    "warmup_fraction",
    "weight_decay",
    "padding",
    "output_dir",
];

const FINETUNE_KEYS: &[&str] = &[
    "task",
    "classes",
    "split",
    "train_fraction",
    "valid_fraction",
    "test_fraction",
    "finetune_epochs",
    "finetune_batch_size",
    "finetune_lr",
    "finetune_weight_decay",
    "hidden",
    "freeze_encoder",
    "finetune_seed",
];

fn invalid(key: &str, value: &str) -> PipelineError {
    PipelineError::InvalidConfig(format!("bad value {value:?} for {key}"))
}

pub fn parse_mask_strategy(s: &str) -> Option<MaskStrategy> {
    match s {
        "cmm" => Some(MaskStrategy::Cmm),
        "conditional" => Some(MaskStrategy::ConditionalMasking),
        "single" => Some(MaskStrategy::SingleModalityMasking),
        _ => None,
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::InvalidConfig(format!("line {}: expected key = value", i + 1)))?;
            let key = k.trim();
            if !PRETRAIN_KEYS.contains(&key) && !FINETUNE_KEYS.contains(&key) {
                return Err(PipelineError::InvalidConfig(format!("line {}: unknown key {key}", i + 1)));
            }
            entries.insert(key.to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    fn value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, PipelineError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| invalid(key, v)))
            .transpose()
    }

    fn update<T: std::str::FromStr>(&self, key: &str, slot: &mut T) -> Result<(), PipelineError> {
        if let Some(v) = self.value(key)? {
            *slot = v;
        }
        Ok(())
    }

    pub fn apply_pretrain(&self, c: &mut PretrainConfig) -> Result<(), PipelineError> {
        self.update("d_model", &mut c.model.d_model)?;
        self.update("transformer_layers", &mut c.model.transformer_layers)?;
        self.update("heads", &mut c.model.heads)?;
        self.update("ffn_width", &mut c.model.ffn_width)?;
        self.update("gnn_layers", &mut c.model.gnn_layers)?;
        self.update("gnn_width", &mut c.model.gnn_width)?;
        self.update("max_positions", &mut c.model.max_positions)?;
        self.update("fingerprint_width", &mut c.model.fingerprint_width)?;
        self.update("r_t", &mut c.mask.r_t)?;
        self.update("r_f", &mut c.mask.r_f)?;
        self.update("modality_coin", &mut c.mask.modality_coin)?;
        self.update("mask_seed", &mut c.mask.seed)?;
        self.update("tau", &mut c.fla.tau)?;
        self.update("epochs", &mut c.epochs)?;
        self.update("batch_size", &mut c.batch_size)?;
        self.update("seed", &mut c.seed)?;
        self.update("peak_lr", &mut c.peak_lr)?;
        self.update("warmup_fraction", &mut c.warmup_fraction)?;
        self.update("weight_decay", &mut c.weight_decay)?;
        if let Some(v) = self.get("mask_strategy") {
            c.mask.strategy = parse_mask_strategy(v).ok_or_else(|| invalid("mask_strategy", v))?;
        }
        if let Some(v) = self.get("padding") {
            c.padding = match v {
                "none" => Padding::None,
                "batch" => Padding::BatchMax,
                _ => parse_extra_padding(v)?,
            };
        }
        if let Some(v) = self.get("output_dir") {
            c.output_dir = Some(PathBuf::from(v));
        }
        Ok(())
    }

    pub fn apply_finetune(&self, c: &mut FinetuneConfig) -> Result<(), PipelineError> {
        if let Some(v) = self.get("task") {
            let classes = self.value("classes")?.unwrap_or(2);
            c.kind = parse_task(v, classes).ok_or_else(|| invalid("task", v))?;
        }
        if let Some(v) = self.get("split") {
            c.split = parse_split(v).ok_or_else(|| invalid("split", v))?;
        }
        self.update("train_fraction", &mut c.fractions.0)?;
        self.update("valid_fraction", &mut c.fractions.1)?;
        self.update("test_fraction", &mut c.fractions.2)?;
        self.update("finetune_epochs", &mut c.epochs)?;
        self.update("finetune_batch_size", &mut c.batch_size)?;
        self.update("finetune_lr", &mut c.lr)?;
        self.update("finetune_weight_decay", &mut c.weight_decay)?;
        self.update("hidden", &mut c.hidden)?;
        self.update("freeze_encoder", &mut c.freeze_encoder)?;
        self.update("finetune_seed", &mut c.seed)?;
        Ok(())
    }
}

fn parse_extra_padding(v: &str) -> Result<Padding, PipelineError> {
    v.strip_prefix("extra:")
        .and_then(|n| n.parse().ok())
        .map(Padding::Extra)
        .ok_or_else(|| invalid("padding", v))
}

pub fn parse_task(s: &str, classes: usize) -> Option<TaskKind> {
    match s {
        "cls" => Some(TaskKind::BinaryClassification),
        "reg" => Some(TaskKind::Regression),
        "pair" => Some(TaskKind::PairClassification { classes }),
        _ => None,
    }
}

pub fn parse_split(s: &str) -> Option<SplitKind> {
    match s {
        "scaffold" => Some(SplitKind::Scaffold),
        "random" => Some(SplitKind::Random),
        _ => None,
    }
}
