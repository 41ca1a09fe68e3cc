use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, concordance_index, mse, rmse, roc_auc, MetricError};
use super::{encode_molecule, Checkpoint, Molecule, PipelineError, PreparedMolecule};
use crate::features::{scaffold_key, scaffold_split_keys};
use crate::model::{EncodeOptions, Model};
use crate::nn::{AdamState, Linear, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    BinaryClassification,
    Regression,
    /// Two molecules per example, `classes` interaction labels `0..classes`.
    PairClassification { classes: usize },
}

impl TaskKind {
    fn molecules_per_example(self) -> usize {
        match self {
            TaskKind::PairClassification { .. } => 2,
            _ => 1,
        }
    }

    fn outputs(self) -> usize {
        match self {
            TaskKind::BinaryClassification => 2,
            TaskKind::Regression => 1,
            TaskKind::PairClassification { classes } => classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Scaffold,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub kind: TaskKind,
    pub split: SplitKind,
    pub fractions: (f64, f64, f64),
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    /// Train only the prediction head on fixed encoder outputs.
    pub freeze_encoder: bool,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            kind: TaskKind::BinaryClassification,
            split: SplitKind::Scaffold,
            fractions: (0.8, 0.1, 0.1),
            epochs: 20,
            batch_size: 16,
            lr: 1e-3,
            weight_decay: 0.0,
            hidden: 64,
            freeze_encoder: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Example {
    pub molecules: Vec<Molecule>,
    pub label: f64,
}

/// Reads a labelled TSV with a header row: one SMILES column (two for pair
/// tasks) followed by the label. Rows that fail to parse are skipped and
/// returned with their line numbers.
pub fn read_task_file(path: &Path, kind: TaskKind) -> Result<(Vec<Example>, Vec<(usize, String)>), PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::FileUnreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_task_text(&text, kind)
}

pub fn parse_task_text(text: &str, kind: TaskKind) -> Result<(Vec<Example>, Vec<(usize, String)>), PipelineError> {
    let width = kind.molecules_per_example();
    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let parsed = (|| {
            if fields.len() != width + 1 {
                return Err(format!("expected {} columns, found {}", width + 1, fields.len()));
            }
            let label: f64 = fields[width].parse().map_err(|_| format!("bad label {:?}", fields[width]))?;
            let valid = match kind {
                TaskKind::BinaryClassification => label == 0.0 || label == 1.0,
                TaskKind::Regression => label.is_finite(),
                TaskKind::PairClassification { classes } => label.fract() == 0.0 && label >= 0.0 && (label as usize) < classes,
            };
            if !valid {
                return Err(format!("label {label} invalid for {kind:?}"));
            }
            let molecules = fields[..width]
                .iter()
                .map(|s| Molecule::parse(s, i + 1).map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Example { molecules, label })
        })();
        match parsed {
            Ok(e) => examples.push(e),
            Err(reason) => skipped.push((i + 1, reason)),
        }
    }
    if examples.is_empty() {
        return Err(PipelineError::AllLinesFailed(skipped.len()));
    }
    Ok((examples, skipped))
}

/// Train / valid / test example indices.
pub fn split_examples(examples: &[Example], config: &FinetuneConfig) -> Result<[Vec<usize>; 3], PipelineError> {
    let parts = match config.split {
        SplitKind::Scaffold => {
            let keys: Vec<String> = examples.iter().map(|e| scaffold_key(&e.molecules[0].graph)).collect();
            let s = scaffold_split_keys(&keys, config.fractions)?;
            [s.train, s.valid, s.test]
        }
        SplitKind::Random => {
            let (a, b, c) = config.fractions;
            if [a, b, c].iter().any(|f| *f < 0.0) || (a + b + c - 1.0).abs() > 1e-6 {
                return Err(crate::features::FeatureError::InvalidFractions.into());
            }
            let mut order: Vec<usize> = (0..examples.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
            let n = examples.len() as f64;
            let train_end = (a * n).round() as usize;
            let valid_end = (((a + b) * n).round() as usize).max(train_end);
            let mut parts = [
                order[..train_end].to_vec(),
                order[train_end..valid_end].to_vec(),
                order[valid_end..].to_vec(),
            ];
            parts.iter_mut().for_each(|p| p.sort_unstable());
            parts
        }
    };
    for (name, p) in ["train", "valid", "test"].iter().zip(&parts) {
        if p.is_empty() {
            return Err(PipelineError::EmptySplit(name));
        }
    }
    Ok(parts)
}

/// Test-set metrics; entries that do not apply to the task or are
/// undefined on the split are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub roc_auc: f64,
    pub accuracy: f64,
    pub rmse: f64,
    pub mse: f64,
    pub concordance_index: f64,
}

fn or_nan(name: &str, r: Result<f64, MetricError>) -> f64 {
    r.unwrap_or_else(|e| {
        log::warn!("{name} undefined: {e}; reporting NaN");
        f64::NAN
    })
}

impl TaskMetrics {
    fn compute(kind: TaskKind, outputs: &[Vec<f64>], labels: &[f64]) -> Self {
        let mut m = TaskMetrics {
            roc_auc: f64::NAN,
            accuracy: f64::NAN,
            rmse: f64::NAN,
            mse: f64::NAN,
            concordance_index: f64::NAN,
        };
        let argmax = |row: &Vec<f64>| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
                .0
        };
        let classes: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
        match kind {
            TaskKind::BinaryClassification => {
                let scores: Vec<f64> = outputs.iter().map(|o| o[1] - o[0]).collect();
                let truth: Vec<bool> = labels.iter().map(|&l| l == 1.0).collect();
                m.roc_auc = or_nan("ROC-AUC", roc_auc(&scores, &truth));
                m.accuracy = or_nan("accuracy", accuracy(&outputs.iter().map(argmax).collect::<Vec<_>>(), &classes));
            }
            TaskKind::Regression => {
                let preds: Vec<f64> = outputs.iter().map(|o| o[0]).collect();
                m.rmse = or_nan("RMSE", rmse(&preds, labels));
                m.mse = or_nan("MSE", mse(&preds, labels));
                m.concordance_index = or_nan("CI", concordance_index(&preds, labels));
            }
            TaskKind::PairClassification { .. } => {
                m.accuracy = or_nan("accuracy", accuracy(&outputs.iter().map(argmax).collect::<Vec<_>>(), &classes));
            }
        }
        m
    }

    /// Larger is better; used for validation selection.
    fn selection_score(&self, kind: TaskKind) -> f64 {
        match kind {
            TaskKind::BinaryClassification if !self.roc_auc.is_nan() => self.roc_auc,
            TaskKind::Regression => -self.rmse,
            _ => self.accuracy,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FinetuneReport {
    pub split_sizes: [usize; 3],
    pub best_epoch: usize,
    pub valid: TaskMetrics,
    pub test: TaskMetrics,
    /// Head outputs per test example, in test-index order.
    pub test_outputs: Vec<Vec<f64>>,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Mlp {
    hidden: Linear,
    out: Linear,
}

impl Mlp {
    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, PipelineError> {
        let h = self.hidden.forward(tape, store, x)?;
        let h = tape.relu(h)?;
        Ok(self.out.forward(tape, store, h)?)
    }
}

struct Trainer {
    model: Model,
    /// Head parameters when the encoder is frozen; otherwise the head lives
    /// in `model.store`.
    head_store: Option<ParamStore>,
    head: Mlp,
    prepared: Vec<Vec<PreparedMolecule>>,
    frozen_cls: Vec<Vec<f64>>,
    kind: TaskKind,
}

impl Trainer {
    fn store(&self) -> &ParamStore {
        self.head_store.as_ref().unwrap_or(&self.model.store)
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        self.head_store.as_mut().unwrap_or(&mut self.model.store)
    }

    /// Head input rows (`x_cls`, or both concatenated for pairs) for `examples`.
    fn features(&self, tape: &mut Tape, examples: &[usize]) -> Result<Var, PipelineError> {
        if self.head_store.is_some() {
            let width = self.frozen_cls[0].len();
            let data = examples.iter().flat_map(|&e| self.frozen_cls[e].clone()).collect();
            return Ok(tape.constant(Tensor::from_vec(examples.len(), width, data)?)?);
        }
        let mut rows = Vec::with_capacity(examples.len());
        for &e in examples {
            let mut parts = Vec::with_capacity(2);
            for m in &self.prepared[e] {
                parts.push(encode_molecule(&self.model, tape, m, EncodeOptions::default())?.x_cls);
            }
            rows.push(if parts.len() == 1 { parts[0] } else { tape.concat_cols(&parts)? });
        }
        Ok(tape.concat_rows(&rows)?)
    }

    fn loss(&self, tape: &mut Tape, outputs: Var, labels: &[f64]) -> Result<Var, PipelineError> {
        Ok(match self.kind {
            TaskKind::Regression => {
                let target = Tensor::from_vec(labels.len(), 1, labels.to_vec())?;
                tape.mse(outputs, target)?
            }
            _ => tape.cross_entropy(outputs, &labels.iter().map(|&l| l as usize).collect::<Vec<_>>())?,
        })
    }

    fn predict(&self, examples: &[usize]) -> Result<Vec<Vec<f64>>, PipelineError> {
        let mut out = Vec::with_capacity(examples.len());
        for chunk in examples.chunks(64) {
            let mut tape = Tape::new();
            let x = self.features(&mut tape, chunk)?;
            let y = self.head.forward(&mut tape, self.store(), x)?;
            let y = tape.value(y);
            out.extend((0..y.rows()).map(|r| y.row(r).to_vec()));
        }
        Ok(out)
    }
}

/// Trains a two-layer MLP head (and, unless frozen, the encoder) on `x_cls`
/// and reports test metrics of the epoch with the best validation score.
pub fn finetune(checkpoint: &Checkpoint, examples: &[Example], config: &FinetuneConfig) -> Result<FinetuneReport, PipelineError> {
    if let Some(bad) = examples.iter().find(|e| e.molecules.len() != config.kind.molecules_per_example()) {
        return Err(PipelineError::InvalidConfig(format!(
            "example on line {} has {} molecules for task {:?}",
            bad.molecules[0].line,
            bad.molecules.len(),
            config.kind
        )));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(PipelineError::InvalidConfig("epochs and batch size must be positive".into()));
    }
    let [train, valid, test] = split_examples(examples, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = checkpoint.model.clone();
    let fp_width = model.config.fingerprint_width;
    let prepared: Vec<Vec<PreparedMolecule>> = examples
        .iter()
        .map(|e| {
            e.molecules
                .iter()
                .map(|m| PreparedMolecule::new(m, &checkpoint.vocabulary, &checkpoint.contexts, fp_width))
                .collect()
        })
        .collect();
    let input_width = model.config.d_model * config.kind.molecules_per_example();
    let mut head_store = config.freeze_encoder.then(ParamStore::new);
    let store = head_store.as_mut().unwrap_or(&mut model.store);
    let head = Mlp {
        hidden: Linear::new(store, "task.hidden", input_width, config.hidden, &mut rng),
        out: Linear::new(store, "task.out", config.hidden, config.kind.outputs(), &mut rng),
    };
    let mut trainer = Trainer {
        model,
        head_store,
        head,
        prepared,
        frozen_cls: Vec::new(),
        kind: config.kind,
    };
    if config.freeze_encoder {
        for mols in &trainer.prepared {
            let mut tape = Tape::new();
            let mut row = Vec::with_capacity(input_width);
            for m in mols {
                let enc = encode_molecule(&trainer.model, &mut tape, m, EncodeOptions::default())?;
                row.extend_from_slice(tape.value(enc.x_cls).data());
            }
            trainer.frozen_cls.push(row);
        }
    }

    let labels: Vec<f64> = examples.iter().map(|e| e.label).collect();
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    let mut adam = AdamState::new(trainer.store(), config.lr, config.weight_decay);
    let mut best: Option<(f64, usize, ParamStore, TaskMetrics)> = None;
    let mut order = train.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let x = trainer.features(&mut tape, chunk)?;
            let y = trainer.head.forward(&mut tape, trainer.store(), x)?;
            let loss = trainer.loss(&mut tape, y, &pick(chunk))?;
            let v = tape.value(loss).item();
            if !v.is_finite() {
                return Err(PipelineError::NonFiniteLoss { batch: epoch, term: "finetune" });
            }
            let grads = tape.backward(loss)?;
            let store = trainer.store_mut();
            store.zero_grad();
            grads.accumulate_into(store);
            adam.step(store);
        }
        let metrics = TaskMetrics::compute(config.kind, &trainer.predict(&valid)?, &pick(&valid));
        let score = metrics.selection_score(config.kind);
        log::debug!("finetune epoch {epoch}: valid score {score:.4}");
        let improved = best.as_ref().is_none_or(|(b, ..)| score > *b || (b.is_nan() && !score.is_nan()));
        if improved {
            best = Some((score, epoch, trainer.store().clone(), metrics));
        }
    }
    let (_, best_epoch, store, valid_metrics) = best.expect("at least one epoch");
    *trainer.store_mut() = store;
    let test_outputs = trainer.predict(&test)?;
    let test_metrics = TaskMetrics::compute(config.kind, &test_outputs, &pick(&test));
    Ok(FinetuneReport {
        split_sizes: [train.len(), valid.len(), test.len()],
        best_epoch,
        valid: valid_metrics,
        test: test_metrics,
        test_outputs,
        test_indices: test,
    })
}
