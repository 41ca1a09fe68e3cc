//! Pre-training losses and their prediction heads.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::masking::{MaskedSample, Modality};
use crate::model::{FragmentEmbeddings, JointEncoding, ModelConfig};
use crate::nn::{Linear, NnError, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("no masked positions in the batch")]
    NoMaskedPositions,
    #[error("fragment-level sample masks both modalities")]
    BothModalitiesMasked,
    #[error("fragment alignment needs at least two fragments in the batch")]
    SingleFragmentBatch,
    #[error("graph matching needs at least two molecules, got {0}")]
    BatchTooSmall(usize),
    #[error("positive and negative counts differ: {0} vs {1}")]
    UnpairedNegatives(usize, usize),
    #[error("loss component {0} missing")]
    MissingComponent(&'static str),
    #[error("loss component {0} is not finite")]
    NonFinite(&'static str),
    #[error("temperature must be positive")]
    InvalidTemperature,
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, ObjectiveError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlaConfig {
    pub tau: f64,
}

impl Default for FlaConfig {
    fn default() -> Self {
        FlaConfig { tau: 0.05 }
    }
}

/// Prediction heads shared by all pre-training objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heads {
    pub token: Linear,
    pub context: Linear,
    pub sgm_hidden: Linear,
    pub sgm_out: Linear,
    pub fingerprint: Linear,
    pub groups: Linear,
}

impl Heads {
    pub fn new(store: &mut ParamStore, config: &ModelConfig, groups: usize, rng: &mut impl Rng) -> Self {
        let d = config.d_model;
        Heads {
            token: Linear::new(store, "heads.token", d, config.vocab_size, rng),
            context: Linear::new(store, "heads.context", d, config.context_vocab_size, rng),
            sgm_hidden: Linear::new(store, "heads.sgm.hidden", d, d, rng),
            sgm_out: Linear::new(store, "heads.sgm.out", d, 2, rng),
            fingerprint: Linear::new(store, "heads.fingerprint", d, config.fingerprint_width, rng),
            groups: Linear::new(store, "heads.groups", d, groups, rng),
        }
    }
}

/// Masked-prediction loss with the number of correct argmax predictions.
#[derive(Debug, Clone, Copy)]
pub struct MaskedPrediction {
    pub loss: Var,
    pub correct: usize,
    pub total: usize,
}

impl MaskedPrediction {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

fn count_correct(logits: &Tensor, targets: &[usize]) -> usize {
    targets
        .iter()
        .enumerate()
        .filter(|&(r, &t)| argmax(logits.row(r)) == t)
        .count()
}

/// Mean cross-entropy of `head` over the selected rows of every encoding.
fn head_cross_entropy(
    tape: &mut Tape,
    store: &ParamStore,
    head: &Linear,
    parts: Vec<(Var, Vec<usize>, Vec<usize>)>,
) -> Result<Option<(Var, usize, usize)>> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (x, select, t) in parts {
        if select.is_empty() {
            continue;
        }
        rows.push(tape.select_rows(x, &select)?);
        targets.extend(t);
    }
    if rows.is_empty() {
        return Ok(None);
    }
    let stacked = tape.concat_rows(&rows)?;
    let logits = head.forward(tape, store, stacked)?;
    let correct = count_correct(tape.value(logits), &targets);
    let loss = tape.cross_entropy(logits, &targets)?;
    Ok(Some((loss, correct, targets.len())))
}

fn masked_prediction(
    tape: &mut Tape,
    store: &ParamStore,
    heads: &Heads,
    batch: &[(&JointEncoding, &MaskedSample)],
) -> Result<MaskedPrediction> {
    let tokens = batch
        .iter()
        .map(|(e, s)| {
            (
                e.x,
                s.masked_token_positions.clone(),
                s.token_targets.iter().map(|&t| t as usize).collect(),
            )
        })
        .collect();
    let atoms = batch
        .iter()
        .map(|(e, s)| {
            (
                e.x,
                s.masked_atom_positions.iter().map(|&a| e.atom_offset + a).collect(),
                s.atom_context_targets.iter().map(|&t| t as usize).collect(),
            )
        })
        .collect();
    let t = head_cross_entropy(tape, store, &heads.token, tokens)?;
    let a = head_cross_entropy(tape, store, &heads.context, atoms)?;
    let (loss, correct, total) = match (t, a) {
        (None, None) => return Err(ObjectiveError::NoMaskedPositions),
        (Some(x), None) | (None, Some(x)) => x,
        (Some((lt, ct, nt)), Some((la, ca, na))) => (tape.add(lt, la)?, ct + ca, nt + na),
    };
    Ok(MaskedPrediction { loss, correct, total })
}

/// Token-level masked prediction: mean cross-entropy over masked tokens
/// (vocabulary head) plus mean cross-entropy over masked atoms (context head),
/// each averaged over the whole batch.
pub fn loss_cmm_token(
    tape: &mut Tape,
    store: &ParamStore,
    heads: &Heads,
    batch: &[(&JointEncoding, &MaskedSample)],
) -> Result<MaskedPrediction> {
    masked_prediction(tape, store, heads, batch)
}

/// Fragment-level masked prediction; each sample masks exactly one modality.
pub fn loss_cmm_fragment(
    tape: &mut Tape,
    store: &ParamStore,
    heads: &Heads,
    batch: &[(&JointEncoding, &MaskedSample)],
) -> Result<MaskedPrediction> {
    if batch.iter().any(|(_, s)| {
        s.masked_modality == Modality::None
            && !s.masked_token_positions.is_empty()
            && !s.masked_atom_positions.is_empty()
    }) {
        return Err(ObjectiveError::BothModalitiesMasked);
    }
    masked_prediction(tape, store, heads, batch)
}

/// Fragment alignment over all fragments of the batch. Row `i` of the
/// similarity matrix pairs SMILES fragment `i` with every graph fragment;
/// the diagonal holds the positives. Returns the SMILES-to-graph and
/// graph-to-SMILES terms summed, each averaged over fragments.
pub fn loss_fla(tape: &mut Tape, fragments: &[FragmentEmbeddings], config: &FlaConfig) -> Result<Var> {
    if !(config.tau > 0.0) {
        return Err(ObjectiveError::InvalidTemperature);
    }
    let fs: Vec<Var> = fragments.iter().map(|f| f.f_s).collect();
    let fg: Vec<Var> = fragments.iter().map(|f| f.f_g).collect();
    let total: usize = fs.iter().map(|&v| tape.value(v).rows()).sum();
    if total < 2 {
        return Err(ObjectiveError::SingleFragmentBatch);
    }
    let fs = tape.concat_rows(&fs)?;
    let fg = tape.concat_rows(&fg)?;
    fla_from_rows(tape, fs, fg, config.tau)
}

/// [`loss_fla`] on already stacked `K × D` fragment matrices.
pub fn fla_from_rows(tape: &mut Tape, f_s: Var, f_g: Var, tau: f64) -> Result<Var> {
    let k = tape.value(f_s).rows();
    if k < 2 {
        return Err(ObjectiveError::SingleFragmentBatch);
    }
    let ns = tape.normalize_rows(f_s)?;
    let ng = tape.normalize_rows(f_g)?;
    let ngt = tape.transpose(ng)?;
    let sim = tape.matmul(ns, ngt)?;
    let sim = tape.scale(sim, 1.0 / tau)?;
    let diagonal: Vec<usize> = (0..k).collect();
    let l_s = tape.cross_entropy(sim, &diagonal)?;
    let sim_t = tape.transpose(sim)?;
    let l_g = tape.cross_entropy(sim_t, &diagonal)?;
    Ok(tape.add(l_s, l_g)?)
}

/// Structure-graph matching: `positives[i]` and `negatives[i]` are `1 × D`
/// pooled encodings of matched and mismatched pairs.
pub fn loss_sgm(
    tape: &mut Tape,
    store: &ParamStore,
    heads: &Heads,
    positives: &[Var],
    negatives: &[Var],
) -> Result<(Var, f64)> {
    if positives.len() < 2 {
        return Err(ObjectiveError::BatchTooSmall(positives.len()));
    }
    if positives.len() != negatives.len() {
        return Err(ObjectiveError::UnpairedNegatives(positives.len(), negatives.len()));
    }
    let all: Vec<Var> = positives.iter().chain(negatives).copied().collect();
    let x = tape.concat_rows(&all)?;
    let logits = sgm_logits(tape, store, heads, x)?;
    let labels: Vec<usize> = (0..all.len()).map(|i| usize::from(i < positives.len())).collect();
    let accuracy = count_correct(tape.value(logits), &labels) as f64 / labels.len() as f64;
    Ok((tape.cross_entropy(logits, &labels)?, accuracy))
}

/// Two-class matching logits (`[mismatched, matched]`) for pooled rows.
pub fn sgm_logits(tape: &mut Tape, store: &ParamStore, heads: &Heads, x_cls: Var) -> Result<Var> {
    let h = heads.sgm_hidden.forward(tape, store, x_cls)?;
    let h = tape.relu(h)?;
    Ok(heads.sgm_out.forward(tape, store, h)?)
}

/// Domain-knowledge loss: fingerprint MSE on raw head outputs plus
/// functional-group BCE with logits. `x_cls` is `B × D`; targets are
/// `B × fingerprint width` and `B × groups` 0/1 matrices.
pub fn loss_dkl(
    tape: &mut Tape,
    store: &ParamStore,
    heads: &Heads,
    x_cls: Var,
    fingerprints: Tensor,
    groups: Tensor,
) -> Result<Var> {
    let fp = heads.fingerprint.forward(tape, store, x_cls)?;
    let mse = tape.mse(fp, fingerprints)?;
    let fg = heads.groups.forward(tape, store, x_cls)?;
    let bce = tape.bce_with_logits(fg, groups)?;
    Ok(tape.add(mse, bce)?)
}

/// Loss components of one step, read off the tape.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossTerms {
    pub l_t: Option<Var>,
    pub l_f: Option<Var>,
    pub l_fla: Option<Var>,
    pub l_sgm: Option<Var>,
    pub l_dkl: Option<Var>,
    pub mlm_accuracy: f64,
    pub sgm_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_t: f64,
    pub l_f: f64,
    pub l_cmm: f64,
    pub l_fla: f64,
    pub l_sgm: f64,
    pub l_dkl: f64,
    pub total: f64,
    pub mlm_accuracy: f64,
    pub sgm_accuracy: f64,
}

impl LossReport {
    /// Unit-weight sum of the components; rejects non-finite or negative values.
    pub fn from_components(
        l_t: f64,
        l_f: f64,
        l_fla: f64,
        l_sgm: f64,
        l_dkl: f64,
        mlm_accuracy: f64,
        sgm_accuracy: f64,
    ) -> Result<Self> {
        for (name, v) in [("l_t", l_t), ("l_f", l_f), ("l_fla", l_fla), ("l_sgm", l_sgm), ("l_dkl", l_dkl)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ObjectiveError::NonFinite(name));
            }
        }
        let l_cmm = l_t + l_f;
        Ok(LossReport {
            l_t,
            l_f,
            l_cmm,
            l_fla,
            l_sgm,
            l_dkl,
            total: l_cmm + l_fla + l_sgm + l_dkl,
            mlm_accuracy,
            sgm_accuracy,
        })
    }

    /// One TSV loss-log line, prefixed by `step`.
    pub fn tsv_line(&self, step: usize) -> String {
        format!(
            "{step}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{:.4}",
            self.l_t, self.l_f, self.l_fla, self.l_sgm, self.l_dkl, self.total, self.sgm_accuracy, self.mlm_accuracy
        )
    }
}

/// Header matching [`LossReport::tsv_line`].
pub const LOSS_LOG_HEADER: &str = "step\tl_t\tl_f\tl_fla\tl_sgm\tl_dkl\ttotal\tsgm_acc\tmlm_acc";

/// Sums all five components on the tape and reports their values.
pub fn total_loss(tape: &mut Tape, terms: &LossTerms) -> Result<(Var, LossReport)> {
    let take = |v: Option<Var>, name| v.ok_or(ObjectiveError::MissingComponent(name));
    let parts = [
        take(terms.l_t, "l_t")?,
        take(terms.l_f, "l_f")?,
        take(terms.l_fla, "l_fla")?,
        take(terms.l_sgm, "l_sgm")?,
        take(terms.l_dkl, "l_dkl")?,
    ];
    let v: Vec<f64> = parts.iter().map(|&p| tape.value(p).item()).collect();
    let report = LossReport::from_components(v[0], v[1], v[2], v[3], v[4], terms.mlm_accuracy, terms.sgm_accuracy)?;
    let mut total = parts[0];
    for &p in &parts[1..] {
        total = tape.add(total, p)?;
    }
    Ok((total, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelConfig};

    fn tape_rows(tape: &mut Tape, rows: &[Vec<f64>]) -> Var {
        tape.input(Tensor::from_rows(rows).unwrap()).unwrap()
    }

    fn zero_heads() -> Model {
        let mut model = Model::new(
            ModelConfig {
                d_model: 8,
                heads: 2,
                ffn_width: 8,
                gnn_width: 4,
                gnn_layers: 1,
                transformer_layers: 1,
                max_positions: 8,
                vocab_size: 7,
                context_vocab_size: 4,
                fingerprint_width: 64,
            },
            1,
        )
        .unwrap();
        let heads = model.heads;
        for l in [heads.token, heads.context, heads.sgm_out, heads.fingerprint, heads.groups] {
            model.store.value_mut(l.w).fill(0.0);
            model.store.value_mut(l.b).fill(0.0);
        }
        model
    }

    #[test]
    fn fla_closed_form() {
        let mut tape = Tape::new();
        let f = tape_rows(&mut tape, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let loss = fla_from_rows(&mut tape, f, f, 0.05).unwrap();
        let per_direction = (1.0 + (-20.0f64).exp()).ln();
        assert!((tape.value(loss).item() - 2.0 * per_direction).abs() < 1e-12);
    }

    #[test]
    fn fla_equal_similarity_gives_ln2() {
        let mut tape = Tape::new();
        let f = tape_rows(&mut tape, &[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let loss = fla_from_rows(&mut tape, f, f, 0.05).unwrap();
        assert!((tape.value(loss).item() - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fla_rejects_single_fragment() {
        let mut tape = Tape::new();
        let f = tape_rows(&mut tape, &[vec![1.0, 0.0]]);
        let pooled = FragmentEmbeddings { f_s: f, f_g: f };
        assert_eq!(
            loss_fla(&mut tape, &[pooled], &FlaConfig::default()).unwrap_err(),
            ObjectiveError::SingleFragmentBatch
        );
    }

    #[test]
    fn fla_decreases_as_positive_aligns() {
        let mut last = f64::INFINITY;
        for step in 0..10 {
            let angle = 1.5 - step as f64 * 0.15;
            let mut tape = Tape::new();
            let fs = tape_rows(&mut tape, &[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
            let fg = tape_rows(&mut tape, &[vec![angle.cos(), angle.sin(), 0.0], vec![0.3, 0.2, 1.0]]);
            let loss = fla_from_rows(&mut tape, fs, fg, 0.05).unwrap();
            let v = tape.value(loss).item();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn uniform_heads_give_log_class_count() {
        let model = zero_heads();
        let mut tape = Tape::new();
        let x = tape_rows(&mut tape, &vec![vec![0.3; 8]; 4]);
        let cls = tape.mean_rows(x).unwrap();
        let enc = JointEncoding { x, x_cls: cls, n: 2, m: 2, atom_offset: 2, attention: None };
        let sample = MaskedSample {
            masked_token_positions: vec![1],
            masked_atom_positions: vec![0],
            masked_fragment_ids: vec![],
            masked_modality: Modality::None,
            token_targets: vec![5],
            atom_context_targets: vec![2],
        };
        let p = loss_cmm_token(&mut tape, &model.store, &model.heads, &[(&enc, &sample)]).unwrap();
        assert!((tape.value(p.loss).item() - (7f64.ln() + 4f64.ln())).abs() < 1e-10);

        let graph_only = MaskedSample {
            masked_token_positions: vec![],
            token_targets: vec![],
            masked_modality: Modality::Graph,
            ..sample.clone()
        };
        let p = loss_cmm_fragment(&mut tape, &model.store, &model.heads, &[(&enc, &graph_only)]).unwrap();
        assert!((tape.value(p.loss).item() - 4f64.ln()).abs() < 1e-10);

        let empty = MaskedSample {
            masked_atom_positions: vec![],
            atom_context_targets: vec![],
            ..graph_only
        };
        assert_eq!(
            loss_cmm_token(&mut tape, &model.store, &model.heads, &[(&enc, &empty)]).unwrap_err(),
            ObjectiveError::NoMaskedPositions
        );

        let (sgm, _) = loss_sgm(&mut tape, &model.store, &model.heads, &[cls, cls], &[cls, cls]).unwrap();
        assert!((tape.value(sgm).item() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(
            loss_sgm(&mut tape, &model.store, &model.heads, &[cls], &[cls]).unwrap_err(),
            ObjectiveError::BatchTooSmall(1)
        );

        let dkl = loss_dkl(
            &mut tape,
            &model.store,
            &model.heads,
            cls,
            Tensor::zeros(1, 64),
            Tensor::filled(1, 24, 1.0),
        )
        .unwrap();
        assert!((tape.value(dkl).item() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn report_arithmetic_and_finiteness() {
        let r = LossReport::from_components(1.0, 2.0, 3.0, 4.0, 5.0, 0.5, 0.5).unwrap();
        assert_eq!((r.l_cmm, r.total), (3.0, 15.0));
        assert_eq!(
            LossReport::from_components(1.0, f64::NAN, 3.0, 4.0, 5.0, 0.0, 0.0).unwrap_err(),
            ObjectiveError::NonFinite("l_f")
        );
        let mut tape = Tape::new();
        let one = tape.constant(Tensor::scalar(1.0)).unwrap();
        let terms = LossTerms {
            l_t: Some(one),
            l_f: Some(one),
            l_fla: Some(one),
            l_sgm: None,
            l_dkl: Some(one),
            ..Default::default()
        };
        assert_eq!(total_loss(&mut tape, &terms).unwrap_err(), ObjectiveError::MissingComponent("l_sgm"));
        let (total, report) = total_loss(&mut tape, &LossTerms { l_sgm: Some(one), ..terms }).unwrap();
        assert_eq!((tape.value(total).item(), report.total), (5.0, 5.0));
        assert_eq!(report.tsv_line(3).split('\t').count(), LOSS_LOG_HEADER.split('\t').count());
    }
}
