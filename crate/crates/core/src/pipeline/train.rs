use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Checkpoint, Corpus, Molecule, PipelineError, Vocabulary};
use crate::features::{detect_functional_groups, morgan_fingerprint, DEFAULT_RADIUS};
use crate::fragment::FragmentMap;
use crate::masking::{
    build_context_vocab, sample_ablation_mask, sample_fragment_mask, sample_token_mask, ContextVocabulary, MaskConfig,
    MaskInput, MaskStrategy, MaskedSample,
};
use crate::model::{EncodeOptions, GraphInput, JointEncoding, Model, ModelConfig, ModelError};
use crate::nn::{AdamState, Tape, Tensor, Var};
use crate::objectives::{
    loss_cmm_fragment, loss_cmm_token, loss_dkl, loss_fla, loss_sgm, total_loss, FlaConfig, LossReport, LossTerms,
    ObjectiveError, LOSS_LOG_HEADER,
};

/// A molecule with every model input and pre-training target precomputed.
#[derive(Debug, Clone)]
pub struct PreparedMolecule {
    pub token_ids: Vec<u32>,
    pub context_ids: Vec<u32>,
    pub graph: GraphInput,
    pub fragments: FragmentMap,
    pub fingerprint: Vec<f64>,
    pub groups: Vec<f64>,
}

impl PreparedMolecule {
    pub fn new(
        molecule: &Molecule,
        vocabulary: &Vocabulary,
        contexts: &ContextVocabulary,
        fingerprint_width: usize,
    ) -> Self {
        PreparedMolecule {
            token_ids: vocabulary.encode(&molecule.tokens),
            context_ids: contexts.atom_ids(&molecule.graph),
            graph: GraphInput::new(&molecule.graph),
            fragments: molecule.fragments.clone(),
            fingerprint: morgan_fingerprint(&molecule.graph, DEFAULT_RADIUS, fingerprint_width).to_f64(),
            groups: detect_functional_groups(&molecule.graph).to_f64(),
        }
    }

    pub fn mask_input(&self) -> MaskInput<'_> {
        MaskInput {
            token_ids: &self.token_ids,
            context_ids: &self.context_ids,
        }
    }
}

/// How joint sequences in a batch are padded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    None,
    /// Pad every sequence to the longest token and atom segment of the batch.
    BatchMax,
    /// [`Padding::BatchMax`] plus this many additional inert positions per segment.
    Extra(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub model: ModelConfig,
    pub mask: MaskConfig,
    pub fla: FlaConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub peak_lr: f64,
    /// Warmup as a fraction of all optimizer steps.
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    pub padding: Padding,
    /// Per-epoch checkpoints and the loss log go here when set.
    pub output_dir: Option<PathBuf>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            model: ModelConfig::default(),
            mask: MaskConfig::default(),
            fla: FlaConfig::default(),
            epochs: 30,
            batch_size: 16,
            seed: 7,
            peak_lr: 2e-3,
            warmup_fraction: 0.1,
            weight_decay: 0.01,
            padding: Padding::None,
            output_dir: None,
        }
    }
}

/// Linear warmup to `peak` over `warmup` steps, then linear decay to zero at
/// step `total`. Steps are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub peak: f64,
    pub warmup: usize,
    pub total: usize,
}

impl LrSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        if step <= self.warmup {
            self.peak * step as f64 / self.warmup as f64
        } else if step >= self.total {
            0.0
        } else {
            self.peak * (self.total - step) as f64 / (self.total - self.warmup) as f64
        }
    }
}

/// Uniformly random cyclic permutation (Sattolo); no index maps to itself
/// when `n ≥ 2`.
pub fn derangement(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        p.swap(i, j);
    }
    p
}

fn pad_lengths(batch: &[&PreparedMolecule], padding: Padding) -> Option<(usize, usize)> {
    let extra = match padding {
        Padding::None => return None,
        Padding::BatchMax => 0,
        Padding::Extra(e) => e,
    };
    let n = batch.iter().map(|m| m.token_ids.len()).max().unwrap_or(0);
    let m = batch.iter().map(|m| m.context_ids.len()).max().unwrap_or(0);
    Some((n + extra, m + extra))
}

#[allow(clippy::too_many_arguments)]
fn encode_pair(
    model: &Model,
    tape: &mut Tape,
    smiles_of: &PreparedMolecule,
    graph_of: &PreparedMolecule,
    masked_tokens: &[usize],
    masked_atoms: &[usize],
    block_modalities: bool,
    pad_to: Option<(usize, usize)>,
) -> Result<JointEncoding, ModelError> {
    let s = model.encoder.embed_smiles(tape, &model.store, &smiles_of.token_ids, masked_tokens)?;
    let g = model.encoder.embed_graph(tape, &model.store, &graph_of.graph, masked_atoms)?;
    model.encoder.joint_encode(
        tape,
        &model.store,
        s,
        g,
        EncodeOptions {
            block_modalities,
            retain_attention: false,
            pad_to,
        },
    )
}

/// Encodes one unmasked molecule.
pub fn encode_molecule(
    model: &Model,
    tape: &mut Tape,
    molecule: &PreparedMolecule,
    options: EncodeOptions,
) -> Result<JointEncoding, ModelError> {
    let s = model.encoder.embed_smiles(tape, &model.store, &molecule.token_ids, &[])?;
    let g = model.encoder.embed_graph(tape, &model.store, &molecule.graph, &[])?;
    model.encoder.joint_encode(tape, &model.store, s, g, options)
}

fn sample_views(
    molecule: &PreparedMolecule,
    config: &MaskConfig,
    rng: &mut impl Rng,
) -> Result<(MaskedSample, MaskedSample), PipelineError> {
    let input = molecule.mask_input();
    Ok(match config.strategy {
        MaskStrategy::Cmm => (
            sample_token_mask(input, config, rng),
            sample_fragment_mask(input, &molecule.fragments, config, rng),
        ),
        _ => (
            sample_ablation_mask(input, config, rng)?,
            sample_ablation_mask(input, config, rng)?,
        ),
    })
}

/// The full pre-training objective of one batch on a fresh tape.
pub struct BatchLoss {
    pub tape: Tape,
    pub total: Var,
    pub report: LossReport,
}

fn zero_if(tape: &mut Tape, result: Result<Var, ObjectiveError>, skip: fn(&ObjectiveError) -> bool) -> Result<Var, PipelineError> {
    match result {
        Ok(v) => Ok(v),
        Err(e) if skip(&e) => Ok(tape.constant(Tensor::scalar(0.0))?),
        Err(e) => Err(e.into()),
    }
}

/// Evaluates every pre-training loss for `batch`. Each molecule is encoded
/// four times: token-masked, fragment-masked, clean, and with its SMILES
/// paired to another molecule's graph. Alignment and matching terms are zero
/// when the batch has fewer than two fragments or two molecules.
pub fn batch_loss(
    model: &Model,
    batch: &[&PreparedMolecule],
    mask: &MaskConfig,
    fla: &FlaConfig,
    padding: Padding,
    rng: &mut impl Rng,
) -> Result<BatchLoss, PipelineError> {
    let mut views = Vec::with_capacity(batch.len());
    for m in batch {
        views.push(sample_views(m, mask, rng)?);
    }
    let partner = derangement(batch.len(), rng);
    let pad_to = pad_lengths(batch, padding);
    let block = mask.strategy == MaskStrategy::SingleModalityMasking;

    let mut tape = Tape::new();
    let mut token_encodings = Vec::with_capacity(batch.len());
    let mut fragment_encodings = Vec::with_capacity(batch.len());
    let mut pooled = Vec::with_capacity(batch.len());
    let mut positives = Vec::with_capacity(batch.len());
    let mut negatives = Vec::with_capacity(batch.len());
    for (i, (m, (tv, fv))) in batch.iter().zip(&views).enumerate() {
        let t = &mut tape;
        token_encodings.push(encode_pair(
            model,
            t,
            m,
            m,
            &tv.masked_token_positions,
            &tv.masked_atom_positions,
            block,
            pad_to,
        )?);
        fragment_encodings.push(encode_pair(
            model,
            t,
            m,
            m,
            &fv.masked_token_positions,
            &fv.masked_atom_positions,
            block,
            pad_to,
        )?);
        let clean = encode_pair(model, t, m, m, &[], &[], false, pad_to)?;
        pooled.push(model.encoder.pool_fragments(t, &model.store, &clean, &m.fragments)?);
        positives.push(clean.x_cls);
        if batch.len() >= 2 {
            let neg = encode_pair(model, t, m, batch[partner[i]], &[], &[], false, pad_to)?;
            negatives.push(neg.x_cls);
        }
    }

    let tok_pairs: Vec<_> = token_encodings.iter().zip(views.iter().map(|v| &v.0)).collect();
    let frag_pairs: Vec<_> = fragment_encodings.iter().zip(views.iter().map(|v| &v.1)).collect();
    let l_t = loss_cmm_token(&mut tape, &model.store, &model.heads, &tok_pairs)?;
    let l_f = loss_cmm_fragment(&mut tape, &model.store, &model.heads, &frag_pairs)?;
    let fla_result = loss_fla(&mut tape, &pooled, fla);
    let l_fla = zero_if(&mut tape, fla_result, |e| *e == ObjectiveError::SingleFragmentBatch)?;
    let (l_sgm, sgm_accuracy) = match loss_sgm(&mut tape, &model.store, &model.heads, &positives, &negatives) {
        Ok(x) => x,
        Err(ObjectiveError::BatchTooSmall(_)) => (tape.constant(Tensor::scalar(0.0))?, f64::NAN),
        Err(e) => return Err(e.into()),
    };

    let cls = tape.concat_rows(&positives)?;
    let fp_width = batch[0].fingerprint.len();
    let fingerprints = Tensor::from_vec(batch.len(), fp_width, batch.iter().flat_map(|m| m.fingerprint.clone()).collect())?;
    let groups = Tensor::from_vec(batch.len(), batch[0].groups.len(), batch.iter().flat_map(|m| m.groups.clone()).collect())?;
    let l_dkl = loss_dkl(&mut tape, &model.store, &model.heads, cls, fingerprints, groups)?;

    let mlm_accuracy = (l_t.correct + l_f.correct) as f64 / (l_t.total + l_f.total) as f64;
    let terms = LossTerms {
        l_t: Some(l_t.loss),
        l_f: Some(l_f.loss),
        l_fla: Some(l_fla),
        l_sgm: Some(l_sgm),
        l_dkl: Some(l_dkl),
        mlm_accuracy,
        sgm_accuracy,
    };
    let (total, report) = total_loss(&mut tape, &terms)?;
    Ok(BatchLoss { tape, total, report })
}

/// Mean of each report field over `reports`; NaN accuracies are skipped.
pub fn mean_report(reports: &[LossReport]) -> LossReport {
    let mean = |f: fn(&LossReport) -> f64| {
        let vals: Vec<f64> = reports.iter().map(f).filter(|v| !v.is_nan()).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    LossReport {
        l_t: mean(|r| r.l_t),
        l_f: mean(|r| r.l_f),
        l_cmm: mean(|r| r.l_cmm),
        l_fla: mean(|r| r.l_fla),
        l_sgm: mean(|r| r.l_sgm),
        l_dkl: mean(|r| r.l_dkl),
        total: mean(|r| r.total),
        mlm_accuracy: mean(|r| r.mlm_accuracy),
        sgm_accuracy: mean(|r| r.sgm_accuracy),
    }
}

pub struct PretrainOutcome {
    pub checkpoint: Checkpoint,
    /// Per-step reports in training order.
    pub steps: Vec<LossReport>,
    pub epoch_means: Vec<LossReport>,
}

/// Builds the vocabularies and the model for `corpus`.
pub fn initialize(corpus: &Corpus, config: &PretrainConfig) -> Result<(Model, Vocabulary, ContextVocabulary), PipelineError> {
    let vocabulary = Vocabulary::build(corpus.molecules.iter().map(|m| &m.tokens));
    let graphs: Vec<_> = corpus.molecules.iter().map(|m| m.graph.clone()).collect();
    let contexts = build_context_vocab(&graphs)?;
    let longest = corpus.molecules.iter().map(|m| m.tokens.len()).max().unwrap_or(0);
    if longest > config.model.max_positions {
        return Err(ModelError::PositionOverflow {
            len: longest,
            max: config.model.max_positions,
        }
        .into());
    }
    let model_config = ModelConfig {
        vocab_size: vocabulary.len(),
        context_vocab_size: contexts.len(),
        ..config.model.clone()
    };
    Ok((Model::new(model_config, config.seed)?, vocabulary, contexts))
}

pub fn pretrain(corpus: &Corpus, config: &PretrainConfig) -> Result<PretrainOutcome, PipelineError> {
    config.mask.validate()?;
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(PipelineError::InvalidConfig("epochs and batch size must be positive".into()));
    }
    let (mut model, vocabulary, contexts) = initialize(corpus, config)?;
    let prepared: Vec<PreparedMolecule> = corpus
        .molecules
        .iter()
        .map(|m| PreparedMolecule::new(m, &vocabulary, &contexts, model.config.fingerprint_width))
        .collect();

    let per_epoch = prepared.len().div_ceil(config.batch_size);
    let total_steps = per_epoch * config.epochs;
    let schedule = LrSchedule {
        peak: config.peak_lr,
        warmup: ((total_steps as f64 * config.warmup_fraction).round() as usize).clamp(1, total_steps),
        total: total_steps,
    };
    let mut adam = AdamState::new(&model.store, schedule.lr(1), config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ config.mask.seed.rotate_left(32) ^ 0x5eed);
    let mut log = match &config.output_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
            let path = dir.join("loss.tsv");
            let mut f = fs::File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
            writeln!(f, "{LOSS_LOG_HEADER}").map_err(|e| PipelineError::io(&path, e))?;
            Some((f, path))
        }
        None => None,
    };

    let mut steps = Vec::with_capacity(total_steps);
    let mut epoch_means = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut step = 0;
    let mut checkpoint = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let first = steps.len();
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let batch: Vec<&PreparedMolecule> = chunk.iter().map(|&i| &prepared[i]).collect();
            let out = batch_loss(&model, &batch, &config.mask, &config.fla, config.padding, &mut rng).map_err(|e| match e {
                PipelineError::Objective(ObjectiveError::NonFinite(term)) => PipelineError::NonFiniteLoss { batch: step, term },
                e => e,
            })?;
            let grads = out.tape.backward(out.total)?;
            model.store.zero_grad();
            grads.accumulate_into(&mut model.store);
            adam.lr = schedule.lr(step);
            adam.step(&mut model.store);
            if let Some((f, path)) = log.as_mut() {
                writeln!(f, "{}", out.report.tsv_line(step)).map_err(|e| PipelineError::io(path, e))?;
            }
            steps.push(out.report);
        }
        let mean = mean_report(&steps[first..]);
        log::info!(
            "epoch {epoch}: total {:.4} sgm_acc {:.3} mlm_acc {:.3}",
            mean.total,
            mean.sgm_accuracy,
            mean.mlm_accuracy
        );
        epoch_means.push(mean);
        let ckpt = Checkpoint {
            model: model.clone(),
            vocabulary: vocabulary.clone(),
            contexts: contexts.clone(),
            epoch,
        };
        if let Some(dir) = &config.output_dir {
            ckpt.save(&dir.join(format!("epoch-{epoch:03}")))?;
        }
        checkpoint = Some(ckpt);
    }
    Ok(PretrainOutcome {
        checkpoint: checkpoint.expect("at least one epoch"),
        steps,
        epoch_means,
    })
}
