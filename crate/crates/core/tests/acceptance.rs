//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracles;
use smigraph::chem::{are_isomorphic, parse_smiles, tokenize, write_smiles, TokenKind};
use smigraph::fragment::{fragment_molecule, label_smiles_tokens, FragmentMap};
use smigraph::masking::{sample_fragment_mask, sample_token_mask, MaskConfig, MaskInput, Modality};
use smigraph::model::{EncodeOptions, GraphInput, JointEncoding, Model, ModelConfig};
use smigraph::nn::check::{check_params, CheckOptions};
use smigraph::nn::{
    GcnLayer, GraphOperators, LayerNorm, Linear, MultiHeadAttention, NnError, ParamStore, Tape, Tensor, Var,
};
use smigraph::objectives::{
    fla_from_rows, loss_cmm_fragment, loss_cmm_token, loss_dkl, loss_sgm, sgm_logits, ObjectiveError,
};
use smigraph::pipeline::{
    finetune, fragment_alignment, metrics, parse_task_text, pretrain, read_task_file, Corpus, FinetuneConfig,
    PretrainConfig, PretrainOutcome, TaskKind, MANIFEST_FILE, PARAMS_FILE,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// ---------------------------------------------------------------- 1

fn parser_suite() -> Outcome {
    let corpus = common::golden_corpus();
    let start = Instant::now();
    let mut reassembled = 0;
    let mut round_trips = 0;
    for s in &corpus {
        let tokens = tokenize(s).map_err(|e| format!("{s}: {e}"))?;
        if tokens.tokens.iter().map(|t| t.text.as_str()).collect::<String>() == *s {
            reassembled += 1;
        }
        let g = parse_smiles(s).map_err(|e| format!("{s}: {e}"))?.0;
        let written = write_smiles(&g);
        let g2 = parse_smiles(&written).map_err(|e| format!("{s} -> {written}: {e}"))?.0;
        if are_isomorphic(&g, &g2).map_err(|e| e.to_string())? {
            round_trips += 1;
        }
    }
    let elapsed = start.elapsed();
    let n = corpus.len();
    ensure(n == 500, || format!("golden corpus has {n} molecules"))?;
    ensure(reassembled == n, || format!("reassembly {reassembled}/{n}"))?;
    ensure(round_trips == n, || format!("round trip {round_trips}/{n}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {:.2}s", secs(elapsed)))?;
    Ok(format!("reassembly {reassembled}/{n}, round trip {round_trips}/{n}, {:.2}s", secs(elapsed)))
}

// ---------------------------------------------------------------- 2

/// Element symbol read from the token text alone (uppercased).
fn token_element(text: &str) -> String {
    let body = text.trim_start_matches('[');
    let body = body.trim_start_matches(|c: char| c.is_ascii_digit());
    let mut chars = body.chars();
    let first = chars.next().expect("nonempty atom token");
    let second = chars.next().filter(|c| c.is_ascii_lowercase());
    let two: Option<String> = second.map(|c| format!("{}{c}", first.to_ascii_uppercase()));
    let bracket = text.starts_with('[');
    if let Some(sym) = two {
        let known = smigraph::chem::element::is_element(&sym);
        let organic_pair = matches!(sym.as_str(), "Cl" | "Br");
        if known && (bracket || organic_pair) {
            return sym;
        }
    }
    first.to_ascii_uppercase().to_string()
}

fn fragment_suite() -> Outcome {
    let corpus = common::golden_corpus();
    let mut fragments = 0;
    let mut agreeing = 0;
    for s in &corpus {
        let (g, t) = parse_smiles(s).map_err(|e| e.to_string())?;
        let map = fragment_molecule(&g, &t).map_err(|e| format!("{s}: {e}"))?;
        let again = fragment_molecule(&g, &t).map_err(|e| e.to_string())?;
        ensure(map == again, || format!("{s}: fragmentation not deterministic"))?;
        let total = map.atom_labels.len() == g.atom_count()
            && map.token_labels.len() == t.len()
            && map.atom_labels.iter().chain(&map.token_labels).all(|&l| l < map.count)
            && (0..map.count).all(|k| map.atom_labels.contains(&k));
        ensure(total, || format!("{s}: labels not total"))?;
        for k in 0..map.count {
            fragments += 1;
            let mut from_graph: Vec<String> = (0..g.atom_count())
                .filter(|&a| map.atom_labels[a] == k && g.atoms[a].element != "H")
                .map(|a| g.atoms[a].element.clone())
                .collect();
            let mut from_tokens: Vec<String> = t
                .tokens
                .iter()
                .zip(&map.token_labels)
                .filter(|(tok, &l)| l == k && matches!(tok.kind, TokenKind::Atom | TokenKind::BracketAtom))
                .map(|(tok, _)| token_element(&tok.text))
                .filter(|e| e != "H")
                .collect();
            from_graph.sort();
            from_tokens.sort();
            if from_graph == from_tokens {
                agreeing += 1;
            }
        }
    }
    ensure(agreeing == fragments, || format!("heavy-atom agreement {agreeing}/{fragments}"))?;
    let (g, t) = parse_smiles("CC(=O)OC").map_err(|e| e.to_string())?;
    let ls = label_smiles_tokens(&t, &g, &[0, 0, 0, 1, 1]).map_err(|e| e.to_string())?;
    ensure(ls == [0, 0, 0, 0, 0, 0, 1, 1], || format!("CC(=O)OC labels {ls:?}"))?;
    Ok(format!("{} molecules, heavy-atom agreement {agreeing}/{fragments}, deterministic, CC(=O)OC = {ls:?}", corpus.len()))
}

// ---------------------------------------------------------------- 3

const INSTANCES: u64 = 5;

fn tiny_model(seed: u64) -> Model {
    let config = ModelConfig {
        vocab_size: 9,
        context_vocab_size: 6,
        ..common::tiny_model()
    };
    let mut model = Model::new(config, seed).unwrap();
    oracles::jitter(&mut model.store, 0.1, &mut ChaCha8Rng::seed_from_u64(seed + 100));
    model
}

/// Random linear functional of `loss` inputs so every output entry matters.
fn weighted_sum(tape: &mut Tape, x: Var, seed: u64) -> Result<Var, NnError> {
    let shape = tape.value(x).shape();
    let w = oracles::random_tensor(shape[0], shape[1], 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    let w = tape.constant(w)?;
    let p = tape.mul(x, w)?;
    tape.sum(p)
}

struct GradRecord {
    name: &'static str,
    worst: f64,
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let opts = CheckOptions {
        max_entries: 8,
        ..CheckOptions::default()
    };
    let mut records: Vec<GradRecord> = Vec::new();
    let mut record = |name: &'static str, value: f64| match records.iter_mut().find(|r| r.name == name) {
        Some(r) => r.worst = r.worst.max(value),
        None => records.push(GradRecord { name, worst: value }),
    };
    let err = |e: NnError| e.to_string();

    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "lin", 5, 4, &mut rng);
        let norm = LayerNorm::new(&mut store, "norm", 4);
        let mha = MultiHeadAttention::new(&mut store, "mha", 8, 2, &mut rng).unwrap();
        let gcn = GcnLayer::new(&mut store, "gcn", 6, 3, &mut rng);
        oracles::jitter(&mut store, 0.2, &mut rng);
        let x5 = oracles::random_tensor(3, 5, 1.0, &mut rng);
        let x4 = oracles::random_tensor(3, 4, 1.0, &mut rng);
        let x8 = oracles::random_tensor(4, 8, 1.0, &mut rng);
        let h6 = oracles::random_tensor(4, 6, 1.0, &mut rng);
        let e3 = oracles::random_tensor(3, 3, 1.0, &mut rng);
        let ops = GraphOperators::new(4, &[(0, 1), (1, 2), (2, 3)]);
        let mask: Vec<bool> = (0..16).map(|i| i % 5 != 1).collect();

        let c = check_params(&store, opts, |t, s| {
            let x = t.constant(x5.clone())?;
            let y = lin.forward(t, s, x)?;
            weighted_sum(t, y, seed)
        })
        .map_err(err)?;
        record("linear", c.max_rel_error);
        let x4_id = store.add("probe.x4", x4);
        let c = check_params(&store, opts, |t, s| {
            let x = t.param(s, x4_id)?;
            let y = norm.forward(t, s, x)?;
            weighted_sum(t, y, seed)
        })
        .map_err(err)?;
        record("layer_norm", c.max_rel_error);
        let c = check_params(&store, opts, |t, s| {
            let x = t.constant(x8.clone())?;
            let (y, _) = mha.forward(t, s, x, x, Some(&mask))?;
            weighted_sum(t, y, seed)
        })
        .map_err(err)?;
        record("attention", c.max_rel_error);
        let c = check_params(&store, opts, |t, s| {
            let h = t.constant(h6.clone())?;
            let sn = t.constant(ops.self_and_neighbors.clone())?;
            let inc = t.constant(ops.incidence.clone())?;
            let e = t.constant(e3.clone())?;
            let y = gcn.forward(t, s, h, sn, inc, e)?;
            weighted_sum(t, y, seed)
        })
        .map_err(err)?;
        record("gcn", c.max_rel_error);

        // full encoder, embeddings through fragment pooling
        let model = tiny_model(seed);
        let (g, toks) = parse_smiles("CC(=O)Oc1ccccc1").unwrap();
        let map = fragment_molecule(&g, &toks).unwrap();
        let graph = GraphInput::new(&g);
        let ids: Vec<u32> = (0..toks.len()).map(|i| 3 + (i % 6) as u32).collect();
        let c = check_params(&model.store, opts, |t, s| -> Result<Var, smigraph::model::ModelError> {
            let se = model.encoder.embed_smiles(t, s, &ids, &[1])?;
            let ge = model.encoder.embed_graph(t, s, &graph, &[2])?;
            let enc = model.encoder.joint_encode(t, s, se, ge, EncodeOptions::default())?;
            let pooled = model.encoder.pool_fragments(t, s, &enc, &map)?;
            let a = weighted_sum(t, enc.x, seed)?;
            let b = weighted_sum(t, pooled.f_s, seed + 1)?;
            let c = weighted_sum(t, pooled.f_g, seed + 2)?;
            let ab = t.add(a, b)?;
            Ok(t.add(ab, c)?)
        })
        .map_err(|e| e.to_string())?;
        record("encoder", c.max_rel_error);

        // loss heads: differentiate w.r.t. head parameters and the encodings
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        let mut store = model.store.clone();
        let x_id = store.add("probe.x", oracles::random_tensor(7, 16, 1.0, &mut rng));
        let cls_id = store.add("probe.cls", oracles::random_tensor(4, 16, 1.0, &mut rng));
        let fs_id = store.add("probe.fs", oracles::random_tensor(5, 16, 1.0, &mut rng));
        let fg_id = store.add("probe.fg", oracles::random_tensor(5, 16, 1.0, &mut rng));
        let heads = model.heads;
        let token_sample = smigraph::masking::MaskedSample {
            masked_token_positions: vec![0, 2],
            masked_atom_positions: vec![1],
            masked_fragment_ids: vec![],
            masked_modality: Modality::None,
            token_targets: vec![4, 7],
            atom_context_targets: vec![3],
        };
        let fragment_sample = smigraph::masking::MaskedSample {
            masked_token_positions: vec![],
            masked_atom_positions: vec![0, 2],
            masked_fragment_ids: vec![0],
            masked_modality: Modality::Graph,
            token_targets: vec![],
            atom_context_targets: vec![5, 1],
        };
        let encoding = |t: &mut Tape, s: &ParamStore| -> Result<JointEncoding, NnError> {
            let x = t.param(s, x_id)?;
            let cls = t.mean_rows(x)?;
            Ok(JointEncoding { x, x_cls: cls, n: 4, m: 3, atom_offset: 4, attention: None })
        };
        let fp = Tensor::from_vec(4, 64, (0..256).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect()).unwrap();
        let fgroups = Tensor::from_vec(4, 24, (0..96).map(|i| (i % 5 == 0) as u8 as f64).collect()).unwrap();

        let c = check_params(&store, opts, |t, s| -> Result<Var, ObjectiveError> {
            let enc = encoding(t, s)?;
            Ok(loss_cmm_token(t, s, &heads, &[(&enc, &token_sample)])?.loss)
        })
        .map_err(|e| e.to_string())?;
        record("loss_cmm_token", c.max_rel_error);
        let c = check_params(&store, opts, |t, s| -> Result<Var, ObjectiveError> {
            let enc = encoding(t, s)?;
            Ok(loss_cmm_fragment(t, s, &heads, &[(&enc, &fragment_sample)])?.loss)
        })
        .map_err(|e| e.to_string())?;
        record("loss_cmm_fragment", c.max_rel_error);
        let c = check_params(&store, opts, |t, s| -> Result<Var, ObjectiveError> {
            let fs = t.param(s, fs_id)?;
            let fg = t.param(s, fg_id)?;
            fla_from_rows(t, fs, fg, 0.5)
        })
        .map_err(|e| e.to_string())?;
        record("loss_fla", c.max_rel_error);
        let c = check_params(&store, opts, |t, s| -> Result<Var, ObjectiveError> {
            let cls = t.param(s, cls_id)?;
            let rows: Vec<Var> = (0..4).map(|r| t.select_rows(cls, &[r])).collect::<Result<_, _>>()?;
            Ok(loss_sgm(t, s, &heads, &rows[..2], &rows[2..])?.0)
        })
        .map_err(|e| e.to_string())?;
        record("loss_sgm", c.max_rel_error);
        let c = check_params(&store, opts, |t, s| -> Result<Var, ObjectiveError> {
            let cls = t.param(s, cls_id)?;
            loss_dkl(t, s, &heads, cls, fp.clone(), fgroups.clone())
        })
        .map_err(|e| e.to_string())?;
        record("loss_dkl", c.max_rel_error);
    }
    let elapsed = start.elapsed();
    let worst = records.iter().map(|r| r.worst).fold(0.0, f64::max);
    let detail = records
        .iter()
        .map(|r| format!("{} {:.1e}", r.name, r.worst))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(records.len() == 10, || format!("only {} checks ran", records.len()))?;
    ensure(worst < 1e-4, || format!("max rel error {worst:.2e}: {detail}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {:.1}s", secs(elapsed)))?;
    Ok(format!("{INSTANCES} instances each, worst {worst:.1e} ({detail}), {:.1}s", secs(elapsed)))
}

// ---------------------------------------------------------------- 4

fn loss_oracle_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut note = |name: &str, got: f64, want: f64| -> Result<(), String> {
        let d = (got - want).abs();
        worst = worst.max(d);
        ensure(d <= 1e-10, || format!("{name}: {got} vs oracle {want}"))
    };
    for batch in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + batch);
        let model = tiny_model(batch);
        let s = &model.store;
        let h = model.heads;

        // FLA
        let k = rng.random_range(2..12);
        let tau = rng.random_range(0.05..1.0);
        let fs = oracles::random_tensor(k, 16, 1.0, &mut rng);
        let fg = oracles::random_tensor(k, 16, 1.0, &mut rng);
        let mut t = Tape::new();
        let (a, b) = (t.constant(fs.clone()).unwrap(), t.constant(fg.clone()).unwrap());
        let v = fla_from_rows(&mut t, a, b, tau).unwrap();
        note("FLA", t.value(v).item(), oracles::fla(&oracles::rows(&fs), &oracles::rows(&fg), tau))?;

        // CMM: token-level over two molecules
        let encs: Vec<(Tensor, usize, usize)> = (0..2)
            .map(|_| {
                let n = rng.random_range(2..8);
                let m = rng.random_range(1..6);
                (oracles::random_tensor(n + m, 16, 1.0, &mut rng), n, m)
            })
            .collect();
        let samples: Vec<_> = encs
            .iter()
            .map(|(_, n, m)| {
                let tp: Vec<usize> = (0..*n).filter(|_| rng.random_bool(0.5)).chain([0]).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
                let ap: Vec<usize> = (0..*m).filter(|_| rng.random_bool(0.5)).collect();
                smigraph::masking::MaskedSample {
                    token_targets: tp.iter().map(|_| rng.random_range(0..9)).collect(),
                    atom_context_targets: ap.iter().map(|_| rng.random_range(0..6)).collect(),
                    masked_token_positions: tp,
                    masked_atom_positions: ap,
                    masked_fragment_ids: vec![],
                    masked_modality: Modality::None,
                }
            })
            .collect();
        let mut t = Tape::new();
        let joint: Vec<JointEncoding> = encs
            .iter()
            .map(|(x, n, m)| {
                let x = t.constant(x.clone()).unwrap();
                let cls = t.mean_rows(x).unwrap();
                JointEncoding { x, x_cls: cls, n: *n, m: *m, atom_offset: *n, attention: None }
            })
            .collect();
        let pairs: Vec<_> = joint.iter().zip(&samples).collect();
        let got = loss_cmm_token(&mut t, s, &h, &pairs).unwrap().loss;
        let (mut tok_rows, mut tok_t, mut atom_rows, mut atom_t) = (vec![], vec![], vec![], vec![]);
        for ((x, n, _), smp) in encs.iter().zip(&samples) {
            for (&p, &y) in smp.masked_token_positions.iter().zip(&smp.token_targets) {
                tok_rows.push(x.row(p).to_vec());
                tok_t.push(y as usize);
            }
            for (&p, &y) in smp.masked_atom_positions.iter().zip(&smp.atom_context_targets) {
                atom_rows.push(x.row(n + p).to_vec());
                atom_t.push(y as usize);
            }
        }
        let mut want = oracles::cross_entropy(&oracles::affine(&tok_rows, s.value(h.token.w), s.value(h.token.b)), &tok_t);
        if !atom_rows.is_empty() {
            want += oracles::cross_entropy(&oracles::affine(&atom_rows, s.value(h.context.w), s.value(h.context.b)), &atom_t);
        }
        note("CMM", t.value(got).item(), want)?;

        // SGM
        let b = rng.random_range(2..6);
        let cls = oracles::random_tensor(2 * b, 16, 1.0, &mut rng);
        let mut t = Tape::new();
        let x = t.constant(cls.clone()).unwrap();
        let rows: Vec<Var> = (0..2 * b).map(|r| t.select_rows(x, &[r]).unwrap()).collect();
        let (got, _) = loss_sgm(&mut t, s, &h, &rows[..b], &rows[b..]).unwrap();
        let hidden = oracles::affine(&oracles::rows(&cls), s.value(h.sgm_hidden.w), s.value(h.sgm_hidden.b))
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect::<Vec<Vec<f64>>>();
        let logits = oracles::affine(&hidden, s.value(h.sgm_out.w), s.value(h.sgm_out.b));
        let labels: Vec<bool> = (0..2 * b).map(|i| i < b).collect();
        note("SGM", t.value(got).item(), oracles::sgm(&logits, &labels))?;
        let direct = sgm_logits(&mut t, s, &h, x).unwrap();
        ensure(oracles::rows(t.value(direct)) == logits || {
            oracles::rows(t.value(direct)).iter().flatten().zip(logits.iter().flatten()).all(|(p, q)| (p - q).abs() < 1e-12)
        }, || "SGM logits differ".into())?;

        // DKL
        let rows_n = rng.random_range(1..5);
        let cls = oracles::random_tensor(rows_n, 16, 1.0, &mut rng);
        let fp = Tensor::from_vec(rows_n, 64, (0..rows_n * 64).map(|_| rng.random_bool(0.3) as u8 as f64).collect()).unwrap();
        let fgv = Tensor::from_vec(rows_n, 24, (0..rows_n * 24).map(|_| rng.random_bool(0.2) as u8 as f64).collect()).unwrap();
        let mut t = Tape::new();
        let x = t.constant(cls.clone()).unwrap();
        let got = loss_dkl(&mut t, s, &h, x, fp.clone(), fgv.clone()).unwrap();
        let want = oracles::mse(&oracles::affine(&oracles::rows(&cls), s.value(h.fingerprint.w), s.value(h.fingerprint.b)), &oracles::rows(&fp))
            + oracles::bce_logits(&oracles::affine(&oracles::rows(&cls), s.value(h.groups.w), s.value(h.groups.b)), &oracles::rows(&fgv));
        note("DKL", t.value(got).item(), want)?;
    }

    let mut t = Tape::new();
    let f = t.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
    let v = fla_from_rows(&mut t, f, f, 0.05).unwrap();
    let per_direction = t.value(v).item() / 2.0;
    let closed = (1.0 + (-20.0f64).exp()).ln();
    ensure((per_direction - closed).abs() <= 1e-12, || format!("closed form {per_direction:e} vs {closed:e}"))?;
    Ok(format!("20 batches x {{FLA, CMM, SGM, DKL}}, max |diff| {worst:.1e}; closed form {per_direction:.4e}"))
}

// ---------------------------------------------------------------- 5, 6, 9

fn toy_corpus() -> Corpus {
    smigraph::pipeline::ingest(&common::data_path("toy_200.smi")).unwrap()
}

fn smoke_config(dir: &std::path::Path) -> PretrainConfig {
    PretrainConfig {
        epochs: 30,
        seed: 7,
        output_dir: Some(dir.to_path_buf()),
        ..PretrainConfig::default()
    }
}

fn pretrain_smoke(run: &Result<(PretrainOutcome, Duration), String>, corpus: &Corpus) -> Outcome {
    let (out, elapsed) = run.as_ref().map_err(|e| e.clone())?;
    let cfg = &out.checkpoint.model.config;
    ensure(cfg.d_model == 64 && cfg.transformer_layers == 2, || "unexpected model size".into())?;
    ensure(corpus.len() == 200, || format!("toy corpus has {}", corpus.len()))?;
    let first = out.epoch_means[0].total;
    let last = out.epoch_means.last().unwrap();
    let ratio = last.total / first;
    let (matched, mismatched) = fragment_alignment(&out.checkpoint, corpus).map_err(|e| e.to_string())?;
    let summary = format!(
        "loss {first:.3} -> {:.3} (ratio {ratio:.3}), SGM acc {:.3}, cosine matched {matched:.3} vs mismatched {mismatched:.3}, {:.1}s",
        last.total,
        last.sgm_accuracy,
        secs(*elapsed)
    );
    ensure(ratio <= 0.5, || format!("loss ratio too high: {summary}"))?;
    ensure(last.sgm_accuracy >= 0.9, || format!("SGM accuracy too low: {summary}"))?;
    ensure(matched - mismatched >= 0.2, || format!("alignment gap too small: {summary}"))?;
    ensure(*elapsed < Duration::from_secs(300), || format!("too slow: {summary}"))?;
    Ok(summary)
}

fn finetune_smoke() -> Outcome {
    let start = Instant::now();
    let path = common::data_path("nitro.tsv");
    let (examples, _) = read_task_file(&path, TaskKind::BinaryClassification).map_err(|e| e.to_string())?;
    let smiles: Vec<&str> = examples.iter().map(|e| e.molecules[0].smiles.as_str()).collect();
    let corpus = Corpus::from_text(&smiles.join("\n")).map_err(|e| e.to_string())?;
    let pre = PretrainConfig {
        epochs: 1,
        seed: 7,
        ..PretrainConfig::default()
    };
    let ckpt = pretrain(&corpus, &pre).map_err(|e| e.to_string())?.checkpoint;
    let cfg = FinetuneConfig {
        epochs: 8,
        ..FinetuneConfig::default()
    };
    let report = finetune(&ckpt, &examples, &cfg).map_err(|e| e.to_string())?;
    let auc = report.test.roc_auc;

    let constant: String = std::iter::once("smiles\tlabel".to_string())
        .chain(smiles.iter().take(60).map(|s| format!("{s}\t1")))
        .collect::<Vec<_>>()
        .join("\n");
    let (flat, _) = parse_task_text(&constant, TaskKind::BinaryClassification).map_err(|e| e.to_string())?;
    let degenerate = finetune(&ckpt, &flat, &FinetuneConfig { epochs: 1, ..cfg }).map_err(|e| e.to_string())?;
    let summary = format!(
        "split {:?}, test ROC-AUC {auc:.3}, single-class split ROC-AUC {}, {:.1}s",
        report.split_sizes,
        degenerate.test.roc_auc,
        secs(start.elapsed())
    );
    ensure(auc >= 0.85, || summary.clone())?;
    ensure(degenerate.test.roc_auc.is_nan(), || summary.clone())?;
    Ok(summary)
}

fn determinism(
    a: &Result<(PretrainOutcome, Duration), String>,
    b: &Result<(PretrainOutcome, Duration), String>,
    dirs: (&std::path::Path, &std::path::Path),
) -> Outcome {
    a.as_ref().map_err(|e| e.clone())?;
    b.as_ref().map_err(|e| e.clone())?;
    let mut compared = 0;
    for epoch in [1, 30] {
        let name = format!("epoch-{epoch:03}");
        for file in [MANIFEST_FILE, PARAMS_FILE] {
            let x = std::fs::read(dirs.0.join(&name).join(file)).map_err(|e| e.to_string())?;
            let y = std::fs::read(dirs.1.join(&name).join(file)).map_err(|e| e.to_string())?;
            ensure(x == y, || format!("{name}/{file} differs"))?;
            compared += x.len();
        }
    }
    let log_a = std::fs::read(dirs.0.join("loss.tsv")).map_err(|e| e.to_string())?;
    let log_b = std::fs::read(dirs.1.join("loss.tsv")).map_err(|e| e.to_string())?;
    ensure(log_a == log_b, || "loss logs differ".into())?;
    Ok(format!("epoch 1 and 30 checkpoints byte-identical ({compared} bytes), loss logs identical"))
}

// ---------------------------------------------------------------- 7

fn metric_suite() -> Outcome {
    let mut cases = 0;
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        // coarse rounding forces ties in both scores and truths
        let scale = if trial % 2 == 0 { 10.0 } else { 1e6 };
        let scores: Vec<f64> = (0..100).map(|_| (rng.random::<f64>() * scale).round() / scale).collect();
        let labels: Vec<bool> = (0..100).map(|_| rng.random_bool(0.4)).collect();
        let truths: Vec<f64> = (0..100).map(|_| (rng.random::<f64>() * 5.0).round()).collect();
        let auc = metrics::roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let ci = metrics::concordance_index(&scores, &truths).map_err(|e| e.to_string())?;
        let (auc_o, ci_o) = (oracles::roc_auc(&scores, &labels), oracles::concordance(&scores, &truths));
        ensure(auc == auc_o, || format!("trial {trial}: ROC-AUC {auc} vs {auc_o}"))?;
        ensure(ci == ci_o, || format!("trial {trial}: CI {ci} vs {ci_o}"))?;
        cases += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.5)).collect();
    let random_auc = metrics::roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
    ensure((random_auc - 0.5).abs() <= 0.02, || format!("random ROC-AUC {random_auc}"))?;
    Ok(format!("{cases} tied 100-point sets exact for ROC-AUC and CI; random 10k ROC-AUC {random_auc:.4}"))
}

// ---------------------------------------------------------------- 8

/// `max(1, floor(len * num / den))`, capped at `len`.
fn expected_count(len: usize, num: usize, den: usize) -> usize {
    (len * num / den).clamp(1, len)
}

fn masking_suite() -> Outcome {
    let config = MaskConfig::default();
    ensure(config.r_t == 0.2 && config.r_f == 0.6, || "unexpected default ratios".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut samples = 0;
    for n in 1..=30usize {
        for m in 1..=30usize {
            let tokens: Vec<u32> = (0..n as u32).collect();
            let contexts: Vec<u32> = (0..m as u32).collect();
            let input = MaskInput { token_ids: &tokens, context_ids: &contexts };
            let s = sample_token_mask(input, &config, &mut rng);
            ensure(s.masked_token_positions.len() == expected_count(n, 1, 5), || format!("token count n={n}"))?;
            ensure(s.masked_atom_positions.len() == expected_count(m, 1, 5), || format!("atom count m={m}"))?;
            samples += 1;
            for k in 1..=8usize.min(n).min(m) {
                let map = FragmentMap {
                    count: k,
                    atom_labels: (0..m).map(|i| i % k).collect(),
                    token_labels: (0..n).map(|i| i % k).collect(),
                };
                let f = sample_fragment_mask(input, &map, &config, &mut rng);
                samples += 1;
                ensure(f.masked_fragment_ids.len() == expected_count(k, 3, 5), || format!("fragment count K={k}"))?;
                let both = !f.masked_token_positions.is_empty() && !f.masked_atom_positions.is_empty();
                ensure(!both, || format!("both modalities masked n={n} m={m} K={k}"))?;
                let covered = |labels: &[usize], pos: &[usize]| {
                    let expect: Vec<usize> = (0..labels.len()).filter(|&i| f.masked_fragment_ids.contains(&labels[i])).collect();
                    expect == pos
                };
                let exact = match f.masked_modality {
                    Modality::Smiles => covered(&map.token_labels, &f.masked_token_positions),
                    Modality::Graph => covered(&map.atom_labels, &f.masked_atom_positions),
                    Modality::None => false,
                };
                ensure(exact, || format!("fragment positions wrong n={n} m={m} K={k}"))?;
            }
        }
    }
    Ok(format!("{samples} samples over n, m in 1..=30, K in 1..=8; counts exact, never both modalities"))
}

// ----------------------------------------------------------------

fn report(id: usize, name: &str, outcome: &Outcome) -> bool {
    match outcome {
        Ok(d) => println!("[PASS] {id}. {name}: {d}"),
        Err(d) => println!("[FAIL] {id}. {name}: {d}"),
    }
    outcome.is_ok()
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let (dir_a, dir_b) = (tmp.path().join("run-a"), tmp.path().join("run-b"));
    let corpus = toy_corpus();
    let timed = |dir: &std::path::Path| -> Result<(PretrainOutcome, Duration), String> {
        let start = Instant::now();
        let out = pretrain(&corpus, &smoke_config(dir)).map_err(|e| e.to_string())?;
        Ok((out, start.elapsed()))
    };

    let (run_a, run_b, fine, quick) = std::thread::scope(|s| {
        let a = s.spawn(|| timed(&dir_a));
        let b = s.spawn(|| timed(&dir_b));
        let f = s.spawn(finetune_smoke);
        let q = s.spawn(|| {
            [
                parser_suite(),
                fragment_suite(),
                gradient_suite(),
                loss_oracle_suite(),
                metric_suite(),
                masking_suite(),
            ]
        });
        (
            a.join().expect("run a"),
            b.join().expect("run b"),
            f.join().expect("finetune"),
            q.join().expect("quick suites"),
        )
    });
    let [parser, fragments, gradients, losses, metric, masking] = quick;
    let results = [
        report(1, "parser suite", &parser),
        report(2, "fragment decomposition", &fragments),
        report(3, "gradient checks", &gradients),
        report(4, "loss oracles", &losses),
        report(5, "pre-training smoke", &pretrain_smoke(&run_a, &corpus)),
        report(6, "fine-tune smoke", &fine),
        report(7, "metric oracles", &metric),
        report(8, "masking accounting", &masking),
        report(9, "determinism", &determinism(&run_a, &run_b, (&dir_a, &dir_b))),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
