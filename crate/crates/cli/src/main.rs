use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smigraph::chem::{parse_smiles, tokenize, write_smiles};
use smigraph::features::{detect_functional_groups, morgan_fingerprint, scaffold_key, DEFAULT_RADIUS, DEFAULT_WIDTH};
use smigraph::fragment::fragment_molecule;
use smigraph::masking::{
    build_context_vocab, sample_ablation_mask, sample_fragment_mask, sample_token_mask, MaskConfig, MaskStrategy,
    MaskedSample,
};
use smigraph::pipeline::{
    attention_dump, embed_molecule, finetune, ingest, metrics, parse_mask_strategy, parse_split, parse_task,
    prepare_smiles, read_task_file, similarity, Checkpoint, ConfigFile, Corpus, FinetuneConfig,
    PipelineError, PretrainConfig, TaskKind, TaskMetrics, Vocabulary,
};

#[derive(Parser)]
#[command(name = "smigraph", version, about = "SMILES and molecular graph representation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// SMILES strings; read one per line from stdin when omitted.
    smiles: Vec<String>,
}

#[derive(Args)]
struct CheckpointArg {
    /// Checkpoint directory written by `pretrain`.
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print space-separated SMILES tokens.
    Tokenize(Inputs),
    /// Print canonical SMILES, atom count and bond count.
    Parse(Inputs),
    /// Print fragment count, atom labels and token labels.
    Fragment(Inputs),
    /// Print hex-encoded Morgan fingerprints.
    Fingerprint {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = DEFAULT_RADIUS)]
        radius: usize,
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: usize,
    },
    /// Print comma-separated functional group names.
    Groups(Inputs),
    /// Print the Murcko scaffold SMILES (empty for acyclic molecules).
    Scaffold(Inputs),
    /// Show which positions a masking strategy would hide.
    Mask {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "cmm")]
        mask_strategy: String,
    },
    /// Pre-train an encoder on a SMILES corpus.
    Pretrain {
        corpus: PathBuf,
        /// Directory for the loss log and checkpoints.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        mask_strategy: Option<String>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Fine-tune a pre-trained checkpoint on a labeled TSV task file.
    Finetune {
        data: PathBuf,
        #[command(flatten)]
        checkpoint: CheckpointArg,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        split: Option<String>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Print tab-separated molecule embeddings.
    Embed {
        #[command(flatten)]
        checkpoint: CheckpointArg,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Print the cosine similarity of two molecule embeddings.
    Similarity {
        #[command(flatten)]
        checkpoint: CheckpointArg,
        a: String,
        b: String,
    },
    /// Print per-head attention matrices for one molecule.
    AttnDump {
        #[command(flatten)]
        checkpoint: CheckpointArg,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        smiles: String,
    },
    /// Score `prediction<TAB>truth` lines from a file or stdin.
    Metrics {
        file: Option<PathBuf>,
        #[arg(long, default_value = "cls")]
        task: String,
    },
}

enum CliError {
    Input(String),
    Internal(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io { .. } | PipelineError::NonFiniteLoss { .. } | PipelineError::Nn(_) | PipelineError::Objective(_) => {
                CliError::Internal(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

type Result<T> = std::result::Result<T, CliError>;

fn read_inputs(inputs: Inputs) -> Result<Vec<String>> {
    if !inputs.smiles.is_empty() {
        return Ok(inputs.smiles);
    }
    let mut out = Vec::new();
    for line in io::stdin().lock().lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.split_whitespace().next().unwrap_or_default().to_string());
    }
    Ok(out)
}

/// Runs `f` on every input, writing its line to stdout; failures are
/// reported on stderr and turn the exit status into an input error.
fn per_molecule(inputs: Inputs, mut f: impl FnMut(&str) -> Result<String>) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut failed = 0;
    for s in read_inputs(inputs)? {
        match f(&s) {
            Ok(line) => writeln!(out, "{line}")?,
            Err(CliError::Input(msg)) => {
                eprintln!("error: {s}: {msg}");
                failed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if failed > 0 {
        return Err(CliError::Input(format!("{failed} input(s) failed")));
    }
    Ok(())
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            Ok(ConfigFile::parse(&text)?)
        }
    }
}

fn mask_dump(sample: &MaskedSample, level: &str, vocab: &Vocabulary) -> String {
    let targets: Vec<&str> = sample.token_targets.iter().map(|&id| vocab.tokens()[id as usize].as_str()).collect();
    format!(
        "{level}\tmodality={:?}\tfragments={}\ttokens={}\ttoken_targets={}\tatoms={}\tatom_context_targets={}",
        sample.masked_modality,
        join(&sample.masked_fragment_ids),
        join(&sample.masked_token_positions),
        targets.join(" "),
        join(&sample.masked_atom_positions),
        join(&sample.atom_context_targets),
    )
}

fn run_mask(inputs: Inputs, seed: u64, strategy: &str) -> Result<()> {
    let strategy = parse_mask_strategy(strategy).ok_or_else(|| input_err(format!("unknown mask strategy {strategy}")))?;
    let smiles = read_inputs(inputs)?;
    let corpus = Corpus::from_text(&smiles.join("\n"))?;
    for (line, reason) in &corpus.skipped {
        eprintln!("error: input {line}: {reason}");
    }
    let vocab = Vocabulary::build(corpus.molecules.iter().map(|m| &m.tokens));
    let graphs: Vec<_> = corpus.molecules.iter().map(|m| m.graph.clone()).collect();
    let contexts = build_context_vocab(&graphs).map_err(input_err)?;
    let config = MaskConfig { strategy, seed, ..MaskConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for m in &corpus.molecules {
        let token_ids = vocab.encode(&m.tokens);
        let context_ids = contexts.atom_ids(&m.graph);
        let input = smigraph::masking::MaskInput { token_ids: &token_ids, context_ids: &context_ids };
        writeln!(out, "# {}", m.smiles)?;
        match strategy {
            MaskStrategy::Cmm => {
                let t = sample_token_mask(input, &config, &mut rng);
                writeln!(out, "{}", mask_dump(&t, "token", &vocab))?;
                let f = sample_fragment_mask(input, &m.fragments, &config, &mut rng);
                writeln!(out, "{}", mask_dump(&f, "fragment", &vocab))?;
            }
            _ => {
                let s = sample_ablation_mask(input, &config, &mut rng).map_err(input_err)?;
                writeln!(out, "{}", mask_dump(&s, "ablation", &vocab))?;
            }
        }
    }
    if !corpus.skipped.is_empty() {
        return Err(CliError::Input(format!("{} input(s) failed", corpus.skipped.len())));
    }
    Ok(())
}

fn run_pretrain(corpus: &Path, output: Option<PathBuf>, strategy: Option<String>, train: TrainArgs) -> Result<()> {
    let mut file = load_config(train.config.as_deref())?;
    if let Some(v) = train.seed {
        file.set("seed", v.to_string());
    }
    if let Some(v) = train.epochs {
        file.set("epochs", v.to_string());
    }
    if let Some(v) = train.batch_size {
        file.set("batch_size", v.to_string());
    }
    if let Some(v) = strategy {
        file.set("mask_strategy", v);
    }
    if let Some(v) = &output {
        file.set("output_dir", v.display().to_string());
    }
    let mut config = PretrainConfig::default();
    file.apply_pretrain(&mut config)?;
    let dir = config
        .output_dir
        .clone()
        .ok_or_else(|| input_err("an output directory is required (--output or output_dir)"))?;
    let corpus = ingest(corpus)?;
    for (line, reason) in &corpus.skipped {
        log::warn!("corpus line {line} skipped: {reason}");
    }
    let outcome = smigraph::pipeline::pretrain(&corpus, &config)?;
    let final_dir = dir.join("final");
    outcome.checkpoint.save(&final_dir)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "epoch\tl_t\tl_f\tl_fla\tl_sgm\tl_dkl\ttotal\tsgm_acc\tmlm_acc")?;
    for (i, m) in outcome.epoch_means.iter().enumerate() {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{:.4}",
            i + 1,
            m.l_t,
            m.l_f,
            m.l_fla,
            m.l_sgm,
            m.l_dkl,
            m.total,
            m.sgm_accuracy,
            m.mlm_accuracy
        )?;
    }
    log::info!("final checkpoint written to {}", final_dir.display());
    Ok(())
}

fn metric_lines(split: &str, m: &TaskMetrics, kind: TaskKind) -> Vec<String> {
    let named: Vec<(&str, f64)> = match kind {
        TaskKind::BinaryClassification => vec![("roc_auc", m.roc_auc), ("accuracy", m.accuracy)],
        TaskKind::Regression => vec![("rmse", m.rmse), ("mse", m.mse), ("ci", m.concordance_index)],
        TaskKind::PairClassification { .. } => vec![("accuracy", m.accuracy), ("roc_auc", m.roc_auc)],
    };
    named.into_iter().map(|(k, v)| format!("{split}\t{k}\t{v:.6}")).collect()
}

fn run_finetune(data: &Path, checkpoint: &Path, task: Option<String>, split: Option<String>, train: TrainArgs) -> Result<()> {
    let mut file = load_config(train.config.as_deref())?;
    if let Some(v) = task {
        file.set("task", v);
    }
    if let Some(v) = split {
        file.set("split", v);
    }
    if let Some(v) = train.seed {
        file.set("finetune_seed", v.to_string());
    }
    if let Some(v) = train.epochs {
        file.set("finetune_epochs", v.to_string());
    }
    if let Some(v) = train.batch_size {
        file.set("finetune_batch_size", v.to_string());
    }
    let mut config = FinetuneConfig::default();
    file.apply_finetune(&mut config)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let (examples, skipped) = read_task_file(data, config.kind)?;
    for (line, reason) in &skipped {
        log::warn!("task line {line} skipped: {reason}");
    }
    let report = finetune(&ckpt, &examples, &config)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let [train_n, valid_n, test_n] = report.split_sizes;
    writeln!(out, "split_sizes\t{train_n}\t{valid_n}\t{test_n}")?;
    writeln!(out, "best_epoch\t{}", report.best_epoch)?;
    for line in metric_lines("valid", &report.valid, config.kind)
        .into_iter()
        .chain(metric_lines("test", &report.test, config.kind))
    {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn run_metrics(file: Option<PathBuf>, task: &str) -> Result<()> {
    let text = match &file {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => io::read_to_string(io::stdin())?,
    };
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = match fields.as_slice() {
            [p, t] => p.trim().parse::<f64>().ok().zip(t.trim().parse::<f64>().ok()),
            _ => None,
        };
        let Some((p, t)) = parsed else {
            if preds.is_empty() && i == 0 {
                continue; // header
            }
            return Err(CliError::Input(format!("line {}: expected prediction<TAB>truth", i + 1)));
        };
        preds.push(p);
        truths.push(t);
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let show = |v: std::result::Result<f64, metrics::MetricError>| match v {
        Ok(v) => format!("{v:.6}"),
        Err(e) => {
            log::warn!("{e}");
            "NaN".to_string()
        }
    };
    match task {
        "cls" => {
            let labels: Vec<bool> = truths.iter().map(|&t| t > 0.5).collect();
            let predicted: Vec<usize> = preds.iter().map(|&p| (p > 0.5) as usize).collect();
            let actual: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
            writeln!(out, "roc_auc\t{}", show(metrics::roc_auc(&preds, &labels)))?;
            writeln!(out, "accuracy\t{}", show(metrics::accuracy(&predicted, &actual)))?;
        }
        "reg" => {
            writeln!(out, "rmse\t{}", show(metrics::rmse(&preds, &truths)))?;
            writeln!(out, "mse\t{}", show(metrics::mse(&preds, &truths)))?;
            writeln!(out, "ci\t{}", show(metrics::concordance_index(&preds, &truths)))?;
        }
        other => return Err(CliError::Input(format!("unknown metrics task {other} (cls|reg)"))),
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Tokenize(inputs) => per_molecule(inputs, |s| {
            let t = tokenize(s).map_err(input_err)?;
            Ok(t.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "))
        }),
        Command::Parse(inputs) => per_molecule(inputs, |s| {
            let g = parse_smiles(s).map_err(input_err)?.0;
            Ok(format!("{}\t{}\t{}", write_smiles(&g), g.atom_count(), g.bond_count()))
        }),
        Command::Fragment(inputs) => per_molecule(inputs, |s| {
            let (g, t) = parse_smiles(s).map_err(input_err)?;
            let map = fragment_molecule(&g, &t).map_err(input_err)?;
            Ok(format!("{}\t{}\t{}", map.count, join(&map.atom_labels), join(&map.token_labels)))
        }),
        Command::Fingerprint { inputs, radius, width } => {
            if width < 64 || !width.is_power_of_two() {
                return Err(input_err("--width must be a power of two of at least 64"));
            }
            per_molecule(inputs, |s| {
                let g = parse_smiles(s).map_err(input_err)?.0;
                Ok(morgan_fingerprint(&g, radius, width).to_hex())
            })
        }
        Command::Groups(inputs) => per_molecule(inputs, |s| {
            let g = parse_smiles(s).map_err(input_err)?.0;
            let names: Vec<&str> = detect_functional_groups(&g).present().into_iter().map(|f| f.name()).collect();
            Ok(names.join(","))
        }),
        Command::Scaffold(inputs) => per_molecule(inputs, |s| {
            let g = parse_smiles(s).map_err(input_err)?.0;
            Ok(scaffold_key(&g))
        }),
        Command::Mask { inputs, seed, mask_strategy } => run_mask(inputs, seed, &mask_strategy),
        Command::Pretrain { corpus, output, mask_strategy, train } => run_pretrain(&corpus, output, mask_strategy, train),
        Command::Finetune { data, checkpoint, task, split, train } => {
            if let Some(t) = &task {
                parse_task(t, 2).ok_or_else(|| input_err(format!("unknown task {t} (cls|reg|pair)")))?;
            }
            if let Some(s) = &split {
                parse_split(s).ok_or_else(|| input_err(format!("unknown split {s} (scaffold|random)")))?;
            }
            run_finetune(&data, &checkpoint.checkpoint, task, split, train)
        }
        Command::Embed { checkpoint, inputs } => {
            let ckpt = Checkpoint::load(&checkpoint.checkpoint)?;
            per_molecule(inputs, |s| {
                let prepared = prepare_smiles(&ckpt, s)?;
                let v = embed_molecule(&ckpt, &prepared)?;
                Ok(v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join("\t"))
            })
        }
        Command::Similarity { checkpoint, a, b } => {
            let ckpt = Checkpoint::load(&checkpoint.checkpoint)?;
            println!("{:.6}", similarity(&ckpt, &a, &b)?);
            Ok(())
        }
        Command::AttnDump { checkpoint, layer, smiles } => {
            let ckpt = Checkpoint::load(&checkpoint.checkpoint)?;
            let dump = attention_dump(&ckpt, &smiles, layer)?;
            print!("{}", dump.to_text());
            Ok(())
        }
        Command::Metrics { file, task } => run_metrics(file, &task),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
