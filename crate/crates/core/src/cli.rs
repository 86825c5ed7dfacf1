//! `qad` command-line interface.
//!
//! Every subcommand accepts `--config <file>`: a flat text file of
//! `key = value` lines (`#` starts a comment) whose keys are the long flag
//! names without dashes, e.g. `alpha = 0.3` or `max-len = 40`. Flags given on
//! the command line win over the file, which wins over built-in defaults.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::annotation::{annotate, group_by_segment, label_histogram, parse_mqm_file, write_labeled_file};
use crate::decoding::{beam_search, epsilon_sample, mbr_decode, qa_beam_search, rerank_nbest, Decoded};
use crate::error::{Error, Result};
use crate::eval::{
    alpha_sweep, compare_strategies, token_f1, CompareConfig, CompareReport, CostCounters, Segment,
    Strategy, SweepSegment,
};
use crate::scorers::{
    train_token_qe_with, AnyQe, NgramConfig, NgramScorer, OracleQe, TokenQeClassifier, TrainConfig,
    TranslationScorer,
};
use crate::scoring::{DecodeConfig, Hypothesis, ScoredEntry};
use crate::synthetic::{split_mass_corpus, SplitMassConfig};
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Parser)]
#[command(name = "qad", version, about = "Quality-aware decoding with token-level QE")]
#[command(after_help = "Config files: `key = value` per line, keys are long flag names \
(e.g. `alpha = 0.3`, `max-len = 40`). Precedence: flags > config file > defaults.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the n-gram translation model on a `source<TAB>target` corpus.
    TrainLm(TrainLmArgs),
    /// Turn MQM error spans into GOOD/BAD/MASK token labels.
    Annotate(AnnotateArgs),
    /// Train the token-level QE classifier on labeled JSONL.
    TrainQe(TrainQeArgs),
    /// Decode sources with beam search or quality-aware beam search.
    Decode(DecodeArgs),
    /// Re-rank an N-best JSONL file with a QE model.
    Rerank(RerankArgs),
    /// Minimum Bayes risk decoding over epsilon samples.
    Mbr(MbrArgs),
    /// Re-rank N-best lists over a grid of alpha values.
    Sweep(SweepArgs),
    /// Compare decoding strategies on a reference corpus.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beams: Option<usize>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long = "max-len")]
    max_len: Option<usize>,
    #[arg(long = "logprob-floor", allow_negative_numbers = true)]
    logprob_floor: Option<f64>,
    /// Leave a final EOS out of the QE average.
    #[arg(long = "exclude-eos")]
    exclude_eos: bool,
}

#[derive(Debug, Args)]
struct QeFlags {
    /// none, oracle (needs references) or model.
    #[arg(long)]
    qe: Option<String>,
    /// Token-QE model file for `--qe model`.
    #[arg(long = "qe-model")]
    qe_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainLmArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long = "add-k")]
    add_k: Option<f64>,
    #[arg(long = "channel-weight")]
    channel_weight: Option<f64>,
}

#[derive(Debug, Args)]
struct AnnotateArgs {
    #[command(flatten)]
    common: Common,
    /// MQM TSV with header.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum characters per target token; 0 keeps whole words.
    #[arg(long)]
    chunk: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainQeArgs {
    #[command(flatten)]
    common: Common,
    /// Labeled JSONL from `annotate`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Translation model whose vocabulary ids the classifier keeps.
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long = "w-good")]
    w_good: Option<f64>,
    #[arg(long = "w-bad")]
    w_bad: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[command(flatten)]
    common: Common,
    /// Translation model file.
    #[arg(long)]
    lm: Option<PathBuf>,
    /// One `source[<TAB>reference]` per line.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    qe: QeFlags,
    #[command(flatten)]
    decode: DecodeFlags,
    /// Plain beam search, ignoring any QE model.
    #[arg(long)]
    baseline: bool,
}

#[derive(Debug, Args)]
struct RerankArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lm: Option<PathBuf>,
    /// N-best JSONL from `decode`.
    #[arg(long)]
    nbest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    qe: QeFlags,
    #[command(flatten)]
    decode: DecodeFlags,
}

#[derive(Debug, Args)]
struct MbrArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "max-len")]
    max_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lm: Option<PathBuf>,
    /// N-best JSONL with references.
    #[arg(long)]
    nbest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    qe: QeFlags,
    /// Comma-separated alpha values.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long = "logprob-floor", allow_negative_numbers = true)]
    logprob_floor: Option<f64>,
    #[arg(long = "exclude-eos")]
    exclude_eos: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lm: Option<PathBuf>,
    /// `source<TAB>reference` per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Use N generated split-mass sentences instead of `--lm`/`--input`.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flattened per-strategy summary for plotting.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Comma-separated: beam, beam-rerank, qa, qa-rerank, mbr.
    #[arg(long)]
    strategies: Option<String>,
    #[command(flatten)]
    qe: QeFlags,
    #[command(flatten)]
    decode: DecodeFlags,
    #[arg(long = "rerank-beams")]
    rerank_beams: Option<usize>,
    #[arg(long = "doc-k")]
    doc_k: Option<usize>,
    #[arg(long = "mbr-samples")]
    mbr_samples: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::TrainLm(a) => train_lm(a),
        Command::Annotate(a) => annotate_cmd(a),
        Command::TrainQe(a) => train_qe(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Rerank(a) => rerank_cmd(a),
        Command::Mbr(a) => mbr_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Compare(a) => compare_cmd(a),
    }
}

/// Config-file values plus bookkeeping of which keys were consumed.
struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Settings {
    fn load(common: &Common) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = &common.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or_default().trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| usage(format!("config line {}: expected `key = value`", i + 1)))?;
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Settings {
            file,
            used: BTreeSet::new(),
        })
    }

    fn opt<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        self.used.insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key `{key}`: cannot parse {v:?}"))),
            None => Ok(None),
        }
    }

    fn get<T: FromStr>(&mut self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Result<T> {
        self.opt(flag, key)?
            .ok_or_else(|| usage(format!("missing required `--{key}`")))
    }

    fn switch(&mut self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get(None, key, false)?)
    }

    /// Rejects config keys no option of this subcommand consumed.
    fn finish(&self) -> Result<()> {
        match self.file.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(usage(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn usage(msg: impl Display) -> Error {
    Error::InvalidConfig(msg.to_string())
}

fn decode_config(s: &mut Settings, f: &DecodeFlags) -> Result<DecodeConfig> {
    let d = DecodeConfig::default();
    let config = DecodeConfig {
        alpha: s.get(f.alpha, "alpha", d.alpha)?,
        num_beams: s.get(f.beams, "beams", d.num_beams)?,
        topk: s.get(f.topk, "topk", d.topk)?,
        max_len: s.get(f.max_len, "max-len", d.max_len)?,
        logprob_floor: s.get(f.logprob_floor, "logprob-floor", d.logprob_floor)?,
        include_eos_in_qe: !s.switch(f.exclude_eos, "exclude-eos")?,
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum QeKind {
    None,
    Oracle,
    Model,
}

/// The QE source chosen on the command line.
#[derive(Debug, Clone)]
enum QeChoice {
    None,
    Oracle,
    Model(Arc<TokenQeClassifier>, PathBuf),
}

impl QeChoice {
    fn resolve(s: &mut Settings, f: &QeFlags, default: &str) -> Result<Self> {
        let kind = s.get(f.qe.clone(), "qe", default.to_string())?;
        let path = s.opt(f.qe_model.clone(), "qe-model")?;
        match kind.as_str() {
            "none" => Ok(QeChoice::None),
            "oracle" => Ok(QeChoice::Oracle),
            "model" => {
                let path = path.ok_or_else(|| usage("`--qe model` needs `--qe-model`"))?;
                let model = TokenQeClassifier::load(&path)?;
                Ok(QeChoice::Model(Arc::new(model), path))
            }
            other => Err(usage(format!("unknown QE kind {other:?}"))),
        }
    }

    fn kind(&self) -> QeKind {
        match self {
            QeChoice::None => QeKind::None,
            QeChoice::Oracle => QeKind::Oracle,
            QeChoice::Model(..) => QeKind::Model,
        }
    }

    fn describe(&self) -> Value {
        match self {
            QeChoice::Model(_, path) => json!({"kind": "model", "path": path}),
            other => json!({"kind": other.kind()}),
        }
    }

    /// QE scorer for one segment; `None` when no QE is selected.
    fn for_segment(&self, reference: Option<&[TokenId]>) -> Result<Option<AnyQe>> {
        match self {
            QeChoice::None => Ok(None),
            QeChoice::Oracle => {
                let reference = reference.ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: "oracle QE needs a reference for every segment".into(),
                })?;
                Ok(Some(AnyQe::Oracle(OracleQe::with_defaults(reference)?)))
            }
            QeChoice::Model(m, _) => Ok(Some(AnyQe::Classifier(Arc::clone(m)))),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes to `path`, or stdout when absent.
fn write_output(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(body.as_bytes()).map_err(|e| Error::io(p, e))?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .collect()
}

/// `source[<TAB>reference]` lines; blank lines are skipped.
fn read_sources(path: &Path) -> Result<Vec<(String, Option<String>)>> {
    Ok(read_lines(path)?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| match l.split_once('\t') {
            Some((s, r)) => (s.trim().to_string(), Some(r.trim().to_string())),
            None => (l.trim().to_string(), None),
        })
        .collect())
}

fn train_lm(a: TrainLmArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let corpus: PathBuf = s.required(a.corpus, "corpus")?;
    let out: PathBuf = s.required(a.out, "out")?;
    let d = NgramConfig::default();
    let config = NgramConfig {
        order: s.get(a.order, "order", d.order)?,
        add_k: s.get(a.add_k, "add-k", d.add_k)?,
        channel_weight: s.get(a.channel_weight, "channel-weight", d.channel_weight)?,
    };
    s.finish()?;
    let mut pairs = Vec::new();
    for (i, line) in read_lines(&corpus)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "expected `source<TAB>target`".into(),
        })?;
        pairs.push((src.to_string(), tgt.to_string()));
    }
    if pairs.is_empty() {
        return Err(Error::Parse { line: 0, msg: "empty corpus".into() });
    }
    let model = NgramScorer::train_text(&pairs, config)?;
    let mut file = model.to_model_file();
    file.push("trained_on", [corpus.display()]);
    file.write(&out)?;
    log::info!("trained on {} pairs, vocabulary {}", pairs.len(), model.vocab().len());
    Ok(())
}

fn annotate_cmd(a: AnnotateArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let input: PathBuf = s.required(a.input, "input")?;
    let out: PathBuf = s.required(a.out, "out")?;
    let chunk = s.get(a.chunk, "chunk", 3)?;
    s.finish()?;
    let file = File::open(&input).map_err(|e| Error::io(&input, e))?;
    let records = group_by_segment(parse_mqm_file(BufReader::new(file))?)?;
    let examples = records
        .iter()
        .map(|r| annotate(r, chunk))
        .collect::<Result<Vec<_>>>()?;
    write_labeled_file(&out, &examples)?;
    let (good, bad, mask) = label_histogram(&examples);
    log::info!("{} examples: {good} GOOD, {bad} BAD, {mask} MASK", examples.len());
    Ok(())
}

fn train_qe(a: TrainQeArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let data: PathBuf = s.required(a.data, "data")?;
    let out: PathBuf = s.required(a.out, "out")?;
    let validation: Option<PathBuf> = s.opt(a.validation, "validation")?;
    let lm: Option<PathBuf> = s.opt(a.lm, "lm")?;
    let d = TrainConfig::default();
    let config = TrainConfig {
        class_weights: (
            s.get(a.w_good, "w-good", d.class_weights.0)?,
            s.get(a.w_bad, "w-bad", d.class_weights.1)?,
        ),
        epochs: s.get(a.epochs, "epochs", d.epochs)?,
        learning_rate: s.get(a.learning_rate, "learning-rate", d.learning_rate)?,
        batch_size: s.get(a.batch_size, "batch-size", d.batch_size)?,
        seed: s.get(a.seed, "seed", d.seed)?,
        patience: s.get(a.patience, "patience", d.patience)?,
    };
    s.finish()?;
    let train = crate::annotation::read_labeled_file(&data)?;
    let held_out = validation
        .as_deref()
        .map(crate::annotation::read_labeled_file)
        .transpose()?;
    let base = lm.as_deref().map(NgramScorer::load).transpose()?;
    let outcome = train_token_qe_with(
        &train,
        held_out.as_deref(),
        base.as_ref().map(|m| m.vocab()),
        &config,
    )?;
    let mut file = outcome.classifier.to_model_file();
    file.push("train_config", [serde_json::to_string(&config)?]);
    file.push("best_macro_f1", [outcome.best_macro_f1]);
    file.push("epochs_run", [outcome.epochs_run]);
    file.write(&out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CandidateRecord {
    tokens: Vec<String>,
    text: String,
    score_nmt: f64,
    score_qe: Option<f64>,
    merged: f64,
    finished: bool,
    nmt_logprobs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NbestRecord {
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    candidates: Vec<CandidateRecord>,
    #[serde(default)]
    unfinished: bool,
    config: Value,
    counters: CostCounters,
}

fn candidate(vocab: &Vocabulary, e: &ScoredEntry) -> CandidateRecord {
    let h = &e.hypothesis;
    CandidateRecord {
        tokens: h.tokens.iter().map(|&t| vocab.token(t).to_string()).collect(),
        text: vocab.decode(&h.tokens),
        score_nmt: e.score_nmt,
        score_qe: e.score_qe,
        merged: e.merged,
        finished: h.finished,
        nmt_logprobs: h.nmt_logprobs.clone(),
    }
}

fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn read_nbest(path: &Path) -> Result<Vec<NbestRecord>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn decode_cmd(a: DecodeArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let lm: PathBuf = s.required(a.lm, "lm")?;
    let input: PathBuf = s.required(a.input, "input")?;
    let out: Option<PathBuf> = s.opt(a.out, "out")?;
    let config = decode_config(&mut s, &a.decode)?;
    let baseline = s.switch(a.baseline, "baseline")?;
    let qe = QeChoice::resolve(&mut s, &a.qe, "none")?;
    s.finish()?;
    let nmt = NgramScorer::load(&lm)?;
    let sources = read_sources(&input)?;
    let plain = baseline || matches!(qe, QeChoice::None);
    let header = json!({
        "command": "decode",
        "lm": lm,
        "input": input,
        "strategy": if plain { "beam" } else { "qa" },
        "qe": qe.describe(),
        "decode": config,
    });
    let vocab = nmt.vocab();
    let records = sources
        .par_iter()
        .map(|(src, reference)| {
            let source = vocab.encode(src);
            let ref_ids = reference.as_deref().map(|r| vocab.encode(r));
            let decoded: Decoded = if plain {
                beam_search(&nmt, &source, &config)?
            } else {
                let q = qe.for_segment(ref_ids.as_deref())?.expect("QE selected");
                qa_beam_search(&nmt, &q, &source, &config)?
            };
            Ok(NbestRecord {
                source: src.clone(),
                reference: reference.clone(),
                candidates: decoded.nbest.entries.iter().map(|e| candidate(vocab, e)).collect(),
                unfinished: decoded.unfinished,
                config: header.clone(),
                counters: decoded.counters,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_output(out.as_deref(), &to_jsonl(&records)?)
}

fn hypothesis_of(vocab: &Vocabulary, c: &CandidateRecord, line: usize) -> Result<Hypothesis> {
    let tokens: Vec<TokenId> = c
        .tokens
        .iter()
        .map(|t| vocab.get(t))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Parse {
            line,
            msg: "candidate token missing from the model vocabulary".into(),
        })?;
    Hypothesis::new(tokens, c.nmt_logprobs.clone()).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

fn rerank_cmd(a: RerankArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let lm: PathBuf = s.required(a.lm, "lm")?;
    let nbest: PathBuf = s.required(a.nbest, "nbest")?;
    let out: Option<PathBuf> = s.opt(a.out, "out")?;
    let config = decode_config(&mut s, &a.decode)?;
    let qe = QeChoice::resolve(&mut s, &a.qe, "oracle")?;
    s.finish()?;
    if matches!(qe, QeChoice::None) {
        return Err(usage("rerank needs `--qe oracle` or `--qe model`"));
    }
    let nmt = NgramScorer::load(&lm)?;
    let vocab = nmt.vocab();
    let header = json!({
        "command": "rerank",
        "lm": lm,
        "nbest": nbest,
        "qe": qe.describe(),
        "decode": config,
    });
    let records = read_nbest(&nbest)?
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            let source = vocab.encode(&rec.source);
            let ref_ids = rec.reference.as_deref().map(|r| vocab.encode(r));
            let q = qe.for_segment(ref_ids.as_deref())?.expect("QE selected");
            let hyps = rec
                .candidates
                .iter()
                .map(|c| hypothesis_of(vocab, c, i + 1))
                .collect::<Result<Vec<_>>>()?;
            let ranked = rerank_nbest(&hyps, &q, &source, &config)?;
            let counters = CostCounters {
                qe_extend_calls: hyps.iter().map(|h| h.len() as u64).sum(),
                merged_evaluations: hyps.len() as u64,
                ..CostCounters::default()
            };
            Ok(NbestRecord {
                candidates: ranked.entries.iter().map(|e| candidate(vocab, e)).collect(),
                config: header.clone(),
                counters,
                ..rec
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_output(out.as_deref(), &to_jsonl(&records)?)
}

fn mbr_cmd(a: MbrArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let lm: PathBuf = s.required(a.lm, "lm")?;
    let input: PathBuf = s.required(a.input, "input")?;
    let out: Option<PathBuf> = s.opt(a.out, "out")?;
    let samples = s.get(a.samples, "samples", 16)?;
    let epsilon = s.get(a.epsilon, "epsilon", 0.02)?;
    let max_len = s.get(a.max_len, "max-len", DecodeConfig::default().max_len)?;
    let seed = s.get(a.seed, "seed", 0)?;
    s.finish()?;
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let nmt = NgramScorer::load(&lm)?;
    let vocab = nmt.vocab();
    let header = json!({
        "command": "mbr",
        "lm": lm,
        "input": input,
        "samples": samples,
        "epsilon": epsilon,
        "max_len": max_len,
        "seed": seed,
        "utility": "token-f1",
    });
    let config = DecodeConfig {
        alpha: 1.0,
        max_len,
        ..DecodeConfig::default()
    };
    let records = read_sources(&input)?
        .par_iter()
        .enumerate()
        .map(|(i, (src, reference))| {
            let source = vocab.encode(src);
            let pool = epsilon_sample(&nmt, &source, epsilon, samples, max_len, seed.wrapping_add(i as u64))?;
            let pick = mbr_decode(&pool, |x, y| token_f1(x.content(), y.content())).expect("non-empty pool");
            let entry = ScoredEntry::score(pool[pick].clone(), &config)?;
            let counters = CostCounters {
                nmt_distribution_calls: pool.iter().map(|h| h.len() as u64).sum(),
                ..CostCounters::default()
            };
            Ok(NbestRecord {
                source: src.clone(),
                reference: reference.clone(),
                candidates: vec![candidate(vocab, &entry)],
                unfinished: !entry.hypothesis.finished,
                config: header.clone(),
                counters,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_output(out.as_deref(), &to_jsonl(&records)?)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|a| (0.0..=1.0).contains(a))
                .ok_or_else(|| usage(format!("bad alpha {v:?} in grid")))
        })
        .collect()
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let lm: PathBuf = s.required(a.lm, "lm")?;
    let nbest: PathBuf = s.required(a.nbest, "nbest")?;
    let out: Option<PathBuf> = s.opt(a.out, "out")?;
    let grid_text = s.get(
        a.grid,
        "grid",
        "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1".to_string(),
    )?;
    let d = DecodeConfig::default();
    let config = DecodeConfig {
        logprob_floor: s.get(a.logprob_floor, "logprob-floor", d.logprob_floor)?,
        include_eos_in_qe: !s.switch(a.exclude_eos, "exclude-eos")?,
        ..d
    };
    let qe = QeChoice::resolve(&mut s, &a.qe, "oracle")?;
    s.finish()?;
    config.validate()?;
    let grid = parse_grid(&grid_text)?;
    if matches!(qe, QeChoice::None) {
        return Err(usage("sweep needs `--qe oracle` or `--qe model`"));
    }
    let nmt = NgramScorer::load(&lm)?;
    let vocab = nmt.vocab();
    let mut segments = Vec::new();
    let mut references = Vec::new();
    for (i, rec) in read_nbest(&nbest)?.into_iter().enumerate() {
        let reference = rec.reference.as_deref().ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "sweep needs a reference for every record".into(),
        })?;
        let ref_ids = vocab.encode(reference);
        let candidates = rec
            .candidates
            .iter()
            .map(|c| hypothesis_of(vocab, c, i + 1))
            .collect::<Result<Vec<_>>>()?;
        segments.push(SweepSegment {
            source: vocab.encode(&rec.source),
            candidates,
            qe: qe.for_segment(Some(&ref_ids))?.expect("QE selected"),
        });
        references.push(ref_ids);
    }
    let points = alpha_sweep(&segments, &grid, &config, |i, h| token_f1(h.content(), &references[i]))?;
    let report = json!({
        "config": {
            "command": "sweep",
            "lm": lm,
            "nbest": nbest,
            "qe": qe.describe(),
            "grid": grid,
            "decode": config,
            "quality": "token-f1",
        },
        "points": points,
    });
    write_output(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&report)?))
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let mut s = Settings::load(&a.common)?;
    let synthetic: Option<usize> = s.opt(a.synthetic, "synthetic")?;
    let lm: Option<PathBuf> = s.opt(a.lm, "lm")?;
    let input: Option<PathBuf> = s.opt(a.input, "input")?;
    let out: Option<PathBuf> = s.opt(a.out, "out")?;
    let csv: Option<PathBuf> = s.opt(a.csv, "csv")?;
    let strategies_text = s.get(
        a.strategies,
        "strategies",
        "beam,beam-rerank,qa,qa-rerank,mbr".to_string(),
    )?;
    let decode = decode_config(&mut s, &a.decode)?;
    let d = CompareConfig::default();
    let strategies = strategies_text
        .split(',')
        .map(|t| t.trim().parse::<Strategy>())
        .collect::<Result<Vec<_>>>()?;
    let config = CompareConfig {
        decode,
        strategies,
        rerank_beams: s.get(a.rerank_beams, "rerank-beams", d.rerank_beams)?,
        doc_k: s.get(a.doc_k, "doc-k", d.doc_k)?,
        mbr_samples: s.get(a.mbr_samples, "mbr-samples", d.mbr_samples)?,
        epsilon: s.get(a.epsilon, "epsilon", d.epsilon)?,
        resamples: s.get(a.resamples, "resamples", d.resamples)?,
        seed: s.get(a.seed, "seed", d.seed)?,
    };
    let qe = QeChoice::resolve(&mut s, &a.qe, "oracle")?;
    s.finish()?;
    if matches!(qe, QeChoice::None) {
        return Err(usage("compare needs `--qe oracle` or `--qe model`"));
    }
    let qe_for = |seg: &Segment| Ok(qe.for_segment(Some(&seg.reference))?.expect("QE selected"));

    let (report, corpus) = match (synthetic, lm, input) {
        (Some(n), None, None) => {
            let (model, segments) = split_mass_corpus(&SplitMassConfig::default(), n, config.seed);
            let report = compare_strategies(&segments, &model, qe_for, &config)?;
            (report, json!({"synthetic": n}))
        }
        (None, Some(lm), Some(input)) => {
            let nmt = NgramScorer::load(&lm)?;
            let vocab = nmt.vocab();
            let segments = read_sources(&input)?
                .into_iter()
                .enumerate()
                .map(|(i, (src, reference))| {
                    let reference = reference.ok_or_else(|| Error::Parse {
                        line: i + 1,
                        msg: "compare needs `source<TAB>reference` lines".into(),
                    })?;
                    Ok(Segment {
                        id: format!("{}", i + 1),
                        source: vocab.encode(&src),
                        reference: vocab.encode(&reference),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let report = compare_strategies(&segments, &nmt, qe_for, &config)?;
            (report, json!({"lm": lm, "input": input}))
        }
        _ => return Err(usage("give either `--synthetic N` or both `--lm` and `--input`")),
    };
    let mut doc = serde_json::to_value(&report)?;
    doc["corpus"] = corpus;
    doc["qe"] = qe.describe();
    write_output(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
    if let Some(path) = csv {
        write_csv(&path, &report)?;
    }
    Ok(())
}

fn write_csv(path: &Path, report: &CompareReport) -> Result<()> {
    let mut body = String::from(
        "strategy,mean_quality,mean_oracle_score,nmt_distribution_calls,qe_extend_calls,merged_evaluations\n",
    );
    for st in &report.strategies {
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            st.strategy,
            st.mean_quality,
            st.mean_oracle_score,
            st.counters.nmt_distribution_calls,
            st.counters.qe_extend_calls,
            st.counters.merged_evaluations
        ));
    }
    write_output(Some(path), &body)
}
