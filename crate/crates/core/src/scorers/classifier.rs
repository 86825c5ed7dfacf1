//! Trainable token-level QE: logistic regression over causal features.
//!
//! Each target token is described by one-hot blocks that only look left:
//! the current token, the previous token (BOS at position 0), a position
//! bucket, and whether the current token also appears in the source. The
//! model predicts `P(GOOD) = sigmoid(w . x)`.
//!
//! Training minimizes class-weighted cross-entropy over GOOD/BAD tokens with
//! seeded mini-batch SGD. MASK tokens never enter the loss, but still act as
//! the previous-token context of their right neighbour.
//!
//! File layout (`kind token-qe`): `class_weights <good> <bad>`, `buckets`,
//! the vocabulary, and one `weights` record holding every parameter.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QeScorer;
use crate::annotation::TokenLabel;
use crate::error::{Error, Result};
use crate::format::{parse_fields, ModelFile};
use crate::vocab::{TokenId, Vocabulary, BOS, UNK};

const BUCKETS: usize = 8;

fn bucket(position: usize) -> usize {
    match position {
        0..=3 => position,
        4..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        _ => 7,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub labels: Vec<TokenLabel>,
}

impl LabeledExample {
    pub fn new(
        source_tokens: Vec<String>,
        target_tokens: Vec<String>,
        labels: Vec<TokenLabel>,
    ) -> Result<Self> {
        if target_tokens.len() != labels.len() {
            return Err(Error::LengthMismatch(target_tokens.len(), labels.len()));
        }
        Ok(LabeledExample {
            source_tokens,
            target_tokens,
            labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Loss weights for (GOOD, BAD).
    pub class_weights: (f64, f64),
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many evaluations without a macro-F1 improvement.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            class_weights: (0.05, 0.95),
            epochs: 200,
            learning_rate: 1.0,
            batch_size: 32,
            seed: 0,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenQeClassifier {
    vocab: Vocabulary,
    weights: Vec<f64>,
    class_weights: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub classifier: TokenQeClassifier,
    pub best_macro_f1: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct ClassifierState {
    prev: TokenId,
    position: usize,
    source: Arc<HashSet<TokenId>>,
}

impl TokenQeClassifier {
    /// A classifier with explicit parameters, laid out as
    /// `[bias | current (V) | previous (V) | position buckets | in-source (2)]`.
    pub fn from_weights(vocab: Vocabulary, weights: Vec<f64>) -> Result<Self> {
        let dim = Self::dim_for(&vocab);
        if weights.len() != dim {
            return Err(Error::LengthMismatch(weights.len(), dim));
        }
        Ok(TokenQeClassifier {
            vocab,
            weights,
            class_weights: TrainConfig::default().class_weights,
        })
    }

    fn dim_for(vocab: &Vocabulary) -> usize {
        1 + 2 * vocab.len() + BUCKETS + 2
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn class_weights(&self) -> (f64, f64) {
        self.class_weights
    }

    fn clip(&self, id: TokenId) -> usize {
        if (id as usize) < self.vocab.len() {
            id as usize
        } else {
            UNK as usize
        }
    }

    fn features(&self, cur: TokenId, prev: TokenId, position: usize, in_source: bool) -> [usize; 5] {
        let v = self.vocab.len();
        [
            0,
            1 + self.clip(cur),
            1 + v + self.clip(prev),
            1 + 2 * v + bucket(position),
            1 + 2 * v + BUCKETS + in_source as usize,
        ]
    }

    fn logit(&self, feats: &[usize; 5]) -> f64 {
        feats.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn to_model_file(&self) -> ModelFile {
        let mut file = ModelFile::new("token-qe");
        file.push("class_weights", [self.class_weights.0, self.class_weights.1]);
        file.push("buckets", [BUCKETS]);
        file.push_vocab(&self.vocab);
        file.push("weights", self.weights.iter());
        file
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self> {
        file.expect_kind("token-qe")?;
        if file.scalar::<usize>("buckets")? != BUCKETS {
            return Err(Error::format("unsupported bucket count"));
        }
        let cw = file
            .first("class_weights")
            .ok_or_else(|| Error::format("missing `class_weights`"))?;
        let [good, bad] = parse_fields::<f64>("class_weights", cw)?[..] else {
            return Err(Error::format("`class_weights` expects 2 fields"));
        };
        let vocab = file.read_vocab()?;
        let weights = parse_fields(
            "weights",
            file.first("weights")
                .ok_or_else(|| Error::format("missing `weights`"))?,
        )?;
        let mut model = TokenQeClassifier::from_weights(vocab, weights)
            .map_err(|_| Error::format("weight count does not match vocabulary"))?;
        model.class_weights = (good, bad);
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_model_file().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        TokenQeClassifier::from_model_file(&ModelFile::read(path)?)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(z)` without overflow.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `P(GOOD)` per target token, computed left to right from scratch.
pub fn classify_tokens(model: &TokenQeClassifier, source: &[TokenId], target: &[TokenId]) -> Vec<f64> {
    let in_source: HashSet<TokenId> = source.iter().copied().collect();
    target
        .iter()
        .enumerate()
        .map(|(i, &tok)| {
            let prev = if i == 0 { BOS } else { target[i - 1] };
            sigmoid(model.logit(&model.features(tok, prev, i, in_source.contains(&tok))))
        })
        .collect()
}

impl QeScorer for TokenQeClassifier {
    type State = ClassifierState;

    fn vocab(&self) -> Option<&Vocabulary> {
        Some(&self.vocab)
    }

    fn init(&self, source: &[TokenId]) -> ClassifierState {
        ClassifierState {
            prev: BOS,
            position: 0,
            source: Arc::new(source.iter().copied().collect()),
        }
    }

    fn extend(&self, state: &ClassifierState, token: TokenId) -> (ClassifierState, f64) {
        let feats = self.features(token, state.prev, state.position, state.source.contains(&token));
        let lp = log_sigmoid(self.logit(&feats));
        let next = ClassifierState {
            prev: token,
            position: state.position + 1,
            source: Arc::clone(&state.source),
        };
        (next, lp)
    }

    fn score_tokens(&self, source: &[TokenId], target: &[TokenId]) -> Vec<f64> {
        let in_source: HashSet<TokenId> = source.iter().copied().collect();
        target
            .iter()
            .enumerate()
            .map(|(i, &tok)| {
                let prev = if i == 0 { BOS } else { target[i - 1] };
                log_sigmoid(self.logit(&self.features(tok, prev, i, in_source.contains(&tok))))
            })
            .collect()
    }
}

/// Unweighted mean of per-class F1 over the classes present in `gold`.
/// `true` means GOOD.
pub fn macro_f1(gold: &[bool], pred: &[bool]) -> f64 {
    let mut f1s = Vec::new();
    for class in [true, false] {
        if !gold.contains(&class) {
            continue;
        }
        let tp = gold.iter().zip(pred).filter(|(g, p)| **g == class && **p == class).count();
        let fp = gold.iter().zip(pred).filter(|(g, p)| **g != class && **p == class).count();
        let fn_ = gold.iter().zip(pred).filter(|(g, p)| **g == class && **p != class).count();
        let denom = 2 * tp + fp + fn_;
        f1s.push(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 });
    }
    if f1s.is_empty() {
        0.0
    } else {
        f1s.iter().sum::<f64>() / f1s.len() as f64
    }
}

struct Instance {
    feats: [usize; 5],
    good: bool,
}

fn instances(model: &TokenQeClassifier, data: &[LabeledExample]) -> Vec<Instance> {
    let mut out = Vec::new();
    for ex in data {
        let source: Vec<TokenId> = ex.source_tokens.iter().map(|t| model.vocab.id(t)).collect();
        let target: Vec<TokenId> = ex.target_tokens.iter().map(|t| model.vocab.id(t)).collect();
        let in_source: HashSet<TokenId> = source.into_iter().collect();
        for (i, (&tok, label)) in target.iter().zip(&ex.labels).enumerate() {
            let good = match label {
                TokenLabel::Good => true,
                TokenLabel::Bad => false,
                TokenLabel::Mask => continue,
            };
            let prev = if i == 0 { BOS } else { target[i - 1] };
            out.push(Instance {
                feats: model.features(tok, prev, i, in_source.contains(&tok)),
                good,
            });
        }
    }
    out
}

fn evaluate(model: &TokenQeClassifier, set: &[Instance]) -> f64 {
    let gold: Vec<bool> = set.iter().map(|x| x.good).collect();
    let pred: Vec<bool> = set
        .iter()
        .map(|x| sigmoid(model.logit(&x.feats)) >= 0.5)
        .collect();
    macro_f1(&gold, &pred)
}

pub fn train_token_qe(data: &[LabeledExample], config: &TrainConfig) -> Result<TrainOutcome> {
    train_token_qe_with(data, None, None, config)
}

/// Trains with an optional validation set for early stopping (the training
/// set is used otherwise) and an optional base vocabulary whose ids are kept.
pub fn train_token_qe_with(
    data: &[LabeledExample],
    validation: Option<&[LabeledExample]>,
    base_vocab: Option<&Vocabulary>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("no training examples".into()));
    }
    let (w_good, w_bad) = config.class_weights;
    if !(w_good >= 0.0 && w_bad >= 0.0 && w_good + w_bad > 0.0) {
        return Err(Error::InvalidConfig("class weights must be non-negative".into()));
    }
    if config.batch_size == 0 || config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(Error::InvalidConfig("batch_size and learning_rate must be positive".into()));
    }
    for ex in data.iter().chain(validation.unwrap_or_default()) {
        if ex.labels.len() != ex.target_tokens.len() {
            return Err(Error::LengthMismatch(ex.target_tokens.len(), ex.labels.len()));
        }
    }

    let all_tokens = data
        .iter()
        .chain(validation.unwrap_or_default())
        .flat_map(|ex| ex.source_tokens.iter().chain(&ex.target_tokens));
    let vocab = match base_vocab {
        Some(base) => base.extended(all_tokens)?,
        None => Vocabulary::new(all_tokens)?,
    };
    let mut model = TokenQeClassifier {
        weights: vec![0.0; TokenQeClassifier::dim_for(&vocab)],
        vocab,
        class_weights: config.class_weights,
    };

    let train = instances(&model, data);
    if train.is_empty() {
        return Err(Error::AllMasked);
    }
    if train.iter().all(|x| x.good) || train.iter().all(|x| !x.good) {
        log::warn!("training data contains a single class; predictions will lean constant");
    }
    let held_out = validation.map(|v| instances(&model, v));
    let eval_set = held_out.as_deref().filter(|v| !v.is_empty()).unwrap_or(&train);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (evaluate(&model, eval_set), model.weights.clone());
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut grad = vec![0.0; model.weights.len()];

    for _ in 0..config.epochs {
        epochs_run += 1;
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let norm: f64 = batch
                .iter()
                .map(|&i| if train[i].good { w_good } else { w_bad })
                .sum();
            if norm == 0.0 {
                continue;
            }
            for &i in batch {
                let x = &train[i];
                let (w, y) = if x.good { (w_good, 1.0) } else { (w_bad, 0.0) };
                let g = w * (sigmoid(model.logit(&x.feats)) - y);
                for &f in &x.feats {
                    grad[f] += g;
                }
            }
            for &i in batch {
                for &f in &train[i].feats {
                    if grad[f] != 0.0 {
                        model.weights[f] -= config.learning_rate * grad[f] / norm;
                        grad[f] = 0.0;
                    }
                }
            }
        }
        let f1 = evaluate(&model, eval_set);
        if f1 > best.0 {
            best = (f1, model.weights.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    model.weights = best.1;
    Ok(TrainOutcome {
        classifier: model,
        best_macro_f1: best.0,
        epochs_run,
    })
}
