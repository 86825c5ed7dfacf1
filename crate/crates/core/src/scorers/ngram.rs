//! Add-k smoothed n-gram translation scorer with a bag-of-source channel.
//!
//! ```text
//! P(w | ctx, S) = (1 - lambda) * (c(ctx, w) + k) / (c(ctx) + k * |O|)
//!               +      lambda  * mean_{s in S} (c(s, w) + k) / (c(s) + k * |O|)
//! ```
//!
//! `O` is the outcome set: every vocabulary entry except BOS and UNK. `ctx`
//! is the previous `order - 1` target tokens, left-padded with BOS. `c(s, w)`
//! counts co-occurrences of source token `s` and target token `w` (EOS
//! included) within a sentence pair.
//!
//! File layout (`kind ngram`): scalar records `order`, `add_k`,
//! `channel_weight`, the vocabulary, then one `ngram <ctx ids> <next> <count>`
//! record per context/next pair (ctx ids space-separated, `-` when empty) and
//! one `lex <source> <target> <count>` record per lexical pair.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TranslationScorer;
use crate::error::{Error, Result};
use crate::format::{parse_fields, ModelFile};
use crate::vocab::{TokenId, Vocabulary, BOS, EOS, UNK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub order: usize,
    pub add_k: f64,
    /// Interpolation weight of the source channel, in [0, 1].
    pub channel_weight: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            order: 3,
            add_k: 1.0,
            channel_weight: 0.3,
        }
    }
}

impl NgramConfig {
    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidConfig("n-gram order must be positive".into()));
        }
        if self.add_k.is_nan() || self.add_k <= 0.0 {
            return Err(Error::InvalidConfig("add_k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.channel_weight) {
            return Err(Error::InvalidConfig("channel_weight must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Counts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

impl Counts {
    fn add(&mut self, tok: TokenId, n: u64) {
        self.total += n;
        *self.next.entry(tok).or_default() += n;
    }

    fn get(&self, tok: TokenId) -> u64 {
        self.next.get(&tok).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramScorer {
    vocab: Vocabulary,
    config: NgramConfig,
    contexts: BTreeMap<Vec<TokenId>, Counts>,
    lexicon: BTreeMap<TokenId, Counts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramState {
    pub context: Vec<TokenId>,
    /// Channel distribution over the vocabulary, fixed by the source.
    pub channel: Arc<Vec<f64>>,
}

fn is_outcome(id: TokenId) -> bool {
    id != BOS && id != UNK
}

impl NgramScorer {
    /// Trains on id-encoded `(source, target)` pairs; targets exclude EOS.
    pub fn train(
        vocab: Vocabulary,
        corpus: &[(Vec<TokenId>, Vec<TokenId>)],
        config: NgramConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut scorer = NgramScorer {
            vocab,
            config,
            contexts: BTreeMap::new(),
            lexicon: BTreeMap::new(),
        };
        let width = scorer.config.order - 1;
        for (source, target) in corpus {
            let mut seq = vec![BOS; width];
            seq.extend(target.iter().copied());
            seq.push(EOS);
            for i in width..seq.len() {
                scorer
                    .contexts
                    .entry(seq[i - width..i].to_vec())
                    .or_default()
                    .add(seq[i], 1);
            }
            for &s in source {
                let entry = scorer.lexicon.entry(s).or_default();
                for &w in &seq[width..] {
                    entry.add(w, 1);
                }
            }
        }
        Ok(scorer)
    }

    /// Builds the vocabulary from both sides of a whitespace-tokenized corpus
    /// and trains on it.
    pub fn train_text(pairs: &[(String, String)], config: NgramConfig) -> Result<Self> {
        let vocab = Vocabulary::new(
            pairs
                .iter()
                .flat_map(|(s, t)| s.split_whitespace().chain(t.split_whitespace())),
        )?;
        let corpus: Vec<_> = pairs
            .iter()
            .map(|(s, t)| (vocab.encode(s), vocab.encode(t)))
            .collect();
        NgramScorer::train(vocab, &corpus, config)
    }

    pub fn config(&self) -> &NgramConfig {
        &self.config
    }

    fn num_outcomes(&self) -> f64 {
        (self.vocab.len() - 2) as f64
    }

    fn smoothed(&self, counts: Option<&Counts>, tok: TokenId) -> f64 {
        let k = self.config.add_k;
        let (c, total) = counts.map_or((0, 0), |c| (c.get(tok), c.total));
        (c as f64 + k) / (total as f64 + k * self.num_outcomes())
    }

    fn channel(&self, source: &[TokenId]) -> Vec<f64> {
        let mut dist = vec![0.0; self.vocab.len()];
        let uniform = 1.0 / self.num_outcomes();
        for id in 0..self.vocab.len() as TokenId {
            if !is_outcome(id) {
                continue;
            }
            dist[id as usize] = if source.is_empty() {
                uniform
            } else {
                source
                    .iter()
                    .map(|s| self.smoothed(self.lexicon.get(s), id))
                    .sum::<f64>()
                    / source.len() as f64
            };
        }
        dist
    }

    pub fn to_model_file(&self) -> ModelFile {
        let mut file = ModelFile::new("ngram");
        file.push("order", [self.config.order]);
        file.push("add_k", [self.config.add_k]);
        file.push("channel_weight", [self.config.channel_weight]);
        file.push_vocab(&self.vocab);
        for (ctx, counts) in &self.contexts {
            let ctx = if ctx.is_empty() {
                "-".to_string()
            } else {
                ctx.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
            };
            for (next, n) in &counts.next {
                file.push("ngram", [ctx.clone(), next.to_string(), n.to_string()]);
            }
        }
        for (src, counts) in &self.lexicon {
            for (tgt, n) in &counts.next {
                file.push("lex", [src.to_string(), tgt.to_string(), n.to_string()]);
            }
        }
        file
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self> {
        file.expect_kind("ngram")?;
        let config = NgramConfig {
            order: file.scalar("order")?,
            add_k: file.scalar("add_k")?,
            channel_weight: file.scalar("channel_weight")?,
        };
        config.validate()?;
        let vocab = file.read_vocab()?;
        let check = |id: TokenId| -> Result<TokenId> {
            if (id as usize) < vocab.len() {
                Ok(id)
            } else {
                Err(Error::format(format!("token id {id} outside vocabulary")))
            }
        };
        let mut contexts: BTreeMap<Vec<TokenId>, Counts> = BTreeMap::new();
        for fields in file.all("ngram") {
            let [ctx, next, n] = fields else {
                return Err(Error::format("`ngram` expects 3 fields"));
            };
            let ctx: Vec<TokenId> = if ctx == "-" {
                Vec::new()
            } else {
                let parts: Vec<String> = ctx.split(' ').map(str::to_string).collect();
                parse_fields::<TokenId>("ngram", &parts)?
            };
            if ctx.len() != config.order - 1 {
                return Err(Error::format("context length does not match order"));
            }
            for &c in &ctx {
                check(c)?;
            }
            let [next, n] = parse_fields::<u64>("ngram", &[next.clone(), n.clone()])?[..] else {
                unreachable!()
            };
            contexts.entry(ctx).or_default().add(check(next as TokenId)?, n);
        }
        let mut lexicon: BTreeMap<TokenId, Counts> = BTreeMap::new();
        for fields in file.all("lex") {
            let [s, t, n] = parse_fields::<u64>("lex", fields)?[..] else {
                return Err(Error::format("`lex` expects 3 fields"));
            };
            lexicon
                .entry(check(s as TokenId)?)
                .or_default()
                .add(check(t as TokenId)?, n);
        }
        Ok(NgramScorer {
            vocab,
            config,
            contexts,
            lexicon,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_model_file().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        NgramScorer::from_model_file(&ModelFile::read(path)?)
    }
}

impl TranslationScorer for NgramScorer {
    type State = NgramState;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn init(&self, source: &[TokenId]) -> NgramState {
        NgramState {
            context: vec![BOS; self.config.order - 1],
            channel: Arc::new(self.channel(source)),
        }
    }

    fn next_token_logprobs(&self, state: &NgramState) -> Vec<f64> {
        let counts = self.contexts.get(&state.context);
        let lambda = self.config.channel_weight;
        (0..self.vocab.len() as TokenId)
            .map(|id| {
                if !is_outcome(id) {
                    return f64::NEG_INFINITY;
                }
                let p = (1.0 - lambda) * self.smoothed(counts, id)
                    + lambda * state.channel[id as usize];
                p.ln()
            })
            .collect()
    }

    fn advance(&self, state: &NgramState, token: TokenId) -> NgramState {
        let mut context = state.context.clone();
        if !context.is_empty() {
            context.remove(0);
            context.push(token);
        }
        NgramState {
            context,
            channel: Arc::clone(&state.channel),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::total_mass;

    fn pairs(lines: &[(&str, &str)]) -> Vec<(String, String)> {
        lines
            .iter()
            .map(|(s, t)| (s.to_string(), t.to_string()))
            .collect()
    }

    fn argmax(v: &[f64]) -> TokenId {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if *x > v[best] {
                best = i;
            }
        }
        best as TokenId
    }

    #[test]
    fn hand_bigram_add_one() {
        // a->b three times, a->c once; outcomes {EOS, a, b, c}.
        let corpus = pairs(&[("a", "a b"), ("a", "a b"), ("a", "a b"), ("a", "a c")]);
        let cfg = NgramConfig {
            order: 2,
            add_k: 1.0,
            channel_weight: 0.0,
        };
        let lm = NgramScorer::train_text(&corpus, cfg).unwrap();
        let v = lm.vocab().clone();
        assert_eq!(lm.num_outcomes(), 4.0);
        let state = lm.advance(&lm.init(&v.encode("a")), v.id("a"));
        let lp = lm.next_token_logprobs(&state);
        assert!((lp[v.id("b") as usize] - (4.0f64 / 8.0).ln()).abs() < 1e-12);
        assert!((lp[v.id("c") as usize] - (2.0f64 / 8.0).ln()).abs() < 1e-12);
        assert_eq!(lp[BOS as usize], f64::NEG_INFINITY);
        assert_eq!(lp[UNK as usize], f64::NEG_INFINITY);
    }

    #[test]
    fn distributions_are_normalized() {
        let corpus = pairs(&[("x y", "p q r"), ("y z", "q r s"), ("x", "p")]);
        let lm = NgramScorer::train_text(&corpus, NgramConfig::default()).unwrap();
        let v = lm.vocab().clone();
        let mut state = lm.init(&v.encode("x y q"));
        for tok in v.encode("p q zz r") {
            assert!((total_mass(&lm.next_token_logprobs(&state)) - 1.0).abs() < 1e-9);
            state = lm.advance(&state, tok);
        }
        let empty = lm.init(&[]);
        assert!((total_mass(&lm.next_token_logprobs(&empty)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_sentence_corpus_follows_its_path() {
        let corpus = pairs(&[("ich spiele tennis", "i play tennis")]);
        let lm = NgramScorer::train_text(&corpus, NgramConfig::default()).unwrap();
        let v = lm.vocab().clone();
        let mut state = lm.init(&v.encode("ich spiele tennis"));
        let mut out = Vec::new();
        for _ in 0..10 {
            let tok = argmax(&lm.next_token_logprobs(&state));
            out.push(tok);
            if tok == EOS {
                break;
            }
            state = lm.advance(&state, tok);
        }
        assert_eq!(v.decode(&out), "i play tennis");
        assert_eq!(out.last(), Some(&EOS));
    }

    #[test]
    fn init_is_deterministic_and_state_round_trips() {
        let corpus = pairs(&[("a b", "c d"), ("b", "d e")]);
        let lm = NgramScorer::train_text(&corpus, NgramConfig::default()).unwrap();
        let v = lm.vocab().clone();
        let src = v.encode("a b zz");
        let s1 = lm.advance(&lm.init(&src), v.id("c"));
        let s2 = lm.advance(&lm.init(&src), v.id("c"));
        assert_eq!(lm.next_token_logprobs(&s1), lm.next_token_logprobs(&s2));
        let json = serde_json::to_string(&s1).unwrap();
        let back: NgramState = serde_json::from_str(&json).unwrap();
        assert_eq!(lm.next_token_logprobs(&s1), lm.next_token_logprobs(&back));
    }

    #[test]
    fn advancing_does_not_mutate_parent() {
        let corpus = pairs(&[("a", "b c")]);
        let lm = NgramScorer::train_text(&corpus, NgramConfig::default()).unwrap();
        let s0 = lm.init(&[3]);
        let before = s0.clone();
        let _ = lm.advance(&s0, 4);
        assert_eq!(s0, before);
    }

    #[test]
    fn model_file_round_trip() {
        let corpus = pairs(&[("a b", "c d"), ("b", "d e"), ("a", "c")]);
        for order in [1, 2, 3] {
            let cfg = NgramConfig {
                order,
                ..Default::default()
            };
            let lm = NgramScorer::train_text(&corpus, cfg).unwrap();
            let text = lm.to_model_file().to_text();
            let back = NgramScorer::from_model_file(&ModelFile::parse(&text).unwrap()).unwrap();
            assert_eq!(back, lm);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let corpus = pairs(&[("a", "b")]);
        for cfg in [
            NgramConfig { order: 0, ..Default::default() },
            NgramConfig { add_k: 0.0, ..Default::default() },
            NgramConfig { channel_weight: 1.5, ..Default::default() },
        ] {
            assert!(NgramScorer::train_text(&corpus, cfg).is_err());
        }
    }
}
