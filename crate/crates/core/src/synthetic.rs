//! Constructed corpora where the correct continuation's probability mass is
//! split across two tokens.
//!
//! Source word `x<i>` translates to target word `y<i>` at the same position.
//! Most source words are plain: the correct target gets 0.9. Trap words
//! split the correct reading over the reference token (0.25) and an
//! alternate (0.25), while one wrong token gets 0.30 and so wins every
//! per-step comparison. Past the end of the source, EOS gets 0.95.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::Segment;
use crate::scorers::TranslationScorer;
use crate::vocab::{TokenId, Vocabulary, EOS};

pub const PLAIN_CORRECT: f64 = 0.9;
pub const TRAP_CORRECT: f64 = 0.25;
pub const TRAP_ALTERNATE: f64 = 0.25;
pub const TRAP_WRONG: f64 = 0.30;
pub const EOS_LEAK: f64 = 1e-3;
pub const FINAL_EOS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexEntry {
    pub correct: TokenId,
    /// `(alternate, wrong)` for trap words.
    pub trap: Option<(TokenId, TokenId)>,
}

/// Position-aligned translation model over a fixed lexicon.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    vocab: Vocabulary,
    targets: Vec<TokenId>,
    lexicon: HashMap<TokenId, LexEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexState {
    position: usize,
    source: Arc<Vec<TokenId>>,
}

impl LexiconScorer {
    /// `plain` plain source words and `traps` trap words. Each trap word
    /// owns its own alternate and wrong target words.
    pub fn new(plain: usize, traps: usize) -> Self {
        let words = plain + traps;
        let source: Vec<String> = (0..words).map(|i| format!("x{i}")).collect();
        let mut target: Vec<String> = (0..words).map(|i| format!("y{i}")).collect();
        for i in 0..traps {
            target.push(format!("alt{i}"));
            target.push(format!("bad{i}"));
        }
        let vocab = Vocabulary::new(source.iter().chain(&target)).expect("generated tokens are valid");
        let targets: Vec<TokenId> = target.iter().map(|t| vocab.id(t)).collect();
        let lexicon = (0..words)
            .map(|i| {
                let trap = (i >= plain).then(|| {
                    let t = i - plain;
                    (vocab.id(&format!("alt{t}")), vocab.id(&format!("bad{t}")))
                });
                let entry = LexEntry {
                    correct: vocab.id(&format!("y{i}")),
                    trap,
                };
                (vocab.id(&format!("x{i}")), entry)
            })
            .collect();
        LexiconScorer {
            vocab,
            targets,
            lexicon,
        }
    }

    pub fn plain_words(&self) -> Vec<TokenId> {
        self.sorted_sources(false)
    }

    pub fn trap_words(&self) -> Vec<TokenId> {
        self.sorted_sources(true)
    }

    fn sorted_sources(&self, trap: bool) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = self
            .lexicon
            .iter()
            .filter(|(_, e)| e.trap.is_some() == trap)
            .map(|(&s, _)| s)
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn entry(&self, source_word: TokenId) -> Option<&LexEntry> {
        self.lexicon.get(&source_word)
    }

    /// The reference translation of `source`.
    pub fn reference(&self, source: &[TokenId]) -> Vec<TokenId> {
        source
            .iter()
            .map(|s| self.lexicon.get(s).map_or(EOS, |e| e.correct))
            .collect()
    }

    fn distribution(&self, state: &LexState) -> Vec<f64> {
        let mut probs = vec![0.0; self.vocab.len()];
        let mut fixed: Vec<(TokenId, f64)> = Vec::new();
        match state.source.get(state.position).and_then(|s| self.lexicon.get(s)) {
            Some(LexEntry { correct, trap: None }) => {
                fixed.push((*correct, PLAIN_CORRECT));
                fixed.push((EOS, EOS_LEAK));
            }
            Some(LexEntry { correct, trap: Some((alt, wrong)) }) => {
                fixed.push((*correct, TRAP_CORRECT));
                fixed.push((*alt, TRAP_ALTERNATE));
                fixed.push((*wrong, TRAP_WRONG));
                fixed.push((EOS, EOS_LEAK));
            }
            None if state.position >= state.source.len() => fixed.push((EOS, FINAL_EOS)),
            None => {}
        }
        let rest: Vec<TokenId> = self
            .targets
            .iter()
            .copied()
            .chain([EOS])
            .filter(|t| !fixed.iter().any(|(f, _)| f == t))
            .collect();
        let left = 1.0 - fixed.iter().map(|(_, p)| p).sum::<f64>();
        for &t in &rest {
            probs[t as usize] = left / rest.len() as f64;
        }
        for (t, p) in fixed {
            probs[t as usize] = p;
        }
        probs
    }
}

impl TranslationScorer for LexiconScorer {
    type State = LexState;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn init(&self, source: &[TokenId]) -> LexState {
        LexState {
            position: 0,
            source: Arc::new(source.to_vec()),
        }
    }

    fn next_token_logprobs(&self, state: &LexState) -> Vec<f64> {
        self.distribution(state).into_iter().map(f64::ln).collect()
    }

    fn advance(&self, state: &LexState, _token: TokenId) -> LexState {
        LexState {
            position: state.position + 1,
            source: Arc::clone(&state.source),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitMassConfig {
    pub plain_words: usize,
    pub trap_words: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Chance that a sentence contains one trap word.
    pub trap_rate: f64,
}

impl Default for SplitMassConfig {
    fn default() -> Self {
        SplitMassConfig {
            plain_words: 6,
            trap_words: 2,
            min_len: 3,
            max_len: 5,
            trap_rate: 0.75,
        }
    }
}

/// The lexicon model and `count` sentences with at most one trap word each.
pub fn split_mass_corpus(config: &SplitMassConfig, count: usize, seed: u64) -> (LexiconScorer, Vec<Segment>) {
    let model = LexiconScorer::new(config.plain_words.max(1), config.trap_words.max(1));
    let plain = model.plain_words();
    let traps = model.trap_words();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segments = (0..count)
        .map(|i| {
            let len = rng.gen_range(config.min_len.max(1)..=config.max_len.max(config.min_len.max(1)));
            let mut source: Vec<TokenId> = (0..len).map(|_| *plain.choose(&mut rng).unwrap()).collect();
            if rng.gen_bool(config.trap_rate) {
                let at = rng.gen_range(0..len);
                source[at] = *traps.choose(&mut rng).unwrap();
            }
            Segment {
                id: format!("s{i}"),
                reference: model.reference(&source),
                source,
            }
        })
        .collect();
    (model, segments)
}

/// A single segment whose source holds `traps` trap words between plain
/// words, alternating plain and trap.
pub fn trap_instance(traps: usize) -> (LexiconScorer, Segment) {
    let model = LexiconScorer::new(2, traps.max(1));
    let plain = model.plain_words();
    let trap_words = model.trap_words();
    let mut source = vec![plain[0]];
    for (t, &w) in trap_words.iter().enumerate().take(traps) {
        source.push(w);
        source.push(plain[(t + 1) % plain.len()]);
    }
    let segment = Segment {
        id: format!("traps{traps}"),
        reference: model.reference(&source),
        source,
    };
    (model, segment)
}
