#![allow(dead_code)]

use qad_core::scorers::{OracleQe, QeScorer, TableScorer};
use qad_core::{DecodeConfig, TokenId, TranslationScorer, Vocabulary, BOS, EOS, UNK};
use rand::{Rng, SeedableRng};

/// Random tiny decoding problem: a bigram table over at most six ids, an
/// oracle QE bound to a random reference, and a random configuration.
pub struct Instance {
    pub nmt: TableScorer,
    pub qe: OracleQe,
    pub config: DecodeConfig,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let content = rng.gen_range(1..=3);
    let vocab = Vocabulary::new((0..content).map(|i| format!("w{i}"))).unwrap();
    let nmt = TableScorer::random_bigram(vocab.clone(), rng);
    let ids: Vec<TokenId> = vocab.content_ids().collect();
    let reference: Vec<TokenId> = (0..rng.gen_range(1..=3))
        .map(|_| ids[rng.gen_range(0..ids.len())])
        .collect();
    let qe = OracleQe::with_defaults(&reference).unwrap();
    let alpha = match rng.gen_range(0..4) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen::<f64>(),
    };
    let config = DecodeConfig {
        alpha,
        max_len: rng.gen_range(1..=5),
        include_eos_in_qe: rng.gen_bool(0.7),
        ..DecodeConfig::default()
    };
    Instance { nmt, qe, config }
}

/// Tokens a translation model may emit.
pub fn outcomes(vocab: &Vocabulary) -> Vec<TokenId> {
    (0..vocab.len() as TokenId)
        .filter(|&t| t != BOS && t != UNK)
        .collect()
}

/// Number of EOS-terminated sequences of at most `max_len` tokens.
pub fn space_size(vocab: &Vocabulary, max_len: usize) -> usize {
    let content = outcomes(vocab).len() - 1;
    (0..max_len).map(|l| content.pow(l as u32)).sum()
}

/// Every EOS-terminated sequence of at most `max_len` tokens, built by
/// counting in base |content|.
pub fn all_sequences(vocab: &Vocabulary, max_len: usize) -> Vec<Vec<TokenId>> {
    let content: Vec<TokenId> = outcomes(vocab).into_iter().filter(|&t| t != EOS).collect();
    let mut out = Vec::new();
    for len in 0..max_len {
        let total = content.len().pow(len as u32);
        for mut code in 0..total {
            let mut seq = Vec::with_capacity(len + 1);
            for _ in 0..len {
                seq.push(content[code % content.len()]);
                code /= content.len();
            }
            seq.push(EOS);
            out.push(seq);
        }
    }
    out
}

/// Per-token translation log-probs of `seq`, read off the model one step at
/// a time.
pub fn nmt_logprobs<N: TranslationScorer>(nmt: &N, source: &[TokenId], seq: &[TokenId]) -> Vec<f64> {
    let mut state = nmt.init(source);
    seq.iter()
        .map(|&t| {
            let lp = nmt.next_token_logprobs(&state)[t as usize];
            state = nmt.advance(&state, t);
            lp
        })
        .collect()
}

/// Merged score computed directly from the definition.
pub fn merged_by_hand(nmt_lps: &[f64], qe_lps: &[f64], config: &DecodeConfig) -> f64 {
    let nmt = nmt_lps.iter().sum::<f64>() / nmt_lps.len() as f64;
    let mut qe: Vec<f64> = qe_lps.iter().map(|lp| lp.max(config.logprob_floor)).collect();
    if !config.include_eos_in_qe && qe.len() > 1 {
        qe.pop();
    }
    let qe = qe.iter().sum::<f64>() / qe.len() as f64;
    config.alpha * nmt + (1.0 - config.alpha) * qe
}

/// Best merged score over the whole space, enumerated without the decoder.
pub fn brute_force_best(inst: &Instance) -> f64 {
    all_sequences(inst.nmt.vocab(), inst.config.max_len)
        .iter()
        .map(|seq| {
            let nmt = nmt_logprobs(&inst.nmt, &[], seq);
            let qe = inst.qe.score_tokens(&[], seq);
            merged_by_hand(&nmt, &qe, &inst.config)
        })
        .filter(|s| s.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sentences over `w0..w4` plus the token `bad`, which is the only BAD
/// token. Roughly a third of the examples contain one masked span ending in
/// a `bad` token.
pub fn separable_dataset<R: Rng>(rng: &mut R, n: usize) -> Vec<qad_core::scorers::LabeledExample> {
    use qad_core::annotation::TokenLabel;
    let words = ["w0", "w1", "w2", "w3", "w4"];
    (0..n)
        .map(|_| {
            let len = rng.gen_range(2..7);
            let mut target = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..len {
                if rng.gen_bool(0.25) {
                    target.push("bad".to_string());
                    labels.push(TokenLabel::Bad);
                } else {
                    target.push(words[rng.gen_range(0..words.len())].to_string());
                    labels.push(TokenLabel::Good);
                }
            }
            if rng.gen_bool(0.3) {
                // a two-token span: interior masked, terminal `bad`
                target.push(words[rng.gen_range(0..words.len())].to_string());
                labels.push(TokenLabel::Mask);
                target.push("bad".to_string());
                labels.push(TokenLabel::Bad);
            }
            let source = (0..len).map(|i| words[i % words.len()].to_string()).collect();
            qad_core::scorers::LabeledExample::new(source, target, labels).unwrap()
        })
        .collect()
}

/// Classifier over six content tokens with weights drawn uniformly from
/// [-4, 4).
pub fn random_classifier(seed: u64) -> qad_core::scorers::TokenQeClassifier {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::new((0..6).map(|i| format!("t{i}"))).unwrap();
    let dim = 1 + 2 * vocab.len() + 8 + 2;
    let weights = (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect();
    qad_core::scorers::TokenQeClassifier::from_weights(vocab, weights).unwrap()
}
