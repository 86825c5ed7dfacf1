mod common;

use std::sync::Arc;

use common::{random_classifier, separable_dataset};
use proptest::prelude::*;
use qad_core::annotation::TokenLabel;
use qad_core::scorers::{
    classify_tokens, macro_f1, total_mass, train_token_qe, AnyQe, NgramConfig, NgramScorer,
    OracleQe, QeScorer, TokenQeClassifier, TrainConfig,
};
use qad_core::{TokenId, TranslationScorer, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ids(max: TokenId, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<TokenId>> {
    prop::collection::vec(0..max, len)
}

proptest! {
    #[test]
    fn classifier_incremental_matches_scratch(
        seed in 0u64..50,
        source in ids(12, 0..5),
        target in ids(12, 1..40),
    ) {
        let model = random_classifier(seed);
        let scratch = classify_tokens(&model, &source, &target);
        let mut state = model.init(&source);
        for (i, &tok) in target.iter().enumerate() {
            let (next, lp) = model.extend(&state, tok);
            prop_assert!(lp <= 0.0);
            prop_assert!((lp.exp() - scratch[i]).abs() < 1e-9);
            state = next;
        }
    }

    #[test]
    fn classifier_is_causal(
        seed in 0u64..50,
        source in ids(9, 0..4),
        target in ids(9, 2..20),
        cut in 1usize..20,
        replacement in ids(9, 0..10),
    ) {
        let model = random_classifier(seed);
        let cut = cut.min(target.len());
        let full = classify_tokens(&model, &source, &target);
        let mut changed = target[..cut].to_vec();
        changed.extend(replacement);
        let other = classify_tokens(&model, &source, &changed);
        prop_assert_eq!(&full[..cut], &other[..cut]);
        for p in full {
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert!((p + (1.0 - p) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_incremental_matches_scratch(
        reference in prop::collection::vec(3u32..7, 1..6),
        target in ids(7, 1..10),
    ) {
        let q = OracleQe::with_defaults(&reference).unwrap();
        let scratch = q.score_tokens(&[], &target);
        let mut state = q.init(&[]);
        for (i, &tok) in target.iter().enumerate() {
            let (next, lp) = q.extend(&state, tok);
            prop_assert!((lp - scratch[i]).abs() < 1e-9);
            state = next;
        }
    }

    #[test]
    fn ngram_distributions_normalize(
        seed in 0u64..200,
        order in 1usize..4,
        add_k in 0.1f64..2.0,
        channel_weight in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = Vocabulary::new(["a", "b", "c", "d"]).unwrap();
        let content: Vec<TokenId> = vocab.content_ids().collect();
        let corpus: Vec<(Vec<TokenId>, Vec<TokenId>)> = (0..5)
            .map(|_| {
                let s = (0..rng.gen_range(1..4)).map(|_| content[rng.gen_range(0..4)]).collect();
                let t = (0..rng.gen_range(1..4)).map(|_| content[rng.gen_range(0..4)]).collect();
                (s, t)
            })
            .collect();
        let cfg = NgramConfig { order, add_k, channel_weight };
        let m = NgramScorer::train(vocab, &corpus, cfg).unwrap();
        let mut state = m.init(&corpus[0].0);
        for step in 0..6 {
            let lp = m.next_token_logprobs(&state);
            prop_assert!((total_mass(&lp) - 1.0).abs() < 1e-9);
            state = m.advance(&state, content[step % 4]);
        }
    }
}

#[test]
fn any_qe_dispatches_like_the_inner_scorer() {
    let model = Arc::new(random_classifier(3));
    let any = AnyQe::Classifier(Arc::clone(&model));
    let target = [3, 4, 5, 1];
    assert_eq!(any.score_tokens(&[4], &target), model.score_tokens(&[4], &target));
    assert!(any.vocab().is_some());
    let oracle = OracleQe::with_defaults(&[3, 4]).unwrap();
    let any = AnyQe::Oracle(oracle.clone());
    assert_eq!(any.score_tokens(&[], &target), oracle.score_tokens(&[], &target));
}

fn training_f1(model: &TokenQeClassifier, data: &[qad_core::scorers::LabeledExample]) -> f64 {
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for ex in data {
        let vocab = model.vocab();
        let src: Vec<TokenId> = ex.source_tokens.iter().map(|t| vocab.id(t)).collect();
        let tgt: Vec<TokenId> = ex.target_tokens.iter().map(|t| vocab.id(t)).collect();
        let probs = classify_tokens(model, &src, &tgt);
        for (label, p) in ex.labels.iter().zip(probs) {
            match label {
                TokenLabel::Good => gold.push(true),
                TokenLabel::Bad => gold.push(false),
                TokenLabel::Mask => continue,
            }
            pred.push(p >= 0.5);
        }
    }
    macro_f1(&gold, &pred)
}

#[test]
fn separable_set_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = separable_dataset(&mut rng, 60);
    let cfg = TrainConfig::default();
    assert_eq!(cfg.class_weights, (0.05, 0.95));
    let out = train_token_qe(&data, &cfg).unwrap();
    assert_eq!(training_f1(&out.classifier, &data), 1.0);
    assert_eq!(out.best_macro_f1, 1.0);

    let vocab = out.classifier.vocab();
    let bad = vocab.id("bad");
    let probs = classify_tokens(&out.classifier, &[], &[vocab.id("w1"), bad, vocab.id("w2"), bad]);
    assert!(probs[1] < 0.5 && probs[3] < 0.5);
    assert!(probs[0] > 0.5 && probs[2] > 0.5);
}

#[test]
fn masked_labels_never_reach_the_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = separable_dataset(&mut rng, 40);
    let cfg = TrainConfig { epochs: 30, ..TrainConfig::default() };
    let base = train_token_qe(&data, &cfg).unwrap();

    // an extra example whose every label is MASK
    let mut padded = data.clone();
    let ex = &data[0];
    padded.push(
        qad_core::scorers::LabeledExample::new(
            ex.source_tokens.clone(),
            ex.target_tokens.clone(),
            vec![TokenLabel::Mask; ex.target_tokens.len()],
        )
        .unwrap(),
    );
    let padded_model = train_token_qe(&padded, &cfg).unwrap();
    assert_eq!(base.classifier.weights(), padded_model.classifier.weights());

    // underlying labels that differ only where the scheme masks them
    let underlying = |flip: bool| -> Vec<qad_core::scorers::LabeledExample> {
        data.iter()
            .map(|ex| {
                let naive: Vec<TokenLabel> = ex
                    .labels
                    .iter()
                    .map(|l| match (l, flip) {
                        (TokenLabel::Mask, true) => TokenLabel::Bad,
                        (TokenLabel::Mask, false) => TokenLabel::Good,
                        (other, _) => *other,
                    })
                    .collect();
                let masked = naive
                    .iter()
                    .zip(&ex.labels)
                    .map(|(n, orig)| if *orig == TokenLabel::Mask { TokenLabel::Mask } else { *n })
                    .collect();
                qad_core::scorers::LabeledExample::new(
                    ex.source_tokens.clone(),
                    ex.target_tokens.clone(),
                    masked,
                )
                .unwrap()
            })
            .collect()
    };
    let a = train_token_qe(&underlying(false), &cfg).unwrap();
    let b = train_token_qe(&underlying(true), &cfg).unwrap();
    assert_eq!(a.classifier.weights(), b.classifier.weights());
    assert_eq!(a.classifier.weights(), base.classifier.weights());
}
