//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::io::Cursor;
use std::time::Instant;

use common::{brute_force_best, random_classifier, random_instance, separable_dataset, space_size};
use qad_core::annotation::{annotate, group_by_segment, parse_mqm_file, TokenLabel};
use qad_core::decoding::{exhaustive_decode, DEFAULT_BUDGET};
use qad_core::eval::{
    alpha_sweep, compare_strategies, kendall, paired_bootstrap, pearson, spearman, token_f1,
    CompareConfig, Segment, Strategy, SweepSegment,
};
use qad_core::scorers::{classify_tokens, macro_f1, train_token_qe, LabeledExample, OracleQe, QeScorer, TrainConfig};
use qad_core::synthetic::{split_mass_corpus, trap_instance, SplitMassConfig};
use qad_core::{beam_search, qa_beam_search, rerank_nbest, DecodeConfig, TokenId, TranslationScorer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEGENERACY_INSTANCES: usize = 200;
const BRUTE_FORCE_INSTANCES: usize = 300;
const CACHE_PREFIXES: usize = 1000;
const CACHE_TOL: f64 = 1e-9;
const MERGED_TOL: f64 = 1e-9;
const DOC_SEEDS: u64 = 200;
const MONOTONE_VECTORS: usize = 100;
const BOOTSTRAP_VECTORS: usize = 20;
const BOOTSTRAP_RESAMPLES: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn span_labels() -> Outcome {
    let started = Instant::now();
    let tsv = include_str!("fixtures/mqm_spans.tsv");
    let records = group_by_segment(parse_mqm_file(Cursor::new(tsv)).unwrap()).unwrap();
    let mut got: Vec<(String, Vec<TokenLabel>)> = records
        .iter()
        .map(|r| (r.seg_id.clone(), annotate(r, 0).unwrap().labels))
        .collect();
    got.sort_by(|a, b| a.0.cmp(&b.0));
    use TokenLabel::*;
    // rows 1..3: misspelled verb, no error, mistranslated verb
    let expected = [vec![Good, Mask, Bad, Good], vec![Good, Good, Good], vec![Good, Bad, Good]];
    let labels: Vec<Vec<TokenLabel>> = got.into_iter().map(|(_, l)| l).collect();
    let elapsed = started.elapsed().as_secs_f64();
    outcome(
        labels == expected && elapsed < 1.0,
        format!("labels {labels:?}, {elapsed:.4}s"),
    )
}

fn degeneracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..DEGENERACY_INSTANCES {
        let inst = random_instance(&mut rng);
        let beams = rng.gen_range(1..=5);
        let config = DecodeConfig {
            alpha: 1.0,
            num_beams: beams,
            topk: beams,
            ..inst.config.clone()
        };
        let base = beam_search(&inst.nmt, &[], &config).unwrap();
        let qa = qa_beam_search(&inst.nmt, &inst.qe, &[], &config).unwrap();
        let a: Vec<&Vec<TokenId>> = base.nbest.hypotheses().map(|h| &h.tokens).collect();
        let b: Vec<&Vec<TokenId>> = qa.nbest.hypotheses().map(|h| &h.tokens).collect();
        if a != b {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over {DEGENERACY_INSTANCES} instances"))
}

/// Criteria 3 and 10 share one instance suite.
fn brute_force_and_costs() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_gap, mut exceeded, mut disagree) = (0.0f64, 0, 0);
    let mut cost_violations = 0;
    for _ in 0..BRUTE_FORCE_INSTANCES {
        let inst = random_instance(&mut rng);
        let vocab = inst.nmt.vocab();
        let full = DecodeConfig {
            num_beams: space_size(vocab, inst.config.max_len),
            topk: vocab.len(),
            ..inst.config.clone()
        };
        let truth = exhaustive_decode(&inst.nmt, &inst.qe, &[], &inst.config, DEFAULT_BUDGET).unwrap();
        let optimum = truth.best().unwrap().merged;
        if (optimum - brute_force_best(&inst)).abs() > MERGED_TOL {
            disagree += 1;
        }
        let wide = qa_beam_search(&inst.nmt, &inst.qe, &[], &full).unwrap();
        worst_gap = worst_gap.max((wide.nbest.best().unwrap().merged - optimum).abs());
        let narrow = DecodeConfig { num_beams: 2, topk: 2, ..inst.config.clone() };
        let narrow = qa_beam_search(&inst.nmt, &inst.qe, &[], &narrow).unwrap();
        if !narrow.unfinished && narrow.nbest.best().unwrap().merged > optimum + MERGED_TOL {
            exceeded += 1;
        }

        let five = DecodeConfig { num_beams: 5, topk: 5, ..inst.config.clone() };
        let qa = qa_beam_search(&inst.nmt, &inst.qe, &[], &five).unwrap();
        let base = beam_search(&inst.nmt, &[], &five).unwrap();
        if qa.counters.merged_evaluations > 25 * qa.steps as u64 || base.counters.qe_extend_calls != 0 {
            cost_violations += 1;
        }
    }
    let brute = outcome(
        worst_gap <= MERGED_TOL && exceeded == 0 && disagree == 0,
        format!(
            "{BRUTE_FORCE_INSTANCES} instances: max |full-width - optimum| = {worst_gap:.2e}, \
             width-2 above optimum {exceeded}, exhaustive vs enumeration disagreements {disagree}"
        ),
    );
    let costs = outcome(
        cost_violations == 0,
        format!("{cost_violations} violations over {BRUTE_FORCE_INSTANCES} instances"),
    );
    (brute, costs)
}

fn split_mass_rescue() -> Outcome {
    let (nmt, seg) = trap_instance(1);
    let qe = OracleQe::with_defaults(&seg.reference).unwrap();
    let max_len = seg.source.len() + 1;
    let config = DecodeConfig { max_len, ..DecodeConfig::default() };
    let (_, wrong) = nmt.entry(seg.source[1]).unwrap().trap.unwrap();
    let base = beam_search(&nmt, &seg.source, &config).unwrap();
    let base_wrong = base.nbest.best().unwrap().hypothesis.tokens.contains(&wrong);
    let qa = qa_beam_search(&nmt, &qe, &seg.source, &DecodeConfig { alpha: 0.5, ..config.clone() }).unwrap();
    let qa_correct = qa.nbest.best().unwrap().hypothesis.content() == seg.reference.as_slice();

    // enough traps that the 25-best holds no correct candidate
    let (nmt, seg) = trap_instance(4);
    let qe = OracleQe::with_defaults(&seg.reference).unwrap();
    let config = DecodeConfig { num_beams: 25, max_len: seg.source.len() + 1, alpha: 0.5, ..DecodeConfig::default() };
    let nbest = beam_search(&nmt, &seg.source, &config).unwrap().nbest;
    let has_correct = nbest.hypotheses().any(|h| h.content() == seg.reference.as_slice());
    let reranked = rerank_nbest(nbest.hypotheses(), &qe, &seg.source, &config).unwrap();
    let rerank_fails = reranked.best().unwrap().hypothesis.content() != seg.reference.as_slice();
    let qa4 = qa_beam_search(&nmt, &qe, &seg.source, &config).unwrap();
    let qa4_correct = qa4.nbest.best().unwrap().hypothesis.content() == seg.reference.as_slice();
    outcome(
        base_wrong && qa_correct && !has_correct && rerank_fails && qa4_correct,
        format!(
            "baseline picks wrong token: {base_wrong}; qa correct: {qa_correct}; \
             4-trap 25-best holds correct: {has_correct}; rerank fails: {rerank_fails}; qa correct: {qa4_correct}"
        ),
    )
}

fn cache_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..CACHE_PREFIXES {
        let model = random_classifier(i as u64 % 40);
        let n = model.vocab().len() as TokenId;
        let source: Vec<TokenId> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..n)).collect();
        let target: Vec<TokenId> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(0..n)).collect();
        let scratch = classify_tokens(&model, &source, &target);
        let mut state = model.init(&source);
        for (&tok, p) in target.iter().zip(&scratch) {
            let (next, lp) = model.extend(&state, tok);
            worst = worst.max((lp.exp() - p).abs());
            state = next;
        }
    }
    outcome(worst < CACHE_TOL, format!("max difference {worst:.2e} over {CACHE_PREFIXES} prefixes"))
}

fn alpha_sweep_claim() -> Outcome {
    let (nmt, segs) = split_mass_corpus(&SplitMassConfig::default(), 60, 6);
    let config = DecodeConfig { num_beams: 25, max_len: 8, ..DecodeConfig::default() };
    let sweep: Vec<SweepSegment<OracleQe>> = segs
        .iter()
        .map(|s| SweepSegment {
            source: s.source.clone(),
            candidates: beam_search(&nmt, &s.source, &config).unwrap().nbest.hypotheses().cloned().collect(),
            qe: OracleQe::with_defaults(&s.reference).unwrap(),
        })
        .collect();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let points = alpha_sweep(&sweep, &grid, &config, |i, h| token_f1(h.content(), &segs[i].reference)).unwrap();
    let best = points.iter().fold(points[0], |b, p| if p.quality > b.quality { *p } else { b });
    let at_one = points.last().unwrap().quality;
    outcome(
        best.alpha < 1.0 && best.quality > at_one,
        format!("best {:.4} at alpha {:.1}, alpha 1.0 gives {at_one:.4}", best.quality, best.alpha),
    )
}

fn document_effect() -> Outcome {
    let corpus = SplitMassConfig::default();
    let (mut gap1, mut gap4) = (0.0, 0.0);
    for seed in 0..DOC_SEEDS {
        let (nmt, segs) = split_mass_corpus(&corpus, 8, 1000 + seed);
        for (k, gap) in [(1, &mut gap1), (4, &mut gap4)] {
            let max_len = 4 * corpus.max_len * k / 3 + 2;
            let config = CompareConfig {
                decode: DecodeConfig { num_beams: 5, topk: 5, max_len, alpha: 0.5, ..DecodeConfig::default() },
                strategies: vec![Strategy::Qa, Strategy::BeamRerank],
                doc_k: k,
                resamples: 10,
                ..CompareConfig::default()
            };
            let report = compare_strategies(&segs, &nmt, oracle_for, &config).unwrap();
            *gap += report.strategies[0].mean_quality - report.strategies[1].mean_quality;
        }
    }
    let (gap1, gap4) = (gap1 / DOC_SEEDS as f64, gap4 / DOC_SEEDS as f64);
    outcome(
        gap4 >= gap1,
        format!("mean gap (qa - rerank) k=1 {gap1:.4}, k=4 {gap4:.4} over {DOC_SEEDS} seeds"),
    )
}

fn oracle_for(seg: &Segment) -> qad_core::Result<OracleQe> {
    OracleQe::with_defaults(&seg.reference)
}

fn correlations() -> Outcome {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let rev = [4.0, 3.0, 2.0, 1.0];
    let mut ok = true;
    for f in [pearson, spearman, kendall] {
        ok &= (f(&xs, &xs).unwrap() - 1.0).abs() < 1e-12;
        ok &= (f(&xs, &rev).unwrap() + 1.0).abs() < 1e-12;
    }
    let tau = kendall(&xs, &[1.0, 3.0, 2.0, 4.0]).unwrap();
    ok &= (tau - 0.6667).abs() < 1e-4;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..MONOTONE_VECTORS {
        let n = rng.gen_range(5..40);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let warped: Vec<f64> = a.iter().map(|x| x.powi(3) + x.exp()).collect();
        worst = worst.max((kendall(&a, &b).unwrap() - kendall(&warped, &b).unwrap()).abs());
        worst = worst.max((spearman(&a, &b).unwrap() - spearman(&warped, &b).unwrap()).abs());
    }
    ok &= worst < 1e-9;
    outcome(ok, format!("tau-b {tau:.4}; max monotone-transform drift {worst:.2e}"))
}

fn weighted_training() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = separable_dataset(&mut rng, 60);
    let config = TrainConfig::default();
    let weights_ok = config.class_weights == (0.05, 0.95);
    let trained = train_token_qe(&data, &config).unwrap();
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    let vocab = trained.classifier.vocab();
    for ex in &data {
        let src: Vec<TokenId> = ex.source_tokens.iter().map(|t| vocab.id(t)).collect();
        let tgt: Vec<TokenId> = ex.target_tokens.iter().map(|t| vocab.id(t)).collect();
        for (label, p) in ex.labels.iter().zip(classify_tokens(&trained.classifier, &src, &tgt)) {
            if *label != TokenLabel::Mask {
                gold.push(*label == TokenLabel::Good);
                pred.push(p >= 0.5);
            }
        }
    }
    let f1 = macro_f1(&gold, &pred);

    // The same sentences, each also present with every label masked.
    let mut padded = data.clone();
    padded.extend(data.iter().map(|ex| {
        LabeledExample::new(
            ex.source_tokens.clone(),
            ex.target_tokens.clone(),
            vec![TokenLabel::Mask; ex.labels.len()],
        )
        .unwrap()
    }));
    let again = train_token_qe(&padded, &config).unwrap();
    let identical = again.classifier.weights() == trained.classifier.weights();
    outcome(
        weights_ok && f1 == 1.0 && identical,
        format!("training macro-F1 {f1:.4}; parameters identical after masking: {identical}"),
    )
}

fn bootstrap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut min_same = f64::INFINITY;
    let mut max_dominated = 0.0f64;
    for i in 0..BOOTSTRAP_VECTORS {
        let a: Vec<f64> = (0..rng.gen_range(10..60)).map(|_| rng.gen::<f64>()).collect();
        min_same = min_same.min(paired_bootstrap(&a, &a, BOOTSTRAP_RESAMPLES, i as u64, false).unwrap());
        let better: Vec<f64> = a.iter().map(|x| x + rng.gen_range(0.01..0.5)).collect();
        max_dominated = max_dominated.max(paired_bootstrap(&better, &a, BOOTSTRAP_RESAMPLES, i as u64, false).unwrap());
    }
    outcome(
        min_same > 0.4 && max_dominated == 0.0,
        format!("min p(A, A) {min_same:.3}; max p under strict dominance {max_dominated:.3}"),
    )
}

fn main() {
    let started = Instant::now();
    let (brute, costs) = brute_force_and_costs();
    let results = [
        (1, span_labels()),
        (2, degeneracy()),
        (3, brute),
        (4, split_mass_rescue()),
        (5, cache_consistency()),
        (6, alpha_sweep_claim()),
        (7, document_effect()),
        (8, correlations()),
        (9, weighted_training()),
        (10, costs),
        (11, bootstrap()),
    ];
    let mut failed = 0;
    for (n, r) in &results {
        println!("criterion {n:>2}: {} {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.pass);
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
