mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use twmd_core::metrics::{
    bertscore_f1_c, bertscore_precision_c, bertscore_recall_c, cka_c, moverscore_c, sbert_c,
    score_sentences, trwmd_c, twmd_c,
};
use twmd_core::{Metric, MetricConfig, SentenceMatrix};

fn permuted(x: &SentenceMatrix, rng: &mut rand_chacha::ChaCha8Rng) -> SentenceMatrix {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(rng);
    let rows: Vec<&[f32]> = order.iter().map(|&i| x.row(i)).collect();
    SentenceMatrix::from_rows(&rows).unwrap()
}

fn all_c(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Vec<f64> {
    vec![
        sbert_c(x1, x2).unwrap(),
        cka_c(x1, x2).unwrap(),
        moverscore_c(x1, x2).unwrap(),
        bertscore_recall_c(x1, x2).unwrap(),
        bertscore_precision_c(x1, x2).unwrap(),
        bertscore_f1_c(x1, x2).unwrap(),
        trwmd_c(x1, x2, 0.02).unwrap(),
        twmd_c(x1, x2, 0.02, 1, false).unwrap(),
        twmd_c(x1, x2, 0.1, 7, true).unwrap(),
    ]
}

#[test]
fn worked_examples() {
    let s = |rows: &[&[f32]]| SentenceMatrix::from_rows(rows).unwrap();
    let (e1, e2) = (s(&[&[1.0, 0.0]]), s(&[&[0.0, 1.0]]));
    let both = s(&[&[1.0, 0.0], &[0.0, 1.0]]);
    assert_eq!(sbert_c(&both, &e1).unwrap(), 0.5);
    assert!((cka_c(&both, &s(&[&[0.6, 0.8]])).unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(moverscore_c(&both, &both).unwrap(), 1.0);
    assert_eq!(moverscore_c(&e1, &e2).unwrap(), 0.0);
    assert_eq!(bertscore_recall_c(&e1, &both).unwrap(), 1.0);
    assert_eq!(bertscore_recall_c(&both, &e2).unwrap(), 0.5);
    let single = s(&[&[0.6, 0.8]]);
    assert!((twmd_c(&single, &single, 0.02, 1, false).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn values_ignore_word_order() {
    let mut rng = rng(21);
    for _ in 0..50 {
        let x1 = random_length_sentence(&mut rng, 7, 8);
        let x2 = random_length_sentence(&mut rng, 7, 8);
        let reference = all_c(&x1, &x2);
        let shuffled = all_c(&permuted(&x1, &mut rng), &permuted(&x2, &mut rng));
        for (k, (a, b)) in reference.iter().zip(&shuffled).enumerate() {
            assert!((a - b).abs() <= 1e-9, "metric #{k}: {a} vs {b}");
        }
    }
}

#[test]
fn normalized_scores_stay_in_unit_interval() {
    let mut rng = rng(22);
    let bounded = [
        Metric::Sbert,
        Metric::BertscoreRecall,
        Metric::BertscorePrecision,
        Metric::Trwmd,
        Metric::TrwmdPrecision,
    ];
    for _ in 0..100 {
        let x1 = random_length_sentence(&mut rng, 10, 8);
        let x2 = random_length_sentence(&mut rng, 10, 8);
        for metric in bounded {
            let v = score_sentences(&x1, &x2, &MetricConfig::new(metric)).unwrap().value;
            assert!((-1.0 - 1e-6..=1.0 + 1e-6).contains(&v), "{metric}: {v}");
        }
        // The harmonic mean is only bounded when precision and recall share a sign.
        let p = bertscore_precision_c(&x1, &x2).unwrap();
        let r = bertscore_recall_c(&x1, &x2).unwrap();
        if p * r > 0.0 {
            let f = bertscore_f1_c(&x1, &x2).unwrap();
            assert!((-1.0 - 1e-6..=1.0 + 1e-6).contains(&f), "f1: {f}");
        }
    }
}

#[test]
fn bertscore_normalization_is_a_no_op_on_unit_vectors() {
    let mut rng = rng(23);
    for _ in 0..50 {
        let x1 = random_length_sentence(&mut rng, 10, 8);
        let x2 = random_length_sentence(&mut rng, 10, 8);
        let on = MetricConfig::new(Metric::BertscoreRecall);
        let a = score_sentences(&x1, &x2, &on).unwrap().value;
        let b = score_sentences(&x1, &x2, &on.with_normalize(false)).unwrap().value;
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn moverscore_normalization_keeps_sign() {
    let mut rng = rng(24);
    for _ in 0..50 {
        let x1 = random_length_sentence(&mut rng, 10, 8);
        let x2 = random_length_sentence(&mut rng, 10, 8);
        let on = MetricConfig::new(Metric::Moverscore);
        let a = score_sentences(&x1, &x2, &on).unwrap().value;
        let b = score_sentences(&x1, &x2, &on.with_normalize(false)).unwrap().value;
        assert_eq!(a.signum(), b.signum(), "{a} vs {b}");
    }
}

#[test]
fn tempered_precision_is_swapped_recall() {
    let mut rng = rng(25);
    for _ in 0..50 {
        let x1 = random_length_sentence(&mut rng, 10, 8);
        let x2 = random_length_sentence(&mut rng, 10, 8);
        for (precision, recall) in [
            (Metric::TwmdPrecision, Metric::Twmd),
            (Metric::TrwmdPrecision, Metric::Trwmd),
            (Metric::BertscorePrecision, Metric::BertscoreRecall),
        ] {
            let t = rng.random_range(0.01..0.2);
            let config = |m: Metric| {
                let c = MetricConfig::new(m);
                if m.is_tempered() {
                    c.with_temperature(t)
                } else {
                    c
                }
            };
            let p = score_sentences(&x1, &x2, &config(precision)).unwrap();
            let r = score_sentences(&x2, &x1, &config(recall)).unwrap();
            assert_eq!(p, r);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f1_lies_between_precision_and_recall(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x1 = random_length_sentence(&mut rng, 8, 6);
        let x2 = random_length_sentence(&mut rng, 8, 6);
        let p = bertscore_precision_c(&x1, &x2).unwrap();
        let r = bertscore_recall_c(&x1, &x2).unwrap();
        let f = bertscore_f1_c(&x1, &x2).unwrap();
        if p > 0.0 && r > 0.0 {
            prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
        }
    }

    #[test]
    fn cka_is_nonnegative(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x1 = random_length_sentence(&mut rng, 8, 6);
        let x2 = random_length_sentence(&mut rng, 8, 6);
        prop_assert!(cka_c(&x1, &x2).unwrap() >= 0.0);
    }

    #[test]
    fn trwmd_tends_to_relaxed_transport(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x1 = random_length_sentence(&mut rng, 12, 6);
        let x2 = random_length_sentence(&mut rng, 12, 6);
        let gap = trwmd_c(&x1, &x2, 1e-6).unwrap() - bertscore_recall_c(&x1, &x2).unwrap();
        // T * log(L2) bounds the softmax excess.
        prop_assert!((0.0..=1e-6 * 12f64.ln() + 1e-12).contains(&gap));
    }
}
