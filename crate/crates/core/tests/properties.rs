use std::collections::{HashMap, HashSet};

use lexsub_core::embedding::EmbeddingMatrix;
use lexsub_core::lexicon::{CategoricalLexicon, ContinuousLexicon, SplitConfig};
use lexsub_core::metrics::{kendall_tau, macro_avg_f1};
use lexsub_core::sentiment::{estimate_threshold, score_message, LexiconClassifier, Message, Sentiment};
use lexsub_core::snapshot::ModelSnapshot;
use lexsub_core::subspace::{argmax, softmax, Projection, SubspaceClassifier, SubspaceModel, SubspaceRegressor};
use proptest::prelude::*;

/// Tau-b by counting every pair.
fn tau_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tie_x += 1,
                (false, true) => tie_y += 1,
                _ if dx.signum() == dy.signum() => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let denom = (((concordant + discordant + tie_x) * (concordant + discordant + tie_y)) as f64).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

/// Macro F1 from an explicit confusion matrix.
fn f1_oracle(gold: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        confusion[g][p] += 1;
    }
    let mut total = 0.0;
    for c in 0..n_classes {
        let tp = confusion[c][c] as f64;
        let predicted: usize = (0..n_classes).map(|g| confusion[g][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        total += if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    }
    total / n_classes as f64
}

fn paired_lists() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec((-4i32..4).prop_map(f64::from), n),
            prop::collection::vec(prop_oneof![(-4i32..4).prop_map(f64::from), -10.0f64..10.0], n),
        )
    })
}

fn label_vectors() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (2usize..=5, 1usize..=40).prop_flat_map(|(k, n)| (Just(k), prop::collection::vec(0..k, n), prop::collection::vec(0..k, n)))
}

fn msg(tokens: &[String]) -> Message {
    Message {
        raw: tokens.join(" "),
        tokens: tokens.to_vec(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tau_matches_pair_counting((x, y) in paired_lists()) {
        match (kendall_tau(&x, &y), tau_oracle(&x, &y)) {
            (Ok(fast), Some(slow)) => prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}"),
            (Err(_), None) => {}
            (fast, slow) => prop_assert!(false, "disagreement: {fast:?} vs {slow:?}"),
        }
    }

    #[test]
    fn macro_f1_matches_confusion_matrix((k, gold, pred) in label_vectors()) {
        let fast = macro_avg_f1(&gold, &pred, k).unwrap();
        prop_assert!((fast - f1_oracle(&gold, &pred, k)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&fast));
    }

    #[test]
    fn tau_is_invariant_under_increasing_maps((x, y) in paired_lists()) {
        let warped: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let shifted: Vec<f64> = y.iter().map(|v| (v / 3.0).exp()).collect();
        if let Ok(base) = kendall_tau(&x, &y) {
            prop_assert!((kendall_tau(&warped, &shifted).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..8), shift in -100.0f64..100.0) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let moved: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        prop_assert_eq!(argmax(&softmax(&moved)), argmax(&p));
    }

    #[test]
    fn classifier_probabilities_sum_to_one(
        proj in prop::collection::vec(-3.0f64..3.0, 6),
        head in prop::collection::vec(-3.0f64..3.0, 6),
        x in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let e = EmbeddingMatrix::from_rows(3, vec![("w", x)]).unwrap();
        let classes = vec!["a".to_owned(), "b".to_owned(), "c".to_owned()];
        let model = SubspaceClassifier::new(Projection::from_rows(2, 3, proj).unwrap(), head, classes).unwrap();
        let p = model.classify_proba(&e, 0).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let h = model.projection().hidden(e.column(0));
        prop_assert!(h.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn split_partitions_entries(n in 5usize..120, n_classes in 1usize..4, seed in any::<u64>()) {
        let pairs: Vec<(String, String)> = (0..n).map(|i| (format!("w{i}"), format!("c{}", i % n_classes))).collect();
        let lex = CategoricalLexicon::from_pairs(pairs).unwrap();
        let split = lex.split(&SplitConfig::default(), seed).unwrap();
        let mut seen = HashSet::new();
        for (token, class) in split.train.iter().chain(&split.dev).chain(&split.test) {
            prop_assert!(seen.insert(token.clone()), "{token} appears twice");
            prop_assert_eq!(lex.class_index(lex.get(token).unwrap()), Some(*class));
        }
        prop_assert_eq!(seen.len(), n);
        prop_assert_eq!(split.test.len(), (0.2 * n as f64).round() as usize);
    }

    #[test]
    fn normalization_preserves_ranking(scores in prop::collection::vec(1.0f64..9.0, 2..60)) {
        let pairs: Vec<(String, f64)> = scores.iter().enumerate().map(|(i, &s)| (format!("w{i}"), s)).collect();
        let lex = ContinuousLexicon::from_pairs(pairs, Some((1.0, 9.0))).unwrap();
        let norm = lex.normalize_to_unit_range().unwrap();
        let before: Vec<f64> = lex.entries().iter().map(|e| e.1).collect();
        let after: Vec<f64> = norm.entries().iter().map(|e| e.1).collect();
        prop_assert!(after.iter().all(|v| (-1.0..=1.0).contains(v)));
        if let Ok(tau) = kendall_tau(&before, &after) {
            prop_assert_eq!(tau, 1.0);
        }
        let filtered = norm.filter_neutral(0.2).unwrap();
        for (token, score) in filtered.entries() {
            prop_assert_eq!(norm.get(token), Some(*score));
            prop_assert!(score.abs() > 0.2);
        }
    }

    #[test]
    fn message_score_ignores_order_and_duplication(
        scores in prop::collection::vec(-1.0f64..1.0, 1..6),
        picks in prop::collection::vec(0usize..8, 0..12),
        rotate in 0usize..12,
    ) {
        let lexicon: HashMap<String, f64> = scores.iter().enumerate().map(|(i, &s)| (format!("w{i}"), s)).collect();
        let tokens: Vec<String> = picks.iter().map(|p| format!("w{p}")).collect();
        let base = score_message(&lexicon, &msg(&tokens));
        let mut turned = tokens.clone();
        if !turned.is_empty() {
            let r = rotate % turned.len();
            turned.rotate_left(r);
            turned.reverse();
        }
        let doubled: Vec<String> = tokens.iter().flat_map(|t| [t.clone(), t.clone()]).collect();
        for other in [score_message(&lexicon, &msg(&turned)), score_message(&lexicon, &msg(&doubled))] {
            match (base, other) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "scorability changed"),
            }
        }
    }

    #[test]
    fn threshold_splits_its_own_corpus(
        scores in prop::collection::vec(-1.0f64..1.0, 2..8),
        corpus in prop::collection::vec(prop::collection::vec(0usize..10, 1..5), 1..20),
    ) {
        let lexicon: HashMap<String, f64> = scores.iter().enumerate().map(|(i, &s)| (format!("w{i}"), s)).collect();
        let messages: Vec<Message> = corpus
            .iter()
            .map(|ids| msg(&ids.iter().map(|i| format!("w{i}")).collect::<Vec<_>>()))
            .collect();
        let defined: Vec<f64> = messages.iter().filter_map(|m| score_message(&lexicon, m)).collect();
        match estimate_threshold(&lexicon, &messages) {
            Err(_) => prop_assert!(defined.is_empty()),
            Ok(t) => {
                let tol = 1e-12;
                prop_assert!(defined.iter().any(|&s| s >= t - tol));
                let all_equal = defined.iter().all(|&s| (s - defined[0]).abs() < tol);
                if !all_equal {
                    prop_assert!(defined.iter().any(|&s| s < t));
                }
            }
        }
    }

    #[test]
    fn flipping_lexicon_and_threshold_flips_decisions(
        scores in prop::collection::vec(-1.0f64..1.0, 2..8),
        corpus in prop::collection::vec(prop::collection::vec(0usize..10, 1..5), 1..20),
        t in -0.5f64..0.5,
    ) {
        let lexicon: HashMap<String, f64> = scores.iter().enumerate().map(|(i, &s)| (format!("w{i}"), s)).collect();
        let flipped: HashMap<String, f64> = lexicon.iter().map(|(k, v)| (k.clone(), -v)).collect();
        let a = LexiconClassifier::new(lexicon, t).unwrap();
        let b = LexiconClassifier::new(flipped, -t).unwrap();
        for ids in &corpus {
            let m = msg(&ids.iter().map(|i| format!("w{i}")).collect::<Vec<_>>());
            let (da, db) = (a.classify(&m), b.classify(&m));
            match da.score {
                None => prop_assert_eq!(db.label, Sentiment::Negative),
                Some(s) if (s - t).abs() < 1e-12 => {}
                Some(_) => prop_assert_ne!(da.label, db.label),
            }
        }
    }

    #[test]
    fn snapshots_round_trip_bit_exactly(
        proj in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 8),
        weights in prop::collection::vec(-1e3f64..1e3, 2),
        bias in -1e3f64..1e3,
    ) {
        let model = ModelSnapshot::NlseRegressor(
            SubspaceRegressor::new(Projection::from_rows(2, 4, proj).unwrap(), weights, bias).unwrap(),
        );
        let back = ModelSnapshot::from_json(&model.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, model);
    }
}
