mod common;

use dialect_core::baseline::{softmax, NgramVocabulary, SoftmaxClassifier};
use dialect_core::corpus::{corpus_to_bytes, load_corpus, Corpus, CorpusFormat, LabeledExample};
use dialect_core::ensemble::{hard_vote, VotePolicy};
use dialect_core::eval::{confusion_matrix, metrics_report};
use dialect_core::predfile::{read_predictions_unaligned, write_predictions, PredictionSet};
use dialect_core::preprocess::{clean_text, CleaningConfig};
use proptest::prelude::*;

const WORDS: &[&str] = &["USER", "NUM", "URL", "URLS", "user", "مرحبا", "بكم", "شو", "😂", "!!", "a", "NUM1"];
const SPACES: &[&str] = &[" ", "  ", "\t", "\n", " \u{3000}", ""];

fn tweet() -> impl Strategy<Value = String> {
    prop::collection::vec((prop::sample::select(SPACES), prop::sample::select(WORDS)), 0..12).prop_map(|parts| {
        parts.into_iter().map(|(s, w)| format!("{s}{w}")).collect::<String>()
    })
}

fn cleaning_config() -> impl Strategy<Value = CleaningConfig> {
    (any::<bool>(), any::<bool>()).prop_map(|(collapse, trim)| CleaningConfig {
        collapse_whitespace: collapse,
        trim,
        ..CleaningConfig::default()
    })
}

proptest! {
    #[test]
    fn cleaning_is_idempotent(text in tweet(), cfg in cleaning_config()) {
        let once = clean_text(&text, &cfg);
        prop_assert_eq!(clean_text(&once, &cfg), once);
    }

    #[test]
    fn no_noise_token_survives_and_others_keep_order(text in tweet(), cfg in cleaning_config()) {
        let out = clean_text(&text, &cfg);
        let noise = ["USER", "NUM", "URL"];
        prop_assert!(out.split_whitespace().all(|t| !noise.contains(&t)));
        let kept: Vec<&str> = text.split_whitespace().filter(|t| !noise.contains(t)).collect();
        prop_assert_eq!(out.split_whitespace().collect::<Vec<_>>(), kept);
    }

    #[test]
    fn corpus_round_trips(rows in prop::collection::vec(("[a-z0-9]{1,6}", tweet(), prop::option::of("[A-C]")), 0..20),
                          csv in any::<bool>()) {
        let mut seen = std::collections::HashSet::new();
        let examples: Vec<LabeledExample> = rows
            .into_iter()
            .filter(|(id, _, _)| seen.insert(id.clone()))
            .map(|(id, content, label)| LabeledExample { id, content, label })
            .collect();
        let format = if csv { CorpusFormat::Csv } else { CorpusFormat::Tsv };
        let corpus = Corpus::new(examples).unwrap();
        // TSV cannot carry tabs or newlines.
        let Ok(bytes) = corpus_to_bytes(&corpus, format) else {
            return Ok(());
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c");
        std::fs::write(&path, &bytes).unwrap();
        let back = load_corpus(&path, format).unwrap();
        prop_assert_eq!(&back, &corpus);
        prop_assert_eq!(corpus_to_bytes(&back, format).unwrap(), bytes);
    }

    #[test]
    fn label_space_ignores_order(mut labels in prop::collection::vec("[A-F]", 1..30), seed in any::<u64>()) {
        let make = |ls: &[String]| Corpus::new(
            ls.iter().enumerate().map(|(i, l)| LabeledExample::new(i.to_string(), "x", Some(l))).collect()
        ).unwrap();
        let a = make(&labels);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut labels[..], &mut rng);
        let b = make(&labels);
        prop_assert_eq!(a.label_space(), b.label_space());
    }

    #[test]
    fn tfidf_vectors_are_unit_or_zero(texts in prop::collection::vec(tweet(), 1..8), probe in tweet()) {
        let vocab = NgramVocabulary::fit(&texts, 1, 3, 200).unwrap();
        for text in texts.iter().chain(std::iter::once(&probe)) {
            let v = vocab.vectorize(text);
            prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
            if !v.is_zero() {
                prop_assert!((v.l2_norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn predicted_probabilities_are_normalized(
        weights in prop::collection::vec(-30.0f64..30.0, 12),
        bias in prop::collection::vec(-30.0f64..30.0, 3),
        x in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let labels = vec!["a".to_string(), "b".into(), "c".into()];
        let model = SoftmaxClassifier::from_parts(labels, 4, weights, bias).unwrap();
        let fv = dialect_core::baseline::FeatureVector::new(x.into_iter().enumerate().collect()).unwrap();
        let p = model.predict(&fv).probabilities;
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));
        let shifted: Vec<f64> = model.logits(&fv).iter().map(|z| z - 17.0).collect();
        for (a, b) in softmax(&shifted).iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_files_round_trip(rows in prop::collection::vec(("[a-z0-9]{1,5}", 0usize..3, prop::collection::vec(0.01f64..1.0, 3)), 0..15),
                                   with_probs in any::<bool>()) {
        let space = vec!["A".to_string(), "B".into(), "C".into()];
        let mut seen = std::collections::HashSet::new();
        let rows: Vec<_> = rows.into_iter().filter(|r| seen.insert(r.0.clone())).collect();
        let entries: Vec<(String, String)> = rows.iter().map(|(id, k, _)| (id.clone(), space[*k].clone())).collect();
        let set = if with_probs {
            let probs = rows.iter().map(|(_, _, p)| { let s: f64 = p.iter().sum(); p.iter().map(|v| v / s).collect() }).collect();
            PredictionSet::with_probabilities("m-1", entries, space, probs).unwrap()
        } else {
            PredictionSet::new("m-1", entries).unwrap()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        write_predictions(&set, &path).unwrap();
        let back = read_predictions_unaligned(&path).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(back.to_tsv().unwrap(), std::fs::read_to_string(&path).unwrap());
    }

    #[test]
    fn unanimity_and_dominance(votes in prop::collection::vec(prop::collection::vec(0usize..4, 2..7), 1..20), lexi in any::<bool>()) {
        // votes[example][model]
        let models = votes.iter().map(Vec::len).min().unwrap();
        let sets: Vec<PredictionSet> = (0..models).map(|m| PredictionSet::new(
            format!("m{m}"),
            votes.iter().enumerate().map(|(i, v)| (format!("e{i}"), format!("L{}", v[m]))).collect(),
        ).unwrap()).collect();
        let policy = if lexi { VotePolicy::hard_lexicographic() } else {
            VotePolicy::hard_with_priority((0..models).rev().map(|m| format!("m{m}")).collect())
        };
        let out = hard_vote(&sets, &policy).unwrap();
        let mut reversed = sets.clone();
        reversed.reverse();
        let out_rev = hard_vote(&reversed, &policy).unwrap();
        for (i, v) in votes.iter().enumerate() {
            let v = &v[..models];
            let mut counts = [0usize; 4];
            v.iter().for_each(|&l| counts[l] += 1);
            let top = *counts.iter().max().unwrap();
            if counts.iter().filter(|&&c| c == top).count() == 1 {
                let winner = format!("L{}", counts.iter().position(|&c| c == top).unwrap());
                prop_assert_eq!(&out.entries()[i].1, &winner);
                prop_assert_eq!(&out_rev.entries()[i].1, &winner);
            }
            if v.iter().all(|&l| l == v[0]) {
                prop_assert_eq!(&out.entries()[i].1, &format!("L{}", v[0]));
            }
        }
    }

    #[test]
    fn metric_bounds_and_invariances(pairs in prop::collection::vec((0usize..6, 0usize..6), 1..60), seed in any::<u64>()) {
        let space: Vec<String> = (0..6).map(|k| format!("L{k}")).collect();
        let gold: Vec<String> = pairs.iter().map(|p| space[p.0].clone()).collect();
        let pred: Vec<String> = pairs.iter().map(|p| space[p.1].clone()).collect();
        let r = metrics_report(&confusion_matrix(&gold, &pred, &space).unwrap());
        prop_assert!((0.0..=100.0).contains(&r.macro_f1) && (0.0..=100.0).contains(&r.accuracy));

        // Joint shuffle of the pairs.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut shuffled = pairs.clone();
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
        let g2: Vec<String> = shuffled.iter().map(|p| space[p.0].clone()).collect();
        let p2: Vec<String> = shuffled.iter().map(|p| space[p.1].clone()).collect();
        let r2 = metrics_report(&confusion_matrix(&g2, &p2, &space).unwrap());
        prop_assert!((r.macro_f1 - r2.macro_f1).abs() < 1e-9 && (r.accuracy - r2.accuracy).abs() < 1e-9);

        // Relabel classes by a permutation.
        let mut perm: Vec<usize> = (0..6).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
        let g3: Vec<String> = pairs.iter().map(|p| space[perm[p.0]].clone()).collect();
        let p3: Vec<String> = pairs.iter().map(|p| space[perm[p.1]].clone()).collect();
        let r3 = metrics_report(&confusion_matrix(&g3, &p3, &space).unwrap());
        prop_assert!((r.macro_f1 - r3.macro_f1).abs() < 1e-9 && (r.accuracy - r3.accuracy).abs() < 1e-9);
        for k in 0..6 {
            prop_assert!((r.per_class[k].f1 - r3.per_class[perm[k]].f1).abs() < 1e-12);
            prop_assert_eq!(r.per_class[k].support, r3.per_class[perm[k]].support);
        }
    }
}

#[test]
fn cleaned_synthetic_tweets_contain_no_noise() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let cfg = CleaningConfig::default();
    for _ in 0..1000 {
        let n = rng.gen_range(0..15);
        let text: Vec<&str> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
        let out = clean_text(&text.join(" "), &cfg);
        assert!(out.split_whitespace().all(|t| !["USER", "NUM", "URL"].contains(&t)), "{out}");
    }
}
