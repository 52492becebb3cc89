mod common;

use common::*;
use muparse::decoder::DecoderMode;
use muparse::features::{
    build_duration_vocab, metrical_template, ChordEvent, ChordSymbol, EventSequence, FeatureError,
    FeatureExtractor, SequenceKind,
};
use muparse::synthetic::generate_corpus;
use muparse::training::{
    augment_transpositions, bce_loss, ce_loss, fit, leave_one_out_splits, GoldArcs, LrSchedule,
    TrainConfig,
};
use muparse::tree::DependencyTree;
use muparse::{Error, ModelConfig, Scorer};
use num_rational::Rational64;
use proptest::prelude::*;
use rand::Rng;

fn corpus(n: usize, seed: u64) -> Vec<(EventSequence, DependencyTree)> {
    generate_corpus(n, 5, 9, seed)
        .into_iter()
        .map(|p| (p.seq, p.tree.unwrap()))
        .collect()
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        embed_dim: 8,
        hidden_dim: 8,
        ffn_dim: 8,
        attention_heads: 2,
        encoder_layers: 1,
        mlp_layers: 1,
        ..ModelConfig::default()
    }
}

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        warmup_steps: 3,
        seed,
        augment: false,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_reproducible() {
    let data = corpus(3, 1);
    let a = fit(&data, &quick(2, 9), &tiny_model()).unwrap();
    let b = fit(&data, &quick(2, 9), &tiny_model()).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);
    let c = fit(&data, &quick(2, 10), &tiny_model()).unwrap();
    assert_ne!(a.model.params, c.model.params);
}

#[test]
fn loss_goes_down() {
    let data = corpus(4, 2);
    let res = fit(&data, &quick(30, 0), &tiny_model()).unwrap();
    let first = res.log.first().unwrap().total;
    let last = res.log.last().unwrap().total;
    assert!(last < 0.75 * first, "{} -> {}", first, last);
    assert!(res.log.iter().all(|l| (l.total - (l.bce + l.ce)).abs() < 1e-9));
}

#[test]
fn augmentation_multiplies_examples_with_same_trees() {
    let data = corpus(2, 3);
    for (seq, tree) in &data {
        let copies = augment_transpositions(seq, tree);
        assert!(copies.len() <= 25 && copies.len() >= 13);
        let vocab = build_duration_vocab([seq]).unwrap();
        let ex = FeatureExtractor::new(vocab);
        let base = ex.extract(seq).unwrap();
        for (s, t) in &copies {
            assert_eq!(t, tree);
            let f = ex.extract(s).unwrap();
            // duration and metrical columns unchanged
            assert_eq!(f.values.column(1), base.values.column(1));
            assert_eq!(f.values.column(2), base.values.column(2));
        }
    }
    let chords = EventSequence::Chords(vec![ChordEvent {
        chord: ChordSymbol { root_pc: 11, form: 1, extension: 1 },
        duration: Rational64::from_integer(1),
        bar_position: Rational64::from_integer(0),
        ts_numerator: 4,
    }]);
    let tree = DependencyTree::new(vec![muparse::Head::Root]).unwrap();
    let copies = augment_transpositions(&chords, &tree);
    let mut roots: Vec<u8> = copies
        .iter()
        .map(|(s, _)| match s {
            EventSequence::Chords(c) => c[0].chord.root_pc,
            _ => unreachable!(),
        })
        .collect();
    roots.sort();
    assert_eq!(roots, (0..12).collect::<Vec<u8>>());
}

#[test]
fn unseen_durations_snap_or_fail() {
    let data = corpus(3, 4);
    let model = fit(&data, &quick(1, 0), &tiny_model()).unwrap().model;
    let mut seq = data[0].0.clone();
    if let EventSequence::Notes(notes) = &mut seq {
        notes[0].duration = Rational64::new(7, 11);
    }
    assert!(model.parse(&seq, DecoderMode::Eisner, false).unwrap().valid);
    assert!(matches!(
        model.parse(&seq, DecoderMode::Eisner, true),
        Err(Error::Feature(FeatureError::UnknownDuration(_)))
    ));
    let chords = EventSequence::Chords(vec![]);
    assert!(matches!(
        model.parse(&chords, DecoderMode::Eisner, false),
        Err(Error::KindMismatch { .. })
    ));
}

#[test]
fn leave_one_out_covers_the_corpus() {
    let folds = leave_one_out_splits(6);
    assert_eq!(folds.len(), 6);
    for (k, (train, test)) in folds.iter().enumerate() {
        assert_eq!(*test, k);
        assert_eq!(train.len(), 5);
        assert!(!train.contains(test));
    }
}

#[test]
fn schedule_shape() {
    let s = LrSchedule { base: 1.0, warmup_steps: 10, total_steps: 110 };
    assert_eq!(s.at(0), 0.0);
    assert!((s.at(5) - 0.5).abs() < 1e-12);
    assert!((s.at(10) - 1.0).abs() < 1e-12);
    assert!((s.at(60) - 0.5).abs() < 1e-12);
    assert!(s.at(110).abs() < 1e-12);
    let mut prev = f64::INFINITY;
    for step in 10..=110 {
        assert!(s.at(step) <= prev + 1e-15);
        prev = s.at(step);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_stay_inside_their_vocabularies(seed in any::<u64>()) {
        let pieces = generate_corpus(3, 1, 20, seed);
        let seqs: Vec<&EventSequence> = pieces.iter().map(|p| &p.seq).collect();
        let vocab = build_duration_vocab(seqs.iter().copied()).unwrap();
        let sizes = SequenceKind::Notes.vocab_sizes(vocab.len());
        let ex = FeatureExtractor::new(vocab);
        for s in seqs {
            let f = ex.extract(s).unwrap();
            prop_assert_eq!(f.len(), s.len());
            for row in f.values.rows() {
                for (v, size) in row.iter().zip(&sizes) {
                    prop_assert!(v < size);
                }
            }
        }
    }

    #[test]
    fn losses_are_finite_and_nonnegative(seed in any::<u64>(), n in 1usize..=10) {
        let mut r = rng(seed);
        let cfg = toy_config(3);
        let scorer = Scorer::new(cfg.clone(), jittered_params(&cfg, seed));
        let rests: Vec<bool> = (0..n).map(|i| i > 0 && r.gen_bool(0.2)).collect();
        let x = random_note_features(&mut r, &cfg, n, &rests);
        let mask = muparse::PotentialArcMask::new(&rests);
        let s = scorer.forward(&x, &mask).unwrap();
        let kept = rests.iter().filter(|&&b| !b).count();
        let tree = DependencyTree::new(random_tree(&mut r, kept)).unwrap().with_rests(&rests).unwrap();
        let gold = GoldArcs::from_tree(&tree);
        let (b, c) = (bce_loss(&s, &gold), ce_loss(&s, &gold));
        prop_assert!(b.is_finite() && b >= 0.0);
        prop_assert!(c.is_finite() && c >= 0.0);
    }
}

#[test]
fn metrical_strength_matches_template_oracle() {
    use muparse::features::inverse_metrical_strength;
    for num in [2u32, 3, 4, 6, 9, 12] {
        let template = metrical_template(num).unwrap();
        let mut deltas = Vec::new();
        let mut prod = 1i64;
        for &m in &template {
            prod *= m as i64;
            deltas.push(Rational64::new(1, prod));
        }
        for den in 1..=96i64 {
            for k in 0..den {
                let t = Rational64::new(k, den);
                let oracle = deltas
                    .iter()
                    .position(|d| (t / d).is_integer())
                    .unwrap_or(deltas.len());
                assert_eq!(inverse_metrical_strength(t, num).unwrap(), oracle, "{} at {}", num, t);
            }
        }
    }
}
