//! Losses, data augmentation and the optimisation loop.

use std::collections::BTreeMap;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::Graph;
use crate::features::{
    build_duration_vocab, EventSequence, FeatureError, FeatureExtractor, FeatureMatrix,
};
use crate::scorer::{
    forward_graph, init_params, ArcScores, ModelConfig, ModelParams, ParamVars,
    PotentialArcMask, ScorerError,
};
use crate::tree::{DependencyTree, Head};
use crate::Model;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize },
    #[error("gold arc {dep} -> column {col} is not a potential arc")]
    GoldNotPotential { dep: usize, col: usize },
    #[error("sequence has {seq} elements but its tree has {tree}")]
    LengthMismatch { seq: usize, tree: usize },
    #[error("rest positions of sequence and tree disagree at {0}")]
    RestMismatch(usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    #[default]
    Both,
    BceOnly,
    CeOnly,
}

impl FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(LossMode::Both),
            "bce" | "bce_only" => Ok(LossMode::BceOnly),
            "ce" | "ce_only" => Ok(LossMode::CeOnly),
            other => Err(format!("unknown loss mode {:?}", other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_mode: LossMode,
    pub batch_size: usize,
    /// Train on all transpositions of every piece.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 4e-4,
            weight_decay: 0.05,
            warmup_steps: 50,
            epochs: 60,
            seed: 0,
            loss_mode: LossMode::Both,
            batch_size: 1,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 || self.batch_size == 0 {
            return Err(TrainError::Config(
                "learning rate must be positive, weight decay non-negative, batch size ≥ 1"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Gold supervision for one sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldArcs {
    /// `λ × (λ+1)` arc indicator.
    pub indicator: Array2<bool>,
    /// Gold column per row; rests and the root point to column 0.
    pub head_cols: Vec<usize>,
}

impl GoldArcs {
    pub fn from_tree(t: &DependencyTree) -> Self {
        let n = t.len();
        let head_cols: Vec<usize> = t
            .heads()
            .iter()
            .map(|h| match h {
                Head::Index(i) => i + 1,
                Head::Root | Head::None => 0,
            })
            .collect();
        let mut indicator = Array2::from_elem((n, n + 1), false);
        for (dep, &col) in head_cols.iter().enumerate() {
            indicator[[dep, col]] = true;
        }
        GoldArcs {
            indicator,
            head_cols,
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy of `sigmoid(score)` over the finite (potential) arcs.
pub fn bce_loss(s: &ArcScores, g: &GoldArcs) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for ((dep, col), &z) in s.logits.indexed_iter() {
        if z.is_finite() {
            let y = if g.indicator[[dep, col]] { 1.0 } else { 0.0 };
            total += softplus(z) - z * y;
            count += 1;
        }
    }
    total / count.max(1) as f64
}

/// Mean over rows of `-log softmax(row)[gold]`, masked entries excluded.
pub fn ce_loss(s: &ArcScores, g: &GoldArcs) -> f64 {
    let n = s.logits.nrows();
    let mut total = 0.0;
    for (row, &gold) in s.logits.rows().into_iter().zip(&g.head_cols) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max
            + row
                .iter()
                .filter(|v| v.is_finite())
                .map(|&v| (v - max).exp())
                .sum::<f64>()
                .ln();
        total += lse - row[gold];
    }
    total / n.max(1) as f64
}

pub fn total_loss(s: &ArcScores, g: &GoldArcs, mode: LossMode) -> f64 {
    match mode {
        LossMode::Both => bce_loss(s, g) + ce_loss(s, g),
        LossMode::BceOnly => bce_loss(s, g),
        LossMode::CeOnly => ce_loss(s, g),
    }
}

/// Loss terms of one sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValues {
    pub bce: f64,
    pub ce: f64,
    pub total: f64,
}

/// Record the forward pass and loss of one sequence on `g`.
///
/// Returns the loss node and the individual terms.
pub fn loss_graph(
    g: &mut Graph,
    cfg: &ModelConfig,
    pv: &ParamVars,
    x: &FeatureMatrix,
    tree: &DependencyTree,
    mode: LossMode,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<(crate::autograd::Var, LossValues), TrainError> {
    let rests: Vec<bool> = (0..tree.len()).map(|i| tree.is_rest(i)).collect();
    let mask = PotentialArcMask::new(&rests);
    let gold = GoldArcs::from_tree(tree);
    let pass = forward_graph(g, cfg, pv, x, &mask, rng)?;

    let n = tree.len();
    let mut groups = vec![Vec::new(); n];
    let mut gold_entry = vec![usize::MAX; n];
    let mut targets = Vec::with_capacity(pass.arcs.len());
    for (e, &(dep, col)) in pass.arcs.iter().enumerate() {
        groups[dep].push(e);
        let is_gold = gold.head_cols[dep] == col;
        if is_gold {
            gold_entry[dep] = e;
        }
        targets.push(if is_gold { 1.0 } else { 0.0 });
    }
    if let Some(dep) = gold_entry.iter().position(|&e| e == usize::MAX) {
        return Err(TrainError::GoldNotPotential {
            dep,
            col: gold.head_cols[dep],
        });
    }

    let bce = g.bce_with_logits(pass.logits, targets);
    let ce = g.grouped_cross_entropy(pass.logits, groups, gold_entry);
    let values = LossValues {
        bce: g.scalar(bce),
        ce: g.scalar(ce),
        total: 0.0,
    };
    let loss = match mode {
        LossMode::Both => g.add(bce, ce),
        LossMode::BceOnly => bce,
        LossMode::CeOnly => ce,
    };
    Ok((
        loss,
        LossValues {
            total: g.scalar(loss),
            ..values
        },
    ))
}

/// Loss and gradient of every parameter tensor for one sequence.
pub fn loss_and_gradients(
    cfg: &ModelConfig,
    params: &ModelParams,
    x: &FeatureMatrix,
    tree: &DependencyTree,
    mode: LossMode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(LossValues, BTreeMap<String, Array2<f64>>), TrainError> {
    let mut g = Graph::new();
    let pv = ParamVars::register(&mut g, params);
    let mut rng = rng;
    let (loss, values) = loss_graph(&mut g, cfg, &pv, x, tree, mode, &mut rng)?;
    let mut grads = g.backward(loss);
    let out = pv
        .iter()
        .map(|(name, v)| {
            let grad = grads
                .take(v)
                .unwrap_or_else(|| Array2::zeros(params.get(name).raw_dim()));
            (name.to_string(), grad)
        })
        .collect();
    Ok((values, out))
}

/// Linear warm-up to the base rate, then cosine decay to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.base * step as f64 / self.warmup_steps as f64;
        }
        let decay_steps = self.total_steps.saturating_sub(self.warmup_steps);
        if decay_steps == 0 {
            return self.base;
        }
        let progress = ((step - self.warmup_steps) as f64 / decay_steps as f64).min(1.0);
        0.5 * self.base * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

/// AdamW with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: i32,
    first: BTreeMap<String, Array2<f64>>,
    second: BTreeMap<String, Array2<f64>>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn update(
        &mut self,
        params: &mut ModelParams,
        grads: &BTreeMap<String, Array2<f64>>,
        lr: f64,
    ) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (name, grad) in grads {
            let p = params.get_mut(name);
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.raw_dim()));
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.raw_dim()));
            p.mapv_inplace(|x| x * (1.0 - lr * self.weight_decay));
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .and(grad)
                .for_each(|p, m, v, &g| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                });
        }
    }
}

/// All transpositions of a piece: pitches shifted by -12..=12 for melodies
/// (shifts leaving the MIDI range are dropped), chord roots by 0..12.
pub fn augment_transpositions(
    seq: &EventSequence,
    tree: &DependencyTree,
) -> Vec<(EventSequence, DependencyTree)> {
    match seq {
        EventSequence::Notes(notes) => (-12i32..=12)
            .filter_map(|k| {
                let shifted: Option<Vec<_>> = notes
                    .iter()
                    .map(|n| match n.pitch {
                        None => Some(n.clone()),
                        Some(p) => {
                            let q = p as i32 + k;
                            (0..=127).contains(&q).then(|| {
                                let mut m = n.clone();
                                m.pitch = Some(q as u8);
                                m
                            })
                        }
                    })
                    .collect();
                shifted.map(|s| (EventSequence::Notes(s), tree.clone()))
            })
            .collect(),
        EventSequence::Chords(chords) => (0u8..12)
            .map(|k| {
                let shifted = chords
                    .iter()
                    .map(|c| {
                        let mut c = c.clone();
                        c.chord.root_pc = (c.chord.root_pc + k) % 12;
                        c
                    })
                    .collect();
                (EventSequence::Chords(shifted), tree.clone())
            })
            .collect(),
    }
}

/// Leave-one-out folds: `(train indices, test index)` for each piece.
pub fn leave_one_out_splits(n: usize) -> Vec<(Vec<usize>, usize)> {
    (0..n)
        .map(|test| ((0..n).filter(|&i| i != test).collect(), test))
        .collect()
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub bce: f64,
    pub ce: f64,
    pub total: f64,
}

pub struct FitResult {
    pub model: Model,
    /// Mean losses per epoch.
    pub log: Vec<LossRecord>,
}

fn check_pair(seq: &EventSequence, tree: &DependencyTree) -> Result<(), TrainError> {
    if seq.len() != tree.len() {
        return Err(TrainError::LengthMismatch {
            seq: seq.len(),
            tree: tree.len(),
        });
    }
    for (i, rest) in seq.rests().into_iter().enumerate() {
        if rest != tree.is_rest(i) {
            return Err(TrainError::RestMismatch(i));
        }
    }
    Ok(())
}

/// Train a model from scratch.
///
/// `model_cfg.vocab_sizes` is overwritten from the corpus. The duration
/// vocabulary is built from `corpus` only.
pub fn fit(
    corpus: &[(EventSequence, DependencyTree)],
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<FitResult, TrainError> {
    fit_with_callback(corpus, cfg, model_cfg, |_| {})
}

pub fn fit_with_callback<F: FnMut(&LossRecord)>(
    corpus: &[(EventSequence, DependencyTree)],
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    mut on_epoch: F,
) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    let first = corpus.first().ok_or(TrainError::EmptyCorpus)?;
    let kind = first.0.kind();
    for (seq, tree) in corpus {
        check_pair(seq, tree)?;
    }
    let vocab = build_duration_vocab(corpus.iter().map(|(s, _)| s))?;
    let extractor = FeatureExtractor::new(vocab.clone());
    let mut model_cfg = model_cfg.clone();
    model_cfg.vocab_sizes = kind.vocab_sizes(vocab.len());
    model_cfg.validate()?;

    let mut examples = Vec::new();
    for (seq, tree) in corpus {
        let copies = if cfg.augment {
            augment_transpositions(seq, tree)
        } else {
            vec![(seq.clone(), tree.clone())]
        };
        for (s, t) in copies {
            examples.push((extractor.extract(&s)?, t));
        }
    }

    let mut params = init_params(&model_cfg, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let steps_per_epoch = examples.len().div_ceil(cfg.batch_size);
    let schedule = LrSchedule {
        base: cfg.learning_rate,
        warmup_steps: cfg.warmup_steps,
        total_steps: steps_per_epoch * cfg.epochs,
    };
    let mut optimizer = AdamW::new(cfg.weight_decay);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = LossValues::default();
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut accumulated: BTreeMap<String, Array2<f64>> = BTreeMap::new();
            for &i in batch {
                let (x, tree) = &examples[i];
                let (values, grads) = loss_and_gradients(
                    &model_cfg,
                    &params,
                    x,
                    tree,
                    cfg.loss_mode,
                    Some(&mut rng),
                )?;
                if !values.total.is_finite() {
                    return Err(TrainError::Divergence { epoch, step });
                }
                sums.bce += values.bce;
                sums.ce += values.ce;
                sums.total += values.total;
                for (name, grad) in grads {
                    match accumulated.get_mut(&name) {
                        Some(acc) => *acc += &grad,
                        None => {
                            accumulated.insert(name, grad);
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for grad in accumulated.values_mut() {
                *grad *= scale;
            }
            lr = schedule.at(step);
            optimizer.update(&mut params, &accumulated, lr);
            step += 1;
        }
        if !params.is_finite() {
            return Err(TrainError::Divergence { epoch, step });
        }
        let n = examples.len() as f64;
        let record = LossRecord {
            epoch,
            step,
            lr,
            bce: sums.bce / n,
            ce: sums.ce / n,
            total: sums.total / n,
        };
        on_epoch(&record);
        log.push(record);
    }

    Ok(FitResult {
        model: Model {
            config: model_cfg,
            params,
            kind,
            vocab,
        },
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ChordEvent, ChordSymbol, NoteEvent};
    use ndarray::arr2;
    use num_rational::Rational64;

    const NEG: f64 = f64::NEG_INFINITY;

    fn hand_example() -> (ArcScores, GoldArcs) {
        // rows: e0, e1; cols: dummy, e0, e1. gold: e0 root, e1 -> e0
        let s = ArcScores::from_logits(arr2(&[[1.0, NEG, -1.0], [0.0, 2.0, NEG]]));
        let t = DependencyTree::new(vec![Head::Root, Head::Index(0)]).unwrap();
        (s, GoldArcs::from_tree(&t))
    }

    fn sp(x: f64) -> f64 {
        (1.0 + x.exp()).ln()
    }

    #[test]
    fn gold_arcs() {
        let (_, g) = hand_example();
        assert_eq!(g.head_cols, vec![0, 1]);
        assert_eq!(g.indicator.iter().filter(|&&b| b).count(), 2);
        let t = DependencyTree::new(vec![Head::Index(2), Head::None, Head::Root]).unwrap();
        assert_eq!(GoldArcs::from_tree(&t).head_cols, vec![3, 0, 0]);
    }

    #[test]
    fn bce_hand_example() {
        let (s, g) = hand_example();
        // -ln σ(1) - ln(1-σ(-1)) - ln(1-σ(0)) - ln σ(2), averaged over 4 arcs
        let expected = (sp(-1.0) + sp(-1.0) + sp(0.0) + sp(-2.0)) / 4.0;
        assert!((bce_loss(&s, &g) - expected).abs() < 1e-12);
    }

    #[test]
    fn ce_hand_example() {
        let (s, g) = hand_example();
        let row0 = (1f64.exp() + (-1f64).exp()).ln() - 1.0;
        let row1 = (1.0 + 2f64.exp()).ln() - 2.0;
        let expected = (row0 + row1) / 2.0;
        assert!((ce_loss(&s, &g) - expected).abs() < 1e-12);
        let both = total_loss(&s, &g, LossMode::Both);
        assert!((both - bce_loss(&s, &g) - ce_loss(&s, &g)).abs() < 1e-15);
        assert_eq!(total_loss(&s, &g, LossMode::BceOnly), bce_loss(&s, &g));
        assert_eq!(total_loss(&s, &g, LossMode::CeOnly), ce_loss(&s, &g));
    }

    #[test]
    fn loss_limits() {
        let t = DependencyTree::new(vec![Head::Root]).unwrap();
        let g = GoldArcs::from_tree(&t);
        let s = ArcScores::from_logits(arr2(&[[0.0, NEG]]));
        assert!((bce_loss(&s, &g) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(ce_loss(&s, &g), 0.0);

        let t = DependencyTree::new(vec![Head::Root, Head::Index(0)]).unwrap();
        let g = GoldArcs::from_tree(&t);
        let s = ArcScores::from_logits(arr2(&[[0.0, NEG, 0.0], [0.0, 0.0, NEG]]));
        // two equal scores per row
        let s2 = ArcScores::from_logits(arr2(&[[0.0, NEG, 0.0], [NEG, 0.0, NEG]]));
        assert!((ce_loss(&s, &g) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((ce_loss(&s2, &g) - std::f64::consts::LN_2 / 2.0).abs() < 1e-12);

        let big = 40.0;
        let s = ArcScores::from_logits(arr2(&[[big, NEG, -big], [-big, big, NEG]]));
        assert!(bce_loss(&s, &g) < 1e-15);
        assert!(ce_loss(&s, &g) < 1e-15);
    }

    #[test]
    fn losses_ignore_masked_entries() {
        let (s, g) = hand_example();
        // moving -inf entries around in non-gold positions of a row changes nothing
        let s2 = ArcScores::from_logits(arr2(&[[1.0, -1.0, NEG], [0.0, 2.0, NEG]]));
        let mut g2 = g.clone();
        g2.indicator = arr2(&[[true, false, false], [false, true, false]]);
        assert_eq!(bce_loss(&s, &g), bce_loss(&s2, &g2));
        assert_eq!(ce_loss(&s, &g), ce_loss(&s2, &g2));
    }

    #[test]
    fn warmup_and_cosine() {
        let s = LrSchedule {
            base: 4e-4,
            warmup_steps: 50,
            total_steps: 150,
        };
        assert_eq!(s.at(0), 0.0);
        assert!((s.at(25) - 2e-4).abs() < 1e-18);
        assert!((s.at(50) - 4e-4).abs() < 1e-18);
        assert!((s.at(100) - 2e-4).abs() < 1e-15);
        assert!(s.at(150).abs() < 1e-18);
        assert!(s.at(120) < s.at(90));
    }

    #[test]
    fn adamw_first_step() {
        let mut p = ModelParams {
            tensors: [("w".to_string(), arr2(&[[1.0, -2.0]]))].into_iter().collect(),
        };
        let grads: BTreeMap<_, _> = [("w".to_string(), arr2(&[[0.5, -0.1]]))].into_iter().collect();
        let mut opt = AdamW::new(0.1);
        opt.update(&mut p, &grads, 0.01);
        // first bias-corrected step moves by lr * sign(g), after decay
        let w = p.get("w");
        assert!((w[[0, 0]] - (1.0 * (1.0 - 0.001) - 0.01)).abs() < 1e-6);
        assert!((w[[0, 1]] - (-2.0 * (1.0 - 0.001) + 0.01)).abs() < 1e-6);
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn chord_transpositions() {
        let seq = EventSequence::Chords(
            [(2, 1), (7, 0), (0, 0)]
                .iter()
                .map(|&(root_pc, form)| ChordEvent {
                    chord: ChordSymbol {
                        root_pc,
                        form,
                        extension: 1,
                    },
                    duration: r(1, 1),
                    bar_position: r(0, 1),
                    ts_numerator: 4,
                })
                .collect(),
        );
        let tree = DependencyTree::new(vec![Head::Index(1), Head::Index(2), Head::Root]).unwrap();
        let out = augment_transpositions(&seq, &tree);
        assert_eq!(out.len(), 12);
        assert_eq!(out[0].0, seq);
        assert!(out.iter().all(|(_, t)| *t == tree));
        let EventSequence::Chords(c) = &out[11].0 else { panic!() };
        assert_eq!(c[0].chord.root_pc, 1);
    }

    #[test]
    fn melody_transpositions() {
        let mk = |p: Option<u8>| NoteEvent {
            pitch: p,
            duration: r(1, 4),
            bar_position: r(0, 1),
            ts_numerator: 4,
        };
        let seq = EventSequence::Notes(vec![mk(Some(60)), mk(None), mk(Some(67))]);
        let tree = DependencyTree::new(vec![Head::Index(2), Head::None, Head::Root]).unwrap();
        let out = augment_transpositions(&seq, &tree);
        assert_eq!(out.len(), 25);
        assert!(out.iter().all(|(_, t)| *t == tree));
        assert_eq!(out[12].0, seq);

        let high = EventSequence::Notes(vec![mk(Some(120)), mk(Some(60))]);
        let tree = DependencyTree::new(vec![Head::Index(1), Head::Root]).unwrap();
        // shifts +8..=+12 leave the MIDI range
        assert_eq!(augment_transpositions(&high, &tree).len(), 20);
    }

    #[test]
    fn loo_splits() {
        let splits = leave_one_out_splits(3);
        assert_eq!(splits.len(), 3);
        assert!(splits.iter().all(|(train, _)| train.len() == 2));
        let mut tests: Vec<usize> = splits.iter().map(|(_, t)| *t).collect();
        tests.sort();
        assert_eq!(tests, vec![0, 1, 2]);
        assert!(splits.iter().all(|(train, t)| !train.contains(t)));
    }

    #[test]
    fn loss_mode_parsing() {
        assert_eq!("bce".parse::<LossMode>(), Ok(LossMode::BceOnly));
        assert_eq!("ce".parse::<LossMode>(), Ok(LossMode::CeOnly));
        assert_eq!("both".parse::<LossMode>(), Ok(LossMode::Both));
        assert!("mse".parse::<LossMode>().is_err());
    }
}
