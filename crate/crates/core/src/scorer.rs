//! Neural arc scorer.
//!
//! Summed per-feature embeddings are projected to the hidden width and
//! contextualised by a pre-norm transformer encoder with clipped relative
//! position representations. A learnable root row is appended and every
//! potential `(head, dep)` pair is scored by an MLP over the concatenated
//! pair of rows.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::{Graph, Var};
use crate::features::FeatureMatrix;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ScorerError {
    #[error("feature column {column} value {value} outside vocabulary of size {size}")]
    OutOfVocab {
        column: usize,
        value: usize,
        size: usize,
    },
    #[error("expected {expected} feature columns, found {found}")]
    FeatureWidth { expected: usize, found: usize },
    #[error("mask covers {mask} elements but the input has {input}")]
    MaskLength { mask: usize, input: usize },
    #[error("invalid model configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcPredictor {
    #[default]
    Mlp,
    Bilinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_sizes: Vec<usize>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub attention_heads: usize,
    /// Width of the position-wise feed-forward block.
    pub ffn_dim: usize,
    /// Hidden layers of the arc MLP; 0 means a single linear map to the logit.
    pub mlp_layers: usize,
    pub dropout: f64,
    pub max_relative_distance: usize,
    pub arc_predictor: ArcPredictor,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_sizes: Vec::new(),
            embed_dim: 96,
            hidden_dim: 64,
            encoder_layers: 2,
            attention_heads: 4,
            ffn_dim: 64,
            mlp_layers: 2,
            dropout: 0.1,
            max_relative_distance: 32,
            arc_predictor: ArcPredictor::Mlp,
        }
    }
}

impl ModelConfig {
    pub fn with_vocab(vocab_sizes: Vec<usize>) -> Self {
        ModelConfig {
            vocab_sizes,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScorerError> {
        let err = |m: &str| Err(ScorerError::Config(m.to_string()));
        if self.vocab_sizes.is_empty() || self.vocab_sizes.contains(&0) {
            return err("every feature needs a non-empty vocabulary");
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.ffn_dim == 0 {
            return err("widths must be positive");
        }
        if self.attention_heads == 0 || self.hidden_dim % self.attention_heads != 0 {
            return err("hidden_dim must be divisible by attention_heads");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    fn head_dim(&self) -> usize {
        self.hidden_dim / self.attention_heads
    }

    /// Name and shape of every parameter tensor.
    pub fn tensor_shapes(&self) -> Vec<(String, (usize, usize))> {
        let h = self.hidden_dim;
        let rel = 2 * self.max_relative_distance + 1;
        let mut out = Vec::new();
        for (k, &v) in self.vocab_sizes.iter().enumerate() {
            out.push((format!("embed.{}", k), (v, self.embed_dim)));
        }
        out.push(("input.weight".into(), (self.embed_dim, h)));
        out.push(("input.bias".into(), (1, h)));
        for l in 0..self.encoder_layers {
            let p = format!("encoder.{}", l);
            out.push((format!("{}.ln1.gain", p), (1, h)));
            out.push((format!("{}.ln1.bias", p), (1, h)));
            for m in ["query", "key", "value", "output"] {
                out.push((format!("{}.attn.{}.weight", p, m), (h, h)));
                out.push((format!("{}.attn.{}.bias", p, m), (1, h)));
            }
            out.push((format!("{}.attn.rel_key", p), (rel, self.head_dim())));
            out.push((format!("{}.attn.rel_value", p), (rel, self.head_dim())));
            out.push((format!("{}.ln2.gain", p), (1, h)));
            out.push((format!("{}.ln2.bias", p), (1, h)));
            out.push((format!("{}.ffn.in.weight", p), (h, self.ffn_dim)));
            out.push((format!("{}.ffn.in.bias", p), (1, self.ffn_dim)));
            out.push((format!("{}.ffn.out.weight", p), (self.ffn_dim, h)));
            out.push((format!("{}.ffn.out.bias", p), (1, h)));
        }
        out.push(("encoder.norm.gain".into(), (1, h)));
        out.push(("encoder.norm.bias".into(), (1, h)));
        out.push(("root".into(), (1, h)));
        match self.arc_predictor {
            ArcPredictor::Mlp => {
                let mut width = 2 * h;
                for i in 0..self.mlp_layers {
                    out.push((format!("arc.{}.weight", i), (width, h)));
                    out.push((format!("arc.{}.bias", i), (1, h)));
                    width = h;
                }
                out.push(("arc.out.weight".into(), (width, 1)));
            }
            ArcPredictor::Bilinear => {
                out.push(("arc.bilinear".into(), (h, h)));
                out.push(("arc.out.weight".into(), (2 * h, 1)));
            }
        }
        out.push(("arc.out.bias".into(), (1, 1)));
        out
    }
}

/// Named parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tensors: BTreeMap<String, Array2<f64>>,
}

impl ModelParams {
    pub fn get(&self, name: &str) -> &Array2<f64> {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter tensor {}", name))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("missing parameter tensor {}", name))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Round every value through `f32`, the precision of saved weights.
    pub fn rounded_to_f32(&self) -> ModelParams {
        ModelParams {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), t.mapv(|v| v as f32 as f64)))
                .collect(),
        }
    }

    /// Check every tensor against the shapes dictated by `cfg`.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<(), String> {
        let shapes = cfg.tensor_shapes();
        if shapes.len() != self.tensors.len() {
            return Err(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                self.tensors.len()
            ));
        }
        for (name, shape) in shapes {
            match self.tensors.get(&name) {
                None => return Err(name),
                Some(t) if t.dim() != shape => return Err(name),
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Seeded initialisation: `U(-1/√fan_in, 1/√fan_in)` for weight matrices,
/// `N(0, 0.02)` for embeddings, relative positions and the root row, zero
/// biases and unit layer-norm gains.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.02).expect("valid std");
    let mut tensors = BTreeMap::new();
    for (name, (r, c)) in cfg.tensor_shapes() {
        let t = if name.ends_with(".gain") {
            Array2::ones((r, c))
        } else if name.ends_with(".bias") {
            Array2::zeros((r, c))
        } else if name.starts_with("embed.") || name.contains("rel_") || name == "root" {
            Array2::from_shape_simple_fn((r, c), || normal.sample(&mut rng))
        } else {
            let bound = 1.0 / (r as f64).sqrt();
            Array2::from_shape_simple_fn((r, c), || rng.gen_range(-bound..bound))
        };
        tensors.insert(name, t);
    }
    ModelParams { tensors }
}

/// Which `(dependent, head-column)` pairs may carry an arc.
///
/// Rows are dependents; column 0 is the dummy root and column `j + 1` is
/// element `j`. Rest rows may only point to the dummy column and rests are
/// never head candidates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PotentialArcMask {
    allowed: Array2<bool>,
    rests: Vec<bool>,
}

impl PotentialArcMask {
    pub fn new(rests: &[bool]) -> Self {
        let n = rests.len();
        let allowed = Array2::from_shape_fn((n, n + 1), |(dep, col)| {
            if col == 0 {
                true
            } else {
                let head = col - 1;
                head != dep && !rests[dep] && !rests[head]
            }
        });
        PotentialArcMask {
            allowed,
            rests: rests.to_vec(),
        }
    }

    pub fn without_rests(n: usize) -> Self {
        PotentialArcMask::new(&vec![false; n])
    }

    /// Build from an explicit boolean matrix (the structural rules above are
    /// not enforced).
    pub fn from_matrix(allowed: Array2<bool>, rests: Vec<bool>) -> Self {
        assert_eq!(allowed.nrows(), rests.len());
        assert_eq!(allowed.ncols(), rests.len() + 1);
        PotentialArcMask { allowed, rests }
    }

    pub fn len(&self) -> usize {
        self.rests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rests.is_empty()
    }

    pub fn rests(&self) -> &[bool] {
        &self.rests
    }

    pub fn allowed(&self, dep: usize, col: usize) -> bool {
        self.allowed[[dep, col]]
    }

    pub fn matrix(&self) -> &Array2<bool> {
        &self.allowed
    }

    /// All allowed `(dep, col)` pairs in row-major order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.allowed
            .indexed_iter()
            .filter(|(_, &a)| a)
            .map(|(ix, _)| ix)
            .collect()
    }
}

/// `λ × (λ+1)` arc logits; entries outside the potential-arc mask are `-∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcScores {
    pub logits: Array2<f64>,
    pub rests: Vec<bool>,
}

impl ArcScores {
    pub fn new(logits: Array2<f64>, rests: Vec<bool>) -> Self {
        assert_eq!(logits.nrows(), rests.len());
        assert_eq!(logits.ncols(), rests.len() + 1);
        ArcScores { logits, rests }
    }

    /// Scores without rests.
    pub fn from_logits(logits: Array2<f64>) -> Self {
        let n = logits.nrows();
        ArcScores::new(logits, vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.rests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rests.is_empty()
    }

    /// Spread per-arc logits into a full matrix, `-∞` elsewhere.
    pub fn scatter(mask: &PotentialArcMask, arcs: &[(usize, usize)], values: &[f64]) -> Self {
        let n = mask.len();
        let mut logits = Array2::from_elem((n, n + 1), f64::NEG_INFINITY);
        for (&(dep, col), &v) in arcs.iter().zip(values) {
            logits[[dep, col]] = v;
        }
        ArcScores::new(logits, mask.rests().to_vec())
    }
}

/// Parameter tensors registered as graph inputs.
pub struct ParamVars {
    vars: BTreeMap<String, Var>,
}

impl ParamVars {
    pub fn register(g: &mut Graph, params: &ModelParams) -> Self {
        let vars = params
            .tensors
            .iter()
            .map(|(k, t)| (k.clone(), g.input(t.clone())))
            .collect();
        ParamVars { vars }
    }

    pub fn get(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {}", name))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Dropout source; `None` means evaluation mode.
pub type DropoutRng<'a> = Option<&'a mut ChaCha8Rng>;

fn dropout(g: &mut Graph, x: Var, p: f64, rng: &mut DropoutRng) -> Var {
    match rng {
        Some(rng) if p > 0.0 => {
            let keep = 1.0 - p;
            let shape = g.value(x).raw_dim();
            let mask = Array2::from_shape_simple_fn((shape[0], shape[1]), || {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            g.mask_mul(x, mask)
        }
        _ => x,
    }
}

fn linear(g: &mut Graph, pv: &ParamVars, x: Var, prefix: &str) -> Var {
    let w = pv.get(&format!("{}.weight", prefix));
    let b = pv.get(&format!("{}.bias", prefix));
    let xw = g.matmul(x, w);
    g.add_row(xw, b)
}

pub fn check_features(cfg: &ModelConfig, x: &FeatureMatrix) -> Result<(), ScorerError> {
    if x.width() != cfg.vocab_sizes.len() {
        return Err(ScorerError::FeatureWidth {
            expected: cfg.vocab_sizes.len(),
            found: x.width(),
        });
    }
    for ((_, column), &value) in x.values.indexed_iter() {
        let size = cfg.vocab_sizes[column];
        if value >= size {
            return Err(ScorerError::OutOfVocab {
                column,
                value,
                size,
            });
        }
    }
    Ok(())
}

/// Sum of per-feature embedding rows, `λ × embed_dim`.
pub fn embed_graph(g: &mut Graph, pv: &ParamVars, x: &FeatureMatrix) -> Var {
    let mut sum = None;
    for (k, column) in x.values.columns().into_iter().enumerate() {
        let table = pv.get(&format!("embed.{}", k));
        let rows = g.gather_rows(table, column.to_vec());
        sum = Some(match sum {
            None => rows,
            Some(acc) => g.add(acc, rows),
        });
    }
    sum.expect("at least one feature column")
}

fn attention(
    g: &mut Graph,
    cfg: &ModelConfig,
    pv: &ParamVars,
    x: Var,
    prefix: &str,
    rng: &mut DropoutRng,
) -> Var {
    let dh = cfg.head_dim();
    let k = cfg.max_relative_distance;
    let q = linear(g, pv, x, &format!("{}.query", prefix));
    let kk = linear(g, pv, x, &format!("{}.key", prefix));
    let v = linear(g, pv, x, &format!("{}.value", prefix));
    let rel_key = pv.get(&format!("{}.rel_key", prefix));
    let rel_value = pv.get(&format!("{}.rel_value", prefix));
    let rel_key_t = g.transpose(rel_key);
    let scale = 1.0 / (dh as f64).sqrt();

    let mut heads = Vec::with_capacity(cfg.attention_heads);
    for head in 0..cfg.attention_heads {
        let qh = g.slice_cols(q, head * dh, dh);
        let kh = g.slice_cols(kk, head * dh, dh);
        let vh = g.slice_cols(v, head * dh, dh);
        let kh_t = g.transpose(kh);
        let content = g.matmul(qh, kh_t);
        let rel = g.matmul(qh, rel_key_t);
        let position = g.rel_gather(rel, k);
        let logits = g.add(content, position);
        let logits = g.scale(logits, scale);
        let weights = g.softmax_rows(logits);
        let weights = dropout(g, weights, cfg.dropout, rng);
        let values = g.matmul(weights, vh);
        let buckets = g.rel_scatter(weights, k);
        let rel_values = g.matmul(buckets, rel_value);
        heads.push(g.add(values, rel_values));
    }
    let concat = g.concat_cols(heads);
    linear(g, pv, concat, &format!("{}.output", prefix))
}

/// Encoder output with the root row appended, `(λ+1) × hidden_dim`.
pub fn encode_graph(
    g: &mut Graph,
    cfg: &ModelConfig,
    pv: &ParamVars,
    embedded: Var,
    rng: &mut DropoutRng,
) -> Var {
    let x = linear(g, pv, embedded, "input");
    let mut x = dropout(g, x, cfg.dropout, rng);
    for l in 0..cfg.encoder_layers {
        let p = format!("encoder.{}", l);
        let n1 = g.layer_norm(
            x,
            pv.get(&format!("{}.ln1.gain", p)),
            pv.get(&format!("{}.ln1.bias", p)),
        );
        let a = attention(g, cfg, pv, n1, &format!("{}.attn", p), rng);
        let a = dropout(g, a, cfg.dropout, rng);
        x = g.add(x, a);
        let n2 = g.layer_norm(
            x,
            pv.get(&format!("{}.ln2.gain", p)),
            pv.get(&format!("{}.ln2.bias", p)),
        );
        let f = linear(g, pv, n2, &format!("{}.ffn.in", p));
        let f = g.gelu(f);
        let f = linear(g, pv, f, &format!("{}.ffn.out", p));
        let f = dropout(g, f, cfg.dropout, rng);
        x = g.add(x, f);
    }
    let out = g.layer_norm(x, pv.get("encoder.norm.gain"), pv.get("encoder.norm.bias"));
    g.concat_rows(vec![out, pv.get("root")])
}

/// Logit column for the given `(dep, col)` arcs given the encoder output.
pub fn score_graph(
    g: &mut Graph,
    cfg: &ModelConfig,
    pv: &ParamVars,
    hidden: Var,
    arcs: &[(usize, usize)],
    rng: &mut DropoutRng,
) -> Var {
    let n = g.value(hidden).nrows() - 1;
    let h = cfg.hidden_dim;
    let head_rows: Vec<usize> = arcs
        .iter()
        .map(|&(_, col)| if col == 0 { n } else { col - 1 })
        .collect();
    let dep_rows: Vec<usize> = arcs.iter().map(|&(dep, _)| dep).collect();

    // first layer on concat(H[head], H[dep]) computed as a split product
    let first_affine = |g: &mut Graph, weight: Var| {
        let w_head = g.slice_rows(weight, 0, h);
        let w_dep = g.slice_rows(weight, h, h);
        let a = g.matmul(hidden, w_head);
        let b = g.matmul(hidden, w_dep);
        let a = g.gather_rows(a, head_rows.clone());
        let b = g.gather_rows(b, dep_rows.clone());
        g.add(a, b)
    };

    let logits = match cfg.arc_predictor {
        ArcPredictor::Mlp => {
            let mut z = None;
            for i in 0..cfg.mlp_layers {
                let pre = match z {
                    None => first_affine(g, pv.get(&format!("arc.{}.weight", i))),
                    Some(prev) => g.matmul(prev, pv.get(&format!("arc.{}.weight", i))),
                };
                let pre = g.add_row(pre, pv.get(&format!("arc.{}.bias", i)));
                let act = g.gelu(pre);
                z = Some(dropout(g, act, cfg.dropout, rng));
            }
            match z {
                None => first_affine(g, pv.get("arc.out.weight")),
                Some(prev) => g.matmul(prev, pv.get("arc.out.weight")),
            }
        }
        ArcPredictor::Bilinear => {
            let projected = g.matmul(hidden, pv.get("arc.bilinear"));
            let left = g.gather_rows(projected, head_rows.clone());
            let right = g.gather_rows(hidden, dep_rows.clone());
            let prod = g.mul(left, right);
            let bilinear = g.sum_cols(prod);
            let lin = first_affine(g, pv.get("arc.out.weight"));
            g.add(bilinear, lin)
        }
    };
    g.add_row(logits, pv.get("arc.out.bias"))
}

/// Arc logits of one sequence, recorded on `g`.
pub struct ForwardPass {
    pub logits: Var,
    pub arcs: Vec<(usize, usize)>,
}

pub fn forward_graph(
    g: &mut Graph,
    cfg: &ModelConfig,
    pv: &ParamVars,
    x: &FeatureMatrix,
    mask: &PotentialArcMask,
    rng: &mut DropoutRng,
) -> Result<ForwardPass, ScorerError> {
    check_features(cfg, x)?;
    if mask.len() != x.len() {
        return Err(ScorerError::MaskLength {
            mask: mask.len(),
            input: x.len(),
        });
    }
    let e = embed_graph(g, pv, x);
    let hidden = encode_graph(g, cfg, pv, e, rng);
    let arcs = mask.arcs();
    let logits = score_graph(g, cfg, pv, hidden, &arcs, rng);
    Ok(ForwardPass { logits, arcs })
}

/// A configuration together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Scorer {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Scorer {
    pub fn new(config: ModelConfig, params: ModelParams) -> Self {
        Scorer { config, params }
    }

    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let params = init_params(&config, seed);
        Scorer { config, params }
    }

    pub fn embed(&self, x: &FeatureMatrix) -> Result<Array2<f64>, ScorerError> {
        check_features(&self.config, x)?;
        let mut g = Graph::new();
        let pv = ParamVars::register(&mut g, &self.params);
        let e = embed_graph(&mut g, &pv, x);
        Ok(g.value(e).clone())
    }

    /// Evaluation-mode encoder output `(λ+1) × hidden_dim`.
    pub fn encode(&self, embedded: &Array2<f64>) -> Array2<f64> {
        let mut g = Graph::new();
        let pv = ParamVars::register(&mut g, &self.params);
        let e = g.input(embedded.clone());
        let hidden = encode_graph(&mut g, &self.config, &pv, e, &mut None);
        g.value(hidden).clone()
    }

    pub fn score_arcs(&self, hidden: &Array2<f64>, mask: &PotentialArcMask) -> ArcScores {
        assert_eq!(hidden.nrows(), mask.len() + 1);
        let mut g = Graph::new();
        let pv = ParamVars::register(&mut g, &self.params);
        let hv = g.input(hidden.clone());
        let arcs = mask.arcs();
        let logits = score_graph(&mut g, &self.config, &pv, hv, &arcs, &mut None);
        ArcScores::scatter(mask, &arcs, g.value(logits).as_slice().unwrap())
    }

    pub fn forward(
        &self,
        x: &FeatureMatrix,
        mask: &PotentialArcMask,
    ) -> Result<ArcScores, ScorerError> {
        let mut g = Graph::new();
        let pv = ParamVars::register(&mut g, &self.params);
        let pass = forward_graph(&mut g, &self.config, &pv, x, mask, &mut None)?;
        let values = g.value(pass.logits).as_slice().unwrap().to_vec();
        Ok(ArcScores::scatter(mask, &pass.arcs, &values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SequenceKind;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            vocab_sizes: vec![5, 3],
            embed_dim: 6,
            hidden_dim: 8,
            encoder_layers: 1,
            attention_heads: 2,
            ffn_dim: 8,
            mlp_layers: 1,
            dropout: 0.0,
            max_relative_distance: 3,
            arc_predictor: ArcPredictor::Mlp,
        }
    }

    fn features(rows: &[[usize; 2]]) -> FeatureMatrix {
        let flat: Vec<usize> = rows.iter().flatten().copied().collect();
        FeatureMatrix {
            values: Array2::from_shape_vec((rows.len(), 2), flat).unwrap(),
            kind: SequenceKind::Notes,
        }
    }

    #[test]
    fn config_validation() {
        assert!(tiny_config().validate().is_ok());
        let bad = ModelConfig {
            attention_heads: 3,
            ..tiny_config()
        };
        assert!(bad.validate().is_err());
        assert!(ModelConfig::default().validate().is_err()); // no vocabularies
        assert!(ModelConfig::with_vocab(vec![129, 45, 6]).validate().is_ok());
    }

    #[test]
    fn init_is_seeded() {
        let cfg = tiny_config();
        assert_eq!(init_params(&cfg, 7), init_params(&cfg, 7));
        assert_ne!(init_params(&cfg, 7), init_params(&cfg, 8));
        let p = init_params(&cfg, 7);
        assert!(p.check_shapes(&cfg).is_ok());
        for (name, shape) in cfg.tensor_shapes() {
            assert_eq!(p.get(&name).dim(), shape, "{}", name);
        }
    }

    #[test]
    fn embedding_is_a_sum_of_rows() {
        let cfg = ModelConfig {
            vocab_sizes: vec![2, 2],
            embed_dim: 2,
            ..tiny_config()
        };
        let mut scorer = Scorer::init(cfg, 0);
        *scorer.params.get_mut("embed.0") = ndarray::arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        *scorer.params.get_mut("embed.1") = ndarray::arr2(&[[10.0, 20.0], [30.0, 40.0]]);
        let e = scorer.embed(&features(&[[0, 1], [1, 0]])).unwrap();
        assert_eq!(e, ndarray::arr2(&[[31.0, 42.0], [13.0, 24.0]]));

        for t in scorer.params.tensors.values_mut() {
            t.fill(0.0);
        }
        let e = scorer.embed(&features(&[[1, 1]])).unwrap();
        assert_eq!(e, Array2::<f64>::zeros((1, 2)));
    }

    #[test]
    fn embedding_rejects_out_of_vocab() {
        let scorer = Scorer::init(tiny_config(), 0);
        assert_eq!(
            scorer.embed(&features(&[[5, 0]])),
            Err(ScorerError::OutOfVocab {
                column: 0,
                value: 5,
                size: 5
            })
        );
    }

    #[test]
    fn mask_structure() {
        let mask = PotentialArcMask::new(&[false, true, false]);
        // rest row: dummy column only
        assert_eq!(
            (0..4).map(|c| mask.allowed(1, c)).collect::<Vec<_>>(),
            vec![true, false, false, false]
        );
        // rest column never a head
        assert!(!mask.allowed(0, 2));
        assert!(!mask.allowed(2, 2));
        // self-loops excluded
        assert!(!mask.allowed(0, 1));
        assert!(!mask.allowed(2, 3));
        assert!(mask.allowed(0, 3));
        assert!(mask.allowed(2, 1));
        assert!(mask.allowed(0, 0) && mask.allowed(2, 0));
    }
}
