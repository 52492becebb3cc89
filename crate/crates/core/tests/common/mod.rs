//! Oracles and generators shared by the integration tests. Nothing here
//! calls the library's tree algorithms, so results can be compared against
//! them independently.
#![allow(dead_code)]

use std::collections::BTreeMap;

use muparse::features::{FeatureMatrix, SequenceKind};
use muparse::scorer::{init_params, ModelConfig, ModelParams};
use muparse::training::{loss_and_gradients, LossMode};
use muparse::tree::{DependencyTree, Head};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random projective tree without double-sided elements over `lo..=hi`,
/// returning its root. Such a subtree's head always sits at one end of
/// its span, with the rest split into consecutive dependent subtrees.
fn single_sided_span(rng: &mut ChaCha8Rng, lo: usize, hi: usize, heads: &mut [Head]) -> usize {
    if lo == hi {
        return lo;
    }
    let (head, rest) = if rng.gen_bool(0.5) {
        (lo, (lo + 1, hi))
    } else {
        (hi, (lo, hi - 1))
    };
    let mut start = rest.0;
    while start <= rest.1 {
        let end = rng.gen_range(start..=rest.1);
        let sub = single_sided_span(rng, start, end, heads);
        heads[sub] = Head::Index(head);
        start = end + 1;
    }
    head
}

pub fn random_single_sided(rng: &mut ChaCha8Rng, n: usize) -> Vec<Head> {
    let mut heads = vec![Head::Root; n];
    let root = single_sided_span(rng, 0, n - 1, &mut heads);
    heads[root] = Head::Root;
    heads
}

/// Uniformly random head assignment that forms a tree (rejection sampling).
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<Head> {
    loop {
        let root = rng.gen_range(0..n);
        let heads: Vec<Head> = (0..n)
            .map(|i| {
                if i == root {
                    Head::Root
                } else {
                    let mut h = rng.gen_range(0..n - 1);
                    if h >= i {
                        h += 1;
                    }
                    Head::Index(h)
                }
            })
            .collect();
        if is_tree(&heads) {
            return heads;
        }
    }
}

/// Single root and every element reaches it.
pub fn is_tree(heads: &[Head]) -> bool {
    let n = heads.len();
    if heads.iter().filter(|h| **h == Head::Root).count() != 1 {
        return false;
    }
    (0..n).all(|start| {
        let mut cur = start;
        for _ in 0..=n {
            match heads[cur] {
                Head::Root => return true,
                Head::Index(h) if h < n => cur = h,
                _ => return false,
            }
        }
        false
    })
}

fn span(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Projectivity of a single-rooted tree as "no two arcs cross and no arc
/// passes over the root".
pub fn non_crossing(heads: &[Head]) -> bool {
    let arcs: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .filter_map(|(d, h)| match h {
            Head::Index(h) => Some(span(d, *h)),
            _ => None,
        })
        .collect();
    let root = heads.iter().position(|h| *h == Head::Root);
    for (i, &(a, b)) in arcs.iter().enumerate() {
        if let Some(r) = root {
            if a < r && r < b {
                return false;
            }
        }
        for &(c, d) in &arcs[i + 1..] {
            if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                return false;
            }
        }
    }
    true
}

pub fn double_sided(heads: &[Head]) -> bool {
    let n = heads.len();
    (0..n).any(|h| {
        let left = (0..h).any(|d| heads[d] == Head::Index(h));
        let right = (h + 1..n).any(|d| heads[d] == Head::Index(h));
        left && right
    })
}

/// Every single-rooted projective tree over `n` elements, by depth-first
/// search over head assignments with crossing arcs pruned early.
pub fn all_projective_trees(n: usize) -> Vec<Vec<Head>> {
    fn go(i: usize, n: usize, heads: &mut Vec<Head>, roots: usize, out: &mut Vec<Vec<Head>>) {
        if i == n {
            if roots == 1 && is_tree(heads) && non_crossing(heads) {
                out.push(heads.clone());
            }
            return;
        }
        let mut options = vec![Head::Root];
        options.extend((0..n).filter(|&h| h != i).map(Head::Index));
        for h in options {
            if h == Head::Root && roots == 1 {
                continue;
            }
            heads.push(h);
            let arcs_ok = match h {
                Head::Index(j) => {
                    let (a, b) = span(i, j);
                    heads[..i].iter().enumerate().all(|(d, g)| match g {
                        Head::Index(k) => {
                            let (c, e) = span(d, *k);
                            !((a < c && c < b && b < e) || (c < a && a < e && e < b))
                        }
                        _ => true,
                    })
                }
                _ => true,
            };
            if arcs_ok {
                go(i + 1, n, heads, roots + usize::from(h == Head::Root), out);
            }
            heads.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), 0, &mut out);
    out
}

/// Every single-rooted tree over `n` elements.
pub fn all_trees(n: usize) -> Vec<Vec<Head>> {
    let mut out = Vec::new();
    let total = (n + 1).pow(n as u32);
    for mut code in 0..total {
        let heads: Vec<Head> = (0..n)
            .map(|_| {
                let c = code % (n + 1);
                code /= n + 1;
                if c == 0 {
                    Head::Root
                } else {
                    Head::Index(c - 1)
                }
            })
            .collect();
        if heads.iter().enumerate().all(|(i, h)| *h != Head::Index(i)) && is_tree(&heads) {
            out.push(heads);
        }
    }
    out
}

/// Sum of arc scores with column 0 the dummy root.
pub fn score(s: &Array2<f64>, heads: &[Head]) -> f64 {
    heads
        .iter()
        .enumerate()
        .map(|(d, h)| match h {
            Head::Root => s[[d, 0]],
            Head::Index(j) => s[[d, j + 1]],
            Head::None => 0.0,
        })
        .sum()
}

/// Integer-valued `n × (n+1)` scores with masked self-loops, so sums are exact.
pub fn integer_scores(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n + 1), |(d, c)| {
        if c == d + 1 {
            f64::NEG_INFINITY
        } else {
            rng.gen_range(-50..=50) as f64
        }
    })
}

/// Tiny float64 model for finite-difference checks.
pub fn toy_config(durations: usize) -> ModelConfig {
    ModelConfig {
        vocab_sizes: SequenceKind::Notes.vocab_sizes(durations),
        embed_dim: 8,
        hidden_dim: 8,
        encoder_layers: 1,
        attention_heads: 2,
        ffn_dim: 8,
        mlp_layers: 1,
        dropout: 0.0,
        max_relative_distance: 2,
        ..ModelConfig::default()
    }
}

/// Initialised parameters with every entry jittered, so no gradient is
/// trivially zero because of a zero bias or unit gain.
pub fn jittered_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = init_params(cfg, seed);
    let mut r = rng(seed ^ 0x5eed);
    for t in p.tensors.values_mut() {
        t.mapv_inplace(|v| v + r.gen_range(-0.3..0.3));
    }
    p
}

/// Largest per-tensor relative error between analytic and central-difference
/// gradients of the total loss, with the name of that tensor.
pub fn gradient_check(
    cfg: &ModelConfig,
    params: &ModelParams,
    x: &FeatureMatrix,
    tree: &DependencyTree,
    mode: LossMode,
) -> (f64, String) {
    let (_, analytic) = loss_and_gradients(cfg, params, x, tree, mode, None).unwrap();
    let loss_at = |p: &ModelParams| loss_and_gradients(cfg, p, x, tree, mode, None).unwrap().0.total;
    let h = 1e-5;
    let mut worst = (0.0, String::new());
    let mut numeric: BTreeMap<String, Array2<f64>> = BTreeMap::new();
    for (name, t) in &params.tensors {
        let mut grad = Array2::zeros(t.raw_dim());
        let mut p = params.clone();
        for idx in 0..t.len() {
            let orig = t.as_slice().unwrap()[idx];
            p.get_mut(name).as_slice_mut().unwrap()[idx] = orig + h;
            let up = loss_at(&p);
            p.get_mut(name).as_slice_mut().unwrap()[idx] = orig - h;
            let down = loss_at(&p);
            p.get_mut(name).as_slice_mut().unwrap()[idx] = orig;
            grad.as_slice_mut().unwrap()[idx] = (up - down) / (2.0 * h);
        }
        numeric.insert(name.clone(), grad);
    }
    for (name, n) in &numeric {
        let a = &analytic[name];
        let diff = (a - n).mapv(|v| v * v).sum().sqrt();
        let scale = a.mapv(|v| v * v).sum().sqrt().max(n.mapv(|v| v * v).sum().sqrt());
        let rel = if scale < 1e-7 { diff } else { diff / scale };
        if rel > worst.0 {
            worst = (rel, name.clone());
        }
    }
    worst
}

/// Random note features for `n` positions; positions in `rests` use the
/// rest value.
pub fn random_note_features(rng: &mut ChaCha8Rng, cfg: &ModelConfig, n: usize, rests: &[bool]) -> FeatureMatrix {
    let values = Array2::from_shape_fn((n, cfg.vocab_sizes.len()), |(i, j)| {
        if j == 0 && rests[i] {
            muparse::features::REST_VALUE
        } else if j == 0 {
            rng.gen_range(0..128)
        } else {
            rng.gen_range(0..cfg.vocab_sizes[j])
        }
    });
    FeatureMatrix {
        values,
        kind: SequenceKind::Notes,
    }
}
