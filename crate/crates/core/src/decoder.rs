//! Turning arc scores into heads.
//!
//! All decoders read a `λ × (λ+1)` score matrix whose rows are dependents
//! and whose column 0 is the dummy root; column `j + 1` is element `j`.
//! The objective of the tree decoders is the sum of selected logits, with
//! exactly one element attached to the dummy root.

use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scorer::ArcScores;
use crate::tree::{validate_heads, DependencyTree, Head, HeadSequence};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("row {0} has no finite score")]
    AllMaskedRow(usize),
    #[error("no tree with a finite score exists")]
    Infeasible,
    #[error("score matrix must be λ × (λ+1), got {0} × {1}")]
    Shape(usize, usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMode {
    Greedy,
    #[default]
    Eisner,
    Cle,
}

impl FromStr for DecoderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(DecoderMode::Greedy),
            "eisner" => Ok(DecoderMode::Eisner),
            "cle" => Ok(DecoderMode::Cle),
            other => Err(format!("unknown decoder {:?}", other)),
        }
    }
}

fn check_shape(s: ArrayView2<f64>) -> Result<usize, DecodeError> {
    let (r, c) = s.dim();
    if r == 0 || c != r + 1 {
        return Err(DecodeError::Shape(r, c));
    }
    Ok(r)
}

/// Index of the first maximal finite entry.
fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_finite() && best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Row-wise argmax, without any validity guarantee.
pub fn greedy_heads(s: &ArcScores) -> Result<HeadSequence, DecodeError> {
    check_shape(s.logits.view())?;
    s.logits
        .rows()
        .into_iter()
        .enumerate()
        .map(|(dep, row)| {
            if s.rests[dep] {
                return Ok(Head::None);
            }
            match argmax(row.iter().copied()) {
                None => Err(DecodeError::AllMaskedRow(dep)),
                Some(0) => Ok(Head::Root),
                Some(col) => Ok(Head::Index(col - 1)),
            }
        })
        .collect()
}

/// Sum of the scores of the selected arcs (including the root arc).
pub fn tree_score(s: ArrayView2<f64>, heads: &[Head]) -> f64 {
    heads
        .iter()
        .enumerate()
        .map(|(dep, h)| match h {
            Head::Root => s[[dep, 0]],
            Head::Index(head) => s[[dep, head + 1]],
            Head::None => 0.0,
        })
        .sum()
}

#[derive(Clone, Copy)]
enum Dir {
    Left,
    Right,
}

/// Highest-scoring projective tree with a single root, O(λ³).
pub fn eisner(s: ArrayView2<f64>) -> Result<DependencyTree, DecodeError> {
    let n = check_shape(s)?;
    for dep in 0..n {
        if !s.row(dep).iter().any(|v| v.is_finite()) {
            return Err(DecodeError::AllMaskedRow(dep));
        }
    }
    let arc = |head: usize, dep: usize| s[[dep, head + 1]];
    let neg = f64::NEG_INFINITY;

    // [s][t][dir]: Left = head at t, Right = head at s
    let mut complete = vec![vec![[neg, neg]; n]; n];
    let mut incomplete = vec![vec![[neg, neg]; n]; n];
    let mut complete_split = vec![vec![[0usize; 2]; n]; n];
    let mut incomplete_split = vec![vec![[0usize; 2]; n]; n];
    for i in 0..n {
        complete[i][i] = [0.0, 0.0];
    }

    for width in 1..n {
        for lo in 0..n - width {
            let hi = lo + width;

            let mut best = (neg, lo);
            for r in lo..hi {
                let v = complete[lo][r][1] + complete[r + 1][hi][0];
                if v > best.0 {
                    best = (v, r);
                }
            }
            incomplete[lo][hi][0] = best.0 + arc(hi, lo);
            incomplete[lo][hi][1] = best.0 + arc(lo, hi);
            incomplete_split[lo][hi] = [best.1, best.1];

            let mut best = (neg, lo);
            for r in lo..hi {
                let v = complete[lo][r][0] + incomplete[r][hi][0];
                if v > best.0 {
                    best = (v, r);
                }
            }
            complete[lo][hi][0] = best.0;
            complete_split[lo][hi][0] = best.1;

            let mut best = (neg, lo + 1);
            for r in lo + 1..=hi {
                let v = incomplete[lo][r][1] + complete[r][hi][1];
                if v > best.0 {
                    best = (v, r);
                }
            }
            complete[lo][hi][1] = best.0;
            complete_split[lo][hi][1] = best.1;
        }
    }

    let mut best = (neg, 0);
    for r in 0..n {
        let v = s[[r, 0]] + complete[0][r][0] + complete[r][n - 1][1];
        if v > best.0 {
            best = (v, r);
        }
    }
    if !best.0.is_finite() {
        return Err(DecodeError::Infeasible);
    }

    let mut heads = vec![Head::None; n];
    heads[best.1] = Head::Root;
    let mut stack = vec![(0, best.1, Dir::Left, true), (best.1, n - 1, Dir::Right, true)];
    while let Some((lo, hi, dir, is_complete)) = stack.pop() {
        if lo == hi {
            continue;
        }
        let d = dir as usize;
        if is_complete {
            let r = complete_split[lo][hi][d];
            match dir {
                Dir::Left => {
                    stack.push((lo, r, Dir::Left, true));
                    stack.push((r, hi, Dir::Left, false));
                }
                Dir::Right => {
                    stack.push((lo, r, Dir::Right, false));
                    stack.push((r, hi, Dir::Right, true));
                }
            }
        } else {
            let r = incomplete_split[lo][hi][d];
            match dir {
                Dir::Left => heads[lo] = Head::Index(hi),
                Dir::Right => heads[hi] = Head::Index(lo),
            }
            stack.push((lo, r, Dir::Right, true));
            stack.push((r + 1, hi, Dir::Left, true));
        }
    }
    Ok(DependencyTree::new(heads).expect("eisner builds a valid tree"))
}

/// Maximum spanning arborescence over `w[head][dep]` rooted at node 0.
///
/// Returns `parent[v]` for every node (`parent[0]` is unused).
fn arborescence(w: &Array2<f64>) -> Result<Vec<usize>, DecodeError> {
    let n = w.nrows();
    let mut parent = vec![0usize; n];
    for v in 1..n {
        parent[v] = argmax((0..n).map(|u| if u == v { f64::NEG_INFINITY } else { w[[u, v]] }))
            .ok_or(DecodeError::Infeasible)?;
    }

    let Some(cycle) = find_cycle(&parent) else {
        return Ok(parent);
    };
    let mut in_cycle = vec![false; n];
    for &v in &cycle {
        in_cycle[v] = true;
    }

    // contracted graph: the non-cycle nodes in order, then the cycle node
    let outside: Vec<usize> = (0..n).filter(|&v| !in_cycle[v]).collect();
    let c = outside.len();
    let mut w2 = Array2::from_elem((c + 1, c + 1), f64::NEG_INFINITY);
    let mut enter = vec![usize::MAX; c + 1];
    let mut leave = vec![usize::MAX; c + 1];
    for (a, &u) in outside.iter().enumerate() {
        for (b, &v) in outside.iter().enumerate() {
            if a != b {
                w2[[a, b]] = w[[u, v]];
            }
        }
        // u -> cycle: best entry point, measured against the cycle arc it breaks
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for &v in &cycle {
            let gain = w[[u, v]] - w[[parent[v], v]];
            if gain > best.0 {
                best = (gain, v);
            }
        }
        w2[[a, c]] = best.0;
        enter[a] = best.1;
        // cycle -> u
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for &v in &cycle {
            if w[[v, u]] > best.0 {
                best = (w[[v, u]], v);
            }
        }
        w2[[c, a]] = best.0;
        leave[a] = best.1;
    }

    let contracted = arborescence(&w2)?;
    let mut result = parent.clone();
    for (a, &u) in outside.iter().enumerate() {
        if u == 0 {
            continue;
        }
        let p = contracted[a];
        result[u] = if p == c { leave[a] } else { outside[p] };
    }
    let p = contracted[c];
    let entry = enter[p];
    if entry == usize::MAX {
        return Err(DecodeError::Infeasible);
    }
    result[entry] = outside[p];
    Ok(result)
}

fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let n = parent.len();
    let mut state = vec![0u8; n];
    state[0] = 2;
    for start in 1..n {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = parent[v];
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&x| x == v).unwrap();
            return Some(path[pos..].to_vec());
        }
        for p in path {
            state[p] = 2;
        }
    }
    None
}

/// Non-projective maximum spanning tree with a single root (Chu-Liu/Edmonds).
pub fn chu_liu_edmonds(s: ArrayView2<f64>) -> Result<DependencyTree, DecodeError> {
    let n = check_shape(s)?;
    for dep in 0..n {
        if !s.row(dep).iter().any(|v| v.is_finite()) {
            return Err(DecodeError::AllMaskedRow(dep));
        }
    }
    // w[head][dep] over nodes 0 = root, 1..=n = elements
    let mut w = Array2::from_elem((n + 1, n + 1), f64::NEG_INFINITY);
    for dep in 0..n {
        for col in 0..=n {
            if col != dep + 1 {
                w[[col, dep + 1]] = s[[dep, col]];
            }
        }
    }
    let to_heads = |parent: &[usize]| -> Vec<Head> {
        (1..=n)
            .map(|v| match parent[v] {
                0 => Head::Root,
                p => Head::Index(p - 1),
            })
            .collect()
    };

    if let Ok(parent) = arborescence(&w) {
        let heads = to_heads(&parent);
        if heads.iter().filter(|h| **h == Head::Root).count() == 1 {
            return Ok(DependencyTree::new(heads).expect("arborescence is a tree"));
        }
    }

    // force each candidate in turn to be the only child of the root
    let mut best: Option<(f64, Vec<Head>)> = None;
    for r in 0..n {
        if !s[[r, 0]].is_finite() {
            continue;
        }
        let mut wr = w.clone();
        for v in 1..=n {
            if v != r + 1 {
                wr[[0, v]] = f64::NEG_INFINITY;
            }
        }
        let Ok(parent) = arborescence(&wr) else { continue };
        let heads = to_heads(&parent);
        let score = tree_score(s, &heads);
        if score.is_finite() && best.as_ref().map_or(true, |(b, _)| score > *b) {
            best = Some((score, heads));
        }
    }
    let (_, heads) = best.ok_or(DecodeError::Infeasible)?;
    Ok(DependencyTree::new(heads).expect("arborescence is a tree"))
}

/// Decoder output: greedy heads may not form a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub heads: HeadSequence,
    pub valid: bool,
}

impl Decoded {
    pub fn tree(&self) -> Option<DependencyTree> {
        DependencyTree::new(self.heads.clone()).ok()
    }
}

/// Run `mode` on the rest-free part of `s` and put `NONE` back at rests.
pub fn decode(s: &ArcScores, mode: DecoderMode) -> Result<Decoded, DecodeError> {
    check_shape(s.logits.view())?;
    let kept: Vec<usize> = (0..s.len()).filter(|&i| !s.rests[i]).collect();
    if kept.is_empty() {
        return Err(DecodeError::Infeasible);
    }
    let m = kept.len();
    let sub = Array2::from_shape_fn((m, m + 1), |(r, c)| {
        if c == 0 {
            s.logits[[kept[r], 0]]
        } else {
            s.logits[[kept[r], kept[c - 1] + 1]]
        }
    });
    let compact: Vec<Head> = match mode {
        DecoderMode::Greedy => greedy_heads(&ArcScores::from_logits(sub))
            .map_err(|e| match e {
                DecodeError::AllMaskedRow(r) => DecodeError::AllMaskedRow(kept[r]),
                other => other,
            })?,
        DecoderMode::Eisner => eisner(sub.view())?.into_heads(),
        DecoderMode::Cle => chu_liu_edmonds(sub.view())?.into_heads(),
    };
    let mut heads = vec![Head::None; s.len()];
    for (k, &i) in kept.iter().enumerate() {
        heads[i] = match compact[k] {
            Head::Index(h) => Head::Index(kept[h]),
            other => other,
        };
    }
    let valid = validate_heads(&heads).is_ok();
    Ok(Decoded { heads, valid })
}
