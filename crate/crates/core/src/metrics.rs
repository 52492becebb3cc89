//! Tree comparison metrics. Rest positions never count.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{dep_to_constituent, ConstituentTree, DependencyTree, Head, TreeError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("length mismatch: predicted {pred}, gold {gold}")]
    LengthMismatch { pred: usize, gold: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

fn check_len(pred: usize, gold: usize) -> Result<(), MetricError> {
    if pred != gold {
        return Err(MetricError::LengthMismatch { pred, gold });
    }
    Ok(())
}

/// Fraction of non-rest positions (per `gold`) with equal head entries.
pub fn head_accuracy(pred: &[Head], gold: &[Head]) -> Result<f64, MetricError> {
    check_len(pred.len(), gold.len())?;
    let mut total = 0usize;
    let mut correct = 0usize;
    for (p, g) in pred.iter().zip(gold) {
        if *g == Head::None {
            continue;
        }
        total += 1;
        if p == g {
            correct += 1;
        }
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

fn arc_set(heads: &[Head]) -> HashSet<(usize, usize)> {
    heads
        .iter()
        .enumerate()
        .filter_map(|(dep, h)| h.index().map(|head| (dep, head)))
        .collect()
}

/// `|pred arcs ∩ gold arcs| / |gold arcs|` over directed `(dep, head)` arcs.
///
/// Takes raw head sequences so invalid (e.g. cyclic greedy) predictions
/// can be scored too.
pub fn arc_accuracy(pred: &[Head], gold: &[Head]) -> Result<f64, MetricError> {
    check_len(pred.len(), gold.len())?;
    let gold_arcs = arc_set(gold);
    if gold_arcs.is_empty() {
        return Ok(if arc_set(pred).is_empty() { 1.0 } else { 0.0 });
    }
    let hits = arc_set(pred).intersection(&gold_arcs).count();
    Ok(hits as f64 / gold_arcs.len() as f64)
}

/// Shared spans over the number of gold spans; primary flags are ignored.
pub fn span_accuracy(pred: &ConstituentTree, gold: &ConstituentTree) -> Result<f64, MetricError> {
    check_len(pred.leaf_count(), gold.leaf_count())?;
    let gold_spans: HashSet<_> = gold.spans().into_iter().collect();
    if gold_spans.is_empty() {
        return Ok(1.0);
    }
    let pred_spans: HashSet<_> = pred.spans().into_iter().collect();
    Ok(pred_spans.intersection(&gold_spans).count() as f64 / gold_spans.len() as f64)
}

/// `(parent, children)` of an element; `None` stands for the dummy label.
type Signature = (Option<usize>, Option<Vec<usize>>);

fn signatures(heads: &[Head]) -> Vec<Signature> {
    let mut children = vec![Vec::new(); heads.len()];
    for (dep, h) in heads.iter().enumerate() {
        if let Some(head) = h.index() {
            children[head].push(dep);
        }
    }
    heads
        .iter()
        .zip(children)
        .map(|(h, c)| (h.index(), if c.is_empty() { None } else { Some(c) }))
        .collect()
}

/// Fraction of non-rest elements whose parent and children agree.
pub fn node_accuracy(pred: &[Head], gold: &[Head]) -> Result<f64, MetricError> {
    check_len(pred.len(), gold.len())?;
    let ps = signatures(pred);
    let gs = signatures(gold);
    let mut total = 0usize;
    let mut correct = 0usize;
    for i in 0..gold.len() {
        if gold[i] == Head::None {
            continue;
        }
        total += 1;
        if ps[i] == gs[i] {
            correct += 1;
        }
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

/// All four metrics for one piece.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub head_accuracy: f64,
    pub arc_accuracy: f64,
    /// `None` when either tree cannot be converted to a constituent tree.
    pub span_accuracy: Option<f64>,
    pub node_accuracy: f64,
}

impl MetricReport {
    /// Compare a predicted head sequence against a gold tree.
    pub fn compare(pred: &[Head], gold: &DependencyTree) -> Result<Self, MetricError> {
        let span = DependencyTree::new(pred.to_vec())
            .ok()
            .and_then(|p| constituent_of(&p).ok())
            .zip(constituent_of(gold).ok())
            .map(|(p, g)| span_accuracy(&p, &g))
            .transpose()?;
        Ok(MetricReport {
            head_accuracy: head_accuracy(pred, gold.heads())?,
            arc_accuracy: arc_accuracy(pred, gold.heads())?,
            span_accuracy: span,
            node_accuracy: node_accuracy(pred, gold.heads())?,
        })
    }

    /// Unweighted mean over pieces; span accuracy averages the pieces that have one.
    pub fn mean(reports: &[MetricReport]) -> MetricReport {
        let n = reports.len().max(1) as f64;
        let spans: Vec<f64> = reports.iter().filter_map(|r| r.span_accuracy).collect();
        MetricReport {
            head_accuracy: reports.iter().map(|r| r.head_accuracy).sum::<f64>() / n,
            arc_accuracy: reports.iter().map(|r| r.arc_accuracy).sum::<f64>() / n,
            span_accuracy: (!spans.is_empty())
                .then(|| spans.iter().sum::<f64>() / spans.len() as f64),
            node_accuracy: reports.iter().map(|r| r.node_accuracy).sum::<f64>() / n,
        }
    }
}

/// Rest-free constituent tree of a dependency tree.
pub fn constituent_of(t: &DependencyTree) -> Result<ConstituentTree, TreeError> {
    dep_to_constituent(&t.strip_rests().0)
}
