//! Corpus and tree-file JSON.
//!
//! A corpus file is a JSON array of pieces:
//!
//! ```json
//! [{"title": "…", "time_signature": [4, 4],
//!   "chords": [{"symbol": "C6", "duration_measures": [1, 1], "bar_position": [0, 1]}],
//!   "tree": {"label": "C6", "leaf_index": 0, "children": []}}]
//! ```
//!
//! Melody pieces carry `events` with `midi_pitch` (null for rests) instead
//! of `chords`. The tree is a binary constituent tree over the non-rest
//! events; a piece may instead carry a raw `heads` array.

use std::fs;
use std::path::Path;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    format_chord, parse_chord_symbol, ChordEvent, EventSequence, NoteEvent, SequenceKind,
};
use crate::tree::{
    constituent_to_dep, dep_to_constituent, ConstituentNode, ConstituentTree, DependencyTree, Head,
    Side,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("conversion error at {path}: {message}")]
    Conversion { path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> CorpusError {
    CorpusError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn conversion(path: impl Into<String>, message: impl ToString) -> CorpusError {
    CorpusError::Conversion {
        path: path.into(),
        message: message.to_string(),
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CorpusError> {
    fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, CorpusError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| schema(".", e.to_string()))?;
    Ok(value)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("corpus values always serialize");
    text.push('\n');
    text
}

/// A constituent tree node as stored in files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_index: Option<usize>,
    #[serde(default)]
    pub children: Vec<NodeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary: Option<Side>,
}

impl NodeJson {
    /// Build the binary tree, resolving missing primary flags by label:
    /// the child whose label equals the parent's is primary, with the
    /// right child winning ties and being the default.
    ///
    /// `labels` are the labels of the leaves in order and stand in for
    /// leaves without their own label.
    pub fn to_constituent(&self, labels: &[String], path: &str) -> Result<ConstituentTree, CorpusError> {
        let mut next = 0;
        let (root, _) = self.build(labels, path, &mut next)?;
        if next != labels.len() {
            return Err(conversion(
                path,
                format!("tree has {} leaves but the sequence has {} non-rest elements", next, labels.len()),
            ));
        }
        ConstituentTree::new(root).map_err(|e| conversion(path, e))
    }

    fn build(
        &self,
        labels: &[String],
        path: &str,
        next: &mut usize,
    ) -> Result<(ConstituentNode, Option<String>), CorpusError> {
        match self.children.as_slice() {
            [] => {
                let k = *next;
                if let Some(i) = self.leaf_index {
                    if i != k {
                        return Err(conversion(
                            path,
                            format!("leaf_index {} where leaf {} was expected", i, k),
                        ));
                    }
                }
                if self.label.is_none() && self.leaf_index.is_none() {
                    return Err(conversion(path, "leaf has neither label nor leaf_index"));
                }
                if self.primary.is_some() {
                    return Err(conversion(path, "leaf has a primary flag"));
                }
                *next += 1;
                let label = self.label.clone().or_else(|| labels.get(k).cloned());
                Ok((ConstituentNode::Leaf(k), label))
            }
            [l, r] => {
                let (left, left_label) = l.build(labels, &format!("{}.children[0]", path), next)?;
                let (right, right_label) = r.build(labels, &format!("{}.children[1]", path), next)?;
                let primary = match (self.primary, &self.label) {
                    (Some(side), _) => side,
                    (None, Some(label)) if right_label.as_ref() == Some(label) => Side::Right,
                    (None, Some(label)) if left_label.as_ref() == Some(label) => Side::Left,
                    _ => Side::Right,
                };
                let label = self.label.clone().or(match primary {
                    Side::Left => left_label,
                    Side::Right => right_label,
                });
                Ok((ConstituentNode::internal(left, right, primary), label))
            }
            other => Err(conversion(
                path,
                format!("node has {} children; trees must be binary", other.len()),
            )),
        }
    }

    /// File form of `c`. Internal nodes take the label of their head leaf
    /// and always record the primary side.
    pub fn from_constituent(c: &ConstituentTree, labels: Option<&[String]>) -> NodeJson {
        fn walk(node: &ConstituentNode, labels: Option<&[String]>) -> NodeJson {
            let label = labels.map(|l| l[node.head_element()].clone());
            match node {
                ConstituentNode::Leaf(i) => NodeJson {
                    label,
                    leaf_index: Some(*i),
                    children: Vec::new(),
                    primary: None,
                },
                ConstituentNode::Internal {
                    left,
                    right,
                    primary,
                } => NodeJson {
                    label,
                    leaf_index: None,
                    children: vec![walk(left, labels), walk(right, labels)],
                    primary: Some(*primary),
                },
            }
        }
        walk(c.root(), labels)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChordJson {
    symbol: String,
    duration_measures: [i64; 2],
    bar_position: [i64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoteJson {
    midi_pitch: Option<i64>,
    duration_measures: [i64; 2],
    bar_position: [i64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceJson {
    title: String,
    time_signature: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chords: Option<Vec<ChordJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    events: Option<Vec<NoteJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree: Option<NodeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heads: Option<Vec<Head>>,
}

/// One piece of a corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub title: String,
    pub time_signature: (u32, u32),
    pub seq: EventSequence,
    pub tree: Option<DependencyTree>,
}

fn rational(pair: [i64; 2], path: &str) -> Result<Rational64, CorpusError> {
    if pair[1] <= 0 {
        return Err(schema(path, format!("denominator {} is not positive", pair[1])));
    }
    Ok(Rational64::new(pair[0], pair[1]))
}

fn timing(
    duration: [i64; 2],
    position: [i64; 2],
    path: &str,
) -> Result<(Rational64, Rational64), CorpusError> {
    let d = rational(duration, &format!("{}.duration_measures", path))?;
    if d <= Rational64::zero() {
        return Err(schema(format!("{}.duration_measures", path), "duration must be positive"));
    }
    let p = rational(position, &format!("{}.bar_position", path))?;
    if p < Rational64::zero() || p >= Rational64::one() {
        return Err(schema(format!("{}.bar_position", path), "bar position must lie in [0, 1)"));
    }
    Ok((d, p))
}

fn pair(r: Rational64) -> [i64; 2] {
    [*r.numer(), *r.denom()]
}

fn piece_kind(p: &PieceJson, path: &str) -> Result<SequenceKind, CorpusError> {
    match (&p.chords, &p.events) {
        (Some(_), None) => Ok(SequenceKind::Chords),
        (None, Some(_)) => Ok(SequenceKind::Notes),
        (Some(_), Some(_)) => Err(schema(path, "piece has both `chords` and `events`")),
        (None, None) => Err(schema(path, "piece has neither `chords` nor `events`")),
    }
}

fn piece_from_json(p: PieceJson, path: &str) -> Result<Piece, CorpusError> {
    let [num, den] = p.time_signature;
    if num == 0 || den == 0 {
        return Err(schema(format!("{}.time_signature", path), "time signature entries must be positive"));
    }
    let seq = match (p.chords, p.events) {
        (Some(chords), None) => {
            let mut out = Vec::with_capacity(chords.len());
            for (i, c) in chords.into_iter().enumerate() {
                let at = format!("{}.chords[{}]", path, i);
                let chord = parse_chord_symbol(&c.symbol)
                    .map_err(|e| schema(format!("{}.symbol", at), e.to_string()))?;
                let (duration, bar_position) = timing(c.duration_measures, c.bar_position, &at)?;
                out.push(ChordEvent {
                    chord,
                    duration,
                    bar_position,
                    ts_numerator: num,
                });
            }
            EventSequence::Chords(out)
        }
        (None, Some(events)) => {
            let mut out = Vec::with_capacity(events.len());
            for (i, e) in events.into_iter().enumerate() {
                let at = format!("{}.events[{}]", path, i);
                let pitch = match e.midi_pitch {
                    None => None,
                    Some(p) if (0..128).contains(&p) => Some(p as u8),
                    Some(p) => {
                        return Err(schema(format!("{}.midi_pitch", at), format!("pitch {} outside 0..=127", p)))
                    }
                };
                let (duration, bar_position) = timing(e.duration_measures, e.bar_position, &at)?;
                out.push(NoteEvent {
                    pitch,
                    duration,
                    bar_position,
                    ts_numerator: num,
                });
            }
            EventSequence::Notes(out)
        }
        _ => unreachable!("kind checked before conversion"),
    };
    if seq.is_empty() {
        return Err(schema(path, "piece has no events"));
    }
    let rests = seq.rests();
    if rests.iter().all(|&r| r) {
        return Err(schema(path, "piece has only rests"));
    }
    let tree = match (p.tree, p.heads) {
        (Some(_), Some(_)) => return Err(schema(path, "piece has both `tree` and `heads`")),
        (Some(node), None) => {
            let at = format!("{}.tree", path);
            let labels: Vec<String> = seq
                .labels()
                .into_iter()
                .zip(&rests)
                .filter(|(_, &r)| !r)
                .map(|(l, _)| l)
                .collect();
            let c = node.to_constituent(&labels, &at)?;
            let t = constituent_to_dep(&c).with_rests(&rests).map_err(|e| conversion(&at, e))?;
            Some(t)
        }
        (None, Some(heads)) => Some(checked_heads(heads, &rests, &format!("{}.heads", path))?),
        (None, None) => None,
    };
    Ok(Piece {
        title: p.title,
        time_signature: (num, den),
        seq,
        tree,
    })
}

fn checked_heads(heads: Vec<Head>, rests: &[bool], path: &str) -> Result<DependencyTree, CorpusError> {
    if heads.len() != rests.len() {
        return Err(conversion(
            path,
            format!("{} heads for {} events", heads.len(), rests.len()),
        ));
    }
    for (i, (h, &r)) in heads.iter().zip(rests).enumerate() {
        if (*h == Head::None) != r {
            return Err(conversion(
                format!("{}[{}]", path, i),
                "rest positions and null heads must coincide",
            ));
        }
    }
    DependencyTree::new(heads).map_err(|e| conversion(path, e))
}

fn piece_to_json(p: &Piece) -> PieceJson {
    let (chords, events) = match &p.seq {
        EventSequence::Chords(v) => (
            Some(
                v.iter()
                    .map(|c| ChordJson {
                        symbol: format_chord(c.chord),
                        duration_measures: pair(c.duration),
                        bar_position: pair(c.bar_position),
                    })
                    .collect(),
            ),
            None,
        ),
        EventSequence::Notes(v) => (
            None,
            Some(
                v.iter()
                    .map(|e| NoteJson {
                        midi_pitch: e.pitch.map(i64::from),
                        duration_measures: pair(e.duration),
                        bar_position: pair(e.bar_position),
                    })
                    .collect(),
            ),
        ),
    };
    let (tree, heads) = match &p.tree {
        None => (None, None),
        Some(t) => match constituent_form(t, &p.seq.labels()) {
            Some(node) => (Some(node), None),
            None => (None, Some(t.heads().to_vec())),
        },
    };
    PieceJson {
        title: p.title.clone(),
        time_signature: [p.time_signature.0, p.time_signature.1],
        chords,
        events,
        tree,
        heads,
    }
}

/// Constituent file form of a dependency tree, or `None` if it is not
/// convertible. `labels` cover the full sequence, rests included.
fn constituent_form(t: &DependencyTree, labels: &[String]) -> Option<NodeJson> {
    let (stripped, kept) = t.strip_rests();
    let c = dep_to_constituent(&stripped).ok()?;
    let kept_labels: Vec<String> = kept.iter().map(|&i| labels[i].clone()).collect();
    Some(NodeJson::from_constituent(&c, Some(&kept_labels)))
}

/// Parse corpus text. With `kind = None` the kind is taken from the first
/// piece and every other piece must match it.
pub fn parse_corpus(text: &str, kind: Option<SequenceKind>) -> Result<Vec<Piece>, CorpusError> {
    let raw: Vec<PieceJson> = parse_json(text)?;
    let mut expected = kind;
    let mut pieces = Vec::with_capacity(raw.len());
    for (i, p) in raw.into_iter().enumerate() {
        let path = format!("[{}]", i);
        let k = piece_kind(&p, &path)?;
        match expected {
            None => expected = Some(k),
            Some(e) if e != k => {
                let field = match e {
                    SequenceKind::Chords => "chords",
                    SequenceKind::Notes => "events",
                };
                return Err(schema(path, format!("expected `{}` for a {:?} corpus", field, e)));
            }
            Some(_) => {}
        }
        pieces.push(piece_from_json(p, &path)?);
    }
    Ok(pieces)
}

pub fn load_corpus(path: &Path, kind: SequenceKind) -> Result<Vec<Piece>, CorpusError> {
    parse_corpus(&read(path)?, Some(kind))
}

/// Load a corpus of either kind.
pub fn load_corpus_any(path: &Path) -> Result<Vec<Piece>, CorpusError> {
    parse_corpus(&read(path)?, None)
}

pub fn corpus_to_json(pieces: &[Piece]) -> String {
    to_json(&pieces.iter().map(piece_to_json).collect::<Vec<_>>())
}

pub fn save_corpus(path: &Path, pieces: &[Piece]) -> Result<(), CorpusError> {
    write(path, &corpus_to_json(pieces))
}

/// One tree in a tree file, in dependency form (`heads`) or constituent
/// form (`tree` plus the indices of rest positions).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeRecord {
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<Vec<Head>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<NodeJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rests: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Whether `heads` form a valid tree; written for decoder output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
}

impl TreeRecord {
    pub fn from_heads(title: &str, heads: Vec<Head>, labels: Option<Vec<String>>) -> Self {
        TreeRecord {
            title: title.to_string(),
            heads: Some(heads),
            tree: None,
            rests: Vec::new(),
            labels,
            valid: None,
        }
    }

    /// Head sequence of either form. Heads are returned as stored and may
    /// not form a valid tree.
    pub fn head_sequence(&self, path: &str) -> Result<Vec<Head>, CorpusError> {
        match (&self.heads, &self.tree) {
            (Some(h), None) => Ok(h.clone()),
            (None, Some(node)) => Ok(self.tree_from_node(node, path)?.into_heads()),
            (Some(_), Some(_)) => Err(schema(path, "record has both `heads` and `tree`")),
            (None, None) => Err(schema(path, "record has neither `heads` nor `tree`")),
        }
    }

    /// Validated dependency tree of either form.
    pub fn dependency_tree(&self, path: &str) -> Result<DependencyTree, CorpusError> {
        let heads = self.head_sequence(path)?;
        DependencyTree::new(heads).map_err(|e| conversion(format!("{}.heads", path), e))
    }

    fn rest_mask(&self, path: &str) -> Result<Vec<bool>, CorpusError> {
        let leaves = self.tree.as_ref().map(count_leaves).unwrap_or(0);
        let len = leaves + self.rests.len();
        let mut mask = vec![false; len];
        for (k, &r) in self.rests.iter().enumerate() {
            if r >= len {
                return Err(schema(format!("{}.rests[{}]", path, k), "rest index out of range"));
            }
            mask[r] = true;
        }
        Ok(mask)
    }

    fn tree_from_node(&self, node: &NodeJson, path: &str) -> Result<DependencyTree, CorpusError> {
        let rests = self.rest_mask(path)?;
        let labels: Vec<String> = match &self.labels {
            Some(l) if l.len() == rests.len() => l
                .iter()
                .zip(&rests)
                .filter(|(_, &r)| !r)
                .map(|(l, _)| l.clone())
                .collect(),
            Some(l) => {
                return Err(schema(
                    format!("{}.labels", path),
                    format!("{} labels for {} elements", l.len(), rests.len()),
                ))
            }
            None => (0..rests.iter().filter(|&&r| !r).count())
                .map(|i| i.to_string())
                .collect(),
        };
        let at = format!("{}.tree", path);
        let c = node.to_constituent(&labels, &at)?;
        constituent_to_dep(&c).with_rests(&rests).map_err(|e| conversion(at, e))
    }

    /// Rewrite into constituent form.
    pub fn to_constituent_form(&self, path: &str) -> Result<TreeRecord, CorpusError> {
        let t = self.dependency_tree(path)?;
        let (stripped, kept) = t.strip_rests();
        let c = dep_to_constituent(&stripped).map_err(|e| conversion(path, e))?;
        let kept_labels = self
            .labels
            .as_ref()
            .map(|l| kept.iter().map(|&i| l[i].clone()).collect::<Vec<_>>());
        let rests: Vec<usize> = (0..t.len()).filter(|&i| t.is_rest(i)).collect();
        Ok(TreeRecord {
            title: self.title.clone(),
            heads: None,
            tree: Some(NodeJson::from_constituent(&c, kept_labels.as_deref())),
            rests,
            labels: self.labels.clone(),
            valid: self.valid,
        })
    }

    /// Rewrite into dependency form.
    pub fn to_dependency_form(&self, path: &str) -> Result<TreeRecord, CorpusError> {
        let t = self.dependency_tree(path)?;
        Ok(TreeRecord {
            title: self.title.clone(),
            heads: Some(t.into_heads()),
            tree: None,
            rests: Vec::new(),
            labels: self.labels.clone(),
            valid: self.valid,
        })
    }
}

fn count_leaves(n: &NodeJson) -> usize {
    if n.children.is_empty() {
        1
    } else {
        n.children.iter().map(count_leaves).sum()
    }
}

/// Parse a tree file. A corpus file is accepted too; its pieces become
/// dependency-form records labelled with their events.
pub fn parse_tree_records(text: &str) -> Result<Vec<TreeRecord>, CorpusError> {
    let probe: serde_json::Value =
        serde_json::from_str(text).map_err(|e| schema(".", e.to_string()))?;
    let is_corpus = probe
        .as_array()
        .and_then(|a| a.first())
        .and_then(|v| v.as_object())
        .is_some_and(|o| o.contains_key("chords") || o.contains_key("events"));
    if !is_corpus {
        return parse_json(text);
    }
    parse_corpus(text, None)?
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let tree = p
                .tree
                .ok_or_else(|| schema(format!("[{}]", i), "piece has no tree"))?;
            Ok(TreeRecord::from_heads(&p.title, tree.into_heads(), Some(p.seq.labels())))
        })
        .collect()
}

pub fn load_tree_records(path: &Path) -> Result<Vec<TreeRecord>, CorpusError> {
    parse_tree_records(&read(path)?)
}

pub fn tree_records_to_json(records: &[TreeRecord]) -> String {
    to_json(&records)
}

pub fn save_tree_records(path: &Path, records: &[TreeRecord]) -> Result<(), CorpusError> {
    write(path, &tree_records_to_json(records))
}
