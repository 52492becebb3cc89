//! Dependency and binary constituent trees over a sequence, plus the exact
//! conversions between the two for projective, single-sided trees.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Head assignment of a single sequence element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Head {
    /// The element is the root of the tree.
    Root,
    /// The element is a rest and not part of the tree.
    None,
    /// 0-based index of the governing element.
    Index(usize),
}

impl Head {
    /// Integer form used in files: `-1` for the root, `None` for rests.
    pub fn to_code(self) -> Option<i64> {
        match self {
            Head::Root => Some(-1),
            Head::None => None,
            Head::Index(i) => Some(i as i64),
        }
    }

    pub fn from_code(code: Option<i64>) -> Option<Head> {
        match code {
            None => Some(Head::None),
            Some(-1) => Some(Head::Root),
            Some(i) if i >= 0 => Some(Head::Index(i as usize)),
            Some(_) => None,
        }
    }

    pub fn index(self) -> Option<usize> {
        match self {
            Head::Index(i) => Some(i),
            _ => None,
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Root => write!(f, "ROOT"),
            Head::None => write!(f, "NONE"),
            Head::Index(i) => write!(f, "{}", i),
        }
    }
}

impl Serialize for Head {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_code().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Head {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = Option::<i64>::deserialize(d)?;
        Head::from_code(code)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid head code {:?}", code)))
    }
}

/// Unvalidated head assignments, e.g. greedy decoder output.
pub type HeadSequence = Vec<Head>;

/// Which child of an internal constituent node is primary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty sequence")]
    Empty,
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("element {0} is its own head")]
    SelfLoop(usize),
    #[error("element {dep} has head {head} outside the sequence")]
    OutOfRange { dep: usize, head: usize },
    #[error("element {dep} points to rest position {head}")]
    HeadIsRest { dep: usize, head: usize },
    #[error("cycle through element {0}")]
    Cycle(usize),
    #[error("tree contains rest positions; strip them before constituent conversion")]
    HasRests,
    #[error("tree has a double-sided dependency at element {0}")]
    DoubleSided(usize),
    #[error("tree is not projective")]
    NonProjective,
    #[error("constituent leaves are not consecutive: expected {expected}, found {found}")]
    LeafOrder { expected: usize, found: usize },
}

/// Head assignments over a sequence forming a single-rooted tree.
///
/// Rest positions carry [`Head::None`] and are excluded from the tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DependencyTree {
    heads: Vec<Head>,
}

impl DependencyTree {
    pub fn new(heads: Vec<Head>) -> Result<Self, TreeError> {
        validate_heads(&heads)?;
        Ok(DependencyTree { heads })
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn into_heads(self) -> Vec<Head> {
        self.heads
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn root(&self) -> usize {
        self.heads
            .iter()
            .position(|h| *h == Head::Root)
            .expect("validated tree has a root")
    }

    pub fn is_rest(&self, i: usize) -> bool {
        self.heads[i] == Head::None
    }

    pub fn has_rests(&self) -> bool {
        self.heads.contains(&Head::None)
    }

    /// Directed arcs `(dep, head)`, root and rests excluded.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.heads
            .iter()
            .enumerate()
            .filter_map(|(dep, h)| h.index().map(|head| (dep, head)))
    }

    /// Dependents of every element, in ascending order.
    pub fn dependents(&self) -> Vec<Vec<usize>> {
        let mut deps = vec![Vec::new(); self.heads.len()];
        for (dep, head) in self.arcs() {
            deps[head].push(dep);
        }
        deps
    }

    /// True iff every element strictly between a dependent and its head
    /// is a descendant of that head. Rests are skipped.
    pub fn is_projective(&self) -> bool {
        for (dep, head) in self.arcs() {
            let (lo, hi) = if dep < head { (dep, head) } else { (head, dep) };
            for k in lo + 1..hi {
                if !self.is_rest(k) && !self.dominates(head, k) {
                    return false;
                }
            }
        }
        true
    }

    /// True iff `ancestor` is reachable by following heads up from `node`.
    pub fn dominates(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = node;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.heads[cur] {
                Head::Index(h) => cur = h,
                _ => return false,
            }
        }
    }

    /// True iff some element has dependents on both sides.
    pub fn has_double_sided(&self) -> bool {
        self.double_sided_element().is_some()
    }

    fn double_sided_element(&self) -> Option<usize> {
        let n = self.heads.len();
        let mut left = vec![false; n];
        let mut right = vec![false; n];
        for (dep, head) in self.arcs() {
            if dep < head {
                left[head] = true;
            } else {
                right[head] = true;
            }
        }
        (0..n).find(|&i| left[i] && right[i])
    }

    /// Remove rest positions, re-indexing the remaining elements.
    ///
    /// Returns the compacted tree and the original position of every kept
    /// element.
    pub fn strip_rests(&self) -> (DependencyTree, Vec<usize>) {
        let kept: Vec<usize> = (0..self.heads.len()).filter(|&i| !self.is_rest(i)).collect();
        let mut new_index = vec![usize::MAX; self.heads.len()];
        for (k, &i) in kept.iter().enumerate() {
            new_index[i] = k;
        }
        let heads = kept
            .iter()
            .map(|&i| match self.heads[i] {
                Head::Index(h) => Head::Index(new_index[h]),
                other => other,
            })
            .collect();
        (DependencyTree { heads }, kept)
    }

    /// Inverse of [`strip_rests`](Self::strip_rests): spread a compact tree
    /// over a sequence of `len` elements with rests at the given positions.
    pub fn with_rests(&self, rests: &[bool]) -> Result<DependencyTree, TreeError> {
        let kept: Vec<usize> = (0..rests.len()).filter(|&i| !rests[i]).collect();
        if kept.len() != self.heads.len() {
            return Err(TreeError::LeafOrder {
                expected: self.heads.len(),
                found: kept.len(),
            });
        }
        let mut heads = vec![Head::None; rests.len()];
        for (k, &i) in kept.iter().enumerate() {
            heads[i] = match self.heads[k] {
                Head::Index(h) => Head::Index(kept[h]),
                other => other,
            };
        }
        DependencyTree::new(heads)
    }
}

/// Check the structural invariants of a head assignment.
pub fn validate_heads(heads: &[Head]) -> Result<(), TreeError> {
    let n = heads.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }
    let roots = heads.iter().filter(|h| **h == Head::Root).count();
    if roots != 1 {
        return Err(TreeError::RootCount(roots));
    }
    for (dep, h) in heads.iter().enumerate() {
        if let Head::Index(head) = *h {
            if head == dep {
                return Err(TreeError::SelfLoop(dep));
            }
            if head >= n {
                return Err(TreeError::OutOfRange { dep, head });
            }
            if heads[head] == Head::None {
                return Err(TreeError::HeadIsRest { dep, head });
            }
        }
    }
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n];
    for start in 0..n {
        if heads[start] == Head::None || state[start] == 2 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if state[cur] == 2 {
                break;
            }
            if state[cur] == 1 {
                return Err(TreeError::Cycle(cur));
            }
            state[cur] = 1;
            path.push(cur);
            match heads[cur] {
                Head::Index(h) => cur = h,
                _ => break,
            }
        }
        for p in path {
            state[p] = 2;
        }
    }
    Ok(())
}

/// A node of a binary constituent tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConstituentNode {
    Leaf(usize),
    Internal {
        left: Box<ConstituentNode>,
        right: Box<ConstituentNode>,
        primary: Side,
    },
}

impl ConstituentNode {
    pub fn internal(left: ConstituentNode, right: ConstituentNode, primary: Side) -> Self {
        ConstituentNode::Internal {
            left: Box::new(left),
            right: Box::new(right),
            primary,
        }
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            ConstituentNode::Leaf(i) => out.push(*i),
            ConstituentNode::Internal { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    fn internal_count(&self) -> usize {
        match self {
            ConstituentNode::Leaf(_) => 0,
            ConstituentNode::Internal { left, right, .. } => {
                1 + left.internal_count() + right.internal_count()
            }
        }
    }

    /// Element propagated to this node through primary children.
    pub fn head_element(&self) -> usize {
        match self {
            ConstituentNode::Leaf(i) => *i,
            ConstituentNode::Internal {
                left,
                right,
                primary,
            } => match primary {
                Side::Left => left.head_element(),
                Side::Right => right.head_element(),
            },
        }
    }

    /// Leftmost and rightmost leaf below this node.
    fn span(&self) -> (usize, usize) {
        match self {
            ConstituentNode::Leaf(i) => (*i, *i),
            ConstituentNode::Internal { left, right, .. } => (left.span().0, right.span().1),
        }
    }
}

/// A binary constituent tree whose in-order leaves are `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstituentTree {
    root: ConstituentNode,
}

impl ConstituentTree {
    pub fn new(root: ConstituentNode) -> Result<Self, TreeError> {
        let mut leaves = Vec::new();
        root.collect_leaves(&mut leaves);
        for (expected, &found) in leaves.iter().enumerate() {
            if expected != found {
                return Err(TreeError::LeafOrder { expected, found });
            }
        }
        Ok(ConstituentTree { root })
    }

    pub fn root(&self) -> &ConstituentNode {
        &self.root
    }

    pub fn leaf_count(&self) -> usize {
        self.root.internal_count() + 1
    }

    pub fn internal_count(&self) -> usize {
        self.root.internal_count()
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// `(leftmost, rightmost)` leaf of every internal node, in pre-order.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        fn walk(node: &ConstituentNode, out: &mut Vec<(usize, usize)>) {
            if let ConstituentNode::Internal { left, right, .. } = node {
                out.push(node.span());
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Same shape with every primary flag inverted.
    pub fn flipped(&self) -> ConstituentTree {
        fn flip(node: &ConstituentNode) -> ConstituentNode {
            match node {
                ConstituentNode::Leaf(i) => ConstituentNode::Leaf(*i),
                ConstituentNode::Internal {
                    left,
                    right,
                    primary,
                } => ConstituentNode::internal(flip(left), flip(right), primary.flip()),
            }
        }
        ConstituentTree {
            root: flip(&self.root),
        }
    }
}

pub fn is_projective(t: &DependencyTree) -> bool {
    t.is_projective()
}

pub fn has_double_sided(t: &DependencyTree) -> bool {
    t.has_double_sided()
}

/// Convert a projective, single-sided, rest-free dependency tree into the
/// unique equivalent binary constituent tree.
///
/// Each internal node splits off the remaining dependent farthest from the
/// head; the head keeps the primary child.
pub fn dep_to_constituent(t: &DependencyTree) -> Result<ConstituentTree, TreeError> {
    if t.has_rests() {
        return Err(TreeError::HasRests);
    }
    if let Some(i) = t.double_sided_element() {
        return Err(TreeError::DoubleSided(i));
    }
    if !t.is_projective() {
        return Err(TreeError::NonProjective);
    }
    let mut deps = t.dependents();
    // farthest dependent last, so it is popped first
    for (head, list) in deps.iter_mut().enumerate() {
        list.sort_by_key(|&d| d.abs_diff(head));
    }
    let root = build_constituent(t.root(), &mut deps);
    ConstituentTree::new(root)
}

fn build_constituent(element: usize, deps: &mut [Vec<usize>]) -> ConstituentNode {
    match deps[element].pop() {
        None => ConstituentNode::Leaf(element),
        Some(far) => {
            let secondary = build_constituent(far, deps);
            let primary = build_constituent(element, deps);
            if far < element {
                ConstituentNode::internal(secondary, primary, Side::Right)
            } else {
                ConstituentNode::internal(primary, secondary, Side::Left)
            }
        }
    }
}

/// Convert a constituent tree into a dependency tree: the head of every
/// secondary child depends on the head of its sibling.
pub fn constituent_to_dep(c: &ConstituentTree) -> DependencyTree {
    fn walk(node: &ConstituentNode, heads: &mut [Head]) -> usize {
        match node {
            ConstituentNode::Leaf(i) => *i,
            ConstituentNode::Internal {
                left,
                right,
                primary,
            } => {
                let l = walk(left, heads);
                let r = walk(right, heads);
                match primary {
                    Side::Left => {
                        heads[r] = Head::Index(l);
                        l
                    }
                    Side::Right => {
                        heads[l] = Head::Index(r);
                        r
                    }
                }
            }
        }
    }
    let mut heads = vec![Head::Root; c.leaf_count()];
    walk(&c.root, &mut heads);
    DependencyTree { heads }
}

pub fn constituent_spans(c: &ConstituentTree) -> Vec<(usize, usize)> {
    c.spans()
}
