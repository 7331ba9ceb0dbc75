//! Planar binary trees with edge lengths, and the branching-process simulator.
//!
//! A [`PlanarTree`] is stored as an arena of [`Node`]s. Each node owns the edge
//! that leads *into* it: `length` is the time from its parent's branch point
//! (or from the root at depth 0) to the node's own event. A branch node is a
//! birth: the left child continues the parent, the right child is the new
//! offspring. A leaf is either a death (`Extinct`) or a lineage cut at the
//! observation level (`Extant`).

use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use rand::Rng;

use crate::contour::{self, Conditioning};
use crate::draw;
use crate::{Error, Result, DEPTH_TOL};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeafKind {
    Extinct,
    Extant,
}

/// Leaf state: what happened at the end of the lineage, and whether the
/// individual made it into the historical record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeafTag {
    pub kind: LeafKind,
    pub marked: bool,
}

impl LeafTag {
    pub const EXTINCT: LeafTag = LeafTag {
        kind: LeafKind::Extinct,
        marked: false,
    };
    pub const EXTANT: LeafTag = LeafTag {
        kind: LeafKind::Extant,
        marked: false,
    };
    pub const MARKED: LeafTag = LeafTag {
        kind: LeafKind::Extinct,
        marked: true,
    };

    pub fn is_extant(self) -> bool {
        self.kind == LeafKind::Extant
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Branch { left: NodeId, right: NodeId },
    Leaf(LeafTag),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub length: f64,
    pub kind: NodeKind,
}

/// Rooted planar binary tree with positive edge lengths.
///
/// `horizon` is the observation level `t` the tree was truncated at. Trees
/// without a horizon (subtrees hanging off a genealogy, continuum subtrees)
/// may not contain extant leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarTree {
    nodes: Vec<Node>,
    root: NodeId,
    horizon: Option<f64>,
}

impl PlanarTree {
    /// A single edge ending in a leaf.
    pub fn leaf(length: f64, tag: LeafTag) -> Self {
        PlanarTree {
            nodes: vec![Node {
                length,
                kind: NodeKind::Leaf(tag),
            }],
            root: 0,
            horizon: None,
        }
    }

    /// Root edge of `length` that branches into `left` (continuation) and
    /// `right` (offspring). The horizon of the parts is dropped.
    pub fn join(length: f64, left: PlanarTree, right: PlanarTree) -> Self {
        let mut nodes = Vec::with_capacity(left.nodes.len() + right.nodes.len() + 1);
        let l_root = append(&mut nodes, left);
        let r_root = append(&mut nodes, right);
        nodes.push(Node {
            length,
            kind: NodeKind::Branch {
                left: l_root,
                right: r_root,
            },
        });
        let root = nodes.len() - 1;
        PlanarTree {
            nodes,
            root,
            horizon: None,
        }
    }

    /// Builds a tree from a raw arena and checks every invariant.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId, horizon: Option<f64>) -> Result<Self> {
        let tree = PlanarTree {
            nodes,
            root,
            horizon,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Attaches an observation level and re-validates.
    pub fn with_horizon(mut self, t: f64) -> Result<Self> {
        self.horizon = Some(t);
        self.validate()?;
        Ok(self)
    }

    pub(crate) fn from_parts_unchecked(nodes: Vec<Node>, root: NodeId, horizon: Option<f64>) -> Self {
        PlanarTree {
            nodes,
            root,
            horizon,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks: positive finite lengths, binary shape with every node reached
    /// exactly once, marks only on extinct leaves, extant leaves at the
    /// horizon and extinct leaves strictly below it.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.root >= self.nodes.len() {
            return Err(Error::format("tree has no root"));
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::format(format!("horizon {t} is not a positive number")));
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.root, 0.0f64)];
        let mut visited = 0usize;
        while let Some((id, parent_depth)) = stack.pop() {
            if id >= self.nodes.len() || seen[id] {
                return Err(Error::format("node referenced twice or out of range"));
            }
            seen[id] = true;
            visited += 1;
            let node = &self.nodes[id];
            if !(node.length > 0.0 && node.length.is_finite()) {
                return Err(Error::format(format!("edge length {} is not positive", node.length)));
            }
            let depth = parent_depth + node.length;
            match node.kind {
                NodeKind::Branch { left, right } => {
                    if let Some(t) = self.horizon {
                        if depth >= t - DEPTH_TOL {
                            return Err(Error::format(format!("branch point at depth {depth} not below horizon {t}")));
                        }
                    }
                    stack.push((right, depth));
                    stack.push((left, depth));
                }
                NodeKind::Leaf(tag) => match (tag.kind, self.horizon) {
                    (LeafKind::Extant, None) => {
                        return Err(Error::format("extant leaf in a tree without horizon"));
                    }
                    (LeafKind::Extant, Some(t)) => {
                        if tag.marked {
                            return Err(Error::format("extant leaves cannot carry a mark"));
                        }
                        if crate::math::abs(depth - t) > DEPTH_TOL {
                            return Err(Error::format(format!("extant leaf at depth {depth}, horizon {t}")));
                        }
                    }
                    (LeafKind::Extinct, Some(t)) => {
                        if depth >= t - DEPTH_TOL {
                            return Err(Error::format(format!("extinct leaf at depth {depth} not below horizon {t}")));
                        }
                    }
                    (LeafKind::Extinct, None) => {}
                },
            }
        }
        if visited != self.nodes.len() {
            return Err(Error::format("arena contains unreachable nodes"));
        }
        Ok(())
    }

    /// Node ids in planar depth-first (pre-)order, left before right.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let NodeKind::Branch { left, right } = self.nodes[id].kind {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Depth (distance from the root) of every node's own event, indexed by id.
    pub fn depths(&self) -> Vec<f64> {
        let mut depth = vec![0.0; self.nodes.len()];
        let mut stack = vec![(self.root, 0.0f64)];
        while let Some((id, above)) = stack.pop() {
            let d = above + self.nodes[id].length;
            depth[id] = d;
            if let NodeKind::Branch { left, right } = self.nodes[id].kind {
                stack.push((right, d));
                stack.push((left, d));
            }
        }
        depth
    }

    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parent = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Branch { left, right } = node.kind {
                parent[left] = Some(id);
                parent[right] = Some(id);
            }
        }
        parent
    }

    /// Leaf ids in planar order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| matches!(self.nodes[id].kind, NodeKind::Leaf(_)))
            .collect()
    }

    fn count_leaves(&self, pred: impl Fn(LeafTag) -> bool) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf(tag) if pred(tag)))
            .count()
    }

    /// Number of individuals alive at the horizon.
    pub fn extant_count(&self) -> usize {
        self.count_leaves(LeafTag::is_extant)
    }

    pub fn leaf_count(&self) -> usize {
        self.count_leaves(|_| true)
    }

    pub fn mark_count(&self) -> usize {
        self.count_leaves(|tag| tag.marked)
    }

    /// Largest leaf depth.
    pub fn height(&self) -> f64 {
        self.depths().into_iter().fold(0.0, f64::max)
    }

    /// In-order walk: leaves and branch points interleaved as they are met by
    /// the depth-first contour. Leaves carry their tag; branch points `None`.
    pub fn in_order(&self) -> Vec<(f64, Option<LeafTag>)> {
        enum Visit {
            Enter(NodeId, f64),
            Between(f64),
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![Visit::Enter(self.root, 0.0)];
        while let Some(v) = stack.pop() {
            match v {
                Visit::Between(d) => out.push((d, None)),
                Visit::Enter(id, above) => {
                    let node = &self.nodes[id];
                    let d = above + node.length;
                    match node.kind {
                        NodeKind::Leaf(tag) => out.push((d, Some(tag))),
                        NodeKind::Branch { left, right } => {
                            stack.push(Visit::Enter(right, d));
                            stack.push(Visit::Between(d));
                            stack.push(Visit::Enter(left, d));
                        }
                    }
                }
            }
        }
        out
    }

    /// Structural equality with edge lengths compared up to `tol`.
    pub fn approx_eq(&self, other: &PlanarTree, tol: f64) -> bool {
        match (self.horizon, other.horizon) {
            (None, None) => {}
            (Some(a), Some(b)) if crate::math::abs(a - b) <= tol => {}
            _ => return false,
        }
        let mut stack = vec![(self.root, other.root)];
        while let Some((a, b)) = stack.pop() {
            let (na, nb) = (&self.nodes[a], &other.nodes[b]);
            if crate::math::abs(na.length - nb.length) > tol {
                return false;
            }
            match (na.kind, nb.kind) {
                (NodeKind::Leaf(ta), NodeKind::Leaf(tb)) if ta == tb => {}
                (NodeKind::Branch { left: la, right: ra }, NodeKind::Branch { left: lb, right: rb }) => {
                    stack.push((ra, rb));
                    stack.push((la, lb));
                }
                _ => return false,
            }
        }
        true
    }

    /// Copy in which every extinct leaf is marked independently with
    /// probability `p` (one draw per extinct leaf, in planar order). Extant
    /// leaves are never marked.
    pub fn mark_extinct<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> Result<PlanarTree> {
        check_probability(p)?;
        let mut out = self.clone();
        for id in self.leaves() {
            if let NodeKind::Leaf(tag) = &mut out.nodes[id].kind {
                if tag.kind == LeafKind::Extinct {
                    tag.marked = draw::bernoulli(rng, p);
                }
            }
        }
        Ok(out)
    }

    /// The smallest subtree spanning the root and all marked leaves, with
    /// unary nodes merged away. `None` if nothing is marked.
    pub fn mark_induced(&self) -> Option<PlanarTree> {
        // post-order: result[id] = index of the kept image of `id` in `nodes`
        let mut kept: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut nodes: Vec<Node> = Vec::new();
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            let node = self.nodes[id];
            match node.kind {
                NodeKind::Leaf(tag) => {
                    if tag.marked {
                        nodes.push(node);
                        kept[id] = Some(nodes.len() - 1);
                    }
                }
                NodeKind::Branch { left, right } => {
                    if !expanded {
                        stack.push((id, true));
                        stack.push((right, false));
                        stack.push((left, false));
                        continue;
                    }
                    kept[id] = match (kept[left], kept[right]) {
                        (None, None) => None,
                        (Some(only), None) | (None, Some(only)) => {
                            nodes[only].length += node.length;
                            Some(only)
                        }
                        (Some(l), Some(r)) => {
                            nodes.push(Node {
                                length: node.length,
                                kind: NodeKind::Branch { left: l, right: r },
                            });
                            Some(nodes.len() - 1)
                        }
                    };
                }
            }
        }
        kept[self.root].map(|root| PlanarTree {
            nodes,
            root,
            horizon: None,
        })
    }

    /// Depths below the horizon of the branch points of the genealogy of the
    /// extant leaves, computed on the tree itself: for each pair of
    /// consecutive extant leaves (planar order) the depth of their most
    /// recent common ancestor, reported as `t - depth`.
    pub fn lca_branch_depths(&self) -> Result<Vec<f64>> {
        let t = self
            .horizon
            .ok_or_else(|| Error::domain("tree has no horizon"))?;
        let depth = self.depths();
        let parent = self.parents();
        let extant: Vec<NodeId> = self
            .leaves()
            .into_iter()
            .filter(|&id| matches!(self.nodes[id].kind, NodeKind::Leaf(tag) if tag.is_extant()))
            .collect();
        if extant.is_empty() {
            return Err(Error::domain("tree has no extant leaves"));
        }
        let mut stamp = vec![0usize; self.nodes.len()];
        let mut out = Vec::with_capacity(extant.len() - 1);
        for (k, pair) in extant.windows(2).enumerate() {
            let mark = k + 1;
            let mut a = Some(pair[0]);
            while let Some(id) = a {
                stamp[id] = mark;
                a = parent[id];
            }
            let mut b = pair[1];
            while stamp[b] != mark {
                b = parent[b].expect("root is an ancestor of every leaf");
            }
            out.push(t - depth[b]);
        }
        Ok(out)
    }
}

fn append(nodes: &mut Vec<Node>, tree: PlanarTree) -> NodeId {
    let offset = nodes.len();
    nodes.extend(tree.nodes.into_iter().map(|mut n| {
        if let NodeKind::Branch { left, right } = &mut n.kind {
            *left += offset;
            *right += offset;
        }
        n
    }));
    tree.root + offset
}

pub(crate) fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::param("t", format!("horizon must be positive and finite, got {t}")))
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param("p", format!("must lie in [0, 1], got {p}")))
    }
}

/// Unconditioned family tree truncated at level `t`.
///
/// The contour of the tree is simulated as alternating Exponential(1) rises
/// and falls, rises capped at `t`, and converted to the tree.
pub fn simulate_tree_below<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<PlanarTree> {
    check_horizon(t)?;
    let path = contour::truncated_contour(t, || draw::exp1(rng));
    contour::tree_from_contour(&path, Some(t))
}

/// Conditioned family tree with exactly `n` individuals alive at `t`.
pub fn condition_on_count<R: Rng + ?Sized>(
    t: f64,
    n: usize,
    method: Conditioning,
    rng: &mut R,
) -> Result<PlanarTree> {
    let path = contour::conditioned_contour(t, n, method, contour::DEFAULT_MAX_ATTEMPTS, rng)?;
    contour::tree_from_contour(&path, Some(t))
}

/// Agent-based simulation of the same truncated tree: every individual draws
/// an Exponential(1) lifetime and Exponential(1) gaps between its births.
/// Kept as an independent oracle for [`simulate_tree_below`].
pub fn simulate_tree_agent<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<PlanarTree> {
    check_horizon(t)?;
    Ok(agent_tree_from_draws(t, || draw::exp1(rng)))
}

/// Agent-based construction from a stream of Exponential(1) draws.
///
/// Draw order: an individual's lifetime, then its successive birth gaps. After
/// a birth the continuing parent (left) is expanded before the offspring
/// (right), whose lifetime is drawn when it is expanded.
pub fn agent_tree_from_draws(t: f64, mut draw: impl FnMut() -> f64) -> PlanarTree {
    enum Task {
        // individual segment starting at `start`, dying at `death`; `slot` is
        // where the node id must be written
        Segment { start: f64, death: f64, slot: Slot },
        Newborn { start: f64, slot: Slot },
    }
    #[derive(Clone, Copy)]
    enum Slot {
        Root,
        Left(NodeId),
        Right(NodeId),
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut root = 0;
    let mut stack = vec![Task::Newborn {
        start: 0.0,
        slot: Slot::Root,
    }];
    while let Some(task) = stack.pop() {
        let (start, death, slot) = match task {
            Task::Newborn { start, slot } => (start, start + draw(), slot),
            Task::Segment { start, death, slot } => (start, death, slot),
        };
        let birth = start + draw();
        let end = death.min(t);
        let id = nodes.len();
        if birth < end {
            nodes.push(Node {
                length: birth - start,
                kind: NodeKind::Branch { left: usize::MAX, right: usize::MAX },
            });
            stack.push(Task::Newborn {
                start: birth,
                slot: Slot::Right(id),
            });
            stack.push(Task::Segment {
                start: birth,
                death,
                slot: Slot::Left(id),
            });
        } else {
            let tag = if death < t { LeafTag::EXTINCT } else { LeafTag::EXTANT };
            nodes.push(Node {
                length: end - start,
                kind: NodeKind::Leaf(tag),
            });
        }
        match slot {
            Slot::Root => root = id,
            Slot::Left(p) => {
                if let NodeKind::Branch { left, .. } = &mut nodes[p].kind {
                    *left = id;
                }
            }
            Slot::Right(p) => {
                if let NodeKind::Branch { right, .. } = &mut nodes[p].kind {
                    *right = id;
                }
            }
        }
    }
    PlanarTree {
        nodes,
        root,
        horizon: Some(t),
    }
}
