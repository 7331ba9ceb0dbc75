//! Contour paths: the tree/contour bijection, the exponential-step sampler,
//! level crossings and the running-infimum decomposition.
//!
//! A [`ContourPath`] is stored by its turning points: `heights[k]` is the
//! height of the k-th vertex and consecutive vertices alternate between local
//! maxima and minima. Segments are derived on demand.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::draw;
use crate::tree::{self, LeafTag, Node, NodeId, NodeKind, PlanarTree};
use crate::{Error, Result, DEPTH_TOL};

/// Default cap on rejection attempts for conditioned sampling.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub direction: Direction,
    pub length: f64,
}

/// How [`condition_on_count`](crate::tree::condition_on_count) reaches a
/// tree with exactly `n` extant individuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Conditioning {
    /// Resimulate whole trees until the count matches.
    Rejection,
    /// Splice an ascent, `n - 1` below-level excursions and a descent.
    #[default]
    ExcursionConcat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Forward,
    Reversed,
}

/// Piecewise-linear path with slopes ±1, stored by its turning points.
///
/// Vertex tags label local maxima that stand for leaves (extinct, extant,
/// marked). A path is complete when it returns to its start height and stays
/// strictly above it in between; other paths are fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath {
    heights: Vec<f64>,
    tags: Vec<Option<LeafTag>>,
}

impl ContourPath {
    /// Path through the given turning points. Consecutive vertices must
    /// strictly alternate between rising and falling.
    pub fn from_heights(heights: Vec<f64>) -> Result<Self> {
        let tags = vec![None; heights.len()];
        Self::from_tagged(heights, tags)
    }

    pub fn from_tagged(heights: Vec<f64>, tags: Vec<Option<LeafTag>>) -> Result<Self> {
        if heights.is_empty() {
            return Err(Error::format("contour path has no vertices"));
        }
        if tags.len() != heights.len() {
            return Err(Error::format("one tag per vertex required"));
        }
        if let Some(h) = heights.iter().find(|h| !h.is_finite()) {
            return Err(Error::format(format!("non-finite height {h}")));
        }
        for w in heights.windows(3) {
            if (w[1] - w[0]) * (w[2] - w[1]) >= 0.0 {
                return Err(Error::format("segment directions must strictly alternate"));
            }
        }
        if heights.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::format("zero-length segment"));
        }
        Ok(ContourPath { heights, tags })
    }

    /// Path from a start height and a segment list.
    pub fn from_segments(start: f64, segments: &[Segment]) -> Result<Self> {
        let mut heights = Vec::with_capacity(segments.len() + 1);
        heights.push(start);
        let mut h = start;
        for s in segments {
            if !(s.length > 0.0 && s.length.is_finite()) {
                return Err(Error::format(format!("segment length {} is not positive", s.length)));
            }
            h = match s.direction {
                Direction::Up => h + s.length,
                Direction::Down => h - s.length,
            };
            heights.push(h);
        }
        Self::from_heights(heights)
    }

    pub(crate) fn from_parts_unchecked(heights: Vec<f64>, tags: Vec<Option<LeafTag>>) -> Self {
        debug_assert_eq!(heights.len(), tags.len());
        ContourPath { heights, tags }
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn tags(&self) -> &[Option<LeafTag>] {
        &self.tags
    }

    pub fn start(&self) -> f64 {
        self.heights[0]
    }

    pub fn end(&self) -> f64 {
        self.heights[self.heights.len() - 1]
    }

    pub fn sup(&self) -> f64 {
        self.heights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.heights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total horizontal extent (sum of segment lengths).
    pub fn duration(&self) -> f64 {
        self.heights.windows(2).map(|w| crate::math::abs(w[1] - w[0])).sum()
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.heights
            .windows(2)
            .map(|w| Segment {
                direction: if w[1] > w[0] { Direction::Up } else { Direction::Down },
                length: crate::math::abs(w[1] - w[0]),
            })
            .collect()
    }

    pub fn segment_count(&self) -> usize {
        self.heights.len() - 1
    }

    /// Returns to the start height, strictly above it in between, and
    /// begins with a rise.
    pub fn is_complete(&self) -> bool {
        let n = self.heights.len();
        n >= 3
            && self.heights[0] == self.heights[n - 1]
            && self.heights[1..n - 1].iter().all(|&h| h > self.heights[0])
    }

    /// Number of local maxima at level `t` or above (touches of the level by
    /// a truncated tree are counted once each).
    pub fn peaks_at_or_above(&self, t: f64) -> usize {
        self.peaks().filter(|&k| self.heights[k] >= t - DEPTH_TOL).count()
    }

    /// Vertex indices of interior local maxima.
    pub fn peaks(&self) -> impl Iterator<Item = usize> + '_ {
        let h = &self.heights;
        (1..h.len().saturating_sub(1)).filter(move |&k| h[k] > h[k - 1])
    }

    /// Path traversed backwards.
    pub fn reversed(&self) -> ContourPath {
        let mut heights = self.heights.clone();
        let mut tags = self.tags.clone();
        heights.reverse();
        tags.reverse();
        ContourPath { heights, tags }
    }

    /// Path with every vertex replaced by `level - height`.
    pub fn reflected(&self, level: f64) -> ContourPath {
        ContourPath {
            heights: self.heights.iter().map(|h| level - h).collect(),
            tags: vec![None; self.heights.len()],
        }
    }

    /// Vertex-wise comparison within `tol`; tags must match exactly.
    pub fn approx_eq(&self, other: &ContourPath, tol: f64) -> bool {
        self.heights.len() == other.heights.len()
            && self
                .heights
                .iter()
                .zip(&other.heights)
                .all(|(a, b)| crate::math::abs(a - b) <= tol)
            && self.tags == other.tags
    }
}

/// Joins fragments end to start, dropping vertices that are no longer turning
/// points. Consecutive fragments must meet at the same height.
pub fn concat(pieces: &[&ContourPath]) -> Result<ContourPath> {
    let mut heights: Vec<f64> = Vec::new();
    let mut tags: Vec<Option<LeafTag>> = Vec::new();
    for piece in pieces {
        let skip = match heights.last() {
            None => 0,
            Some(&last) if last == piece.start() => 1,
            Some(&last) => {
                return Err(Error::format(format!(
                    "fragments do not meet: {last} then {}",
                    piece.start()
                )))
            }
        };
        for k in skip..piece.heights.len() {
            push_turning(&mut heights, &mut tags, piece.heights[k], piece.tags[k]);
        }
    }
    ContourPath::from_tagged(heights, tags)
}

fn push_turning(heights: &mut Vec<f64>, tags: &mut Vec<Option<LeafTag>>, h: f64, tag: Option<LeafTag>) {
    let n = heights.len();
    if n >= 2 && (heights[n - 1] - heights[n - 2]) * (h - heights[n - 1]) > 0.0 {
        heights[n - 1] = h;
        tags[n - 1] = tag;
    } else {
        heights.push(h);
        tags.push(tag);
    }
}

/// Depth-first contour of a tree. Extant leaves are placed exactly at the
/// horizon; leaf tags are carried on the corresponding peaks.
pub fn contour_from_tree(tree: &PlanarTree) -> ContourPath {
    let events = tree.in_order();
    let mut heights = Vec::with_capacity(events.len() + 2);
    let mut tags = Vec::with_capacity(events.len() + 2);
    heights.push(0.0);
    tags.push(None);
    for (depth, tag) in events {
        let h = match (tag, tree.horizon()) {
            (Some(tag), Some(t)) if tag.is_extant() => t,
            _ => depth,
        };
        heights.push(h);
        tags.push(tag);
    }
    heights.push(0.0);
    tags.push(None);
    ContourPath { heights, tags }
}

/// Inverse of [`contour_from_tree`]. Local maxima become leaves, interior
/// local minima become branch points. With a horizon, maxima within
/// tolerance of it become extant leaves; other maxima keep their tag
/// (extinct when untagged). Depths are measured from the start height.
pub fn tree_from_contour(path: &ContourPath, t: Option<f64>) -> Result<PlanarTree> {
    if !path.is_complete() {
        return Err(Error::format("contour path is not a complete excursion"));
    }
    let base = path.start();
    let h = &path.heights;
    let leaves = h.len() / 2;
    // ids 0..leaves are leaves (vertex 2k+1), then branch points (vertex 2k)
    let mut nodes: Vec<Node> = Vec::with_capacity(h.len() - 2);
    let mut depth: Vec<f64> = Vec::with_capacity(h.len() - 2);
    for k in 0..leaves {
        let d = h[2 * k + 1] - base;
        let tag = match (t, path.tags[2 * k + 1]) {
            (Some(t), _) if crate::math::abs(h[2 * k + 1] - t) <= DEPTH_TOL => LeafTag::EXTANT,
            (_, Some(tag)) if !tag.is_extant() => tag,
            _ => LeafTag::EXTINCT,
        };
        nodes.push(Node {
            length: 0.0,
            kind: NodeKind::Leaf(tag),
        });
        depth.push(d);
    }
    let mut left: Vec<Option<NodeId>> = vec![None; leaves - 1];
    let mut right: Vec<Option<NodeId>> = vec![None; leaves - 1];
    let mut stack: Vec<usize> = Vec::new();
    let min_depth = |j: usize| h[2 * j + 2] - base;
    for j in 0..leaves - 1 {
        let d = min_depth(j);
        let mut last = None;
        while let Some(&top) = stack.last() {
            let top_d = min_depth(top);
            if top_d == d {
                return Err(Error::format(format!("tied branch points at depth {d}")));
            }
            if top_d > d {
                last = stack.pop();
            } else {
                break;
            }
        }
        left[j] = last.map(|m| leaves + m);
        if let Some(&top) = stack.last() {
            right[top] = Some(leaves + j);
        }
        stack.push(j);
    }
    for j in 0..leaves - 1 {
        let l = left[j].unwrap_or(j);
        let r = right[j].unwrap_or(j + 1);
        nodes.push(Node {
            length: 0.0,
            kind: NodeKind::Branch { left: l, right: r },
        });
        depth.push(min_depth(j));
    }
    let root = match stack.first() {
        Some(&j) => leaves + j,
        None => 0,
    };
    let mut parent_depth = vec![0.0; nodes.len()];
    for id in leaves..nodes.len() {
        if let NodeKind::Branch { left, right } = nodes[id].kind {
            parent_depth[left] = depth[id];
            parent_depth[right] = depth[id];
        }
    }
    for id in 0..nodes.len() {
        nodes[id].length = depth[id] - parent_depth[id];
    }
    if let Some(t) = t {
        tree::check_horizon(t)?;
    }
    let tree = PlanarTree::from_parts_unchecked(nodes, root, t);
    tree.validate()?;
    Ok(tree)
}

/// How a step-by-step contour walk ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WalkEnd {
    /// Returned to the start height.
    Returned,
    /// Reached the abort level; the last vertex sits exactly on it.
    Aborted,
    /// Hit the step limit before returning.
    StepLimit,
    /// The visitor asked to stop.
    Stopped,
}

/// Bounds for [`walk`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WalkLimits {
    /// Rises are capped here and the walk carries on downward.
    pub ceiling: Option<f64>,
    /// The walk stops as soon as it reaches this level.
    pub abort_at: Option<f64>,
    /// Maximum number of rise/fall pairs.
    pub max_steps: Option<u64>,
}

/// Walks a contour from height 0 using alternating rises and falls taken
/// from `draw` (one draw per rise, one per fall candidate). A fall that would
/// go below 0 is shortened to end at 0. `visit` receives each new vertex
/// height and whether it is a peak, and returns `false` to stop the walk.
pub fn walk(limits: WalkLimits, mut draw: impl FnMut() -> f64, mut visit: impl FnMut(f64, bool) -> bool) -> WalkEnd {
    let mut h = 0.0f64;
    let mut steps = 0u64;
    loop {
        if limits.max_steps.is_some_and(|m| steps >= m) {
            return WalkEnd::StepLimit;
        }
        steps += 1;
        let mut peak = h + draw();
        if let Some(a) = limits.abort_at {
            if peak >= a {
                visit(a, true);
                return WalkEnd::Aborted;
            }
        }
        if let Some(c) = limits.ceiling {
            peak = peak.min(c);
        }
        if !visit(peak, true) {
            return WalkEnd::Stopped;
        }
        let low = peak - draw();
        if low <= 0.0 {
            visit(0.0, false);
            return WalkEnd::Returned;
        }
        h = low;
        if !visit(h, false) {
            return WalkEnd::Stopped;
        }
    }
}

fn collect_walk(limits: WalkLimits, draw: impl FnMut() -> f64) -> (Vec<f64>, WalkEnd) {
    let mut heights = vec![0.0];
    let end = walk(limits, draw, |h, _| {
        heights.push(h);
        true
    });
    (heights, end)
}

/// Contour built from a stream of Exponential(1) draws: alternating rises
/// and falls, the last fall shortened to bring the path back to 0.
pub fn contour_from_draws(draw: impl FnMut() -> f64) -> ContourPath {
    let (heights, _) = collect_walk(WalkLimits::default(), draw);
    let tags = vec![None; heights.len()];
    ContourPath { heights, tags }
}

/// Contour of an unconditioned family tree.
pub fn sample_contour<R: Rng + ?Sized>(rng: &mut R) -> ContourPath {
    contour_from_draws(|| draw::exp1(rng))
}

/// Contour of the family tree truncated at level `t`: rises are capped at
/// `t`, where the vertex is tagged as an extant leaf.
pub fn truncated_contour(t: f64, draw: impl FnMut() -> f64) -> ContourPath {
    let limits = WalkLimits {
        ceiling: Some(t),
        ..WalkLimits::default()
    };
    let (heights, _) = collect_walk(limits, draw);
    let tags = heights
        .iter()
        .map(|&h| (h == t).then_some(LeafTag::EXTANT))
        .collect();
    ContourPath { heights, tags }
}

/// Copy in which every peak that is not an extant leaf is marked
/// independently with probability `p`, one draw per such peak in order.
/// Matches [`PlanarTree::mark_extinct`] on the corresponding tree.
pub fn mark_peaks<R: Rng + ?Sized>(path: &ContourPath, p: f64, rng: &mut R) -> Result<ContourPath> {
    tree::check_probability(p)?;
    let mut out = path.clone();
    for k in path.peaks() {
        let extant = path.tags[k].is_some_and(LeafTag::is_extant);
        if !extant {
            out.tags[k] = Some(LeafTag {
                kind: crate::tree::LeafKind::Extinct,
                marked: draw::bernoulli(rng, p),
            });
        }
    }
    Ok(out)
}

/// Whether an unconditioned family tree, with each leaf marked
/// independently with probability `p`, carries at least one mark. The
/// contour is walked lazily and abandoned at the first mark.
pub fn sample_has_mark<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<bool> {
    tree::check_probability(p)?;
    let mut marked = false;
    let rng = core::cell::RefCell::new(rng);
    walk(
        WalkLimits::default(),
        || draw::exp1(&mut **rng.borrow_mut()),
        |_, peak| {
            if peak && draw::bernoulli(&mut **rng.borrow_mut(), p) {
                marked = true;
            }
            !marked
        },
    );
    Ok(marked)
}

/// Unconditioned contour rejected until its supremum is below `t`.
pub fn sample_excursion_below<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<ContourPath> {
    sample_excursion_below_capped(t, DEFAULT_MAX_ATTEMPTS, rng)
}

pub fn sample_excursion_below_capped<R: Rng + ?Sized>(t: f64, max_attempts: u64, rng: &mut R) -> Result<ContourPath> {
    tree::check_horizon(t)?;
    let limits = WalkLimits {
        abort_at: Some(t),
        ..WalkLimits::default()
    };
    for _ in 0..max_attempts {
        let (heights, end) = collect_walk(limits, || draw::exp1(rng));
        if end == WalkEnd::Returned {
            let tags = vec![None; heights.len()];
            return Ok(ContourPath { heights, tags });
        }
    }
    Err(Error::Resource {
        what: "below-level excursion",
        attempts: max_attempts,
    })
}

/// Start of an unconditioned contour up to its first hit of level `t`,
/// rejected until that hit happens. Ends exactly at `t`.
pub fn sample_ascent<R: Rng + ?Sized>(t: f64, max_attempts: u64, rng: &mut R) -> Result<ContourPath> {
    tree::check_horizon(t)?;
    let limits = WalkLimits {
        abort_at: Some(t),
        ..WalkLimits::default()
    };
    for _ in 0..max_attempts {
        let (heights, end) = collect_walk(limits, || draw::exp1(rng));
        if end == WalkEnd::Aborted {
            let tags = vec![None; heights.len()];
            return Ok(ContourPath { heights, tags });
        }
    }
    Err(Error::Resource {
        what: "ascent to level",
        attempts: max_attempts,
    })
}

/// Contour of a family tree conditioned to have exactly `n` individuals at
/// level `t`.
pub fn conditioned_contour<R: Rng + ?Sized>(
    t: f64,
    n: usize,
    method: Conditioning,
    max_attempts: u64,
    rng: &mut R,
) -> Result<ContourPath> {
    tree::check_horizon(t)?;
    if n == 0 {
        return Err(Error::param("n", "extant count must be at least 1"));
    }
    match method {
        Conditioning::Rejection => {
            for _ in 0..max_attempts {
                let path = truncated_contour(t, || draw::exp1(rng));
                if path.tags.iter().filter(|g| g.is_some()).count() == n {
                    return Ok(path);
                }
            }
            Err(Error::Resource {
                what: "conditioned tree by rejection",
                attempts: max_attempts,
            })
        }
        Conditioning::ExcursionConcat => {
            let ascent = sample_ascent(t, max_attempts, rng)?;
            let mut heights = ascent.heights;
            let mut tags = vec![None; heights.len()];
            *tags.last_mut().expect("ascent is nonempty") = Some(LeafTag::EXTANT);
            for _ in 1..n {
                let exc = sample_excursion_below_capped(t, max_attempts, rng)?;
                for &h in &exc.heights[1..] {
                    heights.push(t - h);
                    tags.push(None);
                }
                *tags.last_mut().expect("excursion is nonempty") = Some(LeafTag::EXTANT);
            }
            let descent = sample_ascent(t, max_attempts, rng)?;
            for &h in descent.heights.iter().rev().skip(1) {
                heights.push(h);
                tags.push(None);
            }
            Ok(ContourPath { heights, tags })
        }
    }
}

/// Horizontal positions where the path crosses level `t` upward (`up`) and
/// downward (`down`). A peak exactly at `t` counts as an up-crossing and a
/// down-crossing at the same position.
pub fn crossings(path: &ContourPath, t: f64) -> (Vec<f64>, Vec<f64>) {
    let lo = t - DEPTH_TOL;
    let mut up = Vec::new();
    let mut down = Vec::new();
    let mut u = 0.0;
    for w in path.heights.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = crate::math::abs(b - a);
        if b > a && a < lo && b >= lo {
            up.push(u + (t - a).min(len));
        } else if b < a && a >= lo && b < lo {
            down.push(u + (a - t).max(0.0));
        }
        u += len;
    }
    (up, down)
}

/// Pieces of a path cut at its crossings of a level.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionDecomposition {
    pub level: f64,
    /// From the start to the first up-crossing; ends at the level.
    pub ascent: ContourPath,
    /// Between each up-crossing and the following down-crossing. A single
    /// vertex for a touch.
    pub above: Vec<ContourPath>,
    /// Between consecutive down- and up-crossings; start and end at the level.
    pub excursions: Vec<ContourPath>,
    /// From the last down-crossing to the end.
    pub descent: ContourPath,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl ExcursionDecomposition {
    /// Concatenates the pieces back into the original path.
    pub fn reassemble(&self) -> Result<ContourPath> {
        let mut pieces: Vec<&ContourPath> = vec![&self.ascent];
        for (k, above) in self.above.iter().enumerate() {
            pieces.push(above);
            if let Some(exc) = self.excursions.get(k) {
                pieces.push(exc);
            }
        }
        pieces.push(&self.descent);
        concat(&pieces)
    }
}

/// Cuts `path` at its crossings of level `t`. `None` when the path stays
/// below the level.
pub fn decompose(path: &ContourPath, t: f64) -> Option<ExcursionDecomposition> {
    let lo = t - DEPTH_TOL;
    let (up, down) = crossings(path, t);
    if up.is_empty() {
        return None;
    }
    let mut pieces: Vec<ContourPath> = Vec::with_capacity(2 * up.len() + 1);
    let mut heights = vec![path.heights[0]];
    let mut tags = vec![path.tags[0]];
    let cut = |heights: &mut Vec<f64>, tags: &mut Vec<Option<LeafTag>>, pieces: &mut Vec<ContourPath>| {
        pieces.push(ContourPath {
            heights: core::mem::take(heights),
            tags: core::mem::take(tags),
        });
    };
    for k in 1..path.heights.len() {
        let (a, b) = (path.heights[k - 1], path.heights[k]);
        let crossing_up = b > a && a < lo && b >= lo;
        let crossing_down = b < a && a >= lo && b < lo;
        if crossing_down && a <= t {
            // crossing sits on the vertex the piece already ends with
            cut(&mut heights, &mut tags, &mut pieces);
            heights.push(a);
            tags.push(path.tags[k - 1]);
        } else if crossing_up || crossing_down {
            if crossing_up && b <= t {
                heights.push(b);
                tags.push(path.tags[k]);
                cut(&mut heights, &mut tags, &mut pieces);
                heights.push(b);
                tags.push(path.tags[k]);
                continue;
            }
            heights.push(t);
            tags.push(None);
            cut(&mut heights, &mut tags, &mut pieces);
            heights.push(t);
            tags.push(None);
        }
        heights.push(b);
        tags.push(path.tags[k]);
    }
    cut(&mut heights, &mut tags, &mut pieces);
    let mut it = pieces.into_iter();
    let ascent = it.next().expect("at least one crossing");
    let mut above = Vec::with_capacity(up.len());
    let mut excursions = Vec::with_capacity(up.len().saturating_sub(1));
    let rest: Vec<ContourPath> = it.collect();
    let descent_index = rest.len() - 1;
    let mut rest = rest.into_iter().enumerate();
    let mut descent = None;
    for (k, piece) in rest.by_ref() {
        if k == descent_index {
            descent = Some(piece);
        } else if k % 2 == 0 {
            above.push(piece);
        } else {
            excursions.push(piece);
        }
    }
    Some(ExcursionDecomposition {
        level: t,
        ascent,
        above,
        excursions,
        descent: descent.expect("descent piece"),
        up,
        down,
    })
}

/// Splits a fragment that starts at its maximum and ends at its minimum into
/// the successive levels of its running infimum and the excursions of the
/// fragment above each level. Sub-excursions keep absolute heights and start
/// and end at their level. `Reversed` reads the fragment backwards first.
pub fn infimum_decomposition(fragment: &ContourPath, orientation: Orientation) -> Result<Vec<(f64, ContourPath)>> {
    let owned;
    let path = match orientation {
        Orientation::Forward => fragment,
        Orientation::Reversed => {
            owned = fragment.reversed();
            &owned
        }
    };
    let h = &path.heights;
    let first = h[0];
    if h.iter().any(|&x| x > first) {
        return Err(Error::format("fragment does not start at its maximum"));
    }
    let last = h[h.len() - 1];
    if h.iter().any(|&x| x < last) {
        return Err(Error::format("fragment does not end at its minimum"));
    }
    let mut out = Vec::new();
    let mut level = first;
    // vertices of the sub-excursion in progress, if any
    let mut current: Option<(Vec<f64>, Vec<Option<LeafTag>>)> = None;
    for k in 1..h.len() {
        let (a, b) = (h[k - 1], h[k]);
        match current.as_mut() {
            None => {
                if b > a {
                    current = Some((vec![level, b], vec![None, path.tags[k]]));
                } else {
                    level = b;
                }
            }
            Some((hs, gs)) => {
                if b > level {
                    hs.push(b);
                    gs.push(path.tags[k]);
                    continue;
                }
                hs.push(level);
                gs.push(None);
                let (hs, gs) = current.take().expect("in progress");
                out.push((level, ContourPath { heights: hs, tags: gs }));
                if b < level {
                    level = b;
                }
            }
        }
    }
    if current.is_some() {
        return Err(Error::format("fragment ends inside an excursion above its infimum"));
    }
    Ok(out)
}

/// Inverse of [`infimum_decomposition`] (forward orientation): descends from
/// `start` through each level, inserting its sub-excursion, and ends at `end`.
pub fn infimum_recompose(start: f64, end: f64, parts: &[(f64, ContourPath)]) -> Result<ContourPath> {
    let mut heights = vec![start];
    let mut tags = vec![None];
    for (level, sub) in parts {
        if sub.start() != *level || sub.end() != *level {
            return Err(Error::format("sub-excursion does not sit on its level"));
        }
        if *heights.last().expect("nonempty") != *level {
            push_turning(&mut heights, &mut tags, *level, None);
        }
        for k in 1..sub.heights.len() {
            push_turning(&mut heights, &mut tags, sub.heights[k], sub.tags[k]);
        }
    }
    if *heights.last().expect("nonempty") != end {
        push_turning(&mut heights, &mut tags, end, None);
    }
    ContourPath::from_tagged(heights, tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn worked_tree() -> PlanarTree {
        PlanarTree::join(
            0.5,
            PlanarTree::leaf(0.5, LeafTag::EXTANT),
            PlanarTree::join(
                0.3,
                PlanarTree::leaf(0.2, LeafTag::EXTANT),
                PlanarTree::leaf(0.1, LeafTag::MARKED),
            ),
        )
        .with_horizon(1.0)
        .unwrap()
    }

    fn scripted(values: &[f64]) -> impl FnMut() -> f64 + '_ {
        let mut it = values.iter().copied();
        move || it.next().expect("script exhausted")
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn single_leaf_contour() {
        let c = contour_from_tree(&PlanarTree::leaf(0.4, LeafTag::EXTINCT));
        assert_eq!(c.heights(), &[0.0, 0.4, 0.0]);
        let segs = c.segments();
        assert_eq!(segs[0], Segment { direction: Direction::Up, length: 0.4 });
        assert_eq!(segs[1], Segment { direction: Direction::Down, length: 0.4 });
    }

    #[test]
    fn worked_tree_contour() {
        let c = contour_from_tree(&worked_tree());
        assert!(close(c.heights(), &[0.0, 1.0, 0.5, 1.0, 0.8, 0.9, 0.0]));
        let lengths: Vec<f64> = c.segments().iter().map(|s| s.length).collect();
        assert!(close(&lengths, &[1.0, 0.5, 0.5, 0.2, 0.1, 0.9]));
        let back = tree_from_contour(&c, Some(1.0)).unwrap();
        assert!(back.approx_eq(&worked_tree(), 1e-12));
    }

    #[test]
    fn tree_from_untagged_profile() {
        let c = ContourPath::from_heights(vec![0.0, 1.0, 0.5, 1.0, 0.8, 0.9, 0.0]).unwrap();
        let tree = tree_from_contour(&c, Some(1.0)).unwrap();
        assert_eq!(tree.extant_count(), 2);
        assert_eq!(tree.mark_count(), 0);
        let leaf = tree_from_contour(&ContourPath::from_heights(vec![0.0, 0.3, 0.0]).unwrap(), None).unwrap();
        assert_eq!(leaf.len(), 1);
        assert_eq!(leaf.node(0).length, 0.3);
    }

    #[test]
    fn malformed_contours() {
        assert!(ContourPath::from_heights(vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(ContourPath::from_heights(vec![]).is_err());
        let neg = ContourPath::from_heights(vec![0.0, 1.0, -0.5, 1.0, 0.0]).unwrap();
        assert!(tree_from_contour(&neg, None).is_err());
        let tied = ContourPath::from_heights(vec![0.0, 1.0, 0.5, 1.0, 0.5, 1.0, 0.0]).unwrap();
        assert!(tree_from_contour(&tied, None).is_err());
        let open = ContourPath::from_heights(vec![0.0, 1.0, 0.5]).unwrap();
        assert!(tree_from_contour(&open, None).is_err());
    }

    #[test]
    fn sampler_stopping_rule() {
        let c = contour_from_draws(scripted(&[2.0, 1.0, 0.5, 2.5]));
        assert!(close(c.heights(), &[0.0, 2.0, 1.0, 1.5, 0.0]));
        let lengths: Vec<f64> = c.segments().iter().map(|s| s.length).collect();
        assert!(close(&lengths, &[2.0, 1.0, 0.5, 1.5]));
        let c = contour_from_draws(scripted(&[0.7, 3.0]));
        assert!(close(c.heights(), &[0.0, 0.7, 0.0]));
    }

    #[test]
    fn crossings_examples() {
        let c = ContourPath::from_heights(vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(crossings(&c, 1.0), (vec![1.0], vec![3.0]));
        let c = contour_from_tree(&worked_tree());
        let (u, d) = crossings(&c, 1.0);
        assert!(close(&u, &[1.0, 2.0]));
        assert!(close(&d, &[1.0, 2.0]));
    }

    #[test]
    fn decomposition_of_worked_contour() {
        let c = contour_from_tree(&worked_tree());
        let dec = decompose(&c, 1.0).unwrap();
        assert_eq!(dec.ascent.heights(), &[0.0, 1.0]);
        assert_eq!(dec.above.len(), 2);
        assert_eq!(dec.above[0].heights(), &[1.0]);
        assert_eq!(dec.excursions.len(), 1);
        assert!(close(dec.excursions[0].heights(), &[1.0, 0.5, 1.0]));
        assert!(close(dec.descent.heights(), &[1.0, 0.8, 0.9, 0.0]));
        assert_eq!(dec.reassemble().unwrap(), c);
        let low = ContourPath::from_heights(vec![0.0, 0.5, 0.0]).unwrap();
        assert!(decompose(&low, 1.0).is_none());
    }

    #[test]
    fn decomposition_with_strict_crossings() {
        let c = ContourPath::from_heights(vec![0.0, 2.0, 0.4, 1.5, 0.7, 1.8, 0.0]).unwrap();
        let dec = decompose(&c, 1.0).unwrap();
        assert_eq!(dec.up.len(), 3);
        assert_eq!(dec.excursions.len(), 2);
        assert!(close(dec.excursions[0].heights(), &[1.0, 0.4, 1.0]));
        assert!(close(dec.above[1].heights(), &[1.0, 1.5, 1.0]));
        assert_eq!(dec.reassemble().unwrap(), c);
    }

    #[test]
    fn infimum_decomposition_examples() {
        let descent = ContourPath::from_heights(vec![1.0, 0.2]).unwrap();
        assert!(infimum_decomposition(&descent, Orientation::Forward).unwrap().is_empty());
        let f = ContourPath::from_heights(vec![1.0, 0.7, 0.9, 0.4, 0.5, 0.4]).unwrap();
        let parts = infimum_decomposition(&f, Orientation::Forward).unwrap();
        let levels: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let heights: Vec<f64> = parts.iter().map(|p| p.1.sup() - p.0).collect();
        assert!(close(&levels, &[0.7, 0.4]));
        assert!(close(&heights, &[0.2, 0.1]));
        let rev = infimum_decomposition(&f.reversed(), Orientation::Reversed).unwrap();
        assert_eq!(rev, parts);
    }

    #[test]
    fn conditioned_contours_have_n_touches() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            for method in [Conditioning::Rejection, Conditioning::ExcursionConcat] {
                let c = conditioned_contour(1.0, n, method, DEFAULT_MAX_ATTEMPTS, &mut rng).unwrap();
                assert!(c.is_complete());
                assert_eq!(crossings(&c, 1.0).0.len(), n);
                assert_eq!(tree_from_contour(&c, Some(1.0)).unwrap().extant_count(), n);
            }
        }
        assert!(matches!(
            conditioned_contour(1.0, 0, Conditioning::ExcursionConcat, 10, &mut rng),
            Err(Error::Parameter { name: "n", .. })
        ));
        assert!(matches!(
            conditioned_contour(1.0, 40, Conditioning::Rejection, 3, &mut rng),
            Err(Error::Resource { attempts: 3, .. })
        ));
    }

    #[test]
    fn excursions_below_stay_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let e = sample_excursion_below(1.0, &mut rng).unwrap();
            assert!(e.sup() < 1.0);
            assert!(e.is_complete());
        }
    }
}
