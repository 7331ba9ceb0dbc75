//! Genealogical and historical point-processes of a tree observed at level
//! `t`.
//!
//! The genealogy of the `n` individuals alive at `t` is coded by the depths
//! below `t` of its `n - 1` branch points, in planar order. The historical
//! process adds, on each side of every branch, the subtrees of extinct
//! relatives that hang off the genealogy, with their attachment depths.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::contour::{self, ContourPath, Orientation};
use crate::draw;
use crate::laws::{branch_depth_law, ContinuousLaw};
use crate::tree::{self, PlanarTree};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenealogyPoint {
    /// Position of the branch among the branches, from 1.
    pub index: usize,
    /// Distance of the branch point below the observation level.
    pub depth: f64,
}

/// Branch points of the genealogy of the individuals alive at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenealogyPP {
    t: f64,
    points: Vec<GenealogyPoint>,
}

impl GenealogyPP {
    /// Checks that indices increase strictly and depths lie in `(0, t)`.
    pub fn new(t: f64, points: Vec<GenealogyPoint>) -> Result<Self> {
        tree::check_horizon(t).map_err(|_| Error::format(format!("horizon {t} is not positive")))?;
        for w in points.windows(2) {
            if w[1].index <= w[0].index {
                return Err(Error::format("indices must increase strictly"));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.depth > 0.0 && p.depth < t)) {
            return Err(Error::format(format!("depth {} outside (0, {t})", p.depth)));
        }
        Ok(GenealogyPP { t, points })
    }

    /// Points with indices `1..=depths.len()`.
    pub fn from_depths(t: f64, depths: Vec<f64>) -> Result<Self> {
        let points = depths
            .into_iter()
            .enumerate()
            .map(|(k, depth)| GenealogyPoint { index: k + 1, depth })
            .collect();
        Self::new(t, points)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn points(&self) -> &[GenealogyPoint] {
        &self.points
    }

    pub fn depths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.depth).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Genealogical point-process of a tree with a horizon.
pub fn genealogy_pp(tree: &PlanarTree) -> Result<GenealogyPP> {
    let t = tree.horizon().ok_or_else(|| Error::domain("tree has no horizon"))?;
    genealogy_from_contour(&contour::contour_from_tree(tree), t)
}

/// Genealogical point-process read off a contour: the depth below `t` of the
/// lowest point of each excursion below `t` between consecutive crossings.
pub fn genealogy_from_contour(path: &ContourPath, t: f64) -> Result<GenealogyPP> {
    let lo = t - crate::DEPTH_TOL;
    let mut depths = Vec::new();
    let mut seen_up = false;
    // lowest height since the last down-crossing, while below the level
    let mut below: Option<f64> = None;
    for w in path.heights().windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a && a < lo && b >= lo {
            if let Some(m) = below.take() {
                depths.push(t - m);
            }
            seen_up = true;
        } else if b < a && a >= lo && b < lo {
            below = Some(b);
        } else if let Some(m) = below.as_mut() {
            *m = m.min(b);
        }
    }
    if !seen_up {
        return Err(Error::domain("no individual alive at the observation level"));
    }
    GenealogyPP::from_depths(t, depths)
}

/// The planar tree whose leaves all sit at depth `t` and whose consecutive
/// leaves meet at depths `t - t_i`.
pub fn reconstruct_genealogy_tree(pp: &GenealogyPP) -> Result<PlanarTree> {
    let t = pp.t;
    let mut heights = Vec::with_capacity(2 * pp.len() + 3);
    heights.push(0.0);
    heights.push(t);
    for p in &pp.points {
        if !(p.depth > 0.0 && p.depth < t) {
            return Err(Error::format(format!("depth {} outside (0, {t})", p.depth)));
        }
        heights.push(t - p.depth);
        heights.push(t);
    }
    heights.push(0.0);
    contour::tree_from_contour(&ContourPath::from_heights(heights)?, Some(t))
}

/// Direct sampler: `n - 1` independent depths from the branch-depth law.
pub fn sample_genealogy_exact<R: Rng + ?Sized>(t: f64, n: usize, rng: &mut R) -> Result<GenealogyPP> {
    let law = branch_depth_law(t)?;
    if n == 0 {
        return Err(Error::param("n", "extant count must be at least 1"));
    }
    let mut depths = Vec::with_capacity(n - 1);
    while depths.len() < n - 1 {
        let d = law.quantile(draw::unit(rng))?;
        // u = 0 would give a zero depth
        if d > 0.0 {
            depths.push(d);
        }
    }
    GenealogyPP::from_depths(t, depths)
}

/// A subtree hanging off the genealogy.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    /// Distance below the observation level of the attachment point.
    pub attach: f64,
    /// Height of the subtree above its attachment point.
    pub height: f64,
    pub subtree: PlanarTree,
}

/// One branch of the genealogy with the subtrees on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalEntry {
    pub index: usize,
    pub depth: f64,
    pub left: Vec<Attachment>,
    pub right: Vec<Attachment>,
}

/// Genealogy decorated with side subtrees. Entry `0` and entry `n` sit at
/// depth `t` and carry only a right and only a left set, respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalPP {
    pub t: f64,
    pub entries: Vec<HistoricalEntry>,
}

impl HistoricalPP {
    /// Genealogical part (interior entries).
    pub fn genealogy(&self) -> Result<GenealogyPP> {
        let n = self.entries.len();
        let points = self.entries[1..n.saturating_sub(1)]
            .iter()
            .map(|e| GenealogyPoint {
                index: e.index,
                depth: e.depth,
            })
            .collect();
        GenealogyPP::new(self.t, points)
    }

    pub fn attachments(&self) -> impl Iterator<Item = &Attachment> {
        self.entries.iter().flat_map(|e| e.left.iter().chain(e.right.iter()))
    }

    pub fn mark_count(&self) -> usize {
        self.attachments().map(|a| a.subtree.mark_count()).sum()
    }

    /// Replaces every subtree by the tree spanned by its marks and drops
    /// subtrees without marks.
    pub fn mark_induced(&self) -> HistoricalPP {
        let project = |set: &[Attachment]| -> Vec<Attachment> {
            set.iter()
                .filter_map(|a| {
                    a.subtree.mark_induced().map(|subtree| Attachment {
                        attach: a.attach,
                        height: subtree.height(),
                        subtree,
                    })
                })
                .collect()
        };
        HistoricalPP {
            t: self.t,
            entries: self
                .entries
                .iter()
                .map(|e| HistoricalEntry {
                    index: e.index,
                    depth: e.depth,
                    left: project(&e.left),
                    right: project(&e.right),
                })
                .collect(),
        }
    }
}

/// Historical point-process of a (marked) tree with a horizon.
/// `keep_unmarked = false` keeps only subtrees that hold a mark.
pub fn historical_pp(tree: &PlanarTree, keep_unmarked: bool) -> Result<HistoricalPP> {
    let t = tree.horizon().ok_or_else(|| Error::domain("tree has no horizon"))?;
    historical_from_contour(&contour::contour_from_tree(tree), t, keep_unmarked)
}

/// Historical point-process read off a tagged contour.
pub fn historical_from_contour(path: &ContourPath, t: f64, keep_unmarked: bool) -> Result<HistoricalPP> {
    let dec = contour::decompose(path, t)
        .ok_or_else(|| Error::domain("no individual alive at the observation level"))?;
    let side = |fragment: &ContourPath, orientation: Orientation| -> Result<Vec<Attachment>> {
        let mut out = Vec::new();
        for (level, sub) in contour::infimum_decomposition(fragment, orientation)? {
            if !keep_unmarked && !has_mark(&sub) {
                continue;
            }
            out.push(Attachment {
                attach: t - level,
                height: sub.sup() - level,
                subtree: contour::tree_from_contour(&sub, None)?,
            });
        }
        Ok(out)
    };
    let n = dec.up.len();
    let mut entries = Vec::with_capacity(n + 1);
    entries.push(HistoricalEntry {
        index: 0,
        depth: t,
        left: Vec::new(),
        right: side(&dec.ascent, Orientation::Reversed)?,
    });
    for (k, exc) in dec.excursions.iter().enumerate() {
        let (forward, backward) = split_at_min(exc);
        entries.push(HistoricalEntry {
            index: k + 1,
            depth: t - backward.end(),
            left: side(&forward, Orientation::Forward)?,
            right: side(&backward, Orientation::Forward)?,
        });
    }
    entries.push(HistoricalEntry {
        index: n,
        depth: t,
        left: side(&dec.descent, Orientation::Forward)?,
        right: Vec::new(),
    });
    Ok(HistoricalPP { t, entries })
}

fn has_mark(path: &ContourPath) -> bool {
    path.tags().iter().any(|g| g.is_some_and(|g| g.marked))
}

/// Splits an excursion below the level at its earliest lowest vertex into
/// the part before it and the part after it read backwards; both start at
/// the level and end at the minimum.
pub fn split_at_min(exc: &ContourPath) -> (ContourPath, ContourPath) {
    let h = exc.heights();
    let g = exc.tags();
    let mut k = 0;
    for (j, &x) in h.iter().enumerate() {
        if x < h[k] {
            k = j;
        }
    }
    let forward = ContourPath::from_parts_unchecked(h[..=k].to_vec(), g[..=k].to_vec());
    let mut bh = h[k..].to_vec();
    let mut bg = g[k..].to_vec();
    bh.reverse();
    bg.reverse();
    (forward, ContourPath::from_parts_unchecked(bh, bg))
}

/// Marked subtree count per stored subtree, for conservation checks.
pub fn subtree_marks(pp: &HistoricalPP) -> Vec<usize> {
    pp.attachments().map(|a| a.subtree.mark_count()).collect()
}
