//! Direct samplers for the large-population limits: the continuum genealogy
//! (a Poisson process with intensity `dℓ dτ / τ²`), the marked subtree law
//! built along a spine, and the continuum historical process.
//!
//! Both limits have infinitely many points near depth or height zero, so
//! every sampler takes an explicit truncation: `delta` for branch depths and
//! `kappa_min` for subtree heights.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::draw;
use crate::genealogy::Attachment;
use crate::laws::intensity::{first_set_mass, subtree_mass};
use crate::laws::{inverse_square_law, ContinuousLaw};
use crate::tree::{LeafTag, PlanarTree};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumPoint {
    pub ell: f64,
    pub depth: f64,
}

/// Points of the continuum genealogy with depth at least `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumGenealogyPP {
    pub t: f64,
    pub delta: f64,
    pub points: Vec<ContinuumPoint>,
}

impl ContinuumGenealogyPP {
    pub fn depths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.depth).collect()
    }

    /// Points deeper than `delta`, as a process truncated at `delta`.
    pub fn restrict(&self, delta: f64) -> Result<ContinuumGenealogyPP> {
        if !(delta >= self.delta && delta < self.t) {
            return Err(Error::param("delta", format!("must lie in [{}, {})", self.delta, self.t)));
        }
        Ok(ContinuumGenealogyPP {
            t: self.t,
            delta,
            points: self.points.iter().copied().filter(|p| p.depth >= delta).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumEntry {
    pub ell: f64,
    pub depth: f64,
    pub left: Vec<Attachment>,
    pub right: Vec<Attachment>,
}

/// Continuum genealogy with marked side subtrees of height above
/// `kappa_min`. The first and last entries are the boundary sets at `ℓ = 0`
/// (right side only) and `ℓ = 1` (left side only), both at depth `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumHistoricalPP {
    pub t: f64,
    pub p: f64,
    pub delta: f64,
    pub kappa_min: f64,
    pub entries: Vec<ContinuumEntry>,
}

impl ContinuumHistoricalPP {
    pub fn main(&self) -> ContinuumGenealogyPP {
        let n = self.entries.len();
        ContinuumGenealogyPP {
            t: self.t,
            delta: self.delta,
            points: self.entries[1..n - 1]
                .iter()
                .map(|e| ContinuumPoint {
                    ell: e.ell,
                    depth: e.depth,
                })
                .collect(),
        }
    }

    pub fn attachments(&self) -> impl Iterator<Item = &Attachment> {
        self.entries.iter().flat_map(|e| e.left.iter().chain(e.right.iter()))
    }
}

fn check_truncation(t: f64, delta: f64) -> Result<()> {
    crate::tree::check_horizon(t)?;
    if !(delta > 0.0 && delta < t) {
        return Err(Error::param("delta", format!("must lie in (0, {t}), got {delta}")));
    }
    Ok(())
}

fn check_kappa(kappa_min: f64) -> Result<()> {
    if kappa_min > 0.0 && kappa_min.is_finite() {
        Ok(())
    } else {
        Err(Error::param("kappa_min", format!("must be positive, got {kappa_min}")))
    }
}

fn check_rate(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param("p", format!("must be positive, got {p}")))
    }
}

/// Continuum genealogy above depth `delta`: a Poisson number of points with
/// mean `1/delta - 1/t`, uniform index, depth density proportional to
/// `1/tau^2`, sorted by index.
pub fn sample_pi<R: Rng + ?Sized>(t: f64, delta: f64, rng: &mut R) -> Result<ContinuumGenealogyPP> {
    check_truncation(t, delta)?;
    let law = inverse_square_law(delta, t)?;
    let count = draw::poisson(rng, law.mass());
    let mut points = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let ell = draw::unit(rng);
        let depth = law.quantile(draw::unit(rng))?;
        points.push(ContinuumPoint { ell, depth });
    }
    points.sort_by(|a, b| a.ell.total_cmp(&b.ell));
    Ok(ContinuumGenealogyPP { t, delta, points })
}

/// Pairs `(tau, kappa)` with density proportional to `1/kappa^2` on
/// `0 < tau < top`, `kappa_min < kappa < bound(tau)`, by rejection from
/// uniform `tau` and inverse-square `kappa` on `(kappa_min, top)`.
fn sample_triangle_point<R: Rng + ?Sized>(
    top: f64,
    kappa_min: f64,
    accept: impl Fn(f64, f64) -> bool,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let law = inverse_square_law(kappa_min, top)?;
    loop {
        let tau = top * draw::open_unit(rng);
        let kappa = law.quantile(draw::unit(rng))?;
        if accept(tau, kappa) {
            return Ok((tau, kappa));
        }
    }
}

/// First set on one side of the spine of a marked tree of height `h`:
/// spine depths `tau` (from the root) and subtree heights `kappa` with
/// `kappa_min < kappa < h - tau`, density `1/(sqrt(p) kappa^2)`.
pub fn sample_first_set<R: Rng + ?Sized>(h: f64, p: f64, kappa_min: f64, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    check_rate(p)?;
    check_kappa(kappa_min)?;
    if kappa_min >= h {
        return Ok(Vec::new());
    }
    let count = draw::poisson(rng, first_set_mass(h, p, kappa_min)?);
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        out.push(sample_triangle_point(h, kappa_min, |tau, kappa| kappa < h - tau, rng)?);
    }
    Ok(out)
}

/// Marked tree of height `h` built along a spine ending in a marked leaf:
/// both first sets are drawn, each point carries a recursively sampled tree
/// of height `kappa` attached at spine depth `tau`. A bare spine when
/// `kappa_min >= h`.
pub fn sample_lambda_tree<R: Rng + ?Sized>(h: f64, p: f64, kappa_min: f64, rng: &mut R) -> Result<PlanarTree> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", format!("must be positive, got {h}")));
    }
    check_rate(p)?;
    check_kappa(kappa_min)?;
    let mut hanging: Vec<(f64, bool, PlanarTree)> = Vec::new();
    for on_left in [true, false] {
        for (tau, kappa) in sample_first_set(h, p, kappa_min, rng)? {
            hanging.push((tau, on_left, sample_lambda_tree(kappa, p, kappa_min, rng)?));
        }
    }
    Ok(spine_tree(h, hanging))
}

/// Spine of length `h` ending in a marked leaf, with subtrees hung at the
/// given depths on the given sides.
fn spine_tree(h: f64, mut hanging: Vec<(f64, bool, PlanarTree)>) -> PlanarTree {
    hanging.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut tree: Option<PlanarTree> = None;
    while let Some((tau, on_left, subtree)) = hanging.pop() {
        let spine = tree.take().unwrap_or_else(|| PlanarTree::leaf(h - tau, LeafTag::MARKED));
        let above = hanging.last().map_or(0.0, |a| a.0);
        let length = tau - above;
        tree = Some(if on_left {
            PlanarTree::join(length, subtree, spine)
        } else {
            PlanarTree::join(length, spine, subtree)
        });
    }
    tree.unwrap_or_else(|| PlanarTree::leaf(h, LeafTag::MARKED))
}

/// One side set of a branch at depth `t_ell`: attachment depths `tau`
/// below the level and heights `h` with `kappa_min < h < tau < t_ell`,
/// density `1/h^2`. Returned as `(tau, h)` pairs in increasing `tau`.
pub fn sample_side_set<R: Rng + ?Sized>(t_ell: f64, kappa_min: f64, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    check_kappa(kappa_min)?;
    if kappa_min >= t_ell {
        return Ok(Vec::new());
    }
    let count = draw::poisson(rng, subtree_mass(t_ell, kappa_min)?);
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        out.push(sample_triangle_point(t_ell, kappa_min, |tau, h| h < tau, rng)?);
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Continuum historical process: main points from [`sample_pi`], and for each
/// main point and each boundary an independent left and right side set whose
/// subtrees are drawn by [`sample_lambda_tree`].
pub fn sample_xi<R: Rng + ?Sized>(t: f64, p: f64, delta: f64, kappa_min: f64, rng: &mut R) -> Result<ContinuumHistoricalPP> {
    check_rate(p)?;
    check_kappa(kappa_min)?;
    let main = sample_pi(t, delta, rng)?;
    let side = |t_ell: f64, rng: &mut R| -> Result<Vec<Attachment>> {
        sample_side_set(t_ell, kappa_min, rng)?
            .into_iter()
            .map(|(attach, height)| {
                Ok(Attachment {
                    attach,
                    height,
                    subtree: sample_lambda_tree(height, p, kappa_min, rng)?,
                })
            })
            .collect()
    };
    let mut entries = Vec::with_capacity(main.points.len() + 2);
    entries.push(ContinuumEntry {
        ell: 0.0,
        depth: t,
        left: Vec::new(),
        right: side(t, rng)?,
    });
    for pt in &main.points {
        let left = side(pt.depth, rng)?;
        let right = side(pt.depth, rng)?;
        entries.push(ContinuumEntry {
            ell: pt.ell,
            depth: pt.depth,
            left,
            right,
        });
    }
    entries.push(ContinuumEntry {
        ell: 1.0,
        depth: t,
        left: side(t, rng)?,
        right: Vec::new(),
    });
    Ok(ContinuumHistoricalPP {
        t,
        p,
        delta,
        kappa_min,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bare_spine_when_truncation_exceeds_height() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = sample_lambda_tree(0.05, 0.5, 0.1, &mut rng).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.height(), 0.05);
        assert_eq!(tree.mark_count(), 1);
    }

    #[test]
    fn lambda_trees_are_fully_marked() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let tree = sample_lambda_tree(1.0, 0.25, 0.1, &mut rng).unwrap();
            tree.validate().unwrap();
            assert_eq!(tree.mark_count(), tree.leaf_count());
            assert!((tree.height() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spine_layout() {
        let a = PlanarTree::leaf(0.2, LeafTag::MARKED);
        let b = PlanarTree::leaf(0.1, LeafTag::MARKED);
        let tree = spine_tree(1.0, alloc::vec![(0.6, false, b.clone()), (0.3, true, a.clone())]);
        let expected = PlanarTree::join(
            0.3,
            a,
            PlanarTree::join(0.3, PlanarTree::leaf(0.4, LeafTag::MARKED), b),
        );
        assert!(tree.approx_eq(&expected, 1e-12));
    }

    #[test]
    fn pi_parameters_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_pi(1.0, 0.0, &mut rng).is_err());
        assert!(sample_pi(1.0, 1.0, &mut rng).is_err());
        for _ in 0..100 {
            let pp = sample_pi(1.0, 0.1, &mut rng).unwrap();
            assert!(pp.points.windows(2).all(|w| w[0].ell <= w[1].ell));
            assert!(pp.points.iter().all(|p| p.depth >= 0.1 && p.depth < 1.0));
        }
    }

    #[test]
    fn xi_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let xi = sample_xi(1.0, 0.5, 0.2, 0.1, &mut rng).unwrap();
            assert!(xi.entries[0].left.is_empty());
            assert!(xi.entries.last().unwrap().right.is_empty());
            for e in &xi.entries {
                for a in e.left.iter().chain(&e.right) {
                    assert!(a.height < a.attach && a.attach < e.depth);
                    assert!(a.height > 0.1);
                    assert!(a.subtree.mark_count() >= 1);
                }
            }
        }
        let xi = sample_xi(1.0, 0.5, 0.2, 2.0, &mut rng).unwrap();
        assert_eq!(xi.attachments().count(), 0);
    }
}
