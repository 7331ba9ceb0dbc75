use genea_core::contour::{self, Conditioning, ContourPath, Orientation};
use genea_core::genealogy::{self, GenealogyPP};
use genea_core::laws::{self, ContinuousLaw, DiscreteLaw};
use genea_core::tree::{self, PlanarTree};
use genea_core::{continuum, DEPTH_TOL};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn conditioned(seed: u64, t: f64, n: usize) -> PlanarTree {
    tree::condition_on_count(t, n, Conditioning::ExcursionConcat, &mut rng(seed)).unwrap()
}

fn pp_close(a: &GenealogyPP, b: &GenealogyPP) -> bool {
    a.t() == b.t()
        && a.len() == b.len()
        && a.points()
            .iter()
            .zip(b.points())
            .all(|(x, y)| x.index == y.index && (x.depth - y.depth).abs() <= DEPTH_TOL)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn same_multiset(a: Vec<f64>, b: Vec<f64>, tol: f64) -> bool {
    let (a, b) = (sorted(a), sorted(b));
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tree_contour_round_trip(seed in any::<u64>(), t in 0.1f64..4.0) {
        let tree = tree::simulate_tree_below(t, &mut rng(seed)).unwrap();
        let path = contour::contour_from_tree(&tree);
        prop_assert!(path.is_complete());
        let back = contour::tree_from_contour(&path, Some(t)).unwrap();
        prop_assert!(back.approx_eq(&tree, DEPTH_TOL));
        prop_assert!(contour::contour_from_tree(&back).approx_eq(&path, DEPTH_TOL));
    }

    #[test]
    fn marked_trees_round_trip(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let tree = conditioned(seed, 1.0, 3).mark_extinct(p, &mut r).unwrap();
        let back = contour::tree_from_contour(&contour::contour_from_tree(&tree), Some(1.0)).unwrap();
        prop_assert!(back.approx_eq(&tree, DEPTH_TOL));
    }

    #[test]
    fn extant_count_equals_upcrossings(seed in any::<u64>(), t in 0.1f64..3.0) {
        let tree = tree::simulate_tree_below(t, &mut rng(seed)).unwrap();
        let path = contour::contour_from_tree(&tree);
        let (up, down) = contour::crossings(&path, t);
        prop_assert_eq!(up.len(), tree.extant_count());
        prop_assert_eq!(down.len(), tree.extant_count());
        if let Some(dec) = contour::decompose(&path, t) {
            prop_assert_eq!(dec.excursions.len(), up.len() - 1);
            prop_assert!(dec.excursions.iter().all(|e| e.heights()[1..e.heights().len() - 1].iter().all(|&h| h < t)));
            prop_assert_eq!(dec.reassemble().unwrap(), path);
        } else {
            prop_assert_eq!(tree.extant_count(), 0);
        }
    }

    #[test]
    fn conditioning_hits_the_count(seed in any::<u64>(), t in 0.2f64..3.0, n in 1usize..12) {
        let tree = conditioned(seed, t, n);
        prop_assert_eq!(tree.extant_count(), n);
        tree.validate().unwrap();
    }

    #[test]
    fn genealogy_matches_lca_oracle(seed in any::<u64>(), t in 0.2f64..3.0, n in 1usize..15) {
        let tree = conditioned(seed, t, n);
        let pp = genealogy::genealogy_pp(&tree).unwrap();
        prop_assert_eq!(pp.len(), n - 1);
        prop_assert!(same_multiset(pp.depths(), tree.lca_branch_depths().unwrap(), DEPTH_TOL));
        // planar order agrees as well
        for (a, b) in pp.depths().iter().zip(tree.lca_branch_depths().unwrap()) {
            prop_assert!((a - b).abs() <= DEPTH_TOL);
        }
    }

    #[test]
    fn reconstruction_fixes_the_genealogy(seed in any::<u64>(), t in 0.2f64..3.0, n in 1usize..15) {
        let pp = genealogy::genealogy_pp(&conditioned(seed, t, n)).unwrap();
        let rebuilt = genealogy::reconstruct_genealogy_tree(&pp).unwrap();
        prop_assert_eq!(rebuilt.extant_count(), n);
        prop_assert!(pp_close(&genealogy::genealogy_pp(&rebuilt).unwrap(), &pp));
        for (a, b) in rebuilt.lca_branch_depths().unwrap().iter().zip(pp.depths()) {
            prop_assert!((a - b).abs() <= DEPTH_TOL);
        }
    }

    #[test]
    fn exact_genealogy_round_trips(seed in any::<u64>(), t in 0.2f64..3.0, n in 1usize..30) {
        let pp = genealogy::sample_genealogy_exact(t, n, &mut rng(seed)).unwrap();
        prop_assert_eq!(pp.len(), n - 1);
        let rebuilt = genealogy::reconstruct_genealogy_tree(&pp).unwrap();
        prop_assert!(pp_close(&genealogy::genealogy_pp(&rebuilt).unwrap(), &pp));
    }

    #[test]
    fn infimum_decomposition_reconstructs(seed in any::<u64>(), t in 0.3f64..3.0, n in 2usize..8) {
        let path = contour::contour_from_tree(&conditioned(seed, t, n));
        let dec = contour::decompose(&path, t).unwrap();
        let mut fragments: Vec<ContourPath> = vec![dec.ascent.reversed(), dec.descent.clone()];
        for exc in &dec.excursions {
            let (f, b) = genealogy::split_at_min(exc);
            fragments.push(f);
            fragments.push(b);
        }
        for frag in &fragments {
            let parts = contour::infimum_decomposition(frag, Orientation::Forward).unwrap();
            for w in parts.windows(2) {
                prop_assert!(w[1].0 <= w[0].0);
            }
            for (level, sub) in &parts {
                prop_assert!(sub.is_complete());
                prop_assert!(*level >= frag.end() && *level <= frag.start());
            }
            let rebuilt = contour::infimum_recompose(frag.start(), frag.end(), &parts).unwrap();
            prop_assert_eq!(rebuilt.heights(), frag.heights());
            let rev = contour::infimum_decomposition(&frag.reversed(), Orientation::Reversed).unwrap();
            prop_assert_eq!(rev, parts);
        }
    }

    #[test]
    fn historical_process_invariants(seed in any::<u64>(), n in 1usize..8, p in 0.0f64..=1.0) {
        let mut r = rng(seed ^ 0x5eed);
        let tree = conditioned(seed, 1.0, n).mark_extinct(p, &mut r).unwrap();
        let all = genealogy::historical_pp(&tree, true).unwrap();
        let marked = genealogy::historical_pp(&tree, false).unwrap();
        prop_assert_eq!(all.entries.len(), n + 1);
        prop_assert_eq!(all.mark_count(), tree.mark_count());
        prop_assert_eq!(marked.mark_count(), tree.mark_count());
        prop_assert!(marked.attachments().all(|a| a.subtree.mark_count() > 0));
        prop_assert!(all.entries[0].left.is_empty() && all.entries[n].right.is_empty());
        for e in &all.entries {
            for a in e.left.iter().chain(&e.right) {
                prop_assert!(a.attach < e.depth);
                prop_assert!(a.height < a.attach);
                prop_assert!((a.subtree.height() - a.height).abs() <= DEPTH_TOL);
            }
        }
        let induced = all.mark_induced();
        prop_assert_eq!(induced.mark_count(), tree.mark_count());
        prop_assert!(induced.attachments().all(|a| a.subtree.mark_count() == a.subtree.leaf_count()));
        prop_assert_eq!(all.genealogy().unwrap(), genealogy::genealogy_pp(&tree).unwrap());
    }

    #[test]
    fn contour_marking_matches_tree_marking(seed in any::<u64>(), n in 1usize..6, p in 0.0f64..=1.0) {
        let tree = conditioned(seed, 1.0, n);
        let marked_tree = tree.mark_extinct(p, &mut rng(seed.wrapping_add(1))).unwrap();
        let path = contour::mark_peaks(&contour::contour_from_tree(&tree), p, &mut rng(seed.wrapping_add(1))).unwrap();
        let via_path = contour::tree_from_contour(&path, Some(1.0)).unwrap();
        prop_assert!(via_path.approx_eq(&marked_tree, DEPTH_TOL));
    }

    #[test]
    fn mark_endpoints_are_deterministic(seed in any::<u64>()) {
        let tree = tree::simulate_tree_below(1.5, &mut rng(seed)).unwrap();
        let extinct = tree.leaf_count() - tree.extant_count();
        prop_assert_eq!(tree.mark_extinct(0.0, &mut rng(1)).unwrap().mark_count(), 0);
        prop_assert_eq!(tree.mark_extinct(1.0, &mut rng(2)).unwrap().mark_count(), extinct);
    }

    #[test]
    fn scalar_laws_invert(t in 0.05f64..20.0, u in 0.0f64..1.0) {
        let law = laws::branch_depth_law(t).unwrap();
        let x = law.quantile(u).unwrap();
        prop_assert!((law.cdf(x).unwrap() - u).abs() <= 1e-9);
        prop_assert!((law.quantile(law.cdf(x).unwrap()).unwrap() - x).abs() <= 1e-9);
        let delta = t / 7.0;
        let inv = laws::inverse_square_law(delta, t).unwrap();
        let y = inv.quantile(u).unwrap();
        prop_assert!(y >= delta && y <= t);
        prop_assert!((inv.cdf(y).unwrap() - u).abs() <= 1e-9);
    }

    #[test]
    fn population_identities(t in 0.05f64..20.0, k in 1i64..200) {
        let pop = laws::population_law(t).unwrap();
        let cond = laws::extant_count_law(t).unwrap();
        let lhs = cond.pmf(k).unwrap() * laws::height_survival(t).unwrap();
        let rhs = pop.pmf(k).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(f64::MIN_POSITIVE));
        prop_assert!(pop.cdf(k).unwrap() >= pop.cdf(k - 1).unwrap());
    }

    #[test]
    fn continuum_invariants(seed in any::<u64>(), t in 0.5f64..3.0, frac in 0.05f64..0.9) {
        let delta = frac * t;
        let mut r = rng(seed);
        let pi = continuum::sample_pi(t, delta, &mut r).unwrap();
        prop_assert!(pi.points.iter().all(|p| p.depth >= delta && p.depth < t && (0.0..1.0).contains(&p.ell)));
        let xi = continuum::sample_xi(t, 0.5, delta, 0.1 * t, &mut r).unwrap();
        for e in &xi.entries {
            for a in e.left.iter().chain(&e.right) {
                prop_assert!(a.height > xi.kappa_min && a.height < a.attach && a.attach < e.depth);
                prop_assert!(a.subtree.mark_count() >= 1);
                prop_assert!((a.subtree.height() - a.height).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn pdfs_integrate_to_cdfs() {
    // composite Simpson on a 1000-point grid
    for t in [0.5, 1.0, 5.0] {
        let law = laws::branch_depth_law(t).unwrap();
        let inv = laws::inverse_square_law(0.1 * t, t).unwrap();
        for (lo, hi, pdf, cdf) in [
            (0.0, t, &law as &dyn ContinuousLaw, &law as &dyn ContinuousLaw),
            (0.1 * t, t, &inv as &dyn ContinuousLaw, &inv as &dyn ContinuousLaw),
        ] {
            let m = 1000;
            let step = (hi - lo) / m as f64;
            let mut acc = 0.0;
            let mut prev = pdf.pdf(lo).unwrap();
            for k in 1..=m {
                let a = lo + (k - 1) as f64 * step;
                let b = if k == m { hi } else { lo + k as f64 * step };
                let mid = pdf.pdf(0.5 * (a + b)).unwrap();
                let end = pdf.pdf(b).unwrap();
                acc += (b - a) / 6.0 * (prev + 4.0 * mid + end);
                prev = end;
                assert!((acc - cdf.cdf(b).unwrap()).abs() < 1e-6, "t={t} x={b}");
            }
        }
    }
}

#[test]
fn rejection_acceptance_rate() {
    // P[N(1) = 5] = 1/64
    let mut r = rng(77);
    let reps = 64_000;
    let hits = (0..reps)
        .filter(|_| tree::simulate_tree_below(1.0, &mut r).unwrap().extant_count() == 5)
        .count() as f64;
    let p = 1.0 / 64.0;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((hits / reps as f64 - p).abs() < 3.0 * se, "rate {}", hits / reps as f64);
}

#[test]
fn genealogy_rejects_out_of_range_depths() {
    assert!(GenealogyPP::from_depths(1.0, vec![0.0]).is_err());
    assert!(GenealogyPP::from_depths(1.0, vec![1.2]).is_err());
}
