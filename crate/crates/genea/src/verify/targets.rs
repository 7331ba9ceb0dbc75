//! Checks of the exact (finite-population) laws.

use genea_core::contour::{self, Conditioning, Direction, WalkLimits, DEFAULT_MAX_ATTEMPTS};
use genea_core::continuum;
use genea_core::genealogy;
use genea_core::laws::{self, ContinuousLaw, DiscreteLaw};
use genea_core::tree;
use rand::Rng;

use super::{goodness_of_fit, replicate, LawReport, Reference, TestKind, VerifyOutcome, MIN_EXPECTED};
use crate::stats;
use crate::streams::substream;
use crate::{Error, Result};

/// Level for distribution-shape tests.
pub const ALPHA_SHAPE: f64 = 0.01;
/// Level for count tests.
pub const ALPHA_COUNT: f64 = 0.001;

// stream families
const LEMMA1: u32 = 1;
const EQ5: u32 = 2;
const EQ6: u32 = 3;
const LEMMA3: u32 = 4;
const LEMMA3_REJECTION: u32 = 5;
const LEMMA3_CONCAT: u32 = 6;
const LEMMA4: u32 = 7;
const LEMMA6: u32 = 8;
const MARKPROB: u32 = 9;
const FIRST_SET: u32 = 10;
const CALIBRATION: u32 = 11;

const CHUNK: usize = 1000;

fn check_count(name: &'static str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::param(name, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {x}")))
    }
}

/// Rise and fall draws of the contour walk are independent Exponential(1).
/// Pools every draw of walks capped at 500 steps (`samples` draws in all), and
/// separately the rise lengths of complete contours.
pub fn lemma1(samples: usize, seed: u64) -> Result<VerifyOutcome> {
    check_count("samples", samples)?;
    let chunks = samples.div_ceil(CHUNK);
    let draws = replicate(chunks, |i| {
        let mut rng = substream(seed, LEMMA1, i);
        let want = CHUNK.min(samples - i as usize * CHUNK);
        let mut out = Vec::with_capacity(want);
        let limits = WalkLimits {
            max_steps: Some(500),
            ..WalkLimits::default()
        };
        while out.len() < want {
            contour::walk(
                limits,
                || {
                    let x = genea_core::draw::exp1(&mut rng);
                    out.push(x);
                    x
                },
                |_, _| true,
            );
        }
        out.truncate(want);
        Ok(out)
    })?;
    let draws: Vec<f64> = draws.concat();
    let exp = |x: f64| 1.0 - (-x).exp();
    let pooled = goodness_of_fit("walk draws ~ Exp(1)", &draws, Reference::Cdf(&exp), ALPHA_SHAPE)?;

    let rises = replicate(chunks, |i| {
        let mut rng = substream(seed, LEMMA1, (1 << 31) | i);
        let want = CHUNK.min(samples - i as usize * CHUNK);
        let mut out = Vec::with_capacity(want);
        while out.len() < want {
            let path = bounded_contour(&mut rng);
            out.extend(
                path.segments()
                    .iter()
                    .filter(|s| s.direction == Direction::Up)
                    .map(|s| s.length),
            );
        }
        out.truncate(want);
        Ok(out)
    })?;
    let rises = rises.concat();
    let rise = goodness_of_fit("contour rises ~ Exp(1)", &rises, Reference::Cdf(&exp), ALPHA_SHAPE)?;
    Ok(VerifyOutcome::from_reports(
        "lemma1",
        vec![pooled.seed(seed), rise.seed(seed)],
    ))
}

/// A complete contour, redrawn while it exceeds 10^4 steps (the rise law
/// does not depend on the walk's length, so this keeps memory bounded).
fn bounded_contour<R: Rng>(rng: &mut R) -> contour::ContourPath {
    loop {
        let mut heights = vec![0.0];
        let end = contour::walk(
            WalkLimits {
                max_steps: Some(10_000),
                ..WalkLimits::default()
            },
            || genea_core::draw::exp1(rng),
            |h, _| {
                heights.push(h);
                true
            },
        );
        if end == contour::WalkEnd::Returned {
            return contour::ContourPath::from_heights(heights).expect("walk output alternates");
        }
    }
}

/// Population size at `t` of unconditioned trees against its geometric law,
/// chi-square over `{0, ..., 10, >= 11}`.
pub fn eq5(t: f64, trees: usize, seed: u64) -> Result<VerifyOutcome> {
    check_positive("t", t)?;
    check_count("replicates", trees)?;
    let counts = replicate(trees, |i| {
        let mut rng = substream(seed, EQ5, i);
        Ok(tree::simulate_tree_below(t, &mut rng)?.extant_count())
    })?;
    let law = laws::population_law(t)?;
    let cells = 12;
    let mut observed = vec![0.0; cells];
    for &c in &counts {
        observed[c.min(cells - 1)] += 1.0;
    }
    let n = trees as f64;
    let mut expected = Vec::with_capacity(cells);
    for k in 0..cells as i64 - 1 {
        expected.push(n * law.pmf(k)?);
    }
    expected.push(n * (1.0 - law.cdf(cells as i64 - 2)?));
    let (o, e) = stats::pool_small_cells(&observed, &expected, MIN_EXPECTED);
    let report = goodness_of_fit("population at t", &o, Reference::Expected(&e), ALPHA_COUNT)?
        .seed(seed)
        .param("t", t);
    Ok(VerifyOutcome::from_reports("eq5", vec![report]))
}

/// Height of unconditioned contours: `P[sup > tau] = 1/(1+tau)` at each
/// `tau`, within 3 binomial standard errors.
pub fn eq6(taus: &[f64], samples: usize, seed: u64) -> Result<VerifyOutcome> {
    check_count("samples", samples)?;
    if taus.is_empty() || taus.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::param("tau", "levels must be positive and finite"));
    }
    let top = taus.iter().fold(0.0f64, |a, &b| a.max(b));
    let sups = replicate(samples.div_ceil(CHUNK), |i| {
        let mut rng = substream(seed, EQ6, i);
        let want = CHUNK.min(samples - i as usize * CHUNK);
        let mut out = Vec::with_capacity(want);
        for _ in 0..want {
            let mut sup = 0.0f64;
            contour::walk(
                WalkLimits {
                    abort_at: Some(top),
                    ..WalkLimits::default()
                },
                || genea_core::draw::exp1(&mut rng),
                |h, _| {
                    sup = sup.max(h);
                    true
                },
            );
            out.push(sup);
        }
        Ok(out)
    })?;
    let sups = sups.concat();
    let mut reports = Vec::new();
    for &tau in taus {
        // the walk stops on reaching the top level, so compare with >= there
        let hits = sups.iter().filter(|&&s| if tau == top { s >= tau } else { s > tau }).count();
        let p0 = laws::height_survival(tau)?;
        reports.push(
            super::proportion_test(&format!("P[sup > {tau}]"), hits, samples, p0, 3.0)
                .seed(seed)
                .param("tau", tau),
        );
    }
    Ok(VerifyOutcome::from_reports("eq6", reports))
}

/// Pooled branch depths of conditioned trees against `2 tau / (1 + tau)`
/// (scaled to `t`), plus a two-sample comparison of the two conditioning
/// methods at a small population size.
pub fn lemma3(t: f64, n: usize, trees: usize, rejection_n: usize, rejection_trees: usize, seed: u64) -> Result<VerifyOutcome> {
    check_positive("t", t)?;
    check_count("n", n)?;
    check_count("replicates", trees)?;
    check_count("rejection_n", rejection_n)?;
    check_count("rejection_replicates", rejection_trees)?;
    let depths = pooled_depths(t, n, trees, Conditioning::ExcursionConcat, seed, LEMMA3)?;
    let law = laws::branch_depth_law(t)?;
    let shape = goodness_of_fit("branch depths", &depths, Reference::Law(&law), ALPHA_SHAPE)?
        .seed(seed)
        .param("t", t)
        .param("n", n as f64);
    let mut reports = vec![shape];
    if rejection_n > 1 {
        let a = pooled_depths(t, rejection_n, rejection_trees, Conditioning::ExcursionConcat, seed, LEMMA3_CONCAT)?;
        let b = pooled_depths(t, rejection_n, rejection_trees, Conditioning::Rejection, seed, LEMMA3_REJECTION)?;
        reports.push(
            goodness_of_fit("concatenation vs rejection", &a, Reference::Sample(&b), ALPHA_SHAPE)?
                .seed(seed)
                .param("n", rejection_n as f64),
        );
    }
    Ok(VerifyOutcome::from_reports("lemma3", reports))
}

/// Branch depths of `trees` conditioned trees, pooled in replicate order.
pub fn pooled_depths(t: f64, n: usize, trees: usize, method: Conditioning, seed: u64, tag: u32) -> Result<Vec<f64>> {
    let per = replicate(trees, |i| {
        let mut rng = substream(seed, tag, i);
        let path = contour::conditioned_contour(t, n, method, DEFAULT_MAX_ATTEMPTS, &mut rng)?;
        Ok(genealogy::genealogy_from_contour(&path, t)?.depths())
    })?;
    Ok(per.concat())
}

/// Continuum genealogy above `delta`: Poisson count, inverse-square depths
/// and uniform indices.
pub fn lemma4(t: f64, delta: f64, draws: usize, seed: u64) -> Result<VerifyOutcome> {
    check_count("replicates", draws)?;
    let law = laws::inverse_square_law(delta, t)?;
    let samples = replicate(draws, |i| {
        let mut rng = substream(seed, LEMMA4, i);
        Ok(continuum::sample_pi(t, delta, &mut rng)?)
    })?;
    let counts: Vec<f64> = samples.iter().map(|s| s.points.len() as f64).collect();
    let depths: Vec<f64> = samples.iter().flat_map(|s| s.points.iter().map(|p| p.depth)).collect();
    let ells: Vec<f64> = samples.iter().flat_map(|s| s.points.iter().map(|p| p.ell)).collect();
    let uniform = |x: f64| x.clamp(0.0, 1.0);
    let reports = vec![
        goodness_of_fit("point count", &counts, Reference::Poisson(law.mass()), ALPHA_COUNT)?,
        goodness_of_fit("depths", &depths, Reference::Law(&law), ALPHA_SHAPE)?,
        goodness_of_fit("indices", &ells, Reference::Cdf(&uniform), ALPHA_SHAPE)?,
    ];
    let reports = reports
        .into_iter()
        .map(|r| r.seed(seed).param("t", t).param("delta", delta))
        .collect();
    Ok(VerifyOutcome::from_reports("lemma4", reports))
}

/// Number of subtrees on the left of each interior branch of conditioned
/// trees, all subtrees kept, against Poisson with mean the branch depth.
/// Branches are binned by depth into `bins` equal bins; within a bin the
/// expected count of each category is the sum of the Poisson masses of its
/// branches, and categories are pooled from the right.
pub fn lemma6_count(t: f64, n: usize, trees: usize, bins: usize, seed: u64) -> Result<VerifyOutcome> {
    check_positive("t", t)?;
    check_count("replicates", trees)?;
    check_count("bins", bins)?;
    if n < 2 {
        return Err(Error::param("n", "needs at least 2 extant individuals for an interior branch"));
    }
    let per = replicate(trees, |i| {
        let mut rng = substream(seed, LEMMA6, i);
        let path = contour::conditioned_contour(t, n, Conditioning::ExcursionConcat, DEFAULT_MAX_ATTEMPTS, &mut rng)?;
        let hist = genealogy::historical_from_contour(&path, t, true)?;
        let m = hist.entries.len();
        Ok(hist.entries[1..m - 1]
            .iter()
            .map(|e| (e.depth, e.left.len()))
            .collect::<Vec<_>>())
    })?;
    let branches: Vec<(f64, usize)> = per.concat();
    let report = binned_poisson_fit(&branches, t, bins, |d| d)?
        .rename("left subtree counts ~ Poisson(t_i)")
        .seed(seed)
        .param("t", t)
        .param("n", n as f64);
    let integrated = binned_poisson_fit(&branches, t, bins, |d| d - d.ln_1p())?
        .rename("left subtree counts ~ Poisson(t_i - ln(1 + t_i))")
        .seed(seed)
        .param("t", t)
        .param("n", n as f64);
    let mut outcome = VerifyOutcome::from_reports("lemma6-count", vec![report]);
    outcome.diagnostics.push(integrated);
    Ok(outcome)
}

/// Chi-square of per-branch counts against Poisson(`mean(depth)`), branches
/// binned by depth, categories pooled from the right within each bin.
fn binned_poisson_fit(branches: &[(f64, usize)], t: f64, bins: usize, mean: impl Fn(f64) -> f64) -> Result<LawReport> {
    let cats = branches.iter().map(|b| b.1).max().unwrap_or(0) + 2;
    let mut observed = vec![vec![0.0; cats]; bins];
    let mut expected = vec![vec![0.0; cats]; bins];
    for &(depth, count) in branches {
        let b = ((depth / t * bins as f64) as usize).min(bins - 1);
        observed[b][count.min(cats - 1)] += 1.0;
        for (k, p) in stats::poisson_cells(mean(depth), cats).into_iter().enumerate() {
            expected[b][k] += p;
        }
    }
    let (mut o, mut e, mut df) = (Vec::new(), Vec::new(), 0usize);
    for b in 0..bins {
        if expected[b].iter().sum::<f64>() < MIN_EXPECTED {
            continue;
        }
        let (po, pe) = stats::pool_small_cells(&observed[b], &expected[b], MIN_EXPECTED);
        df += po.len() - 1;
        o.extend(po);
        e.extend(pe);
    }
    let (stat, p) = stats::chi_square(&o, &e, df, MIN_EXPECTED)?;
    let observed_mean = branches.iter().map(|b| b.1 as f64).sum::<f64>() / branches.len() as f64;
    let expected_mean = branches.iter().map(|b| mean(b.0)).sum::<f64>() / branches.len() as f64;
    Ok(LawReport::new("counts", TestKind::ChiSquare, branches.len(), stat, p, ALPHA_COUNT)
        .param("df", df as f64)
        .param("observed_mean", observed_mean)
        .param("expected_mean", expected_mean))
}

/// Fraction of unconditioned trees with at least one mark against `sqrt(p)`,
/// within 3 standard errors.
pub fn markprob(p: f64, trees: usize, seed: u64) -> Result<VerifyOutcome> {
    check_count("replicates", trees)?;
    let target = laws::mark_prob(p)?;
    let hits = replicate(trees.div_ceil(CHUNK), |i| {
        let mut rng = substream(seed, MARKPROB, i);
        let want = CHUNK.min(trees - i as usize * CHUNK);
        let mut hits = 0usize;
        for _ in 0..want {
            hits += contour::sample_has_mark(p, &mut rng)? as usize;
        }
        Ok(hits)
    })?;
    let hits: usize = hits.iter().sum();
    let report = super::proportion_test("trees with a mark", hits, trees, target, 3.0)
        .seed(seed)
        .param("p", p);
    Ok(VerifyOutcome::from_reports("markprob", vec![report]))
}

/// Mass of `1/kappa^2` over `tau in [a, b]`, `kappa in [c, d]`, restricted to
/// `kappa < h - tau`.
fn triangle_cell_mass(h: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    // with s = h - tau the integrand in s is g(s) = (1/c - 1/min(s, d))^+,
    // whose antiderivative from 0 is prim(s)
    let prim = |s: f64| {
        if s <= c {
            0.0
        } else if s <= d {
            s / c - s.ln() - 1.0 + c.ln()
        } else {
            d / c - d.ln() - 1.0 + c.ln() + (s - d) * (1.0 / c - 1.0 / d)
        }
    };
    prim(h - a) - prim(h - b)
}

/// First-set points of marked trees of height `h`: a 2-D chi-square on a
/// 10 x 10 grid against the density `1/kappa^2` on the truncated triangle,
/// and the mean count per set against the closed-form mass.
pub fn first_set_shape(h: f64, p: f64, kappa_min: f64, points: usize, seed: u64) -> Result<VerifyOutcome> {
    check_count("points", points)?;
    let mass = laws::intensity::first_set_mass(h, p, kappa_min)?;
    if !(mass > 0.0) {
        return Err(Error::param("kappa_min", "first set is empty"));
    }
    let sets = (points as f64 / mass).ceil() as usize;
    let per = replicate(sets, |i| {
        let mut rng = substream(seed, FIRST_SET, i);
        Ok(continuum::sample_first_set(h, p, kappa_min, &mut rng)?)
    })?;
    let grid = 10;
    let tau_w = h / grid as f64;
    let kappa_w = (h - kappa_min) / grid as f64;
    let mut observed = vec![0.0; grid * grid];
    let mut total = 0usize;
    for &(tau, kappa) in per.iter().flatten() {
        let i = ((tau / tau_w) as usize).min(grid - 1);
        let j = (((kappa - kappa_min) / kappa_w) as usize).min(grid - 1);
        observed[i * grid + j] += 1.0;
        total += 1;
    }
    let mut cell_mass = vec![0.0; grid * grid];
    for i in 0..grid {
        for j in 0..grid {
            let (a, b) = (i as f64 * tau_w, (i + 1) as f64 * tau_w);
            let (c, d) = (kappa_min + j as f64 * kappa_w, kappa_min + (j + 1) as f64 * kappa_w);
            cell_mass[i * grid + j] = triangle_cell_mass(h, a, b, c, d);
        }
    }
    let all: f64 = cell_mass.iter().sum();
    let (o, e): (Vec<f64>, Vec<f64>) = observed
        .iter()
        .zip(&cell_mass)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&o, &m)| (o, total as f64 * m / all))
        .unzip();
    let (o, e) = stats::pool_small_cells(&o, &e, MIN_EXPECTED);
    let shape = goodness_of_fit("first-set points", &o, Reference::Expected(&e), ALPHA_COUNT)?;

    let counts: Vec<f64> = per.iter().map(|s| s.len() as f64).collect();
    let mean = stats::mean(&counts);
    let se = stats::std_dev(&counts) / (counts.len() as f64).sqrt();
    let z = (mean - mass) / se;
    let count = LawReport::new(
        "mean first-set count",
        TestKind::Proportion,
        counts.len(),
        z,
        stats::normal_two_sided(z),
        stats::within_se_alpha(3.0),
    )
    .param("observed", mean)
    .param("expected", mass);
    let reports = [shape, count]
        .into_iter()
        .map(|r| r.seed(seed).param("h", h).param("p", p).param("kappa_min", kappa_min))
        .collect();
    Ok(VerifyOutcome::from_reports("first-set", reports))
}

/// Feeds the tests samples drawn from their own reference `runs` times and
/// checks that the p-values are uniform (meta KS at level 0.001). Covers the
/// one-sample KS test on the branch-depth law and a 10-bin chi-square.
pub fn calibration(runs: usize, sample_size: usize, seed: u64) -> Result<VerifyOutcome> {
    check_count("runs", runs)?;
    if sample_size < 50 {
        return Err(Error::param("sample_size", "needs at least 50 samples per run"));
    }
    let law = laws::branch_depth_law(1.0)?;
    let pvalues = replicate(runs, |i| {
        let mut rng = substream(seed, CALIBRATION, i);
        let xs: Vec<f64> = (0..sample_size)
            .map(|_| law.quantile(genea_core::draw::unit(&mut rng)))
            .collect::<std::result::Result<_, _>>()?;
        let ks = goodness_of_fit("ks", &xs, Reference::Law(&law), ALPHA_SHAPE)?.p_value;
        let mut observed = [0.0; 10];
        for _ in 0..sample_size {
            observed[((genea_core::draw::unit(&mut rng) * 10.0) as usize).min(9)] += 1.0;
        }
        let expected = [sample_size as f64 / 10.0; 10];
        let chi = goodness_of_fit("chi", &observed, Reference::Expected(&expected), ALPHA_SHAPE)?.p_value;
        Ok((ks, chi))
    })?;
    let uniform = |x: f64| x.clamp(0.0, 1.0);
    let ks: Vec<f64> = pvalues.iter().map(|p| p.0).collect();
    let chi: Vec<f64> = pvalues.iter().map(|p| p.1).collect();
    let reports = vec![
        goodness_of_fit("KS p-values uniform", &ks, Reference::Cdf(&uniform), ALPHA_COUNT)?.seed(seed),
        goodness_of_fit("chi-square p-values uniform", &chi, Reference::Cdf(&uniform), ALPHA_COUNT)?.seed(seed),
    ];
    Ok(VerifyOutcome::from_reports("calibration", reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_cells_sum_to_truncated_mass() {
        let (h, kmin) = (1.0, 0.1);
        let grid = 10;
        let mut sum = 0.0;
        for i in 0..grid {
            for j in 0..grid {
                let (a, b) = (i as f64 / 10.0, (i + 1) as f64 / 10.0);
                let (c, d) = (kmin + j as f64 * 0.09, kmin + (j + 1) as f64 * 0.09);
                let m = triangle_cell_mass(h, a, b, c, d);
                assert!(m >= 0.0);
                sum += m;
            }
        }
        let mass = laws::intensity::first_set_mass(h, 1.0, kmin).unwrap();
        assert!((sum - mass).abs() < 1e-12, "{sum} vs {mass}");
    }

    #[test]
    fn triangle_cell_matches_quadrature() {
        let (h, a, b, c, d): (f64, f64, f64, f64, f64) = (1.0, 0.55, 0.65, 0.3, 0.45);
        let m = 20_000;
        let mut q = 0.0;
        for k in 0..m {
            let tau = a + (k as f64 + 0.5) * (b - a) / m as f64;
            let top = d.min(h - tau);
            if top > c {
                q += (1.0 / c - 1.0 / top) * (b - a) / m as f64;
            }
        }
        assert!((triangle_cell_mass(h, a, b, c, d) - q).abs() < 1e-8);
    }

    #[test]
    fn small_runs_are_reproducible() {
        let a = eq5(1.0, 2000, 3).unwrap();
        let b = eq5(1.0, 2000, 3).unwrap();
        assert_eq!(a, b);
    }
}
