//! Goodness-of-fit statistics: Kolmogorov-Smirnov (one and two sample),
//! Pearson chi-square and a few helpers for binning and resampling.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::Error;

/// Largest gap between the empirical distribution of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, Error> {
    if samples.is_empty() {
        return Err(Error::param("samples", "empty sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Largest gap between the empirical distributions of two samples.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64, Error> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("samples", "empty sample"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Survival function of the Kolmogorov distribution,
/// `P[K > x] = 2 Σ (-1)^(k-1) exp(-2 k² x²)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // the alternating series converges slowly here; use the theta-function form
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut s = 0.0;
        for k in 0..50 {
            let j = (2 * k + 1) as f64;
            let term = (-j * j * c).exp();
            s += term;
            if term < 1e-18 {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS distance `d` for effective sample size `ne`,
/// with Stephens' small-sample scaling of the argument.
pub fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// Distance above which a KS test of size `n` rejects at level `alpha`,
/// from the plain asymptotic law `P[√n D > x] = kolmogorov_sf(x)`.
pub fn ks_critical_value(alpha: f64, n: usize) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 5.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / (n as f64).sqrt()
}

/// Pearson chi-square statistic and its upper-tail probability with `df`
/// degrees of freedom. Every expected count must be at least `min_expected`.
pub fn chi_square(observed: &[f64], expected: &[f64], df: usize, min_expected: f64) -> Result<(f64, f64), Error> {
    if observed.is_empty() || observed.len() != expected.len() {
        return Err(Error::param("counts", "observed and expected bins must match and be nonempty"));
    }
    if df == 0 {
        return Err(Error::param("counts", "no degrees of freedom"));
    }
    if let Some(e) = expected.iter().find(|&&e| !(e >= min_expected)) {
        return Err(Error::param(
            "counts",
            format!("expected bin count {e} below {min_expected}"),
        ));
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::param("df", e.to_string()))?;
    Ok((stat, dist.sf(stat)))
}

/// Merges adjacent bins, from the right, until each expected count reaches
/// `min_expected`. The merged leftovers join their left neighbour.
pub fn pool_small_cells(observed: &[f64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in observed.iter().zip(expected).rev() {
        o_acc += o;
        e_acc += e;
        if e_acc >= min_expected {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(o), Some(e)) => {
                *o += o_acc;
                *e += e_acc;
            }
            _ => {
                obs.push(o_acc);
                exp.push(e_acc);
            }
        }
    }
    obs.reverse();
    exp.reverse();
    (obs, exp)
}

/// Poisson probabilities `P[X = k]` for `k < cells - 1` and the tail
/// `P[X >= cells - 1]`.
pub fn poisson_cells(mean: f64, cells: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(cells);
    let mut pk = (-mean).exp();
    let mut acc = 0.0;
    for k in 0..cells.saturating_sub(1) {
        out.push(pk);
        acc += pk;
        pk *= mean / (k as f64 + 1.0);
    }
    out.push((1.0 - acc).max(0.0));
    out
}

/// Two-sided normal tail probability of a z-score.
pub fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::standard();
    2.0 * n.sf(z.abs())
}

/// Significance level equivalent to "within `k` standard errors".
pub fn within_se_alpha(k: f64) -> f64 {
    normal_two_sided(k)
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        for x in iter {
            k.add(x);
        }
        k
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<KahanSum>().value() / xs.len() as f64
}

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).collect::<KahanSum>().value();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_sample() {
        assert_eq!(ks_statistic(&[0.5], |x| x).unwrap(), 0.5);
        assert!(ks_statistic(&[], |x| x).is_err());
    }

    #[test]
    fn two_sample_values() {
        let xs = [1.0, 1.0, 4.0, 4.0];
        let ys = [1.0, 1.0, 1.0, 4.0];
        assert!((ks_two_sample_statistic(&xs, &ys).unwrap() - 0.25).abs() < 1e-12);
        let xs = [0.42, 0.24, 0.86, 0.85, 0.82, 0.82, 0.25, 0.78, 0.13, 0.27];
        let ys = [0.24, 0.27, 0.87, 0.29, 0.57, 0.44, 0.5, 0.00, 0.56, 0.03];
        assert!((ks_two_sample_statistic(&xs, &ys).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(ks_two_sample_statistic(&[2.0, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // standard table values
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 1e-4);
        // both series agree where they overlap
        let x = 1.0;
        let alt: f64 = 2.0 * (1..50).map(|k| {
            let k = k as f64;
            (if k as i64 % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * k * k * x * x).exp()
        }).sum::<f64>();
        assert!((kolmogorov_sf(0.999_999_999) - alt).abs() < 1e-8);
        assert!((ks_critical_value(0.01, 10_000) - 0.01628).abs() < 1e-5);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let e = [10.0, 20.0, 30.0];
        let (stat, p) = chi_square(&e, &e, 2, 5.0).unwrap();
        assert_eq!(stat, 0.0);
        assert_eq!(p, 1.0);
        assert!(chi_square(&[1.0, 2.0], &[1.0, 2.0], 1, 5.0).is_err());
    }

    #[test]
    fn pooling_keeps_totals() {
        let o = [50.0, 30.0, 10.0, 3.0, 1.0, 1.0];
        let e = [48.0, 31.0, 12.0, 4.0, 1.5, 0.5];
        let (po, pe) = pool_small_cells(&o, &e, 5.0);
        assert_eq!(po.iter().sum::<f64>(), o.iter().sum::<f64>());
        assert_eq!(pe.iter().sum::<f64>(), e.iter().sum::<f64>());
        assert!(pe.iter().all(|&x| x >= 5.0));
        assert_eq!(pe, vec![48.0, 31.0, 12.0, 6.0]);
    }

    #[test]
    fn poisson_cells_sum_to_one() {
        let c = poisson_cells(4.0, 12);
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((c[0] - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn three_se_level() {
        assert!((within_se_alpha(3.0) - 0.0026998).abs() < 1e-6);
    }
}
