//! Closed-form laws of the process: branch depths, population size,
//! tree height, total progeny and the Poisson intensities of the
//! genealogical and historical point-processes.

use alloc::format;

use crate::math::{ln, powi, sqrt};
use crate::{Error, Result};

/// Law of a real random variable with closed-form density, distribution
/// function and quantile.
pub trait ContinuousLaw {
    /// Closed support `(lo, hi)`.
    fn support(&self) -> (f64, f64);
    fn pdf(&self, x: f64) -> Result<f64>;
    fn cdf(&self, x: f64) -> Result<f64>;
    fn quantile(&self, u: f64) -> Result<f64>;
}

/// Law of an integer random variable.
pub trait DiscreteLaw {
    /// Smallest value with positive mass.
    fn min_value(&self) -> i64;
    fn pmf(&self, k: i64) -> Result<f64>;
    fn cdf(&self, k: i64) -> Result<f64>;
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {x}")))
    }
}

fn check_unit(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::domain(format!("probability {u} outside [0, 1]")))
    }
}

fn check_in(x: f64, lo: f64, hi: f64) -> Result<()> {
    if x >= lo && x <= hi {
        Ok(())
    } else {
        Err(Error::domain(format!("{x} outside [{lo}, {hi}]")))
    }
}

/// Depth below `t` of a branch point of the genealogy of the individuals
/// alive at `t`; equivalently the height of a tree conditioned to die
/// before `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchDepthLaw {
    t: f64,
}

pub fn branch_depth_law(t: f64) -> Result<BranchDepthLaw> {
    check_positive("t", t)?;
    Ok(BranchDepthLaw { t })
}

impl ContinuousLaw for BranchDepthLaw {
    fn support(&self) -> (f64, f64) {
        (0.0, self.t)
    }

    fn pdf(&self, tau: f64) -> Result<f64> {
        check_in(tau, 0.0, self.t)?;
        let t = self.t;
        Ok((1.0 + t) / t / ((1.0 + tau) * (1.0 + tau)))
    }

    fn cdf(&self, tau: f64) -> Result<f64> {
        check_in(tau, 0.0, self.t)?;
        let t = self.t;
        Ok(((1.0 + t) / t * tau / (1.0 + tau)).min(1.0))
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        let t = self.t;
        Ok(u * t / (1.0 + t - u * t))
    }
}

/// Depth law of the continuum genealogy restricted to `[delta, t)`:
/// density proportional to `1/tau^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSquareLaw {
    delta: f64,
    t: f64,
}

pub fn inverse_square_law(delta: f64, t: f64) -> Result<InverseSquareLaw> {
    check_positive("delta", delta)?;
    check_positive("t", t)?;
    if delta >= t {
        return Err(Error::param("delta", format!("must be below t = {t}, got {delta}")));
    }
    Ok(InverseSquareLaw { delta, t })
}

impl InverseSquareLaw {
    /// Total intensity mass `1/delta - 1/t`.
    pub fn mass(&self) -> f64 {
        1.0 / self.delta - 1.0 / self.t
    }
}

impl ContinuousLaw for InverseSquareLaw {
    fn support(&self) -> (f64, f64) {
        (self.delta, self.t)
    }

    fn pdf(&self, tau: f64) -> Result<f64> {
        check_in(tau, self.delta, self.t)?;
        Ok(1.0 / (tau * tau) / self.mass())
    }

    fn cdf(&self, tau: f64) -> Result<f64> {
        check_in(tau, self.delta, self.t)?;
        Ok(((1.0 / self.delta - 1.0 / tau) / self.mass()).min(1.0))
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        Ok(1.0 / (1.0 / self.delta - u * self.mass()))
    }
}

/// Number of individuals alive at `t` in an unconditioned tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationLaw {
    t: f64,
}

pub fn population_law(t: f64) -> Result<PopulationLaw> {
    check_positive("t", t)?;
    Ok(PopulationLaw { t })
}

impl DiscreteLaw for PopulationLaw {
    fn min_value(&self) -> i64 {
        0
    }

    fn pmf(&self, k: i64) -> Result<f64> {
        if k < 0 {
            return Err(Error::domain(format!("negative count {k}")));
        }
        let t = self.t;
        if k == 0 {
            return Ok(t / (1.0 + t));
        }
        let r = t / (1.0 + t);
        Ok(powi(r, (k - 1) as i32) / ((1.0 + t) * (1.0 + t)))
    }

    fn cdf(&self, k: i64) -> Result<f64> {
        if k < 0 {
            return Err(Error::domain(format!("negative count {k}")));
        }
        let r = self.t / (1.0 + self.t);
        Ok(1.0 - powi(r, k as i32) / (1.0 + self.t))
    }
}

/// Number of individuals alive at `t` given that there is at least one:
/// geometric on `{1, 2, ...}` with success probability `1/(1+t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtantCountLaw {
    t: f64,
}

pub fn extant_count_law(t: f64) -> Result<ExtantCountLaw> {
    check_positive("t", t)?;
    Ok(ExtantCountLaw { t })
}

impl DiscreteLaw for ExtantCountLaw {
    fn min_value(&self) -> i64 {
        1
    }

    fn pmf(&self, k: i64) -> Result<f64> {
        if k < 1 {
            return Err(Error::domain(format!("count {k} below 1")));
        }
        let r = self.t / (1.0 + self.t);
        Ok(powi(r, (k - 1) as i32) / (1.0 + self.t))
    }

    fn cdf(&self, k: i64) -> Result<f64> {
        if k < 1 {
            return Err(Error::domain(format!("count {k} below 1")));
        }
        let r = self.t / (1.0 + self.t);
        Ok(1.0 - powi(r, k as i32))
    }
}

/// Probability that the tree reaches height `tau`.
pub fn height_survival(tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("height {tau} is negative")));
    }
    Ok(1.0 / (1.0 + tau))
}

/// Generating function of the total number of individuals of an
/// unconditioned tree.
pub fn progeny_pgf(x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(1.0 - sqrt(1.0 - x))
}

/// Probability that an unconditioned tree holds at least one mark when each
/// individual is marked with probability `p`.
pub fn mark_prob(p: f64) -> Result<f64> {
    check_unit(p)?;
    Ok(sqrt(p))
}

/// Intensity functions of the point-processes. Each returns the density at
/// a point and a domain error outside the stated support.
pub mod intensity {
    use super::*;

    fn open_in(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
        if x > lo && x < hi {
            Ok(())
        } else {
            Err(Error::domain(format!("{name} = {x} outside ({lo}, {hi})")))
        }
    }

    /// Continuum genealogy on `[0,1] x (0,t)`: `1/tau^2`.
    pub fn pi_intensity(ell: f64, tau: f64, t: f64) -> Result<f64> {
        check_in(ell, 0.0, 1.0)?;
        open_in("tau", tau, 0.0, t)?;
        Ok(1.0 / (tau * tau))
    }

    /// Depth density of the genealogy of `n` individuals at `t_n`, after both
    /// coordinates are divided by `n`, taken with respect to the counting
    /// measure of mass `1/n` on the index grid times Lebesgue measure in depth.
    /// Tends to `1/tau^2` when `t_n/n` converges.
    pub fn discrete_rescaled(tau: f64, n: u64, t_n: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        check_positive("t_n", t_n)?;
        let nf = n as f64;
        open_in("tau", tau, 0.0, t_n / nf)?;
        let s = 1.0 + nf * tau;
        Ok(nf * nf / (s * s) * (1.0 + t_n) / t_n)
    }

    /// Attachment depth and height of the subtrees hanging on one side of a
    /// branch at depth `t_i`.
    pub fn subtree_discrete(tau: f64, h: f64, t_i: f64) -> Result<f64> {
        open_in("tau", tau, 0.0, t_i)?;
        open_in("h", h, 0.0, tau)?;
        Ok(1.0 / ((1.0 + h) * (1.0 + h)) * (1.0 + tau) / tau)
    }

    /// Continuum counterpart of [`subtree_discrete`]: `1/h^2`.
    pub fn subtree_continuum(tau: f64, h: f64, t_ell: f64) -> Result<f64> {
        open_in("tau", tau, 0.0, t_ell)?;
        open_in("h", h, 0.0, tau)?;
        Ok(1.0 / (h * h))
    }

    fn first_set_support(tau: f64, kappa: f64, h: f64, p: f64) -> Result<()> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("p = {p} outside (0, 1]")));
        }
        open_in("tau", tau, 0.0, h)?;
        open_in("kappa", kappa, 0.0, h - tau)
    }

    /// First set along the spine of a tree of height `h` with marks at
    /// rate `p`, as printed with the `1/sqrt(p)` factor.
    pub fn first_set_discrete(tau: f64, kappa: f64, h: f64, p: f64) -> Result<f64> {
        first_set_support(tau, kappa, h, p)?;
        Ok(1.0 / sqrt(p) / ((1.0 + kappa) * (1.0 + kappa)) * (1.0 + tau) / tau)
    }

    /// Continuum counterpart of [`first_set_discrete`]: `1/(sqrt(p) kappa^2)`.
    pub fn first_set_continuum(tau: f64, kappa: f64, h: f64, p: f64) -> Result<f64> {
        first_set_support(tau, kappa, h, p)?;
        Ok(1.0 / sqrt(p) / (kappa * kappa))
    }

    /// Mass of [`first_set_continuum`] over `kappa > kappa_min`.
    pub fn first_set_mass(h: f64, p: f64, kappa_min: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::domain(format!("p = {p} must be positive")));
        }
        Ok(triangle_mass(h, kappa_min)? / sqrt(p))
    }

    /// Mass of [`subtree_continuum`] over `h > kappa_min` for a branch at
    /// depth `t_ell`.
    pub fn subtree_mass(t_ell: f64, kappa_min: f64) -> Result<f64> {
        triangle_mass(t_ell, kappa_min)
    }

    /// `∫_0^top ∫_{kmin}^{tau} dk/k^2 dtau`, zero when `kmin >= top`.
    fn triangle_mass(top: f64, kappa_min: f64) -> Result<f64> {
        check_positive("kappa_min", kappa_min)?;
        if !(top >= 0.0 && top.is_finite()) {
            return Err(Error::domain(format!("height {top} is not a nonnegative number")));
        }
        if kappa_min >= top {
            return Ok(0.0);
        }
        Ok((top - kappa_min) / kappa_min - ln(top / kappa_min))
    }
}

#[cfg(test)]
mod tests {
    use super::intensity::*;
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn branch_depth_values() {
        let law = branch_depth_law(1.0).unwrap();
        assert_eq!(law.pdf(0.0).unwrap(), 2.0);
        assert_eq!(law.cdf(1.0).unwrap(), 1.0);
        assert!(close(law.quantile(0.5).unwrap(), 1.0 / 3.0, 1e-15));
        assert!(law.pdf(1.5).is_err());
        assert!(law.cdf(-0.1).is_err());
        assert!(branch_depth_law(0.0).is_err());
    }

    #[test]
    fn population_values() {
        let law = population_law(1.0).unwrap();
        assert_eq!(law.pmf(0).unwrap(), 0.5);
        assert_eq!(law.pmf(1).unwrap(), 0.25);
        assert!(law.pmf(-1).is_err());
        for t in [0.3, 1.0, 4.0] {
            let law = population_law(t).unwrap();
            let (mut total, mut mean) = (0.0, 0.0);
            for k in 0..4000 {
                let p = law.pmf(k).unwrap();
                total += p;
                mean += k as f64 * p;
            }
            assert!(close(total, 1.0, 1e-12), "t={t}");
            assert!(close(mean, 1.0, 1e-9), "t={t}");
            let partial: f64 = (0..=7).map(|k| law.pmf(k).unwrap()).sum();
            assert!(close(law.cdf(7).unwrap(), partial, 1e-15));
        }
    }

    #[test]
    fn extant_count_identity() {
        for t in [0.5, 1.0, 3.0] {
            let cond = extant_count_law(t).unwrap();
            let pop = population_law(t).unwrap();
            let surv = height_survival(t).unwrap();
            for k in 1..60 {
                let lhs = cond.pmf(k).unwrap() * surv;
                assert!(close(lhs, pop.pmf(k).unwrap(), 1e-15 * lhs.max(1e-300)));
            }
            assert!(close(1.0 - pop.pmf(0).unwrap(), surv, 1e-15));
        }
        assert_eq!(extant_count_law(1.0).unwrap().pmf(1).unwrap(), 0.5);
        assert!(extant_count_law(1.0).unwrap().pmf(0).is_err());
    }

    #[test]
    fn height_and_progeny() {
        assert_eq!(height_survival(0.0).unwrap(), 1.0);
        assert_eq!(height_survival(1.0).unwrap(), 0.5);
        assert!(height_survival(-1.0).is_err());
        assert_eq!(progeny_pgf(0.75).unwrap(), 0.5);
        assert_eq!(progeny_pgf(1.0).unwrap(), 1.0);
        assert!(close(mark_prob(0.04).unwrap(), 0.2, 1e-15));
        assert!(progeny_pgf(1.1).is_err());
        assert!(mark_prob(-0.1).is_err());
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            assert!(close(mark_prob(p).unwrap(), 1.0 - progeny_pgf(1.0 - p).unwrap(), 1e-15));
        }
    }

    #[test]
    fn rescaled_intensity_limit() {
        let ratio = discrete_rescaled(0.5, 1_000_000, 1e6).unwrap() * 0.25;
        assert!(close(ratio, 1.0, 1e-5), "{ratio}");
        assert!(discrete_rescaled(2.0, 10, 10.0).is_err());
    }

    #[test]
    fn subtree_marginal_is_one() {
        // ∫_0^tau dh/(1+h)^2 = tau/(1+tau), times (1+tau)/tau
        for k in 1..100 {
            let tau = k as f64 / 50.0;
            let inner = tau / (1.0 + tau);
            let v = subtree_discrete(tau, tau / 2.0, 3.0).unwrap() * (1.0 + tau / 2.0).powi(2);
            assert!(close(v * inner, 1.0, 1e-12));
        }
        assert!(subtree_discrete(0.5, 0.6, 1.0).is_err());
        assert_eq!(subtree_continuum(0.5, 0.25, 1.0).unwrap(), 16.0);
        assert!(pi_intensity(1.2, 0.5, 1.0).is_err());
        assert_eq!(pi_intensity(0.3, 0.5, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn truncated_masses() {
        let m = first_set_mass(1.0, 0.25, 0.1).unwrap();
        assert!(close(m, 2.0 * (9.0 - 10f64.ln()), 1e-12));
        assert!(close(m, 13.394_829, 1e-5));
        let s = subtree_mass(0.5, 0.1).unwrap();
        assert!(close(s, 4.0 - 5f64.ln(), 1e-12));
        assert_eq!(subtree_mass(0.05, 0.1).unwrap(), 0.0);
        assert_eq!(first_set_continuum(0.2, 0.5, 1.0, 0.25).unwrap(), 8.0);
        assert!(first_set_continuum(0.6, 0.5, 1.0, 0.25).is_err());
    }

    #[test]
    fn inverse_square_values() {
        let law = inverse_square_law(0.1, 1.0).unwrap();
        assert!(close(law.mass(), 9.0, 1e-12));
        assert!(close(law.quantile(0.5).unwrap(), 2.0 / 11.0, 1e-15));
        assert!(inverse_square_law(1.0, 1.0).is_err());
    }
}
