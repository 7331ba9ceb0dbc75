//! Primitive random draws shared by every sampler.
//!
//! Exponential variables are produced by inverting the distribution function
//! on the open unit interval, so neither `0` nor `+inf` can come out.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::math;

/// Exponential(1) variable.
#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -math::ln(u)
}

/// Uniform variable on `(0, 1)`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Uniform variable on `[0, 1)`.
#[inline]
pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Bernoulli(p) trial. Always consumes exactly one draw, so streams stay
/// aligned whatever the value of `p`.
#[inline]
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    unit(rng) < p
}

/// Poisson(mean) count. `mean <= 0` yields 0 without consuming the stream.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => d.sample(rng) as u64,
        // only reachable for non-finite means, which callers never pass
        Err(_) => 0,
    }
}
