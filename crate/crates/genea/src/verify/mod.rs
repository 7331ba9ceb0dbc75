//! Monte Carlo verification of the exact laws and of the large-population
//! limits.
//!
//! Every check produces a [`LawReport`]. A target bundles one or more reports
//! into a [`VerifyOutcome`]; the convergence experiments also attach a
//! [`ConvergenceReport`] with one row per population size.

mod convergence;
mod targets;

use std::collections::BTreeMap;

use genea_core::laws::ContinuousLaw;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats;
use crate::{Error, Result};

pub use convergence::{theorem5, theorem9, ConvergenceReport, ConvergenceRow, Normalization, Theorem5Params, Theorem9Params};
pub use targets::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Ks,
    KsTwoSample,
    ChiSquare,
    PoissonCount,
    Proportion,
}

/// Outcome of one statistical test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub name: String,
    pub kind: TestKind,
    pub sample_size: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub params: BTreeMap<String, f64>,
}

impl LawReport {
    pub fn new(name: &str, kind: TestKind, sample_size: usize, statistic: f64, p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        LawReport {
            name: name.to_string(),
            kind,
            sample_size,
            statistic,
            p_value,
            alpha,
            passed: p_value > alpha,
            seed: None,
            params: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn rename(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// What a sample is compared with.
pub enum Reference<'a> {
    /// A continuous law (one-sample KS).
    Law(&'a dyn ContinuousLaw),
    /// A distribution function (one-sample KS).
    Cdf(&'a dyn Fn(f64) -> f64),
    /// Another sample (two-sample KS).
    Sample(&'a [f64]),
    /// Expected bin counts; the samples are the observed counts (chi-square
    /// with `bins - 1` degrees of freedom).
    Expected(&'a [f64]),
    /// Poisson law with this mean; the samples are observed counts.
    Poisson(f64),
}

const MIN_KS_SAMPLES: usize = 10;
/// Smallest expected count admitted in a chi-square cell.
pub const MIN_EXPECTED: f64 = 5.0;

/// Runs the test implied by `reference` at level `alpha`.
pub fn goodness_of_fit(name: &str, samples: &[f64], reference: Reference<'_>, alpha: f64) -> Result<LawReport> {
    if samples.is_empty() {
        return Err(Error::param("samples", "empty sample"));
    }
    match reference {
        Reference::Law(law) => {
            let cdf = |x: f64| {
                let (lo, hi) = law.support();
                law.cdf(x.clamp(lo, hi)).unwrap_or(f64::NAN)
            };
            goodness_of_fit(name, samples, Reference::Cdf(&cdf), alpha)
        }
        Reference::Cdf(cdf) => {
            if samples.len() < MIN_KS_SAMPLES {
                return Err(Error::param("samples", format!("KS needs at least {MIN_KS_SAMPLES} samples")));
            }
            let d = stats::ks_statistic(samples, cdf)?;
            if !d.is_finite() {
                return Err(Error::param("reference", "distribution function is not finite on the sample"));
            }
            let p = stats::ks_p_value(d, samples.len() as f64);
            Ok(LawReport::new(name, TestKind::Ks, samples.len(), d, p, alpha))
        }
        Reference::Sample(other) => {
            if samples.len() < MIN_KS_SAMPLES || other.len() < MIN_KS_SAMPLES {
                return Err(Error::param("samples", format!("KS needs at least {MIN_KS_SAMPLES} samples")));
            }
            let d = stats::ks_two_sample_statistic(samples, other)?;
            let (n, m) = (samples.len() as f64, other.len() as f64);
            let p = stats::ks_p_value(d, n * m / (n + m));
            Ok(LawReport::new(name, TestKind::KsTwoSample, samples.len() + other.len(), d, p, alpha))
        }
        Reference::Expected(expected) => {
            let total: f64 = expected.iter().sum();
            if !(total > 0.0) {
                return Err(Error::param("reference", "expected counts sum to zero"));
            }
            let (stat, p) = stats::chi_square(samples, expected, expected.len().saturating_sub(1), MIN_EXPECTED)?;
            let n = samples.iter().sum::<f64>() as usize;
            Ok(LawReport::new(name, TestKind::ChiSquare, n, stat, p, alpha))
        }
        Reference::Poisson(mean) => {
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(Error::param("reference", format!("Poisson mean {mean} is not positive")));
            }
            let (stat, p, _) = poisson_count_fit(samples, mean)?;
            Ok(LawReport::new(name, TestKind::PoissonCount, samples.len(), stat, p, alpha).param("mean", mean))
        }
    }
}

/// Chi-square fit of integer counts to Poisson(`mean`), cells pooled until
/// each expects at least [`MIN_EXPECTED`]. Returns statistic, p-value, cells.
pub fn poisson_count_fit(counts: &[f64], mean: f64) -> Result<(f64, f64, usize)> {
    let max = counts.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;
    let cells = max + 2;
    let probs = stats::poisson_cells(mean, cells);
    let mut observed = vec![0.0; cells];
    for &c in counts {
        if !(c >= 0.0 && c.fract() == 0.0) {
            return Err(Error::param("samples", format!("count {c} is not a nonnegative integer")));
        }
        observed[c as usize] += 1.0;
    }
    let n = counts.len() as f64;
    let expected: Vec<f64> = probs.iter().map(|p| p * n).collect();
    let (o, e) = stats::pool_small_cells(&observed, &expected, MIN_EXPECTED);
    let (stat, p) = stats::chi_square(&o, &e, o.len().saturating_sub(1), MIN_EXPECTED)?;
    Ok((stat, p, o.len()))
}

/// Proportion test: `hits` out of `trials` against probability `p0`,
/// passing when within `k` standard errors.
pub fn proportion_test(name: &str, hits: usize, trials: usize, p0: f64, k: f64) -> LawReport {
    let phat = hits as f64 / trials as f64;
    let se = (p0 * (1.0 - p0) / trials as f64).sqrt();
    let z = (phat - p0) / se;
    LawReport::new(
        name,
        TestKind::Proportion,
        trials,
        z,
        stats::normal_two_sided(z),
        stats::within_se_alpha(k),
    )
    .param("observed", phat)
    .param("expected", p0)
}

/// A set of reports for one verification target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub target: String,
    pub passed: bool,
    pub reports: Vec<LawReport>,
    /// Reported alongside the verdict but not part of it.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnostics: Vec<LawReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub convergence: Option<ConvergenceReport>,
}

impl VerifyOutcome {
    pub fn from_reports(target: &str, reports: Vec<LawReport>) -> Self {
        VerifyOutcome {
            target: target.to_string(),
            passed: reports.iter().all(|r| r.passed),
            reports,
            diagnostics: Vec::new(),
            convergence: None,
        }
    }

    /// Flat CSV: one row per report, then one row per convergence grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,name,kind,sample_size,statistic,p_value,alpha,passed\n");
        for r in self.reports.iter().chain(&self.diagnostics) {
            out.push_str(&format!(
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{}\n",
                self.target,
                r.name,
                serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                r.sample_size,
                r.statistic,
                r.p_value,
                r.alpha,
                r.passed
            ));
        }
        if let Some(c) = &self.convergence {
            out.push('\n');
            out.push_str(&c.to_csv());
        }
        out
    }
}

/// Maps `f` over replicate indices in parallel and returns results in index
/// order, so reductions over them do not depend on scheduling.
pub(crate) fn replicate<T: Send>(count: usize, f: impl Fn(u32) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count as u32).into_par_iter().map(f).collect()
}
