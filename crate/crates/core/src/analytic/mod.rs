//! Closed-form detection theory for energy detectors.
//!
//! Everything here works with the Gaussian (large-`N`) approximation of the
//! received energy: `N(Nσ², 2Nσ⁴)` without the primary signal and
//! `N(Nσ²(1+γ), 2Nσ⁴(1+γ)²)` with it.

mod gauss;
mod quadrature;

use serde::{Deserialize, Serialize};

pub use gauss::{clamp_probability, normal_pdf, q_function, q_inverse};
pub use quadrature::{integrate, Integral};

use crate::error::{domain, Error, Result};

/// Absolute error target for the fading-average integrals.
pub const QUADRATURE_TOL: f64 = 1e-8;
const MAX_INTERVALS: usize = 4000;
/// Truncation point (in units of the mean SNR) for the fallback integral;
/// `e^-40` is below 1e-17.
const TRUNCATION_MEANS: f64 = 40.0;

/// Parameters of a single energy detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Samples per sensing event.
    pub n_samples: usize,
    /// Nominal noise variance (linear power).
    pub sigma2: f64,
    /// Instantaneous SNR, linear. Used by the AWGN formulas.
    pub snr: f64,
    /// Average SNR, linear. Used by the Rayleigh formulas.
    pub snr_bar: f64,
}

impl DetectorParams {
    pub fn new(n_samples: usize, sigma2: f64, snr: f64, snr_bar: f64) -> Result<Self> {
        let p = Self {
            n_samples,
            sigma2,
            snr,
            snr_bar,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return domain("n_samples must be at least 1");
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return domain(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return domain(format!("snr must be nonnegative, got {}", self.snr));
        }
        if !(self.snr_bar >= 0.0 && self.snr_bar.is_finite()) {
            return domain(format!("snr_bar must be nonnegative, got {}", self.snr_bar));
        }
        Ok(())
    }

    pub fn with_snr(self, snr: f64) -> Self {
        Self { snr, ..self }
    }

    /// Mean energy without the primary signal, `Nσ²`.
    pub fn noise_energy(&self) -> f64 {
        self.n_samples as f64 * self.sigma2
    }

    /// Standard deviation of the noise-only energy, `√(2N)σ²`.
    fn noise_energy_std(&self) -> f64 {
        (2.0 * self.n_samples as f64).sqrt() * self.sigma2
    }
}

/// Parameters of the dual-threshold detector theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposedParams {
    /// Length of the energy / variance history, including the current event.
    pub history_len: usize,
    /// Number of history events (current one included) with the primary user active.
    pub active_count: usize,
    /// Noise uncertainty factor, at least 1.
    pub rho: f64,
    pub base: DetectorParams,
}

impl ProposedParams {
    pub fn new(history_len: usize, active_count: usize, rho: f64, base: DetectorParams) -> Result<Self> {
        let p = Self {
            history_len,
            active_count,
            rho,
            base,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.history_len < 2 {
            return domain(format!("history_len must be at least 2, got {}", self.history_len));
        }
        if self.active_count > self.history_len {
            return domain(format!(
                "active_count {} exceeds history_len {}",
                self.active_count, self.history_len
            ));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            return domain(format!("rho must be >= 1, got {}", self.rho));
        }
        Ok(())
    }
}

/// One point of a theoretical ROC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    pub p_fa: f64,
    pub p_d: f64,
    pub threshold: f64,
}

/// Hard-decision combining rule at the fusion center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FusionRule {
    And,
    Or,
    /// At least `l` of the `K` reports must say "present".
    Majority(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub rule: FusionRule,
    pub k_crs: usize,
}

impl FusionSpec {
    pub fn new(rule: FusionRule, k_crs: usize) -> Result<Self> {
        let s = Self { rule, k_crs };
        s.validate()?;
        Ok(s)
    }

    /// Majority rule with `l = ⌈K/2⌉`.
    pub fn majority_default(k_crs: usize) -> Result<Self> {
        Self::new(FusionRule::Majority(k_crs.div_ceil(2)), k_crs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_crs == 0 {
            return domain("k_crs must be at least 1");
        }
        if let FusionRule::Majority(l) = self.rule {
            if l == 0 || l > self.k_crs {
                return domain(format!("majority l = {l} must lie in [1, {}]", self.k_crs));
            }
        }
        Ok(())
    }

    /// Minimum number of "present" votes needed for a global "present".
    pub fn min_votes(&self) -> usize {
        match self.rule {
            FusionRule::And => self.k_crs,
            FusionRule::Or => 1,
            FusionRule::Majority(l) => l,
        }
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return domain(format!("threshold must be positive and finite, got {threshold}"));
    }
    Ok(())
}

/// Threshold meeting a target false-alarm probability under the nominal noise model.
pub fn cfar_threshold(p_fa_target: f64, params: &DetectorParams) -> Result<f64> {
    params.validate()?;
    let z = q_inverse(p_fa_target)?;
    let lambda = params.noise_energy() + params.noise_energy_std() * z;
    if lambda <= 0.0 {
        return domain(format!(
            "target P_fa {p_fa_target} needs a nonpositive threshold ({lambda}) at N = {}",
            params.n_samples
        ));
    }
    Ok(lambda)
}

/// `Q((λ − μ)/s)` for a Gaussian energy with mean `Nσ²(1+γ)` and std `√(2N)σ²(1+γ)`.
fn gaussian_exceedance(threshold: f64, params: &DetectorParams, snr: f64) -> Result<f64> {
    let scale = 1.0 + snr;
    let mean = params.noise_energy() * scale;
    let std = params.noise_energy_std() * scale;
    q_function((threshold - mean) / std)
}

/// False-alarm probability of a fixed-threshold energy detector.
pub fn pfa_conventional(threshold: f64, params: &DetectorParams) -> Result<f64> {
    params.validate()?;
    check_threshold(threshold)?;
    gaussian_exceedance(threshold, params, 0.0)
}

/// Detection probability over an AWGN channel at SNR `params.snr`.
pub fn pd_awgn(threshold: f64, params: &DetectorParams) -> Result<f64> {
    params.validate()?;
    check_threshold(threshold)?;
    gaussian_exceedance(threshold, params, params.snr)
}

/// Averages `g(γ)` over an exponential SNR density with mean `snr_bar`.
///
/// The primary route maps `γ = −γ̄·ln u` onto `u ∈ (0, 1)`; if that fails to
/// converge the integral is truncated at `40·γ̄` instead.
fn rayleigh_average<G>(snr_bar: f64, mut g: G) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let transformed = integrate(
        |u: f64| g(-snr_bar * u.ln()),
        0.0,
        1.0,
        QUADRATURE_TOL,
        MAX_INTERVALS,
    );
    let value = match transformed {
        Ok(r) => r.value,
        Err(Error::Numerical(first)) => {
            let truncated = integrate(
                |t: f64| Ok(g(snr_bar * t)? * (-t).exp()),
                0.0,
                TRUNCATION_MEANS,
                QUADRATURE_TOL,
                MAX_INTERVALS,
            )
            .map_err(|e| Error::Numerical(format!("{first}; truncated fallback: {e}")))?;
            truncated.value
        }
        Err(e) => return Err(e),
    };
    clamp_probability(value, "fading-averaged probability")
}

/// Detection probability averaged over Rayleigh fading with mean SNR `params.snr_bar`.
pub fn pd_rayleigh(threshold: f64, params: &DetectorParams) -> Result<f64> {
    params.validate()?;
    check_threshold(threshold)?;
    if params.snr_bar == 0.0 {
        return pfa_conventional(threshold, params);
    }
    rayleigh_average(params.snr_bar, |g| gaussian_exceedance(threshold, params, g))
}

/// Mean and variance of the `L`-event energy average when `M` of the `L`
/// events carry the primary signal at SNR `base.snr`.
pub fn avg_energy_moments(p: &ProposedParams) -> Result<(f64, f64)> {
    p.validate()?;
    let l = p.history_len as f64;
    let m = p.active_count as f64;
    let n = p.base.n_samples as f64;
    let s2 = p.base.sigma2;
    let g1 = 1.0 + p.base.snr;
    let mean = (m / l) * n * s2 * g1 + ((l - m) / l) * n * s2;
    let var = (m / (l * l)) * 2.0 * n * s2 * s2 * g1 * g1 + ((l - m) / (l * l)) * 2.0 * n * s2 * s2;
    Ok((mean, var))
}

/// Pieces of the dual-threshold probability: the predictor weight
/// `w = P(E_avg ≥ λ)` and the exceedance probabilities at `λ/ρ` and `ρλ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposedTerms {
    pub weight: f64,
    pub at_lowered: f64,
    pub at_raised: f64,
}

impl ProposedTerms {
    /// `w·(q_low − q_high) + q_high`.
    pub fn combine(&self) -> f64 {
        self.weight * (self.at_lowered - self.at_raised) + self.at_raised
    }
}

/// Decomposition used by [`pfa_proposed`] (`signal_snr = 0`) and
/// [`pd_proposed_awgn`] (`signal_snr = base.snr`).
pub fn proposed_terms(threshold: f64, p: &ProposedParams, signal_snr: f64) -> Result<ProposedTerms> {
    p.validate()?;
    check_threshold(threshold)?;
    let (mean, var) = avg_energy_moments(p)?;
    let weight = q_function((threshold - mean) / var.sqrt())?;
    let at_lowered = gaussian_exceedance(threshold / p.rho, &p.base, signal_snr)?;
    let at_raised = gaussian_exceedance(threshold * p.rho, &p.base, signal_snr)?;
    Ok(ProposedTerms {
        weight,
        at_lowered,
        at_raised,
    })
}

/// False-alarm probability of the dual-threshold detector.
///
/// `p.active_count` should describe a history whose current event is
/// signal-free (`M ≤ L − 1`).
pub fn pfa_proposed(threshold: f64, p: &ProposedParams) -> Result<f64> {
    if p.rho == 1.0 {
        return pfa_conventional(threshold, &p.base);
    }
    let terms = proposed_terms(threshold, p, 0.0)?;
    clamp_probability(terms.combine(), "proposed P_fa")
}

/// AWGN detection probability of the dual-threshold detector at SNR `p.base.snr`.
///
/// `p.active_count` should count the current, signal-bearing event (`M ≥ 1`).
pub fn pd_proposed_awgn(threshold: f64, p: &ProposedParams) -> Result<f64> {
    if p.rho == 1.0 {
        return pd_awgn(threshold, &p.base);
    }
    let terms = proposed_terms(threshold, p, p.base.snr)?;
    clamp_probability(terms.combine(), "proposed P_d")
}

/// Rayleigh-averaged detection probability of the dual-threshold detector.
pub fn pd_proposed_rayleigh(threshold: f64, p: &ProposedParams) -> Result<f64> {
    p.validate()?;
    check_threshold(threshold)?;
    let snr_bar = p.base.snr_bar;
    let at = |g: f64| {
        let local = ProposedParams {
            base: p.base.with_snr(g),
            ..*p
        };
        pd_proposed_awgn(threshold, &local)
    };
    if snr_bar == 0.0 {
        return at(0.0);
    }
    rayleigh_average(snr_bar, at)
}

/// Binomial coefficient as a float.
fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Global probability of a "present" decision when each of the `K` reports is
/// independently "present" with probability `p_single`.
pub fn fuse_probability(p_single: f64, spec: &FusionSpec) -> Result<f64> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&p_single) {
        return domain(format!("per-CR probability must lie in [0, 1], got {p_single}"));
    }
    let k = spec.k_crs;
    let value = match spec.rule {
        FusionRule::And => p_single.powi(k as i32),
        FusionRule::Or => 1.0 - (1.0 - p_single).powi(k as i32),
        // The extreme vote counts are exactly OR and AND.
        FusionRule::Majority(1) => 1.0 - (1.0 - p_single).powi(k as i32),
        FusionRule::Majority(l) if l == k => p_single.powi(k as i32),
        FusionRule::Majority(l) => (l..=k)
            .map(|t| binomial(k, t) * p_single.powi(t as i32) * (1.0 - p_single).powi((k - t) as i32))
            .sum(),
    };
    clamp_probability(value, "fused probability")
}
