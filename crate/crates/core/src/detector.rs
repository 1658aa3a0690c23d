//! Per-CR energy detection.
//!
//! The conventional detector compares the event energy with a fixed CFAR
//! threshold `λ`. The dual-threshold detector keeps the last `L` energies and
//! noise-variance estimates (current event included). Their mean energy
//! predicts whether the primary user is on. Their max/mean variance ratio
//! estimates the noise uncertainty factor `ρ`. The detector then tests the
//! current energy against `λ/ρ` when the user is predicted on and against
//! `ρλ` when it is predicted off.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Absent,
    Present,
}

impl Decision {
    pub fn is_present(self) -> bool {
        self == Decision::Present
    }

    pub fn from_present(present: bool) -> Self {
        if present {
            Decision::Present
        } else {
            Decision::Absent
        }
    }
}

/// `Σ y²` over one sensing window.
pub fn compute_energy(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return domain("cannot compute the energy of an empty window");
    }
    Ok(samples.iter().map(|y| y * y).sum())
}

/// Mean power of a noise-only reference window.
pub fn estimate_noise_variance(noise_samples: &[f64]) -> Result<f64> {
    if noise_samples.is_empty() {
        return domain("cannot estimate noise variance from an empty window");
    }
    let v = compute_energy(noise_samples)? / noise_samples.len() as f64;
    if v <= 0.0 {
        return Err(Error::Numerical("noise reference window has zero power".into()));
    }
    Ok(v)
}

/// Fixed-threshold decision; equality counts as present.
pub fn decide_conventional(current_energy: f64, lambda: f64) -> Decision {
    Decision::from_present(current_energy >= lambda)
}

/// `λ/ρ` when the history predicts the user is on (`e_avg ≥ λ`), `ρλ` otherwise.
pub fn select_threshold(e_avg: f64, lambda: f64, rho: f64) -> Result<f64> {
    if !(rho >= 1.0) {
        return domain(format!("rho must be >= 1, got {rho}"));
    }
    if !(lambda > 0.0) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    Ok(if e_avg >= lambda { lambda / rho } else { rho * lambda })
}

/// Rolling history of one CR: paired energies and noise-variance estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CrState {
    energies: VecDeque<f64>,
    sigma2_estimates: VecDeque<f64>,
    capacity: usize,
}

impl CrState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return domain(format!("history length must be at least 2, got {capacity}"));
        }
        Ok(Self {
            energies: VecDeque::with_capacity(capacity),
            sigma2_estimates: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.energies.len() == self.capacity
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.energies.iter().copied()
    }

    pub fn sigma2_estimates(&self) -> impl Iterator<Item = f64> + '_ {
        self.sigma2_estimates.iter().copied()
    }

    /// Appends one event, evicting the oldest pair once `L` are stored.
    pub fn push_history(&mut self, energy: f64, sigma2_hat: f64) -> Result<()> {
        if !(sigma2_hat > 0.0 && sigma2_hat.is_finite()) {
            return domain(format!("noise variance estimate must be positive, got {sigma2_hat}"));
        }
        if self.is_full() {
            self.energies.pop_front();
            self.sigma2_estimates.pop_front();
        }
        self.energies.push_back(energy);
        self.sigma2_estimates.push_back(sigma2_hat);
        Ok(())
    }

    fn require_full(&self) -> Result<()> {
        if !self.is_full() {
            return Err(Error::State(format!(
                "history holds {} of {} events; warm-up not complete",
                self.len(),
                self.capacity
            )));
        }
        Ok(())
    }

    /// Mean of the stored energies.
    pub fn average_energy(&self) -> Result<f64> {
        self.require_full()?;
        Ok(self.energies.iter().sum::<f64>() / self.capacity as f64)
    }

    /// Noise uncertainty factor: max over mean of the stored variance estimates.
    pub fn estimate_rho(&self) -> Result<f64> {
        self.require_full()?;
        let (mut max, mut min, mut sum) = (f64::MIN, f64::MAX, 0.0);
        for &s in &self.sigma2_estimates {
            max = max.max(s);
            min = min.min(s);
            sum += s;
        }
        if max == min {
            return Ok(1.0);
        }
        let rho = max / (sum / self.capacity as f64);
        // max >= mean, up to rounding in the sum.
        Ok(rho.max(1.0))
    }

    /// Dual-threshold decision for the event most recently pushed.
    pub fn decide_local(&self, current_energy: f64, lambda: f64) -> Result<LocalDecision> {
        let e_avg = self.average_energy()?;
        let rho_hat = self.estimate_rho()?;
        let threshold_used = select_threshold(e_avg, lambda, rho_hat)?;
        Ok(LocalDecision {
            bit: Decision::from_present(current_energy >= threshold_used),
            threshold_used,
            rho_hat,
            e_avg,
            predicted_present: e_avg >= lambda,
        })
    }
}

/// Diagnostic record of one dual-threshold decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalDecision {
    pub bit: Decision,
    pub threshold_used: f64,
    pub rho_hat: f64,
    pub e_avg: f64,
    pub predicted_present: bool,
}

/// Outcome of feeding one event to a [`DualThresholdDetector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub bit: Decision,
    /// True while the history is still filling; the bit then comes from the
    /// fixed-threshold rule.
    pub warmup: bool,
    pub detail: Option<LocalDecision>,
}

/// Stateful dual-threshold detector for one CR.
#[derive(Debug, Clone)]
pub struct DualThresholdDetector {
    state: CrState,
}

impl DualThresholdDetector {
    pub fn new(history_len: usize) -> Result<Self> {
        Ok(Self {
            state: CrState::new(history_len)?,
        })
    }

    pub fn state(&self) -> &CrState {
        &self.state
    }

    /// Records the event and decides on it. During the first `L − 1` events the
    /// fixed threshold `λ` is used.
    pub fn observe(&mut self, energy: f64, sigma2_hat: f64, lambda: f64) -> Result<Observation> {
        self.state.push_history(energy, sigma2_hat)?;
        if !self.state.is_full() {
            return Ok(Observation {
                bit: decide_conventional(energy, lambda),
                warmup: true,
                detail: None,
            });
        }
        let detail = self.state.decide_local(energy, lambda)?;
        Ok(Observation {
            bit: detail.bit,
            warmup: false,
            detail: Some(detail),
        })
    }
}
