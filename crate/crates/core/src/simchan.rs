//! Radio environment: primary-user activity, BPSK primary signal, Rayleigh
//! block fading and AWGN whose variance wobbles from event to event.
//!
//! Noise uncertainty follows the usual dB-uniform model: every CR, every
//! sensing event, the true noise variance is `σ²·10^(u/10)` with
//! `u ~ U[−Δ, Δ]` dB.
//!
//! Samples are real-valued: real BPSK, a real fading amplitude with random
//! sign and `N(0, σ²)` noise, so a noise-only energy has mean `Nσ²` and
//! variance `2Nσ⁴`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Primary user absent.
    H0,
    /// Primary user present.
    H1,
}

impl Hypothesis {
    pub fn flipped(self) -> Self {
        match self {
            Hypothesis::H0 => Hypothesis::H1,
            Hypothesis::H1 => Hypothesis::H0,
        }
    }

    pub fn is_present(self) -> bool {
        self == Hypothesis::H1
    }
}

/// Physical-layer scenario shared by every CR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_samples: usize,
    pub k_crs: usize,
    pub snr_bar_db: f64,
    /// Half-width of the noise-variance wobble, dB.
    pub uncertainty_db: f64,
    pub sigma2_nominal: f64,
    /// Mean number of consecutive events the primary user holds one state.
    pub pu_dwell_events: f64,
    /// Long-run fraction of events with the primary user active.
    pub duty_cycle: f64,
    /// Length of the noise-only reference window granted to each CR per event.
    pub n_ref: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            k_crs: 1,
            snr_bar_db: -15.0,
            uncertainty_db: 1.0,
            sigma2_nominal: 1.0,
            pu_dwell_events: 50.0,
            duty_cycle: 0.5,
            n_ref: 1000,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return domain("n_samples must be at least 1");
        }
        if self.k_crs == 0 {
            return domain("k_crs must be at least 1");
        }
        if !self.snr_bar_db.is_finite() {
            return domain("snr_bar_db must be finite");
        }
        if !(self.uncertainty_db >= 0.0 && self.uncertainty_db.is_finite()) {
            return domain(format!("uncertainty_db must be >= 0, got {}", self.uncertainty_db));
        }
        if !(self.sigma2_nominal > 0.0 && self.sigma2_nominal.is_finite()) {
            return domain("sigma2_nominal must be positive");
        }
        if !(self.pu_dwell_events >= 1.0) {
            return domain(format!("pu_dwell_events must be >= 1, got {}", self.pu_dwell_events));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return domain(format!("duty_cycle must lie in (0, 1), got {}", self.duty_cycle));
        }
        let activity = self.activity();
        if activity.on_dwell < 1.0 || activity.off_dwell < 1.0 {
            return domain(format!(
                "duty cycle {} with dwell {} gives a state dwell below one event",
                self.duty_cycle, self.pu_dwell_events
            ));
        }
        if self.n_ref == 0 {
            return domain("n_ref must be at least 1");
        }
        Ok(())
    }

    pub fn snr_bar(&self) -> f64 {
        10f64.powf(self.snr_bar_db / 10.0)
    }

    pub fn activity(&self) -> PuActivity {
        PuActivity::from_duty(self.pu_dwell_events, self.duty_cycle)
    }
}

/// Two-state Markov model of primary-user activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuActivity {
    /// Mean ON run length, events.
    pub on_dwell: f64,
    /// Mean OFF run length, events.
    pub off_dwell: f64,
}

impl PuActivity {
    /// ON and OFF dwells averaging to `dwell` with the given long-run ON fraction.
    pub fn from_duty(dwell: f64, duty_cycle: f64) -> Self {
        Self {
            on_dwell: 2.0 * dwell * duty_cycle,
            off_dwell: 2.0 * dwell * (1.0 - duty_cycle),
        }
    }

    pub fn stationary_on(&self) -> f64 {
        self.on_dwell / (self.on_dwell + self.off_dwell)
    }

    pub fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Hypothesis {
        if rng.random::<f64>() < self.stationary_on() {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, current: Hypothesis, rng: &mut R) -> Hypothesis {
        let dwell = match current {
            Hypothesis::H0 => self.off_dwell,
            Hypothesis::H1 => self.on_dwell,
        };
        step_pu_activity(current, dwell, rng)
    }
}

/// Advances the activity chain one sensing event: the state flips with
/// probability `1/pu_dwell_events`.
pub fn step_pu_activity<R: Rng + ?Sized>(current: Hypothesis, pu_dwell_events: f64, rng: &mut R) -> Hypothesis {
    let u: f64 = rng.random();
    if u * pu_dwell_events < 1.0 {
        current.flipped()
    } else {
        current
    }
}

/// BPSK with equiprobable symbols `±√power`.
pub fn gen_bpsk<R: Rng + ?Sized>(n: usize, power: f64, rng: &mut R) -> Vec<f64> {
    let amp = power.sqrt();
    (0..n)
        .map(|_| if rng.random::<bool>() { amp } else { -amp })
        .collect()
}

/// Instantaneous SNR under Rayleigh fading: exponential with mean `snr_bar`.
pub fn draw_rayleigh_gamma<R: Rng + ?Sized>(snr_bar: f64, rng: &mut R) -> f64 {
    if snr_bar == 0.0 {
        return 0.0;
    }
    let e: f64 = Exp1.sample(rng);
    snr_bar * e
}

/// True noise variance for one CR and one event.
pub fn draw_noise_sigma2<R: Rng + ?Sized>(sigma2_nominal: f64, uncertainty_db: f64, rng: &mut R) -> f64 {
    if uncertainty_db == 0.0 {
        return sigma2_nominal;
    }
    let u = rng.random_range(-uncertainty_db..=uncertainty_db);
    sigma2_nominal * 10f64.powf(u / 10.0)
}

/// White Gaussian noise with variance `sigma2`.
pub fn gen_awgn<R: Rng + ?Sized>(n: usize, sigma2: f64, rng: &mut R) -> Vec<f64> {
    let s = sigma2.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            s * z
        })
        .collect()
}

/// What one CR sees during one sensing event.
#[derive(Debug, Clone, PartialEq)]
pub struct CrObservation {
    pub samples: Vec<f64>,
    /// Noise-only reference window for variance estimation.
    pub noise_ref: Vec<f64>,
    pub true_sigma2: f64,
    pub gamma: f64,
}

/// Draws one CR's observation. `signal` is the shared unit-power PU waveform,
/// `None` under H0.
pub fn gen_cr_observation<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    signal: Option<&[f64]>,
    rng: &mut R,
) -> CrObservation {
    let true_sigma2 = draw_noise_sigma2(config.sigma2_nominal, config.uncertainty_db, rng);
    let gamma = draw_rayleigh_gamma(config.snr_bar(), rng);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut samples = gen_awgn(config.n_samples, true_sigma2, rng);
    if let Some(s) = signal {
        let h = sign * (gamma * true_sigma2).sqrt();
        for (y, x) in samples.iter_mut().zip(s) {
            *y += h * x;
        }
    }
    let noise_ref = gen_awgn(config.n_ref, true_sigma2, rng);
    CrObservation {
        samples,
        noise_ref,
        true_sigma2,
        gamma,
    }
}

/// One sensing period across all CRs.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingEvent {
    pub hypothesis: Hypothesis,
    pub per_cr_samples: Vec<Vec<f64>>,
    pub per_cr_noise_ref: Vec<Vec<f64>>,
    pub per_cr_true_sigma2: Vec<f64>,
    pub per_cr_gamma: Vec<f64>,
}

/// Generates a full event from a single stream: one shared PU waveform,
/// independent fading, noise and noise level per CR.
pub fn gen_event<R: Rng + ?Sized>(config: &ScenarioConfig, hypothesis: Hypothesis, rng: &mut R) -> SensingEvent {
    let signal = gen_bpsk(config.n_samples, 1.0, rng);
    let shared = hypothesis.is_present().then_some(signal.as_slice());
    let mut event = SensingEvent {
        hypothesis,
        per_cr_samples: Vec::with_capacity(config.k_crs),
        per_cr_noise_ref: Vec::with_capacity(config.k_crs),
        per_cr_true_sigma2: Vec::with_capacity(config.k_crs),
        per_cr_gamma: Vec::with_capacity(config.k_crs),
    };
    for _ in 0..config.k_crs {
        let obs = gen_cr_observation(config, shared, rng);
        event.per_cr_samples.push(obs.samples);
        event.per_cr_noise_ref.push(obs.noise_ref);
        event.per_cr_true_sigma2.push(obs.true_sigma2);
        event.per_cr_gamma.push(obs.gamma);
    }
    event
}

/// Energy-domain draw for one CR, statistically identical to computing
/// `Σ|y|²` and the reference-window mean power from [`gen_cr_observation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrEnergyDraw {
    pub energy: f64,
    /// Mean power of the noise-only reference window.
    pub sigma2_estimate: f64,
    pub true_sigma2: f64,
    pub gamma: f64,
}

/// Samples the energy statistic directly from its exact law.
///
/// With a constant-modulus signal, `E/σ²` is noncentral chi-square with `N`
/// degrees of freedom and noncentrality `Nγ`; under H0 it is central. The
/// reference-window mean power is `σ²·χ²(N_ref)/N_ref`.
pub fn draw_cr_energy<R: Rng + ?Sized>(config: &ScenarioConfig, hypothesis: Hypothesis, rng: &mut R) -> CrEnergyDraw {
    let true_sigma2 = draw_noise_sigma2(config.sigma2_nominal, config.uncertainty_db, rng);
    let gamma = draw_rayleigh_gamma(config.snr_bar(), rng);
    let n = config.n_samples as f64;
    let energy = match hypothesis {
        Hypothesis::H0 => true_sigma2 * chi_squared(n, rng),
        Hypothesis::H1 => {
            let z: f64 = StandardNormal.sample(rng);
            let shifted = z + (n * gamma).sqrt();
            let rest = if config.n_samples > 1 {
                chi_squared(n - 1.0, rng)
            } else {
                0.0
            };
            true_sigma2 * (shifted * shifted + rest)
        }
    };
    let n_ref = config.n_ref as f64;
    let sigma2_estimate = true_sigma2 * chi_squared(n_ref, rng) / n_ref;
    CrEnergyDraw {
        energy,
        sigma2_estimate,
        true_sigma2,
        gamma,
    }
}

fn chi_squared<R: Rng + ?Sized>(dof: f64, rng: &mut R) -> f64 {
    ChiSquared::new(dof).expect("positive degrees of freedom").sample(rng)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a tuple of indices into one 64-bit key.
#[allow(clippy::unusual_byte_groupings)]
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_0F_C55_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Independent, reproducible stream for `(seed, event, lane)`. Lane 0 is the
/// shared world (activity chain and PU waveform); lane `j + 1` is CR `j`.
pub fn stream_rng(seed: u64, event: u64, lane: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, event, lane]))
}
