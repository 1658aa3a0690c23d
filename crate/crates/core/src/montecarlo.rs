//! Monte Carlo experiment engine.
//!
//! A run simulates a stream of sensing events driven by the Markov activity
//! chain, lets every CR decide, fuses the reports and counts false alarms on
//! H0 events and detections on H1 events. Randomness comes from per-event,
//! per-lane derived streams, so results depend only on the configuration and
//! seed, never on how work is scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    self, cfar_threshold, fuse_probability, q_inverse, DetectorParams, FusionRule, FusionSpec, ProposedParams,
};
use crate::detector::{compute_energy, decide_conventional, estimate_noise_variance, Decision, DualThresholdDetector};
use crate::error::{domain, Error, Result};
use crate::fusion::{fuse_votes, mrc_statistic, mrc_weights};
use crate::simchan::{derive_seed, draw_cr_energy, gen_bpsk, gen_cr_observation, stream_rng, Hypothesis, ScenarioConfig};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;
const POINT_SEED_TAG: u64 = 0x524F_4350;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Fixed CFAR threshold.
    Conventional,
    /// History-driven dual threshold.
    Proposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combiner {
    Hard(FusionSpec),
    /// Soft maximal-ratio combining of energies (conventional scheme only).
    Mrc,
}

/// Where a CR's per-event noise-variance figure comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceSource {
    /// The simulator's true variance.
    Genie,
    /// Mean power of the noise-only reference window.
    Estimated,
}

/// How the per-CR energy is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyModel {
    /// Draw the energy from its exact chi-square law.
    Exact,
    /// Generate every sample and sum.
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub label: String,
    pub scenario: ScenarioConfig,
    pub scheme: Scheme,
    pub combiner: Combiner,
    pub history_len: usize,
    pub pfa_grid: Vec<f64>,
    pub n_events: usize,
    pub warmup_excluded: bool,
    pub variance_source: VarianceSource,
    pub energy_model: EnergyModel,
    /// Active-event counts `(M under H0, M under H1)` for the dual-threshold
    /// theory columns; `None` means `(0, L)`.
    pub theory_active: Option<(usize, usize)>,
    /// Noise uncertainty factor for the theory columns; `None` uses the run's
    /// mean estimate.
    pub theory_rho: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.history_len < 2 {
            return domain(format!("history_len must be at least 2, got {}", self.history_len));
        }
        if self.n_events < self.history_len || self.n_events == 0 {
            return domain(format!(
                "n_events ({}) must be at least history_len ({})",
                self.n_events, self.history_len
            ));
        }
        if self.pfa_grid.is_empty() {
            return domain("pfa_grid is empty");
        }
        if self.pfa_grid.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return domain("pfa_grid values must lie in (0, 1)");
        }
        if self.pfa_grid.windows(2).any(|w| w[0] >= w[1]) {
            return domain("pfa_grid must be strictly increasing");
        }
        match self.combiner {
            Combiner::Hard(spec) => {
                spec.validate()?;
                if spec.k_crs != self.scenario.k_crs {
                    return domain(format!(
                        "fusion rule is set up for {} CRs but the scenario has {}",
                        spec.k_crs, self.scenario.k_crs
                    ));
                }
            }
            Combiner::Mrc => {
                if self.scheme != Scheme::Conventional {
                    return domain("MRC combining is only defined for the conventional scheme");
                }
            }
        }
        if let Some((m0, m1)) = self.theory_active {
            if m0 > self.history_len || m1 > self.history_len {
                return domain("theory active counts exceed history_len");
            }
        }
        if let Some(rho) = self.theory_rho {
            if !(rho >= 1.0) {
                return domain("theory_rho must be >= 1");
            }
        }
        Ok(())
    }

    /// Nominal detector parameters (signal-free, nominal noise).
    pub fn nominal_params(&self) -> DetectorParams {
        DetectorParams {
            n_samples: self.scenario.n_samples,
            sigma2: self.scenario.sigma2_nominal,
            snr: 0.0,
            snr_bar: self.scenario.snr_bar(),
        }
    }

    /// Copy of this configuration with a different number of CRs. A majority
    /// rule falls back to `⌈K/2⌉` when its `l` no longer fits.
    pub fn with_k_crs(&self, k: usize) -> Result<Self> {
        let mut c = self.clone();
        c.scenario.k_crs = k;
        if let Combiner::Hard(spec) = self.combiner {
            let rule = match spec.rule {
                FusionRule::Majority(l) if l > k => FusionRule::Majority(k.div_ceil(2)),
                r => r,
            };
            c.combiner = Combiner::Hard(FusionSpec::new(rule, k)?);
        }
        Ok(c)
    }

    fn counted(&self, event: usize) -> bool {
        !(self.warmup_excluded && event + 1 < self.history_len)
    }
}

/// Seed used for grid point `index` of a sweep.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    derive_seed(&[seed, POINT_SEED_TAG, index as u64])
}

/// Wilson score interval at 95%.
pub fn wilson_ci95(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Binomial standard error of a rate.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    pub p_fa_target: f64,
    /// Per-CR CFAR threshold (the MRC threshold adapts per event instead).
    pub threshold: f64,
    pub pfa_hat: f64,
    pub pd_hat: f64,
    pub n_h0: u64,
    pub n_h1: u64,
    pub false_alarms: u64,
    pub detections: u64,
    pub ci95_pfa: (f64, f64),
    pub ci95_pd: (f64, f64),
    /// Per-CR rates, pooled over CRs (hard combiners only).
    pub local_pfa_hat: Option<f64>,
    pub local_pd_hat: Option<f64>,
    /// Mean estimated noise uncertainty factor over counted dual-threshold decisions.
    pub rho_mean: Option<f64>,
    pub seed: u64,
}

impl EmpiricalResult {
    pub fn pfa_se(&self) -> f64 {
        binomial_se(self.pfa_hat, self.n_h0)
    }

    pub fn pd_se(&self) -> f64 {
        binomial_se(self.pd_hat, self.n_h1)
    }
}

/// Everything that happened in one sensing event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub index: usize,
    pub hypothesis: Hypothesis,
    pub counted: bool,
    pub local: Vec<Decision>,
    pub global: Decision,
}

#[derive(Default)]
struct Tally {
    n_h0: u64,
    n_h1: u64,
    false_alarms: u64,
    detections: u64,
    local_h0: u64,
    local_h1: u64,
    local_fa: u64,
    local_det: u64,
    rho_sum: f64,
    rho_n: u64,
}

enum CrEngine {
    Fixed,
    Dual(DualThresholdDetector),
}

/// Core loop: calls `sink` for every event with its local and global decisions,
/// and `rho_sink` for every steady-state dual-threshold decision of a counted event.
fn simulate<F, G>(config: &ExperimentConfig, p_fa_target: f64, seed: u64, mut sink: F, mut rho_sink: G) -> Result<f64>
where
    F: FnMut(&EventRecord),
    G: FnMut(f64),
{
    config.validate()?;
    let scenario = &config.scenario;
    let params = config.nominal_params();
    let lambda = cfar_threshold(p_fa_target, &params)?;
    let z = q_inverse(p_fa_target)?;
    let activity = scenario.activity();
    let k = scenario.k_crs;

    let mut engines = (0..k)
        .map(|_| match config.scheme {
            Scheme::Conventional => Ok(CrEngine::Fixed),
            Scheme::Proposed => DualThresholdDetector::new(config.history_len).map(CrEngine::Dual),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut state = Hypothesis::H0;
    let mut energies = vec![0.0; k];
    let mut gammas = vec![0.0; k];
    let mut record = EventRecord {
        index: 0,
        hypothesis: Hypothesis::H0,
        counted: false,
        local: vec![Decision::Absent; k],
        global: Decision::Absent,
    };

    for event in 0..config.n_events {
        let mut world = stream_rng(seed, event as u64, 0);
        state = if event == 0 {
            activity.initial(&mut world)
        } else {
            activity.step(state, &mut world)
        };
        let signal = match (config.energy_model, state) {
            (EnergyModel::Samples, Hypothesis::H1) => Some(gen_bpsk(scenario.n_samples, 1.0, &mut world)),
            _ => None,
        };
        let counted = config.counted(event);

        for (j, engine) in engines.iter_mut().enumerate() {
            let mut rng = stream_rng(seed, event as u64, j as u64 + 1);
            let (energy, estimate, true_sigma2, gamma) = match config.energy_model {
                EnergyModel::Exact => {
                    let d = draw_cr_energy(scenario, state, &mut rng);
                    (d.energy, d.sigma2_estimate, d.true_sigma2, d.gamma)
                }
                EnergyModel::Samples => {
                    let obs = gen_cr_observation(scenario, signal.as_deref(), &mut rng);
                    let estimate = match config.variance_source {
                        VarianceSource::Estimated => estimate_noise_variance(&obs.noise_ref)?,
                        VarianceSource::Genie => obs.true_sigma2,
                    };
                    (compute_energy(&obs.samples)?, estimate, obs.true_sigma2, obs.gamma)
                }
            };
            let sigma2_hat = match config.variance_source {
                VarianceSource::Genie => true_sigma2,
                VarianceSource::Estimated => estimate,
            };
            energies[j] = energy;
            gammas[j] = gamma;
            record.local[j] = match engine {
                CrEngine::Fixed => decide_conventional(energy, lambda),
                CrEngine::Dual(det) => {
                    let obs = det.observe(energy, sigma2_hat, lambda)?;
                    if counted {
                        if let Some(detail) = obs.detail {
                            rho_sink(detail.rho_hat);
                        }
                    }
                    obs.bit
                }
            };
        }

        record.global = match config.combiner {
            Combiner::Hard(spec) => {
                let votes = record.local.iter().filter(|d| d.is_present()).count();
                fuse_votes(votes, &spec)
            }
            Combiner::Mrc => {
                let w = mrc_weights(&gammas)?;
                let sum_w2: f64 = w.iter().map(|w| w * w).sum();
                let n = scenario.n_samples as f64;
                let s2 = scenario.sigma2_nominal;
                let threshold = n * s2 + (2.0 * n * s2 * s2 * sum_w2).sqrt() * z;
                Decision::from_present(mrc_statistic(&energies, &gammas)? >= threshold)
            }
        };
        record.index = event;
        record.hypothesis = state;
        record.counted = counted;
        sink(&record);
    }
    Ok(lambda)
}

/// Runs one configuration at one CFAR target with an explicit seed.
pub fn run_experiment_seeded(config: &ExperimentConfig, p_fa_target: f64, seed: u64) -> Result<EmpiricalResult> {
    let mut t = Tally::default();
    let mut rho_sum = 0.0;
    let mut rho_n = 0u64;
    let hard = matches!(config.combiner, Combiner::Hard(_));
    let lambda = simulate(
        config,
        p_fa_target,
        seed,
        |r| {
            if !r.counted {
                return;
            }
            let local_present = r.local.iter().filter(|d| d.is_present()).count() as u64;
            let k = r.local.len() as u64;
            match r.hypothesis {
                Hypothesis::H0 => {
                    t.n_h0 += 1;
                    t.false_alarms += r.global.is_present() as u64;
                    t.local_h0 += k;
                    t.local_fa += local_present;
                }
                Hypothesis::H1 => {
                    t.n_h1 += 1;
                    t.detections += r.global.is_present() as u64;
                    t.local_h1 += k;
                    t.local_det += local_present;
                }
            }
        },
        |rho| {
            rho_sum += rho;
            rho_n += 1;
        },
    )?;
    t.rho_sum = rho_sum;
    t.rho_n = rho_n;

    if t.n_h0 == 0 || t.n_h1 == 0 {
        return Err(Error::InsufficientData {
            n_h0: t.n_h0,
            n_h1: t.n_h1,
        });
    }
    let pfa_hat = t.false_alarms as f64 / t.n_h0 as f64;
    let pd_hat = t.detections as f64 / t.n_h1 as f64;
    Ok(EmpiricalResult {
        p_fa_target,
        threshold: lambda,
        pfa_hat,
        pd_hat,
        n_h0: t.n_h0,
        n_h1: t.n_h1,
        false_alarms: t.false_alarms,
        detections: t.detections,
        ci95_pfa: wilson_ci95(t.false_alarms, t.n_h0),
        ci95_pd: wilson_ci95(t.detections, t.n_h1),
        local_pfa_hat: hard.then(|| t.local_fa as f64 / t.local_h0 as f64),
        local_pd_hat: hard.then(|| t.local_det as f64 / t.local_h1 as f64),
        rho_mean: (t.rho_n > 0).then(|| t.rho_sum / t.rho_n as f64),
        seed,
    })
}

/// Runs one configuration at one CFAR target using the scenario seed.
pub fn run_experiment(config: &ExperimentConfig, p_fa_target: f64) -> Result<EmpiricalResult> {
    run_experiment_seeded(config, p_fa_target, config.scenario.seed)
}

/// Full per-event decision trace of a run.
pub fn trace_decisions(config: &ExperimentConfig, p_fa_target: f64, seed: u64) -> Result<Vec<EventRecord>> {
    let mut out = Vec::with_capacity(config.n_events);
    simulate(config, p_fa_target, seed, |r| out.push(r.clone()), |_| {})?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub pfa_target: f64,
    pub pfa_hat: f64,
    pub pd_hat: f64,
    pub pfa_ci: (f64, f64),
    pub pd_ci: (f64, f64),
    pub n_h0: u64,
    pub n_h1: u64,
    pub pfa_theory: f64,
    pub pd_theory: f64,
}

impl RocPoint {
    pub fn pfa_se(&self) -> f64 {
        binomial_se(self.pfa_hat, self.n_h0)
    }

    pub fn pd_se(&self) -> f64 {
        binomial_se(self.pd_hat, self.n_h1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub label: String,
    pub points: Vec<RocPoint>,
}

/// Theoretical `(P_fa, P_d)` at the fusion center for one grid point.
/// MRC has no closed form here; its `P_d` column is NaN and its `P_fa` is the
/// CFAR target.
pub fn theory_point(config: &ExperimentConfig, p_fa_target: f64, rho_mean: Option<f64>) -> Result<(f64, f64)> {
    let params = config.nominal_params();
    let lambda = cfar_threshold(p_fa_target, &params)?;
    let spec = match config.combiner {
        Combiner::Hard(spec) => spec,
        Combiner::Mrc => return Ok((p_fa_target, f64::NAN)),
    };
    let (pfa, pd) = match config.scheme {
        Scheme::Conventional => (
            analytic::pfa_conventional(lambda, &params)?,
            analytic::pd_rayleigh(lambda, &params)?,
        ),
        Scheme::Proposed => {
            let rho = config.theory_rho.or(rho_mean).unwrap_or(1.0).max(1.0);
            let (m0, m1) = config.theory_active.unwrap_or((0, config.history_len));
            let h0 = ProposedParams::new(config.history_len, m0, rho, params)?;
            let h1 = ProposedParams::new(config.history_len, m1, rho, params)?;
            (
                analytic::pfa_proposed(lambda, &h0)?,
                analytic::pd_proposed_rayleigh(lambda, &h1)?,
            )
        }
    };
    Ok((fuse_probability(pfa, &spec)?, fuse_probability(pd, &spec)?))
}

/// One run per grid point, each with its own derived seed, plus theory columns.
pub fn roc_sweep(config: &ExperimentConfig) -> Result<RocCurve> {
    config.validate()?;
    let points = config
        .pfa_grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let r = run_experiment_seeded(config, p, point_seed(config.scenario.seed, i))?;
            let (pfa_theory, pd_theory) = theory_point(config, p, r.rho_mean)?;
            Ok(RocPoint {
                pfa_target: p,
                pfa_hat: r.pfa_hat,
                pd_hat: r.pd_hat,
                pfa_ci: r.ci95_pfa,
                pd_ci: r.ci95_pd,
                n_h0: r.n_h0,
                n_h1: r.n_h1,
                pfa_theory,
                pd_theory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve {
        label: config.label.clone(),
        points,
    })
}

/// Empirical ROC vertices sorted by false-alarm rate, with the (0,0) and (1,1) anchors.
fn anchored(curve: &RocCurve) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.pfa_hat, p.pd_hat)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v.insert(0, (0.0, 0.0));
    v.push((1.0, 1.0));
    v
}

/// Trapezoidal area under the empirical ROC.
pub fn auc(curve: &RocCurve) -> Result<f64> {
    if curve.points.len() < 2 {
        return domain(format!("AUC needs at least 2 points, got {}", curve.points.len()));
    }
    let v = anchored(curve);
    Ok(v.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum())
}

/// Delta-method standard error of [`auc`], treating points as independent
/// binomial estimates.
pub fn auc_std_error(curve: &RocCurve) -> f64 {
    let mut pts: Vec<&RocPoint> = curve.points.iter().collect();
    pts.sort_by(|a, b| a.pfa_hat.total_cmp(&b.pfa_hat).then(a.pd_hat.total_cmp(&b.pd_hat)));
    let xs: Vec<f64> = std::iter::once(0.0).chain(pts.iter().map(|p| p.pfa_hat)).chain([1.0]).collect();
    let ys: Vec<f64> = std::iter::once(0.0).chain(pts.iter().map(|p| p.pd_hat)).chain([1.0]).collect();
    let var: f64 = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = i + 1;
            let dx = (ys[k - 1] - ys[k + 1]) / 2.0;
            let dy = (xs[k + 1] - xs[k - 1]) / 2.0;
            dx * dx * p.pfa_se().powi(2) + dy * dy * p.pd_se().powi(2)
        })
        .sum();
    var.sqrt()
}

/// Detection rate at a given false-alarm rate, by linear interpolation on the
/// anchored empirical ROC. Returns the interpolated rate and the binomial
/// standard error of the bracketing points, blended the same way.
pub fn pd_at_pfa(curve: &RocCurve, pfa: f64) -> Option<(f64, f64)> {
    if curve.points.is_empty() || !(0.0..=1.0).contains(&pfa) {
        return None;
    }
    let mut pts: Vec<(f64, f64, f64)> = curve.points.iter().map(|p| (p.pfa_hat, p.pd_hat, p.pd_se())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.insert(0, (0.0, 0.0, 0.0));
    pts.push((1.0, 1.0, 0.0));
    // last vertex at or left of `pfa`, first at or right of it
    let right = pts.iter().position(|p| p.0 >= pfa)?;
    if right == 0 {
        return Some((pts[0].1, pts[0].2));
    }
    let (x0, y0, s0) = pts[right - 1];
    let (x1, y1, s1) = pts[right];
    if x1 == x0 {
        return Some((y1, s1));
    }
    let t = (pfa - x0) / (x1 - x0);
    Some((y0 + t * (y1 - y0), s0 + t * (s1 - s0)))
}

/// Result of a CR-count search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrSearch {
    /// Smallest adequate `K`, if any.
    pub k: Option<usize>,
    /// `(K, P_d at the operating P_fa)` for every `K` tried.
    pub tried: Vec<(usize, f64)>,
}

/// Smallest number of CRs whose empirical ROC reaches `target_pd` (less one
/// Monte Carlo σ) at fusion-center false-alarm rate `at_pfa`. The template's
/// grid of per-CR CFAR targets traces each ROC.
pub fn crs_needed_for(target_pd: f64, at_pfa: f64, template: &ExperimentConfig, k_max: usize) -> Result<CrSearch> {
    if !(at_pfa > 0.0 && at_pfa < 1.0) {
        return domain(format!("operating P_fa must lie in (0, 1), got {at_pfa}"));
    }
    if !(target_pd < 1.0) {
        return domain(format!("target P_d must be below 1, got {target_pd}"));
    }
    if k_max == 0 {
        return domain("k_max must be at least 1");
    }
    let mut tried = Vec::new();
    if target_pd <= 0.0 {
        return Ok(CrSearch { k: Some(1), tried });
    }
    for k in 1..=k_max {
        let curve = roc_sweep(&template.with_k_crs(k)?)?;
        let (pd, se) = pd_at_pfa(&curve, at_pfa).expect("curve is nonempty");
        tried.push((k, pd));
        if pd >= target_pd - se {
            return Ok(CrSearch { k: Some(k), tried });
        }
    }
    Ok(CrSearch { k: None, tried })
}

/// Standard-normal upper-tail targets `Q(z)` for `z = z_lo, z_lo + step, …, ≤ z_hi`,
/// in increasing order of probability.
pub fn q_spaced_grid(z_lo: f64, z_hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || z_hi < z_lo {
        return domain("invalid grid bounds");
    }
    let n = ((z_hi - z_lo) / step + 1e-9).floor() as usize;
    let mut v = (0..=n)
        .map(|i| analytic::q_function(z_hi - i as f64 * step))
        .collect::<Result<Vec<f64>>>()?;
    v.dedup();
    Ok(v)
}
