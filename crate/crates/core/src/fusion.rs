//! Fusion center: hard-decision voting and the soft MRC baseline.
//!
//! The MRC statistic is `T = Σ w_j E_j` with `w_j = γ_j / Σ γ_i`. Normalized
//! weights keep the H0 mean at `Nσ²` whatever the fading, so a CFAR
//! threshold follows from the weights alone.

use crate::analytic::{q_inverse, DetectorParams, FusionRule, FusionSpec};
use crate::detector::Decision;
use crate::error::{domain, Error, Result};

/// Combines `K` local decisions.
pub fn fuse_hard(decisions: &[Decision], spec: &FusionSpec) -> Result<Decision> {
    spec.validate()?;
    if decisions.len() != spec.k_crs {
        return domain(format!(
            "expected {} decisions, got {}",
            spec.k_crs,
            decisions.len()
        ));
    }
    let votes = decisions.iter().filter(|d| d.is_present()).count();
    Ok(fuse_votes(votes, spec))
}

/// Applies the rule to a count of "present" reports.
pub(crate) fn fuse_votes(votes: usize, spec: &FusionSpec) -> Decision {
    let present = match spec.rule {
        FusionRule::And => votes == spec.k_crs,
        FusionRule::Or => votes >= 1,
        FusionRule::Majority(l) => votes >= l,
    };
    Decision::from_present(present)
}

/// SNR-proportional weights summing to one.
pub fn mrc_weights(gammas: &[f64]) -> Result<Vec<f64>> {
    if gammas.is_empty() {
        return domain("MRC needs at least one CR");
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        return domain(format!("MRC weights need nonnegative SNRs, got {g}"));
    }
    let total: f64 = gammas.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(gammas.iter().map(|g| g / total).collect())
}

/// Weighted energy statistic `Σ w_j E_j`.
pub fn mrc_statistic(energies: &[f64], gammas: &[f64]) -> Result<f64> {
    if energies.len() != gammas.len() {
        return domain(format!(
            "{} energies but {} SNRs",
            energies.len(),
            gammas.len()
        ));
    }
    let w = mrc_weights(gammas)?;
    Ok(w.iter().zip(energies).map(|(w, e)| w * e).sum())
}

/// Soft decision: present iff `T ≥ threshold`.
pub fn fuse_soft_mrc(energies: &[f64], gammas: &[f64], threshold: f64) -> Result<Decision> {
    if !(threshold > 0.0) {
        return domain(format!("MRC threshold must be positive, got {threshold}"));
    }
    Ok(Decision::from_present(mrc_statistic(energies, gammas)? >= threshold))
}

/// CFAR threshold for the MRC statistic. Under H0, `T` is approximately
/// `N(Nσ², 2Nσ⁴·Σw²)`.
pub fn mrc_threshold_for_pfa(p_fa_target: f64, gammas: &[f64], params: &DetectorParams) -> Result<f64> {
    params.validate()?;
    let z = q_inverse(p_fa_target)?;
    let w = mrc_weights(gammas)?;
    let sum_w2: f64 = w.iter().map(|w| w * w).sum();
    let n = params.n_samples as f64;
    let s2 = params.sigma2;
    let lambda = n * s2 + (2.0 * n * s2 * s2 * sum_w2).sqrt() * z;
    if lambda <= 0.0 {
        return domain(format!("target P_fa {p_fa_target} needs a nonpositive MRC threshold"));
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::cfar_threshold;
    use proptest::prelude::*;
    use Decision::{Absent as O, Present as I};

    fn spec(rule: FusionRule, k: usize) -> FusionSpec {
        FusionSpec::new(rule, k).unwrap()
    }

    fn vector(bits: u32, k: usize) -> Vec<Decision> {
        (0..k).map(|i| Decision::from_present(bits >> i & 1 == 1)).collect()
    }

    #[test]
    fn hard_examples() {
        assert_eq!(fuse_hard(&[I, I, I], &spec(FusionRule::And, 3)).unwrap(), I);
        assert_eq!(fuse_hard(&[O, O, I], &spec(FusionRule::Or, 3)).unwrap(), I);
        assert_eq!(fuse_hard(&[O, O, I], &spec(FusionRule::Majority(2), 3)).unwrap(), O);
        assert!(fuse_hard(&[O, I], &spec(FusionRule::Or, 3)).is_err());
    }

    #[test]
    fn hard_exhaustive_k4() {
        for bits in 0u32..16 {
            let v = vector(bits, 4);
            let count = bits.count_ones() as usize;
            assert_eq!(fuse_hard(&v, &spec(FusionRule::And, 4)).unwrap().is_present(), count == 4);
            assert_eq!(fuse_hard(&v, &spec(FusionRule::Or, 4)).unwrap().is_present(), count >= 1);
            for l in 1..=4 {
                let got = fuse_hard(&v, &spec(FusionRule::Majority(l), 4)).unwrap();
                assert_eq!(got.is_present(), count >= l);
            }
        }
    }

    #[test]
    fn hard_rule_relations_exhaustive() {
        for k in 1..=8 {
            for bits in 0u32..(1 << k) {
                let v = vector(bits, k);
                let or = fuse_hard(&v, &spec(FusionRule::Or, k)).unwrap().is_present();
                let and = fuse_hard(&v, &spec(FusionRule::And, k)).unwrap().is_present();
                for l in 1..=k {
                    let m = fuse_hard(&v, &spec(FusionRule::Majority(l), k)).unwrap().is_present();
                    assert!(or as u8 >= m as u8 && m as u8 >= and as u8);
                    if l == 1 {
                        assert_eq!(m, or);
                    }
                    if l == k {
                        assert_eq!(m, and);
                    }
                }
                // setting any extra bit never turns a present into absent
                for j in 0..k {
                    let more = vector(bits | (1 << j), k);
                    for rule in [FusionRule::And, FusionRule::Or, FusionRule::Majority(k.div_ceil(2))] {
                        let s = spec(rule, k);
                        let before = fuse_hard(&v, &s).unwrap().is_present();
                        let after = fuse_hard(&more, &s).unwrap().is_present();
                        assert!(!before || after);
                    }
                }
            }
        }
    }

    #[test]
    fn mrc_examples() {
        assert_eq!(fuse_soft_mrc(&[120.0], &[0.3], 100.0).unwrap(), I);
        assert_eq!(fuse_soft_mrc(&[90.0], &[0.3], 100.0).unwrap(), O);
        let t = mrc_statistic(&[100.0, 200.0, 300.0], &[0.5, 0.5, 0.5]).unwrap();
        assert!((t - 200.0).abs() < 1e-12);
        let t = mrc_statistic(&[100.0, 200.0], &[1.0, 3.0]).unwrap();
        assert!((t - 175.0).abs() < 1e-12);
        assert_eq!(fuse_soft_mrc(&[100.0, 200.0], &[1.0, 3.0], 170.0).unwrap(), I);
        assert_eq!(
            fuse_soft_mrc(&[1.0, 2.0], &[0.0, 0.0], 1.0).unwrap_err(),
            Error::DegenerateWeights
        );
        assert!(fuse_soft_mrc(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(mrc_weights(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn mrc_threshold_examples() {
        let d = DetectorParams::new(1000, 1.0, 0.0, 0.0).unwrap();
        assert!((mrc_threshold_for_pfa(0.5, &[0.2, 0.7], &d).unwrap() - 1000.0).abs() < 1e-12);
        for p in [0.01, 0.1, 0.7] {
            let single = mrc_threshold_for_pfa(p, &[0.42], &d).unwrap();
            assert!((single - cfar_threshold(p, &d).unwrap()).abs() < 1e-9);
        }
        assert!(mrc_threshold_for_pfa(0.0, &[1.0], &d).is_err());
    }

    proptest! {
        #[test]
        fn weights_normalized_and_scale_free(
            g in prop::collection::vec(0.0f64..5.0, 1..12),
            e in prop::collection::vec(500.0f64..1500.0, 12),
            c in 1e-3f64..1e3,
            thr in 700.0f64..1300.0,
        ) {
            prop_assume!(g.iter().sum::<f64>() > 1e-6);
            let w = mrc_weights(&g).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let e = &e[..g.len()];
            let t = mrc_statistic(e, &g).unwrap();
            let scaled: Vec<f64> = g.iter().map(|x| x * c).collect();
            let ts = mrc_statistic(e, &scaled).unwrap();
            prop_assert!((t - ts).abs() <= 1e-9 * t);
            // skip razor-thin ties where rounding of the scaled weights decides
            prop_assume!((t - thr).abs() > 1e-6);
            prop_assert_eq!(fuse_soft_mrc(e, &g, thr).unwrap(), fuse_soft_mrc(e, &scaled, thr).unwrap());
        }
    }
}
