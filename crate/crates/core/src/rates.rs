//! Analytic rates for the near-field users, the far-field users, and the
//! SIC stage in which a near-field user decodes the far-field signal riding
//! on its beam. Rates are in bits per channel use.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precoder::EffectiveChannels;
use crate::scheduler::Assignment;

/// Absolute slack allowed on the per-beam budget, relative to the budget.
pub const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosPower {
    pub power: f64,
    /// False when even the whole budget misses the target; `power` is then P.
    pub feasible: bool,
}

/// Smallest near-field power meeting the target rate, `sigma^2 (2^R - 1) / h`.
pub fn qos_power(gain: f64, noise: f64, target_rate: f64, budget: f64) -> QosPower {
    let eps = target_rate.exp2() - 1.0;
    let need = if eps == 0.0 { 0.0 } else { noise * eps / gain };
    if need <= budget {
        QosPower {
            power: need,
            feasible: true,
        }
    } else {
        QosPower {
            power: budget,
            feasible: false,
        }
    }
}

pub fn qos_powers(eff: &EffectiveChannels, noise: f64, target_rate: f64, budget: f64) -> Vec<QosPower> {
    eff.nf_gain
        .iter()
        .map(|&h| qos_power(h, noise, target_rate, budget))
        .collect()
}

/// Rate at which near-field user m decodes the far-field signal on its beam.
pub fn rate_ff_nf(coeff: Complex64, gain: f64, nf_power: f64, noise: f64) -> f64 {
    (coeff.norm_sqr() * gain / (noise + nf_power * gain)).ln_1p() / std::f64::consts::LN_2
}

/// Near-field rate after the far-field signal is cancelled.
pub fn rate_nf(nf_power: f64, gain: f64, noise: f64) -> f64 {
    (nf_power * gain / noise).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// P_m per beam, watts.
    pub nf_power: Vec<f64>,
    /// f_{m,k}, `M x K`, square-root watts.
    pub ff_coeff: DMatrix<Complex64>,
    pub assignment: Assignment,
}

impl Allocation {
    pub fn zeros(nf_power: Vec<f64>, assignment: Assignment) -> Self {
        let m = nf_power.len();
        let k = assignment.num_users();
        Self {
            nf_power,
            ff_coeff: DMatrix::zeros(m, k),
            assignment,
        }
    }

    /// Checks beam ownership and the per-beam budget.
    pub fn check(&self, budget: f64) -> Result<()> {
        let (m, k) = self.ff_coeff.shape();
        if m != self.nf_power.len() || k != self.assignment.num_users() || m != self.assignment.num_beams() {
            return Err(Error::Dimension("allocation shapes disagree".into()));
        }
        for beam in 0..m {
            let mut used = self.nf_power[beam];
            if used < 0.0 {
                return Err(Error::InvalidConfig(format!("negative power on beam {beam}")));
            }
            for user in 0..k {
                let f = self.ff_coeff[(beam, user)];
                if f != Complex64::new(0.0, 0.0) && self.assignment.owner[beam] != Some(user) {
                    return Err(Error::InvalidConfig(format!(
                        "user {user} has a coefficient on beam {beam} it does not own"
                    )));
                }
                used += f.norm_sqr();
            }
            if used > budget * (1.0 + BUDGET_SLACK) {
                return Err(Error::InvalidConfig(format!(
                    "beam {beam} uses {used:e} W of a {budget:e} W budget"
                )));
            }
        }
        Ok(())
    }
}

/// `|g~_k^H f_i|^2`.
pub fn projected_power(eff: &EffectiveChannels, k: usize, alloc: &Allocation, i: usize) -> f64 {
    eff.ff_effective[k].dotc(&alloc.ff_coeff.column(i)).norm_sqr()
}

/// SINR of far-field user k treating everything else as noise.
pub fn sinr_ff(k: usize, alloc: &Allocation, eff: &EffectiveChannels, noise: f64) -> f64 {
    let leak: f64 = alloc
        .nf_power
        .iter()
        .enumerate()
        .map(|(m, p)| p * eff.ff_gain[(m, k)])
        .sum();
    let inter: f64 = (0..alloc.ff_coeff.ncols())
        .filter(|&i| i != k)
        .map(|i| projected_power(eff, k, alloc, i))
        .sum();
    projected_power(eff, k, alloc, k) / (noise + leak + inter)
}

pub fn rate_ff(k: usize, alloc: &Allocation, eff: &EffectiveChannels, noise: f64) -> f64 {
    sinr_ff(k, alloc, eff, noise).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SicRate {
    pub beam: usize,
    pub user: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub ff_rate: Vec<f64>,
    pub ff_at_nf_rate: Vec<SicRate>,
    pub nf_rate: Vec<f64>,
    /// Per far-field user `min{R^FF_k, R^{FF-NF}_{m,k}, m in S_k}`.
    pub user_rate: Vec<f64>,
    pub objective: f64,
    pub qos_ok: Vec<bool>,
}

impl RateReport {
    pub fn qos_violations(&self) -> usize {
        self.qos_ok.iter().filter(|ok| !**ok).count()
    }
}

/// Evaluates every rate of `alloc` on `eff`.
///
/// Passing the true effective channels for an allocation computed from
/// estimated ones gives the rates actually achieved under CSI mismatch.
pub fn evaluate(alloc: &Allocation, eff: &EffectiveChannels, noise: f64, target_rate: f64) -> RateReport {
    let k_users = alloc.assignment.num_users();
    let ff_rate: Vec<f64> = (0..k_users).map(|k| rate_ff(k, alloc, eff, noise)).collect();
    let nf_rate: Vec<f64> = alloc
        .nf_power
        .iter()
        .zip(&eff.nf_gain)
        .map(|(&p, &h)| rate_nf(p, h, noise))
        .collect();
    let mut ff_at_nf_rate = Vec::new();
    let mut user_rate = ff_rate.clone();
    for (k, set) in alloc.assignment.beam_sets.iter().enumerate() {
        for &m in set {
            let rate = rate_ff_nf(alloc.ff_coeff[(m, k)], eff.nf_gain[m], alloc.nf_power[m], noise);
            user_rate[k] = user_rate[k].min(rate);
            ff_at_nf_rate.push(SicRate { beam: m, user: k, rate });
        }
    }
    // Rates reached with exactly P_m* may round a hair below R.
    let qos_ok = nf_rate.iter().map(|&r| r >= target_rate * (1.0 - 1e-12)).collect();
    RateReport {
        objective: user_rate.iter().sum(),
        ff_rate,
        ff_at_nf_rate,
        nf_rate,
        user_rate,
        qos_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn qos_power_cases() {
        let q = qos_power(2.0, 1.0, 1.0, 10.0);
        assert!(q.feasible && (q.power - 0.5).abs() < 1e-15);
        assert_eq!(qos_power(2.0, 1.0, 0.0, 10.0).power, 0.0);
        let q = qos_power(1e-3, 1.0, 1.0, 10.0);
        assert!(!q.feasible && q.power == 10.0);
        let q = qos_power(0.37, 0.2, 0.7, 10.0);
        assert!((rate_nf(q.power, 0.37, 0.2) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sic_rate_cases() {
        assert_eq!(rate_ff_nf(c(0.0, 0.0), 1.0, 1.0, 1.0), 0.0);
        // |f|^2 h = sigma^2 + P_m h gives SINR 1
        let (h, pm, s) = (0.7f64, 0.3, 0.2);
        let f2 = (s + pm * h) / h;
        assert!((rate_ff_nf(c(f2.sqrt(), 0.0), h, pm, s) - 1.0).abs() < 1e-12);
        assert!((rate_ff_nf(c(0.0, 6f64.sqrt()), 1.0, 1.0, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nf_rate_cases() {
        assert_eq!(rate_nf(0.0, 1.0, 1.0), 0.0);
        assert!((rate_nf(3.0, 1.0, 1.0) - 2.0).abs() < 1e-12);
    }

    fn two_user_eff() -> EffectiveChannels {
        // symmetric: user 0 owns beam 0, user 1 owns beam 1, cross gain 0.25
        let g0 = DVector::from_vec(vec![c(1.0, 0.0), c(0.5, 0.0)]);
        let g1 = DVector::from_vec(vec![c(0.5, 0.0), c(1.0, 0.0)]);
        EffectiveChannels {
            nf_gain: vec![4.0, 4.0],
            ff_gain: DMatrix::from_fn(2, 2, |m, k| if m == k { 1.0 } else { 0.25 }),
            ff_effective: vec![g0, g1],
        }
    }

    #[test]
    fn ff_rate_cases() {
        let eff = two_user_eff();
        let a = Assignment::from_sets(vec![vec![0], vec![1]], 2).unwrap();
        let mut alloc = Allocation::zeros(vec![0.0, 0.0], a);
        assert_eq!(rate_ff(0, &alloc, &eff, 1.0), 0.0);
        alloc.ff_coeff[(0, 0)] = c(2.0, 0.0);
        alloc.ff_coeff[(1, 1)] = c(0.0, 2.0);
        let r0 = rate_ff(0, &alloc, &eff, 1.0);
        let r1 = rate_ff(1, &alloc, &eff, 1.0);
        assert!((r0 - r1).abs() < 1e-12);
        // signal 4, interference |0.5 * 2j|^2 = 1
        assert!((r0 - (1.0f64 + 4.0 / 2.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn interference_free_single_user() {
        let eff = EffectiveChannels {
            nf_gain: vec![1.0],
            ff_gain: DMatrix::from_element(1, 1, 3.0),
            ff_effective: vec![DVector::from_element(1, c(0.0, 3f64.sqrt()))],
        };
        let a = Assignment::from_sets(vec![vec![0]], 1).unwrap();
        let mut alloc = Allocation::zeros(vec![0.0], a);
        alloc.ff_coeff[(0, 0)] = c(0.5, 0.5);
        let want = (1.0 + 3.0 * 0.5 / 0.1f64).log2();
        assert!((rate_ff(0, &alloc, &eff, 0.1) - want).abs() < 1e-12);
    }

    #[test]
    fn evaluate_composes() {
        let eff = two_user_eff();
        let a = Assignment::from_sets(vec![vec![0], vec![1]], 2).unwrap();
        let p = qos_power(4.0, 1.0, 1.0, 5.0).power;
        let mut alloc = Allocation::zeros(vec![p, p], a);
        alloc.ff_coeff[(0, 0)] = c(1.0, 0.0);
        alloc.ff_coeff[(1, 1)] = c(1.0, 0.0);
        alloc.check(5.0).unwrap();
        let r = evaluate(&alloc, &eff, 1.0, 1.0);
        assert!(r.qos_ok.iter().all(|&ok| ok));
        assert!(r.objective <= r.ff_rate.iter().sum::<f64>() + 1e-15);
        let sic = rate_ff_nf(c(1.0, 0.0), 4.0, p, 1.0);
        let ff = rate_ff(0, &alloc, &eff, 1.0);
        assert!((r.user_rate[0] - ff.min(sic)).abs() < 1e-15);
        assert!((r.objective - 2.0 * ff.min(sic)).abs() < 1e-12);
        assert!(r.ff_rate.iter().chain(&r.nf_rate).all(|&v| v >= 0.0));
    }

    #[test]
    fn budget_and_ownership_checks() {
        let a = Assignment::from_sets(vec![vec![0]], 2).unwrap();
        let mut alloc = Allocation::zeros(vec![0.5, 0.5], a);
        alloc.ff_coeff[(0, 0)] = c(0.5f64.sqrt(), 0.0);
        alloc.check(1.0).unwrap();
        alloc.ff_coeff[(0, 0)] = c(0.8, 0.0);
        assert!(alloc.check(1.0).is_err());
        alloc.ff_coeff[(0, 0)] = c(0.0, 0.0);
        alloc.ff_coeff[(1, 0)] = c(0.1, 0.0);
        assert!(alloc.check(1.0).is_err());
    }

    #[test]
    fn ff_rate_decreases_with_interference() {
        let eff = two_user_eff();
        let a = Assignment::from_sets(vec![vec![0], vec![1]], 2).unwrap();
        let mut alloc = Allocation::zeros(vec![0.1, 0.1], a);
        alloc.ff_coeff[(0, 0)] = c(1.0, 0.0);
        let mut prev = rate_ff(0, &alloc, &eff, 1.0);
        for step in 1..6 {
            alloc.ff_coeff[(1, 1)] = c(0.3 * step as f64, 0.0);
            let r = rate_ff(0, &alloc, &eff, 1.0);
            assert!(r < prev);
            prev = r;
        }
        for step in 1..6 {
            alloc.nf_power[1] = 0.1 + step as f64;
            let r = rate_ff(0, &alloc, &eff, 1.0);
            assert!(r < prev);
            prev = r;
        }
    }
}
