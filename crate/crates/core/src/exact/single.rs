//! Optimal coefficients for a single far-field user.
//!
//! With K = 1 the SINR constraint couples the beams only through
//! `|g~^H f|`, which is largest when every coefficient is phase-aligned with
//! its effective gain. After that substitution the problem is monotone in
//! every `|f_m|^2`, so the optimum puts full residual power on every active
//! beam and the SINR is the smaller of the SIC limit and the coherent sum.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precoder::EffectiveChannels;
use crate::rates::{Allocation, QosPower};
use crate::sca::ScaProblem;
use crate::scheduler::Assignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleUserSolution {
    /// Optimal SINR.
    pub y: f64,
    /// `|f_m|^2` in watts, zero off the active set.
    pub z: Vec<f64>,
    pub f: DVector<Complex64>,
    /// `log2(1 + y)`.
    pub rate: f64,
}

impl SingleUserSolution {
    pub fn allocation(&self, problem: &ScaProblem) -> Allocation {
        let m = self.f.len();
        Allocation {
            nf_power: problem.nf_power.clone(),
            ff_coeff: nalgebra::DMatrix::from_column_slice(m, 1, self.f.as_slice()),
            assignment: problem.assignment.clone(),
        }
    }
}

/// Closed-form optimum for user 0 on `beams`.
pub fn solve_single_ff(
    eff: &EffectiveChannels,
    beams: &[usize],
    noise: f64,
    beam_budget: f64,
    qos: &[QosPower],
) -> Result<SingleUserSolution> {
    if beams.is_empty() {
        return Err(Error::EmptyBeamSet);
    }
    let assignment = Assignment::from_sets(vec![beams.to_vec()], eff.num_beams())?;
    solve_single(&ScaProblem::new(eff, &assignment, noise, beam_budget, qos)?)
}

/// Closed-form optimum of a normalized single-user instance.
pub fn solve_single(problem: &ScaProblem) -> Result<SingleUserSolution> {
    if problem.num_users() != 1 {
        return Err(Error::MethodNotApplicable {
            method: "closed-form".into(),
            reason: format!("needs exactly one far-field user, got {}", problem.num_users()),
        });
    }
    let user = &problem.users[0];
    let gains = &problem.gains[0];
    let sic = user.budget.iter().zip(&user.mu).map(|(b, mu)| b / mu).fold(f64::INFINITY, f64::min);
    let coherent: f64 = user.beams.iter().zip(&user.budget).map(|(&m, b)| (gains[m].norm_sqr() * b).sqrt()).sum();
    let y = sic.min(coherent * coherent / user.eta).max(0.0);

    let m_total = problem.nf_power.len();
    let mut z = vec![0.0; m_total];
    let mut f = DVector::zeros(m_total);
    for (&m, b) in user.beams.iter().zip(&user.budget) {
        let power = b * problem.beam_budget;
        z[m] = power;
        f[m] = Complex64::from_polar(power.sqrt(), gains[m].arg());
    }
    Ok(SingleUserSolution {
        y,
        z,
        f,
        rate: y.ln_1p() / std::f64::consts::LN_2,
    })
}

/// Whether SINR `y` is attainable with some powers `z_m` in
/// `[mu_m y, budget_m]` and coherent phases.
pub fn single_feasible(problem: &ScaProblem, y: f64) -> bool {
    let user = &problem.users[0];
    let gains = &problem.gains[0];
    let mut amplitude = 0.0;
    for ((&m, b), mu) in user.beams.iter().zip(&user.budget).zip(&user.mu) {
        if mu * y > *b {
            return false;
        }
        amplitude += (gains[m].norm_sqr() * b).sqrt();
    }
    amplitude * amplitude >= user.eta * y
}

/// Optimal SINR by bisection on [`single_feasible`], to relative tolerance `tol`.
pub fn single_sinr_bisection(problem: &ScaProblem, tol: f64) -> Result<f64> {
    if problem.num_users() != 1 {
        return Err(Error::MethodNotApplicable {
            method: "closed-form".into(),
            reason: "bisection cross-check needs one user".into(),
        });
    }
    let mut hi = 1.0;
    while single_feasible(problem, hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoConvergence("unbounded SINR".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol * hi.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if single_feasible(problem, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
