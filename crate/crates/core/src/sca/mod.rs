//! Successive convex approximation for the far-field sum rate.
//!
//! With the near-field powers fixed at their QoS minimum `P_m*`, the problem
//! in `(f, x)` is
//!
//! ```text
//! max  sum_k log2(1 + x_k)
//! s.t. eta_k + sum_{i != k} |g~_k^H f_i|^2 <= |g~_k^H f_k|^2 / x_k
//!      x_k mu_m <= |f_{m,k}|^2                 (m in S_k)
//!      |f_{m,k}|^2 <= P - P_m*
//! ```
//!
//! Each iteration replaces the two non-convex right-hand sides by their
//! first-order expansions around the current point. Both expansions are
//! global under-estimators, so the convexified feasible set sits inside the
//! original one and every iterate stays feasible.
//!
//! Internally everything is normalized: powers by the beam budget `P`, noise
//! to one. Coefficients `f^` relate to physical ones by `f = sqrt(P) f^`.

pub mod barrier;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::precoder::EffectiveChannels;
use crate::rates::{Allocation, QosPower};
use crate::scheduler::Assignment;

use barrier::{BarrierOptions, BarrierProblem, LinearForm, QuadConstraint};

/// Feasibility tolerance for iterates, relative to the constraint scale.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Shrink applied to the expansion point to obtain a strictly interior start.
const INTERIOR_SHRINK: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct UserBlock {
    /// Active beams S_k, in coordinate order.
    pub beams: Vec<usize>,
    /// Normalized `eta_k = 1 + sum_m P_m* g_{m,k} / sigma^2`.
    pub eta: f64,
    /// Normalized `mu_m / P` per active beam.
    pub mu: Vec<f64>,
    /// Normalized residual budget `(P - P_m*) / P` per active beam.
    pub budget: Vec<f64>,
}

impl UserBlock {
    pub fn dim(&self) -> usize {
        self.beams.len()
    }
}

/// Normalized instance shared by the SCA stages.
#[derive(Debug, Clone)]
pub struct ScaProblem {
    pub users: Vec<UserBlock>,
    /// `g~_k sqrt(P / sigma^2)`, length M.
    pub gains: Vec<DVector<Complex64>>,
    pub nf_power: Vec<f64>,
    pub beam_budget: f64,
    pub noise: f64,
    pub assignment: Assignment,
}

impl ScaProblem {
    pub fn new(
        eff: &EffectiveChannels,
        assignment: &Assignment,
        noise: f64,
        beam_budget: f64,
        qos: &[QosPower],
    ) -> Result<Self> {
        let m_total = eff.num_beams();
        if qos.len() != m_total || assignment.num_beams() != m_total || assignment.num_users() > eff.num_far() {
            return Err(Error::Dimension("effective channels, QoS powers and assignment disagree".into()));
        }
        let scale = (beam_budget / noise).sqrt();
        let gains = eff.ff_effective.iter().take(assignment.num_users()).map(|g| g * Complex64::from(scale)).collect();
        let mut users = Vec::with_capacity(assignment.num_users());
        for (k, set) in assignment.beam_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::EmptyBeamSet);
            }
            let leak: f64 = (0..m_total).map(|m| qos[m].power * eff.ff_gain[(m, k)]).sum();
            let mut mu = Vec::with_capacity(set.len());
            let mut budget = Vec::with_capacity(set.len());
            for &m in set {
                if !qos[m].feasible {
                    return Err(Error::QosInfeasible { beam: m });
                }
                let h = eff.nf_gain[m];
                mu.push((noise + qos[m].power * h) / h / beam_budget);
                budget.push(((beam_budget - qos[m].power) / beam_budget).max(0.0));
            }
            users.push(UserBlock {
                beams: set.clone(),
                eta: 1.0 + leak / noise,
                mu,
                budget,
            });
        }
        Ok(Self {
            users,
            gains,
            nf_power: qos.iter().map(|q| q.power).collect(),
            beam_budget,
            noise,
            assignment: assignment.clone(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// `g^_k` and `g^v_k` restricted to the beams of user `owner`.
    pub fn stacked(&self, k: usize, owner: usize) -> StackedGains {
        let beams = &self.users[owner].beams;
        let d = beams.len();
        let mut real = vec![0.0; 2 * d];
        let mut imag = vec![0.0; 2 * d];
        for (j, &m) in beams.iter().enumerate() {
            let g = self.gains[k][m];
            real[j] = g.re;
            real[d + j] = g.im;
            imag[j] = -g.im;
            imag[d + j] = g.re;
        }
        StackedGains { real, imag }
    }

    /// `|g~_k^H f_i|^2` in normalized units.
    pub fn projected(&self, k: usize, i: usize, fbar_i: &[f64]) -> f64 {
        self.stacked(k, i).quadratic(fbar_i)
    }

    /// Largest x_k the constraints allow for the coefficients in `fbar`.
    pub fn best_sinr(&self, fbar: &[Vec<f64>]) -> Vec<f64> {
        (0..self.num_users())
            .map(|k| {
                let user = &self.users[k];
                let d = user.dim();
                let signal = self.projected(k, k, &fbar[k]);
                let inter: f64 = (0..self.num_users())
                    .filter(|&i| i != k)
                    .map(|i| self.projected(k, i, &fbar[i]))
                    .sum();
                let mut x = signal / (user.eta + inter);
                for j in 0..d {
                    let p = fbar[k][j].powi(2) + fbar[k][d + j].powi(2);
                    x = x.min(p / user.mu[j]);
                }
                x.max(0.0)
            })
            .collect()
    }

    /// Largest violation of the exact (non-linearized) constraints at `point`.
    pub fn violation(&self, point: &ScaPoint) -> f64 {
        let caps = self.best_sinr(&point.fbar);
        let mut worst: f64 = 0.0;
        for (k, user) in self.users.iter().enumerate() {
            let x = point.x[k];
            worst = worst.max(-x);
            worst = worst.max((x - caps[k]) / caps[k].max(1.0));
            let d = user.dim();
            for j in 0..d {
                let p = point.fbar[k][j].powi(2) + point.fbar[k][d + j].powi(2);
                worst = worst.max(p - user.budget[j]);
            }
        }
        worst
    }

    pub fn objective(x: &[f64]) -> f64 {
        x.iter().map(|v| v.ln_1p()).sum::<f64>() / std::f64::consts::LN_2
    }

    /// Physical allocation for a normalized point.
    pub fn allocation(&self, point: &ScaPoint) -> Allocation {
        let m = self.nf_power.len();
        let mut ff = DMatrix::zeros(m, self.num_users());
        let amp = self.beam_budget.sqrt();
        for (k, user) in self.users.iter().enumerate() {
            for (j, c) in point.coefficients(k, user.dim()).into_iter().enumerate() {
                ff[(user.beams[j], k)] = c * amp;
            }
        }
        Allocation {
            nf_power: self.nf_power.clone(),
            ff_coeff: ff,
            assignment: self.assignment.clone(),
        }
    }
}

/// Real/imaginary stackings of one user's effective channel on a beam set.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedGains {
    /// `[Re g; Im g]`
    pub real: Vec<f64>,
    /// `[-Im g; Re g]`
    pub imag: Vec<f64>,
}

impl StackedGains {
    /// `fbar^T (g^ g^T + gv gv^T) fbar`.
    pub fn quadratic(&self, fbar: &[f64]) -> f64 {
        let a: f64 = self.real.iter().zip(fbar).map(|(g, f)| g * f).sum();
        let b: f64 = self.imag.iter().zip(fbar).map(|(g, f)| g * f).sum();
        a * a + b * b
    }

    /// `(g^ g^T + gv gv^T) fbar`.
    pub fn apply(&self, fbar: &[f64]) -> Vec<f64> {
        let a: f64 = self.real.iter().zip(fbar).map(|(g, f)| g * f).sum();
        let b: f64 = self.imag.iter().zip(fbar).map(|(g, f)| g * f).sum();
        self.real.iter().zip(&self.imag).map(|(r, i)| a * r + b * i).collect()
    }
}

/// Normalized SCA iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaPoint {
    /// Per user `[Re f_{S_k}; Im f_{S_k}]`.
    pub fbar: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub iteration: usize,
}

impl ScaPoint {
    pub fn coefficients(&self, k: usize, d: usize) -> Vec<Complex64> {
        (0..d).map(|j| Complex64::new(self.fbar[k][j], self.fbar[k][d + j])).collect()
    }

    pub fn objective(&self) -> f64 {
        ScaProblem::objective(&self.x)
    }
}

/// Every active coefficient at full residual power, `|f0|^2 = P - P_m*`, with
/// the largest SINRs those coefficients support.
pub fn initial_point(problem: &ScaProblem) -> ScaPoint {
    let fbar: Vec<Vec<f64>> = problem
        .users
        .iter()
        .map(|u| {
            let d = u.dim();
            let mut v = vec![0.0; 2 * d];
            for (vj, b) in v.iter_mut().zip(&u.budget) {
                *vj = b.sqrt();
            }
            v
        })
        .collect();
    let x = problem.best_sinr(&fbar);
    ScaPoint { fbar, x, iteration: 0 }
}

/// Affine under-estimator `L_k(fbar_k, x_k) = f_coef . fbar_k + x_coef x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrBound {
    pub f_coef: Vec<f64>,
    pub x_coef: f64,
}

impl SinrBound {
    pub fn eval(&self, fbar: &[f64], x: f64) -> f64 {
        self.f_coef.iter().zip(fbar).map(|(c, f)| c * f).sum::<f64>() + self.x_coef * x
    }
}

/// Affine under-estimator of `|f|^2`: `2 Re{conj(f0) f} - |f0|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBound {
    pub f0: Complex64,
}

impl PowerBound {
    pub fn eval(&self, f: Complex64) -> f64 {
        2.0 * (self.f0.conj() * f).re - self.f0.norm_sqr()
    }
}

#[derive(Debug, Clone)]
pub struct Linearization {
    /// None for users frozen at zero rate.
    pub sinr: Vec<Option<SinrBound>>,
    pub power: Vec<Vec<PowerBound>>,
}

/// First-order expansion of `|g~^H f|^2 / x` about `(fbar0, x0)`:
/// value `q0/x0`, gradient `(2 A fbar0 / x0, -q0 / x0^2)`. The constant
/// terms cancel, leaving a linear function.
pub fn sinr_bound(gains: &StackedGains, fbar0: &[f64], x0: f64) -> Result<SinrBound> {
    if !(x0 > 0.0) {
        return Err(Error::DegenerateExpansion { user: 0 });
    }
    let q0 = gains.quadratic(fbar0);
    Ok(SinrBound {
        f_coef: gains.apply(fbar0).into_iter().map(|v| 2.0 * v / x0).collect(),
        x_coef: -q0 / (x0 * x0),
    })
}

/// Expands every user around `point`. Users with `x_k = 0` and no signal are
/// frozen; zero SINR with a live signal is degenerate.
pub fn linearize(problem: &ScaProblem, point: &ScaPoint) -> Result<Linearization> {
    let mut sinr = Vec::with_capacity(problem.num_users());
    let mut power = Vec::with_capacity(problem.num_users());
    for (k, user) in problem.users.iter().enumerate() {
        let d = user.dim();
        let coeffs = point.coefficients(k, d);
        power.push(coeffs.iter().map(|&f0| PowerBound { f0 }).collect());
        if point.x[k] > 0.0 {
            let b = sinr_bound(&problem.stacked(k, k), &point.fbar[k], point.x[k])
                .map_err(|_| Error::DegenerateExpansion { user: k })?;
            sinr.push(Some(b));
        } else if is_frozen(problem, point, k) {
            sinr.push(None);
        } else {
            return Err(Error::DegenerateExpansion { user: k });
        }
    }
    Ok(Linearization { sinr, power })
}

fn is_frozen(problem: &ScaProblem, point: &ScaPoint, k: usize) -> bool {
    point.x[k] <= 0.0 && (problem.projected(k, k, &point.fbar[k]) == 0.0 || point.fbar[k].iter().all(|v| *v == 0.0))
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub point: ScaPoint,
    /// Objective of the convexified problem at the returned point, bits.
    pub objective: f64,
    pub newton_steps: usize,
    pub converged: bool,
}

struct Layout {
    /// Offset of each live user's block, None if frozen.
    offset: Vec<Option<usize>>,
    dim: usize,
}

impl Layout {
    fn new(problem: &ScaProblem, lin: &Linearization) -> Self {
        let mut offset = Vec::with_capacity(problem.num_users());
        let mut dim = 0;
        for (k, user) in problem.users.iter().enumerate() {
            if lin.sinr[k].is_some() {
                offset.push(Some(dim));
                dim += 2 * user.dim() + 1;
            } else {
                offset.push(None);
            }
        }
        Self { offset, dim }
    }
}

/// Builds the convexified problem in barrier form.
fn convexified(problem: &ScaProblem, lin: &Linearization, layout: &Layout) -> BarrierProblem {
    let mut constraints = Vec::new();
    let mut log_vars = Vec::new();
    for (k, user) in problem.users.iter().enumerate() {
        let (Some(off), Some(bound)) = (layout.offset[k], lin.sinr[k].as_ref()) else {
            continue;
        };
        let d = user.dim();
        let xi = off + 2 * d;
        log_vars.push(xi);

        // eta_k + sum_{i != k} |g~_k^H f_i|^2 - L_k <= 0
        let mut c = QuadConstraint {
            constant: user.eta,
            ..Default::default()
        };
        for (i, oi) in layout.offset.iter().enumerate() {
            let Some(oi) = *oi else { continue };
            if i == k {
                continue;
            }
            let s = problem.stacked(k, i);
            let mut re = LinearForm::default();
            let mut im = LinearForm::default();
            for (j, (a, b)) in s.real.iter().zip(&s.imag).enumerate() {
                re.push(oi + j, *a);
                im.push(oi + j, *b);
            }
            c.squares.push(re);
            c.squares.push(im);
        }
        for (j, coef) in bound.f_coef.iter().enumerate() {
            c.linear.push(off + j, -coef);
        }
        c.linear.push(xi, -bound.x_coef);
        constraints.push(c);

        for j in 0..d {
            // x mu <= 2 Re{conj(f0) f} - |f0|^2
            let f0 = lin.power[k][j].f0;
            let mut sic = QuadConstraint {
                constant: f0.norm_sqr(),
                ..Default::default()
            };
            sic.linear.push(xi, user.mu[j]);
            sic.linear.push(off + j, -2.0 * f0.re);
            sic.linear.push(off + d + j, -2.0 * f0.im);
            constraints.push(sic);

            // |f|^2 <= budget
            constraints.push(QuadConstraint {
                squares: vec![LinearForm(vec![(off + j, 1.0)]), LinearForm(vec![(off + d + j, 1.0)])],
                linear: LinearForm::default(),
                constant: -user.budget[j],
            });
        }
        constraints.push(QuadConstraint {
            linear: LinearForm(vec![(xi, -1.0)]),
            ..Default::default()
        });
    }
    BarrierProblem {
        dim: layout.dim,
        log_vars,
        constraints,
    }
}

/// Solves the convexified problem built around `expansion`.
///
/// The expansion point is feasible for the convexified problem; shrinking its
/// coefficients by `1 - tau` and its SINRs by `1 - 3 tau` gives a strictly
/// interior start whenever the expansion point has positive SINRs.
pub fn solve_subproblem(
    problem: &ScaProblem,
    lin: &Linearization,
    expansion: &ScaPoint,
    opts: &BarrierOptions,
) -> Result<SubproblemSolution> {
    let layout = Layout::new(problem, lin);
    let bp = convexified(problem, lin, &layout);
    let mut start = DVector::zeros(layout.dim);
    for (k, off) in layout.offset.iter().enumerate() {
        let Some(off) = *off else { continue };
        let d = problem.users[k].dim();
        for j in 0..2 * d {
            start[off + j] = expansion.fbar[k][j] * (1.0 - INTERIOR_SHRINK);
        }
        start[off + 2 * d] = expansion.x[k] * (1.0 - 3.0 * INTERIOR_SHRINK);
    }

    let mut fbar: Vec<Vec<f64>> = problem.users.iter().map(|u| vec![0.0; 2 * u.dim()]).collect();
    let mut x = vec![0.0; problem.num_users()];
    if layout.dim == 0 {
        return Ok(SubproblemSolution {
            point: ScaPoint {
                fbar,
                x,
                iteration: expansion.iteration + 1,
            },
            objective: 0.0,
            newton_steps: 0,
            converged: true,
        });
    }
    if !bp.is_strictly_feasible(&start) {
        return Err(Error::NoConvergence(
            "expansion point has no strictly feasible neighbourhood".into(),
        ));
    }
    let res = bp.solve(start, opts);
    for (k, off) in layout.offset.iter().enumerate() {
        let Some(off) = *off else { continue };
        let d = problem.users[k].dim();
        fbar[k].copy_from_slice(&res.z.as_slice()[off..off + 2 * d]);
        x[k] = res.z[off + 2 * d].max(0.0);
    }
    Ok(SubproblemSolution {
        objective: ScaProblem::objective(&x),
        point: ScaPoint {
            fbar,
            x,
            iteration: expansion.iteration + 1,
        },
        newton_steps: res.newton_steps,
        converged: res.converged,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ScaOptions {
    pub max_iterations: usize,
    /// Stop once an iteration gains less than this many bits.
    pub min_gain: f64,
    pub barrier: BarrierOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            min_gain: 1e-4,
            barrier: BarrierOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub allocation: Allocation,
    pub point: ScaPoint,
    /// Objective in bits after each iterate, starting with the initial point.
    pub trace: Vec<f64>,
    /// Every accepted iterate, starting with the initial point.
    pub iterates: Vec<ScaPoint>,
    pub iterations: usize,
    pub newton_steps: usize,
    /// False if some barrier solve hit its Newton cap.
    pub converged: bool,
}

/// Allocation at the initial point, the greedy benchmark.
pub fn greedy_allocation(problem: &ScaProblem) -> Allocation {
    problem.allocation(&initial_point(problem))
}

/// Users whose SINR is pinned at zero carry nothing; dropping their
/// coefficients removes interference without changing the objective.
fn freeze_dead_users(point: &mut ScaPoint) {
    for (x, f) in point.x.iter().zip(point.fbar.iter_mut()) {
        if *x <= 0.0 {
            f.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Full SCA loop from the initial point.
pub fn sca_loop(problem: &ScaProblem, opts: &ScaOptions) -> Result<ScaOutcome> {
    let mut point = initial_point(problem);
    freeze_dead_users(&mut point);
    let mut trace = vec![point.objective()];
    let mut iterates = vec![point.clone()];
    let mut newton_steps = 0;
    let mut converged = true;
    for _ in 0..opts.max_iterations {
        let lin = linearize(problem, &point)?;
        let sub = solve_subproblem(problem, &lin, &point, &opts.barrier)?;
        newton_steps += sub.newton_steps;
        converged &= sub.converged;
        // The convexified constraints are conservative, so the exact
        // constraints usually admit larger SINRs for the same coefficients.
        let mut next = sub.point;
        next.x = problem.best_sinr(&next.fbar);
        let prev = *trace.last().expect("trace starts non-empty");
        let value = next.objective();
        if !(value >= prev) {
            break;
        }
        point = next;
        trace.push(value);
        iterates.push(point.clone());
        if value - prev < opts.min_gain {
            break;
        }
    }
    Ok(ScaOutcome {
        allocation: problem.allocation(&point),
        iterations: trace.len() - 1,
        point,
        trace,
        iterates,
        newton_steps,
        converged,
    })
}

#[cfg(test)]
mod tests;
