use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{far_field_channel, near_field_channel, perturb_csi, ChannelVector};
use crate::error::{Error, Result};
use crate::exact::{bb_solve, solve_single, BbOptions};
use crate::geometry::{Position, SystemConfig};
use crate::precoder::{build_precoder, effective_channels, stack_columns, EffectiveChannels, Precoder};
use crate::rates::{evaluate, qos_powers, Allocation, RateReport};
use crate::sca::{greedy_allocation, sca_loop, ScaOptions, ScaProblem};
use crate::scheduler::{greedy_assign_masked, greedy_assign_ordered, Assignment};

use super::config::Method;

/// Channels, beams and beam assignment for one user drop.
#[derive(Debug, Clone)]
pub struct Instance {
    pub system: SystemConfig,
    pub near: Vec<Position>,
    pub far: Vec<Position>,
    pub near_channels: DMatrix<Complex64>,
    pub far_channels: Vec<ChannelVector>,
    pub precoder: Precoder,
    /// Effective channels used for evaluation.
    pub eff: EffectiveChannels,
    /// Effective channels the optimizer sees; equal to `eff` with perfect CSI.
    pub eff_est: EffectiveChannels,
    pub assignment: Assignment,
}

impl Instance {
    /// Builds the instance with perfect CSI and greedy beam assignment.
    pub fn new(system: &SystemConfig, near: Vec<Position>, far: Vec<Position>) -> Result<Self> {
        system.validate()?;
        if near.len() != system.near_users || far.len() != system.far_users {
            return Err(Error::Dimension(format!(
                "{} near and {} far positions for M = {}, K = {}",
                near.len(),
                far.len(),
                system.near_users,
                system.far_users
            )));
        }
        let array = system.array();
        let lambda = system.wavelength();
        let near_ch = near
            .iter()
            .map(|p| near_field_channel(p, &array, lambda))
            .collect::<Result<Vec<_>>>()?;
        let far_channels = far
            .iter()
            .map(|p| far_field_channel(p, &array, lambda))
            .collect::<Result<Vec<_>>>()?;
        let near_channels = stack_columns(&near_ch)?;
        let precoder = build_precoder(&near_channels)?;
        let far_vecs: Vec<_> = far_channels.iter().map(|c| c.entries.clone()).collect();
        let eff = effective_channels(&precoder, &near_channels, &far_vecs)?;
        let assignment = greedy_assign_ordered(&eff, system.beams_per_user, &system.scheduling_order())?;
        Ok(Self {
            system: system.clone(),
            near,
            far,
            near_channels,
            far_channels,
            precoder,
            eff_est: eff.clone(),
            eff,
            assignment,
        })
    }

    /// Replaces the optimizer's view of the far-field channels with
    /// `rho g + sqrt(1 - rho) e` and reassigns beams from the estimate.
    pub fn with_estimate<R: Rng + ?Sized>(mut self, rng: &mut R, rho: f64) -> Result<Self> {
        let est: Vec<_> = self.far_channels.iter().map(|g| perturb_csi(rng, g, rho).entries).collect();
        self.eff_est = effective_channels(&self.precoder, &self.near_channels, &est)?;
        self.assignment = greedy_assign_ordered(&self.eff_est, self.system.beams_per_user, &self.system.scheduling_order())?;
        self.system.csi_quality = rho;
        Ok(self)
    }

    /// Beam sets usable at `beam_budget`: the greedy assignment, or when it
    /// touches a beam whose near-field user misses its target even at full
    /// power, the greedy assignment over the remaining beams.
    pub fn assignment_at(&self, beam_budget: f64) -> Result<Assignment> {
        let s = &self.system;
        let qos = qos_powers(&self.eff, s.noise_power, s.target_rate, beam_budget);
        let ok = |m: &usize| qos[*m].feasible;
        if self.assignment.beam_sets.iter().flatten().all(ok) {
            return Ok(self.assignment.clone());
        }
        let allowed: Vec<bool> = qos.iter().map(|q| q.feasible).collect();
        greedy_assign_masked(&self.eff_est, s.beams_per_user, &s.scheduling_order(), &allowed)
    }

    /// Normalized problem at per-beam budget `beam_budget` (watts).
    pub fn problem(&self, beam_budget: f64) -> Result<ScaProblem> {
        let s = &self.system;
        let qos = qos_powers(&self.eff, s.noise_power, s.target_rate, beam_budget);
        let assignment = self.assignment_at(beam_budget)?;
        ScaProblem::new(&self.eff_est, &assignment, s.noise_power, beam_budget, &qos)
    }

    /// Runs `method` at `beam_budget` and evaluates on the true channels.
    pub fn solve(&self, method: Method, beam_budget: f64, opts: &SolveOptions) -> Result<MethodResult> {
        let s = &self.system;
        let problem = match self.problem(beam_budget) {
            Ok(p) => p,
            Err(Error::TooManyBeams { .. }) => {
                log::warn!("too few QoS-feasible beams at {beam_budget:e} W; far-field users stay silent");
                let qos = qos_powers(&self.eff, s.noise_power, s.target_rate, beam_budget);
                let alloc = Allocation::zeros(qos.iter().map(|q| q.power).collect(), self.assignment.clone());
                return Ok(self.finish(alloc, 0, Vec::new(), None, true, beam_budget));
            }
            Err(e) => return Err(e),
        };
        let (alloc, iterations, trace, bound_gap, converged) = match method {
            Method::Greedy => (greedy_allocation(&problem), 0, Vec::new(), None, true),
            Method::Sca => {
                let out = sca_loop(&problem, &opts.sca)?;
                (out.allocation, out.iterations, out.trace, None, out.converged)
            }
            Method::ClosedForm => {
                let sol = solve_single(&problem)?;
                (sol.allocation(&problem), 0, Vec::new(), None, true)
            }
            Method::Bb => {
                let out = bb_solve(&problem, &opts.bb)?;
                (out.allocation, out.boxes, Vec::new(), Some(out.gap), out.converged)
            }
        };
        alloc.check(beam_budget)?;
        Ok(self.finish(alloc, iterations, trace, bound_gap, converged, beam_budget))
    }

    fn finish(
        &self,
        allocation: Allocation,
        iterations: usize,
        trace: Vec<f64>,
        bound_gap: Option<f64>,
        converged: bool,
        beam_budget: f64,
    ) -> MethodResult {
        let report = evaluate(&allocation, &self.eff, self.system.noise_power, self.system.target_rate);
        MethodResult {
            allocation,
            report,
            iterations,
            trace,
            bound_gap,
            converged,
            beam_budget,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub sca: ScaOptions,
    pub bb: BbOptions,
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub allocation: Allocation,
    /// Rates on the true channels.
    pub report: RateReport,
    /// SCA iterations, or boxes generated by branch-and-bound.
    pub iterations: usize,
    /// SCA objective trace.
    pub trace: Vec<f64>,
    /// Branch-and-bound `beta_u - beta_l` at exit.
    pub bound_gap: Option<f64>,
    pub converged: bool,
    pub beam_budget: f64,
}
