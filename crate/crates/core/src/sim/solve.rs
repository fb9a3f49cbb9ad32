//! Single-instance solve from a document of user coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dbm_to_watts, Position, SystemConfig};
use crate::rates::{qos_powers, RateReport};
use crate::scheduler::Assignment;

use super::config::Method;
use super::instance::{Instance, SolveOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveDocument {
    /// M and K are taken from the coordinate lists.
    #[serde(default)]
    pub system: SystemConfig,
    /// Overrides `system.beam_budget`.
    #[serde(default)]
    pub pdbm: Option<f64>,
    /// Overrides `system.noise_power`.
    #[serde(default)]
    pub noise_dbm: Option<f64>,
    pub near_users: Vec<Position>,
    pub far_users: Vec<Position>,
    pub method: Method,
    /// Explicit beam sets; greedy selection when absent.
    #[serde(default)]
    pub beam_sets: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamCoefficient {
    pub beam: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub dx: usize,
    pub beam_budget_w: f64,
    pub noise_power_w: f64,
    /// P_m per near-field beam, watts.
    pub nf_power: Vec<f64>,
    pub beam_sets: Vec<Vec<usize>>,
    /// Per far-field user, its coefficients on its own beams.
    pub coefficients: Vec<Vec<BeamCoefficient>>,
    pub report: RateReport,
    pub iterations: usize,
    /// SCA objective per iteration.
    pub trace: Vec<f64>,
    /// Branch-and-bound `beta_u - beta_l` at exit.
    pub bound_gap: Option<f64>,
    pub converged: bool,
}

impl SolveDocument {
    /// Parses JSON when the text starts with `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
        }
    }

    pub fn system(&self) -> SystemConfig {
        let mut s = self.system.clone();
        s.near_users = self.near_users.len();
        s.far_users = self.far_users.len();
        if let Some(sets) = &self.beam_sets {
            s.beams_per_user = sets.iter().map(Vec::len).max().unwrap_or(s.beams_per_user);
        }
        if let Some(p) = self.pdbm {
            s.beam_budget = dbm_to_watts(p);
        }
        if let Some(n) = self.noise_dbm {
            s.noise_power = dbm_to_watts(n);
        }
        s
    }
}

pub fn solve_document(doc: &SolveDocument) -> Result<SolveOutput> {
    let system = doc.system();
    let mut inst = Instance::new(&system, doc.near_users.clone(), doc.far_users.clone())?;
    if let Some(sets) = &doc.beam_sets {
        inst.assignment = Assignment::from_sets(sets.clone(), system.near_users)?;
        let qos = qos_powers(&inst.eff, system.noise_power, system.target_rate, system.beam_budget);
        if let Some(&beam) = sets.iter().flatten().find(|&&m| !qos[m].feasible) {
            return Err(Error::QosInfeasible { beam });
        }
    }
    let dx = inst.assignment.beam_sets.iter().map(Vec::len).max().unwrap_or(0);
    if !doc.method.applies(system.far_users, dx) {
        return Err(Error::MethodNotApplicable {
            method: doc.method.to_string(),
            reason: format!("K = {}, D_x = {dx}", system.far_users),
        });
    }
    let r = inst.solve(doc.method, system.beam_budget, &SolveOptions::default())?;
    let assignment = &r.allocation.assignment;
    let coefficients = assignment
        .beam_sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            set.iter()
                .map(|&m| {
                    let f = r.allocation.ff_coeff[(m, k)];
                    BeamCoefficient { beam: m, re: f.re, im: f.im }
                })
                .collect()
        })
        .collect();
    Ok(SolveOutput {
        method: doc.method,
        n: system.antennas,
        m: system.near_users,
        k: system.far_users,
        dx,
        beam_budget_w: system.beam_budget,
        noise_power_w: system.noise_power,
        nf_power: r.allocation.nf_power.clone(),
        beam_sets: assignment.beam_sets.clone(),
        coefficients,
        report: r.report,
        iterations: r.iterations,
        trace: r.trace,
        bound_gap: r.bound_gap,
        converged: r.converged,
    })
}
