//! Branch-and-bound over SINR boxes for one beam per far-field user.
//!
//! With a single active beam per user only the powers `q_k = |f_k|^2` matter,
//! and the set of achievable SINR vectors is downward closed. A box
//! `[x_min, x_max]` therefore contains a feasible point iff `x_min` is
//! feasible, which gives the bounds `sum log2(1 + x_max)` and
//! `sum log2(1 + x_min)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::Allocation;
use crate::sca::ScaProblem;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const MAX_BOXES: usize = 1_000_000;
const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_CAP: usize = 10_000;

/// Normalized D_x = 1 instance: powers in units of the beam budget, noise 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BbInstance {
    /// `a[(k, i)] = |g~_k[m_i]|^2`, where `m_i` is user i's beam.
    pub a: DMatrix<f64>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub budget: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible,
    /// Iteration cap reached without convergence or a budget breach.
    Indeterminate,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

impl BbInstance {
    pub fn from_problem(problem: &ScaProblem) -> Result<Self> {
        let mut beam = Vec::with_capacity(problem.num_users());
        for (k, u) in problem.users.iter().enumerate() {
            match u.beams.as_slice() {
                [m] => beam.push(*m),
                _ => {
                    return Err(Error::MethodNotApplicable {
                        method: "bb".into(),
                        reason: format!("user {k} holds {} beams, needs exactly one", u.beams.len()),
                    })
                }
            }
        }
        let k = beam.len();
        Ok(Self {
            a: DMatrix::from_fn(k, k, |r, c| problem.gains[r][beam[c]].norm_sqr()),
            eta: problem.users.iter().map(|u| u.eta).collect(),
            mu: problem.users.iter().map(|u| u.mu[0]).collect(),
            budget: problem.users.iter().map(|u| u.budget[0]).collect(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.eta.len()
    }

    /// Box `[0, x_max]` with each `x_max` the single-user limit.
    pub fn initial_box(&self) -> SinrBox {
        let k = self.num_users();
        let x_max = (0..k)
            .map(|i| (self.a[(i, i)] * self.budget[i] / self.eta[i]).min(self.budget[i] / self.mu[i]).max(0.0))
            .collect();
        let q = vec![0.0; k];
        SinrBox::new(vec![0.0; k], x_max, Some(q))
    }

    /// Smallest powers supporting SINRs `x`, by monotone fixed-point iteration.
    pub fn check_feasible(&self, x: &[f64]) -> Feasibility {
        let k = self.num_users();
        if (0..k).any(|i| x[i] > 0.0 && !(self.a[(i, i)] > 0.0)) {
            return Feasibility::Infeasible;
        }
        let mut q: Vec<f64> = (0..k).map(|i| x[i] * self.mu[i]).collect();
        if q.iter().zip(&self.budget).any(|(q, b)| q > b) {
            return Feasibility::Infeasible;
        }
        let mut next = vec![0.0; k];
        for _ in 0..FIXED_POINT_CAP {
            for i in 0..k {
                if x[i] <= 0.0 {
                    next[i] = 0.0;
                    continue;
                }
                let inter: f64 = (0..k).filter(|&j| j != i).map(|j| self.a[(i, j)] * q[j]).sum();
                next[i] = (x[i] * self.mu[i]).max(x[i] / self.a[(i, i)] * (self.eta[i] + inter));
                if next[i] > self.budget[i] {
                    return Feasibility::Infeasible;
                }
            }
            let change = next.iter().zip(&q).map(|(n, o)| (n - o).abs() / n.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
            std::mem::swap(&mut q, &mut next);
            if change < FIXED_POINT_TOL {
                return Feasibility::Feasible(q);
            }
        }
        Feasibility::Indeterminate
    }
}

fn sum_rate(x: &[f64]) -> f64 {
    x.iter().map(|v| v.ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrBox {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub ub: f64,
    pub lb: f64,
    /// Powers realizing `x_min`, when it is feasible.
    pub q: Option<Vec<f64>>,
}

impl SinrBox {
    fn new(x_min: Vec<f64>, x_max: Vec<f64>, q: Option<Vec<f64>>) -> Self {
        let (ub, lb) = if q.is_some() { (sum_rate(&x_max), sum_rate(&x_min)) } else { (0.0, 0.0) };
        Self { x_min, x_max, ub, lb, q }
    }

    fn longest_edge(&self) -> usize {
        let mut best = 0;
        for i in 1..self.x_min.len() {
            if self.x_max[i] - self.x_min[i] > self.x_max[best] - self.x_min[best] {
                best = i;
            }
        }
        best
    }
}

struct ByUpper(SinrBox);

impl PartialEq for ByUpper {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for ByUpper {}
impl PartialOrd for ByUpper {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByUpper {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.ub.total_cmp(&other.0.ub)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Split the box with the largest upper bound.
    #[default]
    MaxUpper,
    /// Split the box with the smallest lower bound.
    MinLower,
}

#[derive(Debug, Clone, Copy)]
pub struct BbOptions {
    pub epsilon: f64,
    pub max_boxes: usize,
    pub selection: Selection,
}

impl Default for BbOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_boxes: MAX_BOXES,
            selection: Selection::MaxUpper,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BbOutcome {
    pub allocation: Allocation,
    /// Best achieved sum rate, bits.
    pub rate: f64,
    pub x: Vec<f64>,
    /// Normalized powers `|f_k|^2 / P`.
    pub q: Vec<f64>,
    /// `(beta_u, beta_l)` after each iteration.
    pub trace: Vec<(f64, f64)>,
    pub gap: f64,
    pub boxes: usize,
    pub pruned: usize,
    pub converged: bool,
}

/// Mutable pool state of one branch-and-bound run.
struct BbState {
    upper: f64,
    lower: f64,
    incumbent: SinrBox,
    trace: Vec<(f64, f64)>,
    boxes: usize,
    pruned: usize,
}

impl BbState {
    fn offer(&mut self, b: &SinrBox) {
        if b.q.is_some() && b.lb > self.lower {
            self.lower = b.lb;
            self.incumbent = b.clone();
        }
    }
}

/// Splits `b` at the midpoint of its longest edge.
fn split(inst: &BbInstance, b: SinrBox) -> [SinrBox; 2] {
    let e = b.longest_edge();
    let mid = 0.5 * (b.x_min[e] + b.x_max[e]);
    let mut low_max = b.x_max.clone();
    low_max[e] = mid;
    let mut high_min = b.x_min.clone();
    high_min[e] = mid;
    let q = match inst.check_feasible(&high_min) {
        Feasibility::Feasible(q) => Some(q),
        _ => None,
    };
    let high = SinrBox::new(high_min, b.x_max, q);
    let low = SinrBox::new(b.x_min, low_max, b.q);
    [low, high]
}

pub fn bb_solve(problem: &ScaProblem, opts: &BbOptions) -> Result<BbOutcome> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::InvalidConfig("bb tolerance must be positive".into()));
    }
    let inst = BbInstance::from_problem(problem)?;
    let root = inst.initial_box();
    let mut st = BbState {
        upper: root.ub,
        lower: root.lb,
        incumbent: root.clone(),
        trace: vec![(root.ub, root.lb)],
        boxes: 1,
        pruned: 0,
    };
    let converged = match opts.selection {
        Selection::MaxUpper => run_max_upper(&inst, root, &mut st, opts),
        Selection::MinLower => run_min_lower(&inst, root, &mut st, opts),
    };

    let q = st.incumbent.q.clone().expect("incumbent has feasible x_min");
    let m_total = problem.nf_power.len();
    let mut ff = DMatrix::zeros(m_total, inst.num_users());
    for (k, u) in problem.users.iter().enumerate() {
        ff[(u.beams[0], k)] = Complex64::from((q[k] * problem.beam_budget).sqrt());
    }
    Ok(BbOutcome {
        allocation: Allocation {
            nf_power: problem.nf_power.clone(),
            ff_coeff: ff,
            assignment: problem.assignment.clone(),
        },
        rate: st.lower,
        x: st.incumbent.x_min.clone(),
        q,
        gap: st.upper - st.lower,
        trace: st.trace,
        boxes: st.boxes,
        pruned: st.pruned,
        converged,
    })
}

fn run_max_upper(inst: &BbInstance, root: SinrBox, st: &mut BbState, opts: &BbOptions) -> bool {
    let mut heap = BinaryHeap::new();
    heap.push(ByUpper(root));
    loop {
        // lazy pruning: discard dominated boxes as they surface
        while heap.peek().is_some_and(|b| b.0.ub < st.lower) {
            heap.pop();
            st.pruned += 1;
        }
        let Some(ByUpper(b)) = heap.pop() else {
            st.upper = st.lower;
            return true;
        };
        st.upper = b.ub;
        if st.upper - st.lower < opts.epsilon {
            return true;
        }
        if st.boxes >= opts.max_boxes {
            return false;
        }
        for child in split(inst, b) {
            st.boxes += 1;
            st.offer(&child);
            if child.q.is_some() && child.ub >= st.lower {
                heap.push(ByUpper(child));
            } else {
                st.pruned += 1;
            }
        }
        let top = heap.peek().map_or(st.lower, |b| b.0.ub).max(st.lower);
        st.trace.push((top, st.lower));
    }
}

fn run_min_lower(inst: &BbInstance, root: SinrBox, st: &mut BbState, opts: &BbOptions) -> bool {
    let mut pool = vec![root];
    loop {
        let before = pool.len();
        pool.retain(|b| b.ub >= st.lower);
        st.pruned += before - pool.len();
        st.upper = pool.iter().map(|b| b.ub).fold(st.lower, f64::max);
        if pool.is_empty() || st.upper - st.lower < opts.epsilon {
            return true;
        }
        if st.boxes >= opts.max_boxes {
            return false;
        }
        let pick = (0..pool.len()).min_by(|&i, &j| pool[i].lb.total_cmp(&pool[j].lb)).expect("pool non-empty");
        let b = pool.swap_remove(pick);
        for child in split(inst, b) {
            st.boxes += 1;
            st.offer(&child);
            if child.q.is_some() {
                pool.push(child);
            } else {
                st.pruned += 1;
            }
        }
        let top = pool.iter().map(|b| b.ub).fold(st.lower, f64::max);
        st.trace.push((top, st.lower));
    }
}
