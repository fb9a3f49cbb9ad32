//! Log-barrier interior-point method for
//!
//! ```text
//! minimize   -sum_{i in I} ln(1 + z_i)
//! subject to c_j(z) = sum_r (a_{jr} . z)^2 + b_j . z + d_j <= 0
//! ```
//!
//! Every constraint is a convex quadratic written as a sum of squared linear
//! forms, which covers the SCA subproblem exactly: interference powers,
//! per-beam budgets, and the affine Taylor bounds.

use nalgebra::{DMatrix, DVector};

/// Sparse linear form `sum coef * z[idx]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm(pub Vec<(usize, f64)>);

impl LinearForm {
    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        self.0.iter().map(|&(i, c)| c * z[i]).sum()
    }

    pub fn push(&mut self, idx: usize, coef: f64) {
        if coef != 0.0 {
            self.0.push((idx, coef));
        }
    }
}

/// `sum_r (squares[r] . z)^2 + linear . z + constant <= 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadConstraint {
    pub squares: Vec<LinearForm>,
    pub linear: LinearForm,
    pub constant: f64,
}

impl QuadConstraint {
    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        self.squares.iter().map(|a| a.eval(z).powi(2)).sum::<f64>() + self.linear.eval(z) + self.constant
    }
}

#[derive(Debug, Clone)]
pub struct BarrierProblem {
    pub dim: usize,
    /// Variables entering the objective `-sum ln(1 + z_i)`.
    pub log_vars: Vec<usize>,
    pub constraints: Vec<QuadConstraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    pub t0: f64,
    pub growth: f64,
    /// Outer loop stops once `constraints / t` falls below this.
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            t0: 1.0,
            growth: 10.0,
            gap_tol: 1e-8,
            newton_tol: 1e-12,
            max_newton: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub z: DVector<f64>,
    /// Objective in nats, `-sum ln(1 + z_i)`.
    pub objective: f64,
    /// Duality gap bound at exit, `constraints / t`.
    pub gap: f64,
    pub newton_steps: usize,
    pub converged: bool,
}

impl BarrierProblem {
    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        -self.log_vars.iter().map(|&i| z[i].ln_1p()).sum::<f64>()
    }

    pub fn is_strictly_feasible(&self, z: &DVector<f64>) -> bool {
        self.log_vars.iter().all(|&i| z[i] > -1.0) && self.constraints.iter().all(|c| c.eval(z) < 0.0)
    }

    fn barrier_value(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = t * self.objective(z);
        for c in &self.constraints {
            let s = -c.eval(z);
            if !(s > 0.0) {
                return None;
            }
            v -= s.ln();
        }
        v.is_finite().then_some(v)
    }

    fn gradient_hessian(&self, z: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for &i in &self.log_vars {
            let u = 1.0 + z[i];
            g[i] -= t / u;
            h[(i, i)] += t / (u * u);
        }
        let mut grad_c = DVector::zeros(n);
        for c in &self.constraints {
            grad_c.fill(0.0);
            let mut value = c.constant;
            for &(i, b) in &c.linear.0 {
                grad_c[i] += b;
                value += b * z[i];
            }
            for a in &c.squares {
                let av = a.eval(z);
                value += av * av;
                for &(i, ai) in &a.0 {
                    grad_c[i] += 2.0 * av * ai;
                }
            }
            let s = -value;
            g.axpy(1.0 / s, &grad_c, 1.0);
            h.ger(1.0 / (s * s), &grad_c, &grad_c, 1.0);
            for a in &c.squares {
                for &(i, ai) in &a.0 {
                    for &(j, aj) in &a.0 {
                        h[(i, j)] += 2.0 * ai * aj / s;
                    }
                }
            }
        }
        (g, h)
    }

    /// Runs the barrier method from a strictly feasible `start`.
    pub fn solve(&self, start: DVector<f64>, opts: &BarrierOptions) -> BarrierResult {
        assert_eq!(start.len(), self.dim);
        debug_assert!(self.is_strictly_feasible(&start));
        let m = self.constraints.len().max(1) as f64;
        let mut z = start;
        let mut t = opts.t0;
        let mut steps = 0;
        let mut converged = true;
        loop {
            let inner_ok = self.centre(&mut z, t, opts, &mut steps);
            converged &= inner_ok;
            if m / t < opts.gap_tol {
                break;
            }
            t *= opts.growth;
        }
        BarrierResult {
            objective: self.objective(&z),
            gap: m / t,
            z,
            newton_steps: steps,
            converged,
        }
    }

    /// Damped Newton on the barrier function for a fixed `t`.
    fn centre(&self, z: &mut DVector<f64>, t: f64, opts: &BarrierOptions, steps: &mut usize) -> bool {
        const ALPHA: f64 = 0.25;
        const BETA: f64 = 0.5;
        for _ in 0..opts.max_newton {
            let (g, h) = self.gradient_hessian(z, t);
            let Some(dz) = newton_direction(&h, &g) else {
                return false;
            };
            let decrement = -g.dot(&dz);
            if !(decrement > 0.0) || decrement / 2.0 <= opts.newton_tol {
                return true;
            }
            let Some(f0) = self.barrier_value(z, t) else {
                return false;
            };
            let mut s = 1.0;
            loop {
                let trial = &*z + &dz * s;
                if let Some(f1) = self.barrier_value(&trial, t) {
                    if f1 <= f0 - ALPHA * s * decrement {
                        *z = trial;
                        break;
                    }
                }
                s *= BETA;
                if s < 1e-20 {
                    // no progress possible in floating point
                    return true;
                }
            }
            *steps += 1;
        }
        false
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Some(-chol.solve(g));
    }
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut reg = 1e-14 * scale;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(chol) = hr.cholesky() {
            return Some(-chol.solve(g));
        }
        reg *= 100.0;
    }
    None
}
