use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::BbOptions;
use crate::geometry::{deterministic_scenario, drop_half_ring, rayleigh_distance, wavelength, Position};

use super::config::{ExperimentConfig, Method, Scenario};
use super::csv::ResultRow;
use super::instance::{Instance, MethodResult, SolveOptions};

/// Inner radius of the near-field ring, metres.
pub const NEAR_RING_INNER: f64 = 5.0;
/// Array size whose Rayleigh distance bounds the near-field ring.
pub const NEAR_RING_ARRAY: usize = 64;
/// Array size whose Rayleigh distance starts the far-field ring.
pub const FAR_RING_ARRAY: usize = 128;
pub const FAR_RING_WIDTH: f64 = 10.0;
/// Ill-conditioned drops tolerated per trial before giving up.
pub const MAX_REDRAWS: usize = 1000;

const TAG_DROP: u64 = 0;
const TAG_CSI: u64 = 1;

/// Independent substream for `(trial, tag)`.
pub fn trial_rng(seed: u64, trial: usize, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4 * trial as u64 + tag);
    rng
}

/// Ring radii `(near_inner, near_outer, far_inner, far_outer)` in metres.
pub fn ring_radii(carrier_hz: f64) -> (f64, f64, f64, f64) {
    let lambda = wavelength(carrier_hz);
    let near = rayleigh_distance(NEAR_RING_ARRAY, lambda / 2.0, lambda);
    let far = rayleigh_distance(FAR_RING_ARRAY, lambda / 2.0, lambda);
    (NEAR_RING_INNER, near, far, far + FAR_RING_WIDTH)
}

/// One accepted drop built for every array size in `cfg.n`.
pub struct Drop {
    pub instances: Vec<Instance>,
    pub redraws: usize,
}

/// Draws user positions for `trial` until the ZF Gram matrix is well
/// conditioned at every array size. Positions do not depend on N.
pub fn random_drop(cfg: &ExperimentConfig, trial: usize) -> Result<Drop> {
    let mut rng = trial_rng(cfg.seed, trial, TAG_DROP);
    let (a, b, c, d) = ring_radii(cfg.carrier_hz);
    let mut redraws = 0;
    'draw: loop {
        let near = drop_half_ring(&mut rng, cfg.m, a, b)?;
        let far = drop_half_ring(&mut rng, cfg.k, c, d)?;
        let mut instances = Vec::with_capacity(cfg.n.len());
        for &n in &cfg.n {
            let sys = cfg.system(n, cfg.k, cfg.dx, cfg.pdbm[0]);
            match Instance::new(&sys, near.clone(), far.clone()) {
                Ok(inst) => instances.push(inst),
                Err(Error::IllConditioned { condition }) => {
                    redraws += 1;
                    log::info!("trial {trial}: redrawing, Gram condition {condition:e} at N = {n}");
                    if redraws > MAX_REDRAWS {
                        return Err(Error::NoConvergence(format!("trial {trial}: {redraws} ill-conditioned drops")));
                    }
                    continue 'draw;
                }
                Err(e) => return Err(e),
            }
        }
        return Ok(Drop { instances, redraws });
    }
}

fn solve_options(cfg: &ExperimentConfig) -> SolveOptions {
    SolveOptions {
        bb: BbOptions {
            epsilon: cfg.bb_epsilon,
            ..Default::default()
        },
        ..Default::default()
    }
}

struct RowContext<'a> {
    cfg: &'a ExperimentConfig,
    trial: usize,
    rho: f64,
    redraws: usize,
}

impl RowContext<'_> {
    fn rows(&self, inst: &Instance, methods: &[Method], with_gap: bool) -> Result<Vec<ResultRow>> {
        let opts = solve_options(self.cfg);
        let mut out = Vec::new();
        for &pdbm in &self.cfg.pdbm {
            let budget = crate::geometry::dbm_to_watts(pdbm);
            let mut results: Vec<(Method, MethodResult, Option<f64>)> = Vec::with_capacity(methods.len());
            for &method in methods {
                let start = self.cfg.timing.then(std::time::Instant::now);
                let r = inst.solve(method, budget, &opts)?;
                let ms = start.map(|t| t.elapsed().as_secs_f64() * 1e3);
                results.push((method, r, ms));
            }
            let exact = if with_gap {
                results
                    .iter()
                    .filter(|(m, r, _)| m.is_exact() && r.converged)
                    .map(|(_, r, _)| r.report.objective)
                    .reduce(f64::max)
            } else {
                None
            };
            for (method, r, ms) in results {
                let s = &inst.system;
                out.push(ResultRow {
                    trial: self.trial,
                    seed: self.cfg.seed,
                    scenario: self.cfg.scenario.to_string(),
                    n: s.antennas,
                    m: s.near_users,
                    k: s.far_users,
                    dx: s.beams_per_user,
                    p_dbm: pdbm,
                    rho: self.rho,
                    method: method.to_string(),
                    sum_rate: r.report.objective,
                    per_user_rates: r.report.user_rate.clone(),
                    qos_violations: r.report.qos_violations(),
                    solver_iterations: r.iterations,
                    optimality_gap: exact.map(|e| e - r.report.objective),
                    redraws: self.redraws,
                    wall_time_ms: ms,
                });
            }
        }
        Ok(out)
    }
}

fn map_trials<F>(trials: usize, f: F) -> Result<Vec<ResultRow>>
where
    F: Fn(usize) -> Result<Vec<ResultRow>> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let per_trial: Vec<Result<Vec<ResultRow>>> = (0..trials).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let per_trial: Vec<Result<Vec<ResultRow>>> = (0..trials).map(f).collect();
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(rows)
}

fn expect_scenario(cfg: &ExperimentConfig, want: Scenario) -> Result<()> {
    cfg.validate()?;
    if cfg.scenario != want {
        return Err(Error::InvalidConfig(format!("expected a {want} config, got {}", cfg.scenario)));
    }
    Ok(())
}

/// Monte Carlo over half-ring drops with perfect CSI.
pub fn run_random_drop(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_scenario(cfg, Scenario::Random)?;
    map_trials(cfg.trials, |trial| {
        let drop = random_drop(cfg, trial)?;
        let ctx = RowContext {
            cfg,
            trial,
            rho: 1.0,
            redraws: drop.redraws,
        };
        let mut rows = Vec::new();
        for inst in &drop.instances {
            rows.extend(ctx.rows(inst, &cfg.methods, false)?);
        }
        Ok(rows)
    })
}

/// Grid of near-field users and far-field users on an arc, swept over D_x
/// with one user and over K with one beam each.
pub fn run_deterministic(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_scenario(cfg, Scenario::Deterministic)?;
    let mut rows = Vec::new();
    let points = cfg.deterministic_points();
    for &n in &cfg.n {
        for (idx, &(k, dx)) in points.iter().enumerate() {
            let (near, far) = deterministic_scenario(cfg.m, k)?;
            warn_far(&far, cfg, n);
            let inst = Instance::new(&cfg.system(n, k, dx, cfg.pdbm[0]), near, far)?;
            let methods: Vec<Method> = cfg.methods.iter().copied().filter(|m| m.applies(k, dx)).collect();
            let ctx = RowContext {
                cfg,
                trial: idx,
                rho: 1.0,
                redraws: 0,
            };
            rows.extend(ctx.rows(&inst, &methods, true)?);
        }
    }
    Ok(rows)
}

fn warn_far(far: &[Position], cfg: &ExperimentConfig, n: usize) {
    let sys = cfg.system(n, far.len(), 1, cfg.pdbm[0]);
    let rd = sys.rayleigh_distance();
    if let Some(p) = far.iter().find(|p| p.norm() <= rd) {
        log::warn!("far-field user at {:.1} m sits inside the Rayleigh distance {rd:.1} m for N = {n}", p.norm());
    }
}

/// Optimizes on estimated far-field channels and evaluates on the true ones.
///
/// The error draw for a trial is shared by every rho, so rho only scales it.
pub fn run_csi_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    expect_scenario(cfg, Scenario::CsiSweep)?;
    map_trials(cfg.trials, |trial| {
        let drop = random_drop(cfg, trial)?;
        let mut rows = Vec::new();
        for inst in &drop.instances {
            for &rho in &cfg.rho {
                let mut rng = trial_rng(cfg.seed, trial, TAG_CSI);
                let est = inst.clone().with_estimate(&mut rng, rho)?;
                let ctx = RowContext {
                    cfg,
                    trial,
                    rho,
                    redraws: drop.redraws,
                };
                rows.extend(ctx.rows(&est, &cfg.methods, false)?);
            }
        }
        Ok(rows)
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    match cfg.scenario {
        Scenario::Random => run_random_drop(cfg),
        Scenario::Deterministic => run_deterministic(cfg),
        Scenario::CsiSweep => run_csi_sweep(cfg),
    }
}
