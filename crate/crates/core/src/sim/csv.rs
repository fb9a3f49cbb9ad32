use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = 4 * trial + tag";

pub const HEADER: [&str; 17] = [
    "trial",
    "seed",
    "scenario",
    "n",
    "m",
    "k",
    "dx",
    "p_dbm",
    "rho",
    "method",
    "sum_rate",
    "per_user_rates",
    "qos_violations",
    "solver_iterations",
    "optimality_gap",
    "redraws",
    "wall_time_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub seed: u64,
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub dx: usize,
    pub p_dbm: f64,
    pub rho: f64,
    pub method: String,
    pub sum_rate: f64,
    pub per_user_rates: Vec<f64>,
    pub qos_violations: usize,
    pub solver_iterations: usize,
    /// Exact optimum minus this method's rate, where an exact solver applies.
    pub optimality_gap: Option<f64>,
    /// Ill-conditioned drops discarded before this trial's drop.
    pub redraws: usize,
    pub wall_time_ms: Option<f64>,
}

/// `v` with 9 significant digits, fixed notation where it reads naturally.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let exp: i32 = sci.split_once('e').map_or(0, |(_, e)| e.parse().unwrap_or(0));
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let (mant, e) = sci.split_once('e').expect("scientific form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

impl ResultRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.seed.to_string(),
            self.scenario.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.k.to_string(),
            self.dx.to_string(),
            fmt_sig(self.p_dbm),
            fmt_sig(self.rho),
            self.method.clone(),
            fmt_sig(self.sum_rate),
            self.per_user_rates.iter().map(|r| fmt_sig(*r)).collect::<Vec<_>>().join(";"),
            self.qos_violations.to_string(),
            self.solver_iterations.to_string(),
            self.optimality_gap.map(fmt_sig).unwrap_or_default(),
            self.redraws.to_string(),
            self.wall_time_ms.map(fmt_sig).unwrap_or_default(),
        ]
    }
}

pub fn write_csv<W: Write>(out: &mut W, cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<()> {
    writeln!(out, "# version = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# scenario = {}", cfg.scenario)?;
    writeln!(out, "# seed = {}", cfg.seed)?;
    writeln!(out, "# generator = {GENERATOR}")?;
    writeln!(out, "# config_sha256 = {}", cfg.digest())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.fields()).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
