use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::bb::DEFAULT_EPSILON;
use crate::geometry::{dbm_to_watts, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Random,
    Deterministic,
    CsiSweep,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Random => "random",
            Scenario::Deterministic => "deterministic",
            Scenario::CsiSweep => "csi-sweep",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Scenario::Random),
            "deterministic" => Ok(Scenario::Deterministic),
            "csi-sweep" => Ok(Scenario::CsiSweep),
            _ => Err(Error::Parse(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Greedy,
    Sca,
    ClosedForm,
    Bb,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Greedy, Method::Sca, Method::ClosedForm, Method::Bb];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Sca => "sca",
            Method::ClosedForm => "closed-form",
            Method::Bb => "bb",
        }
    }

    /// Whether the method can run with `k` far users holding `dx` beams each.
    pub fn applies(&self, k: usize, dx: usize) -> bool {
        match self {
            Method::Greedy | Method::Sca => true,
            Method::ClosedForm => k == 1,
            Method::Bb => dx == 1,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Method::ClosedForm | Method::Bb)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}` (expected greedy, sca, closed-form or bb)")))
    }
}

/// Everything an experiment run depends on. Powers in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Array sizes N; every trial is evaluated at each.
    pub n: Vec<usize>,
    pub m: usize,
    pub k: usize,
    pub dx: usize,
    /// Per-beam budget sweep.
    pub pdbm: Vec<f64>,
    /// CSI quality sweep, used by the csi-sweep scenario.
    pub rho: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Deterministic scenario: D_x values run with K = 1.
    pub dx_sweep: Vec<usize>,
    /// Deterministic scenario: K values run with D_x = 1.
    pub k_sweep: Vec<usize>,
    pub carrier_hz: f64,
    pub noise_dbm: f64,
    pub target_rate: f64,
    pub bb_epsilon: f64,
    /// Record wall time per row; off by default so reruns are byte-identical.
    pub timing: bool,
    /// Beam selection order over far-field users; index order when absent.
    #[serde(default)]
    pub user_order: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            n: vec![64, 128],
            m: 36,
            k: 2,
            dx: 2,
            pdbm: vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            rho: vec![1.0],
            trials: 100,
            seed: 1,
            methods: vec![Method::Greedy, Method::Sca],
            dx_sweep: vec![1, 2, 4, 6, 8],
            k_sweep: vec![1, 2, 3],
            carrier_hz: 28e9,
            noise_dbm: -80.0,
            target_rate: 0.1,
            bb_epsilon: DEFAULT_EPSILON,
            timing: false,
            user_order: None,
        };
        match scenario {
            Scenario::Random => base,
            Scenario::Deterministic => Self {
                n: vec![64],
                pdbm: vec![30.0],
                trials: 1,
                methods: Method::ALL.to_vec(),
                ..base
            },
            Scenario::CsiSweep => Self {
                n: vec![64],
                k: 4,
                dx: 4,
                pdbm: vec![30.0],
                rho: vec![0.1, 0.25, 0.5, 0.75, 1.0],
                trials: 200,
                ..base
            },
        }
    }

    /// System parameters for one (N, K, D_x, P) point.
    pub fn system(&self, n: usize, k: usize, dx: usize, pdbm: f64) -> SystemConfig {
        SystemConfig {
            antennas: n,
            near_users: self.m,
            far_users: k,
            beams_per_user: dx,
            carrier_hz: self.carrier_hz,
            spacing: None,
            noise_power: dbm_to_watts(self.noise_dbm),
            beam_budget: dbm_to_watts(pdbm),
            target_rate: self.target_rate,
            csi_quality: 1.0,
            user_order: self.user_order.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n.is_empty() || self.pdbm.is_empty() || self.methods.is_empty() {
            return bad("n, pdbm and methods must be non-empty".into());
        }
        if self.pdbm.iter().any(|p| !p.is_finite()) || !self.noise_dbm.is_finite() {
            return bad("powers must be finite".into());
        }
        if !(self.bb_epsilon > 0.0) {
            return bad("bb_epsilon must be positive".into());
        }
        match self.scenario {
            Scenario::Deterministic => {
                if self.dx_sweep.is_empty() && self.k_sweep.is_empty() {
                    return bad("deterministic run needs dx_sweep or k_sweep".into());
                }
                for &n in &self.n {
                    for (k, dx) in self.deterministic_points() {
                        self.system(n, k, dx, self.pdbm[0]).validate()?;
                    }
                }
            }
            Scenario::Random | Scenario::CsiSweep => {
                if self.trials == 0 {
                    return bad("trials must be positive".into());
                }
                for &n in &self.n {
                    self.system(n, self.k, self.dx, self.pdbm[0]).validate()?;
                }
                for m in &self.methods {
                    if !m.applies(self.k, self.dx) {
                        return bad(format!("method {m} does not apply to K = {}, D_x = {}", self.k, self.dx));
                    }
                }
            }
        }
        if self.user_order.is_some() && self.scenario == Scenario::Deterministic {
            return bad("user_order needs a fixed K; the deterministic scenario sweeps K".into());
        }
        if self.scenario == Scenario::CsiSweep && self.rho.is_empty() {
            return bad("csi-sweep needs at least one rho".into());
        }
        if let Some(r) = self.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return bad(format!("rho = {r} outside [0, 1]"));
        }
        Ok(())
    }

    /// Distinct (K, D_x) pairs: K = 1 over `dx_sweep`, then D_x = 1 over `k_sweep`.
    pub fn deterministic_points(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        let pairs = self.dx_sweep.iter().map(|&dx| (1, dx)).chain(self.k_sweep.iter().map(|&k| (k, 1)));
        for p in pairs {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn apply(&mut self, o: &ExperimentOverrides) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &o.$f {
                    self.$f = v.clone();
                }
            )*};
        }
        set!(n, m, k, dx, pdbm, rho, trials, seed, methods, dx_sweep, k_sweep, carrier_hz, noise_dbm, target_rate, bb_epsilon, timing);
        if let Some(order) = &o.user_order {
            self.user_order = Some(order.clone());
        }
    }

    /// Scenario defaults, then the TOML document `toml_text`, then `cli`.
    pub fn resolve(scenario: Scenario, toml_text: Option<&str>, cli: &ExperimentOverrides) -> Result<Self> {
        let mut cfg = Self::for_scenario(scenario);
        if let Some(text) = toml_text {
            let file = ExperimentOverrides::from_toml(text)?;
            if let Some(s) = file.scenario {
                if s != scenario {
                    return Err(Error::InvalidConfig(format!(
                        "config file is for scenario {s}, command is {scenario}"
                    )));
                }
            }
            cfg.apply(&file);
        }
        cfg.apply(cli);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Partial configuration, as read from a file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOverrides {
    pub scenario: Option<Scenario>,
    pub n: Option<Vec<usize>>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub dx: Option<usize>,
    pub pdbm: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub dx_sweep: Option<Vec<usize>>,
    pub k_sweep: Option<Vec<usize>>,
    pub carrier_hz: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub target_rate: Option<f64>,
    pub bb_epsilon: Option<f64>,
    pub timing: Option<bool>,
    pub user_order: Option<Vec<usize>>,
}

impl ExperimentOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_cli_precedence() {
        let file = "n = [128]\nseed = 7\nmethods = [\"sca\"]\npdbm = [20.0]\n";
        let cli = ExperimentOverrides {
            seed: Some(9),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(Scenario::Random, Some(file), &cli).unwrap();
        assert_eq!(cfg.n, vec![128]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.methods, vec![Method::Sca]);
        assert_eq!(cfg.pdbm, vec![20.0]);
        assert_eq!(cfg.m, 36);
    }

    #[test]
    fn unknown_keys_and_mismatched_scenario_rejected() {
        assert!(ExperimentOverrides::from_toml("antennas = 3").is_err());
        let r = ExperimentConfig::resolve(Scenario::Random, Some("scenario = \"csi-sweep\""), &Default::default());
        assert!(r.is_err());
    }

    #[test]
    fn method_applicability() {
        let cli = ExperimentOverrides {
            methods: Some(vec![Method::Bb]),
            ..Default::default()
        };
        assert!(ExperimentConfig::resolve(Scenario::Random, None, &cli).is_err());
        let cli = ExperimentOverrides {
            methods: Some(vec![Method::Bb]),
            dx: Some(1),
            ..Default::default()
        };
        assert!(ExperimentConfig::resolve(Scenario::Random, None, &cli).is_ok());
    }

    #[test]
    fn deterministic_points_dedup() {
        let cfg = ExperimentConfig::for_scenario(Scenario::Deterministic);
        assert_eq!(cfg.deterministic_points(), vec![(1, 1), (1, 2), (1, 4), (1, 6), (1, 8), (2, 1), (3, 1)]);
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentConfig::for_scenario(Scenario::Random);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("gradient".parse::<Method>().is_err());
    }

    #[test]
    fn user_order_must_be_a_permutation() {
        let ok = ExperimentConfig::resolve(Scenario::Random, Some("user_order = [1, 0]"), &Default::default()).unwrap();
        assert_eq!(ok.system(64, 2, 2, 30.0).scheduling_order(), vec![1, 0]);
        assert!(ExperimentConfig::resolve(Scenario::Random, Some("user_order = [0, 0]"), &Default::default()).is_err());
        assert!(ExperimentConfig::resolve(Scenario::Random, Some("user_order = [0]"), &Default::default()).is_err());
        assert!(ExperimentConfig::resolve(Scenario::Deterministic, Some("user_order = [0]"), &Default::default()).is_err());
    }
}
