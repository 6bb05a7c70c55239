//! Scenario description, presets and TOML (de)serialization.

use crate::channel::MIN_DISTANCE_KM;
use crate::powerctl::{SolverOptions, UpdateOrder};
use crate::units::dbm_to_mw;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Covariance of the base-station array. The nominal angle of a link is
/// the direction of the user as seen from the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayCovariance {
    Identity,
    /// Gaussian angular spread around the user direction, in degrees.
    LocalScattering { spread_deg: f64 },
    /// `r^{|m−n|}` with phase `e^{jθ(m−n)}` given by the user direction.
    Exponential { correlation: f64 },
}

/// Covariance between the two scatterer clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScattererCovariance {
    Identity,
    Exponential { correlation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub area_km2: f64,
    pub min_distance_km: f64,
    pub shadow_std_db: f64,
    pub noise_dbm: f64,
    /// Informational only; the noise power is given directly.
    pub bandwidth_mhz: f64,
    pub scatterers: usize,
    /// Extra loss added to every link, dB.
    pub penetration_loss_db: f64,
    /// Redraw a user's shadowing until its own base station has the
    /// largest gain, so every user sits in the cell that would serve it.
    pub serving_strongest: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            cells: 4,
            users_per_cell: 5,
            antennas: 100,
            area_km2: 1.0,
            min_distance_km: MIN_DISTANCE_KM,
            shadow_std_db: 7.0,
            noise_dbm: -96.0,
            bandwidth_mhz: 20.0,
            scatterers: 21,
            penetration_loss_db: 0.0,
            serving_strongest: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceSection {
    pub array: ArrayCovariance,
    pub scatterer: ScattererCovariance,
}

impl Default for CovarianceSection {
    fn default() -> Self {
        Self {
            array: ArrayCovariance::LocalScattering { spread_deg: 30.0 },
            scatterer: ScattererCovariance::Exponential { correlation: 0.7 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotSection {
    pub tau_c: usize,
    pub tau_p: usize,
    pub power_mw: f64,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self { tau_c: 200, tau_p: 5, power_mw: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub p_max_mw: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub gauss_seidel: bool,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self { p_max_mw: 200.0, epsilon: 1e-3, max_iter: 500, gauss_seidel: false }
    }
}

/// Per-user SE targets: one value for everyone, or uniform in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Uniform(f64),
    Range([f64; 2]),
}

impl std::str::FromStr for TargetSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad SE target {x:?}: {e}"));
        match s.split_once(':') {
            Some((lo, hi)) => Ok(Self::Range([num(lo)?, num(hi)?])),
            None => Ok(Self::Uniform(num(s)?)),
        }
    }
}

impl std::fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Uniform(x) => write!(f, "{x}"),
            Self::Range([lo, hi]) => write!(f, "{lo}:{hi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub drops: usize,
    pub monte_carlo: usize,
    pub xi: TargetSpec,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { drops: 500, monte_carlo: 10_000, xi: TargetSpec::Uniform(1.5) }
    }
}

/// Everything an experiment depends on besides the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkScenario {
    pub seed: u64,
    pub network: NetworkSection,
    pub covariance: CovarianceSection,
    pub pilots: PilotSection,
    pub power: PowerSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Small arrays and few realizations for CI.
    Desk,
    /// Full-size simulation setup.
    Paper,
}

impl NetworkScenario {
    pub fn preset(preset: Preset) -> Self {
        let mut s = Self::default();
        s.apply_preset(preset);
        s
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Desk => {
                self.network.antennas = 32;
                self.experiment.monte_carlo = 1_000;
                self.experiment.drops = 100;
            }
            Preset::Paper => {
                let d = Self::default();
                self.network.antennas = d.network.antennas;
                self.experiment.monte_carlo = d.experiment.monte_carlo;
                self.experiment.drops = d.experiment.drops;
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn num_users(&self) -> usize {
        self.network.cells * self.network.users_per_cell
    }

    pub fn sigma2_mw(&self) -> f64 {
        dbm_to_mw(self.network.noise_dbm)
    }

    pub fn prelog(&self) -> f64 {
        1.0 - self.pilots.tau_p as f64 / self.pilots.tau_c as f64
    }

    /// Side of one square cell, km.
    pub fn cell_side_km(&self) -> f64 {
        (self.network.area_km2 / self.network.cells as f64).sqrt()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            epsilon: self.power.epsilon,
            max_iter: self.power.max_iter,
            order: if self.power.gauss_seidel { UpdateOrder::GaussSeidel } else { UpdateOrder::Jacobi },
            record_powers: false,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        let n = &self.network;
        if n.cells == 0 || n.users_per_cell == 0 || n.antennas == 0 || n.scatterers == 0 {
            return bad("cells, users_per_cell, antennas and scatterers must be positive".into());
        }
        if !(n.area_km2 > 0.0 && n.area_km2.is_finite()) {
            return bad(format!("area_km2 = {}", n.area_km2));
        }
        if !(n.min_distance_km >= MIN_DISTANCE_KM) {
            return bad(format!("min_distance_km = {} is below the pathloss model's {MIN_DISTANCE_KM} km", n.min_distance_km));
        }
        // the excluded disc must leave room inside the cell
        let half = self.cell_side_km() / 2.0;
        if n.min_distance_km >= half * std::f64::consts::SQRT_2 {
            return bad(format!("min_distance_km = {} leaves no room in a {:.3} km cell", n.min_distance_km, 2.0 * half));
        }
        if !(n.shadow_std_db >= 0.0 && n.shadow_std_db.is_finite()) {
            return bad(format!("shadow_std_db = {}", n.shadow_std_db));
        }
        if !n.noise_dbm.is_finite() || !n.penetration_loss_db.is_finite() {
            return bad("noise_dbm and penetration_loss_db must be finite".into());
        }
        match self.covariance.array {
            ArrayCovariance::Identity => {}
            ArrayCovariance::LocalScattering { spread_deg } if spread_deg > 0.0 && spread_deg.is_finite() => {}
            ArrayCovariance::Exponential { correlation } if (0.0..1.0).contains(&correlation) => {}
            other => return bad(format!("array covariance {other:?}")),
        }
        match self.covariance.scatterer {
            ScattererCovariance::Identity => {}
            ScattererCovariance::Exponential { correlation } if (0.0..1.0).contains(&correlation) => {}
            other => return bad(format!("scatterer covariance {other:?}")),
        }
        let p = &self.pilots;
        if p.tau_p == 0 || p.tau_p >= p.tau_c {
            return bad(format!("need 0 < tau_p < tau_c, got tau_p = {}, tau_c = {}", p.tau_p, p.tau_c));
        }
        if n.users_per_cell > p.tau_p {
            return bad(format!("{} users per cell need at least as many pilots, tau_p = {}", n.users_per_cell, p.tau_p));
        }
        if !(p.power_mw > 0.0 && p.power_mw.is_finite()) {
            return bad(format!("pilot power_mw = {}", p.power_mw));
        }
        let w = &self.power;
        if !(w.p_max_mw > 0.0 && w.p_max_mw.is_finite()) || !(w.epsilon > 0.0) || w.max_iter == 0 {
            return bad("power section needs p_max_mw > 0, epsilon > 0 and max_iter >= 1".into());
        }
        let e = &self.experiment;
        if e.drops == 0 || e.monte_carlo == 0 {
            return bad("drops and monte_carlo must be positive".into());
        }
        match e.xi {
            TargetSpec::Uniform(x) if x >= 0.0 && x.is_finite() => {}
            TargetSpec::Range([lo, hi]) if lo >= 0.0 && lo <= hi && hi.is_finite() => {}
            other => return bad(format!("SE target {other}")),
        }
        Ok(())
    }
}
