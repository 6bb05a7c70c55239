//! Network geometry and random user drops.

use super::scenario::{ArrayCovariance, NetworkScenario, ScattererCovariance};
use super::HarnessError;
use crate::channel::{build_covariance, pathloss_db, pathloss_linear, CovarianceKind, CovarianceSpec, LinkStatistics, NetworkStatistics};
use crate::estimation::{EstimatorBank, PilotConfig};
use crate::linalg::CMat;
use crate::rng::{stream, Domain};
use crate::sefficiency::NetworkCoefficients;
use crate::units::db_to_linear;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::sync::Arc;

/// Rejection sampling gives up after this many draws for a single user.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1_000_000;

/// Square cells on a grid with the base station at each cell centre.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    pub side_km: f64,
    pub columns: usize,
    /// Base-station coordinates, km.
    pub base_stations: Vec<[f64; 2]>,
}

impl Geometry {
    pub fn new(cells: usize, area_km2: f64) -> Self {
        let side_km = (area_km2 / cells as f64).sqrt();
        let columns = (cells as f64).sqrt().ceil() as usize;
        let base_stations = (0..cells)
            .map(|l| [((l % columns) as f64 + 0.5) * side_km, ((l / columns) as f64 + 0.5) * side_km])
            .collect();
        Self { side_km, columns, base_stations }
    }

    /// Lower-left corner of cell `l`.
    pub fn origin(&self, l: usize) -> [f64; 2] {
        let bs = self.base_stations[l];
        [bs[0] - self.side_km / 2.0, bs[1] - self.side_km / 2.0]
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// One realization of user positions and shadowing with its statistics.
#[derive(Debug, Clone)]
pub struct Drop {
    pub index: usize,
    /// User positions in km, flat (cell-major) order.
    pub positions: Vec<[f64; 2]>,
    /// Distances in km, indexed `[bs][user]`.
    pub distances: Vec<Vec<f64>>,
    /// Shadow fading in dB, indexed `[bs][user]`.
    pub shadow_db: Vec<Vec<f64>>,
    pub network: NetworkStatistics,
}

impl Drop {
    pub fn serving_distance(&self, flat: usize, users_per_cell: usize) -> f64 {
        self.distances[flat / users_per_cell][flat]
    }
}

/// Uniform positions with the minimum-distance exclusion, fresh shadowing,
/// and the covariance of every `(bs, user)` link.
pub fn drop_users(scenario: &NetworkScenario, index: usize) -> Result<Drop, HarnessError> {
    let n = &scenario.network;
    let geometry = Geometry::new(n.cells, n.area_km2);
    let k = n.users_per_cell;
    let mut rng = stream(scenario.seed, Domain::Positions, index as u64, 0);
    let mut positions = Vec::with_capacity(n.cells * k);
    for l in 0..n.cells {
        let origin = geometry.origin(l);
        for user in 0..k {
            let mut attempts = 0;
            let pos = loop {
                if attempts == MAX_PLACEMENT_ATTEMPTS {
                    return Err(HarnessError::Geometry(format!("could not place user {user} of cell {l} after {attempts} attempts")));
                }
                attempts += 1;
                let p = [origin[0] + geometry.side_km * rng.random::<f64>(), origin[1] + geometry.side_km * rng.random::<f64>()];
                if distance(p, geometry.base_stations[l]) >= n.min_distance_km {
                    break p;
                }
            };
            positions.push(pos);
        }
    }

    let mut shadow_rng = stream(scenario.seed, Domain::Shadowing, index as u64, 0);
    let users = positions.len();
    let mut distances = vec![vec![0.0; users]; n.cells];
    let mut shadow_db = vec![vec![0.0; users]; n.cells];
    for u in 0..users {
        let serving = u / k;
        for bs in 0..n.cells {
            distances[bs][u] = distance(positions[u], geometry.base_stations[bs]);
        }
        let mut attempts = 0;
        loop {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(HarnessError::Geometry(format!("no shadowing draw makes cell {serving} the strongest for user {u}")));
            }
            attempts += 1;
            for bs in 0..n.cells {
                let z: f64 = shadow_rng.sample(StandardNormal);
                shadow_db[bs][u] = n.shadow_std_db * z;
            }
            if !n.serving_strongest {
                break;
            }
            let gains = (0..n.cells).map(|bs| pathloss_db(distances[bs][u], shadow_db[bs][u])).collect::<Result<Vec<_>, _>>()?;
            if gains.iter().all(|&g| g <= gains[serving]) {
                break;
            }
        }
    }

    let rtilde = Arc::new(scatterer_covariance(scenario)?);
    let loss = db_to_linear(-n.penetration_loss_db);
    let network = {
        let mut links = Vec::with_capacity(n.cells * users);
        for bs in 0..n.cells {
            for u in 0..users {
                let beta = pathloss_linear(distances[bs][u], shadow_db[bs][u])? * loss;
                let d = [positions[u][0] - geometry.base_stations[bs][0], positions[u][1] - geometry.base_stations[bs][1]];
                let r = array_covariance(scenario, d[1].atan2(d[0]))?;
                links.push(LinkStatistics::new(beta, Arc::new(r), rtilde.clone())?);
            }
        }
        NetworkStatistics::new(n.cells, k, links)?
    };
    Ok(Drop { index, positions, distances, shadow_db, network })
}

/// Array covariance toward a user seen at `angle` radians.
pub fn array_covariance(scenario: &NetworkScenario, angle: f64) -> Result<CMat, HarnessError> {
    let m = scenario.network.antennas;
    let kind = match scenario.covariance.array {
        ArrayCovariance::Identity => CovarianceKind::Identity,
        ArrayCovariance::LocalScattering { spread_deg } => CovarianceKind::LocalScattering { angle, spread: spread_deg.to_radians() },
        ArrayCovariance::Exponential { correlation } => CovarianceKind::Exponential { correlation, phase: angle },
    };
    Ok(build_covariance(&CovarianceSpec { kind, dimension: m })?)
}

pub fn scatterer_covariance(scenario: &NetworkScenario) -> Result<CMat, HarnessError> {
    let s = scenario.network.scatterers;
    let spec = match scenario.covariance.scatterer {
        ScattererCovariance::Identity => CovarianceSpec::identity(s),
        ScattererCovariance::Exponential { correlation } => CovarianceSpec::exponential(s, correlation),
    };
    Ok(build_covariance(&spec)?)
}

/// A drop with its estimators and closed-form coefficients.
pub struct PreparedDrop {
    pub drop: Drop,
    pub config: PilotConfig,
    pub bank: EstimatorBank,
    pub coeffs: NetworkCoefficients,
    pub sigma2: f64,
}

pub fn prepare_drop(scenario: &NetworkScenario, index: usize) -> Result<PreparedDrop, HarnessError> {
    let drop = drop_users(scenario, index)?;
    let n = &scenario.network;
    let p = &scenario.pilots;
    let config = PilotConfig::same_index(n.cells, n.users_per_cell, p.tau_p, p.tau_c, p.power_mw)?;
    let sigma2 = scenario.sigma2_mw();
    let bank = EstimatorBank::new(&drop.network, &config, sigma2)?;
    let coeffs = NetworkCoefficients::new(&drop.network, &bank, &config, sigma2)?;
    Ok(PreparedDrop { drop, config, bank, coeffs, sigma2 })
}
