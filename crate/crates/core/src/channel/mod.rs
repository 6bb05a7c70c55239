//! Double-scattering channel model.
//!
//! A link from a single-antenna user to an `M`-antenna base station is
//!
//! ```text
//! h = sqrt(β / S) · R^{1/2} · G · R̃^{1/2} · g
//! ```
//!
//! with `G` (M×S) and `g` (S) i.i.d. `CN(0, 1)`. `R` is the correlation
//! between the array and its scatterer cluster, `R̃` the correlation between
//! the transmit- and receive-side scatterers. The submodules build these
//! ingredients, draw realizations and evaluate the moment formulas that the
//! closed-form SINR relies on.

mod covariance;
mod moments;
mod pathloss;
mod sample;

pub use covariance::{build_covariance, gauss_legendre, random_covariance, CovarianceKind, CovarianceSpec};
pub use moments::{cross_moment, self_fourth_moment};
pub use pathloss::{pathloss_db, pathloss_linear, MIN_DISTANCE_KM};
pub use sample::{sample_channel, ChannelRealization, LinkSampler, ScatterPayload};

use crate::linalg::{self, CMat, LinalgError};
use crate::UserId;
use std::sync::Arc;
use thiserror::Error;

/// Hermitian tolerance applied to `R` and `R̃`, relative to their largest entry.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid covariance parameter: {0}")]
    InvalidParameter(String),
    #[error("distance {distance_km} km is below the 35 m exclusion radius")]
    DistanceTooSmall { distance_km: f64 },
    #[error("large-scale gain must be positive and finite, got {0}")]
    NonPositiveGain(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("decomposition failed: {0}")]
    Decomposition(#[from] LinalgError),
}

/// Large-scale state of one (user, base station) link.
#[derive(Debug, Clone)]
pub struct LinkStatistics {
    beta: f64,
    r: Arc<CMat>,
    rtilde: Arc<CMat>,
    d: f64,
    rtilde_sq_trace: f64,
}

impl LinkStatistics {
    /// `S` is the dimension of `rtilde`.
    pub fn new(beta: f64, r: Arc<CMat>, rtilde: Arc<CMat>) -> Result<Self, ChannelError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ChannelError::NonPositiveGain(beta));
        }
        for m in [&r, &rtilde] {
            linalg::check_square(m)?;
            let asym = linalg::max_asymmetry(m);
            if asym > HERMITIAN_TOLERANCE * linalg::max_abs(m).max(1.0) {
                return Err(ChannelError::NotHermitian(asym));
            }
        }
        let s = rtilde.nrows();
        if s == 0 || r.nrows() == 0 {
            return Err(ChannelError::InvalidParameter("empty covariance".into()));
        }
        let d = linalg::trace(&rtilde).re / s as f64;
        if !(d > 0.0) {
            return Err(ChannelError::InvalidParameter(format!("tr(R̃)/S = {d} must be positive")));
        }
        let rtilde_sq_trace = linalg::frobenius_inner(&rtilde, &rtilde).re;
        Ok(Self { beta, r, rtilde, d, rtilde_sq_trace })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn antennas(&self) -> usize {
        self.r.nrows()
    }

    /// Number of scatterers `S`.
    pub fn scatterers(&self) -> usize {
        self.rtilde.nrows()
    }

    pub fn r(&self) -> &CMat {
        &self.r
    }

    pub fn rtilde(&self) -> &CMat {
        &self.rtilde
    }

    pub fn r_shared(&self) -> Arc<CMat> {
        Arc::clone(&self.r)
    }

    pub fn rtilde_shared(&self) -> Arc<CMat> {
        Arc::clone(&self.rtilde)
    }

    /// `d = tr(R̃)/S`.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// `tr(R̃²)`.
    pub fn rtilde_sq_trace(&self) -> f64 {
        self.rtilde_sq_trace
    }

    /// `tr(R̃²)/S²`, the finite-scatterer excess of the fourth moment.
    pub fn scatter_excess(&self) -> f64 {
        let s = self.scatterers() as f64;
        self.rtilde_sq_trace / (s * s)
    }

    /// Channel covariance `E{h h^H} = β d R`.
    pub fn channel_covariance(&self) -> CMat {
        linalg::scaled(&self.r, self.beta * self.d)
    }

    /// Same link with a different large-scale gain.
    pub fn with_beta(&self, beta: f64) -> Result<Self, ChannelError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ChannelError::NonPositiveGain(beta));
        }
        Ok(Self { beta, ..self.clone() })
    }

    pub fn sampler(&self) -> Result<LinkSampler, ChannelError> {
        LinkSampler::new(self)
    }
}

/// Every link statistic of a network: all `L·K` users toward all `L` base
/// stations.
#[derive(Debug, Clone)]
pub struct NetworkStatistics {
    cells: usize,
    users_per_cell: usize,
    antennas: usize,
    links: Vec<LinkStatistics>,
}

impl NetworkStatistics {
    /// `links` is ordered by observing base station, then by user in
    /// cell-major order.
    pub fn new(cells: usize, users_per_cell: usize, links: Vec<LinkStatistics>) -> Result<Self, ChannelError> {
        let expected = cells * cells * users_per_cell;
        if expected == 0 {
            return Err(ChannelError::InvalidParameter("network needs at least one cell and user".into()));
        }
        if links.len() != expected {
            return Err(ChannelError::DimensionMismatch { expected, found: links.len() });
        }
        let antennas = links[0].antennas();
        if let Some(bad) = links.iter().find(|l| l.antennas() != antennas) {
            return Err(ChannelError::DimensionMismatch { expected: antennas, found: bad.antennas() });
        }
        Ok(Self { cells, users_per_cell, antennas, links })
    }

    /// Builds the table from a closure `(bs, user) -> LinkStatistics`.
    pub fn from_fn<F>(cells: usize, users_per_cell: usize, mut f: F) -> Result<Self, ChannelError>
    where
        F: FnMut(usize, UserId) -> Result<LinkStatistics, ChannelError>,
    {
        let mut links = Vec::with_capacity(cells * cells * users_per_cell);
        for bs in 0..cells {
            for flat in 0..cells * users_per_cell {
                links.push(f(bs, UserId::from_flat(flat, users_per_cell))?);
            }
        }
        Self::new(cells, users_per_cell, links)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.num_users()).map(|i| UserId::from_flat(i, self.users_per_cell))
    }

    /// Link from `user` to base station `bs`.
    pub fn link(&self, bs: usize, user: UserId) -> &LinkStatistics {
        &self.links[bs * self.num_users() + user.flat(self.users_per_cell)]
    }

    /// The serving link of `user`.
    pub fn serving(&self, user: UserId) -> &LinkStatistics {
        self.link(user.cell, user)
    }

    /// All links toward base station `bs`, indexed by flat user id.
    pub fn toward(&self, bs: usize) -> &[LinkStatistics] {
        let n = self.num_users();
        &self.links[bs * n..(bs + 1) * n]
    }

    pub fn contains(&self, user: UserId) -> bool {
        user.cell < self.cells && user.user < self.users_per_cell
    }
}

#[cfg(test)]
mod test {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn rejects_non_positive_beta() {
        let r = Arc::new(linalg::identity(2));
        assert!(matches!(
            LinkStatistics::new(0.0, r.clone(), r.clone()),
            Err(ChannelError::NonPositiveGain(_))
        ));
        assert!(LinkStatistics::new(-1.0, r.clone(), r.clone()).is_err());
        assert!(LinkStatistics::new(f64::NAN, r.clone(), r).is_err());
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut r = linalg::identity(3);
        r[(0, 1)] = Complex64::new(0.5, 0.0);
        let res = LinkStatistics::new(1.0, Arc::new(r), Arc::new(linalg::identity(2)));
        assert!(matches!(res, Err(ChannelError::NotHermitian(_))));
    }

    #[test]
    fn d_is_recomputed_from_rtilde() {
        let rt = build_covariance(&CovarianceSpec::exponential(5, 0.7)).unwrap();
        let half = Arc::new(linalg::scaled(&rt, 0.5));
        let link = LinkStatistics::new(2.0, Arc::new(linalg::identity(4)), half.clone()).unwrap();
        assert_eq!(link.scatterers(), 5);
        assert_eq!(link.d(), linalg::trace(&half).re / 5.0);
        assert!((link.d() - 0.5).abs() < 1e-15);
    }
}
