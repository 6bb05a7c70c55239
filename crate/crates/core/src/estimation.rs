//! Pilot bookkeeping and LMMSE channel estimation.
//!
//! Pilots are columns of a `τ_p`-point DFT, so `φ_t^H φ_s = τ_p δ_ts`. After
//! correlating the received pilot block with `φ_t^*` base station `l` sees
//!
//! ```text
//! y = Σ_{u ∈ P_t} sqrt(p̂_u) τ_p h_u + n,   n ~ CN(0, σ² τ_p I)
//! ```
//!
//! and the LMMSE estimate of user `u`'s channel is
//! `ĥ_u = sqrt(p̂_u) β_u d_u R_u Ψ y` with
//! `Ψ = (Σ_{P_t} τ_p p̂ β d R + σ² I)^{-1}`. `Ψ` depends only on large-scale
//! statistics and is factored once per (base station, pilot).

use crate::channel::NetworkStatistics;
use crate::linalg::{self, CMat, CVec, LinalgError};
use crate::UserId;
use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::{Col, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("invalid pilot configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// How pilots are handed out in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotAssignment {
    /// User `k` of every cell uses pilot `k`.
    SameIndex,
    /// `map[l][k]` is the pilot of user `k` in cell `l`.
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotConfig {
    tau_p: usize,
    tau_c: usize,
    users_per_cell: usize,
    assignment: Vec<usize>,
    pilot_powers: Vec<f64>,
}

impl PilotConfig {
    /// `assignment` and `pilot_powers` are indexed by flat user id.
    pub fn new(
        tau_p: usize,
        tau_c: usize,
        users_per_cell: usize,
        assignment: Vec<usize>,
        pilot_powers: Vec<f64>,
    ) -> Result<Self, EstimationError> {
        if tau_p == 0 || tau_p >= tau_c {
            return Err(EstimationError::InvalidConfig(format!(
                "need 0 < tau_p < tau_c, got tau_p = {tau_p}, tau_c = {tau_c}"
            )));
        }
        if users_per_cell == 0 || assignment.is_empty() || assignment.len() % users_per_cell != 0 {
            return Err(EstimationError::InvalidConfig("assignment does not cover whole cells".into()));
        }
        if pilot_powers.len() != assignment.len() {
            return Err(EstimationError::DimensionMismatch { expected: assignment.len(), found: pilot_powers.len() });
        }
        if let Some(&t) = assignment.iter().find(|&&t| t >= tau_p) {
            return Err(EstimationError::InvalidConfig(format!("pilot index {t} outside [0, {tau_p})")));
        }
        if let Some(&p) = pilot_powers.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
            return Err(EstimationError::InvalidConfig(format!("pilot power {p} must be positive")));
        }
        Ok(Self { tau_p, tau_c, users_per_cell, assignment, pilot_powers })
    }

    pub fn from_assignment(
        assignment: &PilotAssignment,
        cells: usize,
        users_per_cell: usize,
        tau_p: usize,
        tau_c: usize,
        pilot_power: f64,
    ) -> Result<Self, EstimationError> {
        let flat = match assignment {
            PilotAssignment::SameIndex => {
                if users_per_cell > tau_p {
                    return Err(EstimationError::InvalidConfig(format!(
                        "same-index pilots need K = {users_per_cell} <= tau_p = {tau_p}"
                    )));
                }
                (0..cells * users_per_cell).map(|i| i % users_per_cell).collect()
            }
            PilotAssignment::Explicit(map) => {
                if map.len() != cells || map.iter().any(|row| row.len() != users_per_cell) {
                    return Err(EstimationError::InvalidConfig(format!(
                        "explicit pilot map must be {cells} x {users_per_cell}"
                    )));
                }
                map.iter().flatten().copied().collect()
            }
        };
        Self::new(tau_p, tau_c, users_per_cell, flat, vec![pilot_power; cells * users_per_cell])
    }

    pub fn same_index(cells: usize, users_per_cell: usize, tau_p: usize, tau_c: usize, pilot_power: f64) -> Result<Self, EstimationError> {
        Self::from_assignment(&PilotAssignment::SameIndex, cells, users_per_cell, tau_p, tau_c, pilot_power)
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn tau_c(&self) -> usize {
        self.tau_c
    }

    /// Fraction of the coherence block left for data, `1 − τ_p/τ_c`.
    pub fn prelog(&self) -> f64 {
        1.0 - self.tau_p as f64 / self.tau_c as f64
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn num_users(&self) -> usize {
        self.assignment.len()
    }

    pub fn cells(&self) -> usize {
        self.assignment.len() / self.users_per_cell
    }

    fn index(&self, user: UserId) -> Result<usize, EstimationError> {
        if user.user >= self.users_per_cell || user.cell >= self.cells() {
            return Err(EstimationError::UnknownUser(user));
        }
        Ok(user.flat(self.users_per_cell))
    }

    pub fn pilot(&self, user: UserId) -> Result<usize, EstimationError> {
        Ok(self.assignment[self.index(user)?])
    }

    pub fn pilot_power(&self, user: UserId) -> Result<f64, EstimationError> {
        Ok(self.pilot_powers[self.index(user)?])
    }

    pub fn pilot_powers(&self) -> &[f64] {
        &self.pilot_powers
    }

    /// Users holding pilot `t`, in flat order.
    pub fn sharers(&self, t: usize) -> Vec<UserId> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == t)
            .map(|(i, _)| UserId::from_flat(i, self.users_per_cell))
            .collect()
    }
}

/// All users that share `user`'s pilot, including `user` itself.
pub fn pilot_reuse_set(config: &PilotConfig, user: UserId) -> Result<Vec<UserId>, EstimationError> {
    Ok(config.sharers(config.pilot(user)?))
}

/// Column `index` of the `τ_p`-point DFT; `‖φ‖² = τ_p`.
pub fn pilot_sequence(tau_p: usize, index: usize) -> Vec<Complex64> {
    (0..tau_p)
        .map(|i| Complex64::from_polar(1.0, -2.0 * PI * (index * i % tau_p) as f64 / tau_p as f64))
        .collect()
}

/// Correlates the received pilot block with the target's pilot.
///
/// `channels[u]` is user `u`'s channel toward the observing base station
/// (flat order) and `noise` the `M × τ_p` receiver noise of the pilot phase.
pub fn received_pilot(
    channels: &[CVec],
    config: &PilotConfig,
    noise: &CMat,
    target: UserId,
) -> Result<CVec, EstimationError> {
    if channels.len() != config.num_users() {
        return Err(EstimationError::DimensionMismatch { expected: config.num_users(), found: channels.len() });
    }
    let m = noise.nrows();
    if noise.ncols() != config.tau_p {
        return Err(EstimationError::DimensionMismatch { expected: config.tau_p, found: noise.ncols() });
    }
    if let Some(h) = channels.iter().find(|h| h.nrows() != m) {
        return Err(EstimationError::DimensionMismatch { expected: m, found: h.nrows() });
    }
    let t = config.pilot(target)?;
    let phi = pilot_sequence(config.tau_p, t);
    let tau = config.tau_p as f64;
    let mut y: CVec = Col::from_fn(m, |i| (0..config.tau_p).map(|s| noise[(i, s)] * phi[s].conj()).sum());
    for u in config.sharers(t) {
        let h = &channels[u.flat(config.users_per_cell)];
        let amp = config.pilot_power(u)?.sqrt() * tau;
        for i in 0..m {
            y[i] += h[i] * amp;
        }
    }
    Ok(y)
}

/// `Ψ` for one (base station, pilot) pair, held as the Cholesky factor of
/// `Ψ^{-1}` together with the explicit inverse.
#[derive(Debug, Clone)]
pub struct PsiOperator {
    bs: usize,
    pilot: usize,
    llt: Llt<Complex64>,
    psi: CMat,
    a_coeffs: Vec<(UserId, f64)>,
}

impl PsiOperator {
    pub fn new(
        network: &NetworkStatistics,
        config: &PilotConfig,
        bs: usize,
        pilot: usize,
        sigma2: f64,
    ) -> Result<Self, EstimationError> {
        if !(sigma2 > 0.0) {
            return Err(EstimationError::InvalidConfig(format!("noise power {sigma2} must be positive")));
        }
        let m = network.antennas();
        let tau = config.tau_p as f64;
        let mut inv = linalg::scaled(&linalg::identity(m), sigma2);
        let mut a_coeffs = Vec::new();
        for u in config.sharers(pilot) {
            let link = network.link(bs, u);
            let a = tau * config.pilot_power(u)? * link.beta() * link.d();
            inv += linalg::scaled(link.r(), a);
            a_coeffs.push((u, a));
        }
        let inv = linalg::hermitian_part(&inv);
        let llt = inv.llt(Side::Lower).map_err(|_| LinalgError::NotPositiveDefinite)?;
        let psi = linalg::hermitian_part(&llt.inverse());
        Ok(Self { bs, pilot, llt, psi, a_coeffs })
    }

    pub fn bs(&self) -> usize {
        self.bs
    }

    pub fn pilot(&self) -> usize {
        self.pilot
    }

    /// `a = τ_p p̂ β d` for every pilot sharer, as seen at this base station.
    pub fn a_coeffs(&self) -> &[(UserId, f64)] {
        &self.a_coeffs
    }

    /// Explicit `Ψ`.
    pub fn psi(&self) -> &CMat {
        &self.psi
    }

    /// `Ψ X` via the factorization of `Ψ^{-1}`.
    pub fn solve(&self, rhs: &CMat) -> CMat {
        self.llt.solve(rhs)
    }

    pub fn apply(&self, y: &CVec) -> CVec {
        self.llt.solve(y)
    }
}

/// Estimation statistics of one user at one base station.
#[derive(Debug, Clone)]
pub struct EstimateStatistics {
    user: UserId,
    psi: Arc<PsiOperator>,
    /// `Ψ R`.
    c: CMat,
    /// `R Ψ R`.
    a: CMat,
    /// `R Ψ`, the estimator up to a scalar.
    combiner: CMat,
    gain: f64,
    cov_scale: f64,
}

impl EstimateStatistics {
    pub fn new(
        network: &NetworkStatistics,
        config: &PilotConfig,
        psi: Arc<PsiOperator>,
        user: UserId,
    ) -> Result<Self, EstimationError> {
        if config.pilot(user)? != psi.pilot {
            return Err(EstimationError::InvalidConfig(format!("{user} does not use pilot {}", psi.pilot)));
        }
        let link = network.link(psi.bs, user);
        let r = link.r();
        let c = psi.solve(r);
        let a = linalg::hermitian_part(&(r * &c));
        let combiner = c.adjoint().to_owned();
        let p = config.pilot_power(user)?;
        let bd = link.beta() * link.d();
        Ok(Self {
            user,
            psi,
            c,
            a,
            combiner,
            gain: p.sqrt() * bd,
            cov_scale: p * bd * bd * config.tau_p as f64,
        })
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    pub fn bs(&self) -> usize {
        self.psi.bs
    }

    pub fn psi(&self) -> &PsiOperator {
        &self.psi
    }

    pub fn a_coeffs(&self) -> &[(UserId, f64)] {
        &self.psi.a_coeffs
    }

    /// `Ψ R` of this user's link.
    pub fn psi_r(&self) -> &CMat {
        &self.c
    }

    /// `R Ψ R`.
    pub fn r_psi_r(&self) -> &CMat {
        &self.a
    }

    /// `tr(R Ψ R)`.
    pub fn trace_r_psi_r(&self) -> f64 {
        linalg::trace(&self.a).re
    }

    /// `p̂ β² d² τ_p`, the factor in front of `R Ψ R` in the estimate covariance.
    pub fn covariance_scale(&self) -> f64 {
        self.cov_scale
    }

    /// `sqrt(p̂) β d`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `R Ψ`.
    pub fn combiner(&self) -> &CMat {
        &self.combiner
    }

    pub fn estimate(&self, y: &CVec) -> CVec {
        let w = &self.combiner * y;
        Col::from_fn(w.nrows(), |i| w[i] * self.gain)
    }

    pub fn covariance(&self) -> CMat {
        linalg::scaled(&self.a, self.cov_scale)
    }
}

/// `sqrt(p̂) β d R Ψ y`.
pub fn lmmse_estimate(
    stats: &crate::channel::LinkStatistics,
    est: &EstimateStatistics,
    y: &CVec,
    pilot_power: f64,
) -> Result<CVec, EstimationError> {
    let m = stats.antennas();
    if y.nrows() != m || est.combiner.nrows() != m {
        return Err(EstimationError::DimensionMismatch { expected: m, found: y.nrows() });
    }
    let w = &est.combiner * y;
    let g = pilot_power.sqrt() * stats.beta() * stats.d();
    Ok(Col::from_fn(m, |i| w[i] * g))
}

/// `p̂ β² d² τ_p R Ψ R`.
pub fn estimate_covariance(
    stats: &crate::channel::LinkStatistics,
    est: &EstimateStatistics,
    pilot_power: f64,
    tau_p: usize,
) -> CMat {
    let bd = stats.beta() * stats.d();
    linalg::scaled(&est.a, pilot_power * bd * bd * tau_p as f64)
}

/// Every `Ψ` of a network and the serving-link estimate statistics of every
/// user.
#[derive(Debug, Clone)]
pub struct EstimatorBank {
    operators: BTreeMap<(usize, usize), Arc<PsiOperator>>,
    serving: Vec<EstimateStatistics>,
    users_per_cell: usize,
}

impl EstimatorBank {
    pub fn new(network: &NetworkStatistics, config: &PilotConfig, sigma2: f64) -> Result<Self, EstimationError> {
        if config.num_users() != network.num_users() || config.users_per_cell() != network.users_per_cell() {
            return Err(EstimationError::DimensionMismatch { expected: network.num_users(), found: config.num_users() });
        }
        let mut operators = BTreeMap::new();
        let mut serving = Vec::with_capacity(network.num_users());
        for user in network.users() {
            let key = (user.cell, config.pilot(user)?);
            let op = match operators.get(&key) {
                Some(op) => Arc::clone(op),
                None => {
                    let op = Arc::new(PsiOperator::new(network, config, key.0, key.1, sigma2)?);
                    operators.insert(key, Arc::clone(&op));
                    op
                }
            };
            serving.push(EstimateStatistics::new(network, config, op, user)?);
        }
        Ok(Self { operators, serving, users_per_cell: network.users_per_cell() })
    }

    pub fn operator(&self, bs: usize, pilot: usize) -> Option<&Arc<PsiOperator>> {
        self.operators.get(&(bs, pilot))
    }

    /// Statistics of `user` at its serving base station.
    pub fn serving(&self, user: UserId) -> &EstimateStatistics {
        &self.serving[user.flat(self.users_per_cell)]
    }
}
