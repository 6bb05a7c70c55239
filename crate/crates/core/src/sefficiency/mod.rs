//! Uplink spectral efficiency with MR combining.
//!
//! For user `u = (l, k)` with `C = Ψ R`, `A = R Ψ R` and `T = tr(A)` at its
//! serving base station, the effective SINR is
//! `p_u z_u T² / (NI + CI + NO)` where
//!
//! * `NI = Σ_all p' m' tr(A R')`,
//! * `CI = Σ_{P∖u} p' z' |tr(R'C)|² + Σ_P p' z' e' |tr(R'C)|² + Σ_P p' z' e' tr(R'C R'C^H)`,
//! * `NO = σ² p̂ β² d² τ_p T`,
//!
//! with `e' = tr(R̃'²)/(d' S')²` the finite-scatterer excess. Everything is
//! affine in the data powers, so the per-user coefficients are computed once
//! per drop ([`SinrCoefficients`]) and evaluated cheaply for any power vector.

mod asymptotic;
mod montecarlo;

pub use asymptotic::{asymptotic_rate, AsymptoticCase, AsymptoticRate};
pub use montecarlo::{monte_carlo_sinr, MonteCarloEstimate, MonteCarloOptions};

use crate::channel::{ChannelError, NetworkStatistics};
use crate::estimation::{EstimationError, EstimatorBank, PilotConfig};
use crate::linalg::{self, CMat};
use crate::UserId;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("power of {user} is {power} (must be finite and non-negative)")]
    InvalidPower { user: UserId, power: f64 },
    #[error("tr(R̃²) vanishes for {0}")]
    ZeroScatterTrace(UserId),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// The four SINR components of one user at a given power vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrBreakdown {
    pub user: UserId,
    pub signal: f64,
    pub ni: f64,
    pub ci: f64,
    pub no: f64,
    /// Pilot-contamination part of `CI` (first sum).
    pub ci_coherent: f64,
    /// Finite-scatterer part of `CI` proportional to `|tr(R'C)|²` (second sum).
    pub ci_scatter_trace: f64,
    /// Finite-scatterer part of `CI` proportional to `tr(R'C R'C^H)` (third sum).
    pub ci_scatter_spread: f64,
    /// `m'` for every user toward the serving base station, flat order.
    pub m_coeffs: Vec<f64>,
    /// `z'` for every user toward the serving base station, flat order.
    pub z_coeffs: Vec<f64>,
    pub sinr: f64,
    pub prelog: f64,
}

impl SinrBreakdown {
    pub fn se(&self) -> f64 {
        rate(self.sinr, self.prelog)
    }
}

/// Power-independent coefficients of one user's closed-form SINR.
///
/// Vectors are indexed by flat user id and hold per-unit-power contributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrCoefficients {
    pub user: UserId,
    own: usize,
    /// `z_u T²`.
    pub signal: f64,
    /// `m' tr(A R')`.
    pub ni: Vec<f64>,
    /// `z' |tr(R'C)|²` for pilot sharers, zero elsewhere. The own entry
    /// equals `signal`.
    pub coherent: Vec<f64>,
    /// `z' e' |tr(R'C)|²` for pilot sharers.
    pub scatter_trace: Vec<f64>,
    /// `z' e' tr(R'C R'C^H)` for pilot sharers.
    pub scatter_spread: Vec<f64>,
    /// `NO`, independent of the data powers.
    pub noise: f64,
    pub m: Vec<f64>,
    pub z: Vec<f64>,
    pub sharers: Vec<bool>,
    pub prelog: f64,
}

impl SinrCoefficients {
    pub fn new(
        network: &NetworkStatistics,
        bank: &EstimatorBank,
        config: &PilotConfig,
        user: UserId,
        sigma2: f64,
    ) -> Result<Self, SeError> {
        if !network.contains(user) {
            return Err(EstimationError::UnknownUser(user).into());
        }
        let n = network.num_users();
        if config.num_users() != n {
            return Err(SeError::DimensionMismatch { expected: n, found: config.num_users() });
        }
        let est = bank.serving(user);
        let own_link = network.serving(user);
        let tau = config.tau_p() as f64;
        let g2 = config.pilot_power(user)? * (own_link.beta() * own_link.d()).powi(2);
        let c = est.psi_r();
        let a = est.r_psi_r();
        let t = est.trace_r_psi_r();
        let pilot = config.pilot(user)?;
        let own = user.flat(network.users_per_cell());

        let mut out = Self {
            user,
            own,
            signal: 0.0,
            ni: vec![0.0; n],
            coherent: vec![0.0; n],
            scatter_trace: vec![0.0; n],
            scatter_spread: vec![0.0; n],
            noise: sigma2 * g2 * tau * t,
            m: vec![0.0; n],
            z: vec![0.0; n],
            sharers: vec![false; n],
            prelog: config.prelog(),
        };
        for (i, link) in network.toward(user.cell).iter().enumerate() {
            let other = UserId::from_flat(i, network.users_per_cell());
            let bd = link.beta() * link.d();
            out.m[i] = bd * g2 * tau;
            out.z[i] = config.pilot_power(other)? * bd * bd * g2 * tau * tau;
            out.ni[i] = out.m[i] * linalg::trace_product(a, link.r()).re;
            if config.pilot(other)? != pilot {
                continue;
            }
            out.sharers[i] = true;
            let rc: CMat = link.r() * c;
            let coherent = if i == own { t * t } else { linalg::trace(&rc).norm_sqr() };
            let rch: CMat = link.r() * c.adjoint();
            let spread = linalg::trace_product(&rc, &rch).re;
            let excess = link.rtilde_sq_trace() / (link.d() * link.scatterers() as f64).powi(2);
            out.coherent[i] = out.z[i] * coherent;
            out.scatter_trace[i] = out.z[i] * excess * coherent;
            out.scatter_spread[i] = out.z[i] * excess * spread;
        }
        out.signal = out.coherent[own];
        Ok(out)
    }

    pub fn num_users(&self) -> usize {
        self.ni.len()
    }

    /// Flat index of the user these coefficients belong to.
    pub fn own_index(&self) -> usize {
        self.own
    }

    /// Contribution of user `other` to the SINR denominator per unit of its
    /// power. For the user itself this is its `NI` and finite-scatterer terms.
    pub fn denominator_coeff(&self, other: usize) -> f64 {
        let coherent = if other == self.own { 0.0 } else { self.coherent[other] };
        self.ni[other] + coherent + self.scatter_trace[other] + self.scatter_spread[other]
    }

    /// Own-power part of the denominator, `m_u tr(A R) + z_u e_u (T² + tr(RCRC^H))`.
    pub fn own_denominator_coeff(&self) -> f64 {
        self.denominator_coeff(self.own)
    }

    pub fn breakdown(&self, powers: &[f64]) -> Result<SinrBreakdown, SeError> {
        check_powers(powers, self.num_users(), self.user)?;
        let own = self.own;
        let mut b = SinrBreakdown {
            user: self.user,
            signal: powers[own] * self.signal,
            ni: 0.0,
            ci: 0.0,
            no: self.noise,
            ci_coherent: 0.0,
            ci_scatter_trace: 0.0,
            ci_scatter_spread: 0.0,
            m_coeffs: self.m.clone(),
            z_coeffs: self.z.clone(),
            sinr: 0.0,
            prelog: self.prelog,
        };
        for (i, &p) in powers.iter().enumerate() {
            b.ni += p * self.ni[i];
            if self.sharers[i] {
                if i != own {
                    b.ci_coherent += p * self.coherent[i];
                }
                b.ci_scatter_trace += p * self.scatter_trace[i];
                b.ci_scatter_spread += p * self.scatter_spread[i];
            }
        }
        b.ci = b.ci_coherent + b.ci_scatter_trace + b.ci_scatter_spread;
        b.sinr = if b.signal == 0.0 { 0.0 } else { b.signal / (b.ni + b.ci + b.no) };
        Ok(b)
    }

    /// Closed-form SINR without the breakdown bookkeeping. Powers are not
    /// validated.
    pub fn sinr(&self, powers: &[f64]) -> f64 {
        let signal = powers[self.own] * self.signal;
        if signal == 0.0 {
            return 0.0;
        }
        let den: f64 = powers
            .iter()
            .enumerate()
            .map(|(i, &p)| p * self.denominator_coeff(i))
            .sum::<f64>()
            + self.noise;
        signal / den
    }
}

fn check_powers(powers: &[f64], n: usize, user: UserId) -> Result<(), SeError> {
    if powers.len() != n {
        return Err(SeError::DimensionMismatch { expected: n, found: powers.len() });
    }
    if let Some(&p) = powers.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(SeError::InvalidPower { user, power: p });
    }
    Ok(())
}

/// Coefficients of every user of a network.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkCoefficients {
    pub users: Vec<SinrCoefficients>,
    pub users_per_cell: usize,
    pub prelog: f64,
}

impl NetworkCoefficients {
    pub fn new(
        network: &NetworkStatistics,
        bank: &EstimatorBank,
        config: &PilotConfig,
        sigma2: f64,
    ) -> Result<Self, SeError> {
        let users: Vec<UserId> = network.users().collect();
        let users = users
            .par_iter()
            .map(|&u| SinrCoefficients::new(network, bank, config, u, sigma2))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { users, users_per_cell: network.users_per_cell(), prelog: config.prelog() })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn get(&self, user: UserId) -> &SinrCoefficients {
        &self.users[user.flat(self.users_per_cell)]
    }

    pub fn sinrs(&self, powers: &[f64]) -> Vec<f64> {
        self.users.iter().map(|c| c.sinr(powers)).collect()
    }

    pub fn breakdowns(&self, powers: &[f64]) -> Result<Vec<SinrBreakdown>, SeError> {
        self.users.iter().map(|c| c.breakdown(powers)).collect()
    }
}

/// Closed-form SINR breakdown of `user` at data powers `powers` (mW, flat order).
pub fn closed_form_sinr(
    network: &NetworkStatistics,
    bank: &EstimatorBank,
    config: &PilotConfig,
    user: UserId,
    powers: &[f64],
    sigma2: f64,
) -> Result<SinrBreakdown, SeError> {
    check_powers(powers, network.num_users(), user)?;
    SinrCoefficients::new(network, bank, config, user, sigma2)?.breakdown(powers)
}

/// `tr(R_a R_b)/M`.
pub fn orthogonality_measure(r_a: &CMat, r_b: &CMat) -> Result<f64, SeError> {
    let m = r_a.nrows();
    for found in [r_a.ncols(), r_b.nrows(), r_b.ncols()] {
        if found != m {
            return Err(SeError::DimensionMismatch { expected: m, found });
        }
    }
    Ok(linalg::trace_product(r_a, r_b).re / m as f64)
}

/// `prelog · log2(1 + sinr)`.
pub fn rate(sinr: f64, prelog: f64) -> f64 {
    prelog * (1.0 + sinr.max(0.0)).log2()
}

/// One CSV row of a rate report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub cell: usize,
    pub user: usize,
    pub se_closed_form: f64,
    pub se_monte_carlo: Option<f64>,
    pub stderr: Option<f64>,
    pub signal: f64,
    pub ni: f64,
    pub ci: f64,
    pub no: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
}

pub const RATE_CSV_HEADER: &str = "cell,user,se_closed_form,se_monte_carlo,stderr,signal,ni,ci,no";

impl RateReport {
    /// Closed-form rows, optionally joined with Monte-Carlo estimates of the
    /// same users.
    pub fn new(breakdowns: &[SinrBreakdown], monte_carlo: Option<&[MonteCarloEstimate]>) -> Self {
        let rows = breakdowns
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mc = monte_carlo.map(|m| &m[i]);
                RateRow {
                    cell: b.user.cell,
                    user: b.user.user,
                    se_closed_form: b.se(),
                    se_monte_carlo: mc.map(|m| m.se()),
                    stderr: mc.map(|m| m.se_stderr()),
                    signal: b.signal,
                    ni: b.ni,
                    ci: b.ci,
                    no: b.no,
                }
            })
            .collect();
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        let mut out = String::from(RATE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:e},{},{},{:e},{:e},{:e},{:e}\n",
                r.cell,
                r.user,
                r.se_closed_form,
                opt(r.se_monte_carlo),
                opt(r.stderr),
                r.signal,
                r.ni,
                r.ci,
                r.no
            ));
        }
        out
    }
}
