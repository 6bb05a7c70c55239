//! Monte-Carlo evaluation of the use-and-then-forget SINR.
//!
//! Each realization draws every channel toward every base station, an
//! independent copy of each channel and the pilot-phase noise, forms the MR
//! combiners `v = ĥ` and records per user
//!
//! * `x = v^H h` (signal mean),
//! * `Σ_all p' |v^H h̃'|²` with `h̃'` independent of `v` (non-coherent part),
//! * `Σ_P p' (|v^H h'|² − |v^H h̃'|²)` (excess from pilot sharing),
//! * `Σ_all p' |v^H h'|²` and `‖v‖²`.
//!
//! The expectations are sample means; standard errors follow from the
//! sample covariance by the delta method.

use super::{rate, SeError};
use crate::channel::{LinkSampler, NetworkStatistics};
use crate::estimation::{pilot_sequence, EstimatorBank, PilotConfig};
use crate::rng::{complex_normal, stream, Domain};
use crate::UserId;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

const DIM: usize = 6;
const X_RE: usize = 0;
const X_IM: usize = 1;
const NI: usize = 2;
const EXCESS: usize = 3;
const TOTAL: usize = 4;
const NORM: usize = 5;

/// Running mean and co-moment matrix, mergeable in any fixed order.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    mean: [f64; DIM],
    co: [[f64; DIM]; DIM],
}

impl Moments {
    fn new() -> Self {
        Self { n: 0.0, mean: [0.0; DIM], co: [[0.0; DIM]; DIM] }
    }

    fn push(&mut self, x: &[f64; DIM]) {
        self.n += 1.0;
        let mut delta = [0.0; DIM];
        for i in 0..DIM {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / self.n;
        }
        for i in 0..DIM {
            for j in 0..DIM {
                self.co[i][j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        let mut delta = [0.0; DIM];
        for i in 0..DIM {
            delta[i] = other.mean[i] - self.mean[i];
        }
        let w = self.n * other.n / n;
        for i in 0..DIM {
            for j in 0..DIM {
                self.co[i][j] += other.co[i][j] + delta[i] * delta[j] * w;
            }
        }
        for i in 0..DIM {
            self.mean[i] += delta[i] * other.n / n;
        }
        self.n = n;
    }

    /// Covariance of the sample means.
    fn mean_cov(&self, i: usize, j: usize) -> f64 {
        if self.n < 2.0 {
            return f64::NAN;
        }
        self.co[i][j] / (self.n - 1.0) / self.n
    }

    /// Standard error of `Σ g_i mean_i` for a gradient `g`.
    fn delta_stderr(&self, grad: &[(usize, f64)]) -> f64 {
        let mut var = 0.0;
        for &(i, gi) in grad {
            for &(j, gj) in grad {
                var += gi * gj * self.mean_cov(i, j);
            }
        }
        if var.is_nan() {
            f64::NAN
        } else {
            var.max(0.0).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloOptions {
    pub realizations: usize,
    pub seed: u64,
    /// Realizations per work unit. Results depend on it only through
    /// floating-point merge order, which is fixed for a given value.
    pub chunk: usize,
}

impl MonteCarloOptions {
    pub fn new(realizations: usize, seed: u64) -> Self {
        Self { realizations, seed, chunk: 1024 }
    }
}

/// Monte-Carlo counterpart of [`SinrBreakdown`](super::SinrBreakdown).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub user: UserId,
    pub samples: usize,
    pub signal: f64,
    pub ni: f64,
    pub ci: f64,
    pub no: f64,
    pub sinr: f64,
    pub stderr_signal: f64,
    pub stderr_ni: f64,
    pub stderr_ci: f64,
    pub stderr_no: f64,
    pub stderr_sinr: f64,
    pub prelog: f64,
}

impl MonteCarloEstimate {
    pub fn se(&self) -> f64 {
        rate(self.sinr, self.prelog)
    }

    /// Standard error of [`se`](Self::se).
    pub fn se_stderr(&self) -> f64 {
        self.prelog * self.stderr_sinr / ((1.0 + self.sinr) * std::f64::consts::LN_2)
    }

    fn from_moments(user: UserId, m: &Moments, power: f64, sigma2: f64, prelog: f64) -> Self {
        let (xr, xi) = (m.mean[X_RE], m.mean[X_IM]);
        let signal = power * (xr * xr + xi * xi);
        let ni = m.mean[NI];
        let ci = m.mean[EXCESS] - signal;
        let no = sigma2 * m.mean[NORM];
        let den = m.mean[TOTAL] - signal + no;
        let sinr = if signal == 0.0 { 0.0 } else { signal / den };
        let (ds_r, ds_i) = (2.0 * power * xr, 2.0 * power * xi);
        let dsinr_ds = (m.mean[TOTAL] + no) / (den * den);
        let dsinr_dt = -signal / (den * den);
        Self {
            user,
            samples: m.n as usize,
            signal,
            ni,
            ci,
            no,
            sinr,
            stderr_signal: m.delta_stderr(&[(X_RE, ds_r), (X_IM, ds_i)]),
            stderr_ni: m.delta_stderr(&[(NI, 1.0)]),
            stderr_ci: m.delta_stderr(&[(X_RE, -ds_r), (X_IM, -ds_i), (EXCESS, 1.0)]),
            stderr_no: m.delta_stderr(&[(NORM, sigma2)]),
            stderr_sinr: if signal == 0.0 {
                0.0
            } else {
                m.delta_stderr(&[
                    (X_RE, dsinr_ds * ds_r),
                    (X_IM, dsinr_ds * ds_i),
                    (TOTAL, dsinr_dt),
                    (NORM, dsinr_dt * sigma2),
                ])
            },
            prelog,
        }
    }
}

/// Per-realization workspace.
struct Workspace {
    /// `[bs][user][antenna]`, flattened.
    channels: Vec<Complex64>,
    copies: Vec<Complex64>,
    combiners: Vec<Complex64>,
    noise: Vec<Complex64>,
    pilots: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

struct Setup<'a> {
    network: &'a NetworkStatistics,
    bank: &'a EstimatorBank,
    config: &'a PilotConfig,
    samplers: Vec<LinkSampler>,
    powers: &'a [f64],
    sigma2: f64,
    seed: u64,
    /// `φ_t^*` per pilot, concatenated.
    phi_conj: Vec<Complex64>,
    pilot_of: Vec<usize>,
    sharers: Vec<Vec<usize>>,
}

impl Setup<'_> {
    fn realization(&self, n: u64, ws: &mut Workspace, acc: &mut [Moments]) {
        let m = self.network.antennas();
        let users = self.network.num_users();
        let cells = self.network.cells();
        let tau = self.config.tau_p();
        let zero = Complex64::new(0.0, 0.0);

        for bs in 0..cells {
            let mut rng = stream(self.seed, Domain::Channel, n, bs as u64);
            let mut rng_copy = stream(self.seed, Domain::ChannelCopy, n, bs as u64);
            for u in 0..users {
                let sampler = &self.samplers[bs * users + u];
                let off = (bs * users + u) * m;
                sampler.sample_into(&mut rng, &mut ws.channels[off..off + m], &mut ws.scratch);
                sampler.sample_into(&mut rng_copy, &mut ws.copies[off..off + m], &mut ws.scratch);
            }
        }

        // correlated pilot signal per (bs, pilot): noise·φ* + Σ_P sqrt(p̂) τ_p h
        ws.pilots.fill(zero);
        for bs in 0..cells {
            let mut rng = stream(self.seed, Domain::PilotNoise, n, bs as u64);
            let scale = self.sigma2.sqrt();
            // noise block is M x τ_p, drawn column-major
            for s in 0..tau {
                for i in 0..m {
                    ws.noise[s * m + i] = complex_normal(&mut rng) * scale;
                }
            }
            for t in 0..tau {
                let y = &mut ws.pilots[(bs * tau + t) * m..(bs * tau + t + 1) * m];
                for s in 0..tau {
                    let ph = self.phi_conj[t * tau + s];
                    for i in 0..m {
                        y[i] += ws.noise[s * m + i] * ph;
                    }
                }
                for &u in &self.sharers[t] {
                    let amp = (self.config.pilot_powers()[u]).sqrt() * tau as f64;
                    let off = (bs * users + u) * m;
                    for i in 0..m {
                        y[i] += ws.channels[off + i] * amp;
                    }
                }
            }
        }

        // MR combiners v_u = sqrt(p̂) β d R Ψ y at the serving base station
        for u in 0..users {
            let id = UserId::from_flat(u, self.network.users_per_cell());
            let est = self.bank.serving(id);
            let w = est.combiner();
            let gain = est.gain();
            let t = self.pilot_of[u];
            let y = &ws.pilots[(id.cell * tau + t) * m..(id.cell * tau + t + 1) * m];
            let v = &mut ws.combiners[u * m..(u + 1) * m];
            v.fill(zero);
            for (j, &yj) in y.iter().enumerate() {
                let yj = yj * gain;
                for (vi, &wij) in v.iter_mut().zip(w.col_as_slice(j)) {
                    *vi += wij * yj;
                }
            }
        }

        for u in 0..users {
            let bs = u / self.network.users_per_cell();
            let v = &ws.combiners[u * m..(u + 1) * m];
            let dot = |h: &[Complex64]| -> Complex64 { v.iter().zip(h).map(|(a, b)| a.conj() * b).sum() };
            let t = self.pilot_of[u];
            let mut rec = [0.0; DIM];
            for other in 0..users {
                let off = (bs * users + other) * m;
                let a = dot(&ws.channels[off..off + m]);
                let b = dot(&ws.copies[off..off + m]).norm_sqr();
                let p = self.powers[other];
                if other == u {
                    rec[X_RE] = a.re;
                    rec[X_IM] = a.im;
                }
                rec[NI] += p * b;
                rec[TOTAL] += p * a.norm_sqr();
                if self.pilot_of[other] == t {
                    rec[EXCESS] += p * (a.norm_sqr() - b);
                }
            }
            rec[NORM] = v.iter().map(|x| x.norm_sqr()).sum();
            acc[u].push(&rec);
        }
    }
}

/// Monte-Carlo SINR of every user at data powers `powers` (mW, flat order).
pub fn monte_carlo_sinr(
    network: &NetworkStatistics,
    bank: &EstimatorBank,
    config: &PilotConfig,
    powers: &[f64],
    sigma2: f64,
    options: &MonteCarloOptions,
) -> Result<Vec<MonteCarloEstimate>, SeError> {
    let users = network.num_users();
    if powers.len() != users {
        return Err(SeError::DimensionMismatch { expected: users, found: powers.len() });
    }
    if config.num_users() != users {
        return Err(SeError::DimensionMismatch { expected: users, found: config.num_users() });
    }
    if let Some((i, &p)) = powers.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
        return Err(SeError::InvalidPower { user: UserId::from_flat(i, network.users_per_cell()), power: p });
    }
    let tau = config.tau_p();
    let mut samplers = Vec::with_capacity(network.cells() * users);
    for bs in 0..network.cells() {
        for link in network.toward(bs) {
            samplers.push(link.sampler()?);
        }
    }
    let mut phi_conj = Vec::with_capacity(tau * tau);
    for t in 0..tau {
        phi_conj.extend(pilot_sequence(tau, t).into_iter().map(|z| z.conj()));
    }
    let ids: Vec<UserId> = network.users().collect();
    let pilot_of = ids.iter().map(|&u| config.pilot(u)).collect::<Result<Vec<_>, _>>()?;
    let sharers = (0..tau).map(|t| (0..users).filter(|&u| pilot_of[u] == t).collect()).collect();
    let setup = Setup {
        network,
        bank,
        config,
        samplers,
        powers,
        sigma2,
        seed: options.seed,
        phi_conj,
        pilot_of,
        sharers,
    };

    let m = network.antennas();
    let cells = network.cells();
    let chunk = options.chunk.max(1);
    let n_chunks = options.realizations.div_ceil(chunk);
    let partials: Vec<Vec<Moments>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let zero = Complex64::new(0.0, 0.0);
            let mut ws = Workspace {
                channels: vec![zero; cells * users * m],
                copies: vec![zero; cells * users * m],
                combiners: vec![zero; users * m],
                noise: vec![zero; tau * m],
                pilots: vec![zero; cells * tau * m],
                scratch: Vec::new(),
            };
            let mut acc = vec![Moments::new(); users];
            let end = ((c + 1) * chunk).min(options.realizations);
            for n in c * chunk..end {
                setup.realization(n as u64, &mut ws, &mut acc);
            }
            acc
        })
        .collect();

    let mut total = vec![Moments::new(); users];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(ids
        .iter()
        .zip(&total)
        .map(|(&u, mom)| MonteCarloEstimate::from_moments(u, mom, powers[u.flat(network.users_per_cell())], sigma2, config.prelog()))
        .collect())
}
