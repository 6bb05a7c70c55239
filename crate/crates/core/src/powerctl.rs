//! Total uplink power minimisation under per-user SE targets.
//!
//! The SINR constraint of user `u` is affine in the data powers,
//!
//! `p_u s_u ≥ ν_u (Σ_{u'} c_{uu'} p_{u'} + NO_u)`,
//!
//! where `s_u = z_u T_u²` and `c_{uu}` collects every term of the denominator
//! that scales with the user's own power (its own `NI` contribution and the
//! finite-scatterer self-terms of `CI`). Moving `ν_u c_{uu} p_u` to the left
//! gives the explicit interference function
//!
//! `I_u(p) = ν_u (Σ_{u'≠u} c_{uu'} p_{u'} + NO_u) / (s_u − ν_u c_{uu})`,
//!
//! which is positive, monotone and scalable. A user whose target exceeds the
//! SINR ceiling `s_u / c_{uu}` (reached as `p_u → ∞`) gets `I_u = +∞`.
//!
//! Two fixed-point iterations are provided: [`Variant::Alg1`] clips at the
//! power cap, [`Variant::Alg2`] backs unsatisfied users off to `P_max²/I`.

use crate::sefficiency::{NetworkCoefficients, SeError};
use crate::UserId;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack on `SINR ≥ ν` used for the satisfied flags.
pub const SATISFACTION_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("invalid SE target {xi} for {user}")]
    InvalidTarget { user: UserId, xi: f64 },
    #[error("invalid power cap {p_max} for {user}")]
    InvalidPowerCap { user: UserId, p_max: f64 },
    #[error("pilot length {tau_p} must satisfy 0 < tau_p < tau_c = {tau_c}")]
    InvalidFrame { tau_p: usize, tau_c: usize },
    #[error("signal coefficient of {0} is not positive")]
    DegenerateSignal(UserId),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Se(#[from] SeError),
}

/// `ν = 2^(ξ τ_c / (τ_c − τ_p)) − 1`.
pub fn sinr_target(xi: f64, tau_p: usize, tau_c: usize) -> Result<f64, PowerError> {
    if tau_p == 0 || tau_p >= tau_c {
        return Err(PowerError::InvalidFrame { tau_p, tau_c });
    }
    Ok((xi * tau_c as f64 / (tau_c - tau_p) as f64).exp2() - 1.0)
}

/// Per-user SE targets (b/s/Hz), the matching SINR targets, and power caps (mW).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QosTargets {
    xi: Vec<f64>,
    nu: Vec<f64>,
    p_max: Vec<f64>,
    users_per_cell: usize,
}

impl QosTargets {
    pub fn new(xi: Vec<f64>, p_max: Vec<f64>, users_per_cell: usize, tau_p: usize, tau_c: usize) -> Result<Self, PowerError> {
        if p_max.len() != xi.len() {
            return Err(PowerError::DimensionMismatch { expected: xi.len(), found: p_max.len() });
        }
        if users_per_cell == 0 || xi.len() % users_per_cell != 0 {
            return Err(PowerError::InvalidOptions(format!("{} users do not split into cells of {users_per_cell}", xi.len())));
        }
        let mut nu = Vec::with_capacity(xi.len());
        for (i, (&x, &cap)) in xi.iter().zip(&p_max).enumerate() {
            let user = UserId::from_flat(i, users_per_cell);
            if !(x.is_finite() && x >= 0.0) {
                return Err(PowerError::InvalidTarget { user, xi: x });
            }
            if !(cap.is_finite() && cap > 0.0) {
                return Err(PowerError::InvalidPowerCap { user, p_max: cap });
            }
            nu.push(sinr_target(x, tau_p, tau_c)?);
        }
        Ok(Self { xi, nu, p_max, users_per_cell })
    }

    /// Same `ξ` and `P_max` for all `users` users.
    pub fn uniform(users: usize, users_per_cell: usize, xi: f64, p_max: f64, tau_p: usize, tau_c: usize) -> Result<Self, PowerError> {
        Self::new(vec![xi; users], vec![p_max; users], users_per_cell, tau_p, tau_c)
    }

    pub fn num_users(&self) -> usize {
        self.xi.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn p_max(&self) -> &[f64] {
        &self.p_max
    }
}

/// Data powers in mW, stacked cell-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    pub fn full(targets: &QosTargets) -> Self {
        Self(targets.p_max.clone())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `0 ≤ p ≤ P_max` element-wise.
    pub fn within_box(&self, p_max: &[f64]) -> bool {
        self.0.len() == p_max.len() && self.0.iter().zip(p_max).all(|(&p, &cap)| (0.0..=cap).contains(&p))
    }
}

/// How the own-power terms are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceForm {
    /// The finite-scatterer self-terms of `CI` on the signal side; the own
    /// `NI` term stays in the numerator.
    #[default]
    ScatterMoved,
    /// Every own-power term on the signal side; `I_u` does not depend on `p_u`.
    FullyMoved,
    /// `ν (NI(p) + CI(p) + NO) / (z T²)` with `p_u` on both sides.
    Literal,
}

/// Dense affine form of every user's interference function.
#[derive(Debug, Clone)]
pub struct InterferenceMap {
    /// `c_{uu'}`, row-major.
    coupling: Vec<f64>,
    /// Finite-scatterer part of `c_uu`.
    own_scatter: Vec<f64>,
    signal: Vec<f64>,
    noise: Vec<f64>,
    nu: Vec<f64>,
    p_max: Vec<f64>,
    users_per_cell: usize,
    form: InterferenceForm,
}

impl InterferenceMap {
    pub fn new(coeffs: &NetworkCoefficients, targets: &QosTargets, form: InterferenceForm) -> Result<Self, PowerError> {
        let n = coeffs.num_users();
        if targets.num_users() != n {
            return Err(PowerError::DimensionMismatch { expected: n, found: targets.num_users() });
        }
        let mut coupling = Vec::with_capacity(n * n);
        let mut own_scatter = Vec::with_capacity(n);
        let mut signal = Vec::with_capacity(n);
        let mut noise = Vec::with_capacity(n);
        for c in &coeffs.users {
            if !(c.signal > 0.0 && c.signal.is_finite()) {
                return Err(PowerError::DegenerateSignal(c.user));
            }
            coupling.extend((0..n).map(|i| c.denominator_coeff(i)));
            let own = c.own_index();
            own_scatter.push(c.scatter_trace[own] + c.scatter_spread[own]);
            signal.push(c.signal);
            noise.push(c.noise);
        }
        Ok(Self {
            coupling,
            own_scatter,
            signal,
            noise,
            nu: targets.nu.clone(),
            p_max: targets.p_max.clone(),
            users_per_cell: coeffs.users_per_cell,
            form,
        })
    }

    pub fn num_users(&self) -> usize {
        self.signal.len()
    }

    pub fn form(&self) -> InterferenceForm {
        self.form
    }

    pub fn p_max(&self) -> &[f64] {
        &self.p_max
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    fn row(&self, u: usize) -> &[f64] {
        let n = self.num_users();
        &self.coupling[u * n..(u + 1) * n]
    }

    /// `I_u(p)` in mW; `+∞` when the moved terms alone exceed the signal at
    /// the target.
    pub fn evaluate(&self, u: usize, p: &[f64]) -> f64 {
        let nu = self.nu[u];
        if nu == 0.0 {
            return 0.0;
        }
        let row = self.row(u);
        let mut acc = self.noise[u];
        // part of c_uu kept on the signal side
        let moved = match self.form {
            InterferenceForm::ScatterMoved => self.own_scatter[u],
            InterferenceForm::FullyMoved => row[u],
            InterferenceForm::Literal => 0.0,
        };
        for (i, (&c, &pi)) in row.iter().zip(p).enumerate() {
            acc += if i == u { (c - moved) * pi } else { c * pi };
        }
        let den = self.signal[u] - nu * moved;
        if den > 0.0 {
            nu * acc / den
        } else {
            f64::INFINITY
        }
    }

    pub fn evaluate_all(&self, p: &[f64]) -> Vec<f64> {
        (0..self.num_users()).map(|u| self.evaluate(u, p)).collect()
    }

    /// Closed-form SINR of user `u`, identical to the breakdown evaluation.
    pub fn sinr(&self, u: usize, p: &[f64]) -> f64 {
        let signal = p[u] * self.signal[u];
        if signal == 0.0 {
            return 0.0;
        }
        let den: f64 = self.row(u).iter().zip(p).map(|(c, pi)| c * pi).sum::<f64>() + self.noise[u];
        signal / den
    }

    /// Limit of user `u`'s SINR as its own power grows without bound.
    pub fn sinr_ceiling(&self, u: usize) -> f64 {
        let own = self.row(u)[u];
        if own > 0.0 {
            self.signal[u] / own
        } else {
            f64::INFINITY
        }
    }

    fn check(&self, p: &[f64]) -> Result<(), PowerError> {
        if p.len() != self.num_users() {
            return Err(PowerError::DimensionMismatch { expected: self.num_users(), found: p.len() });
        }
        Ok(())
    }
}

/// Free-standing evaluation of `I_u(p)`.
pub fn interference_function(map: &InterferenceMap, user: UserId, p: &[f64]) -> Result<f64, PowerError> {
    map.check(p)?;
    let u = user.flat(map.users_per_cell);
    if u >= map.num_users() {
        return Err(PowerError::DimensionMismatch { expected: map.num_users(), found: u + 1 });
    }
    if let Some(&bad) = p.iter().find(|x| !(**x >= 0.0)) {
        return Err(PowerError::InvalidOptions(format!("negative power {bad}")));
    }
    Ok(map.evaluate(u, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Unsatisfied users transmit at the cap.
    Alg1,
    /// Unsatisfied users back off to `P_max² / I`.
    Alg2,
}

impl Variant {
    /// Update rule applied to `I_u(p(n−1))`.
    pub fn update(self, interference: f64, p_max: f64) -> f64 {
        match self {
            Variant::Alg1 => interference.min(p_max),
            Variant::Alg2 if interference <= p_max => interference,
            Variant::Alg2 => p_max * p_max / interference,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Alg1 => "alg1",
            Variant::Alg2 => "alg2",
        })
    }
}

/// One synchronous step `p(n) = min(I(p(n−1)), P_max)`.
pub fn algorithm1_step(map: &InterferenceMap, p: &[f64]) -> Result<Vec<f64>, PowerError> {
    step(map, Variant::Alg1, p)
}

/// One synchronous step of the soft-removal update.
pub fn algorithm2_step(map: &InterferenceMap, p: &[f64]) -> Result<Vec<f64>, PowerError> {
    step(map, Variant::Alg2, p)
}

fn step(map: &InterferenceMap, variant: Variant, p: &[f64]) -> Result<Vec<f64>, PowerError> {
    map.check(p)?;
    Ok((0..map.num_users()).map(|u| variant.update(map.evaluate(u, p), map.p_max[u])).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Every user reads `p(n−1)`.
    #[default]
    Jacobi,
    /// Users are updated in flat order and read the newest values.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub max_iter: usize,
    pub order: UpdateOrder,
    /// Keep every iterate in the report.
    pub record_powers: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, max_iter: DEFAULT_MAX_ITER, order: UpdateOrder::Jacobi, record_powers: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FeasibleAllSatisfied,
    CongestedPartial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    #[serde(rename = "P_tot")]
    pub p_tot: f64,
    /// Undefined (null) at `n = 0`.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserOutcome {
    pub cell: usize,
    pub user: usize,
    #[serde(rename = "p_star_mW")]
    pub p_star_mw: f64,
    pub sinr: f64,
    pub target: f64,
    /// `sinr / target − 1`; positive means the target is exceeded.
    pub slack: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub variant: Variant,
    pub form: InterferenceForm,
    pub order: UpdateOrder,
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trajectory: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub powers: Vec<Vec<f64>>,
    pub p_star: PowerVector,
    pub users: Vec<UserOutcome>,
    pub verdict: Verdict,
}

impl FixedPointReport {
    pub fn total_power(&self) -> f64 {
        self.p_star.total()
    }

    pub fn satisfied_count(&self) -> usize {
        self.users.iter().filter(|u| u.satisfied).count()
    }

    pub fn final_gamma(&self) -> Option<f64> {
        self.trajectory.last().and_then(|r| r.gamma)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn ratio(current: f64, previous: f64) -> f64 {
    if previous > 0.0 {
        (current - previous).abs() / previous
    } else if current == previous {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Iterates the chosen update from `p(0) = P_max` until
/// `|P_tot(n) − P_tot(n−1)| / P_tot(n−1) ≤ ε` or `max_iter` steps.
pub fn solve_fixed_point(map: &InterferenceMap, variant: Variant, options: &SolverOptions) -> Result<FixedPointReport, PowerError> {
    if !(options.epsilon > 0.0) {
        return Err(PowerError::InvalidOptions(format!("epsilon = {}", options.epsilon)));
    }
    if options.max_iter == 0 {
        return Err(PowerError::InvalidOptions("max_iter = 0".into()));
    }
    let n_users = map.num_users();
    let mut p = map.p_max.clone();
    let mut total = p.iter().sum::<f64>();
    let mut trajectory = vec![IterationRecord { n: 0, p_tot: total, gamma: None }];
    let mut powers = Vec::new();
    if options.record_powers {
        powers.push(p.clone());
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        match options.order {
            UpdateOrder::Jacobi => p = step(map, variant, &p)?,
            UpdateOrder::GaussSeidel => {
                for u in 0..n_users {
                    p[u] = variant.update(map.evaluate(u, &p), map.p_max[u]);
                }
            }
        }
        let next = p.iter().sum::<f64>();
        let gamma = ratio(next, total);
        total = next;
        trajectory.push(IterationRecord { n: iterations, p_tot: total, gamma: Some(gamma) });
        if options.record_powers {
            powers.push(p.clone());
        }
        if gamma <= options.epsilon {
            converged = true;
            break;
        }
    }
    let users: Vec<UserOutcome> = (0..n_users)
        .map(|u| {
            let id = UserId::from_flat(u, map.users_per_cell);
            let sinr = map.sinr(u, &p);
            let target = map.nu[u];
            UserOutcome {
                cell: id.cell,
                user: id.user,
                p_star_mw: p[u],
                sinr,
                target,
                slack: if target > 0.0 { sinr / target - 1.0 } else { f64::INFINITY },
                satisfied: sinr >= target * (1.0 - SATISFACTION_TOLERANCE),
            }
        })
        .collect();
    let verdict = if users.iter().all(|u| u.satisfied) { Verdict::FeasibleAllSatisfied } else { Verdict::CongestedPartial };
    Ok(FixedPointReport {
        variant,
        form: map.form,
        order: options.order,
        epsilon: options.epsilon,
        converged,
        iterations,
        trajectory,
        powers,
        p_star: PowerVector(p),
        users,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axiom {
    Positivity,
    Monotonicity,
    Scalability,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub axiom: Axiom,
    pub user: usize,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub triples: usize,
    pub checks: usize,
    /// Users excluded because their target is above the SINR ceiling.
    pub unbounded_users: Vec<usize>,
    pub counterexamples: Vec<Counterexample>,
    /// Smallest relative margin of the strict inequalities.
    pub min_scalability_margin: f64,
    pub min_two_sided_margin: f64,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Randomised check of the standard-interference-function axioms of `I`
/// and of the two-sided scalability of the [`Variant::Alg2`] update.
///
/// Each triple draws `p` in `(0, P_max]`, a dominated `p' ⪯ p`, a factor
/// `α > 1` and `p̂` with `p/α ⪯ p̂ ⪯ α p`. Every tenth triple uses the
/// boundary factor `α = 1 + 1e−9`.
pub fn axiom_check<R: Rng + ?Sized>(map: &InterferenceMap, triples: usize, rng: &mut R) -> AxiomReport {
    let n = map.num_users();
    let unbounded: Vec<usize> = (0..n).filter(|&u| map.evaluate(u, &vec![0.0; n]).is_infinite()).collect();
    let active: Vec<usize> = (0..n).filter(|&u| map.nu[u] > 0.0 && !unbounded.contains(&u)).collect();
    let mut report = AxiomReport {
        triples,
        checks: 0,
        unbounded_users: unbounded,
        counterexamples: Vec::new(),
        min_scalability_margin: f64::INFINITY,
        min_two_sided_margin: f64::INFINITY,
    };
    let fail = |report: &mut AxiomReport, axiom, user, alpha, lhs, rhs| {
        report.counterexamples.push(Counterexample { axiom, user, alpha, lhs, rhs });
    };
    for t in 0..triples {
        let alpha = if t % 10 == 9 { 1.0 + 1e-9 } else { rng.random_range(0.0f64..3.0).exp() + 1e-6 };
        let p: Vec<f64> = map.p_max.iter().map(|&cap| cap * rng.random_range(1e-6..=1.0)).collect();
        let lower: Vec<f64> = p.iter().map(|&x| if rng.random_bool(0.5) { x * rng.random_range(0.0..1.0) } else { x }).collect();
        let hat: Vec<f64> = p.iter().map(|&x| x * alpha.powf(rng.random_range(-1.0..=1.0))).collect();
        let scaled: Vec<f64> = p.iter().map(|&x| alpha * x).collect();
        for &u in &active {
            let i = map.evaluate(u, &p);
            report.checks += 4;
            if !(i > 0.0) {
                fail(&mut report, Axiom::Positivity, u, alpha, i, 0.0);
            }
            let i_lower = map.evaluate(u, &lower);
            if !(i >= i_lower) {
                fail(&mut report, Axiom::Monotonicity, u, alpha, i, i_lower);
            }
            let i_scaled = map.evaluate(u, &scaled);
            let margin = (alpha * i - i_scaled) / (alpha * i);
            report.min_scalability_margin = report.min_scalability_margin.min(margin);
            if !(alpha * i > i_scaled) {
                fail(&mut report, Axiom::Scalability, u, alpha, alpha * i, i_scaled);
            }
            let cap = map.p_max[u];
            let f = Variant::Alg2.update(i, cap);
            let f_hat = Variant::Alg2.update(map.evaluate(u, &hat), cap);
            let margin = ((f_hat - f / alpha) / f).min((alpha * f - f_hat) / f);
            report.min_two_sided_margin = report.min_two_sided_margin.min(margin);
            if !(f / alpha < f_hat && f_hat < alpha * f) {
                fail(&mut report, Axiom::TwoSided, u, alpha, f_hat, f);
            }
        }
    }
    report
}
