//! Uplink cellular Massive MIMO under double-scattering fading.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] builds covariance matrices, large-scale gains and channel
//!   realizations, and exposes the second/fourth-moment formulas of the
//!   double-scattering model.
//! * [`estimation`] handles pilot bookkeeping and LMMSE channel estimation.
//! * [`sefficiency`] evaluates the closed-form MR SINR, its Monte-Carlo
//!   counterpart, and the large-antenna limits.
//! * [`powerctl`] minimises total uplink power under per-user SE targets with
//!   two fixed-point algorithms that stay well defined under congestion.
//! * [`harness`] assembles network drops, runs experiments and implements the
//!   command-line interface.

pub mod channel;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod powerctl;
pub mod rng;
pub mod sefficiency;
pub mod units;

pub use num_complex::Complex64;

/// Flat identifier of a user: user `user` served by cell `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct UserId {
    pub cell: usize,
    pub user: usize,
}

impl UserId {
    pub fn new(cell: usize, user: usize) -> Self {
        Self { cell, user }
    }

    /// Position in the stacked `L·K` vector (cell-major).
    pub fn flat(self, users_per_cell: usize) -> usize {
        self.cell * users_per_cell + self.user
    }

    pub fn from_flat(index: usize, users_per_cell: usize) -> Self {
        Self {
            cell: index / users_per_cell,
            user: index % users_per_cell,
        }
    }
}

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.cell, self.user)
    }
}
