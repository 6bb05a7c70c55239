//! Second- and fourth-order moments of double-scattering channels.

use super::{ChannelError, LinkStatistics};
use crate::linalg::{self, CMat};

fn check_dims(stats: &LinkStatistics, b: &CMat) -> Result<(), ChannelError> {
    let m = stats.antennas();
    for found in [b.nrows(), b.ncols()] {
        if found != m {
            return Err(ChannelError::DimensionMismatch { expected: m, found });
        }
    }
    Ok(())
}

/// `E{|h_A^H B h_B|²} = β_A d_A β_B d_B · tr(B R_B B^H R_A)` for independent links.
pub fn cross_moment(a: &LinkStatistics, b: &LinkStatistics, mat: &CMat) -> Result<f64, ChannelError> {
    check_dims(a, mat)?;
    check_dims(b, mat)?;
    let coeff = a.beta() * a.d() * b.beta() * b.d();
    let left = &(mat * b.r()) * mat.adjoint();
    Ok(coeff * linalg::trace_product(&left, a.r()).re)
}

/// `E{|h^H B h|²} = β²(d² + tr(R̃²)/S²)(|tr(RB)|² + tr(R B R B^H))`.
pub fn self_fourth_moment(stats: &LinkStatistics, mat: &CMat) -> Result<f64, ChannelError> {
    check_dims(stats, mat)?;
    let r = stats.r();
    let rb = r * mat;
    let rbh = r * mat.adjoint();
    let coherent = linalg::trace(&rb).norm_sqr();
    let spread = linalg::trace_product(&rb, &rbh).re;
    let beta = stats.beta();
    let d = stats.d();
    Ok(beta * beta * (d * d + stats.scatter_excess()) * (coherent + spread))
}
