//! Large-antenna (and large-scatterer) limits of the closed-form SE.

use super::{rate, SeError, SinrCoefficients};
use crate::channel::NetworkStatistics;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsymptoticCase {
    /// `M → ∞`, finite scatterers: `signal / CI`.
    A,
    /// `M → ∞`, finite scatterers, pilot sharers spatially orthogonal:
    /// `(d S)² / tr(R̃²)`.
    B,
    /// `M, S → ∞`: signal over coherent pilot contamination only.
    C,
    /// `M, S → ∞` with orthogonal sharers: unbounded.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AsymptoticRate {
    Finite { sinr: f64, se: f64 },
    Unbounded,
}

impl AsymptoticRate {
    fn from_ratio(num: f64, den: f64, prelog: f64) -> Self {
        if den > 0.0 {
            let sinr = num / den;
            Self::Finite { sinr, se: rate(sinr, prelog) }
        } else {
            Self::Unbounded
        }
    }

    pub fn se(&self) -> Option<f64> {
        match self {
            Self::Finite { se, .. } => Some(*se),
            Self::Unbounded => None,
        }
    }
}

/// Limit SE of the user behind `coeffs`. Cases a and c are evaluated with
/// the statistics at the current array size; the caller is responsible for
/// the orthogonality assumption of cases b and d.
pub fn asymptotic_rate(
    case: AsymptoticCase,
    coeffs: &SinrCoefficients,
    network: &NetworkStatistics,
    powers: &[f64],
) -> Result<AsymptoticRate, SeError> {
    let prelog = coeffs.prelog;
    match case {
        AsymptoticCase::A => {
            let b = coeffs.breakdown(powers)?;
            Ok(AsymptoticRate::from_ratio(b.signal, b.ci, prelog))
        }
        AsymptoticCase::B => {
            let link = network.serving(coeffs.user);
            let t = link.rtilde_sq_trace();
            if !(t > 0.0) {
                return Err(SeError::ZeroScatterTrace(coeffs.user));
            }
            let ds = link.d() * link.scatterers() as f64;
            Ok(AsymptoticRate::from_ratio(ds * ds, t, prelog))
        }
        AsymptoticCase::C => {
            let b = coeffs.without_scatter_terms().breakdown(powers)?;
            Ok(AsymptoticRate::from_ratio(b.signal, b.ci_coherent, prelog))
        }
        AsymptoticCase::D => Ok(AsymptoticRate::Unbounded),
    }
}

impl SinrCoefficients {
    /// Copy with the finite-scatterer terms removed, i.e. the `S → ∞` model.
    pub fn without_scatter_terms(&self) -> Self {
        let mut out = self.clone();
        out.scatter_trace.iter_mut().for_each(|x| *x = 0.0);
        out.scatter_spread.iter_mut().for_each(|x| *x = 0.0);
        out
    }
}
