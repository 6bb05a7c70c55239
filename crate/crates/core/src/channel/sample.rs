//! Drawing double-scattering realizations.

use super::{ChannelError, LinkStatistics};
use crate::linalg::{self, CMat, CVec};
use crate::rng::complex_normal;
use faer::{Col, Mat};
use num_complex::Complex64;
use rand::Rng;

/// The Gaussian matrices behind one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPayload {
    /// `M × S`.
    pub g_matrix: CMat,
    /// Length `S`.
    pub g_vec: CVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CVec,
    pub payload: Option<ScatterPayload>,
}

/// Precomputed square roots of one link, reusable across realizations.
#[derive(Debug, Clone)]
pub struct LinkSampler {
    amplitude: f64,
    r_sqrt: CMat,
    rt_sqrt: CMat,
}

impl LinkSampler {
    pub fn new(stats: &LinkStatistics) -> Result<Self, ChannelError> {
        Ok(Self {
            amplitude: (stats.beta() / stats.scatterers() as f64).sqrt(),
            r_sqrt: linalg::hermitian_sqrt(stats.r())?,
            rt_sqrt: linalg::hermitian_sqrt(stats.rtilde())?,
        })
    }

    pub fn antennas(&self) -> usize {
        self.r_sqrt.nrows()
    }

    pub fn scatterers(&self) -> usize {
        self.rt_sqrt.nrows()
    }

    /// Draws `g` first, then `G` column by column, and returns `h`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let mut out = vec![Complex64::new(0.0, 0.0); self.antennas()];
        self.sample_into(rng, &mut out, &mut Vec::new());
        Col::from_fn(out.len(), |i| out[i])
    }

    /// Allocation-free variant of [`sample`](Self::sample) writing into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let (m, s) = (self.antennas(), self.scatterers());
        debug_assert_eq!(out.len(), m);
        let zero = Complex64::new(0.0, 0.0);
        scratch.clear();
        scratch.resize(2 * s + m, zero);
        let (g, rest) = scratch.split_at_mut(s);
        let (w, u) = rest.split_at_mut(s);
        for gj in g.iter_mut() {
            *gj = complex_normal(rng);
        }
        for (j, &gj) in g.iter().enumerate() {
            for (wi, &r) in w.iter_mut().zip(self.rt_sqrt.col_as_slice(j)) {
                *wi += r * gj;
            }
        }
        for &wj in w.iter() {
            for ui in u.iter_mut() {
                *ui += complex_normal(rng) * wj;
            }
        }
        out.fill(zero);
        for (j, &uj) in u.iter().enumerate() {
            let uj = uj * self.amplitude;
            for (oi, &r) in out.iter_mut().zip(self.r_sqrt.col_as_slice(j)) {
                *oi += r * uj;
            }
        }
    }

    /// Same draw order as [`sample`](Self::sample), keeping `G` and `g`.
    pub fn sample_with_payload<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let (m, s) = (self.antennas(), self.scatterers());
        let g_vec: CVec = Col::from_fn(s, |_| complex_normal(rng));
        let mut g_matrix: CMat = Mat::zeros(m, s);
        for j in 0..s {
            for i in 0..m {
                g_matrix[(i, j)] = complex_normal(rng);
            }
        }
        let h = self.compose(&g_matrix, &g_vec);
        ChannelRealization { h, payload: Some(ScatterPayload { g_matrix, g_vec }) }
    }

    /// `sqrt(β/S) · R^{1/2} · G · R̃^{1/2} · g`.
    pub fn compose(&self, g_matrix: &CMat, g_vec: &CVec) -> CVec {
        let w = &self.rt_sqrt * g_vec;
        let u = g_matrix * &w;
        let u: CVec = Col::from_fn(u.nrows(), |i| u[i] * self.amplitude);
        &self.r_sqrt * &u
    }
}

/// One realization of the link, with the Gaussian payload when `debug` is set.
pub fn sample_channel<R: Rng + ?Sized>(
    stats: &LinkStatistics,
    rng: &mut R,
    debug: bool,
) -> Result<ChannelRealization, ChannelError> {
    let sampler = LinkSampler::new(stats)?;
    Ok(if debug {
        sampler.sample_with_payload(rng)
    } else {
        ChannelRealization { h: sampler.sample(rng), payload: None }
    })
}
