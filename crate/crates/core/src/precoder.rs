//! Zero-forcing near-field beams and the scalar gains derived from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelVector;
use crate::error::{Error, Result};

/// Gram matrices with a larger eigenvalue spread are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Precoder {
    /// `N x M`, column m is the unit-norm beam p_m.
    pub beams: DMatrix<Complex64>,
    /// Diagonal of Q, `[(H^H H)^-1]_{mm}^{-1/2}`.
    pub normalization: Vec<f64>,
    pub gram_condition: f64,
}

impl Precoder {
    pub fn num_beams(&self) -> usize {
        self.beams.ncols()
    }

    pub fn beam(&self, m: usize) -> DVector<Complex64> {
        self.beams.column(m).into_owned()
    }
}

/// Stacks channel vectors as the columns of an `N x M` matrix.
pub fn stack_columns(channels: &[ChannelVector]) -> Result<DMatrix<Complex64>> {
    let n = channels.first().map(|c| c.len()).ok_or_else(|| Error::Dimension("no channels".into()))?;
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("channel vectors differ in length".into()));
    }
    Ok(DMatrix::from_fn(n, channels.len(), |i, j| channels[j].entries[i]))
}

/// `P = H (H^H H)^{-1} Q`.
///
/// With the thin QR factorization `H = U R`, `R` is the Cholesky factor of
/// the Gram matrix and `H (H^H H)^{-1} = U R^{-H}`. Column m of `R^{-H}` has
/// squared norm `[(H^H H)^{-1}]_{mm}`, so normalizing it applies Q exactly.
pub fn build_precoder(h: &DMatrix<Complex64>) -> Result<Precoder> {
    let (n, m) = h.shape();
    if m == 0 || m > n {
        return Err(Error::Dimension(format!("need 1 <= M <= N, got {m} x {n}")));
    }
    let qr = h.clone().qr();
    let (u, r) = (qr.q(), qr.r());
    let sv = r.singular_values();
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
    if !(condition < MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let mut w = r
        .adjoint()
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or(Error::IllConditioned { condition })?;
    let mut normalization = Vec::with_capacity(m);
    for mut col in w.column_iter_mut() {
        let norm = col.norm();
        normalization.push(norm.recip());
        col.unscale_mut(norm);
    }
    Ok(Precoder {
        beams: u * w,
        normalization,
        gram_condition: condition,
    })
}

#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    /// `h_m = |h_m^H p_m|^2`.
    pub nf_gain: Vec<f64>,
    /// `g_{m,k} = |g_k^H p_m|^2`, `M x K`.
    pub ff_gain: DMatrix<f64>,
    /// `g~_k = P^H g_k`, one length-M vector per far-field user.
    pub ff_effective: Vec<DVector<Complex64>>,
}

impl EffectiveChannels {
    pub fn num_beams(&self) -> usize {
        self.nf_gain.len()
    }

    pub fn num_far(&self) -> usize {
        self.ff_effective.len()
    }
}

pub fn effective_channels(
    precoder: &Precoder,
    h: &DMatrix<Complex64>,
    far: &[DVector<Complex64>],
) -> Result<EffectiveChannels> {
    let (n, m) = precoder.beams.shape();
    if h.shape() != (n, m) {
        return Err(Error::Dimension(format!("H is {:?}, beams are {:?}", h.shape(), (n, m))));
    }
    if far.iter().any(|g| g.len() != n) {
        return Err(Error::Dimension("far-field channel length differs from N".into()));
    }
    let nf_gain = (0..m)
        .map(|j| h.column(j).dotc(&precoder.beams.column(j)).norm_sqr())
        .collect();
    let ph = precoder.beams.adjoint();
    let ff_effective: Vec<DVector<Complex64>> = far.iter().map(|g| &ph * g).collect();
    let ff_gain = DMatrix::from_fn(m, far.len(), |i, k| ff_effective[k][i].norm_sqr());
    Ok(EffectiveChannels {
        nf_gain,
        ff_gain,
        ff_effective,
    })
}
