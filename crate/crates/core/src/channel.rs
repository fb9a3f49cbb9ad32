//! Line-of-sight channel vectors for near-field (spherical wave) and
//! far-field (beamsteering) users, plus the imperfect-CSI perturbation.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Position, UlaGeometry, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    NearField,
    FarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub entries: DVector<Complex64>,
    pub position: Position,
    pub kind: ChannelKind,
    /// Free-space amplitude alpha shared by every entry.
    pub amplitude: f64,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Free-space amplitude `c / (4 pi f_c r)`.
pub fn path_loss(user: &Position, center: &Position, carrier_hz: f64) -> Result<f64> {
    let r = user.distance(center);
    if !(r > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok(SPEED_OF_LIGHT / (4.0 * PI * carrier_hz * r))
}

fn phasor(path: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * path / wavelength)
}

/// Spherical-wave channel: entry n is `alpha exp(-j 2 pi |psi - psi_n| / lambda)`.
pub fn near_field_channel(user: &Position, array: &UlaGeometry, wavelength: f64) -> Result<ChannelVector> {
    let carrier = SPEED_OF_LIGHT / wavelength;
    let amplitude = path_loss(user, &array.center, carrier)?;
    let rd = array.rayleigh_distance(wavelength);
    let dist = user.distance(&array.center);
    if dist >= rd {
        log::warn!("near-field channel requested at {dist:.2} m, beyond the Rayleigh distance {rd:.2} m");
    }
    let entries = DVector::from_iterator(
        array.len(),
        array
            .elements
            .iter()
            .map(|e| phasor(user.distance(e), wavelength) * amplitude),
    );
    Ok(ChannelVector {
        entries,
        position: *user,
        kind: ChannelKind::NearField,
        amplitude,
    })
}

/// Beamsteering channel referenced to element 1, with `theta = atan2(y, x)`.
pub fn far_field_channel(user: &Position, array: &UlaGeometry, wavelength: f64) -> Result<ChannelVector> {
    let carrier = SPEED_OF_LIGHT / wavelength;
    let amplitude = path_loss(user, &array.center, carrier)?;
    let rd = array.rayleigh_distance(wavelength);
    let dist = user.distance(&array.center);
    if dist <= rd {
        log::warn!("far-field channel requested at {dist:.2} m, inside the Rayleigh distance {rd:.2} m");
    }
    let theta = user.angle_from(&array.center);
    let reference = match array.elements.first() {
        Some(first) => phasor(user.distance(first), wavelength) * amplitude,
        None => Complex64::new(0.0, 0.0),
    };
    let step = array.spacing * theta.sin();
    let entries = DVector::from_iterator(
        array.len(),
        (0..array.len()).map(|n| reference * phasor(step * n as f64, wavelength)),
    );
    Ok(ChannelVector {
        entries,
        position: *user,
        kind: ChannelKind::FarField,
        amplitude,
    })
}

/// Estimated channel `rho g + sqrt(1 - rho) e`, `e ~ CN(0, alpha^2 I)`.
///
/// The error vector is always drawn so the RNG advances identically for
/// every `rho`.
pub fn perturb_csi<R: Rng + ?Sized>(rng: &mut R, g: &ChannelVector, rho: f64) -> ChannelVector {
    let sd = g.amplitude / std::f64::consts::SQRT_2;
    let normal = Normal::new(0.0, sd).expect("finite non-negative std");
    let err_scale = (1.0 - rho).max(0.0).sqrt();
    let mut out = g.clone();
    for v in out.entries.iter_mut() {
        let e = Complex64::new(normal.sample(rng), normal.sample(rng));
        if rho < 1.0 {
            *v = *v * rho + e * err_scale;
        }
    }
    out
}
