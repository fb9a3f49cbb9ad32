//! Array geometry, Rayleigh distance and user placement.
//!
//! Coordinates are 2-D in metres. The uniform linear array lies on the
//! y-axis centred at the origin, so broadside is the positive x-axis and every
//! user is dropped in the half-plane `x > 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Broadside distance of the centre of the deterministic near-field grid.
pub const GRID_CENTER_RANGE: f64 = 9.0;
/// Side length the grid spacing is derived from (`10 / sqrt(M)` per step).
pub const GRID_EXTENT: f64 = 10.0;
/// Radius of the half-circle carrying the deterministic far-field users.
pub const FAR_ARC_RADIUS: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self {
            x: radius * angle.cos(),
            y: radius * angle.sin(),
        }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Angle from broadside, `atan2(y, x)` relative to `center`.
    pub fn angle_from(&self, center: &Position) -> f64 {
        (self.y - center.y).atan2(self.x - center.x)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Wavelength for a carrier frequency in Hz.
pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Rayleigh distance `2((N-1)d)^2 / lambda` separating near and far field.
pub fn rayleigh_distance(n_elements: usize, spacing: f64, wavelength: f64) -> f64 {
    debug_assert!(n_elements >= 1 && spacing > 0.0 && wavelength > 0.0);
    let aperture = (n_elements.saturating_sub(1)) as f64 * spacing;
    2.0 * aperture * aperture / wavelength
}

/// Uniform linear array on the y-axis.
///
/// Element 1 sits at the top (largest y) and indices run downwards, so that
/// a user at angle `theta = atan2(y, x)` sees path lengths growing by
/// `d sin(theta)` per element. This is the ordering under which the
/// spherical-wave model converges to the beamsteering vector
/// `[1, e^{-j2pi d sin(theta)/lambda}, ...]` far from the array.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaGeometry {
    pub spacing: f64,
    pub center: Position,
    pub elements: Vec<Position>,
}

impl UlaGeometry {
    pub fn new(n_elements: usize, spacing: f64, center: Position) -> Self {
        let mid = (n_elements as f64 + 1.0) / 2.0;
        let elements = (1..=n_elements)
            .map(|n| Position::new(center.x, center.y + (mid - n as f64) * spacing))
            .collect();
        Self {
            spacing,
            center,
            elements,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn rayleigh_distance(&self, wavelength: f64) -> f64 {
        rayleigh_distance(self.len(), self.spacing, wavelength)
    }
}

/// System parameters shared by every stage of the pipeline. Powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Number of array elements N.
    pub antennas: usize,
    /// Near-field (legacy) users M; one preconfigured beam each.
    pub near_users: usize,
    /// Far-field users K.
    pub far_users: usize,
    /// Beams per far-field user D_x.
    pub beams_per_user: usize,
    pub carrier_hz: f64,
    /// Element spacing in metres; `None` means half a wavelength.
    pub spacing: Option<f64>,
    pub noise_power: f64,
    /// Per-beam transmit budget P.
    pub beam_budget: f64,
    /// Near-field target rate R in bits per channel use.
    pub target_rate: f64,
    /// CSI quality rho in [0, 1]; 1 is perfect far-field CSI.
    pub csi_quality: f64,
    /// Order in which far-field users pick beams; index order when absent.
    pub user_order: Option<Vec<usize>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 64,
            near_users: 36,
            far_users: 2,
            beams_per_user: 2,
            carrier_hz: 28e9,
            spacing: None,
            noise_power: dbm_to_watts(-80.0),
            beam_budget: dbm_to_watts(30.0),
            target_rate: 0.1,
            csi_quality: 1.0,
            user_order: None,
        }
    }
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        wavelength(self.carrier_hz)
    }

    pub fn element_spacing(&self) -> f64 {
        self.spacing.unwrap_or_else(|| self.wavelength() / 2.0)
    }

    pub fn array(&self) -> UlaGeometry {
        UlaGeometry::new(self.antennas, self.element_spacing(), Position::ORIGIN)
    }

    pub fn rayleigh_distance(&self) -> f64 {
        rayleigh_distance(self.antennas, self.element_spacing(), self.wavelength())
    }

    /// `2^R - 1`, the SINR a near-field user needs to reach its target.
    pub fn sinr_target(&self) -> f64 {
        self.target_rate.exp2() - 1.0
    }

    pub fn scheduling_order(&self) -> Vec<usize> {
        self.user_order.clone().unwrap_or_else(|| (0..self.far_users).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.antennas == 0 {
            return bad("antenna count must be positive".into());
        }
        if self.near_users == 0 || self.near_users > self.antennas {
            return bad(format!(
                "need 1 <= M <= N, got M = {}, N = {}",
                self.near_users, self.antennas
            ));
        }
        if self.far_users == 0 || self.beams_per_user == 0 {
            return bad("K and D_x must be positive".into());
        }
        if self.far_users * self.beams_per_user > self.near_users {
            return bad(format!(
                "K * D_x = {} exceeds M = {}",
                self.far_users * self.beams_per_user,
                self.near_users
            ));
        }
        if !(self.carrier_hz > 0.0) || !(self.element_spacing() > 0.0) {
            return bad("carrier and spacing must be positive".into());
        }
        if !(self.noise_power > 0.0) || !(self.beam_budget > 0.0) {
            return bad("noise power and beam budget must be positive".into());
        }
        if !(self.target_rate >= 0.0) {
            return bad("target rate must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.csi_quality) {
            return bad(format!("rho = {} outside [0, 1]", self.csi_quality));
        }
        if let Some(order) = &self.user_order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..self.far_users).collect::<Vec<_>>() {
                return bad(format!("user_order {order:?} is not a permutation of 0..{}", self.far_users));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Area-uniform drop over the half annulus `r_inner <= r <= r_outer`, `x >= 0`.
pub fn drop_half_ring<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    r_inner: f64,
    r_outer: f64,
) -> Result<Vec<Position>> {
    if !(r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
        return Err(Error::InvalidRing {
            inner: r_inner,
            outer: r_outer,
        });
    }
    let (a2, b2) = (r_inner * r_inner, r_outer * r_outer);
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let radius = (u * (b2 - a2) + a2).sqrt().clamp(r_inner, r_outer);
            let angle = -FRAC_PI_2 + PI * rng.random::<f64>();
            Position::from_polar(radius, angle)
        })
        .collect())
}

/// Near-field users on a `sqrt(M) x sqrt(M)` grid and far-field users evenly
/// spread on a half-circle.
pub fn deterministic_scenario(near_users: usize, far_users: usize) -> Result<(Vec<Position>, Vec<Position>)> {
    let side = (near_users as f64).sqrt().round() as usize;
    if side * side != near_users || near_users == 0 {
        return Err(Error::NotSquare(near_users));
    }
    let step = GRID_EXTENT / side as f64;
    let half = (side as f64 - 1.0) / 2.0;
    let mut near = Vec::with_capacity(near_users);
    for i in 0..side {
        for j in 0..side {
            near.push(Position::new(
                GRID_CENTER_RANGE + (i as f64 - half) * step,
                (j as f64 - half) * step,
            ));
        }
    }
    let far = far_arc_angles(far_users)
        .into_iter()
        .map(|theta| Position::from_polar(FAR_ARC_RADIUS, theta))
        .collect();
    Ok((near, far))
}

/// `-pi/2 + pi k / (K + 1)` for `k = 1..=K`; the endfire directions are excluded.
pub fn far_arc_angles(far_users: usize) -> Vec<f64> {
    (1..=far_users)
        .map(|k| -FRAC_PI_2 + PI * k as f64 / (far_users as f64 + 1.0))
        .collect()
}

/// Checks the near/far split against `rayleigh` (metres from `center`).
pub fn check_regions(near: &[Position], far: &[Position], center: &Position, rayleigh: f64) -> Result<()> {
    for p in near {
        let distance = p.distance(center);
        if !(distance < rayleigh) {
            return Err(Error::RegionViolation {
                kind: "near-field",
                distance,
                rayleigh,
            });
        }
    }
    for p in far {
        let distance = p.distance(center);
        if !(distance > rayleigh) {
            return Err(Error::RegionViolation {
                kind: "far-field",
                distance,
                rayleigh,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lambda28() -> f64 {
        wavelength(28e9)
    }

    #[test]
    fn rayleigh_single_element_is_zero() {
        assert_eq!(rayleigh_distance(1, 0.3, 0.01), 0.0);
    }

    #[test]
    fn rayleigh_reference_values() {
        let l = lambda28();
        // 2 (63 l/2)^2 / l = 63^2 l / 2
        let d64 = rayleigh_distance(64, l / 2.0, l);
        assert!((d64 - 3969.0 * l / 2.0).abs() < 1e-12);
        assert!((d64 - 21.2478).abs() < 1e-3, "{d64}");
        let d128 = rayleigh_distance(128, l / 2.0, l);
        assert!((d128 - 86.3462).abs() < 1e-3, "{d128}");
    }

    #[test]
    fn rayleigh_monotone() {
        let l = lambda28();
        let mut prev = 0.0;
        for n in 2..300 {
            let d = rayleigh_distance(n, l / 2.0, l);
            assert!(d > prev);
            prev = d;
        }
        assert!(rayleigh_distance(16, 0.6 * l, l) > rayleigh_distance(16, 0.5 * l, l));
    }

    #[test]
    fn ula_spacing_and_centroid() {
        let ula = UlaGeometry::new(7, 0.5, Position::ORIGIN);
        for w in ula.elements.windows(2) {
            assert!((w[0].distance(&w[1]) - 0.5).abs() < 1e-15);
            assert!(w[0].y > w[1].y);
        }
        let cy: f64 = ula.elements.iter().map(|p| p.y).sum::<f64>() / 7.0;
        assert!(cy.abs() < 1e-15);
        assert!(ula.elements.iter().all(|p| p.x == 0.0));
    }

    #[test]
    fn half_ring_empty_and_bad_radii() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(drop_half_ring(&mut rng, 0, 5.0, 6.0).unwrap().is_empty());
        assert!(drop_half_ring(&mut rng, 3, 6.0, 6.0).is_err());
        assert!(drop_half_ring(&mut rng, 3, 0.0, 6.0).is_err());
    }

    #[test]
    fn half_ring_support_and_mean_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, b) = (5.0, rayleigh_distance(64, lambda28() / 2.0, lambda28()));
        let pts = drop_half_ring(&mut rng, 100_000, a, b).unwrap();
        let mut sum = 0.0;
        for p in &pts {
            let r = p.norm();
            assert!(r >= a && r <= b && p.x >= 0.0);
            sum += r;
        }
        let mean = sum / pts.len() as f64;
        let expected = 2.0 / 3.0 * (b.powi(3) - a.powi(3)) / (b * b - a * a);
        assert!((expected - 14.8).abs() < 0.05, "{expected}");
        // std of r is ~4.4 m; 5 sigma of the mean over 1e5 draws is ~0.07 m
        assert!((mean - expected).abs() < 0.07, "{mean} vs {expected}");
    }

    #[test]
    fn half_ring_reproducible() {
        let a = drop_half_ring(&mut ChaCha8Rng::seed_from_u64(3), 50, 1.0, 2.0).unwrap();
        let b = drop_half_ring(&mut ChaCha8Rng::seed_from_u64(3), 50, 1.0, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_scenario_layout() {
        let (near, far) = deterministic_scenario(36, 1).unwrap();
        assert_eq!(near.len(), 36);
        let cx = near.iter().map(|p| p.x).sum::<f64>() / 36.0;
        let cy = near.iter().map(|p| p.y).sum::<f64>() / 36.0;
        assert!((cx - GRID_CENTER_RANGE).abs() < 1e-12 && cy.abs() < 1e-12);
        assert!((near[1].y - near[0].y - 10.0 / 6.0).abs() < 1e-12);
        assert!((far[0].x - 90.0).abs() < 1e-12 && far[0].y.abs() < 1e-12);
        assert!(deterministic_scenario(35, 1).is_err());
    }

    #[test]
    fn far_arc_three_users() {
        let a = far_arc_angles(3);
        let want = [-PI / 4.0, 0.0, PI / 4.0];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn region_assertions() {
        let l = lambda28();
        let cfg = SystemConfig::default();
        let rd = cfg.rayleigh_distance();
        let (near, far) = deterministic_scenario(36, 4).unwrap();
        check_regions(&near, &far, &Position::ORIGIN, rd).unwrap();
        let bad_far = [Position::new(10.0, 0.0)];
        assert!(check_regions(&near, &bad_far, &Position::ORIGIN, rd).is_err());
        // 128 elements push the boundary beyond the 90 m arc? no: d_R(128) ~ 86.3 m
        let rd128 = rayleigh_distance(128, l / 2.0, l);
        check_regions(&near, &far, &Position::ORIGIN, rd128).unwrap();
    }

    #[test]
    fn dbm_conversions() {
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-24);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(0.01) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = SystemConfig::default();
        c.validate().unwrap();
        c.far_users = 19;
        assert!(c.validate().is_err());
        c.far_users = 2;
        c.csi_quality = 1.5;
        assert!(c.validate().is_err());
    }
}
