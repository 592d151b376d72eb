//! Uniform 2D grids and complex fields sampled on them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packet::GaussianPacket;
use crate::params::PhysicalParams;

/// Half-width, in current density-std radii, that a window must leave on each
/// side of a packet center before the packet may be sampled on it.
pub const COVERAGE_RADII: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Coordinates of sample (0, 0).
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, origin: [f64; 2]) -> Result<Self> {
        for (axis, n) in [('x', nx), ('y', ny)] {
            if n < 16 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "n{axis} must be a power of two >= 16, got {n}"
                )));
            }
        }
        if !(dx.is_finite() && dx > 0.0 && dy.is_finite() && dy > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be finite and > 0, got dx={dx}, dy={dy}"
            )));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { nx, ny, dx, dy, origin })
    }

    /// Square n×n grid whose sample (n/2, n/2) sits on `center`.
    pub fn centered(n: usize, dx: f64, center: [f64; 2]) -> Result<Self> {
        let half = (n / 2) as f64 * dx;
        Self::new(n, n, dx, dx, [center[0] - half, center[1] - half])
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.dy
    }

    /// Row-major index; rows run along x.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.origin[0], self.x(self.nx - 1))
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.origin[1], self.y(self.ny - 1))
    }

    pub fn nyquist(&self) -> [f64; 2] {
        [PI / self.dx, PI / self.dy]
    }

    pub fn check_bandwidth(&self, required: f64) -> Result<()> {
        for (axis, nyquist) in ['x', 'y'].into_iter().zip(self.nyquist()) {
            if nyquist <= required {
                return Err(Error::AliasingRisk {
                    axis,
                    nyquist,
                    required,
                });
            }
        }
        Ok(())
    }

    /// Nyquist bound π/dx > k + 8σ_k for the given physical parameters.
    pub fn check_nyquist(&self, params: &PhysicalParams) -> Result<()> {
        self.check_bandwidth(params.bandwidth())
    }

    /// Checks that `[c - r, c + r]` lies inside the window on both axes.
    pub fn check_covers(&self, center: [f64; 2], radius: f64) -> Result<()> {
        for (axis, c, (lo, hi)) in [('x', center[0], self.x_range()), ('y', center[1], self.y_range())] {
            let (need_lo, need_hi) = (c - radius, c + radius);
            if need_lo < lo || need_hi > hi {
                return Err(Error::GridTooSmall {
                    axis,
                    need_lo,
                    need_hi,
                    have_lo: lo,
                    have_hi: hi,
                });
            }
        }
        Ok(())
    }

    /// Same shape and spacing, and origins equal up to rounding.
    pub fn matches(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale;
        self.nx == other.nx
            && self.ny == other.ny
            && close(self.dx, other.dx, self.dx)
            && close(self.dy, other.dy, self.dy)
            && close(self.origin[0], other.origin[0], self.dx)
            && close(self.origin[1], other.origin[1], self.dy)
    }
}

/// Complex samples on a [`GridSpec`] at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    spec: GridSpec,
    values: Vec<Complex64>,
    t: f64,
}

impl ComplexField {
    pub fn new(spec: GridSpec, values: Vec<Complex64>, t: f64) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::InvalidGrid("field contains non-finite samples".into()));
        }
        Ok(Self { spec, values, t })
    }

    pub fn zeros(spec: GridSpec, t: f64) -> Self {
        Self {
            spec,
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
            t,
        }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn<F>(spec: GridSpec, t: f64, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let mut values = vec![Complex64::new(0.0, 0.0); spec.len()];
        values.par_chunks_mut(spec.nx).enumerate().for_each(|(j, row)| {
            let y = spec.y(j);
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(spec.x(i), y);
            }
        });
        Self { spec, values, t }
    }

    pub(crate) fn from_parts(spec: GridSpec, values: Vec<Complex64>, t: f64) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values, t }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self
    }

    /// Pointwise sum; both fields must share grid and time.
    pub fn try_add(mut self, other: &ComplexField) -> Result<Self> {
        check_compatible(&self, other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(self)
    }

    /// |v|² at every sample.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// |v| at every sample.
    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> Result<f64> {
        if !self.spec.matches(&other.spec) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_compatible(a: &ComplexField, b: &ComplexField) -> Result<()> {
    if !a.spec.matches(&b.spec) {
        return Err(Error::GridMismatch);
    }
    let scale = a.t.abs().max(b.t.abs()).max(1.0);
    if (a.t - b.t).abs() > 1e-9 * scale {
        return Err(Error::TimeMismatch(a.t, b.t));
    }
    Ok(())
}

/// Samples the closed-form packet on `spec` and rescales the samples so the
/// discrete norm is exactly one.
///
/// The window must reach [`COVERAGE_RADII`] current density-std radii past
/// the packet center on every side, and resolve the packet's bandwidth.
pub fn packet_to_field(packet: &GaussianPacket, spec: &GridSpec) -> Result<ComplexField> {
    let k = packet.wavevector[0].hypot(packet.wavevector[1]);
    spec.check_bandwidth(k + 4.0 / packet.sigma)?;
    spec.check_covers(packet.center, COVERAGE_RADII * packet.density_std())?;

    let field = ComplexField::from_fn(*spec, packet.t_ref, |x, y| packet.amplitude_at(x, y));
    let norm = field_norm(&field);
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(field.scaled(Complex64::new(norm.sqrt().recip(), 0.0)))
}

/// Squared L2 norm as a Riemann sum, Σ|v|²·dx·dy.
pub fn field_norm(field: &ComplexField) -> f64 {
    field.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * field.spec.cell_area()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMoments {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

/// Centroid and per-axis std of |ψ|².
pub fn density_moments(field: &ComplexField) -> Result<DensityMoments> {
    let spec = &field.spec;
    let density = field.density();
    let total: f64 = density.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroField);
    }

    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in 0..spec.ny {
        let y = spec.y(j);
        let row = &density[j * spec.nx..(j + 1) * spec.nx];
        for (i, w) in row.iter().enumerate() {
            sx += w * spec.x(i);
            sy += w * y;
        }
    }
    let mean = [sx / total, sy / total];

    let mut vx = 0.0;
    let mut vy = 0.0;
    for j in 0..spec.ny {
        let dy = spec.y(j) - mean[1];
        let row = &density[j * spec.nx..(j + 1) * spec.nx];
        for (i, w) in row.iter().enumerate() {
            let dx = spec.x(i) - mean[0];
            vx += w * dx * dx;
            vy += w * dy * dy;
        }
    }
    Ok(DensityMoments {
        mean,
        std: [(vx / total).sqrt(), (vy / total).sqrt()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_grid(n: usize) -> GridSpec {
        GridSpec::centered(n, 1.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(8, 16, 1.0, 1.0, [0.0, 0.0]).is_err());
        assert!(GridSpec::new(48, 64, 1.0, 1.0, [0.0, 0.0]).is_err());
        assert!(GridSpec::new(16, 16, 0.0, 1.0, [0.0, 0.0]).is_err());
        assert!(GridSpec::new(16, 32, 1.0, 2.0, [0.0, 0.0]).is_ok());
    }

    #[test]
    fn nyquist_bound() {
        let params = PhysicalParams::default();
        assert!(default_grid(512).check_nyquist(&params).is_ok());
        // π/7 ≈ 0.449 < 0.48
        let coarse = GridSpec::centered(64, 7.0, [0.0, 0.0]).unwrap();
        assert!(matches!(coarse.check_nyquist(&params), Err(Error::AliasingRisk { .. })));
    }

    #[test]
    fn default_packet_is_normalised_on_512() {
        let packet = GaussianPacket::source(&PhysicalParams::default());
        let field = packet_to_field(&packet, &default_grid(512)).unwrap();
        assert!((field_norm(&field) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_and_scaled_norms() {
        let spec = default_grid(64);
        assert_eq!(field_norm(&ComplexField::zeros(spec, 0.0)), 0.0);
        let packet = GaussianPacket::new([0.0, 0.0], 5.0, [0.3, 0.0]).unwrap();
        let field = packet_to_field(&packet, &spec).unwrap();
        let n1 = field_norm(&field);
        let n2 = field_norm(&field.scaled(Complex64::new(2.0, 0.0)));
        assert!((n2 - 4.0 * n1).abs() < 1e-12);
    }

    #[test]
    fn displaced_packet_is_rejected() {
        let packet = GaussianPacket::source(&PhysicalParams::default()).with_center([900.0, 0.0]);
        assert!(matches!(
            packet_to_field(&packet, &default_grid(512)),
            Err(Error::GridTooSmall { axis: 'x', .. })
        ));
    }

    #[test]
    fn moments_of_zero_field() {
        let spec = default_grid(16);
        assert!(matches!(
            density_moments(&ComplexField::zeros(spec, 0.0)),
            Err(Error::ZeroField)
        ));
    }

    #[test]
    fn mirrored_field_negates_mean() {
        let spec = GridSpec::new(64, 64, 1.0, 1.0, [-31.5, -31.5]).unwrap();
        let packet = GaussianPacket::new([4.0, -2.0], 4.0, [0.2, 0.1]).unwrap();
        let field = packet_to_field(&packet, &spec).unwrap();
        let mirrored = ComplexField::from_fn(spec, 0.0, |x, y| {
            let i = ((-x - spec.origin[0]) / spec.dx).round() as usize;
            let j = ((y - spec.origin[1]) / spec.dy).round() as usize;
            field.get(i, j)
        });
        let a = density_moments(&field).unwrap();
        let b = density_moments(&mirrored).unwrap();
        assert!((a.mean[0] + b.mean[0]).abs() < 1e-12);
        assert!((a.mean[1] - b.mean[1]).abs() < 1e-12);
    }

    #[test]
    fn mismatched_fields_do_not_add() {
        let a = ComplexField::zeros(default_grid(16), 0.0);
        let b = ComplexField::zeros(default_grid(32), 0.0);
        assert!(matches!(a.clone().try_add(&b), Err(Error::GridMismatch)));
        let c = ComplexField::zeros(default_grid(16), 1.0);
        assert!(matches!(a.try_add(&c), Err(Error::TimeMismatch(..))));
    }
}
