//! Free retarded and advanced time evolution.
//!
//! `Retarded` carries a state forward in time (i∂ψ/∂t = Hψ). `Advanced`
//! carries a final condition backward: it is the inverse map, multiplying
//! each momentum mode by exp(+iħ|k|²dt/2m), so a retarded step followed by an
//! advanced step of the same length is the identity.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec};
use crate::packet::GaussianPacket;
use crate::params::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Retarded,
    Advanced,
}

impl Direction {
    /// Signed elapsed time for a step of length `dt`.
    pub fn signed(self, dt: f64) -> f64 {
        match self {
            Direction::Retarded => dt,
            Direction::Advanced => -dt,
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_nan() || dt < 0.0 {
        Err(Error::NegativeDt(dt))
    } else {
        Ok(())
    }
}

/// Exact free evolution of a Gaussian packet.
pub fn propagate_packet_analytic(
    packet: &GaussianPacket,
    dt: f64,
    params: &PhysicalParams,
    dir: Direction,
) -> Result<GaussianPacket> {
    check_dt(dt)?;
    Ok(evolve_packet(packet, dir.signed(dt), params))
}

/// Free evolution by a signed time `s` (negative runs backward).
pub(crate) fn evolve_packet(packet: &GaussianPacket, s: f64, params: &PhysicalParams) -> GaussianPacket {
    let [kx, ky] = packet.wavevector;
    let h_over_m = params.hbar / params.mass;
    GaussianPacket {
        center: [
            packet.center[0] + h_over_m * kx * s,
            packet.center[1] + h_over_m * ky * s,
        ],
        chirp: packet.chirp + h_over_m * s / (2.0 * packet.sigma * packet.sigma),
        global_phase: packet.global_phase + 0.5 * h_over_m * (kx * kx + ky * ky) * s,
        t_ref: packet.t_ref + s,
        ..*packet
    }
}

/// Packet centers at each of `times` (absolute, same clock as `t_ref`).
///
/// `times` must be non-decreasing.
pub fn centroid_trajectory(packet: &GaussianPacket, params: &PhysicalParams, times: &[f64]) -> Vec<[f64; 2]> {
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    times
        .iter()
        .map(|&t| evolve_packet(packet, t - packet.t_ref, params).center)
        .collect()
}

/// Exact spectral evolution on a fixed periodic window.
pub fn propagate_field_spectral(
    field: &ComplexField,
    dt: f64,
    params: &PhysicalParams,
    dir: Direction,
) -> Result<ComplexField> {
    propagate_field_spectral_shifted(field, dt, params, dir, [0.0, 0.0])
}

/// Spectral evolution that also translates the window by `window_shift`.
///
/// Used for co-moving frames: the content is translated by the exact
/// band-limited shift exp(ik·s) and the output origin moves by `s`, so a
/// packet moving with velocity v stays centered when `s = ±v·dt`.
pub fn propagate_field_spectral_shifted(
    field: &ComplexField,
    dt: f64,
    params: &PhysicalParams,
    dir: Direction,
    window_shift: [f64; 2],
) -> Result<ComplexField> {
    check_dt(dt)?;
    let spec = *field.spec();
    spec.check_nyquist(params)?;
    let s = dir.signed(dt);
    let coeff = 0.5 * params.hbar / params.mass * s;

    let factors = |n: usize, d: f64, shift: f64| -> Vec<Complex64> {
        wavenumbers(n, d)
            .into_iter()
            .map(|k| Complex64::from_polar(1.0, -coeff * k * k + k * shift))
            .collect()
    };
    let fx = factors(spec.nx, spec.dx, window_shift[0]);
    let fy = factors(spec.ny, spec.dy, window_shift[1]);

    let mut values = field.values().to_vec();
    let fft = Fft2::new(spec.nx, spec.ny);
    fft.forward(&mut values);
    let scale = 1.0 / spec.len() as f64;
    values.par_chunks_mut(spec.nx).zip(fy.par_iter()).for_each(|(row, gy)| {
        for (v, gx) in row.iter_mut().zip(&fx) {
            *v *= gx * gy * scale;
        }
    });
    fft.inverse(&mut values);

    let out_spec = GridSpec {
        origin: [spec.origin[0] + window_shift[0], spec.origin[1] + window_shift[1]],
        ..spec
    };
    Ok(ComplexField::from_parts(out_spec, values, field.t() + s))
}

/// Angular wavenumbers in FFT order for `n` samples at spacing `d`.
pub fn wavenumbers(n: usize, d: f64) -> Vec<f64> {
    let step = 2.0 * PI / (n as f64 * d);
    (0..n)
        .map(|i| {
            let m = if i < n / 2 { i as isize } else { i as isize - n as isize };
            m as f64 * step
        })
        .collect()
}

/// Unnormalised 2D FFT over a row-major nx×ny buffer.
struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd_x, &self.fwd_y);
    }

    fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv_x, &self.inv_y);
    }

    fn run(&self, data: &mut [Complex64], along_x: &Arc<dyn Fft<f64>>, along_y: &Arc<dyn Fft<f64>>) {
        rows(data, self.nx, along_x);
        let mut t = transpose(data, self.nx, self.ny);
        rows(&mut t, self.ny, along_y);
        let back = transpose(&t, self.ny, self.nx);
        data.copy_from_slice(&back);
    }
}

fn rows(data: &mut [Complex64], len: usize, fft: &Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(len).for_each_init(
        || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

/// Transpose of a row-major buffer with `w` columns and `h` rows.
fn transpose(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    out.par_chunks_mut(h).enumerate().for_each(|(i, col)| {
        for (j, v) in col.iter_mut().enumerate() {
            *v = data[j * w + i];
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{field_norm, packet_to_field};

    #[test]
    fn analytic_dt_zero_is_identity() {
        let params = PhysicalParams::default();
        let p = GaussianPacket::source(&params);
        for dir in [Direction::Retarded, Direction::Advanced] {
            assert_eq!(propagate_packet_analytic(&p, 0.0, &params, dir).unwrap(), p);
        }
    }

    #[test]
    fn analytic_transport_and_spreading() {
        let params = PhysicalParams::default();
        let p = GaussianPacket::source(&params);
        let q = propagate_packet_analytic(&p, 4000.0, &params, Direction::Retarded).unwrap();
        assert!((q.center[0] - 1600.0).abs() < 1e-9);
        assert_eq!(q.center[1], 0.0);
        assert!((q.density_std() - 64.031).abs() < 5e-4);
        assert_eq!(q.t_ref, 4000.0);
    }

    #[test]
    fn analytic_round_trip() {
        let params = PhysicalParams::default();
        let p = GaussianPacket::new([12.0, -7.0], 30.0, [0.3, -0.2]).unwrap();
        let q = propagate_packet_analytic(&p, 4000.0, &params, Direction::Retarded).unwrap();
        let r = propagate_packet_analytic(&q, 4000.0, &params, Direction::Advanced).unwrap();
        for (a, b) in [
            (p.center[0], r.center[0]),
            (p.center[1], r.center[1]),
            (p.chirp, r.chirp),
            (p.global_phase, r.global_phase),
            (p.t_ref, r.t_ref),
        ] {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn negative_dt_rejected() {
        let params = PhysicalParams::default();
        let p = GaussianPacket::source(&params);
        assert!(matches!(
            propagate_packet_analytic(&p, -1.0, &params, Direction::Retarded),
            Err(Error::NegativeDt(_))
        ));
        let spec = GridSpec::centered(16, 1.0, [0.0, 0.0]).unwrap();
        let f = ComplexField::zeros(spec, 0.0);
        assert!(propagate_field_spectral(&f, -1.0, &params, Direction::Advanced).is_err());
    }

    #[test]
    fn centroid_examples() {
        let params = PhysicalParams::default();
        let p = GaussianPacket::source(&params);
        let c = centroid_trajectory(&p, &params, &[0.0, 1000.0, 2000.0]);
        let xs: Vec<f64> = c.iter().map(|c| c[0]).collect();
        for (x, want) in xs.iter().zip([0.0, 400.0, 800.0]) {
            assert!((x - want).abs() < 1e-9);
        }
        let still = GaussianPacket::new([5.0, 6.0], 50.0, [0.0, 0.0]).unwrap();
        for c in centroid_trajectory(&still, &params, &[0.0, 10.0, 5000.0]) {
            assert_eq!(c, [5.0, 6.0]);
        }
        assert_eq!(centroid_trajectory(&p, &params, &[0.0]), vec![[0.0, 0.0]]);
    }

    #[test]
    fn wavenumber_layout() {
        let k = wavenumbers(8, 1.0);
        let step = 2.0 * PI / 8.0;
        assert_eq!(k[0], 0.0);
        assert!((k[1] - step).abs() < 1e-15);
        assert!((k[4] + 4.0 * step).abs() < 1e-15);
        assert!((k[7] + step).abs() < 1e-15);
    }

    #[test]
    fn spectral_dt_zero_and_round_trip() {
        let params = PhysicalParams::default();
        let spec = GridSpec::centered(128, 1.0, [0.0, 0.0]).unwrap();
        let p = GaussianPacket::new([3.0, 1.0], 12.0, [0.4, 0.1]).unwrap();
        let f = packet_to_field(&p, &spec).unwrap();

        let same = propagate_field_spectral(&f, 0.0, &params, Direction::Retarded).unwrap();
        assert!(same.max_abs_diff(&f).unwrap() < 1e-14);

        let fwd = propagate_field_spectral(&f, 150.0, &params, Direction::Retarded).unwrap();
        assert_eq!(fwd.t(), 150.0);
        assert!((field_norm(&fwd) - field_norm(&f)).abs() < 1e-12);
        let back = propagate_field_spectral(&fwd, 150.0, &params, Direction::Advanced).unwrap();
        assert_eq!(back.t(), 0.0);
        assert!(back.max_abs_diff(&f).unwrap() < 1e-10);
    }

    #[test]
    fn spectral_matches_analytic_in_comoving_frame() {
        let params = PhysicalParams {
            sigma0: 8.0,
            ..PhysicalParams::default()
        };
        let spec = GridSpec::centered(256, 1.0, [0.0, 0.0]).unwrap();
        let p = GaussianPacket::source(&params);
        let f = packet_to_field(&p, &spec).unwrap();
        let dt = 100.0;
        let shift = [params.group_speed() * dt, 0.0];
        let g = propagate_field_spectral_shifted(&f, dt, &params, Direction::Retarded, shift).unwrap();
        let q = propagate_packet_analytic(&p, dt, &params, Direction::Retarded).unwrap();
        let want = packet_to_field(&q, g.spec()).unwrap();
        assert!(g.max_abs_diff(&want).unwrap() < 1e-9);
    }

    #[test]
    fn spectral_rejects_aliasing_grid() {
        let params = PhysicalParams::default();
        let spec = GridSpec::centered(64, 16.0, [0.0, 0.0]).unwrap();
        let f = ComplexField::zeros(spec, 0.0);
        assert!(matches!(
            propagate_field_spectral(&f, 1.0, &params, Direction::Retarded),
            Err(Error::AliasingRisk { .. })
        ));
    }
}
