//! Closed-form isotropic Gaussian wavepackets.
//!
//! A packet at chirp τ is
//!
//! ```text
//! ψ(r) = 1/(√(2π)·σ·(1 + iτ)) · exp(-|r - c|² / (4σ²(1 + iτ)) + i k·(r - c) + iγ)
//! ```
//!
//! where σ is the waist (density std at τ = 0). Free evolution for a time t
//! advances τ by ħt/(2mσ²), moves c with the group velocity and adds
//! ħ|k|²t/(2m) to γ; the form is closed under that flow, so any packet can be
//! carried forward or backward exactly. The prefactor keeps ∫|ψ|² = 1 for
//! every τ.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub center: [f64; 2],
    /// Waist: std of |ψ|² per axis when `chirp` is zero.
    pub sigma: f64,
    pub wavevector: [f64; 2],
    /// Accumulated spreading ħ(t - t_waist)/(2mσ²); negative before the waist.
    pub chirp: f64,
    pub global_phase: f64,
    pub t_ref: f64,
}

impl GaussianPacket {
    pub fn new(center: [f64; 2], sigma: f64, wavevector: [f64; 2]) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be finite and > 0, got {sigma}"),
            });
        }
        if !(center.iter().chain(&wavevector).all(|v| v.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "center/wavevector",
                reason: "must be finite".into(),
            });
        }
        Ok(Self {
            center,
            sigma,
            wavevector,
            chirp: 0.0,
            global_phase: 0.0,
            t_ref: 0.0,
        })
    }

    /// The emitted packet: waist σ₀ at the origin, moving along +x.
    pub fn source(params: &PhysicalParams) -> Self {
        Self {
            center: [0.0, 0.0],
            sigma: params.sigma0,
            wavevector: [params.kx, 0.0],
            chirp: 0.0,
            global_phase: 0.0,
            t_ref: 0.0,
        }
    }

    /// Current std of |ψ|² per axis, σ·√(1 + τ²).
    pub fn density_std(&self) -> f64 {
        self.sigma * self.chirp.hypot(1.0)
    }

    pub fn speed(&self, params: &PhysicalParams) -> f64 {
        params.hbar * self.wavevector[0].hypot(self.wavevector[1]) / params.mass
    }

    pub fn velocity(&self, params: &PhysicalParams) -> [f64; 2] {
        let s = params.hbar / params.mass;
        [s * self.wavevector[0], s * self.wavevector[1]]
    }

    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn with_t_ref(mut self, t_ref: f64) -> Self {
        self.t_ref = t_ref;
        self
    }

    /// Same packet with its wavevector turned onto `direction` (magnitude kept).
    ///
    /// For an isotropic envelope this is the mirror image of the packet about a
    /// plane through its center, which is how a thin splitter acts on it.
    pub fn redirected(mut self, direction: [f64; 2]) -> Self {
        let k = self.wavevector[0].hypot(self.wavevector[1]);
        let norm = direction[0].hypot(direction[1]);
        self.wavevector = [k * direction[0] / norm, k * direction[1] / norm];
        self
    }

    pub fn amplitude_at(&self, x: f64, y: f64) -> Complex64 {
        let width = Complex64::new(1.0, self.chirp);
        let (ux, uy) = (x - self.center[0], y - self.center[1]);
        let r2 = ux * ux + uy * uy;
        let carrier = self.wavevector[0] * ux + self.wavevector[1] * uy + self.global_phase;
        let exponent = -r2 / (4.0 * self.sigma * self.sigma * width) + Complex64::i() * carrier;
        exponent.exp() / (width * ((2.0 * PI).sqrt() * self.sigma))
    }
}
