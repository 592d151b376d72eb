use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the free-particle problem, in units where the
/// defaults are ħ = 1, m = 1.
///
/// `sigma0` is the standard deviation of the position probability density
/// |ψ|² along each axis (so ψ ∝ exp(-r²/4σ₀²)), and `kx` the magnitude of the
/// central wavevector of the emitted packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
    pub sigma0: f64,
    pub kx: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            sigma0: 50.0,
            kx: 0.4,
        }
    }
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64, sigma0: f64, kx: f64) -> Result<Self> {
        let params = Self { hbar, mass, sigma0, kx };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)?;
        positive("sigma0", self.sigma0)?;
        if !(self.kx.is_finite() && self.kx >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "kx",
                reason: format!("must be finite and >= 0, got {}", self.kx),
            });
        }
        Ok(())
    }

    /// Group velocity ħk/m of the emitted packet.
    pub fn group_speed(&self) -> f64 {
        self.hbar * self.kx / self.mass
    }

    /// Standard deviation of the momentum-space density, 1/(2σ₀).
    pub fn momentum_spread(&self) -> f64 {
        0.5 / self.sigma0
    }

    /// Wavevector a grid must resolve without aliasing: k + 8σ_k.
    pub fn bandwidth(&self) -> f64 {
        self.kx + 8.0 * self.momentum_spread()
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
