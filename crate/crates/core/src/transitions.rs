//! Collapse probability (retarded ψ split at the splitter, projected on the
//! detector eigenstate at the collapse time) and time-symmetric transition
//! probability (overlap of the retarded ψ on the realized path with the
//! advanced detector state, weighted by the classical prior of that final
//! condition).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::Scenario;
use crate::grid::{check_compatible, packet_to_field, ComplexField};
use crate::optics::{route_tsf, BoxId};
use crate::packet::GaussianPacket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Copenhagen: split wavefunction, collapse at measurement.
    Cf,
    /// Time-symmetric: transition amplitude density φ*ψ, no collapse.
    Tsf,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Cf => "cf",
            Formulation::Tsf => "tsf",
        })
    }
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cf" => Ok(Formulation::Cf),
            "tsf" => Ok(Formulation::Tsf),
            other => Err(format!("unknown formulation `{other}` (expected cf or tsf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionResult {
    pub amplitude: Complex64,
    pub probability: f64,
    pub formulation: Formulation,
    pub eval_time: f64,
    #[serde(rename = "box")]
    pub box_id: BoxId,
}

/// Σ conj(bra)·ket·dx·dy. The bra is stored unconjugated.
pub fn overlap(bra: &ComplexField, ket: &ComplexField) -> Result<Complex64> {
    check_compatible(bra, ket)?;
    let sum: Complex64 = bra.values().iter().zip(ket.values()).map(|(b, k)| b.conj() * k).sum();
    Ok(sum * bra.spec().cell_area())
}

/// conj(φ)·ψ rescaled so that Σ|φ*ψ|·dx·dy = 1.
pub fn transition_density(psi: &ComplexField, phi: &ComplexField) -> Result<ComplexField> {
    check_compatible(psi, phi)?;
    let values: Vec<Complex64> = phi
        .values()
        .iter()
        .zip(psi.values())
        .map(|(f, p)| f.conj() * p)
        .collect();
    let mass: f64 = values.iter().map(|v| v.norm()).sum::<f64>() * psi.spec().cell_area();
    if mass.is_nan() || mass < f64::MIN_POSITIVE {
        return Err(Error::ZeroDensity);
    }
    let values = values.into_iter().map(|v| v / mass).collect();
    ComplexField::new(*psi.spec(), values, psi.t())
}

/// ⟨bra|ket⟩ of two packets quadratured on the scenario's compute window,
/// centered on the ket.
fn packet_overlap(scenario: &Scenario, bra: &GaussianPacket, ket: &GaussianPacket) -> Result<Complex64> {
    let spec = scenario.grid.compute_grid(ket.center)?;
    let ket_field = packet_to_field(ket, &spec)?;
    let bra_field = packet_to_field(bra, &spec)?.with_time(ket_field.t());
    overlap(&bra_field, &ket_field)
}

/// Overlap of the detector eigenstate of `b` with the unit-amplitude retarded
/// branch arriving there, at the arrival time.
pub fn arrival_overlap(scenario: &Scenario, b: BoxId) -> Result<Complex64> {
    let t = scenario.network.arrival_time(b);
    let psi = scenario
        .network
        .retarded_packet(&scenario.params, b, &scenario.source_packet(), t)?;
    let phi = scenario.network.detector(&scenario.detector, b);
    packet_overlap(scenario, &phi, &psi)
}

/// Collapse probability in box `b` at the arrival time.
pub fn collapse_probability_cf(scenario: &Scenario, b: BoxId) -> Result<TransitionResult> {
    collapse_probability_cf_at(scenario, b, scenario.network.arrival_time(b))
}

/// Collapse probability for a measurement in box `b` at time `t`:
/// A = ∫ φ*·a_b·ψ with a_b the splitter amplitude of that branch, P = |A|².
pub fn collapse_probability_cf_at(scenario: &Scenario, b: BoxId, t: f64) -> Result<TransitionResult> {
    let arrival = scenario.network.arrival_time(b);
    if t < arrival - 1e-9 * arrival.max(1.0) {
        return Err(Error::BeforeArrival { t, arrival });
    }
    let psi = scenario
        .network
        .retarded_packet(&scenario.params, b, &scenario.source_packet(), t)?;
    let phi = scenario.network.detector(&scenario.detector, b).with_t_ref(t);
    let amplitude = scenario.splitter.amplitude(b) * packet_overlap(scenario, &phi, &psi)?;
    Ok(TransitionResult {
        amplitude,
        probability: amplitude.norm_sqr().min(1.0),
        formulation: Formulation::Cf,
        eval_time: t,
        box_id: b,
    })
}

/// Transition probability to a final condition in `b`, evaluated at the
/// arrival time.
pub fn transition_probability_tsf(scenario: &Scenario, b: BoxId) -> Result<TransitionResult> {
    transition_probability_tsf_at(scenario, b, scenario.network.arrival_time(b))
}

/// Transition probability to a final condition in `b`, with the amplitude
/// ∫ φ*ψ evaluated at the common time `t`. The result does not depend on `t`.
///
/// ψ runs on the realized path with unit amplitude; the classical prior of
/// the final condition (|a_b|², one half for a balanced splitter) multiplies
/// |A|² outside the integral. With `attenuate_advanced` the advanced state
/// also carries |a_b| through the splitter.
pub fn transition_probability_tsf_at(scenario: &Scenario, b: BoxId, t: f64) -> Result<TransitionResult> {
    let net = &scenario.network;
    let branch = route_tsf(net, &scenario.params, b);
    let psi = net.retarded_packet(&scenario.params, b, &branch.packet, t)?;
    let detector = net.detector(&scenario.detector, b);
    let phi = net.advanced_packet(&scenario.params, b, &detector, t)?;

    let mut amplitude = branch.amplitude * packet_overlap(scenario, &phi, &psi)?;
    if scenario.attenuate_advanced {
        amplitude *= scenario.splitter.amplitude(b).norm();
    }
    let prior = scenario.splitter.weight(b);
    Ok(TransitionResult {
        amplitude,
        probability: (prior * amplitude.norm_sqr()).min(1.0),
        formulation: Formulation::Tsf,
        eval_time: t,
        box_id: b,
    })
}

pub fn probability(scenario: &Scenario, formulation: Formulation, b: BoxId) -> Result<TransitionResult> {
    match formulation {
        Formulation::Cf => collapse_probability_cf(scenario, b),
        Formulation::Tsf => transition_probability_tsf(scenario, b),
    }
}
