//! Numerical self-checks: unitarity, agreement of the spectral and closed-form
//! propagators, time invariance of the transition amplitude, and uniform
//! motion of the packet centroid.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::experiment::Scenario;
use crate::grid::{density_moments, field_norm, packet_to_field, ComplexField};
use crate::optics::BoxId;
use crate::propagate::{propagate_field_spectral_shifted, propagate_packet_analytic, Direction};
use crate::transitions::{collapse_probability_cf, overlap, transition_probability_tsf};

pub const UNITARITY_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-6;
pub const OVERLAP_INVARIANCE_TOL: f64 = 1e-10;
pub const CENTROID_LINEARITY_TOL: f64 = 1e-9;
pub const FORMULATION_AGREEMENT_TOL: f64 = 1e-9;

pub const ORACLE_TIMES: [f64; 3] = [100.0, 1000.0, 4000.0];
pub const INVARIANCE_TIMES: [f64; 4] = [0.0, 500.0, 2000.0, 4000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    Unitarity,
    OracleEquivalence,
    OverlapInvariance,
    CentroidLinearity,
    FormulationAgreement,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::Unitarity,
        Check::OracleEquivalence,
        Check::OverlapInvariance,
        Check::CentroidLinearity,
        Check::FormulationAgreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Unitarity => "unitarity",
            Check::OracleEquivalence => "oracle-equivalence",
            Check::OverlapInvariance => "overlap-invariance",
            Check::CentroidLinearity => "centroid-linearity",
            Check::FormulationAgreement => "formulation-agreement",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Check::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Check::ALL.iter().map(|c| c.name()).collect();
            format!("unknown check `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub case: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(check: Check, case: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            check: check.name().to_string(),
            case: case.into(),
            measured,
            tolerance,
            passed: measured.is_finite() && measured < tolerance,
        }
    }
}

/// Runs `check`. `dt` replaces the default set of evolution times where the
/// check has one.
pub fn run_check(scenario: &Scenario, check: Check, dt: Option<f64>) -> Result<Vec<CheckResult>> {
    match check {
        Check::Unitarity => {
            let dt = dt.unwrap_or(scenario.arrival_time());
            Ok(vec![CheckResult::new(
                check,
                format!("dt={dt}"),
                norm_drift(scenario, dt)?,
                UNITARITY_TOL,
            )])
        }
        Check::OracleEquivalence => {
            let times = dt.map(|d| vec![d]).unwrap_or_else(|| ORACLE_TIMES.to_vec());
            times
                .into_iter()
                .map(|t| {
                    Ok(CheckResult::new(
                        check,
                        format!("t={t}"),
                        spectral_vs_analytic(scenario, t)?,
                        ORACLE_TOL,
                    ))
                })
                .collect()
        }
        Check::OverlapInvariance => {
            let mut out = Vec::new();
            if dt.is_none() {
                let amps = amplitude_series(scenario, &INVARIANCE_TIMES)?;
                let spread = max_pairwise_deviation(&amps);
                out.push(CheckResult::new(
                    check,
                    "t in {0,500,2000,4000}",
                    spread,
                    OVERLAP_INVARIANCE_TOL,
                ));
            }
            let dt = dt.unwrap_or(scenario.arrival_time());
            out.push(CheckResult::new(
                check,
                format!("adjoint dt={dt}"),
                adjoint_deviation(scenario, dt)?,
                OVERLAP_INVARIANCE_TOL,
            ));
            Ok(out)
        }
        Check::CentroidLinearity => {
            let times: Vec<f64> = (0..=16).map(|i| i as f64 * scenario.arrival_time() / 16.0).collect();
            Ok(vec![CheckResult::new(
                check,
                "t in [0, arrival], 17 samples",
                centroid_fit_residual(scenario, &times)?,
                CENTROID_LINEARITY_TOL,
            )])
        }
        Check::FormulationAgreement => BoxId::BOTH
            .into_iter()
            .map(|b| {
                let cf = collapse_probability_cf(scenario, b)?.probability;
                let tsf = transition_probability_tsf(scenario, b)?.probability;
                Ok(CheckResult::new(
                    check,
                    format!("box {b}"),
                    (cf - tsf).abs(),
                    FORMULATION_AGREEMENT_TOL,
                ))
            })
            .collect(),
    }
}

pub fn run_all(scenario: &Scenario) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for check in Check::ALL {
        out.extend(run_check(scenario, check, None)?);
    }
    Ok(out)
}

fn comoving_shift(scenario: &Scenario, dt: f64, dir: Direction) -> [f64; 2] {
    let v = scenario.source_packet().velocity(&scenario.params);
    let s = dir.signed(dt);
    [v[0] * s, v[1] * s]
}

fn sampled_source(scenario: &Scenario) -> Result<ComplexField> {
    let src = scenario.source_packet();
    packet_to_field(&src, &scenario.grid.compute_grid(src.center)?)
}

/// Relative change of the discrete norm over a spectral step of `dt`.
pub fn norm_drift(scenario: &Scenario, dt: f64) -> Result<f64> {
    let f = sampled_source(scenario)?;
    let shift = comoving_shift(scenario, dt, Direction::Retarded);
    let g = propagate_field_spectral_shifted(&f, dt, &scenario.params, Direction::Retarded, shift)?;
    let n0 = field_norm(&f);
    Ok((field_norm(&g) - n0).abs() / n0)
}

/// Max pointwise |spectral - analytic| after evolving the source packet by
/// `dt` in a co-moving window.
pub fn spectral_vs_analytic(scenario: &Scenario, dt: f64) -> Result<f64> {
    let f = sampled_source(scenario)?;
    let shift = comoving_shift(scenario, dt, Direction::Retarded);
    let g = propagate_field_spectral_shifted(&f, dt, &scenario.params, Direction::Retarded, shift)?;
    let exact = propagate_packet_analytic(&scenario.source_packet(), dt, &scenario.params, Direction::Retarded)?;
    let want = packet_to_field(&exact, g.spec())?;
    g.max_abs_diff(&want)
}

/// Transition amplitude on the straight S → B1 path at each time, with ψ
/// evolved forward from emission and φ backward from arrival, both on the
/// grid.
pub fn amplitude_series(scenario: &Scenario, times: &[f64]) -> Result<Vec<Complex64>> {
    let arrival = scenario.arrival_time();
    let psi0 = sampled_source(scenario)?;
    let detector = scenario.network.detector(&scenario.detector, BoxId::B1);
    let phi_final = packet_to_field(&detector, &scenario.grid.compute_grid(detector.center)?)?;
    let params = &scenario.params;

    times
        .iter()
        .map(|&t| {
            let psi = propagate_field_spectral_shifted(
                &psi0,
                t,
                params,
                Direction::Retarded,
                comoving_shift(scenario, t, Direction::Retarded),
            )?;
            let back = arrival - t;
            let phi = propagate_field_spectral_shifted(
                &phi_final,
                back,
                params,
                Direction::Advanced,
                comoving_shift(scenario, back, Direction::Advanced),
            )?;
            overlap(&phi, &psi)
        })
        .collect()
}

/// |⟨φ|U(dt)ψ⟩ - ⟨U(-dt)φ|ψ⟩| with φ the B1 detector at arrival and ψ the
/// analytic branch state `dt` earlier.
pub fn adjoint_deviation(scenario: &Scenario, dt: f64) -> Result<f64> {
    let arrival = scenario.arrival_time();
    let params = &scenario.params;
    let start = (arrival - dt).max(0.0);
    let dt = arrival - start;

    let psi_packet = propagate_packet_analytic(&scenario.source_packet(), start, params, Direction::Retarded)?;
    let psi = packet_to_field(&psi_packet, &scenario.grid.compute_grid(psi_packet.center)?)?;
    let detector = scenario.network.detector(&scenario.detector, BoxId::B1);
    let phi = packet_to_field(&detector, &scenario.grid.compute_grid(detector.center)?)?;

    let late = overlap(
        &phi,
        &propagate_field_spectral_shifted(
            &psi,
            dt,
            params,
            Direction::Retarded,
            comoving_shift(scenario, dt, Direction::Retarded),
        )?,
    )?;
    let early = overlap(
        &propagate_field_spectral_shifted(
            &phi,
            dt,
            params,
            Direction::Advanced,
            comoving_shift(scenario, dt, Direction::Advanced),
        )?,
        &psi,
    )?;
    Ok((late - early).norm())
}

fn max_pairwise_deviation(values: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            worst = worst.max((a - b).norm());
        }
    }
    worst
}

/// Largest residual of a least-squares line through the measured centroid
/// (per axis), relative to the total displacement over `times`.
pub fn centroid_fit_residual(scenario: &Scenario, times: &[f64]) -> Result<f64> {
    let f = sampled_source(scenario)?;
    let mut xs = Vec::with_capacity(times.len());
    let mut ys = Vec::with_capacity(times.len());
    for &t in times {
        let shift = comoving_shift(scenario, t, Direction::Retarded);
        let g = propagate_field_spectral_shifted(&f, t, &scenario.params, Direction::Retarded, shift)?;
        let m = density_moments(&g)?;
        xs.push(m.mean[0]);
        ys.push(m.mean[1]);
    }
    let displacement = (xs[xs.len() - 1] - xs[0]).hypot(ys[ys.len() - 1] - ys[0]);
    let worst = linear_fit_residual(times, &xs).max(linear_fit_residual(times, &ys));
    Ok(if displacement > 0.0 {
        worst / displacement
    } else {
        worst
    })
}

/// Max |y - (a + b·t)| for the least-squares line through (t, y).
pub fn linear_fit_residual(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm) * (v - tm)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    t.iter()
        .zip(y)
        .map(|(a, b)| (b - (ym + slope * (a - tm))).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_residual_of_a_line_is_zero() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!(linear_fit_residual(&t, &[1.0, 3.0, 5.0, 7.0]) < 1e-15);
        assert!((linear_fit_residual(&t, &[0.0, 1.0, 0.0, 1.0]) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn check_names_round_trip() {
        for c in Check::ALL {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
        }
        assert!("nope".parse::<Check>().is_err());
    }
}
