//! Building the experiment, rendering panel snapshots and sampling outcomes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::grid::{packet_to_field, ComplexField, GridSpec};
use crate::optics::{split_cf, BoxId, Branch, PathNetwork, SplitterSpec};
use crate::packet::GaussianPacket;
use crate::params::PhysicalParams;
use crate::propagate::evolve_packet;
use crate::transitions::{probability, transition_density, Formulation};

/// Compute window (co-moving, square) and the fixed snapshot window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub n: usize,
    pub extent: f64,
    pub snapshot_n: usize,
    pub snapshot_extent: f64,
    pub snapshot_origin: [f64; 2],
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            n: 1024,
            extent: 1024.0,
            snapshot_n: 512,
            snapshot_extent: 2560.0,
            snapshot_origin: [-480.0, -480.0],
        }
    }
}

impl GridSettings {
    pub fn dx(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn compute_grid(&self, center: [f64; 2]) -> Result<GridSpec> {
        GridSpec::centered(self.n, self.dx(), center)
    }

    pub fn snapshot_grid(&self) -> Result<GridSpec> {
        let d = self.snapshot_extent / self.snapshot_n as f64;
        GridSpec::new(self.snapshot_n, self.snapshot_n, d, d, self.snapshot_origin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub network: PathNetwork,
    pub splitter: SplitterSpec,
    /// Detector eigenstate shape; placed at each box by
    /// [`PathNetwork::detector`].
    pub detector: GaussianPacket,
    pub panel_times: Vec<f64>,
    pub grid: GridSettings,
    /// Let the advanced state pick up |a_b| at the splitter (off by default).
    pub attenuate_advanced: bool,
    /// Sample a two-outcome model with the no-detection deficit divided out.
    pub renormalize_outcomes: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        let params = PhysicalParams::default();
        let network = PathNetwork::default_geometry(&params);
        let arrival = network.arrival_time(BoxId::B1);
        Self {
            params,
            network,
            splitter: SplitterSpec::balanced(),
            detector: GaussianPacket::source(&params),
            panel_times: default_panel_times(arrival),
            grid: GridSettings::default(),
            attenuate_advanced: false,
            renormalize_outcomes: false,
        }
    }
}

/// Panels at 0, ¼, ¾ and all of the flight: 0, 1000, 3000, 4000 by default.
fn default_panel_times(arrival: f64) -> Vec<f64> {
    [0.0, 0.25, 0.75, 1.0].iter().map(|f| f * arrival).collect()
}

impl Scenario {
    pub fn arrival_time(&self) -> f64 {
        self.network.arrival_time(BoxId::B1)
    }

    /// The emitted packet at S, moving toward the splitter, at t = 0.
    pub fn source_packet(&self) -> GaussianPacket {
        GaussianPacket::source(&self.params)
            .with_center(self.network.source)
            .redirected(self.network.incident_direction())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.network.validate()?;
        if self.params.kx.is_nan() || self.params.kx <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "kx",
                reason: "the packet must move (kx > 0)".into(),
            });
        }
        let v = self.params.group_speed();
        if (self.network.speed - v).abs() > 1e-12 * v {
            return Err(Error::InvalidGeometry(format!(
                "network speed {} differs from group speed {v}",
                self.network.speed
            )));
        }
        check_panel_times(&self.panel_times, self.arrival_time()).map_err(|m| Error::InvalidParameter {
            name: "panel_times",
            reason: m,
        })?;
        self.grid.compute_grid([0.0, 0.0])?.check_nyquist(&self.params)?;
        self.grid.snapshot_grid()?.check_nyquist(&self.params)?;
        Ok(())
    }
}

fn check_panel_times(times: &[f64], arrival: f64) -> std::result::Result<(), String> {
    let Some(&last) = times.last() else {
        return Err("must not be empty".into());
    };
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err("times must be finite and >= 0".into());
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err("times must be non-decreasing".into());
    }
    if (last - arrival).abs() > 1e-9 * arrival {
        return Err(format!("last panel time {last} must equal the arrival time {arrival}"));
    }
    Ok(())
}

/// Builds a validated scenario; every absent key takes the reference value
/// (σ = 50, k_x = 0.4, m = 1, ħ = 1, arrival at t = 4000).
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let defaults = Scenario::default();

    let ph = &config.physics;
    let params = PhysicalParams {
        hbar: ph.hbar.unwrap_or(defaults.params.hbar),
        mass: ph.mass.unwrap_or(defaults.params.mass),
        sigma0: ph.sigma.unwrap_or(defaults.params.sigma0),
        kx: ph.kx.unwrap_or(defaults.params.kx),
    };
    for (field, value) in [
        ("physics.hbar", params.hbar),
        ("physics.mass", params.mass),
        ("physics.sigma", params.sigma0),
        ("physics.kx", params.kx),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::config(field, format!("must be finite and > 0, got {value}")));
        }
    }

    let g = &config.geometry;
    let dg = PathNetwork::default_geometry(&params);
    let network = PathNetwork::new(
        g.source.unwrap_or(dg.source),
        g.splitter.unwrap_or(dg.splitter),
        g.box1.unwrap_or(dg.box1),
        g.box2.unwrap_or(dg.box2),
        params.group_speed(),
    )
    .map_err(|e| Error::config("geometry", e.to_string()))?;

    let s = &config.splitter;
    let splitter = match (s.transmission, s.reflection) {
        (None, None) => SplitterSpec::balanced(),
        (Some(t), Some(r)) => SplitterSpec::new(Complex64::new(t[0], t[1]), Complex64::new(r[0], r[1]))
            .map_err(|e| Error::config("splitter", e.to_string()))?,
        (Some(_), None) => {
            return Err(Error::config(
                "splitter.reflection",
                "required when transmission is given",
            ))
        }
        (None, Some(_)) => {
            return Err(Error::config(
                "splitter.transmission",
                "required when reflection is given",
            ))
        }
    };

    let gs = &config.grid;
    let grid = GridSettings {
        n: gs.n.unwrap_or(defaults.grid.n),
        extent: gs.extent.unwrap_or(defaults.grid.extent),
        snapshot_n: gs.snapshot_n.unwrap_or(defaults.grid.snapshot_n),
        snapshot_extent: gs.snapshot_extent.unwrap_or(defaults.grid.snapshot_extent),
        snapshot_origin: gs.snapshot_origin.unwrap_or(defaults.grid.snapshot_origin),
    };
    grid.compute_grid([0.0, 0.0])
        .and_then(|spec| spec.check_nyquist(&params))
        .map_err(|e| Error::config("grid.n", e.to_string()))?;
    grid.snapshot_grid()
        .and_then(|spec| spec.check_nyquist(&params))
        .map_err(|e| Error::config("grid.snapshot_n", e.to_string()))?;

    let arrival = network.arrival_time(BoxId::B1);
    let panel_times = match &config.run.panel_times {
        Some(times) => {
            check_panel_times(times, arrival).map_err(|m| Error::config("run.panel_times", m))?;
            times.clone()
        }
        None => default_panel_times(arrival),
    };

    let scenario = Scenario {
        params,
        network,
        splitter,
        detector: GaussianPacket::source(&params),
        panel_times,
        grid,
        attenuate_advanced: s.attenuate_advanced.unwrap_or(false),
        renormalize_outcomes: config.run.renormalize_outcomes.unwrap_or(false),
    };
    scenario
        .validate()
        .map_err(|e| Error::config("<scenario>", e.to_string()))?;
    Ok(scenario)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// |ψ|²
    PsiDensity,
    /// |φ*ψ|, L1-normalized
    TransitionDensity,
}

impl Quantity {
    pub fn tag(self) -> &'static str {
        match self {
            Quantity::PsiDensity => "psi_density",
            Quantity::TransitionDensity => "transition_density",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "psi_density" => Some(Quantity::PsiDensity),
            "transition_density" => Some(Quantity::TransitionDensity),
            _ => None,
        }
    }
}

/// One panel: ψ (CF) or the normalized φ*ψ (TSF) on the snapshot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub quantity: Quantity,
    pub field: ComplexField,
}

impl Snapshot {
    /// The plotted real density: |ψ|² or |φ*ψ|.
    pub fn density(&self) -> Vec<f64> {
        match self.quantity {
            Quantity::PsiDensity => self.field.density(),
            Quantity::TransitionDensity => self.field.magnitude(),
        }
    }
}

/// One field per panel time on the snapshot grid. CF panels hold both
/// branches after the splitter; TSF panels hold φ*ψ on the realized path.
pub fn snapshot_sequence(
    scenario: &Scenario,
    formulation: Formulation,
    final_box: Option<BoxId>,
) -> Result<Vec<Snapshot>> {
    let spec = scenario.grid.snapshot_grid()?;
    let net = &scenario.network;
    let params = &scenario.params;
    let source = scenario.source_packet();

    match formulation {
        Formulation::Cf => {
            let t_split = net.splitter_time();
            let at_splitter = Branch::at_splitter(evolve_packet(&source, t_split, params));
            let (transmitted, reflected) = split_cf(&at_splitter, &scenario.splitter, net)?;
            scenario
                .panel_times
                .iter()
                .map(|&t| {
                    let field = if t <= t_split {
                        packet_to_field(&evolve_packet(&source, t, params), &spec)?
                    } else {
                        let mut sum = ComplexField::zeros(spec, t);
                        for branch in [&transmitted, &reflected] {
                            if branch.amplitude.norm_sqr() == 0.0 {
                                continue;
                            }
                            let packet = evolve_packet(&branch.packet, t - t_split, params);
                            let part = packet_to_field(&packet, &spec)?.scaled(branch.amplitude);
                            sum = sum.try_add(&part)?;
                        }
                        sum
                    };
                    Ok(Snapshot {
                        time: t,
                        quantity: Quantity::PsiDensity,
                        field,
                    })
                })
                .collect()
        }
        Formulation::Tsf => {
            let b = final_box.ok_or(Error::MissingFinalCondition)?;
            let detector = net.detector(&scenario.detector, b);
            scenario
                .panel_times
                .iter()
                .map(|&t| {
                    let psi = packet_to_field(&net.retarded_packet(params, b, &source, t)?, &spec)?;
                    let phi =
                        packet_to_field(&net.advanced_packet(params, b, &detector, t)?, &spec)?.with_time(psi.t());
                    Ok(Snapshot {
                        time: t,
                        quantity: Quantity::TransitionDensity,
                        field: transition_density(&psi, &phi)?,
                    })
                })
                .collect()
        }
    }
}

/// Integrated density on the transmitted side of the splitter plane and on
/// the other side, in that order.
pub fn splitter_side_weights(network: &PathNetwork, spec: &GridSpec, density: &[f64]) -> (f64, f64) {
    let (mut transmitted, mut other) = (0.0, 0.0);
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let w = density[spec.index(i, j)];
            if network.on_transmitted_side([spec.x(i), spec.y(j)]) {
                transmitted += w;
            } else {
                other += w;
            }
        }
    }
    (transmitted * spec.cell_area(), other * spec.cell_area())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    B1,
    B2,
    NoDetection,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::B1, Outcome::B2, Outcome::NoDetection];

    pub fn index(self) -> usize {
        match self {
            Outcome::B1 => 0,
            Outcome::B2 => 1,
            Outcome::NoDetection => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::B1 => "b1",
            Outcome::B2 => "b2",
            Outcome::NoDetection => "no_detection",
        }
    }
}

/// One trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub seed: u64,
    pub formulation: Formulation,
    pub outcome: Outcome,
    pub p_b1: f64,
    pub p_b2: f64,
    /// The realized transition's φ*ψ was renormalized to probability one
    /// once the outcome was known (an update of ignorance, TSF only).
    pub renormalized: bool,
}

/// Per-box probabilities used for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub formulation: Formulation,
    pub p_b1: f64,
    pub p_b2: f64,
    /// The no-detection deficit has been divided out.
    pub renormalized_outcomes: bool,
}

impl OutcomeModel {
    pub fn new(formulation: Formulation, p_b1: f64, p_b2: f64) -> Result<Self> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(p_b1) && ok(p_b2) && p_b1 + p_b2 <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "outcome probabilities",
                reason: format!("need 0 <= p and p_b1 + p_b2 <= 1, got {p_b1}, {p_b2}"),
            });
        }
        Ok(Self {
            formulation,
            p_b1,
            p_b2,
            renormalized_outcomes: false,
        })
    }

    pub fn from_scenario(scenario: &Scenario, formulation: Formulation) -> Result<Self> {
        let p1 = probability(scenario, formulation, BoxId::B1)?.probability;
        let p2 = probability(scenario, formulation, BoxId::B2)?.probability;
        let model = Self::new(formulation, p1, p2)?;
        Ok(if scenario.renormalize_outcomes {
            model.renormalized()?
        } else {
            model
        })
    }

    /// Two-outcome model p_i / (p_b1 + p_b2).
    pub fn renormalized(self) -> Result<Self> {
        let total = self.p_b1 + self.p_b2;
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "outcome probabilities",
                reason: "cannot renormalize: no detection probability".into(),
            });
        }
        Ok(Self {
            p_b1: self.p_b1 / total,
            p_b2: self.p_b2 / total,
            renormalized_outcomes: true,
            ..self
        })
    }

    pub fn probabilities(&self) -> [f64; 3] {
        if self.renormalized_outcomes {
            return [self.p_b1, self.p_b2, 0.0];
        }
        [self.p_b1, self.p_b2, (1.0 - self.p_b1 - self.p_b2).max(0.0)]
    }

    /// Maps a uniform draw in [0, 1) to an outcome.
    pub fn draw(&self, u: f64) -> Outcome {
        if u < self.p_b1 {
            Outcome::B1
        } else if self.renormalized_outcomes || u < self.p_b1 + self.p_b2 {
            Outcome::B2
        } else {
            Outcome::NoDetection
        }
    }

    /// Run `run_id` of an ensemble seeded with `seed`: ChaCha8 keyed by the
    /// seed, on stream `run_id`, one f64 draw.
    pub fn sample(&self, seed: u64, run_id: u64) -> RunRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run_id);
        let outcome = self.draw(rng.random::<f64>());
        RunRecord {
            run_id,
            seed,
            formulation: self.formulation,
            outcome,
            p_b1: self.p_b1,
            p_b2: self.p_b2,
            renormalized: self.formulation == Formulation::Tsf && outcome != Outcome::NoDetection,
        }
    }
}

pub fn sample_outcome(scenario: &Scenario, formulation: Formulation, seed: u64) -> Result<RunRecord> {
    Ok(OutcomeModel::from_scenario(scenario, formulation)?.sample(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTally {
    pub outcome: Outcome,
    pub probability: f64,
    pub count: u64,
    pub frequency: f64,
    /// 4·√(p(1-p)/n)
    pub band: f64,
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub formulation: Formulation,
    pub n_runs: u64,
    pub seed: u64,
    pub renormalized_outcomes: bool,
    pub outcomes: Vec<OutcomeTally>,
}

impl EnsembleSummary {
    pub fn tally(&self, outcome: Outcome) -> &OutcomeTally {
        &self.outcomes[outcome.index()]
    }

    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.within_band)
    }
}

pub fn run_ensemble(scenario: &Scenario, formulation: Formulation, n_runs: u64, seed: u64) -> Result<EnsembleSummary> {
    let model = OutcomeModel::from_scenario(scenario, formulation)?;
    run_ensemble_with(&model, n_runs, seed, |_| {})
}

/// Samples `n_runs` trials, handing each record to `sink` in run order.
pub fn run_ensemble_with<F>(model: &OutcomeModel, n_runs: u64, seed: u64, mut sink: F) -> Result<EnsembleSummary>
where
    F: FnMut(&RunRecord),
{
    if n_runs == 0 {
        return Err(Error::InvalidParameter {
            name: "n_runs",
            reason: "must be >= 1".into(),
        });
    }
    const CHUNK: u64 = 1 << 14;
    let mut counts = [0u64; 3];
    let mut start = 0;
    while start < n_runs {
        let end = (start + CHUNK).min(n_runs);
        let records: Vec<RunRecord> = (start..end).into_par_iter().map(|id| model.sample(seed, id)).collect();
        for r in &records {
            counts[r.outcome.index()] += 1;
            sink(r);
        }
        start = end;
    }

    let n = n_runs as f64;
    let outcomes = Outcome::ALL
        .iter()
        .zip(model.probabilities())
        .map(|(&outcome, p)| {
            let count = counts[outcome.index()];
            let frequency = count as f64 / n;
            let band = 4.0 * (p * (1.0 - p) / n).sqrt();
            OutcomeTally {
                outcome,
                probability: p,
                count,
                frequency,
                band,
                within_band: (frequency - p).abs() <= band,
            }
        })
        .collect();
    Ok(EnsembleSummary {
        formulation: model.formulation,
        n_runs,
        seed,
        renormalized_outcomes: model.renormalized_outcomes,
        outcomes,
    })
}
