//! Source, balanced splitter and two boxes: the path network of the
//! experiment, how a branch divides at the splitter, and how a packet is
//! carried along a path in either time direction.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::packet::GaussianPacket;
use crate::params::PhysicalParams;
use crate::propagate::evolve_packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    Source,
    Splitter,
    Box1,
    Box2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxId {
    B1,
    B2,
}

impl BoxId {
    pub const BOTH: [BoxId; 2] = [BoxId::B1, BoxId::B2];

    pub fn node(self) -> Node {
        match self {
            BoxId::B1 => Node::Box1,
            BoxId::B2 => Node::Box2,
        }
    }

    pub fn other(self) -> BoxId {
        match self {
            BoxId::B1 => BoxId::B2,
            BoxId::B2 => BoxId::B1,
        }
    }
}

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxId::B1 => "b1",
            BoxId::B2 => "b2",
        })
    }
}

impl FromStr for BoxId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b1" => Ok(BoxId::B1),
            "b2" => Ok(BoxId::B2),
            other => Err(format!("unknown box `{other}` (expected b1 or b2)")),
        }
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn length(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn unit(a: [f64; 2]) -> [f64; 2] {
    let l = length(a);
    [a[0] / l, a[1] / l]
}

/// S → BS → {B1, B2} with the transport speed ħk/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathNetwork {
    pub source: [f64; 2],
    pub splitter: [f64; 2],
    pub box1: [f64; 2],
    pub box2: [f64; 2],
    pub speed: f64,
}

/// Paths that differ by more than this relative amount are rejected.
const EQUAL_PATH_TOLERANCE: f64 = 1e-9;

impl PathNetwork {
    pub fn new(source: [f64; 2], splitter: [f64; 2], box1: [f64; 2], box2: [f64; 2], speed: f64) -> Result<Self> {
        let net = Self {
            source,
            splitter,
            box1,
            box2,
            speed,
        };
        net.validate()?;
        Ok(net)
    }

    /// S=(0,0), BS=(800,0), B1=(1600,0), B2=(800,800): both paths are 1600
    /// long, so at the default speed 0.4 both halves arrive at t = 4000.
    pub fn default_geometry(params: &PhysicalParams) -> Self {
        Self {
            source: [0.0, 0.0],
            splitter: [800.0, 0.0],
            box1: [1600.0, 0.0],
            box2: [800.0, 800.0],
            speed: params.group_speed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.source, self.splitter, self.box1, self.box2]
            .iter()
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidGeometry("node positions must be finite".into()));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "transport speed must be > 0, got {}",
                self.speed
            )));
        }
        for (name, l) in [
            ("S->BS", self.leg_length(Node::Source)),
            ("BS->B1", self.leg_length(Node::Box1)),
            ("BS->B2", self.leg_length(Node::Box2)),
        ] {
            if l.is_nan() || l <= 0.0 {
                return Err(Error::InvalidGeometry(format!("leg {name} has zero length")));
            }
        }
        let (p1, p2) = (self.path_length(BoxId::B1), self.path_length(BoxId::B2));
        if (p1 - p2).abs() > EQUAL_PATH_TOLERANCE * p1.max(p2) {
            return Err(Error::InvalidGeometry(format!(
                "paths to the boxes must have equal length (B1: {p1}, B2: {p2})"
            )));
        }
        let incident = self.incident_direction();
        if (1.0 - dot(incident, self.leg_direction(BoxId::B1))).abs() > 1e-9 {
            return Err(Error::InvalidGeometry(
                "BS->B1 must continue the S->BS direction (transmitted leg)".into(),
            ));
        }
        if (1.0 - dot(incident, self.leg_direction(BoxId::B2))).abs() < 1e-9 {
            return Err(Error::InvalidGeometry(
                "BS->B2 must leave the S->BS direction (reflected leg)".into(),
            ));
        }
        Ok(())
    }

    pub fn position(&self, node: Node) -> [f64; 2] {
        match node {
            Node::Source => self.source,
            Node::Splitter => self.splitter,
            Node::Box1 => self.box1,
            Node::Box2 => self.box2,
        }
    }

    pub fn box_position(&self, b: BoxId) -> [f64; 2] {
        self.position(b.node())
    }

    /// Length of the leg ending at `node` (the source leg for `Source` and
    /// `Splitter`).
    pub fn leg_length(&self, node: Node) -> f64 {
        match node {
            Node::Source | Node::Splitter => length(sub(self.splitter, self.source)),
            Node::Box1 | Node::Box2 => length(sub(self.position(node), self.splitter)),
        }
    }

    pub fn path_length(&self, b: BoxId) -> f64 {
        self.leg_length(Node::Source) + self.leg_length(b.node())
    }

    pub fn incident_direction(&self) -> [f64; 2] {
        unit(sub(self.splitter, self.source))
    }

    pub fn leg_direction(&self, b: BoxId) -> [f64; 2] {
        unit(sub(self.box_position(b), self.splitter))
    }

    pub fn splitter_time(&self) -> f64 {
        self.leg_length(Node::Source) / self.speed
    }

    pub fn arrival_time(&self, b: BoxId) -> f64 {
        self.path_length(b) / self.speed
    }

    /// Whether `p` lies on the transmitted (B1) side of the splitter plane.
    pub fn on_transmitted_side(&self, p: [f64; 2]) -> bool {
        let normal = sub(self.leg_direction(BoxId::B2), self.incident_direction());
        dot(sub(p, self.splitter), normal) < 0.0
    }

    /// A retarded packet emitted at S (with `source.t_ref` as emission time),
    /// carried along the path to `b` and evaluated at time `t`.
    pub fn retarded_packet(
        &self,
        params: &PhysicalParams,
        b: BoxId,
        source: &GaussianPacket,
        t: f64,
    ) -> Result<GaussianPacket> {
        if t < source.t_ref {
            return Err(Error::NegativeDt(t - source.t_ref));
        }
        let t_split = source.t_ref + self.splitter_time();
        if t <= t_split {
            return Ok(evolve_packet(source, t - source.t_ref, params));
        }
        let at_splitter = evolve_packet(source, t_split - source.t_ref, params).redirected(self.leg_direction(b));
        Ok(evolve_packet(&at_splitter, t - t_split, params))
    }

    /// The detector eigenstate of box `b`, fixed at the box at arrival, carried
    /// backward (or forward) along the same path to time `t`.
    pub fn advanced_packet(
        &self,
        params: &PhysicalParams,
        b: BoxId,
        detector: &GaussianPacket,
        t: f64,
    ) -> Result<GaussianPacket> {
        let t_split = detector.t_ref - self.leg_length(b.node()) / self.speed;
        if t >= t_split {
            return Ok(evolve_packet(detector, t - detector.t_ref, params));
        }
        let at_splitter =
            evolve_packet(detector, t_split - detector.t_ref, params).redirected(self.incident_direction());
        Ok(evolve_packet(&at_splitter, t - t_split, params))
    }

    /// Places a detector template at box `b`: centered on the box, momentum
    /// matched to the incoming leg, referenced to the arrival time.
    pub fn detector(&self, template: &GaussianPacket, b: BoxId) -> GaussianPacket {
        GaussianPacket {
            center: self.box_position(b),
            t_ref: self.arrival_time(b),
            ..*template
        }
        .redirected(self.leg_direction(b))
    }

    /// Window over the leg BS → `b`, kept `clearance` away from the splitter
    /// and extending `clearance` past the box, with half-width `clearance`.
    pub fn leg_window(&self, b: BoxId, clearance: f64) -> LegWindow {
        let dir = self.leg_direction(b);
        let start = [
            self.splitter[0] + clearance * dir[0],
            self.splitter[1] + clearance * dir[1],
        ];
        LegWindow {
            start,
            direction: dir,
            length: self.leg_length(b.node()),
            half_width: clearance,
        }
    }
}

/// Rectangle aligned with a leg: `start + s·direction + w·normal` for
/// `0 ≤ s ≤ length`, `|w| ≤ half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegWindow {
    pub start: [f64; 2],
    pub direction: [f64; 2],
    pub length: f64,
    pub half_width: f64,
}

impl LegWindow {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let d = sub(p, self.start);
        let along = dot(d, self.direction);
        let across = d[0] * self.direction[1] - d[1] * self.direction[0];
        (0.0..=self.length).contains(&along) && across.abs() <= self.half_width
    }

    /// Σ values·dx·dy over the samples inside the window.
    pub fn integrate(&self, spec: &GridSpec, values: &[f64]) -> f64 {
        let mut sum = 0.0;
        for j in 0..spec.ny {
            let y = spec.y(j);
            for i in 0..spec.nx {
                if self.contains([spec.x(i), y]) {
                    sum += values[spec.index(i, j)];
                }
            }
        }
        sum * spec.cell_area()
    }
}

/// Transmission and reflection amplitudes of a lossless splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterSpec {
    t_amp: Complex64,
    r_amp: Complex64,
}

/// Slack allowed on |t|² + |r|² = 1 for user-supplied amplitudes.
const UNITARITY_TOLERANCE: f64 = 1e-12;

impl SplitterSpec {
    pub fn new(t_amp: Complex64, r_amp: Complex64) -> Result<Self> {
        let total = t_amp.norm_sqr() + r_amp.norm_sqr();
        if !total.is_finite() || (total - 1.0).abs() > UNITARITY_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "splitter",
                reason: format!("|t|^2 + |r|^2 must equal 1, got {total}"),
            });
        }
        Ok(Self { t_amp, r_amp })
    }

    /// t = 1/√2, r = i/√2.
    pub fn balanced() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            t_amp: Complex64::new(a, 0.0),
            r_amp: Complex64::new(0.0, a),
        }
    }

    pub fn t_amp(&self) -> Complex64 {
        self.t_amp
    }

    pub fn r_amp(&self) -> Complex64 {
        self.r_amp
    }

    /// Amplitude picked up on the way to box `b`.
    pub fn amplitude(&self, b: BoxId) -> Complex64 {
        match b {
            BoxId::B1 => self.t_amp,
            BoxId::B2 => self.r_amp,
        }
    }

    pub fn weight(&self, b: BoxId) -> f64 {
        self.amplitude(b).norm_sqr()
    }
}

impl Default for SplitterSpec {
    fn default() -> Self {
        Self::balanced()
    }
}

/// One path through the network with the amplitude it has accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub path: Vec<Node>,
    pub amplitude: Complex64,
    pub packet: GaussianPacket,
}

impl Branch {
    /// Unit-amplitude branch that has reached the splitter.
    pub fn at_splitter(packet: GaussianPacket) -> Self {
        Self {
            path: vec![Node::Source, Node::Splitter],
            amplitude: Complex64::new(1.0, 0.0),
            packet,
        }
    }

    pub fn weight(&self) -> f64 {
        self.amplitude.norm_sqr()
    }

    pub fn final_box(&self) -> Option<BoxId> {
        match self.path.last() {
            Some(Node::Box1) => Some(BoxId::B1),
            Some(Node::Box2) => Some(BoxId::B2),
            _ => None,
        }
    }
}

/// Divides a branch at the splitter into transmitted (toward B1) and
/// reflected (toward B2) parts.
pub fn split_cf(branch: &Branch, spec: &SplitterSpec, network: &PathNetwork) -> Result<(Branch, Branch)> {
    if branch.path.last() != Some(&Node::Splitter) {
        return Err(Error::PathMismatch);
    }
    let part = |b: BoxId| {
        let mut path = branch.path.clone();
        path.push(b.node());
        Branch {
            path,
            amplitude: branch.amplitude * spec.amplitude(b),
            packet: branch.packet.redirected(network.leg_direction(b)),
        }
    };
    Ok((part(BoxId::B1), part(BoxId::B2)))
}

/// The single realized path under a final condition in `final_box`; the
/// other leg carries nothing.
pub fn route_tsf(network: &PathNetwork, params: &PhysicalParams, final_box: BoxId) -> Branch {
    let packet = GaussianPacket::source(params)
        .with_center(network.source)
        .redirected(network.incident_direction());
    Branch {
        path: vec![Node::Source, Node::Splitter, final_box.node()],
        amplitude: Complex64::new(1.0, 0.0),
        packet,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_arrivals() {
        let params = PhysicalParams::default();
        let net = PathNetwork::default_geometry(&params);
        net.validate().unwrap();
        assert_eq!(net.path_length(BoxId::B1), net.path_length(BoxId::B2));
        assert!((net.arrival_time(BoxId::B1) - 4000.0).abs() < 1e-9);
        assert!((net.arrival_time(BoxId::B2) - 4000.0).abs() < 1e-9);

        let fast = PathNetwork::default_geometry(&PhysicalParams { kx: 0.8, ..params });
        assert!((fast.arrival_time(BoxId::B1) - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn unequal_paths_rejected() {
        let err = PathNetwork::new([0.0, 0.0], [800.0, 0.0], [1600.0, 0.0], [800.0, 700.0], 0.4);
        assert!(matches!(err, Err(Error::InvalidGeometry(_))));
        let bent = PathNetwork::new([0.0, 0.0], [800.0, 0.0], [800.0, -800.0], [800.0, 800.0], 0.4);
        assert!(bent.is_err());
    }

    #[test]
    fn balanced_split() {
        let params = PhysicalParams::default();
        let net = PathNetwork::default_geometry(&params);
        let branch = Branch::at_splitter(GaussianPacket::source(&params));
        let (t, r) = split_cf(&branch, &SplitterSpec::balanced(), &net).unwrap();
        assert!((t.amplitude.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((r.amplitude.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((t.weight() - 0.5).abs() < 1e-15 && (r.weight() - 0.5).abs() < 1e-15);
        assert_eq!(t.packet.wavevector, [0.4, 0.0]);
        assert!(r.packet.wavevector[0].abs() < 1e-15 && (r.packet.wavevector[1] - 0.4).abs() < 1e-15);
        assert_eq!(t.final_box(), Some(BoxId::B1));
        assert_eq!(r.final_box(), Some(BoxId::B2));
        assert_eq!(r.packet.center, branch.packet.center);
    }

    #[test]
    fn transparent_splitter() {
        let params = PhysicalParams::default();
        let net = PathNetwork::default_geometry(&params);
        let spec = SplitterSpec::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        let branch = Branch::at_splitter(GaussianPacket::source(&params));
        let (_, r) = split_cf(&branch, &spec, &net).unwrap();
        assert_eq!(r.amplitude, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn split_requires_splitter_endpoint() {
        let params = PhysicalParams::default();
        let net = PathNetwork::default_geometry(&params);
        let branch = route_tsf(&net, &params, BoxId::B1);
        assert!(matches!(
            split_cf(&branch, &SplitterSpec::balanced(), &net),
            Err(Error::PathMismatch)
        ));
    }

    #[test]
    fn non_unitary_splitter_rejected() {
        let a = Complex64::new(0.7, 0.0);
        assert!(SplitterSpec::new(a, a).is_err());
    }

    #[test]
    fn tsf_routes() {
        let params = PhysicalParams::default();
        let net = PathNetwork::default_geometry(&params);
        for b in BoxId::BOTH {
            let branch = route_tsf(&net, &params, b);
            assert_eq!(branch.path, vec![Node::Source, Node::Splitter, b.node()]);
            assert_eq!(branch.amplitude, Complex64::new(1.0, 0.0));
            assert_eq!(branch.weight(), 1.0);
        }
    }

    #[test]
    fn packets_follow_the_path() {
        let params = PhysicalParams::default();
        let net = PathNetwork::default_geometry(&params);
        let src = GaussianPacket::source(&params);
        let at = |b, t| net.retarded_packet(&params, b, &src, t).unwrap().center;
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9;
        assert!(close(at(BoxId::B2, 1000.0), [400.0, 0.0]));
        assert!(close(at(BoxId::B1, 3000.0), [1200.0, 0.0]));
        assert!(close(at(BoxId::B2, 3000.0), [800.0, 400.0]));
        assert!(close(at(BoxId::B2, 4000.0), [800.0, 800.0]));

        let det = net.detector(&src, BoxId::B2);
        assert!(det.wavevector[0].abs() < 1e-15);
        let back = |t| net.advanced_packet(&params, BoxId::B2, &det, t).unwrap();
        assert!(close(back(4000.0).center, [800.0, 800.0]));
        assert!(close(back(3000.0).center, [800.0, 400.0]));
        assert!(close(back(1000.0).center, [400.0, 0.0]));
        assert!((back(0.0).density_std() - 50.0 * 1.64f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn splitter_plane_sides() {
        let net = PathNetwork::default_geometry(&PhysicalParams::default());
        assert!(net.on_transmitted_side([1200.0, 0.0]));
        assert!(!net.on_transmitted_side([800.0, 400.0]));
        assert!(!net.on_transmitted_side([0.0, 0.0]));
    }

    #[test]
    fn leg_window_geometry() {
        let net = PathNetwork::default_geometry(&PhysicalParams::default());
        let w = net.leg_window(BoxId::B2, 450.0);
        assert!(w.contains([800.0, 800.0]));
        assert!(w.contains([1000.0, 1200.0]));
        assert!(!w.contains([800.0, 400.0]));
        assert!(!w.contains([1200.0, 0.0]));
    }

    #[test]
    fn box_id_parsing() {
        assert_eq!("B1".parse::<BoxId>().unwrap(), BoxId::B1);
        assert_eq!("b2".parse::<BoxId>().unwrap(), BoxId::B2);
        assert!("b3".parse::<BoxId>().is_err());
        assert_eq!(BoxId::B1.to_string(), "b1");
    }
}
