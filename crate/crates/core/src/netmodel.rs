//! Static power-system description and reduction to the machine-internal-node
//! admittance form consumed by the simulator.
//!
//! The model is deliberately small: classical machines (constant EMF behind
//! transient reactance), constant-impedance loads, series R-X lines with
//! total charging susceptance B, and optional fixed-voltage (infinite) buses.
//! A [`TopologyState`] selects prefault / faulted / post-fault wiring plus
//! per-machine admittance scaling from generation shedding, and
//! [`kron_reduce`] eliminates every non-fixed bus, leaving a dense complex
//! admittance matrix over machine internal nodes (and fixed buses, which keep
//! constant angle).
//!
//! Angles are radians internally; the scenario file format uses degrees.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwingError};
use crate::util::deg_to_rad;

/// Fault shunt admittance: a bolted three-phase fault is approximated by a
/// pure susceptance of magnitude 1e6 per-unit at the fault point. A pure
/// susceptance keeps lossless networks lossless during the fault interval.
pub const FAULT_SHUNT: Complex<f64> = Complex::new(0.0, -1.0e6);

type C64 = Complex<f64>;

/// One synchronous machine in the classical model.
#[derive(Debug, Clone)]
pub struct Machine {
    pub id: String,
    /// Index into `Network::buses` of the terminal bus.
    pub bus: usize,
    /// Inertia constant M (s·s on the system base); the swing equation uses
    /// M directly: M·dΔω/dt = Pm − Pe − D·ω0·Δω.
    pub m: f64,
    /// Damping factor D (per-unit torque per per-unit speed).
    pub d: f64,
    /// Internal EMF magnitude (per-unit), constant during transients.
    pub e: f64,
    /// Transient reactance Xd' (per-unit).
    pub xd: f64,
    /// Mechanical power (per-unit), constant unless shed.
    pub pm: f64,
    pub area: String,
    /// Initial rotor angle (rad), if the scenario pinned one.
    pub delta0: Option<f64>,
    /// Initial speed deviation (per-unit, 2π-scaled slip convention).
    pub domega0: f64,
}

/// A network bus. `fixed` marks an infinite bus: voltage magnitude and angle
/// held constant; such buses are retained through the Kron reduction.
#[derive(Debug, Clone)]
pub struct Bus {
    pub id: String,
    /// Constant shunt load admittance g + jb (per-unit).
    pub load: C64,
    /// Fixed-voltage (infinite) bus: (V magnitude, angle rad).
    pub fixed: Option<(f64, f64)>,
}

/// A branch: series impedance r + jx with total charging susceptance b
/// (half stamped at each end). Transformers are folded in as lines.
#[derive(Debug, Clone)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b: f64,
}

impl Line {
    fn y_series(&self) -> C64 {
        C64::new(1.0, 0.0) / C64::new(self.r, self.x)
    }
}

/// Static system description: buses, lines, machines, and the area map
/// derived from each machine's `area` field.
#[derive(Debug, Clone)]
pub struct Network {
    pub f0: f64,
    pub machines: Vec<Machine>,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    /// Area id → indices into `machines`, sorted by area id.
    pub areas: BTreeMap<String, Vec<usize>>,
}

/// A fault applied on a line at a relative location along its length:
/// 0.0 is the `from` end, 1.0 the `to` end; interior values split the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fault {
    pub line: usize,
    pub location: f64,
}

/// Wiring state handed to [`kron_reduce`]: optional active fault, the set of
/// removed lines, and per-machine admittance scale factors left behind by
/// generation shedding (empty vector ⇒ all 1.0).
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyState {
    pub fault: Option<Fault>,
    pub removed_lines: BTreeSet<usize>,
    pub machine_scale: Vec<f64>,
}

impl TopologyState {
    pub fn prefault() -> Self {
        TopologyState {
            fault: None,
            removed_lines: BTreeSet::new(),
            machine_scale: Vec::new(),
        }
    }

    pub fn fault_at(line: usize, location: f64) -> Self {
        TopologyState {
            fault: Some(Fault { line, location }),
            ..Self::prefault()
        }
    }

    pub fn postfault(removed: impl IntoIterator<Item = usize>) -> Self {
        TopologyState {
            fault: None,
            removed_lines: removed.into_iter().collect(),
            machine_scale: Vec::new(),
        }
    }

    pub fn scale_of(&self, machine: usize) -> f64 {
        self.machine_scale.get(machine).copied().unwrap_or(1.0)
    }
}

/// Dense admittance matrix over retained nodes after Kron reduction.
///
/// Node order: machine internal nodes first (one per machine, same order as
/// `Network::machines`), then fixed buses. `e` holds the EMF magnitude per
/// retained node (machine EMF, or fixed-bus voltage); `fixed_angles` the
/// constant angles of the fixed nodes.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    pub y: DMatrix<C64>,
    pub e: Vec<f64>,
    pub fixed_angles: Vec<f64>,
    pub n_machines: usize,
}

impl ReducedNetwork {
    /// Electrical power injected by each machine at rotor angles `delta`:
    /// Pe_i = E_i²·G_ii + Σ_{j≠i} E_i·E_j·(G_ij·cos δ_ij + B_ij·sin δ_ij).
    pub fn electrical_power(&self, delta: &[f64]) -> Vec<f64> {
        assert_eq!(delta.len(), self.n_machines, "one angle per machine");
        let n = self.e.len();
        let angle = |j: usize| {
            if j < self.n_machines {
                delta[j]
            } else {
                self.fixed_angles[j - self.n_machines]
            }
        };
        (0..self.n_machines)
            .map(|i| {
                let mut p = self.e[i] * self.e[i] * self.y[(i, i)].re;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let dij = angle(i) - angle(j);
                    let y = self.y[(i, j)];
                    p += self.e[i] * self.e[j] * (y.re * dij.cos() + y.im * dij.sin());
                }
                p
            })
            .collect()
    }

    /// ∂Pe/∂δ over machine nodes (used by the equilibrium Newton solve).
    pub fn power_jacobian(&self, delta: &[f64]) -> DMatrix<f64> {
        let nm = self.n_machines;
        let n = self.e.len();
        let angle = |j: usize| {
            if j < nm {
                delta[j]
            } else {
                self.fixed_angles[j - nm]
            }
        };
        let mut jac = DMatrix::zeros(nm, nm);
        for i in 0..nm {
            let mut diag = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dij = angle(i) - angle(j);
                let y = self.y[(i, j)];
                let t = self.e[i] * self.e[j] * (-y.re * dij.sin() + y.im * dij.cos());
                diag += t;
                if j < nm {
                    jac[(i, j)] = -t;
                }
            }
            jac[(i, i)] = diag;
        }
        jac
    }

    /// Largest relative asymmetry |Y_ij − Y_ji| / max|Y|; reciprocal line
    /// data keeps this at rounding level.
    pub fn asymmetry(&self) -> f64 {
        let n = self.y.nrows();
        let mut scale: f64 = 0.0;
        for v in self.y.iter() {
            scale = scale.max(v.norm());
        }
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.y[(i, j)] - self.y[(j, i)]).norm() / scale);
            }
        }
        worst
    }
}

/// Reduce the network for a given topology to machine internal nodes plus
/// fixed buses, eliminating every other bus.
pub fn kron_reduce(network: &Network, topology: &TopologyState) -> Result<ReducedNetwork> {
    let nm = network.machines.len();
    if let Some(f) = &topology.fault {
        if f.line >= network.lines.len() {
            return Err(SwingError::InvalidInput(format!(
                "fault on unknown line index {}",
                f.line
            )));
        }
        if !(0.0..=1.0).contains(&f.location) {
            return Err(SwingError::InvalidInput(format!(
                "fault location {} outside [0, 1]",
                f.location
            )));
        }
        if topology.removed_lines.contains(&f.line) {
            return Err(SwingError::InvalidInput(
                "fault placed on a removed line".into(),
            ));
        }
    }

    // Retained nodes: machine internal nodes, then fixed buses. Eliminated
    // nodes: all remaining buses, plus one junction node for an interior
    // fault location.
    let fixed_buses: Vec<usize> = (0..network.buses.len())
        .filter(|&b| network.buses[b].fixed.is_some())
        .collect();
    let nf = fixed_buses.len();
    let nr = nm + nf;

    let mut node_of_bus = vec![usize::MAX; network.buses.len()];
    for (k, &b) in fixed_buses.iter().enumerate() {
        node_of_bus[b] = nm + k;
    }
    let mut next = nr;
    for b in 0..network.buses.len() {
        if node_of_bus[b] == usize::MAX {
            node_of_bus[b] = next;
            next += 1;
        }
    }
    let interior_fault = topology
        .fault
        .filter(|f| f.location > 0.0 && f.location < 1.0);
    let junction = interior_fault.map(|_| {
        let j = next;
        next += 1;
        j
    });
    let n_total = next;
    let ne = n_total - nr;

    let mut y = DMatrix::<C64>::zeros(n_total, n_total);
    let mut stamp_branch = |a: usize, b: usize, ys: C64, bsh: f64| {
        let half = C64::new(0.0, bsh / 2.0);
        y[(a, a)] += ys + half;
        y[(b, b)] += ys + half;
        y[(a, b)] -= ys;
        y[(b, a)] -= ys;
    };

    for (li, line) in network.lines.iter().enumerate() {
        if topology.removed_lines.contains(&li) {
            continue;
        }
        let a = node_of_bus[line.from];
        let b = node_of_bus[line.to];
        match interior_fault {
            Some(f) if f.line == li => {
                // Split the line at the fault point; charging splits in
                // proportion to segment length.
                let j = junction.unwrap();
                let z = C64::new(line.r, line.x);
                let y1 = C64::new(1.0, 0.0) / (z * f.location);
                let y2 = C64::new(1.0, 0.0) / (z * (1.0 - f.location));
                stamp_branch(a, j, y1, line.b * f.location);
                stamp_branch(j, b, y2, line.b * (1.0 - f.location));
            }
            _ => stamp_branch(a, b, line.y_series(), line.b),
        }
    }

    for (bi, bus) in network.buses.iter().enumerate() {
        let node = node_of_bus[bi];
        y[(node, node)] += bus.load;
    }

    for (mi, mach) in network.machines.iter().enumerate() {
        let link = topology.scale_of(mi) * C64::new(0.0, -1.0 / mach.xd);
        let bnode = node_of_bus[mach.bus];
        y[(mi, mi)] += link;
        y[(bnode, bnode)] += link;
        y[(mi, bnode)] -= link;
        y[(bnode, mi)] -= link;
    }

    if let Some(f) = topology.fault {
        let node = if f.location <= 0.0 {
            node_of_bus[network.lines[f.line].from]
        } else if f.location >= 1.0 {
            node_of_bus[network.lines[f.line].to]
        } else {
            junction.unwrap()
        };
        y[(node, node)] += FAULT_SHUNT;
    }

    // Y_red = Y_rr − Y_re · Y_ee⁻¹ · Y_er
    let y_red = if ne == 0 {
        y.view((0, 0), (nr, nr)).into_owned()
    } else {
        let y_rr = y.view((0, 0), (nr, nr)).into_owned();
        let y_re = y.view((0, nr), (nr, ne)).into_owned();
        let y_er = y.view((nr, 0), (ne, nr)).into_owned();
        let y_ee = y.view((nr, nr), (ne, ne)).into_owned();
        let lu = y_ee.lu();
        let solved = lu.solve(&y_er).ok_or_else(|| {
            SwingError::SingularNetwork(
                "bus block is not factorizable; check connectivity and load data".into(),
            )
        })?;
        y_rr - y_re * solved
    };

    let mut e: Vec<f64> = network.machines.iter().map(|m| m.e).collect();
    let mut fixed_angles = Vec::with_capacity(nf);
    for &b in &fixed_buses {
        let (v, th) = network.buses[b].fixed.unwrap();
        e.push(v);
        fixed_angles.push(th);
    }

    Ok(ReducedNetwork {
        y: y_red,
        e,
        fixed_angles,
        n_machines: nm,
    })
}

// ---------------------------------------------------------------------------
// Scenario file format (JSON). Angles in degrees, powers and impedances in
// per-unit on the system base.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub id: String,
    pub bus: String,
    pub m: f64,
    #[serde(default)]
    pub d: f64,
    pub e: f64,
    pub xd: f64,
    pub pm: f64,
    pub area: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0_deg: Option<f64>,
    #[serde(default)]
    pub domega0: f64,
}

/// Load given either directly as a shunt admittance or as constant P/Q at a
/// stated voltage magnitude (converted to the equivalent admittance).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum LoadSpec {
    Admittance { g: f64, b: f64 },
    PowerVoltage { p: f64, q: f64, v: f64 },
}

impl LoadSpec {
    pub fn admittance(&self) -> Result<C64> {
        match *self {
            LoadSpec::Admittance { g, b } => Ok(C64::new(g, b)),
            LoadSpec::PowerVoltage { p, q, v } => {
                if v <= 0.0 {
                    return Err(SwingError::InvalidInput(
                        "load voltage `v` must be positive".into(),
                    ));
                }
                Ok(C64::new(p / (v * v), -q / (v * v)))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfiniteSpec {
    pub v: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infinite: Option<InfiniteSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
}

/// A scheduled disturbance or control action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    /// Bolted fault at `bus`, located at that end of `line`.
    ApplyFault { bus: String, line: String },
    /// Remove the named lines and drop any active fault.
    ClearFault { lines: Vec<String> },
    /// Shed `fraction` of a machine: Pm, M, and the internal admittance
    /// contribution all scale by (1 − fraction).
    ShedGeneration { machine: String, fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

fn default_f0() -> f64 {
    50.0
}
fn default_t_end() -> f64 {
    5.0
}
fn default_dt() -> f64 {
    1.0e-3
}

/// On-disk scenario: the full static description plus an optional embedded
/// event schedule and integration defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_f0")]
    pub f0_hz: f64,
    pub machines: Vec<MachineSpec>,
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default = "default_t_end")]
    pub t_end_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Validate and resolve identifiers into an internal [`Network`].
    pub fn build_network(&self) -> Result<Network> {
        if self.machines.is_empty() {
            return Err(SwingError::InvalidInput("no machines defined".into()));
        }
        if !(self.f0_hz == 50.0 || self.f0_hz == 60.0) {
            return Err(SwingError::InvalidInput(format!(
                "f0_hz must be 50 or 60, got {}",
                self.f0_hz
            )));
        }
        let mut bus_index = BTreeMap::new();
        let mut buses = Vec::with_capacity(self.buses.len());
        for b in &self.buses {
            if bus_index.insert(b.id.clone(), buses.len()).is_some() {
                return Err(SwingError::InvalidInput(format!(
                    "duplicate bus id '{}'",
                    b.id
                )));
            }
            let load = match &b.load {
                Some(l) => l
                    .admittance()
                    .map_err(|e| SwingError::InvalidInput(format!("bus '{}': {e}", b.id)))?,
                None => C64::new(0.0, 0.0),
            };
            buses.push(Bus {
                id: b.id.clone(),
                load,
                fixed: b
                    .infinite
                    .as_ref()
                    .map(|i| (i.v, deg_to_rad(i.theta_deg))),
            });
        }

        let mut lines = Vec::with_capacity(self.lines.len());
        let mut line_ids = BTreeSet::new();
        for l in &self.lines {
            if !line_ids.insert(l.id.clone()) {
                return Err(SwingError::InvalidInput(format!(
                    "duplicate line id '{}'",
                    l.id
                )));
            }
            let from = *bus_index.get(&l.from).ok_or_else(|| {
                SwingError::InvalidInput(format!("line '{}': unknown bus '{}'", l.id, l.from))
            })?;
            let to = *bus_index.get(&l.to).ok_or_else(|| {
                SwingError::InvalidInput(format!("line '{}': unknown bus '{}'", l.id, l.to))
            })?;
            if l.x == 0.0 && l.r == 0.0 {
                return Err(SwingError::InvalidInput(format!(
                    "line '{}': zero series impedance",
                    l.id
                )));
            }
            lines.push(Line {
                id: l.id.clone(),
                from,
                to,
                r: l.r,
                x: l.x,
                b: l.b,
            });
        }

        let mut machines = Vec::with_capacity(self.machines.len());
        let mut areas: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut mach_ids = BTreeSet::new();
        for m in &self.machines {
            if !mach_ids.insert(m.id.clone()) {
                return Err(SwingError::InvalidInput(format!(
                    "duplicate machine id '{}'",
                    m.id
                )));
            }
            let bus = *bus_index.get(&m.bus).ok_or_else(|| {
                SwingError::InvalidInput(format!("machine '{}': unknown bus '{}'", m.id, m.bus))
            })?;
            if m.m <= 0.0 {
                return Err(SwingError::InvalidInput(format!(
                    "machine '{}': inertia m must be > 0",
                    m.id
                )));
            }
            if m.e <= 0.0 || m.xd <= 0.0 {
                return Err(SwingError::InvalidInput(format!(
                    "machine '{}': e and xd must be > 0",
                    m.id
                )));
            }
            if m.d < 0.0 {
                return Err(SwingError::InvalidInput(format!(
                    "machine '{}': damping d must be >= 0",
                    m.id
                )));
            }
            areas.entry(m.area.clone()).or_default().push(machines.len());
            machines.push(Machine {
                id: m.id.clone(),
                bus,
                m: m.m,
                d: m.d,
                e: m.e,
                xd: m.xd,
                pm: m.pm,
                area: m.area.clone(),
                delta0: m.delta0_deg.map(deg_to_rad),
                domega0: m.domega0,
            });
        }

        let network = Network {
            f0: self.f0_hz,
            machines,
            buses,
            lines,
            areas,
        };
        network.check_connected()?;
        Ok(network)
    }
}

impl Network {
    /// Every bus must be reachable from every other over prefault lines.
    fn check_connected(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(SwingError::InvalidInput("no buses defined".into()));
        }
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            adj[l.from].push(l.to);
            adj[l.to].push(l.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(b) = stack.pop() {
            for &nb in &adj[b] {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(SwingError::InvalidInput(format!(
                "prefault network is disconnected: bus '{}' is unreachable",
                self.buses[orphan].id
            )));
        }
        Ok(())
    }

    pub fn machine_index(&self, id: &str) -> Option<usize> {
        self.machines.iter().position(|m| m.id == id)
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f0
    }

    /// Resolve an [`EventKind`] against this network, returning the fault
    /// location convention used by [`TopologyState`].
    pub fn resolve_fault(&self, bus: &str, line: &str) -> Result<Fault> {
        let li = self
            .line_index(line)
            .ok_or_else(|| SwingError::InvalidEvent(format!("unknown line '{line}'")))?;
        let bi = self
            .bus_index(bus)
            .ok_or_else(|| SwingError::InvalidEvent(format!("unknown bus '{bus}'")))?;
        let l = &self.lines[li];
        let location = if l.from == bi {
            0.0
        } else if l.to == bi {
            1.0
        } else {
            return Err(SwingError::InvalidEvent(format!(
                "bus '{bus}' is not an endpoint of line '{line}'"
            )));
        };
        Ok(Fault { line: li, location })
    }
}
