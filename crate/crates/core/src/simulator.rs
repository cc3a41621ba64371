//! Multi-machine swing-equation integrator.
//!
//! Fixed-step classical RK4 over
//!
//! ```text
//! dδ_i/dt  = ω0 · Δω_i
//! M_i · dΔω_i/dt = Pm_i − Pe_i(δ) − D_i · ω0 · Δω_i
//! ```
//!
//! with ω0 = 2π·f0 and Δω the 2π-scaled per-unit slip. Topology changes
//! (faults, line removals, generation shedding) are events pinned to the
//! integration grid: every event time must be a multiple of dt within 1e-9,
//! so each RK4 step sees a single admittance matrix. [`Simulation`] supports
//! mid-run event insertion, which is how the closed-loop controller feeds
//! shedding commands back into a live run.

use std::collections::VecDeque;

use crate::error::{Result, SwingError};
use crate::netmodel::{Event, EventKind, Fault, Network, ReducedNetwork, TopologyState, kron_reduce};

/// Column-store record of a run: one row per integration step, one column
/// set per machine. `pm` holds the effective mechanical power, so shedding
/// shows up in the record.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub machine_ids: Vec<String>,
    pub t: Vec<f64>,
    /// `[machine][step]`, rotor angle (rad).
    pub delta: Vec<Vec<f64>>,
    pub domega: Vec<Vec<f64>>,
    pub pm: Vec<Vec<f64>>,
    pub pe: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Largest angular spread max_i δ_i − min_i δ_i over the whole record
    /// (rad); the ground-truth loss-of-synchronism measure.
    pub fn max_angle_spread(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for series in &self.delta {
                lo = lo.min(series[k]);
                hi = hi.max(series[k]);
            }
            worst = worst.max(hi - lo);
        }
        worst
    }
}

#[derive(Debug, Clone)]
enum CompiledEvent {
    ApplyFault(Fault),
    ClearFault(Vec<usize>),
    Shed { machine: usize, fraction: f64 },
}

/// Swing-equation right-hand side. Disconnected machines (shed fraction
/// 1.0) are frozen in place.
#[allow(clippy::too_many_arguments)]
pub fn swing_derivatives(
    reduced: &ReducedNetwork,
    pm: &[f64],
    m: &[f64],
    d: &[f64],
    disconnected: &[bool],
    omega0: f64,
    delta: &[f64],
    domega: &[f64],
    ddelta: &mut [f64],
    ddomega: &mut [f64],
) {
    let pe = reduced.electrical_power(delta);
    for i in 0..delta.len() {
        if disconnected[i] {
            ddelta[i] = 0.0;
            ddomega[i] = 0.0;
        } else {
            ddelta[i] = omega0 * domega[i];
            ddomega[i] = (pm[i] - pe[i] - d[i] * omega0 * domega[i]) / m[i];
        }
    }
}

/// A live integration: owns the evolving state, the pending event queue, and
/// the trajectory recorded so far.
pub struct Simulation {
    network: Network,
    dt: f64,
    omega0: f64,
    step_index: u64,
    delta: Vec<f64>,
    domega: Vec<f64>,
    pm_eff: Vec<f64>,
    m_eff: Vec<f64>,
    d: Vec<f64>,
    disconnected: Vec<bool>,
    topology: TopologyState,
    reduced: ReducedNetwork,
    pending: VecDeque<(u64, CompiledEvent)>,
    trajectory: Trajectory,
    scratch: Scratch,
}

struct Scratch {
    k1d: Vec<f64>,
    k1w: Vec<f64>,
    k2d: Vec<f64>,
    k2w: Vec<f64>,
    k3d: Vec<f64>,
    k3w: Vec<f64>,
    k4d: Vec<f64>,
    k4w: Vec<f64>,
    td: Vec<f64>,
    tw: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Scratch {
            k1d: z(),
            k1w: z(),
            k2d: z(),
            k2w: z(),
            k3d: z(),
            k3w: z(),
            k4d: z(),
            k4w: z(),
            td: z(),
            tw: z(),
        }
    }
}

fn event_step(t: f64, dt: f64) -> Result<u64> {
    if t < 0.0 {
        return Err(SwingError::InvalidEvent(format!(
            "event time {t} is negative"
        )));
    }
    let step = (t / dt).round();
    if (t - step * dt).abs() > 1.0e-9 {
        return Err(SwingError::InvalidEvent(format!(
            "event time {t} s is not a multiple of dt = {dt} s"
        )));
    }
    Ok(step as u64)
}

impl Simulation {
    pub fn new(network: Network, schedule: &[Event], dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SwingError::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        let n = network.machines.len();

        let mut compiled: Vec<(u64, CompiledEvent)> = Vec::with_capacity(schedule.len());
        for ev in schedule {
            compiled.push((event_step(ev.t, dt)?, compile_event(&network, &ev.kind)?));
        }
        compiled.sort_by_key(|(s, _)| *s);

        let delta = initial_angles(&network)?;
        let domega: Vec<f64> = network.machines.iter().map(|m| m.domega0).collect();
        let pm_eff: Vec<f64> = network.machines.iter().map(|m| m.pm).collect();
        let m_eff: Vec<f64> = network.machines.iter().map(|m| m.m).collect();
        let d: Vec<f64> = network.machines.iter().map(|m| m.d).collect();

        let topology = TopologyState::prefault();
        let reduced = kron_reduce(&network, &topology)?;

        let mut sim = Simulation {
            omega0: network.omega0(),
            dt,
            step_index: 0,
            delta,
            domega,
            pm_eff,
            m_eff,
            d,
            disconnected: vec![false; n],
            topology,
            reduced,
            pending: compiled.into(),
            trajectory: Trajectory {
                machine_ids: network.machines.iter().map(|m| m.id.clone()).collect(),
                t: Vec::new(),
                delta: vec![Vec::new(); n],
                domega: vec![Vec::new(); n],
                pm: vec![Vec::new(); n],
                pe: vec![Vec::new(); n],
            },
            network,
            scratch: Scratch::new(n),
        };
        sim.apply_due_events()?;
        sim.record();
        Ok(sim)
    }

    pub fn t(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn effective_m(&self) -> &[f64] {
        &self.m_eff
    }

    pub fn effective_pm(&self) -> &[f64] {
        &self.pm_eff
    }

    pub fn reduced(&self) -> &ReducedNetwork {
        &self.reduced
    }

    pub fn disconnected(&self) -> &[bool] {
        &self.disconnected
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn domega(&self) -> &[f64] {
        &self.domega
    }

    /// Schedule an event on a running simulation. The event must lie in the
    /// future (strictly after the last processed event batch).
    pub fn insert_event(&mut self, event: &Event) -> Result<()> {
        let step = event_step(event.t, self.dt)?;
        if step <= self.step_index && !(step == self.step_index && self.trajectory.is_empty()) {
            return Err(SwingError::InvalidEvent(format!(
                "event at t = {} s is not in the future (current t = {} s)",
                event.t,
                self.t()
            )));
        }
        let compiled = compile_event(&self.network, &event.kind)?;
        let pos = self
            .pending
            .iter()
            .position(|(s, _)| *s > step)
            .unwrap_or(self.pending.len());
        self.pending.insert(pos, (step, compiled));
        Ok(())
    }

    fn apply_due_events(&mut self) -> Result<()> {
        let mut topology_changed = false;
        while let Some((s, _)) = self.pending.front() {
            if *s > self.step_index {
                break;
            }
            let (_, ev) = self.pending.pop_front().unwrap();
            match ev {
                CompiledEvent::ApplyFault(f) => {
                    self.topology.fault = Some(f);
                }
                CompiledEvent::ClearFault(lines) => {
                    self.topology.fault = None;
                    self.topology.removed_lines.extend(lines);
                }
                CompiledEvent::Shed { machine, fraction } => {
                    let keep = 1.0 - fraction;
                    if self.topology.machine_scale.is_empty() {
                        self.topology.machine_scale = vec![1.0; self.network.machines.len()];
                    }
                    self.topology.machine_scale[machine] *= keep;
                    self.pm_eff[machine] *= keep;
                    self.m_eff[machine] *= keep;
                    if keep == 0.0 {
                        self.disconnected[machine] = true;
                    }
                }
            }
            topology_changed = true;
        }
        if topology_changed {
            self.reduced = kron_reduce(&self.network, &self.topology)?;
        }
        Ok(())
    }

    fn record(&mut self) {
        let pe = self.reduced.electrical_power(&self.delta);
        self.trajectory.t.push(self.t());
        for i in 0..self.delta.len() {
            self.trajectory.delta[i].push(self.delta[i]);
            self.trajectory.domega[i].push(self.domega[i]);
            self.trajectory.pm[i].push(self.pm_eff[i]);
            self.trajectory.pe[i].push(pe[i]);
        }
    }

    /// Advance one step: integrate over [t, t+dt] with the current topology,
    /// then apply events due at t+dt and record the new state.
    pub fn step(&mut self) -> Result<()> {
        let n = self.delta.len();
        let h = self.dt;
        let s = &mut self.scratch;

        swing_derivatives(
            &self.reduced,
            &self.pm_eff,
            &self.m_eff,
            &self.d,
            &self.disconnected,
            self.omega0,
            &self.delta,
            &self.domega,
            &mut s.k1d,
            &mut s.k1w,
        );
        for i in 0..n {
            s.td[i] = self.delta[i] + 0.5 * h * s.k1d[i];
            s.tw[i] = self.domega[i] + 0.5 * h * s.k1w[i];
        }
        swing_derivatives(
            &self.reduced,
            &self.pm_eff,
            &self.m_eff,
            &self.d,
            &self.disconnected,
            self.omega0,
            &s.td,
            &s.tw,
            &mut s.k2d,
            &mut s.k2w,
        );
        for i in 0..n {
            s.td[i] = self.delta[i] + 0.5 * h * s.k2d[i];
            s.tw[i] = self.domega[i] + 0.5 * h * s.k2w[i];
        }
        swing_derivatives(
            &self.reduced,
            &self.pm_eff,
            &self.m_eff,
            &self.d,
            &self.disconnected,
            self.omega0,
            &s.td,
            &s.tw,
            &mut s.k3d,
            &mut s.k3w,
        );
        for i in 0..n {
            s.td[i] = self.delta[i] + h * s.k3d[i];
            s.tw[i] = self.domega[i] + h * s.k3w[i];
        }
        swing_derivatives(
            &self.reduced,
            &self.pm_eff,
            &self.m_eff,
            &self.d,
            &self.disconnected,
            self.omega0,
            &s.td,
            &s.tw,
            &mut s.k4d,
            &mut s.k4w,
        );
        for i in 0..n {
            self.delta[i] += h / 6.0 * (s.k1d[i] + 2.0 * s.k2d[i] + 2.0 * s.k3d[i] + s.k4d[i]);
            self.domega[i] += h / 6.0 * (s.k1w[i] + 2.0 * s.k2w[i] + 2.0 * s.k3w[i] + s.k4w[i]);
            if !self.delta[i].is_finite() || !self.domega[i].is_finite() {
                return Err(SwingError::NoConvergence(format!(
                    "state of machine '{}' diverged at t = {:.6} s",
                    self.network.machines[i].id,
                    self.t() + h
                )));
            }
        }
        self.step_index += 1;
        self.apply_due_events()?;
        self.record();
        Ok(())
    }

    /// Run up to `t_end` (a multiple of dt) and return the recorded
    /// trajectory.
    pub fn run(&mut self, t_end: f64) -> Result<&Trajectory> {
        let steps = (t_end / self.dt).round() as u64;
        if ((t_end / self.dt) - steps as f64).abs() > 1.0e-6 {
            return Err(SwingError::InvalidInput(format!(
                "t_end = {t_end} s is not a multiple of dt = {} s",
                self.dt
            )));
        }
        while self.step_index < steps {
            self.step()?;
        }
        Ok(&self.trajectory)
    }
}

fn compile_event(network: &Network, kind: &EventKind) -> Result<CompiledEvent> {
    match kind {
        EventKind::ApplyFault { bus, line } => {
            Ok(CompiledEvent::ApplyFault(network.resolve_fault(bus, line)?))
        }
        EventKind::ClearFault { lines } => {
            let mut idx = Vec::with_capacity(lines.len());
            for l in lines {
                idx.push(network.line_index(l).ok_or_else(|| {
                    SwingError::InvalidEvent(format!("clear_fault: unknown line '{l}'"))
                })?);
            }
            Ok(CompiledEvent::ClearFault(idx))
        }
        EventKind::ShedGeneration { machine, fraction } => {
            let mi = network.machine_index(machine).ok_or_else(|| {
                SwingError::InvalidEvent(format!("shed_generation: unknown machine '{machine}'"))
            })?;
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                return Err(SwingError::InvalidEvent(format!(
                    "shed_generation: fraction {fraction} outside (0, 1]"
                )));
            }
            Ok(CompiledEvent::Shed {
                machine: mi,
                fraction: *fraction,
            })
        }
    }
}

/// Initial rotor angles: taken from the scenario when every machine pins
/// one, otherwise solved as the prefault equilibrium (which needs a fixed
/// bus as angle reference).
fn initial_angles(network: &Network) -> Result<Vec<f64>> {
    if network.machines.iter().all(|m| m.delta0.is_some()) {
        return Ok(network.machines.iter().map(|m| m.delta0.unwrap()).collect());
    }
    solve_equilibrium(network)
}

/// Newton solve of Pm = Pe(δ) on the prefault network. Requires at least
/// one fixed-voltage bus; otherwise the problem is shift-degenerate and the
/// scenario must pin `delta0_deg` for every machine.
pub fn solve_equilibrium(network: &Network) -> Result<Vec<f64>> {
    if !network.buses.iter().any(|b| b.fixed.is_some()) {
        return Err(SwingError::InvalidInput(
            "initial angles required: without an infinite bus the equilibrium is \
             shift-degenerate, so every machine needs delta0_deg"
                .into(),
        ));
    }
    let reduced = kron_reduce(network, &TopologyState::prefault())?;
    let n = network.machines.len();
    let mut delta: Vec<f64> = network
        .machines
        .iter()
        .map(|m| m.delta0.unwrap_or(0.0))
        .collect();
    for _ in 0..100 {
        let pe = reduced.electrical_power(&delta);
        let f: Vec<f64> = (0..n).map(|i| network.machines[i].pm - pe[i]).collect();
        let worst = f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if worst < 1.0e-12 {
            return Ok(delta);
        }
        let jac = reduced.power_jacobian(&delta);
        let rhs = nalgebra::DVector::from_vec(f);
        let lu = jac.lu();
        let step = lu.solve(&rhs).ok_or_else(|| {
            SwingError::NoConvergence("equilibrium Jacobian is singular".into())
        })?;
        for i in 0..n {
            delta[i] += step[i];
        }
    }
    Err(SwingError::NoConvergence(
        "equilibrium Newton iteration did not converge in 100 steps".into(),
    ))
}

/// Convenience wrapper: build, run, return the trajectory.
pub fn integrate(network: Network, schedule: &[Event], t_end: f64, dt: f64) -> Result<Trajectory> {
    let mut sim = Simulation::new(network, schedule, dt)?;
    sim.run(t_end)?;
    Ok(sim.trajectory.clone())
}

/// Total energy of a lossless undamped system: (ω0/2)·Σ M_i Δω_i² plus the
/// potential term −Σ Pm_i δ_i − Σ_{i<j} E_i E_j B_ij cos(δ_i − δ_j) over all
/// retained node pairs. Conserved within each topology segment; errors if
/// the reduced network has conductance.
pub fn lossless_energy(
    reduced: &ReducedNetwork,
    pm: &[f64],
    m: &[f64],
    omega0: f64,
    delta: &[f64],
    domega: &[f64],
) -> Result<f64> {
    let nn = reduced.e.len();
    let mut g_max: f64 = 0.0;
    for v in reduced.y.iter() {
        g_max = g_max.max(v.re.abs());
    }
    if g_max > 1.0e-8 {
        return Err(SwingError::InvalidInput(format!(
            "network is not lossless (max conductance {g_max:.3e})"
        )));
    }
    let angle = |j: usize| {
        if j < reduced.n_machines {
            delta[j]
        } else {
            reduced.fixed_angles[j - reduced.n_machines]
        }
    };
    let mut ke = 0.0;
    let mut pe = 0.0;
    for i in 0..reduced.n_machines {
        ke += 0.5 * omega0 * m[i] * domega[i] * domega[i];
        pe -= pm[i] * delta[i];
    }
    for i in 0..nn {
        for j in (i + 1)..nn {
            pe -= reduced.e[i] * reduced.e[j] * reduced.y[(i, j)].im * (angle(i) - angle(j)).cos();
        }
    }
    Ok(ke + pe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::netmodel::TopologyState;

    #[test]
    fn equilibrium_start_holds_within_nanoradians() {
        let net = cases::wscc9_scenario().build_network().unwrap();
        let delta0: Vec<f64> = net.machines.iter().map(|m| m.delta0.unwrap()).collect();
        let traj = integrate(net, &[], 5.0, 1.0e-3).unwrap();
        for (i, series) in traj.delta.iter().enumerate() {
            let drift = series
                .iter()
                .fold(0.0f64, |a, &d| a.max((d - delta0[i]).abs()));
            assert!(drift < 1.0e-9, "machine {i} drifted {drift} rad");
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let scn = cases::wscc9_scenario();
        let ev = cases::wscc9_fault_events("L57", "bus7", 0.1);
        let a = integrate(scn.build_network().unwrap(), &ev, 2.0, 1.0e-3).unwrap();
        let b = integrate(scn.build_network().unwrap(), &ev, 2.0, 1.0e-3).unwrap();
        assert_eq!(a.delta, b.delta);
        assert_eq!(a.domega, b.domega);
        assert_eq!(a.pe, b.pe);
    }

    #[test]
    fn misaligned_event_time_is_rejected() {
        let scn = cases::wscc9_scenario();
        let mut ev = cases::wscc9_fault_events("L57", "bus7", 0.1);
        ev[1].t = 0.10005;
        let err = match Simulation::new(scn.build_network().unwrap(), &ev, 1.0e-3) {
            Err(e) => e,
            Ok(_) => panic!("misaligned event accepted"),
        };
        assert!(err.to_string().contains("multiple of dt"), "{err}");
    }

    #[test]
    fn event_on_unknown_line_is_rejected() {
        let scn = cases::wscc9_scenario();
        let ev = cases::wscc9_fault_events("L99", "bus7", 0.1);
        assert!(Simulation::new(scn.build_network().unwrap(), &ev, 1.0e-3).is_err());
    }

    #[test]
    fn coi_acceleration_matches_total_imbalance() {
        // Σ M_i dΔω_i/dt = Σ (Pm_i − Pe_i) for undamped machines, by
        // construction of the right-hand side.
        let net = cases::wscc9_scenario().build_network().unwrap();
        let reduced = kron_reduce(&net, &TopologyState::prefault()).unwrap();
        let pm: Vec<f64> = net.machines.iter().map(|m| m.pm).collect();
        let m: Vec<f64> = net.machines.iter().map(|m| m.m).collect();
        let d = vec![0.0; 3];
        let disc = vec![false; 3];
        let delta = [0.3, -0.2, 0.9];
        let domega = [0.001, -0.004, 0.002];
        let mut dd = [0.0; 3];
        let mut dw = [0.0; 3];
        swing_derivatives(
            &reduced,
            &pm,
            &m,
            &d,
            &disc,
            net.omega0(),
            &delta,
            &domega,
            &mut dd,
            &mut dw,
        );
        let lhs: f64 = (0..3).map(|i| m[i] * dw[i]).sum();
        let pe = reduced.electrical_power(&delta);
        let rhs: f64 = (0..3).map(|i| pm[i] - pe[i]).sum();
        assert!((lhs - rhs).abs() < 1.0e-9, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn rk4_shows_fourth_order_convergence() {
        let mut scn = cases::analytic_smib_scenario(0.1).unwrap();
        scn.events.clear();
        scn.machines[0].delta0_deg = Some(scn.machines[0].delta0_deg.unwrap() + 28.6);
        let run = |dt: f64| {
            let net = scn.build_network().unwrap();
            let traj = integrate(net, &[], 0.5, dt).unwrap();
            *traj.delta[0].last().unwrap()
        };
        let d1 = run(2.0e-3);
        let d2 = run(1.0e-3);
        let d3 = run(0.5e-3);
        let order = ((d1 - d2).abs() / (d2 - d3).abs()).log2();
        assert!(order > 3.7, "observed order {order}");
    }

    #[test]
    fn energy_is_conserved_within_each_topology_segment() {
        let scn = cases::analytic_smib_scenario(0.2).unwrap();
        let net = scn.build_network().unwrap();
        let w0 = net.omega0();
        let pm: Vec<f64> = net.machines.iter().map(|m| m.pm).collect();
        let mm: Vec<f64> = net.machines.iter().map(|m| m.m).collect();
        let li = net.line_index("Lb").unwrap();
        let red_fault = kron_reduce(&net, &TopologyState::fault_at(li, 0.0)).unwrap();
        let red_post = kron_reduce(&net, &TopologyState::postfault([li])).unwrap();
        let traj = integrate(net, &scn.events, 2.0, 1.0e-3).unwrap();

        let check = |lo: f64, hi: f64, red: &ReducedNetwork| {
            let mut e_ref = None;
            for k in 0..traj.len() {
                let t = traj.t[k];
                if t < lo || t >= hi {
                    continue;
                }
                let e = lossless_energy(
                    red,
                    &pm,
                    &mm,
                    w0,
                    &[traj.delta[0][k]],
                    &[traj.domega[0][k]],
                )
                .unwrap();
                let e0 = *e_ref.get_or_insert(e);
                assert!(
                    (e - e0).abs() / e0.abs().max(1.0) < 1.0e-6,
                    "energy drift {} at t = {t}",
                    (e - e0).abs() / e0.abs().max(1.0)
                );
            }
        };
        check(0.0, 0.2, &red_fault);
        check(0.2, 2.0, &red_post);
    }

    #[test]
    fn shedding_scales_power_inertia_and_admittance() {
        let scn = cases::wscc9_scenario();
        let net = scn.build_network().unwrap();
        let ev = vec![Event {
            t: 0.5,
            kind: EventKind::ShedGeneration {
                machine: "G2".into(),
                fraction: 0.4,
            },
        }];
        let mut sim = Simulation::new(net, &ev, 1.0e-3).unwrap();
        let m_before = sim.effective_m()[1];
        sim.run(1.0).unwrap();
        assert!((sim.effective_m()[1] - 0.6 * m_before).abs() < 1e-12);
        let traj = sim.trajectory();
        let k_before = (0.499 / 1.0e-3) as usize;
        let k_after = (0.501 / 1.0e-3) as usize;
        assert!((traj.pm[1][k_before] - 1.63).abs() < 1e-12);
        assert!((traj.pm[1][k_after] - 0.6 * 1.63).abs() < 1e-12);
        // Electrical power drops with the scaled internal admittance.
        assert!(traj.pe[1][k_after] < traj.pe[1][k_before]);
    }

    #[test]
    fn full_shedding_freezes_the_machine() {
        let scn = cases::wscc9_scenario();
        let net = scn.build_network().unwrap();
        let ev = vec![Event {
            t: 0.1,
            kind: EventKind::ShedGeneration {
                machine: "G3".into(),
                fraction: 1.0,
            },
        }];
        let traj = integrate(net, &ev, 0.5, 1.0e-3).unwrap();
        let k0 = 100; // t = 0.1
        for k in k0..traj.len() {
            assert_eq!(traj.delta[2][k], traj.delta[2][k0]);
            assert_eq!(traj.pm[2][k], 0.0);
        }
    }

    #[test]
    fn mid_run_insertion_matches_preschedule() {
        let scn = cases::wscc9_scenario();
        let ev = cases::wscc9_fault_events("L57", "bus7", 0.1);
        let pre = integrate(scn.build_network().unwrap(), &ev, 1.0, 1.0e-3).unwrap();

        let mut sim = Simulation::new(scn.build_network().unwrap(), &ev[..1], 1.0e-3).unwrap();
        sim.run(0.05).unwrap();
        sim.insert_event(&ev[1]).unwrap();
        sim.run(1.0).unwrap();
        assert_eq!(pre.delta, sim.trajectory().delta);
    }

    #[test]
    fn past_insertion_is_rejected() {
        let scn = cases::wscc9_scenario();
        let mut sim = Simulation::new(scn.build_network().unwrap(), &[], 1.0e-3).unwrap();
        sim.run(0.5).unwrap();
        let err = sim
            .insert_event(&Event {
                t: 0.2,
                kind: EventKind::ClearFault { lines: vec!["L57".into()] },
            })
            .unwrap_err();
        assert!(err.to_string().contains("not in the future"), "{err}");
    }

    #[test]
    fn non_finite_state_reports_the_time() {
        // A subnormal inertia passes the static m > 0 validation but
        // overflows the acceleration as soon as the fault applies torque;
        // the runtime guard must catch it and carry a time stamp.
        let mut scn = cases::analytic_smib_scenario(0.1).unwrap();
        scn.machines[0].m = 1.0e-320;
        let net = scn.build_network().unwrap();
        let mut sim = Simulation::new(net, &scn.events, 1.0e-3).unwrap();
        let mut failed = None;
        for _ in 0..10 {
            if let Err(e) = sim.step() {
                failed = Some(e);
                break;
            }
        }
        let err = failed.expect("overflowing acceleration must be caught");
        assert!(err.to_string().contains("diverged at t ="), "{err}");
    }

    #[test]
    fn sustained_fault_separates_without_numeric_blowup() {
        // Physical loss of synchronism is polynomial growth, not overflow:
        // a never-cleared fault must separate past 180° and stay finite.
        let mut scn = cases::wscc9_scenario();
        scn.events = vec![Event {
            t: 0.0,
            kind: EventKind::ApplyFault {
                bus: "bus7".into(),
                line: "L57".into(),
            },
        }];
        let traj = integrate(scn.build_network().unwrap(), &scn.events, 3.0, 1.0e-3).unwrap();
        assert!(traj.max_angle_spread() > std::f64::consts::PI);
        for i in 0..traj.machine_ids.len() {
            assert!(traj.delta[i].iter().all(|v| v.is_finite()));
            assert!(traj.domega[i].iter().all(|v| v.is_finite()));
        }
    }
}
