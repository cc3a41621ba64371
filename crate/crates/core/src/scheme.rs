//! Wide-area detection and emergency-control scheme.
//!
//! [`DetectionPipeline`] is the measurement-side half: it consumes angle /
//! slip / accelerating-power frames at the reporting cadence, runs the
//! largest-gap split per area, aggregates each area into one or two
//! centers of inertia, regroups the aggregates globally, folds them into a
//! one-machine equivalent, and feeds the instability detector. It never
//! touches the network model, so the same pipeline runs against live
//! simulation state, recorded streams, or noisy replays.
//!
//! [`run_closed_loop`] is the wall-clock half: it steps a simulation,
//! presents frames to the pipeline at the reporting cadence, and — when the
//! detector fires — schedules the configured generation shedding after the
//! actuation delay, then keeps integrating so the outcome of the control
//! action is observable in the same record.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::detector::{
    decide, DecisionSummary, DetectionSample, Detector, DetectorConfig, EquivalentPowerCurve,
    Verdict,
};
use crate::equivalence::{layer1_equivalence, layer2_equivalence, CoiGenerator, Group, MemberSample, SmibEquivalent};
use crate::error::{Result, SwingError};
use crate::grouping::{coherency_check, lag_identify, AngleSnapshot};
use crate::netmodel::{Event, EventKind, Scenario};
use crate::pmu::{DerivedStream, MAX_CYCLE, MIN_CYCLE};
use crate::simulator::Simulation;
use crate::util::{deg_to_rad, id_fold, rad_to_deg};

/// Static per-machine data the control center holds: identity, inertia
/// constant, and the monitoring area the machine reports through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleetMachine {
    pub id: String,
    pub m: f64,
    pub area: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlAction {
    pub machine: String,
    /// Fraction of the machine's output to shed; 1.0 disconnects it.
    pub fraction: f64,
}

/// Scheme configuration. Angles are in degrees here (operator-facing) and
/// converted at the boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Reporting period of the measurement stream.
    pub cycle_s: f64,
    /// Area coherency band: an area whose initialized angles span less than
    /// this swings as one unit.
    pub delta_set_deg: f64,
    /// Minimum largest-gap width for declaring a split.
    pub min_gap_deg: f64,
    /// Delay between a detection and the shedding taking effect.
    pub control_delay_s: f64,
    /// Run the detector during the fault-on period as well.
    pub include_fault_on: bool,
    /// Moving-average window applied to every input channel before any
    /// processing; 1 disables it.
    pub input_maf_window: usize,
    pub detector: DetectorConfig,
    pub control_actions: Vec<ControlAction>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            cycle_s: 0.02,
            delta_set_deg: 10.0,
            min_gap_deg: 5.0,
            control_delay_s: 0.2,
            include_fault_on: false,
            input_maf_window: 1,
            detector: DetectorConfig::default(),
            control_actions: Vec::new(),
        }
    }
}

impl SchemeConfig {
    pub fn delta_set(&self) -> f64 {
        deg_to_rad(self.delta_set_deg)
    }

    pub fn min_gap(&self) -> f64 {
        deg_to_rad(self.min_gap_deg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.cycle_s >= MIN_CYCLE && self.cycle_s <= MAX_CYCLE) {
            return Err(SwingError::InvalidInput(format!(
                "cycle_s = {} s is outside [{MIN_CYCLE}, {MAX_CYCLE}] s",
                self.cycle_s
            )));
        }
        if self.delta_set_deg <= 0.0 || self.min_gap_deg <= 0.0 {
            return Err(SwingError::InvalidInput(
                "delta_set_deg and min_gap_deg must be positive".into(),
            ));
        }
        if self.control_delay_s < 0.0 {
            return Err(SwingError::InvalidInput(
                "control_delay_s must not be negative".into(),
            ));
        }
        if self.input_maf_window == 0 || self.detector.index_maf_window == 0 {
            return Err(SwingError::InvalidInput(
                "moving-average windows must be at least 1".into(),
            ));
        }
        if self.detector.confirm_samples == 0 {
            return Err(SwingError::InvalidInput(
                "confirm_samples must be at least 1".into(),
            ));
        }
        for a in &self.control_actions {
            if !(a.fraction > 0.0 && a.fraction <= 1.0) {
                return Err(SwingError::InvalidInput(format!(
                    "control fraction for {} must lie in (0, 1]",
                    a.machine
                )));
            }
        }
        Ok(())
    }
}

/// Everything the pipeline produced for one input frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub t: f64,
    /// Machine-level critical set after the global regrouping; empty when
    /// the system is coherent.
    pub assignment_cms: BTreeSet<String>,
    pub coherent: bool,
    pub smib: Option<SmibEquivalent>,
    pub detection: Option<DetectionSample>,
    /// Areas whose local split survived (published two aggregates).
    pub split_areas: usize,
    /// Aggregates whose local group label was overturned by the global
    /// regrouping.
    pub label_overrides: usize,
    pub messages_two_layer: usize,
    pub messages_direct: usize,
    /// (lower UEP, upper UEP) around the post-disturbance equilibrium of the
    /// equivalent, when the model side supplied it for this frame.
    pub stability_interval: Option<(f64, f64)>,
}

struct AreaOut {
    cois: Vec<CoiGenerator>,
    split: bool,
}

/// Measurement-side state: fleet data, the angle reference captured at the
/// first frame, per-channel input filters, and the detector.
pub struct DetectionPipeline {
    fleet: Vec<FleetMachine>,
    area_index: Vec<(String, Vec<usize>)>,
    cfg: SchemeConfig,
    delta0: Option<Vec<f64>>,
    detector: Detector,
    active: Vec<bool>,
    maf: [Vec<VecDeque<f64>>; 3],
}

impl DetectionPipeline {
    pub fn new(fleet: Vec<FleetMachine>, cfg: SchemeConfig, f0: f64) -> Result<Self> {
        cfg.validate()?;
        if fleet.is_empty() {
            return Err(SwingError::InvalidInput("empty fleet".into()));
        }
        let mut seen = BTreeSet::new();
        let mut area_index: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, fm) in fleet.iter().enumerate() {
            if !seen.insert(fm.id.clone()) {
                return Err(SwingError::InvalidInput(format!(
                    "duplicate machine id {}",
                    fm.id
                )));
            }
            if !(fm.m > 0.0 && fm.m.is_finite()) {
                return Err(SwingError::InvalidInput(format!(
                    "machine {} has non-positive inertia",
                    fm.id
                )));
            }
            match area_index.iter_mut().find(|(a, _)| *a == fm.area) {
                Some((_, idx)) => idx.push(i),
                None => area_index.push((fm.area.clone(), vec![i])),
            }
        }
        area_index.sort_by(|a, b| a.0.cmp(&b.0));
        let n = fleet.len();
        let buf = || vec![VecDeque::new(); n];
        Ok(DetectionPipeline {
            detector: Detector::new(cfg.detector.clone(), f0),
            fleet,
            area_index,
            cfg,
            delta0: None,
            active: vec![true; n],
            maf: [buf(), buf(), buf()],
        })
    }

    pub fn fleet(&self) -> &[FleetMachine] {
        &self.fleet
    }

    pub fn area_count(&self) -> usize {
        self.area_index.len()
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn set_delta_sep(&mut self, v: Option<f64>) {
        self.detector.set_delta_sep(v);
    }

    fn machine_pos(&self, id: &str) -> Result<usize> {
        self.fleet
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| SwingError::InvalidInput(format!("unknown machine {id}")))
    }

    /// Mirror a shedding action the control center itself issued: scale the
    /// planning inertia; a zero keep-fraction takes the machine out of the
    /// aggregation entirely.
    pub fn apply_shedding(&mut self, machine_id: &str, keep: f64) -> Result<()> {
        let i = self.machine_pos(machine_id)?;
        if keep <= 0.0 {
            self.active[i] = false;
        } else {
            self.fleet[i].m *= keep;
        }
        Ok(())
    }

    fn filter_inputs(
        &mut self,
        delta: &[f64],
        domega: &[f64],
        dp: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let w = self.cfg.input_maf_window;
        if w <= 1 {
            return (delta.to_vec(), domega.to_vec(), dp.to_vec());
        }
        let mut out = [Vec::new(), Vec::new(), Vec::new()];
        for (c, raw) in [delta, domega, dp].into_iter().enumerate() {
            out[c] = raw
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let buf = &mut self.maf[c][i];
                    buf.push_back(v);
                    while buf.len() > w {
                        buf.pop_front();
                    }
                    buf.iter().sum::<f64>() / buf.len() as f64
                })
                .collect();
        }
        let [d, w_, p] = out;
        (d, w_, p)
    }

    /// Process one frame of per-machine angle (rad), slip, and accelerating
    /// power (pu). `detect` arms the detector; aggregation always runs.
    pub fn process_frame(
        &mut self,
        t: f64,
        delta: &[f64],
        domega: &[f64],
        dp: &[f64],
        detect: bool,
    ) -> Result<FrameOutput> {
        let n = self.fleet.len();
        if delta.len() != n || domega.len() != n || dp.len() != n {
            return Err(SwingError::InvalidInput(format!(
                "frame width disagrees with the fleet size {n}"
            )));
        }
        let (fd, fw, fp) = self.filter_inputs(delta, domega, dp);
        if self.delta0.is_none() {
            self.delta0 = Some(fd.clone());
        }
        let d0 = self.delta0.as_ref().unwrap();

        let delta_set = self.cfg.delta_set();
        let min_gap = self.cfg.min_gap();
        let fleet = &self.fleet;
        let active = &self.active;
        let worker = |entry: &(String, Vec<usize>)| -> Result<AreaOut> {
            let (area, idx) = entry;
            let live: Vec<usize> = idx.iter().copied().filter(|&i| active[i]).collect();
            if live.is_empty() {
                return Ok(AreaOut {
                    cois: Vec::new(),
                    split: false,
                });
            }
            let snapshot = AngleSnapshot {
                t,
                ids: live.iter().map(|&i| fleet[i].id.clone()).collect(),
                delta_t: live.iter().map(|&i| fd[i]).collect(),
                delta_0: live.iter().map(|&i| d0[i]).collect(),
            };
            let cms = if live.len() >= 2 && !coherency_check(&snapshot, delta_set)? {
                lag_identify(&snapshot, min_gap)?.cms
            } else {
                BTreeSet::new()
            };
            let members: Vec<MemberSample> = live
                .iter()
                .map(|&i| MemberSample {
                    id: fleet[i].id.clone(),
                    m: fleet[i].m,
                    delta: fd[i],
                    domega: fw[i],
                    dp: fp[i],
                    delta_init: fd[i] - d0[i],
                })
                .collect();
            Ok(AreaOut {
                split: !cms.is_empty(),
                cois: layer1_equivalence(area, &members, &cms),
            })
        };

        #[cfg(feature = "parallel")]
        let outs: Vec<AreaOut> = self
            .area_index
            .par_iter()
            .map(worker)
            .collect::<Result<_>>()?;
        #[cfg(not(feature = "parallel"))]
        let outs: Vec<AreaOut> = self
            .area_index
            .iter()
            .map(worker)
            .collect::<Result<_>>()?;

        let split_areas = outs.iter().filter(|o| o.split).count();
        let split_flags: Vec<bool> = outs.iter().map(|o| o.split).collect();
        let mut cois: Vec<(usize, CoiGenerator)> = Vec::new();
        for (ai, out) in outs.into_iter().enumerate() {
            for c in out.cois {
                cois.push((ai, c));
            }
        }
        let messages_two_layer = cois.len();
        let messages_direct = self.active.iter().filter(|a| **a).count();
        if cois.is_empty() {
            return Err(SwingError::InvalidInput(
                "no live machines left to aggregate".into(),
            ));
        }

        let mut label_overrides = 0usize;
        let mut assignment_cms: BTreeSet<String> = BTreeSet::new();
        let (smib, coherent) = if messages_direct == 1 {
            // A lone machine against the grid is its own equivalent.
            let i = self.active.iter().position(|a| *a).unwrap();
            let id = self.fleet[i].id.clone();
            let smib = SmibEquivalent {
                t,
                delta: fd[i],
                domega: fw[i],
                m: self.fleet[i].m,
                dp: fp[i],
                mode_id: id_fold(&id),
            };
            assignment_cms.insert(id);
            (Some(smib), false)
        } else if cois.len() < 2 {
            (None, true)
        } else {
            let snap = AngleSnapshot {
                t,
                ids: (0..cois.len()).map(|k| k.to_string()).collect(),
                delta_t: cois.iter().map(|(_, c)| c.delta_init).collect(),
                delta_0: vec![0.0; cois.len()],
            };
            let ga = lag_identify(&snap, min_gap)?;
            if ga.coherent {
                (None, true)
            } else {
                for (k, (ai, coi)) in cois.iter_mut().enumerate() {
                    let global = if ga.cms.contains(&k.to_string()) {
                        Group::C
                    } else {
                        Group::N
                    };
                    if split_flags[*ai] && coi.group != global {
                        label_overrides += 1;
                    }
                    coi.group = global;
                    if global == Group::C {
                        assignment_cms.extend(coi.members.iter().cloned());
                    }
                }
                let plain: Vec<CoiGenerator> = cois.iter().map(|(_, c)| c.clone()).collect();
                (Some(layer2_equivalence(t, &plain)?), false)
            }
        };

        let detection = match (&smib, detect) {
            (Some(s), true) => Some(self.detector.update(s)),
            // Unarmed frames still feed the sample history: partition age and
            // pair consistency are properties of the measurement stream, not
            // of the verdict, and a mode born during the fault should not
            // have to re-earn its tenure after clearing.
            (Some(s), false) => {
                self.detector.observe(s);
                None
            }
            (None, _) => {
                // A coherent stretch breaks the sample history; restart the
                // indexes when a partition reappears.
                self.detector.reset();
                None
            }
        };
        Ok(FrameOutput {
            t,
            assignment_cms,
            coherent,
            smib,
            detection,
            split_areas,
            label_overrides,
            messages_two_layer,
            messages_direct,
            stability_interval: None,
        })
    }
}

/// Open-loop detection over a recorded (possibly noisy) stream.
pub struct DetectionRun {
    pub frames: Vec<FrameOutput>,
    pub summary: DecisionSummary,
}

pub fn run_detection(
    pipeline: &mut DetectionPipeline,
    stream: &DerivedStream,
    detect_from: f64,
) -> Result<DetectionRun> {
    let ids: Vec<&str> = pipeline.fleet.iter().map(|m| m.id.as_str()).collect();
    let sids: Vec<&str> = stream.machine_ids.iter().map(|s| s.as_str()).collect();
    if ids != sids {
        return Err(SwingError::InvalidInput(
            "stream machine order disagrees with the fleet".into(),
        ));
    }
    let n = ids.len();
    let mut frames = Vec::with_capacity(stream.t.len());
    for k in 0..stream.t.len() {
        let col = |rows: &Vec<Vec<f64>>| -> Vec<f64> { (0..n).map(|i| rows[i][k]).collect() };
        let t = stream.t[k];
        let out = pipeline.process_frame(
            t,
            &col(&stream.delta),
            &col(&stream.domega),
            &col(&stream.dp),
            t >= detect_from - 1.0e-9,
        )?;
        frames.push(out);
    }
    let detections: Vec<DetectionSample> =
        frames.iter().filter_map(|f| f.detection.clone()).collect();
    Ok(DetectionRun {
        summary: decide(&detections),
        frames,
    })
}

/// Outcome of one closed- (or open-) loop run against a scenario.
#[derive(Debug)]
pub struct RunReport {
    pub f0: f64,
    pub frames: Vec<FrameOutput>,
    pub detections: Vec<DetectionSample>,
    pub summary: DecisionSummary,
    pub delta_s_deg: Option<f64>,
    /// When the shedding actually took effect (detection + delay, on the
    /// integration grid).
    pub actuation_time: Option<f64>,
    pub cms_at_detection: Vec<String>,
    /// Trailing-window assessment: the equivalent stayed inside its
    /// stability interval over the last quarter of the run.
    pub final_stable: bool,
    /// Whether any pairwise rotor-angle spread exceeded 180° in the record.
    pub ground_truth_unstable: bool,
    /// First time the 180° spread was crossed.
    pub t_180: Option<f64>,
    /// When detection was armed (after the last scheduled fault clearing).
    pub detect_from: f64,
    pub messages_direct: usize,
    pub messages_two_layer: usize,
    pub trajectory: crate::simulator::Trajectory,
    pub controlled: bool,
}

/// Latest fault-clearing time in the schedule: detection is armed from
/// there unless the configuration monitors the fault-on window too.
fn detect_from_time(scenario: &Scenario, cfg: &SchemeConfig) -> f64 {
    if cfg.include_fault_on {
        return 0.0;
    }
    scenario
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::ClearFault { .. }))
        .map(|e| e.t)
        .fold(0.0, f64::max)
}

pub fn run_closed_loop(
    scenario: &Scenario,
    cfg: &SchemeConfig,
    enable_control: bool,
) -> Result<RunReport> {
    cfg.validate()?;
    let network = scenario.build_network()?;
    let f0 = network.f0;
    let dt = scenario.dt_s;
    let stride = (cfg.cycle_s / dt).round();
    if stride < 1.0 || (cfg.cycle_s - stride * dt).abs() > 1.0e-9 {
        return Err(SwingError::InvalidInput(format!(
            "cycle_s = {} s is not a multiple of dt = {dt} s",
            cfg.cycle_s
        )));
    }
    let stride = stride as u64;
    let n_steps = (scenario.t_end_s / dt).round() as u64;
    if (scenario.t_end_s - n_steps as f64 * dt).abs() > 1.0e-9 {
        return Err(SwingError::InvalidInput(format!(
            "t_end_s = {} s is not a multiple of dt = {dt} s",
            scenario.t_end_s
        )));
    }
    let detect_from = detect_from_time(scenario, cfg);

    let fleet: Vec<FleetMachine> = network
        .machines
        .iter()
        .map(|m| FleetMachine {
            id: m.id.clone(),
            m: m.m,
            area: m.area.clone(),
        })
        .collect();
    let mut pipeline = DetectionPipeline::new(fleet, cfg.clone(), f0)?;
    let mut sim = Simulation::new(network, &scenario.events, dt)?;

    let mut frames: Vec<FrameOutput> = Vec::new();
    let mut t_180 = None;
    let mut spread_max = 0.0f64;
    let mut scheduled: Option<f64> = None;
    let mut applied_to_pipeline = false;
    let mut cms_at_detection: Vec<String> = Vec::new();

    let mut step = 0u64;
    loop {
        let t = sim.t();
        // Running 180° spread check on the raw state. Fixed buses count as
        // synchronous references so a lone machine against an infinite bus
        // still registers loss of synchronism.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &d) in sim.delta().iter().enumerate() {
            if !sim.disconnected()[i] {
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        for bus in &sim.network().buses {
            if let Some((_, theta)) = bus.fixed {
                lo = lo.min(theta);
                hi = hi.max(theta);
            }
        }
        spread_max = spread_max.max(hi - lo);
        if t_180.is_none() && spread_max > std::f64::consts::PI {
            t_180 = Some(t);
        }

        if let Some(t_act) = scheduled {
            if !applied_to_pipeline && t >= t_act - 1.0e-9 {
                for a in &cfg.control_actions {
                    pipeline.apply_shedding(&a.machine, 1.0 - a.fraction)?;
                }
                applied_to_pipeline = true;
            }
        }

        if step % stride == 0 {
            let row = sim.trajectory().len() - 1;
            let traj = sim.trajectory();
            let dp: Vec<f64> = (0..traj.machine_ids.len())
                .map(|i| traj.pm[i][row] - traj.pe[i][row])
                .collect();
            let detect = t >= detect_from - 1.0e-9;
            let mut out = pipeline.process_frame(t, sim.delta(), sim.domega(), &dp, detect)?;

            // Model-side equilibrium data for this frame's partition.
            if detect {
                if out.smib.is_some() {
                    let mask: Vec<bool> = sim
                        .network()
                        .machines
                        .iter()
                        .map(|m| out.assignment_cms.contains(&m.id))
                        .collect();
                    if let Ok(curve) = EquivalentPowerCurve::new(
                        sim.reduced(),
                        sim.effective_pm(),
                        sim.effective_m(),
                        sim.delta(),
                        &mask,
                    ) {
                        pipeline.set_delta_sep(curve.delta_sep().ok());
                        out.stability_interval = curve.stability_interval().ok();
                    } else {
                        pipeline.set_delta_sep(None);
                    }
                }
            }

            if enable_control && scheduled.is_none() {
                if let Some(d) = &out.detection {
                    if d.verdict == Verdict::Unstable && !cfg.control_actions.is_empty() {
                        let t_act = ((t + cfg.control_delay_s) / dt).round() * dt;
                        for a in &cfg.control_actions {
                            sim.insert_event(&Event {
                                t: t_act,
                                kind: EventKind::ShedGeneration {
                                    machine: a.machine.clone(),
                                    fraction: a.fraction,
                                },
                            })?;
                        }
                        cms_at_detection = out.assignment_cms.iter().cloned().collect();
                        scheduled = Some(t_act);
                    }
                }
            }
            frames.push(out);
        }

        if step == n_steps {
            break;
        }
        sim.step()?;
        step += 1;
    }

    let detections: Vec<DetectionSample> =
        frames.iter().filter_map(|f| f.detection.clone()).collect();
    let summary = decide(&detections);
    let final_stable = assess_final_stability(&frames);
    let ground_truth_unstable = spread_max > std::f64::consts::PI;

    Ok(RunReport {
        f0,
        delta_s_deg: summary.delta_s.map(rad_to_deg),
        detections,
        actuation_time: scheduled,
        cms_at_detection,
        final_stable,
        ground_truth_unstable,
        t_180,
        detect_from,
        messages_direct: frames.iter().map(|f| f.messages_direct).sum(),
        messages_two_layer: frames.iter().map(|f| f.messages_two_layer).sum(),
        trajectory: sim.trajectory().clone(),
        controlled: scheduled.is_some(),
        summary,
        frames,
    })
}

/// Trailing-window stability assessment: over the last quarter of the
/// frames, the equivalent must stay strictly inside its stability interval.
/// A frame whose equivalent exists but has no interval (no post-disturbance
/// equilibrium, or the curve could not be built) counts as failed; coherent
/// frames pass trivially. No slip-envelope condition is imposed — with zero
/// damping a bounded swing keeps its amplitude forever, and that is still
/// stable in the first-swing sense.
fn assess_final_stability(frames: &[FrameOutput]) -> bool {
    if frames.is_empty() {
        return false;
    }
    let tail = &frames[frames.len() - frames.len() / 4..];
    for f in tail {
        if let Some(s) = &f.smib {
            match f.stability_interval {
                Some((lo, hi)) => {
                    if !(s.delta > lo && s.delta < hi) {
                        return false;
                    }
                }
                None => return false,
            }
        }
    }
    true
}

/// The three escalation instants of a run: detector firing, the equivalent
/// leaving its stability interval, and the raw 180° spread crossing.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdCrossings {
    pub t_proposed: Option<f64>,
    pub t_delta_u: Option<f64>,
    pub t_180: Option<f64>,
    /// The unstable-equilibrium angle the δ_u criterion used (rad), frozen
    /// from the post-fault equivalent model.
    pub delta_u: Option<f64>,
}

/// Conventional angle criteria, both evaluated on the equivalent stream.
/// δ_u is frozen from the post-fault equivalent model: the first armed frame
/// whose power curve has equilibria supplies the unstable equilibrium in the
/// direction the equivalent is moving. The 180° criterion is the fixed
/// threshold on the equivalent angle.
pub fn threshold_crossings(report: &RunReport) -> ThresholdCrossings {
    let armed = report
        .frames
        .iter()
        .filter(|f| f.t >= report.detect_from - 1.0e-9);
    let mut delta_u = None;
    let mut t_delta_u = None;
    for f in armed {
        let s = match &f.smib {
            Some(s) => s,
            None => continue,
        };
        let du = match (delta_u, f.stability_interval) {
            (Some(du), _) => du,
            (None, Some((lo, hi))) => {
                let du = if s.domega >= 0.0 { hi } else { lo };
                delta_u = Some(du);
                du
            }
            (None, None) => continue,
        };
        let beyond = if du >= 0.0 { s.delta >= du } else { s.delta <= du };
        if beyond {
            t_delta_u = Some(f.t);
            break;
        }
    }
    let t_180 = report
        .frames
        .iter()
        .find(|f| matches!(&f.smib, Some(s) if s.delta.abs() >= std::f64::consts::PI))
        .map(|f| f.t);
    ThresholdCrossings {
        t_proposed: report.summary.t_s,
        t_delta_u,
        t_180,
        delta_u,
    }
}
