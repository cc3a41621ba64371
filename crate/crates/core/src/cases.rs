//! Bundled study cases and fleet generators.
//!
//! The nine-bus system is the classic three-machine test network (100 MVA
//! base, 50 Hz here). Its dispatch, internal EMFs, and initial rotor angles
//! were frozen from an independent Newton power-flow solution so the bundled
//! scenario starts exactly at equilibrium; loads are folded into constant
//! admittances at the solved voltages. The analytic single-machine case is
//! constructed so the network reduction reproduces exact sinusoidal power
//! curves (Pmax 2.0 prefault, 0 during the bolted terminal fault, 1.5 after
//! clearing one of the parallel lines).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeSet;

use crate::equivalence::MemberSample;
use crate::error::{Result, SwingError};
use crate::netmodel::{
    BusSpec, Event, EventKind, InfiniteSpec, LineSpec, LoadSpec, MachineSpec, Scenario,
};
use crate::scheme::FleetMachine;
use crate::smib::AnalyticSmib;
use crate::util::deg_to_rad;

/// Reference single-machine case: Pm 0.8, prefault limit 2.0, bolted fault
/// (zero transfer), post-fault limit 1.5, M 10 s, undamped, 50 Hz.
pub fn analytic_smib() -> AnalyticSmib {
    AnalyticSmib {
        pm: 0.8,
        pmax_pre: 2.0,
        pmax_fault: 0.0,
        pmax_post: 1.5,
        m: 10.0,
        d: 0.0,
        f0: 50.0,
    }
}

/// Network realization of [`analytic_smib`]: machine (Xd' 0.2) behind two
/// parallel lines (7/15 and 21/25 pu) to an infinite bus. The parallel
/// combination is exactly 0.3, so the prefault series reactance is 0.5
/// (Pmax 2.0); removing line `Lb` leaves 2/3 (Pmax 1.5). The fault is a
/// bolted shunt at the machine terminal, applied at t = 0 and cleared by
/// removing `Lb` after `fault_duration` seconds.
pub fn analytic_smib_scenario(fault_duration: f64) -> Result<Scenario> {
    if fault_duration < 0.0 {
        return Err(SwingError::InvalidInput(
            "fault duration must be non-negative".into(),
        ));
    }
    let delta0_deg = (0.4f64).asin().to_degrees();
    let events = if fault_duration == 0.0 {
        vec![]
    } else {
        vec![
            Event {
                t: 0.0,
                kind: EventKind::ApplyFault {
                    bus: "gb".into(),
                    line: "Lb".into(),
                },
            },
            Event {
                t: fault_duration,
                kind: EventKind::ClearFault {
                    lines: vec!["Lb".into()],
                },
            },
        ]
    };
    Ok(Scenario {
        f0_hz: 50.0,
        machines: vec![MachineSpec {
            id: "G1".into(),
            bus: "gb".into(),
            m: 10.0,
            d: 0.0,
            e: 1.0,
            xd: 0.2,
            pm: 0.8,
            area: "A1".into(),
            delta0_deg: Some(delta0_deg),
            domega0: 0.0,
        }],
        buses: vec![
            BusSpec {
                id: "gb".into(),
                load: None,
                infinite: None,
            },
            BusSpec {
                id: "inf".into(),
                load: None,
                infinite: Some(InfiniteSpec {
                    v: 1.0,
                    theta_deg: 0.0,
                }),
            },
        ],
        lines: vec![
            LineSpec {
                id: "La".into(),
                from: "gb".into(),
                to: "inf".into(),
                r: 0.0,
                x: 7.0 / 15.0,
                b: 0.0,
            },
            LineSpec {
                id: "Lb".into(),
                from: "gb".into(),
                to: "inf".into(),
                r: 0.0,
                x: 21.0 / 25.0,
                b: 0.0,
            },
        ],
        events,
        t_end_s: 5.0,
        dt_s: 1.0e-3,
    })
}

// Frozen power-flow solution for the nine-bus system: dispatch after
// folding network losses into G1, internal EMFs E∠δ0 behind Xd', and load
// admittances at the solved bus voltages.
const G1_PM: f64 = 0.716410214745;
const G1_E: f64 = 1.056641843028;
const G1_DELTA0_DEG: f64 = 2.271645840429;
const G2_PM: f64 = 1.63;
const G2_E: f64 = 1.050201014784;
const G2_DELTA0_DEG: f64 = 19.731585769306;
const G3_PM: f64 = 0.85;
const G3_E: f64 = 1.016966411208;
const G3_DELTA0_DEG: f64 = 13.166411034623;

/// The three-machine nine-bus system with machine G1 in area A1 and
/// machines G2, G3 in area A2. Undamped, no embedded events.
pub fn wscc9_scenario() -> Scenario {
    let mach = |id: &str, bus: &str, m: f64, xd: f64, e: f64, pm: f64, d0: f64, area: &str| {
        MachineSpec {
            id: id.into(),
            bus: bus.into(),
            m,
            d: 0.0,
            e,
            xd,
            pm,
            area: area.into(),
            delta0_deg: Some(d0),
            domega0: 0.0,
        }
    };
    let bus = |id: &str| BusSpec {
        id: id.into(),
        load: None,
        infinite: None,
    };
    let loaded = |id: &str, g: f64, b: f64| BusSpec {
        id: id.into(),
        load: Some(LoadSpec::Admittance { g, b }),
        infinite: None,
    };
    let line = |id: &str, from: &str, to: &str, r: f64, x: f64, b: f64| LineSpec {
        id: id.into(),
        from: from.into(),
        to: to.into(),
        r,
        x,
        b,
    };
    Scenario {
        f0_hz: 50.0,
        machines: vec![
            mach("G1", "bus1", 47.28, 0.0608, G1_E, G1_PM, G1_DELTA0_DEG, "A1"),
            mach("G2", "bus2", 12.80, 0.1198, G2_E, G2_PM, G2_DELTA0_DEG, "A2"),
            mach("G3", "bus3", 6.02, 0.1813, G3_E, G3_PM, G3_DELTA0_DEG, "A2"),
        ],
        buses: vec![
            bus("bus1"),
            bus("bus2"),
            bus("bus3"),
            bus("bus4"),
            loaded("bus5", 1.260994859446, -0.504397943778),
            loaded("bus6", 0.877647391705, -0.292549130568),
            bus("bus7"),
            loaded("bus8", 0.968975888409, -0.339141560943),
            bus("bus9"),
        ],
        lines: vec![
            line("L14", "bus1", "bus4", 0.0, 0.0576, 0.0),
            line("L27", "bus2", "bus7", 0.0, 0.0625, 0.0),
            line("L39", "bus3", "bus9", 0.0, 0.0586, 0.0),
            line("L45", "bus4", "bus5", 0.010, 0.085, 0.176),
            line("L46", "bus4", "bus6", 0.017, 0.092, 0.158),
            line("L57", "bus5", "bus7", 0.032, 0.161, 0.306),
            line("L69", "bus6", "bus9", 0.039, 0.170, 0.358),
            line("L78", "bus7", "bus8", 0.0085, 0.072, 0.149),
            line("L89", "bus8", "bus9", 0.0119, 0.1008, 0.209),
        ],
        events: vec![],
        t_end_s: 5.0,
        dt_s: 1.0e-3,
    }
}

/// Nine-bus variant with light uniform damping (D_i = 0.002·M_i), used by
/// the closed-loop studies where post-control oscillations should visibly
/// decay inside the run horizon.
pub fn wscc9_damped_scenario() -> Scenario {
    let mut scn = wscc9_scenario();
    for m in &mut scn.machines {
        m.d = 0.002 * m.m;
    }
    scn
}

/// Fault at one end of a line, cleared after `clear_time` by removing that
/// line.
pub fn wscc9_fault_events(line: &str, bus: &str, clear_time: f64) -> Vec<Event> {
    vec![
        Event {
            t: 0.0,
            kind: EventKind::ApplyFault {
                bus: bus.into(),
                line: line.into(),
            },
        },
        Event {
            t: clear_time,
            kind: EventKind::ClearFault {
                lines: vec![line.into()],
            },
        },
    ]
}

/// Fault catalog for sweep studies: every (line, end-bus) pair whose removal
/// keeps the nine-bus ring connected (the three radial step-up branches are
/// excluded).
pub fn wscc9_fault_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("L45", "bus4"),
        ("L45", "bus5"),
        ("L46", "bus4"),
        ("L46", "bus6"),
        ("L57", "bus5"),
        ("L57", "bus7"),
        ("L69", "bus6"),
        ("L69", "bus9"),
        ("L78", "bus7"),
        ("L78", "bus8"),
        ("L89", "bus8"),
        ("L89", "bus9"),
    ]
}

/// Stable noise-study fixture: short fault well below the critical clearing
/// time.
pub fn wscc9_stable_scenario() -> Scenario {
    let mut scn = wscc9_scenario();
    scn.events = wscc9_fault_events("L57", "bus7", 0.08);
    scn
}

/// Unstable closed-loop fixture: the same fault held past the critical
/// clearing time, on the damped system.
pub fn wscc9_unstable_scenario() -> Scenario {
    let mut scn = wscc9_damped_scenario();
    scn.events = wscc9_fault_events("L57", "bus7", 0.3);
    scn.t_end_s = 10.0;
    scn
}

/// Resolve a CLI builtin scenario name.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    match name {
        "smib" => analytic_smib_scenario(0.25).ok(),
        "wscc9" => Some(wscc9_scenario()),
        "wscc9-stable" => Some(wscc9_stable_scenario()),
        "wscc9-unstable" => Some(wscc9_unstable_scenario()),
        _ => None,
    }
}

/// A generated fleet snapshot: per-machine static data plus one instant of
/// (δ, Δω, ΔP) samples. `delta_init` equals `delta` (the reference angles
/// are zero), and `planted_cms` is the higher-angle cluster when the
/// generator planted one.
#[derive(Debug, Clone)]
pub struct FleetFrame {
    pub machines: Vec<FleetMachine>,
    pub delta: Vec<f64>,
    pub domega: Vec<f64>,
    pub dp: Vec<f64>,
    pub planted_cms: BTreeSet<String>,
}

impl FleetFrame {
    pub fn member_samples(&self) -> Vec<MemberSample> {
        (0..self.machines.len())
            .map(|i| MemberSample {
                id: self.machines[i].id.clone(),
                m: self.machines[i].m,
                delta: self.delta[i],
                domega: self.domega[i],
                dp: self.dp[i],
                delta_init: self.delta[i],
            })
            .collect()
    }
}

/// Fleet with a planted two-cluster angle structure: cluster centers in
/// [−60°, −15°] and [15°, 60°] with ±4° in-cluster spread, so the widest
/// adjacent gap is always the inter-cluster one. Areas are assigned
/// round-robin (balanced), which leaves most areas holding members of both
/// clusters.
pub fn synthetic_fleet(n: usize, p: usize, seed: u64) -> FleetFrame {
    assert!(n >= 2 && p >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let c_low = deg_to_rad(rng.gen_range(-60.0..-15.0));
    let c_high = deg_to_rad(rng.gen_range(15.0..60.0));
    let mut high: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    if high.iter().all(|&h| h) {
        high[0] = false;
    }
    if high.iter().all(|&h| !h) {
        high[0] = true;
    }
    let mut machines = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut domega = Vec::with_capacity(n);
    let mut dp = Vec::with_capacity(n);
    let mut planted_cms = BTreeSet::new();
    for i in 0..n {
        let id = format!("G{i}");
        machines.push(FleetMachine {
            id: id.clone(),
            m: rng.gen_range(1.0..50.0),
            area: format!("A{}", i % p),
        });
        let center = if high[i] { c_high } else { c_low };
        delta.push(center + deg_to_rad(rng.gen_range(-4.0..4.0)));
        if high[i] {
            domega.push(rng.gen_range(2.0e-3..8.0e-3));
            dp.push(rng.gen_range(0.0..0.5));
            planted_cms.insert(id);
        } else {
            domega.push(rng.gen_range(-4.0e-3..0.0));
            dp.push(rng.gen_range(-0.3..0.1));
        }
    }
    FleetFrame {
        machines,
        delta,
        domega,
        dp,
        planted_cms,
    }
}

/// Unstructured fleet: uniform angles in [−60°, 60°], uniform area labels,
/// and a uniformly random C/N split with both sides forced non-empty.
/// `planted_cms` holds the split.
pub fn random_fleet(n: usize, p: usize, seed: u64) -> FleetFrame {
    assert!(n >= 2 && p >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut cm: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    if cm.iter().all(|&c| c) {
        cm[0] = false;
    }
    if cm.iter().all(|&c| !c) {
        cm[0] = true;
    }
    let mut machines = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut domega = Vec::with_capacity(n);
    let mut dp = Vec::with_capacity(n);
    let mut planted_cms = BTreeSet::new();
    for i in 0..n {
        let id = format!("G{i}");
        machines.push(FleetMachine {
            id: id.clone(),
            m: rng.gen_range(0.5..60.0),
            area: format!("A{}", rng.gen_range(0..p)),
        });
        delta.push(deg_to_rad(rng.gen_range(-60.0..60.0)));
        domega.push(rng.gen_range(-1.0e-2..1.0e-2));
        dp.push(rng.gen_range(-1.0..1.0));
        if cm[i] {
            planted_cms.insert(id);
        }
    }
    FleetFrame {
        machines,
        delta,
        domega,
        dp,
        planted_cms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_resolve() {
        for name in ["smib", "wscc9", "wscc9-stable", "wscc9-unstable"] {
            assert!(builtin_scenario(name).is_some(), "{name}");
        }
        assert!(builtin_scenario("nope").is_none());
    }

    #[test]
    fn synthetic_fleet_always_has_both_clusters_and_balanced_areas() {
        for seed in 0..20 {
            let f = synthetic_fleet(40, 5, seed);
            assert!(!f.planted_cms.is_empty());
            assert!(f.planted_cms.len() < 40);
            for a in 0..5 {
                let count = f
                    .machines
                    .iter()
                    .filter(|m| m.area == format!("A{a}"))
                    .count();
                assert_eq!(count, 8);
            }
        }
    }

    #[test]
    fn random_fleet_partition_is_proper() {
        for seed in 0..50 {
            let f = random_fleet(2 + (seed as usize % 30), 4, seed);
            assert!(!f.planted_cms.is_empty());
            assert!(f.planted_cms.len() < f.machines.len());
        }
    }

    #[test]
    fn fleet_generation_is_deterministic() {
        let a = synthetic_fleet(100, 10, 7);
        let b = synthetic_fleet(100, 10, 7);
        assert_eq!(a.delta, b.delta);
        assert_eq!(a.planted_cms, b.planted_cms);
    }
}
