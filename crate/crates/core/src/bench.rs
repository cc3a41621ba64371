//! Scaling measurement of the direct and two-layer aggregation paths.
//!
//! Both paths produce the same equivalent (checked, untimed, before any
//! clock starts); what differs is where the work happens. The direct path
//! ranks and folds all N machines in one place. The two-layer path lets
//! each of the P areas fold its own members and ships at most 2P aggregates
//! upward. Since the area tasks are independent, two-layer latency is
//! accounted as the slowest area stage plus the global stage — the natural
//! cost model for a federation of area processors, and one that does not
//! depend on how many worker threads this host happens to have. Each area's
//! stage cost is summarized across repetitions first (median or tail) and
//! the maximum is taken over those summaries: an area pays for its own work,
//! not for the scheduling blip some other task absorbed in the same
//! repetition. The `concurrency` switch only changes whether the area tasks
//! actually run on a thread pool; the accounting (and the results) are
//! identical either way.

use std::collections::BTreeSet;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::cases::{synthetic_fleet, FleetFrame};
use crate::equivalence::{
    direct_equivalence, layer1_equivalence, layer2_equivalence, CoiGenerator, Group,
    MemberSample, SmibEquivalent,
};
use crate::error::{Result, SwingError};
use crate::grouping::{coherency_check, lag_identify, AngleSnapshot};
use crate::util::{close_rel_floor, deg_to_rad};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub areas: usize,
    pub repetitions: usize,
    /// Run the per-area stage on the thread pool (when compiled in).
    pub concurrency: bool,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![100, 500, 1000, 2000, 5000],
            areas: 20,
            repetitions: 15,
            concurrency: true,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub p: usize,
    /// Medians over the repetitions.
    pub t_direct_ms: f64,
    pub t_two_layer_ms: f64,
    pub p95_direct_ms: f64,
    pub p95_two_layer_ms: f64,
    pub speedup: f64,
    pub msgs_direct: usize,
    pub msgs_two_layer: usize,
    pub threads: usize,
}

pub fn thread_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

const BENCH_MIN_GAP: f64 = 5.0;
const BENCH_DELTA_SET: f64 = 10.0;

struct AreaTask {
    area: String,
    members: Vec<MemberSample>,
    snapshot: AngleSnapshot,
}

/// Prepared inputs for one fleet size: the global ranking snapshot, the
/// member array, and the per-area tasks. Construction (allocation, string
/// cloning) stays outside any timed region.
pub struct BenchInput {
    global_snapshot: AngleSnapshot,
    members: Vec<MemberSample>,
    tasks: Vec<AreaTask>,
}

impl BenchInput {
    pub fn prepare(n: usize, p: usize, seed: u64) -> Self {
        let frame = synthetic_fleet(n, p, seed);
        let (global_snapshot, members, tasks) = build_tasks(&frame, p);
        BenchInput {
            global_snapshot,
            members,
            tasks,
        }
    }

    /// One full central-ranking pass.
    pub fn direct_once(&self) -> Result<SmibEquivalent> {
        direct_pass(&self.global_snapshot, &self.members)
    }

    /// One full two-layer pass; `concurrency` selects the thread pool for
    /// the area stage when it is compiled in.
    pub fn two_layer_once(&self, concurrency: bool) -> Result<SmibEquivalent> {
        two_layer_pass(&self.tasks, concurrency, 0).map(|o| o.smib)
    }
}

fn build_tasks(frame: &FleetFrame, p: usize) -> (AngleSnapshot, Vec<MemberSample>, Vec<AreaTask>) {
    let members = frame.member_samples();
    let n = members.len();
    let global_snapshot = AngleSnapshot {
        t: 0.0,
        ids: members.iter().map(|m| m.id.clone()).collect(),
        delta_t: members.iter().map(|m| m.delta_init).collect(),
        delta_0: vec![0.0; n],
    };
    let mut areas: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, fm) in frame.machines.iter().enumerate() {
        match areas.iter_mut().find(|(a, _)| *a == fm.area) {
            Some((_, idx)) => idx.push(i),
            None => areas.push((fm.area.clone(), vec![i])),
        }
    }
    areas.sort_by(|a, b| a.0.cmp(&b.0));
    debug_assert!(areas.len() <= p);
    let tasks = areas
        .into_iter()
        .map(|(area, idx)| AreaTask {
            snapshot: AngleSnapshot {
                t: 0.0,
                ids: idx.iter().map(|&i| members[i].id.clone()).collect(),
                delta_t: idx.iter().map(|&i| members[i].delta_init).collect(),
                delta_0: vec![0.0; idx.len()],
            },
            members: idx.iter().map(|&i| members[i].clone()).collect(),
            area,
        })
        .collect();
    (global_snapshot, members, tasks)
}

fn direct_pass(snapshot: &AngleSnapshot, members: &[MemberSample]) -> Result<SmibEquivalent> {
    let ga = lag_identify(snapshot, deg_to_rad(BENCH_MIN_GAP))?;
    if ga.coherent {
        return Err(SwingError::InvalidInput(
            "benchmark fleet ranked as coherent".into(),
        ));
    }
    direct_equivalence(0.0, members, &ga.cms)
}

struct TwoLayerOutcome {
    smib: SmibEquivalent,
    splits: usize,
    /// Per-area stage times, aligned with the task list.
    area_ms: Vec<f64>,
    global_ms: f64,
}

fn area_stage(task: &AreaTask) -> Result<(Vec<CoiGenerator>, bool, f64)> {
    if task.members.is_empty() {
        return Ok((Vec::new(), false, 0.0));
    }
    let t0 = Instant::now();
    let cms = if task.members.len() >= 2
        && !coherency_check(&task.snapshot, deg_to_rad(BENCH_DELTA_SET))?
    {
        lag_identify(&task.snapshot, deg_to_rad(BENCH_MIN_GAP))?.cms
    } else {
        BTreeSet::new()
    };
    let split = !cms.is_empty();
    let cois = layer1_equivalence(&task.area, &task.members, &cms);
    Ok((cois, split, t0.elapsed().as_secs_f64() * 1.0e3))
}

/// `rotation` offsets the area execution order. Repetition loops vary it so
/// periodic interruptions (timer ticks that land at a fixed phase of an
/// equal-length pass) do not keep hitting the same area's measurement.
fn two_layer_pass(
    tasks: &[AreaTask],
    concurrency: bool,
    rotation: usize,
) -> Result<TwoLayerOutcome> {
    let n = tasks.len();
    let order: Vec<usize> = (0..n).map(|i| (i + rotation) % n.max(1)).collect();
    let mut outs: Vec<Option<(Vec<CoiGenerator>, bool, f64)>> = vec![None; n];
    #[cfg(feature = "parallel")]
    {
        if concurrency {
            let staged: Vec<(usize, (Vec<CoiGenerator>, bool, f64))> = order
                .par_iter()
                .map(|&i| area_stage(&tasks[i]).map(|o| (i, o)))
                .collect::<Result<_>>()?;
            for (i, o) in staged {
                outs[i] = Some(o);
            }
        } else {
            for &i in &order {
                outs[i] = Some(area_stage(&tasks[i])?);
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = concurrency;
        for &i in &order {
            outs[i] = Some(area_stage(&tasks[i])?);
        }
    }
    let outs: Vec<(Vec<CoiGenerator>, bool, f64)> =
        outs.into_iter().map(|o| o.expect("staged")).collect();

    let area_ms: Vec<f64> = outs.iter().map(|(_, _, ms)| *ms).collect();
    let splits = outs.iter().filter(|(_, s, _)| *s).count();

    let t0 = Instant::now();
    let mut cois: Vec<CoiGenerator> = Vec::new();
    for (c, _, _) in outs {
        cois.extend(c);
    }
    let snap = AngleSnapshot {
        t: 0.0,
        ids: (0..cois.len()).map(|k| k.to_string()).collect(),
        delta_t: cois.iter().map(|c| c.delta_init).collect(),
        delta_0: vec![0.0; cois.len()],
    };
    let ga = lag_identify(&snap, deg_to_rad(BENCH_MIN_GAP))?;
    if ga.coherent {
        return Err(SwingError::InvalidInput(
            "benchmark aggregates ranked as coherent".into(),
        ));
    }
    for (k, coi) in cois.iter_mut().enumerate() {
        coi.group = if ga.cms.contains(&k.to_string()) {
            Group::C
        } else {
            Group::N
        };
    }
    let smib = layer2_equivalence(0.0, &cois)?;
    let global_ms = t0.elapsed().as_secs_f64() * 1.0e3;
    Ok(TwoLayerOutcome {
        smib,
        splits,
        area_ms,
        global_ms,
    })
}

fn same_bits(a: &SmibEquivalent, b: &SmibEquivalent) -> bool {
    a.mode_id == b.mode_id
        && a.delta.to_bits() == b.delta.to_bits()
        && a.domega.to_bits() == b.domega.to_bits()
        && a.m.to_bits() == b.m.to_bits()
        && a.dp.to_bits() == b.dp.to_bits()
}

fn check_identity(direct: &SmibEquivalent, layered: &SmibEquivalent) -> Result<()> {
    let tol = 1.0e-12;
    let ok = direct.mode_id == layered.mode_id
        && close_rel_floor(direct.delta, layered.delta, tol)
        && close_rel_floor(direct.domega, layered.domega, tol)
        && close_rel_floor(direct.m, layered.m, tol)
        && close_rel_floor(direct.dp, layered.dp, tol);
    if !ok {
        return Err(SwingError::InvalidInput(format!(
            "aggregation paths disagree: direct (δ {}, Δω {}, M {}, ΔP {}, mode {:016x}) vs layered (δ {}, Δω {}, M {}, ΔP {}, mode {:016x})",
            direct.delta,
            direct.domega,
            direct.m,
            direct.dp,
            direct.mode_id,
            layered.delta,
            layered.domega,
            layered.m,
            layered.dp,
            layered.mode_id,
        )));
    }
    Ok(())
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.is_empty() || cfg.areas == 0 || cfg.repetitions == 0 {
        return Err(SwingError::InvalidInput(
            "benchmark needs sizes, areas, and repetitions".into(),
        ));
    }
    let warmup = 2usize;
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        if n < 2 {
            return Err(SwingError::InvalidInput(format!(
                "fleet size {n} is too small to rank"
            )));
        }
        let frame = synthetic_fleet(n, cfg.areas, cfg.seed ^ n as u64);
        let (global_snapshot, members, tasks) = build_tasks(&frame, cfg.areas);

        // Identity gate, untimed: both paths must agree before any timing.
        let direct_ref = direct_pass(&global_snapshot, &members)?;
        let layered_ref = two_layer_pass(&tasks, cfg.concurrency, 0)?;
        check_identity(&direct_ref, &layered_ref.smib)?;

        let mut t_direct = Vec::with_capacity(cfg.repetitions);
        let mut t_global = Vec::with_capacity(cfg.repetitions);
        let mut t_areas: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.repetitions); tasks.len()];
        let mut splits = layered_ref.splits;
        for rep in 0..cfg.repetitions + warmup {
            let t0 = Instant::now();
            let d = direct_pass(&global_snapshot, &members)?;
            let d_ms = t0.elapsed().as_secs_f64() * 1.0e3;

            let l = two_layer_pass(&tasks, cfg.concurrency, rep)?;
            if !same_bits(&d, &direct_ref) || !same_bits(&l.smib, &layered_ref.smib) {
                return Err(SwingError::InvalidInput(
                    "timed repetition diverged from the reference pass".into(),
                ));
            }
            if rep >= warmup {
                t_direct.push(d_ms);
                t_global.push(l.global_ms);
                for (a, ms) in l.area_ms.iter().enumerate() {
                    t_areas[a].push(*ms);
                }
                splits = l.splits;
            }
        }
        t_direct.sort_by(f64::total_cmp);
        t_global.sort_by(f64::total_cmp);
        for series in &mut t_areas {
            series.sort_by(f64::total_cmp);
        }
        // Two-layer latency composes per stage: each area is its own
        // processor, so an area is charged its own typical (or tail) cost,
        // not whatever scheduling blip some other task absorbed in the same
        // repetition. Max over areas, plus the global stage.
        let compose = |q: Option<f64>| -> f64 {
            let stat = |s: &[f64]| q.map_or_else(|| median(s), |q| percentile(s, q));
            let worst_area = t_areas.iter().map(|s| stat(s)).fold(0.0f64, f64::max);
            worst_area + stat(&t_global)
        };
        let (md, ml) = (median(&t_direct), compose(None));
        rows.push(BenchRow {
            n,
            p: cfg.areas,
            t_direct_ms: md,
            t_two_layer_ms: ml,
            p95_direct_ms: percentile(&t_direct, 0.95),
            p95_two_layer_ms: compose(Some(0.95)),
            speedup: md / ml,
            msgs_direct: n,
            msgs_two_layer: cfg.areas.min(n) + splits,
            threads: thread_count(),
        });
    }
    Ok(rows)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks(x);
    let ry = ranks(y);
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[order[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_decomposition_probe() {
        let frame = synthetic_fleet(2000, 20, 7 ^ 2000);
        let (_snap, _members, tasks) = build_tasks(&frame, 20);
        let reps = 15;
        let mut per_area: Vec<Vec<f64>> = vec![Vec::new(); tasks.len()];
        let mut global = Vec::new();
        for rep in 0..reps + 2 {
            let l = two_layer_pass(&tasks, false, rep).unwrap();
            if rep >= 2 {
                for (a, ms) in l.area_ms.iter().enumerate() {
                    per_area[a].push(*ms);
                }
                global.push(l.global_ms);
            }
        }
        let mut meds: Vec<(usize, f64)> = per_area
            .iter()
            .enumerate()
            .map(|(a, s)| {
                let mut s = s.clone();
                s.sort_by(f64::total_cmp);
                (a, median(&s))
            })
            .collect();
        meds.sort_by(|x, y| y.1.total_cmp(&x.1));
        global.sort_by(f64::total_cmp);
        println!("global median {:.4} ms", median(&global));
        for (a, m) in meds.iter().take(6) {
            println!("area {a}: median {m:.4} ms ({} members)", tasks[*a].members.len());
        }
    }

    #[test]
    fn spearman_handles_monotonicity_and_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 90.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[5.0, 4.0, 3.0]) + 1.0).abs() < 1e-12);
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!(r > 0.9 && r <= 1.0, "tied ranks gave {r}");
    }

    #[test]
    fn bench_rows_report_consistent_sizes_and_messages() {
        let cfg = BenchConfig {
            sizes: vec![50, 200],
            areas: 5,
            repetitions: 3,
            concurrency: false,
            seed: 11,
        };
        let rows = run_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.msgs_direct, row.n);
            assert!(row.msgs_two_layer >= row.p && row.msgs_two_layer <= 2 * row.p);
            assert!(row.t_direct_ms > 0.0 && row.t_two_layer_ms > 0.0);
            assert!(row.speedup.is_finite() && row.speedup > 0.0);
        }
    }

    #[test]
    fn identity_gate_runs_under_both_execution_modes() {
        for concurrency in [false, true] {
            let cfg = BenchConfig {
                sizes: vec![300],
                areas: 8,
                repetitions: 2,
                concurrency,
                seed: 3,
            };
            let rows = run_bench(&cfg).unwrap();
            assert_eq!(rows[0].n, 300);
        }
    }

    #[test]
    fn percentile_and_median_edge_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(median(&xs), 2.5);
        assert_eq!(percentile(&xs, 0.95), 4.0);
        assert_eq!(percentile(&xs, 0.5), 2.0);
        assert_eq!(median(&[5.0]), 5.0);
    }
}
