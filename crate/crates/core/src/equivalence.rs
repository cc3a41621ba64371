//! Aggregation of a partitioned fleet into a two-machine (and then
//! one-machine) equivalent.
//!
//! Layer 1 collapses each area's critical and non-critical members into
//! center-of-inertia aggregates; layer 2 combines those aggregates into the
//! final equivalent:
//!
//! ```text
//! δ_eq  = Σ M_C δ_C / Σ M_C − Σ M_N δ_N / Σ M_N     (same for Δω)
//! M_eq  = Σ M_C · Σ M_N / (Σ M_C + Σ M_N)
//! ΔP_eq = (Σ M_N · Σ ΔP_C − Σ M_C · Σ ΔP_N) / (Σ M_C + Σ M_N)
//! ```
//!
//! [`direct_equivalence`] evaluates the same formulas over the raw machines
//! in one pass; it is the oracle the layered path must reproduce. All sums
//! use pairwise (tree) summation so the agreement holds to ~1e-12 relative
//! even for fleets of 1e5 machines.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwingError};
use crate::util::{id_fold, pairwise_sum_by};

/// Group label: critical (separating) or non-critical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    C,
    N,
}

/// One machine's contribution at one instant. `delta_init` is the
/// initialized angle δ(t) − δ(0) used for grouping at the next level up;
/// the physical aggregates use the raw angle.
#[derive(Debug, Clone)]
pub struct MemberSample {
    pub id: String,
    pub m: f64,
    pub delta: f64,
    pub domega: f64,
    pub dp: f64,
    pub delta_init: f64,
}

/// Center-of-inertia aggregate of one group within one area.
#[derive(Debug, Clone)]
pub struct CoiGenerator {
    pub area: String,
    pub group: Group,
    pub delta: f64,
    pub domega: f64,
    pub m: f64,
    pub dp: f64,
    /// Inertia-weighted mean of the members' initialized angles; the global
    /// regrouping runs on this.
    pub delta_init: f64,
    pub members: Vec<String>,
    /// XOR fold of the member-id hashes. The global layer combines these
    /// into the partition identity instead of shipping member rosters.
    pub member_fold: u64,
}

impl CoiGenerator {
    pub fn member_count(&self) -> usize {
        self.members.len()
    }
}

/// The final one-machine equivalent at one instant.
#[derive(Debug, Clone)]
pub struct SmibEquivalent {
    pub t: f64,
    pub delta: f64,
    pub domega: f64,
    pub m: f64,
    pub dp: f64,
    /// Hash of the critical-machine id set; changes exactly when the
    /// partition changes.
    pub mode_id: u64,
}

struct GroupAgg {
    m: f64,
    delta: f64,
    domega: f64,
    dp: f64,
    delta_init: f64,
}

fn aggregate(members: &[MemberSample], idx: &[usize]) -> GroupAgg {
    let m = pairwise_sum_by(idx.len(), |k| members[idx[k]].m);
    let md = pairwise_sum_by(idx.len(), |k| members[idx[k]].m * members[idx[k]].delta);
    let mw = pairwise_sum_by(idx.len(), |k| members[idx[k]].m * members[idx[k]].domega);
    let mi = pairwise_sum_by(idx.len(), |k| members[idx[k]].m * members[idx[k]].delta_init);
    let dp = pairwise_sum_by(idx.len(), |k| members[idx[k]].dp);
    GroupAgg {
        m,
        delta: md / m,
        domega: mw / m,
        dp,
        delta_init: mi / m,
    }
}

fn split_indices(members: &[MemberSample], cms: &BTreeSet<String>) -> (Vec<usize>, Vec<usize>) {
    let mut c = Vec::new();
    let mut n = Vec::new();
    for (i, mem) in members.iter().enumerate() {
        if cms.contains(&mem.id) {
            c.push(i);
        } else {
            n.push(i);
        }
    }
    (c, n)
}

/// Collapse one area into its group aggregates: two records when the area
/// holds members of both groups, one otherwise.
pub fn layer1_equivalence(
    area: &str,
    members: &[MemberSample],
    cms: &BTreeSet<String>,
) -> Vec<CoiGenerator> {
    let (c_idx, n_idx) = split_indices(members, cms);
    let mut out = Vec::with_capacity(2);
    for (group, idx) in [(Group::C, c_idx), (Group::N, n_idx)] {
        if idx.is_empty() {
            continue;
        }
        let agg = aggregate(members, &idx);
        out.push(CoiGenerator {
            area: area.to_string(),
            group,
            delta: agg.delta,
            domega: agg.domega,
            m: agg.m,
            dp: agg.dp,
            delta_init: agg.delta_init,
            member_fold: idx.iter().fold(0, |acc, &i| acc ^ id_fold(&members[i].id)),
            members: idx.iter().map(|&i| members[i].id.clone()).collect(),
        });
    }
    out
}

fn combine(t: f64, c: GroupAgg, n: GroupAgg, mode_id: u64) -> SmibEquivalent {
    let m_tot = c.m + n.m;
    SmibEquivalent {
        t,
        delta: c.delta - n.delta,
        domega: c.domega - n.domega,
        m: c.m * n.m / m_tot,
        dp: (n.m * c.dp - c.m * n.dp) / m_tot,
        mode_id,
    }
}

/// Combine area aggregates into the equivalent. Fails when either group is
/// empty — the system is coherent and no equivalent exists.
pub fn layer2_equivalence(t: f64, cois: &[CoiGenerator]) -> Result<SmibEquivalent> {
    let c_idx: Vec<usize> = (0..cois.len()).filter(|&i| cois[i].group == Group::C).collect();
    let n_idx: Vec<usize> = (0..cois.len()).filter(|&i| cois[i].group == Group::N).collect();
    if c_idx.is_empty() || n_idx.is_empty() {
        return Err(SwingError::InvalidInput(
            "equivalence needs both groups populated (system coherent)".into(),
        ));
    }
    let agg = |idx: &[usize]| {
        let m = pairwise_sum_by(idx.len(), |k| cois[idx[k]].m);
        GroupAgg {
            m,
            delta: pairwise_sum_by(idx.len(), |k| cois[idx[k]].m * cois[idx[k]].delta) / m,
            domega: pairwise_sum_by(idx.len(), |k| cois[idx[k]].m * cois[idx[k]].domega) / m,
            dp: pairwise_sum_by(idx.len(), |k| cois[idx[k]].dp),
            delta_init: pairwise_sum_by(idx.len(), |k| cois[idx[k]].m * cois[idx[k]].delta_init)
                / m,
        }
    };
    // The partition identity composes the same way the sums do: XOR the
    // area folds, never touch a member roster.
    let mode_id = c_idx.iter().fold(0, |acc, &i| acc ^ cois[i].member_fold);
    Ok(combine(t, agg(&c_idx), agg(&n_idx), mode_id))
}

/// One-pass equivalent over the raw machine samples: the reference the
/// layered path must match.
pub fn direct_equivalence(
    t: f64,
    members: &[MemberSample],
    cms: &BTreeSet<String>,
) -> Result<SmibEquivalent> {
    let (c_idx, n_idx) = split_indices(members, cms);
    if c_idx.is_empty() || n_idx.is_empty() {
        return Err(SwingError::InvalidInput(
            "equivalence needs both groups populated (system coherent)".into(),
        ));
    }
    let mode_id = c_idx.iter().fold(0, |acc, &i| acc ^ id_fold(&members[i].id));
    Ok(combine(
        t,
        aggregate(members, &c_idx),
        aggregate(members, &n_idx),
        mode_id,
    ))
}

/// Per-sample upload counts for both communication schemes: the direct
/// scheme ships every machine's record, the layered scheme one record per
/// coherent area and two per split area.
#[derive(Debug, Clone)]
pub struct MessageVolume {
    pub n: usize,
    pub p: usize,
    pub direct_per_sample: usize,
    pub two_layer_per_sample: Vec<usize>,
}

impl MessageVolume {
    pub fn total_direct(&self) -> usize {
        self.n * self.two_layer_per_sample.len()
    }

    pub fn total_two_layer(&self) -> usize {
        self.two_layer_per_sample.iter().sum()
    }

    pub fn ratio(&self) -> f64 {
        self.total_two_layer() as f64 / self.total_direct() as f64
    }
}

/// `split_areas_per_sample[k]` is how many areas were split into two
/// aggregates at sample k.
pub fn message_volume(n: usize, p: usize, split_areas_per_sample: &[usize]) -> MessageVolume {
    let two_layer = split_areas_per_sample
        .iter()
        .map(|&s| {
            debug_assert!(s <= p);
            p + s
        })
        .collect();
    MessageVolume {
        n,
        p,
        direct_per_sample: n,
        two_layer_per_sample: two_layer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::util::{close_rel_floor, deg_to_rad};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn member(id: &str, m: f64, delta_deg: f64, domega: f64, dp: f64) -> MemberSample {
        MemberSample {
            id: id.into(),
            m,
            delta: deg_to_rad(delta_deg),
            domega,
            dp,
            delta_init: deg_to_rad(delta_deg),
        }
    }

    #[test]
    fn layer1_is_the_center_of_inertia() {
        let members = vec![
            member("a", 1.0, 10.0, 0.01, 0.2),
            member("b", 1.0, 20.0, 0.03, 0.4),
        ];
        let cois = layer1_equivalence("A1", &members, &BTreeSet::new());
        assert_eq!(cois.len(), 1);
        let c = &cois[0];
        assert!((c.delta - deg_to_rad(15.0)).abs() < 1e-15);
        assert!((c.domega - 0.02).abs() < 1e-15);
        assert_eq!(c.m, 2.0);
        assert!((c.dp - 0.6).abs() < 1e-15);
        assert_eq!(c.member_count(), 2);
    }

    #[test]
    fn layer2_worked_example() {
        let coi = |group, delta_deg: f64| CoiGenerator {
            area: "A".into(),
            group,
            delta: deg_to_rad(delta_deg),
            domega: 0.0,
            m: 1.0,
            dp: 0.0,
            delta_init: deg_to_rad(delta_deg),
            member_fold: id_fold(&format!("{delta_deg}")),
            members: vec![format!("{delta_deg}")],
        };
        let eq = layer2_equivalence(0.0, &[coi(Group::C, 30.0), coi(Group::N, 10.0)]).unwrap();
        assert!((eq.delta - deg_to_rad(20.0)).abs() < 1e-15);
        assert_eq!(eq.m, 0.5);
    }

    #[test]
    fn direct_worked_example() {
        let members = vec![
            member("g1", 1.0, 30.0, 0.0, 0.0),
            member("g2", 2.0, 0.0, 0.0, 0.0),
            member("g3", 3.0, 10.0, 0.0, 0.0),
        ];
        let cms: BTreeSet<String> = ["g1".to_string()].into();
        let eq = direct_equivalence(0.0, &members, &cms).unwrap();
        assert!((eq.delta - deg_to_rad(24.0)).abs() < 1e-14);
        assert!((eq.m - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_group_is_coherent_error() {
        let members = vec![member("a", 1.0, 0.0, 0.0, 0.0)];
        let err = direct_equivalence(0.0, &members, &BTreeSet::new()).unwrap_err();
        assert!(err.to_string().contains("coherent"));
    }

    #[test]
    fn mode_id_tracks_the_partition_not_the_values() {
        let members = vec![
            member("a", 1.0, 30.0, 0.0, 0.0),
            member("b", 2.0, 1.0, 0.0, 0.0),
            member("c", 1.0, 2.0, 0.0, 0.0),
        ];
        let cms_a: BTreeSet<String> = ["a".to_string()].into();
        let cms_ab: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        let e1 = direct_equivalence(0.0, &members, &cms_a).unwrap();
        let e2 = direct_equivalence(1.0, &members, &cms_a).unwrap();
        let e3 = direct_equivalence(0.0, &members, &cms_ab).unwrap();
        assert_eq!(e1.mode_id, e2.mode_id);
        assert_ne!(e1.mode_id, e3.mode_id);
    }

    fn run_two_layer(frame: &cases::FleetFrame) -> Result<SmibEquivalent> {
        let samples = frame.member_samples();
        let mut by_area: BTreeMap<&str, Vec<MemberSample>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            by_area
                .entry(frame.machines[i].area.as_str())
                .or_default()
                .push(s.clone());
        }
        let mut cois = Vec::new();
        for (area, members) in &by_area {
            cois.extend(layer1_equivalence(area, members, &frame.planted_cms));
        }
        layer2_equivalence(0.0, &cois)
    }

    #[test]
    fn layered_path_matches_direct_on_large_fleets() {
        for seed in [1u64, 2, 3] {
            let frame = cases::random_fleet(100_000, 20, seed);
            let direct = direct_equivalence(0.0, &frame.member_samples(), &frame.planted_cms)
                .unwrap();
            let layered = run_two_layer(&frame).unwrap();
            for (a, b, name) in [
                (direct.delta, layered.delta, "delta"),
                (direct.domega, layered.domega, "domega"),
                (direct.m, layered.m, "m"),
                (direct.dp, layered.dp, "dp"),
            ] {
                assert!(
                    close_rel_floor(a, b, 1.0e-12),
                    "{name}: direct {a} vs layered {b} (seed {seed})"
                );
            }
            assert_eq!(direct.mode_id, layered.mode_id);
        }
    }

    proptest! {
        #[test]
        fn layered_path_matches_direct(
            n in 2usize..80,
            p in 1usize..20,
            seed in 0u64..10_000,
        ) {
            let frame = cases::random_fleet(n, p, seed);
            let direct = direct_equivalence(0.0, &frame.member_samples(), &frame.planted_cms)
                .unwrap();
            let layered = run_two_layer(&frame).unwrap();
            prop_assert!(close_rel_floor(direct.delta, layered.delta, 1e-12));
            prop_assert!(close_rel_floor(direct.domega, layered.domega, 1e-12));
            prop_assert!(close_rel_floor(direct.m, layered.m, 1e-12));
            prop_assert!(close_rel_floor(direct.dp, layered.dp, 1e-12));
            prop_assert_eq!(direct.mode_id, layered.mode_id);
        }

        #[test]
        fn swapping_groups_negates_the_equivalent(
            n in 2usize..40,
            seed in 0u64..10_000,
        ) {
            let frame = cases::random_fleet(n, 4, seed);
            let samples = frame.member_samples();
            let swapped: BTreeSet<String> = samples
                .iter()
                .map(|s| s.id.clone())
                .filter(|id| !frame.planted_cms.contains(id))
                .collect();
            let a = direct_equivalence(0.0, &samples, &frame.planted_cms).unwrap();
            let b = direct_equivalence(0.0, &samples, &swapped).unwrap();
            prop_assert_eq!(a.delta, -b.delta);
            prop_assert_eq!(a.domega, -b.domega);
            prop_assert_eq!(a.m, b.m);
            prop_assert_eq!(a.dp, -b.dp);
        }

        #[test]
        fn power_of_two_inertia_scaling_is_exact(
            n in 2usize..40,
            seed in 0u64..10_000,
        ) {
            // Scaling every M by 4 multiplies M_eq by 4 and leaves δ and Δω
            // bitwise unchanged (powers of two keep the arithmetic exact).
            let frame = cases::random_fleet(n, 4, seed);
            let samples = frame.member_samples();
            let scaled: Vec<MemberSample> = samples
                .iter()
                .map(|s| MemberSample { m: 4.0 * s.m, ..s.clone() })
                .collect();
            let a = direct_equivalence(0.0, &samples, &frame.planted_cms).unwrap();
            let b = direct_equivalence(0.0, &scaled, &frame.planted_cms).unwrap();
            prop_assert_eq!(a.delta, b.delta);
            prop_assert_eq!(a.domega, b.domega);
            prop_assert_eq!(4.0 * a.m, b.m);
        }
    }

    #[test]
    fn message_counts_follow_the_split_history() {
        let mv = message_volume(2000, 20, &[0, 5, 20, 3]);
        assert_eq!(mv.direct_per_sample, 2000);
        assert_eq!(mv.two_layer_per_sample, vec![20, 25, 40, 23]);
        assert_eq!(mv.total_direct(), 8000);
        assert_eq!(mv.total_two_layer(), 108);
        // Per-sample counts stay inside [P, 2P] ⇒ ratio inside [1%, 2%].
        let r = mv.ratio();
        assert!((0.01..=0.02).contains(&r), "ratio {r}");
    }
}
