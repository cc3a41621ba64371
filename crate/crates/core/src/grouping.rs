//! Critical-machine identification from one angle snapshot.
//!
//! Works on *initialized* rotor angles δ′_i(t) = δ_i(t) − δ_i(0), where the
//! reference δ_i(0) is each machine's angle at the first post-disturbance
//! sample. Sorting the initialized angles and splitting at the largest
//! adjacent gap separates the machines that are pulling away (the critical
//! group, above the gap) from the rest. A largest gap below `min_gap` means
//! no meaningful separation exists yet.

use std::collections::BTreeSet;

use crate::error::{Result, SwingError};

/// One instant of angles for a set of generators (machines or area
/// aggregates): current angle and the t = 0 reference, both radians.
#[derive(Debug, Clone)]
pub struct AngleSnapshot {
    pub t: f64,
    pub ids: Vec<String>,
    pub delta_t: Vec<f64>,
    pub delta_0: Vec<f64>,
}

impl AngleSnapshot {
    pub fn initialized(&self, i: usize) -> f64 {
        self.delta_t[i] - self.delta_0[i]
    }

    fn check(&self) -> Result<()> {
        if self.ids.len() != self.delta_t.len() || self.ids.len() != self.delta_0.len() {
            return Err(SwingError::InvalidInput(
                "snapshot id/angle lengths disagree".into(),
            ));
        }
        Ok(())
    }
}

/// Result of the largest-gap split at one instant.
#[derive(Debug, Clone)]
pub struct GroupAssignment {
    pub t: f64,
    pub cms: BTreeSet<String>,
    pub nms: BTreeSet<String>,
    /// Width of the chosen gap (rad). When `coherent` it is the widest gap
    /// found, reported for diagnostics.
    pub boundary_gap: f64,
    /// True when the widest gap is below the `min_gap` threshold: no
    /// critical group is declared.
    pub coherent: bool,
}

/// Split a snapshot at the largest adjacent gap of initialized angles.
/// Ties choose the highest-angle gap (fewest critical machines). Requires
/// at least two generators.
pub fn lag_identify(snapshot: &AngleSnapshot, min_gap: f64) -> Result<GroupAssignment> {
    snapshot.check()?;
    let n = snapshot.ids.len();
    if n < 2 {
        return Err(SwingError::InvalidInput(format!(
            "largest-gap split needs at least two generators, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        snapshot
            .initialized(a)
            .total_cmp(&snapshot.initialized(b))
    });
    let mut best_gap = f64::NEG_INFINITY;
    let mut best_split = 0; // CMs are order[best_split+1..]
    for w in 0..n - 1 {
        let gap = snapshot.initialized(order[w + 1]) - snapshot.initialized(order[w]);
        if gap >= best_gap {
            best_gap = gap;
            best_split = w;
        }
    }
    let coherent = best_gap < min_gap;
    let mut cms = BTreeSet::new();
    let mut nms = BTreeSet::new();
    for (rank, &idx) in order.iter().enumerate() {
        if !coherent && rank > best_split {
            cms.insert(snapshot.ids[idx].clone());
        } else {
            nms.insert(snapshot.ids[idx].clone());
        }
    }
    Ok(GroupAssignment {
        t: snapshot.t,
        cms,
        nms,
        boundary_gap: best_gap,
        coherent,
    })
}

/// Area coherency test: the initialized-angle spread must stay strictly
/// below `delta_set` for the area to count as one coherent group.
pub fn coherency_check(snapshot: &AngleSnapshot, delta_set: f64) -> Result<bool> {
    snapshot.check()?;
    if snapshot.ids.is_empty() {
        return Err(SwingError::InvalidInput(
            "coherency check on an empty snapshot".into(),
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..snapshot.ids.len() {
        let v = snapshot.initialized(i);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi - lo < delta_set)
}
