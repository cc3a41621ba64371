//! Instability indexes over the one-machine equivalent stream.
//!
//! The primary index is the sampled difference of the accelerating-power/
//! slip quotient,
//!
//! ```text
//! c(t) = ΔP(t)/Δω(t) − ΔP(t−Δt)/Δω(t−Δt),    c > 0 ⇒ separating,
//! ```
//!
//! which tracks the sign of the phase-plane curvature condition l·Δω > 0
//! without needing the network model. The quotient is singular at Δω = 0,
//! so three gates protect it: a slip dead band (|Δω| must exceed
//! `epsilon_domega` at both samples), a same-partition requirement (the
//! quotient means nothing across a regrouping), and a same-sign requirement
//! (a pair straddling a Δω zero crossing jumps between the quotient's two
//! branches, which is the dead band's intent extended to pairs that jump
//! across it between samples).
//!
//! Two comparison indexes from the same literature family are provided: τ
//! (second difference of the phase-plane slope; needs three samples) and μ
//! (ratio projection against the post-fault equilibrium angle δ_sep; needs
//! the network model). Both are kept faithful to their published forms —
//! including their noise sensitivity.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::equivalence::SmibEquivalent;
use crate::error::{Result, SwingError};
use crate::netmodel::ReducedNetwork;
use crate::util::pairwise_sum_by;

/// Which index drives the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveIndex {
    C,
    Tau,
    Mu,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Slip dead band (2π-scaled per-unit); samples with |Δω| at or below
    /// it are gated.
    pub epsilon_domega: f64,
    /// Consecutive firing samples required before declaring instability.
    pub confirm_samples: usize,
    /// Moving-average window applied to the active index before
    /// thresholding; 1 disables it.
    pub index_maf_window: usize,
    pub active_index: ActiveIndex,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            epsilon_domega: 1.0e-4,
            confirm_samples: 1,
            index_maf_window: 1,
            active_index: ActiveIndex::C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Indeterminate,
}

/// Per-sample detector output. `c` is the value the verdict used (filtered
/// when an index moving average is configured); `tau` and `mu` are always
/// raw. `gated` means the active index was not computable this sample.
#[derive(Debug, Clone)]
pub struct DetectionSample {
    pub t: f64,
    pub mode_id: u64,
    pub delta_eq: f64,
    pub domega_eq: f64,
    pub c: Option<f64>,
    pub tau: Option<f64>,
    pub mu: Option<f64>,
    pub gated: bool,
    pub verdict: Verdict,
}

/// Quotient-difference index; `None` when gated (different partition, slip
/// inside the dead band, or a slip sign change between the samples).
pub fn index_c(cur: &SmibEquivalent, prev: &SmibEquivalent, epsilon_domega: f64) -> Option<f64> {
    if cur.mode_id != prev.mode_id {
        return None;
    }
    if cur.domega.abs() <= epsilon_domega || prev.domega.abs() <= epsilon_domega {
        return None;
    }
    if (cur.domega > 0.0) != (prev.domega > 0.0) {
        return None;
    }
    Some(cur.dp / cur.domega - prev.dp / prev.domega)
}

/// Slope-difference index over three samples:
/// τ = [Δω(t)−Δω(t−Δt)]/[δ(t)−δ(t−Δt)] − [Δω(t−Δt)−Δω(t−2Δt)]/[δ(t−Δt)−δ(t−2Δt)];
/// τ > 0 flags instability. Gated when either angle increment is inside
/// `angle_deadband` or the partition changed.
pub fn index_tau(
    cur: &SmibEquivalent,
    prev: &SmibEquivalent,
    prev2: &SmibEquivalent,
    angle_deadband: f64,
) -> Option<f64> {
    if cur.mode_id != prev.mode_id || prev.mode_id != prev2.mode_id {
        return None;
    }
    let d1 = cur.delta - prev.delta;
    let d0 = prev.delta - prev2.delta;
    if d1.abs() <= angle_deadband || d0.abs() <= angle_deadband {
        return None;
    }
    Some((cur.domega - prev.domega) / d1 - (prev.domega - prev2.domega) / d0)
}

/// Projection-ratio index against the post-fault equilibrium angle:
///
/// ```text
///      −ω̇(t−Δt)·(δ(t−Δt) − δ_sep) + Δω(t−Δt)²
/// μ = ──────────────────────────────────────────,   μ < 1 ⇒ unstable,
///      −ω̇(t−Δt)·(δ(t) − δ_sep) + Δω(t−Δt)·Δω(t)
/// ```
///
/// with ω̇ = ΔP/M from the equivalent's swing equation. Gated on a
/// vanishing denominator or a partition change.
pub fn index_mu(cur: &SmibEquivalent, prev: &SmibEquivalent, delta_sep: f64) -> Option<f64> {
    if cur.mode_id != prev.mode_id {
        return None;
    }
    let wdot = prev.dp / prev.m;
    let num = -wdot * (prev.delta - delta_sep) + prev.domega * prev.domega;
    let den = -wdot * (cur.delta - delta_sep) + prev.domega * cur.domega;
    if den.abs() < 1.0e-14 {
        return None;
    }
    Some(num / den)
}

/// Relative band for the kinematic-consistency check on a quotient pair.
const KINEMATIC_REL: f64 = 0.5;
/// Consecutive kinematically consistent pairs a mode must produce before its
/// quotient difference counts as evidence. A physical mode streams consistent
/// pairs every frame; a partition that owes its existence to measurement
/// noise has to win that alignment repeatedly.
const CONSISTENT_PAIRS_MIN: usize = 2;
/// Pairs a partition must have lived through before any of its evidence
/// counts, consistent or not. Groupings that owe their existence to noise
/// rarely survive 120 ms; a separating mode persists until it is acted on.
const MODE_PAIRS_MIN: usize = 5;

/// Stateful per-run detector: ring of recent equivalents, the confirmation
/// counter, and the optional index moving average. History resets whenever
/// the partition (mode id) changes.
pub struct Detector {
    cfg: DetectorConfig,
    omega0: f64,
    delta_sep: Option<f64>,
    prev: Option<SmibEquivalent>,
    prev2: Option<SmibEquivalent>,
    confirm: usize,
    kin_streak: usize,
    mode_pairs: usize,
    maf: VecDeque<f64>,
}

impl Detector {
    pub fn new(cfg: DetectorConfig, f0: f64) -> Self {
        Detector {
            cfg,
            omega0: 2.0 * std::f64::consts::PI * f0,
            delta_sep: None,
            prev: None,
            prev2: None,
            confirm: 0,
            kin_streak: 0,
            mode_pairs: 0,
            maf: VecDeque::new(),
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Provide the model-side equilibrium angle μ needs; `None` marks it
    /// unavailable (μ is then never computed).
    pub fn set_delta_sep(&mut self, v: Option<f64>) {
        self.delta_sep = v;
    }

    pub fn reset(&mut self) {
        self.prev = None;
        self.prev2 = None;
        self.confirm = 0;
        self.kin_streak = 0;
        self.mode_pairs = 0;
        self.maf.clear();
    }

    /// Mode bookkeeping shared by `observe` and `update`: reset on a
    /// partition change, advance the partition age, and score the pair
    /// against the equivalent's own kinematics, δ̇ = ω0·Δω — the measured
    /// angle step has to match the trapezoid of the measured slip. Pairs
    /// from groupings that exist only because measurement noise (or a
    /// drifting boundary machine) reshuffled the gap show order-of-magnitude
    /// violations and carry no evidence.
    fn track(&mut self, smib: &SmibEquivalent) {
        if let Some(p) = &self.prev {
            if p.mode_id != smib.mode_id {
                self.reset();
            }
        }
        let consistent = self.prev.as_ref().map_or(false, |p| {
            let dd = smib.delta - p.delta;
            let implied = 0.5 * self.omega0 * (smib.domega + p.domega) * (smib.t - p.t);
            (dd - implied).abs() <= KINEMATIC_REL * dd.abs().max(implied.abs())
        });
        if self.prev.is_some() {
            self.mode_pairs += 1;
        }
        if consistent {
            self.kin_streak += 1;
        } else {
            self.kin_streak = 0;
        }
    }

    /// Feed a sample without arming the verdict machinery. History,
    /// partition age, and pair consistency advance exactly as in `update`;
    /// no index is evaluated, no confirmation state changes.
    pub fn observe(&mut self, smib: &SmibEquivalent) {
        self.track(smib);
        self.prev2 = self.prev.take();
        self.prev = Some(smib.clone());
    }

    pub fn update(&mut self, smib: &SmibEquivalent) -> DetectionSample {
        self.track(smib);
        // The difference of quotients carries stability evidence only while
        // the equivalent moves away from its stable equilibrium. When the
        // model-side δ_sep is known and the motion is back toward it (as in
        // short-lived groupings while a boundary machine drifts across the
        // gap), the pair is gated like any other singular sample.
        let advancing = self
            .delta_sep
            .map_or(true, |sep| (smib.delta - sep) * smib.domega > 0.0);
        let c = self
            .prev
            .as_ref()
            .and_then(|p| index_c(smib, p, self.cfg.epsilon_domega))
            .filter(|_| {
                advancing
                    && self.kin_streak >= CONSISTENT_PAIRS_MIN
                    && self.mode_pairs >= MODE_PAIRS_MIN
            });
        let tau = match (&self.prev, &self.prev2) {
            (Some(p), Some(p2)) => {
                let deadband = self.omega0 * self.cfg.epsilon_domega * (smib.t - p.t);
                index_tau(smib, p, p2, deadband)
            }
            _ => None,
        };
        let mu = match (&self.prev, self.delta_sep) {
            (Some(p), Some(ds)) => index_mu(smib, p, ds),
            _ => None,
        };

        let raw_active = match self.cfg.active_index {
            ActiveIndex::C => c,
            ActiveIndex::Tau => tau,
            ActiveIndex::Mu => mu,
        };
        // The index average only emits once its window is full; a partial
        // window would pass the first raw value straight through, defeating
        // the mitigation exactly when it matters (a fresh mode's first spike).
        let (active, gated) = match raw_active {
            Some(v) if self.cfg.index_maf_window > 1 => {
                self.maf.push_back(v);
                while self.maf.len() > self.cfg.index_maf_window {
                    self.maf.pop_front();
                }
                if self.maf.len() == self.cfg.index_maf_window {
                    let mean = self.maf.iter().sum::<f64>() / self.maf.len() as f64;
                    (Some(mean), false)
                } else {
                    (None, true)
                }
            }
            Some(v) => (Some(v), false),
            None => (None, true),
        };

        let verdict = match active {
            Some(v) => {
                let firing = match self.cfg.active_index {
                    ActiveIndex::C | ActiveIndex::Tau => v > 0.0,
                    ActiveIndex::Mu => v < 1.0,
                };
                if firing {
                    self.confirm += 1;
                } else {
                    self.confirm = 0;
                }
                if self.confirm >= self.cfg.confirm_samples {
                    Verdict::Unstable
                } else {
                    Verdict::Stable
                }
            }
            None => {
                self.confirm = 0;
                Verdict::Indeterminate
            }
        };

        let reported_c = match self.cfg.active_index {
            ActiveIndex::C => active,
            _ => c,
        };
        let sample = DetectionSample {
            t: smib.t,
            mode_id: smib.mode_id,
            delta_eq: smib.delta,
            domega_eq: smib.domega,
            c: reported_c,
            tau,
            mu,
            gated,
            verdict,
        };
        self.prev2 = self.prev.take();
        self.prev = Some(smib.clone());
        sample
    }
}

/// One contiguous stretch of a single partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSegment {
    pub t_start: f64,
    pub mode_id: u64,
}

/// Run-level roll-up of a detection stream.
#[derive(Debug, Clone)]
pub struct DecisionSummary {
    pub verdict: Verdict,
    pub t_s: Option<f64>,
    pub delta_s: Option<f64>,
    pub mode_history: Vec<ModeSegment>,
}

/// Summarize: the run is unstable at the first unstable sample; stable if
/// any sample produced a verdict at all; indeterminate otherwise.
pub fn decide(samples: &[DetectionSample]) -> DecisionSummary {
    let mut t_s = None;
    let mut delta_s = None;
    let mut any_value = false;
    let mut mode_history: Vec<ModeSegment> = Vec::new();
    for s in samples {
        if mode_history.last().map(|m| m.mode_id) != Some(s.mode_id) {
            mode_history.push(ModeSegment {
                t_start: s.t,
                mode_id: s.mode_id,
            });
        }
        if !s.gated {
            any_value = true;
        }
        if t_s.is_none() && s.verdict == Verdict::Unstable {
            t_s = Some(s.t);
            delta_s = Some(s.delta_eq);
        }
    }
    DecisionSummary {
        verdict: if t_s.is_some() {
            Verdict::Unstable
        } else if any_value {
            Verdict::Stable
        } else {
            Verdict::Indeterminate
        },
        t_s,
        delta_s,
        mode_history,
    }
}

/// Accelerating power of the equivalent as a function of its angle, under a
/// rigid two-group displacement of the underlying machines.
///
/// Moving the critical group by M_N/(M_C+M_N)·Δu and the rest by
/// −M_C/(M_C+M_N)·Δu shifts every cross-group angle difference by exactly
/// Δu and no within-group difference, so ΔP_eq(u) is a pure single-harmonic
/// curve A + B·sin u + C·cos u. The stable and unstable equilibrium angles
/// fall out in closed form and a short Newton polish pins them to 1e-10.
pub struct EquivalentPowerCurve {
    a: f64,
    b: f64,
    c: f64,
}

impl EquivalentPowerCurve {
    /// Build from a reduced post-fault network, effective machine data, the
    /// anchor angles (typically the state at clearing or detection), and the
    /// critical-machine mask. With an empty non-critical side the curve is
    /// the plain aggregate against the network's fixed buses (which must
    /// then exist).
    pub fn new(
        reduced: &ReducedNetwork,
        pm: &[f64],
        m: &[f64],
        ref_delta: &[f64],
        cm_mask: &[bool],
    ) -> Result<Self> {
        let nm = reduced.n_machines;
        if pm.len() != nm || m.len() != nm || ref_delta.len() != nm || cm_mask.len() != nm {
            return Err(SwingError::InvalidInput(
                "machine array lengths disagree with the reduced network".into(),
            ));
        }
        let c_idx: Vec<usize> = (0..nm).filter(|&i| cm_mask[i]).collect();
        let n_idx: Vec<usize> = (0..nm).filter(|&i| !cm_mask[i]).collect();
        if c_idx.is_empty() {
            return Err(SwingError::InvalidInput(
                "equivalent power curve needs a critical group".into(),
            ));
        }
        if n_idx.is_empty() && reduced.fixed_angles.is_empty() {
            return Err(SwingError::InvalidInput(
                "single-group curve needs a fixed bus as reference".into(),
            ));
        }
        let m_c = pairwise_sum_by(c_idx.len(), |k| m[c_idx[k]]);
        let m_n = pairwise_sum_by(n_idx.len(), |k| m[n_idx[k]]);
        let (kappa_c, kappa_n) = if n_idx.is_empty() {
            (1.0, 0.0)
        } else {
            (m_n / (m_c + m_n), m_c / (m_c + m_n))
        };
        let u_ref = if n_idx.is_empty() {
            pairwise_sum_by(c_idx.len(), |k| m[c_idx[k]] * ref_delta[c_idx[k]]) / m_c
        } else {
            pairwise_sum_by(c_idx.len(), |k| m[c_idx[k]] * ref_delta[c_idx[k]]) / m_c
                - pairwise_sum_by(n_idx.len(), |k| m[n_idx[k]] * ref_delta[n_idx[k]]) / m_n
        };

        let dp_eq_at = |u: f64| -> f64 {
            let du = u - u_ref;
            let mut delta = ref_delta.to_vec();
            for &i in &c_idx {
                delta[i] += kappa_c * du;
            }
            for &i in &n_idx {
                delta[i] -= kappa_n * du;
            }
            let pe = reduced.electrical_power(&delta);
            let dp_c = pairwise_sum_by(c_idx.len(), |k| pm[c_idx[k]] - pe[c_idx[k]]);
            if n_idx.is_empty() {
                dp_c
            } else {
                let dp_n = pairwise_sum_by(n_idx.len(), |k| pm[n_idx[k]] - pe[n_idx[k]]);
                (m_n * dp_c - m_c * dp_n) / (m_c + m_n)
            }
        };

        // Single-harmonic fit from four probes; exact for this displacement.
        use std::f64::consts::{FRAC_PI_2, PI};
        let f0 = dp_eq_at(0.0);
        let fpi = dp_eq_at(PI);
        let fp = dp_eq_at(FRAC_PI_2);
        let fn_ = dp_eq_at(-FRAC_PI_2);
        let curve = EquivalentPowerCurve {
            a: 0.5 * (f0 + fpi),
            b: 0.5 * (fp - fn_),
            c: 0.5 * (f0 - fpi),
        };
        debug_assert!(
            (curve.dp_eq(1.234_567) - dp_eq_at(1.234_567)).abs() < 1e-9,
            "rigid-displacement curve is not single-harmonic"
        );
        Ok(curve)
    }

    /// ΔP of the equivalent at equivalent angle u.
    pub fn dp_eq(&self, u: f64) -> f64 {
        self.a + self.b * u.sin() + self.c * u.cos()
    }

    fn slope(&self, u: f64) -> f64 {
        self.b * u.cos() - self.c * u.sin()
    }

    fn roots(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.b.hypot(self.c);
        if r < 1.0e-12 {
            return Err(SwingError::NoConvergence(
                "flat equivalent power curve".into(),
            ));
        }
        let s = -self.a / r;
        if s.abs() > 1.0 {
            return Err(SwingError::NoConvergence(
                "no post-fault equilibrium: the equivalent power curve never crosses zero".into(),
            ));
        }
        let phi = self.c.atan2(self.b); // f = A + R sin(u + φ)
        let base = s.asin();
        let mut stable = Vec::new();
        let mut unstable = Vec::new();
        for k in -2i32..=2 {
            let two_pi_k = 2.0 * std::f64::consts::PI * k as f64;
            let u1 = base - phi + two_pi_k; // slope R·cos(base) ≥ 0
            let u2 = (std::f64::consts::PI - base) - phi + two_pi_k; // slope ≤ 0
            if self.slope(u1) < 0.0 {
                stable.push(u1);
            } else {
                unstable.push(u1);
            }
            if self.slope(u2) < 0.0 {
                stable.push(u2);
            } else {
                unstable.push(u2);
            }
        }
        Ok((stable, unstable))
    }

    fn polish(&self, mut u: f64) -> f64 {
        for _ in 0..50 {
            let f = self.dp_eq(u);
            if f.abs() < 1.0e-10 {
                break;
            }
            u -= f / self.slope(u);
        }
        u
    }

    /// Stable equilibrium angle nearest zero.
    pub fn delta_sep(&self) -> Result<f64> {
        let (stable, _) = self.roots()?;
        let u = stable
            .into_iter()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .ok_or_else(|| SwingError::NoConvergence("no stable equilibrium".into()))?;
        Ok(self.polish(u))
    }

    /// First unstable equilibrium angle above `delta_sep`.
    pub fn delta_u(&self) -> Result<f64> {
        let sep = self.delta_sep()?;
        let (_, unstable) = self.roots()?;
        let u = unstable
            .into_iter()
            .filter(|&u| u > sep + 1.0e-9)
            .min_by(f64::total_cmp)
            .ok_or_else(|| SwingError::NoConvergence("no unstable equilibrium above δ_sep".into()))?;
        Ok(self.polish(u))
    }

    /// The two unstable equilibria bracketing `delta_sep`; the equivalent
    /// can only stay bounded while its angle remains inside this interval.
    pub fn stability_interval(&self) -> Result<(f64, f64)> {
        let sep = self.delta_sep()?;
        let (_, unstable) = self.roots()?;
        let above = unstable
            .iter()
            .copied()
            .filter(|&u| u > sep + 1.0e-9)
            .fold(f64::INFINITY, f64::min);
        let below = unstable
            .iter()
            .copied()
            .filter(|&u| u < sep - 1.0e-9)
            .fold(f64::NEG_INFINITY, f64::max);
        if !above.is_finite() || !below.is_finite() {
            return Err(SwingError::NoConvergence(
                "no unstable equilibria bracketing δ_sep".into(),
            ));
        }
        Ok((self.polish(below), self.polish(above)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::netmodel::{kron_reduce, TopologyState};
    use approx::assert_relative_eq;

    fn smib(t: f64, delta: f64, domega: f64, dp: f64) -> SmibEquivalent {
        SmibEquivalent {
            t,
            delta,
            domega,
            m: 10.0,
            dp,
            mode_id: 7,
        }
    }

    #[test]
    fn quotient_difference_worked_example() {
        let prev = smib(0.0, 0.5, 0.01, 0.6);
        let cur = smib(0.02, 0.6, 0.01, 0.5);
        let c = index_c(&cur, &prev, 1e-4).unwrap();
        assert_relative_eq!(c, -10.0, max_relative = 1e-12);
    }

    #[test]
    fn dead_band_and_sign_and_mode_gates() {
        let prev = smib(0.0, 0.5, 5e-5, 0.6);
        let cur = smib(0.02, 0.6, 0.01, 0.5);
        assert!(index_c(&cur, &prev, 1e-4).is_none(), "dead band");

        let prev = smib(0.0, 0.5, -0.01, 0.6);
        assert!(index_c(&cur, &prev, 1e-4).is_none(), "sign change");

        let mut prev = smib(0.0, 0.5, 0.01, 0.6);
        prev.mode_id = 8;
        assert!(index_c(&cur, &prev, 1e-4).is_none(), "mode change");
    }

    #[test]
    fn slope_difference_worked_example() {
        // Δω = δ² sampled at δ = 1, 2, 3: slopes 3 and 5, so τ = 2.
        let p2 = smib(0.0, 1.0, 1.0, 0.0);
        let p1 = smib(0.02, 2.0, 4.0, 0.0);
        let cur = smib(0.04, 3.0, 9.0, 0.0);
        let tau = index_tau(&cur, &p1, &p2, 1e-9).unwrap();
        assert_relative_eq!(tau, 2.0, max_relative = 1e-12);
        // Stalled angle gates it.
        let stalled = smib(0.04, 2.0 + 1e-12, 9.0, 0.0);
        assert!(index_tau(&stalled, &p1, &p2, 1e-9).is_none());
    }

    #[test]
    fn projection_ratio_boundary_and_degenerate_cases() {
        let a = smib(0.0, 0.9, 0.004, 0.3);
        let b = smib(0.02, 0.9, 0.004, 0.3);
        // Identical consecutive samples sit exactly on the boundary μ = 1.
        assert_relative_eq!(index_mu(&b, &a, 0.5).unwrap(), 1.0);
        // Stationary point at δ_sep with zero slip: 0/0, gated.
        let s1 = smib(0.0, 0.5, 0.0, 0.0);
        let s2 = smib(0.02, 0.5, 0.0, 0.0);
        assert!(index_mu(&s2, &s1, 0.5).is_none());
    }

    #[test]
    fn detector_fires_resets_on_mode_change_and_confirms() {
        let cfg = DetectorConfig {
            confirm_samples: 2,
            ..DetectorConfig::default()
        };
        let mut det = Detector::new(cfg, 50.0);
        // Rising quotient: ΔP/Δω goes 10 → 20 → 40: c > 0 from sample 2.
        let s0 = smib(0.0, 0.1, 0.01, 0.1);
        let s1 = smib(0.02, 0.2, 0.01, 0.2);
        let s2 = smib(0.04, 0.3, 0.01, 0.4);
        assert_eq!(det.update(&s0).verdict, Verdict::Indeterminate);
        assert_eq!(det.update(&s1).verdict, Verdict::Stable); // 1 of 2
        assert_eq!(det.update(&s2).verdict, Verdict::Unstable); // 2 of 2

        // A partition change wipes history: next sample is indeterminate.
        let mut s3 = smib(0.06, 0.4, 0.01, 0.8);
        s3.mode_id = 99;
        assert_eq!(det.update(&s3).verdict, Verdict::Indeterminate);
    }

    #[test]
    fn index_moving_average_delays_single_spikes() {
        let cfg = DetectorConfig {
            index_maf_window: 3,
            ..DetectorConfig::default()
        };
        let mut det = Detector::new(cfg, 50.0);
        // Falling quotient (c = −10 each pair), then one spike pair.
        let mut t = 0.0;
        let mut quotient = 100.0;
        let mut prev_verdicts = Vec::new();
        for k in 0..6 {
            // Spike at k = 4: quotient jumps +15 instead of −10.
            quotient += if k == 4 { 15.0 } else { -10.0 };
            let s = smib(t, 0.1 + 0.01 * k as f64, 0.01, quotient * 0.01);
            prev_verdicts.push(det.update(&s).verdict);
            t += 0.02;
        }
        // Raw c would fire at the spike; the filtered mean (−10, −10, +15)
        // stays negative.
        assert!(prev_verdicts.iter().all(|v| *v != Verdict::Unstable));
    }

    #[test]
    fn decide_rolls_up_first_detection_and_mode_history() {
        let cfg = DetectorConfig::default();
        let mut det = Detector::new(cfg, 50.0);
        let mut samples = Vec::new();
        samples.push(det.update(&smib(0.0, 0.1, 0.01, 0.1)));
        samples.push(det.update(&smib(0.02, 0.2, 0.01, 0.05))); // c < 0
        samples.push(det.update(&smib(0.04, 0.3, 0.01, 0.4))); // c > 0 fires
        let d = decide(&samples);
        assert_eq!(d.verdict, Verdict::Unstable);
        assert_eq!(d.t_s, Some(0.04));
        assert_eq!(d.delta_s, Some(0.3));
        assert_eq!(d.mode_history.len(), 1);
    }

    #[test]
    fn equivalent_curve_reproduces_the_analytic_smib() {
        let scn = cases::analytic_smib_scenario(0.1).unwrap();
        let net = scn.build_network().unwrap();
        let li = net.line_index("Lb").unwrap();
        let red = kron_reduce(&net, &TopologyState::postfault([li])).unwrap();
        let curve = EquivalentPowerCurve::new(
            &red,
            &[0.8],
            &[10.0],
            &[net.machines[0].delta0.unwrap()],
            &[true],
        )
        .unwrap();
        let sep = curve.delta_sep().unwrap();
        let du = curve.delta_u().unwrap();
        assert_relative_eq!(sep, 0.562536244543856, epsilon = 1e-9);
        assert_relative_eq!(du, 2.579056409045938, epsilon = 1e-9);
        assert!(curve.dp_eq(sep).abs() < 1e-10);
    }

    #[test]
    fn equivalent_curve_is_single_harmonic_on_the_nine_bus_system() {
        let net = cases::wscc9_scenario().build_network().unwrap();
        let li = net.line_index("L57").unwrap();
        let red = kron_reduce(&net, &TopologyState::postfault([li])).unwrap();
        let pm: Vec<f64> = net.machines.iter().map(|m| m.pm).collect();
        let m: Vec<f64> = net.machines.iter().map(|m| m.m).collect();
        let refd: Vec<f64> = net.machines.iter().map(|m| m.delta0.unwrap() + 0.2).collect();
        let curve =
            EquivalentPowerCurve::new(&red, &pm, &m, &refd, &[false, true, false]).unwrap();
        let sep = curve.delta_sep().unwrap();
        let du = curve.delta_u().unwrap();
        assert!(du > sep, "δ_u {du} must exceed δ_sep {sep}");
        assert!(curve.dp_eq(sep).abs() < 1e-10);
        assert!(curve.dp_eq(du).abs() < 1e-10);
        // Restoring slope at the stable point, accelerating at the unstable.
        assert!(curve.slope(sep) < 0.0 && curve.slope(du) > 0.0);
    }

    #[test]
    fn overloaded_curve_reports_no_equilibrium() {
        let curve = EquivalentPowerCurve {
            a: 2.0,
            b: -1.5,
            c: 0.0,
        };
        assert!(curve.delta_sep().is_err());
    }
}
