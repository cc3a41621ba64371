//! Measurement emulation: decimation of simulator output to a reporting
//! cycle, the frequency-channel encoding and its inverse, additive
//! measurement noise, and a causal moving-average filter.
//!
//! The frequency channel carries the 2π-scaled per-unit slip used throughout
//! the crate: `f = f0·(1 + Δω/2π)` on the way out and `Δω = 2π·(f − f0)/f0`
//! on the way back, so sampling followed by derivation reproduces the
//! simulator state to rounding error.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwingError};
use crate::simulator::Trajectory;

/// Decimated measurement stream, column-major: `delta[machine][frame]`.
#[derive(Debug, Clone)]
pub struct PmuStream {
    pub machine_ids: Vec<String>,
    pub f0: f64,
    pub t: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub f_hz: Vec<Vec<f64>>,
    pub pm: Vec<Vec<f64>>,
    pub pe: Vec<Vec<f64>>,
}

/// Quantities the detection side actually consumes: rotor angle, slip, and
/// accelerating power ΔP = Pm − Pe.
#[derive(Debug, Clone)]
pub struct DerivedStream {
    pub machine_ids: Vec<String>,
    pub t: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub domega: Vec<Vec<f64>>,
    pub dp: Vec<Vec<f64>>,
}

/// Reporting-cycle bounds (seconds): 10–50 frames per second.
pub const MIN_CYCLE: f64 = 0.02;
pub const MAX_CYCLE: f64 = 0.1;

/// Decimate a trajectory to the reporting cycle, starting at t = 0. The
/// cycle must lie in [0.02, 0.1] s and be a multiple of the integration
/// step.
pub fn sample(traj: &Trajectory, f0: f64, cycle: f64) -> Result<PmuStream> {
    if traj.is_empty() {
        return Err(SwingError::InvalidInput("empty trajectory".into()));
    }
    if !(MIN_CYCLE..=MAX_CYCLE).contains(&cycle) {
        return Err(SwingError::InvalidInput(format!(
            "reporting cycle {cycle} s outside [{MIN_CYCLE}, {MAX_CYCLE}] s"
        )));
    }
    let dt = if traj.t.len() >= 2 {
        traj.t[1] - traj.t[0]
    } else {
        cycle
    };
    let stride_f = cycle / dt;
    let stride = stride_f.round() as usize;
    if stride == 0 || (stride_f - stride as f64).abs() > 1.0e-6 {
        return Err(SwingError::InvalidInput(format!(
            "reporting cycle {cycle} s is not a multiple of the step {dt} s"
        )));
    }
    let n = traj.machine_ids.len();
    let mut out = PmuStream {
        machine_ids: traj.machine_ids.clone(),
        f0,
        t: Vec::new(),
        delta: vec![Vec::new(); n],
        f_hz: vec![Vec::new(); n],
        pm: vec![Vec::new(); n],
        pe: vec![Vec::new(); n],
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut k = 0;
    while k < traj.len() {
        out.t.push(traj.t[k]);
        for i in 0..n {
            out.delta[i].push(traj.delta[i][k]);
            out.f_hz[i].push(f0 * (1.0 + traj.domega[i][k] / two_pi));
            out.pm[i].push(traj.pm[i][k]);
            out.pe[i].push(traj.pe[i][k]);
        }
        k += stride;
    }
    Ok(out)
}

/// Recover slip and accelerating power from a measurement stream:
/// Δω = 2π·(f − f0)/f0, ΔP = Pm − Pe.
pub fn derive(stream: &PmuStream) -> DerivedStream {
    let two_pi = 2.0 * std::f64::consts::PI;
    let n = stream.machine_ids.len();
    let frames = stream.t.len();
    let mut domega = vec![Vec::with_capacity(frames); n];
    let mut dp = vec![Vec::with_capacity(frames); n];
    for i in 0..n {
        for k in 0..frames {
            domega[i].push(two_pi * (stream.f_hz[i][k] - stream.f0) / stream.f0);
            dp[i].push(stream.pm[i][k] - stream.pe[i][k]);
        }
    }
    DerivedStream {
        machine_ids: stream.machine_ids.clone(),
        t: stream.t.clone(),
        delta: stream.delta.clone(),
        domega,
        dp,
    }
}

/// Channels noise can be applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Delta,
    Domega,
    Dp,
}

/// Additive-noise description. `snr_db = f64::INFINITY` leaves the stream
/// untouched. The noise level per machine-channel series is derived from
/// that series' own RMS: σ = RMS / 10^(snr_db/20).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
    pub channels: Vec<Channel>,
}

impl NoiseSpec {
    pub fn all_channels(snr_db: f64, seed: u64) -> Self {
        NoiseSpec {
            snr_db,
            seed,
            channels: vec![Channel::Delta, Channel::Domega, Channel::Dp],
        }
    }
}

fn rms(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    (series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64).sqrt()
}

/// Add zero-mean Gaussian noise, independently per channel and machine.
/// Deterministic for a given spec: draws are consumed in channel-major,
/// machine-major, frame-minor order from a single seeded generator.
pub fn add_noise(stream: &DerivedStream, spec: &NoiseSpec) -> Result<DerivedStream> {
    if stream.t.is_empty() {
        return Err(SwingError::InvalidInput("empty stream".into()));
    }
    let mut out = stream.clone();
    if spec.snr_db == f64::INFINITY {
        return Ok(out);
    }
    if !spec.snr_db.is_finite() {
        return Err(SwingError::InvalidInput(format!(
            "snr_db must be finite or +inf, got {}",
            spec.snr_db
        )));
    }
    let gain = 10.0f64.powf(-spec.snr_db / 20.0);
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    for ch in [Channel::Delta, Channel::Domega, Channel::Dp] {
        if !spec.channels.contains(&ch) {
            continue;
        }
        let series = match ch {
            Channel::Delta => &mut out.delta,
            Channel::Domega => &mut out.domega,
            Channel::Dp => &mut out.dp,
        };
        for s in series.iter_mut() {
            let sigma = rms(s) * gain;
            if sigma == 0.0 {
                continue;
            }
            let normal = Normal::new(0.0, sigma).expect("positive sigma");
            for v in s.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Ok(out)
}

/// Causal trailing mean over `window` samples (shorter prefixes average what
/// is available). `window = 1` is the identity.
pub fn moving_average(stream: &DerivedStream, window: usize) -> Result<DerivedStream> {
    if window == 0 {
        return Err(SwingError::InvalidInput("window must be >= 1".into()));
    }
    let mut out = stream.clone();
    for series in out
        .delta
        .iter_mut()
        .chain(out.domega.iter_mut())
        .chain(out.dp.iter_mut())
    {
        *series = trailing_mean_series(series, window);
    }
    Ok(out)
}

/// Trailing mean of one series.
pub fn trailing_mean_series(x: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for k in 0..x.len() {
        acc += x[k];
        if k >= window {
            acc -= x[k - window];
        }
        let denom = (k + 1).min(window) as f64;
        out.push(acc / denom);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::simulator::integrate;

    fn smib_stream() -> (Trajectory, PmuStream) {
        let scn = cases::analytic_smib_scenario(0.2).unwrap();
        let net = scn.build_network().unwrap();
        let traj = integrate(net, &scn.events, 2.0, 1.0e-3).unwrap();
        let s = sample(&traj, 50.0, 0.02).unwrap();
        (traj, s)
    }

    #[test]
    fn two_second_run_at_20ms_gives_101_frames() {
        let (_, s) = smib_stream();
        assert_eq!(s.t.len(), 101);
        assert_eq!(s.t[0], 0.0);
        assert!((s.t[100] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_bounds_and_alignment_are_enforced() {
        let (traj, _) = smib_stream();
        assert!(sample(&traj, 50.0, 0.01).is_err(), "below 0.02 s");
        assert!(sample(&traj, 50.0, 0.2).is_err(), "above 0.1 s");
        assert!(sample(&traj, 50.0, 0.0205).is_err(), "not a dt multiple");
        assert!(sample(&traj, 50.0, 0.05).is_ok());
    }

    #[test]
    fn slip_definition_matches_the_reference_point() {
        // f = 50.05 Hz on a 50 Hz base ⇒ Δω = 2π·0.001 ≈ 6.2832e-3.
        let s = PmuStream {
            machine_ids: vec!["g".into()],
            f0: 50.0,
            t: vec![0.0],
            delta: vec![vec![0.0]],
            f_hz: vec![vec![50.05]],
            pm: vec![vec![0.0]],
            pe: vec![vec![0.0]],
        };
        let d = derive(&s);
        assert!((d.domega[0][0] - 6.283185307179587e-3).abs() < 1e-15);
    }

    #[test]
    fn sample_then_derive_round_trips_the_slip() {
        let (traj, s) = smib_stream();
        let d = derive(&s);
        for (k, &t) in s.t.iter().enumerate() {
            let step = (t / 1.0e-3).round() as usize;
            let sim = traj.domega[0][step];
            // The frequency channel encodes slip around 1.0, so compare
            // absolutely: the rounding floor is ~1e-16, far below 1e-12.
            assert!(
                (d.domega[0][k] - sim).abs() < 1.0e-12,
                "frame {k}: {} vs {}",
                d.domega[0][k],
                sim
            );
            assert_eq!(d.delta[0][k], traj.delta[0][step]);
            assert_eq!(d.dp[0][k], traj.pm[0][step] - traj.pe[0][step]);
        }
    }

    #[test]
    fn infinite_snr_is_the_identity() {
        let (_, s) = smib_stream();
        let d = derive(&s);
        let n = add_noise(&d, &NoiseSpec::all_channels(f64::INFINITY, 42)).unwrap();
        assert_eq!(d.delta, n.delta);
        assert_eq!(d.domega, n.domega);
        assert_eq!(d.dp, n.dp);
    }

    #[test]
    fn noise_is_deterministic_per_seed_and_respects_channel_subset() {
        let (_, s) = smib_stream();
        let d = derive(&s);
        let a = add_noise(&d, &NoiseSpec::all_channels(40.0, 1)).unwrap();
        let b = add_noise(&d, &NoiseSpec::all_channels(40.0, 1)).unwrap();
        assert_eq!(a.delta, b.delta);
        assert_eq!(a.domega, b.domega);

        let only_dp = add_noise(
            &d,
            &NoiseSpec {
                snr_db: 40.0,
                seed: 1,
                channels: vec![Channel::Dp],
            },
        )
        .unwrap();
        assert_eq!(only_dp.delta, d.delta);
        assert_eq!(only_dp.domega, d.domega);
        assert_ne!(only_dp.dp, d.dp);
    }

    #[test]
    fn noise_rms_tracks_the_requested_snr() {
        // One long constant-free series: realized noise RMS should be the
        // per-channel RMS divided by 10^(SNR/20), within a few percent.
        let n = 10_000;
        let base: Vec<f64> = (0..n).map(|k| (k as f64 * 0.01).sin()).collect();
        let d = DerivedStream {
            machine_ids: vec!["g".into()],
            t: (0..n).map(|k| k as f64).collect(),
            delta: vec![base.clone()],
            domega: vec![base.clone()],
            dp: vec![base.clone()],
        };
        let noisy = add_noise(&d, &NoiseSpec::all_channels(40.0, 9)).unwrap();
        let resid: Vec<f64> = (0..n).map(|k| noisy.delta[0][k] - base[k]).collect();
        let expect = rms(&base) / 100.0;
        let got = rms(&resid);
        assert!(
            (got - expect).abs() / expect < 0.05,
            "noise rms {got} vs expected {expect}"
        );
    }

    #[test]
    fn noise_channels_are_uncorrelated() {
        let n = 10_000;
        let base = vec![1.0; n];
        let d = DerivedStream {
            machine_ids: vec!["g".into()],
            t: (0..n).map(|k| k as f64).collect(),
            delta: vec![base.clone()],
            domega: vec![base.clone()],
            dp: vec![base.clone()],
        };
        let noisy = add_noise(&d, &NoiseSpec::all_channels(20.0, 3)).unwrap();
        let a: Vec<f64> = (0..n).map(|k| noisy.delta[0][k] - 1.0).collect();
        let b: Vec<f64> = (0..n).map(|k| noisy.dp[0][k] - 1.0).collect();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = (0..n).map(|k| (a[k] - ma) * (b[k] - mb)).sum::<f64>() / n as f64;
        let corr = cov / (rms(&a) * rms(&b));
        assert!(corr.abs() < 0.05, "cross-channel correlation {corr}");
    }

    #[test]
    fn window_one_is_identity_and_prefix_averages_partial_windows() {
        let d = DerivedStream {
            machine_ids: vec!["g".into()],
            t: vec![0.0, 1.0, 2.0],
            delta: vec![vec![3.0, 6.0, 9.0]],
            domega: vec![vec![1.0, 1.0, 1.0]],
            dp: vec![vec![0.0, 2.0, 4.0]],
        };
        let id = moving_average(&d, 1).unwrap();
        assert_eq!(id.delta, d.delta);
        let m = moving_average(&d, 3).unwrap();
        assert_eq!(m.delta[0], vec![3.0, 4.5, 6.0]);
        assert_eq!(m.dp[0], vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn moving_average_cuts_white_noise_by_sqrt_window() {
        let n = 10_000;
        let zero = vec![0.0; n];
        let d = DerivedStream {
            machine_ids: vec!["g".into()],
            t: (0..n).map(|k| k as f64).collect(),
            delta: vec![vec![1.0; n]],
            domega: vec![zero.clone()],
            dp: vec![zero],
        };
        // Noise on the constant delta channel: RMS = 1/10^(20/20) = 0.1.
        let noisy = add_noise(
            &d,
            &NoiseSpec {
                snr_db: 20.0,
                seed: 5,
                channels: vec![Channel::Delta],
            },
        )
        .unwrap();
        let filtered = moving_average(&noisy, 5).unwrap();
        let resid: Vec<f64> = filtered.delta[0][5..].iter().map(|v| v - 1.0).collect();
        let got = rms(&resid);
        let expect = 0.1 / (5.0f64).sqrt();
        assert!(
            (got - expect).abs() / expect < 0.15,
            "filtered rms {got} vs {expect}"
        );
    }
}
