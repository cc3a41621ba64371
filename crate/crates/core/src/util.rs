//! Small numeric and hashing helpers shared across modules.

/// Degrees to radians.
#[inline]
pub fn deg_to_rad(deg: f64) -> f64 {
    deg * std::f64::consts::PI / 180.0
}

/// Radians to degrees.
#[inline]
pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / std::f64::consts::PI
}

/// Pairwise (tree) summation.
///
/// Splitting the slice recursively keeps the error growth at
/// `O(eps * log n)` instead of the `O(eps * n)` of a running sum, which is
/// what lets the two aggregation orders in the equivalence layer agree to
/// relative 1e-12 even for fleets of 1e5 machines.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` over `0..n` without materializing a vector for
/// small `n`; callers with large `n` should collect once and reuse.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= 32 {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, n, &f)
}

/// FNV-1a 64-bit hash over a byte stream: cheap, dependency-free, and
/// deterministic across runs/platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Hash of a single machine id, finished with an avalanche mix so that XOR
/// folds of near-identical ids ("G17" vs "G18") stay well distributed.
pub fn id_fold(id: &str) -> u64 {
    // splitmix64 finisher.
    let mut z = fnv1a64(id.as_bytes());
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable identifier for a critical-machine set: XOR of [`id_fold`] over
/// the members. Order-independent by construction, and the identifier of a
/// disjoint union is the XOR of the per-part identifiers — a combiner can
/// merge per-group folds without ever materializing a member list. The
/// empty set folds to zero.
pub fn mode_id<I>(ids: I) -> u64
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    ids.into_iter().fold(0, |acc, id| acc ^ id_fold(id.as_ref()))
}

/// Relative closeness with an absolute floor: true when
/// |a − b| ≤ tol·max(|a|, |b|) or |a − b| ≤ tol. The floor covers values
/// that cancel toward zero (e.g. a group-angle difference crossing zero),
/// where a pure relative test would demand agreement below rounding noise.
pub fn close_rel_floor(a: f64, b: f64, tol: f64) -> bool {
    let diff = (a - b).abs();
    diff <= tol * a.abs().max(b.abs()) || diff <= tol
}
