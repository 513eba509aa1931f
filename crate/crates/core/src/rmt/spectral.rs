//! Closed-form spiked-model predictions for an `m x n` signal observed under
//! i.i.d. `N(0, sigma^2)` noise.
//!
//! A planted singular value `lambda` above the detection threshold
//! `sigma (mn)^(1/4)` surfaces as a noisy outlier at
//! `sqrt((lambda + sigma^2 n / lambda)(lambda + sigma^2 m / lambda))`; below it
//! the value is swallowed by the noise bulk, whose edge sits at
//! `sigma (sqrt(m) + sqrt(n))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-entry standard deviation of additive Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoiseSpec {
    sigma: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma == 0.0
    }
}

impl TryFrom<f64> for NoiseSpec {
    type Error = Error;

    fn try_from(sigma: f64) -> Result<Self> {
        Self::new(sigma)
    }
}

impl From<NoiseSpec> for f64 {
    fn from(noise: NoiseSpec) -> f64 {
        noise.sigma
    }
}

/// Largest singular value of the pure-noise bulk, `sigma (sqrt(m) + sqrt(n))`.
pub fn bulk_edge(noise: NoiseSpec, m: usize, n: usize) -> f64 {
    noise.sigma * ((m as f64).sqrt() + (n as f64).sqrt())
}

/// Detection threshold `sigma (mn)^(1/4)`.
pub fn bbp_threshold(noise: NoiseSpec, m: usize, n: usize) -> f64 {
    noise.sigma * ((m as f64).sqrt() * (n as f64).sqrt()).sqrt()
}

/// `lambda * sqrt((1 + r^2 n)(1 + r^2 m))` with `r = sigma / lambda`.
fn forward_unchecked(lambda: f64, sigma: f64, m: f64, n: f64) -> f64 {
    let r = sigma / lambda;
    let r2 = r * r;
    lambda * ((1.0 + r2 * n) * (1.0 + r2 * m)).sqrt()
}

/// Predicted noisy singular value for a supercritical planted value.
pub fn forward_map(lambda: f64, noise: NoiseSpec, m: usize, n: usize) -> Result<f64> {
    let threshold = bbp_threshold(noise, m, n);
    if !(lambda > threshold) || !lambda.is_finite() {
        return Err(Error::Domain { what: "forward_map", value: lambda, bound: threshold });
    }
    Ok(forward_unchecked(lambda, noise.sigma, m as f64, n as f64))
}

/// Recovers the planted value from a noisy singular value above the bulk edge.
///
/// Squaring the forward map gives `t^2 - (y^2 - sigma^2 (m+n)) t + sigma^4 mn = 0`
/// in `t = lambda^2`; the larger root is the supercritical branch. The
/// discriminant is evaluated in factored form,
/// `(y - e)(y + e)(y^2 - sigma^2 (sqrt(m) - sqrt(n))^2)` with `e` the bulk edge,
/// and the problem is rescaled by `y` (the map is 1-homogeneous in
/// `(lambda, sigma)`) so nothing overflows. Bisection takes over if the
/// closed form fails to round-trip.
pub fn invert_map(y: f64, noise: NoiseSpec, m: usize, n: usize) -> Result<f64> {
    let edge = bulk_edge(noise, m, n);
    if !(y > edge) || !y.is_finite() {
        return Err(Error::Domain { what: "invert_map", value: y, bound: edge });
    }
    if noise.is_noiseless() {
        return Ok(y);
    }
    let (mf, nf) = (m as f64, n as f64);
    // Work with y = 1.
    let s = noise.sigma / y;
    let s2 = s * s;
    let e = s * (mf.sqrt() + nf.sqrt());
    let d = s * (mf.sqrt() - nf.sqrt());
    let b = 1.0 - s2 * (mf + nf);
    let disc = ((1.0 - e) * (1.0 + e) * (1.0 - d * d)).max(0.0);
    let t = 0.5 * (b + disc.sqrt());
    let candidate = y * t.sqrt();

    let threshold = bbp_threshold(noise, m, n);
    let round_trip_ok = candidate.is_finite()
        && candidate > threshold
        && (forward_unchecked(candidate, noise.sigma, mf, nf) - y).abs() <= 1e-12 * y;
    if round_trip_ok {
        return Ok(candidate);
    }
    Ok(invert_by_bisection(y, noise.sigma, mf, nf, threshold))
}

fn invert_by_bisection(y: f64, sigma: f64, m: f64, n: f64, threshold: f64) -> f64 {
    // forward(lambda) > lambda, so the root lies below y.
    let (mut lo, mut hi) = (threshold, y);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if forward_unchecked(mid, sigma, m, n) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn alignment(lambda: f64, noise: NoiseSpec, m: usize, n: usize, dim: usize) -> f64 {
    if !(lambda > bbp_threshold(noise, m, n)) {
        return 0.0;
    }
    if lambda.is_infinite() {
        return 1.0;
    }
    // Numerator and denominator divided by lambda^4.
    let r = noise.sigma / lambda;
    let r2 = r * r;
    let value = (1.0 - (m as f64) * (n as f64) * r2 * r2) / (1.0 + dim as f64 * r2);
    value.clamp(0.0, 1.0)
}

/// Predicted squared overlap between planted and noisy left singular vectors,
/// `(lambda^4 - mn sigma^4) / (lambda^4 + m lambda^2 sigma^2)`, or 0 below the
/// detection threshold.
pub fn alignment_left(lambda: f64, noise: NoiseSpec, m: usize, n: usize) -> f64 {
    alignment(lambda, noise, m, n, m)
}

/// Right-vector counterpart of [`alignment_left`], with `n` in the
/// denominator.
pub fn alignment_right(lambda: f64, noise: NoiseSpec, m: usize, n: usize) -> f64 {
    alignment(lambda, noise, m, n, n)
}

/// Optimal Frobenius-loss coefficient for a noisy singular value `y`:
/// `lambda_hat * sqrt(alignment_left) * sqrt(alignment_right)` with
/// `lambda_hat = invert_map(y)` when `y` clears the bulk edge, 0 otherwise.
pub fn optimal_shrinker(y: f64, noise: NoiseSpec, m: usize, n: usize) -> f64 {
    match invert_map(y, noise, m, n) {
        Ok(lambda) => {
            let left = alignment_left(lambda, noise, m, n);
            let right = alignment_right(lambda, noise, m, n);
            (lambda * left.sqrt() * right.sqrt()).clamp(0.0, lambda)
        }
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> NoiseSpec {
        NoiseSpec::new(1.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn hand_values() {
        assert_eq!(bulk_edge(unit(), 100, 100), 20.0);
        assert_eq!(bulk_edge(NoiseSpec::new(0.0).unwrap(), 37, 5), 0.0);
        assert_eq!(forward_map(20.0, unit(), 100, 100).unwrap(), 25.0);
        assert!((invert_map(25.0, unit(), 100, 100).unwrap() - 20.0).abs() < 1e-12);
        assert!((alignment_left(20.0, unit(), 100, 100) - 0.75).abs() < 1e-15);
        assert!((alignment_right(20.0, unit(), 100, 100) - 0.75).abs() < 1e-15);
        assert!((optimal_shrinker(25.0, unit(), 100, 100) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn acceptance_hand_value_for_bbp_example() {
        let noise = NoiseSpec::new(0.1).unwrap();
        let expected = ((3.0 + 4.0 / 3.0) * (3.0f64 + 2.0 / 3.0)).sqrt();
        let got = forward_map(3.0, noise, 200, 400).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 3.986).abs() < 1e-3);
    }

    #[test]
    fn domain_errors() {
        let t = bbp_threshold(unit(), 100, 100);
        assert!(matches!(forward_map(t, unit(), 100, 100), Err(Error::Domain { .. })));
        assert!(forward_map(0.5 * t, unit(), 100, 100).is_err());
        assert!(invert_map(20.0, unit(), 100, 100).is_err());
        assert!(invert_map(19.0, unit(), 100, 100).is_err());
        assert!(NoiseSpec::new(-1.0).is_err());
        assert!(NoiseSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn subcritical_alignment_and_shrinkage_vanish() {
        let t = bbp_threshold(unit(), 100, 300);
        assert_eq!(alignment_left(t, unit(), 100, 300), 0.0);
        assert_eq!(alignment_right(0.3 * t, unit(), 100, 300), 0.0);
        let edge = bulk_edge(unit(), 100, 300);
        assert_eq!(optimal_shrinker(edge, unit(), 100, 300), 0.0);
        assert_eq!(optimal_shrinker(0.5 * edge, unit(), 100, 300), 0.0);
    }

    #[test]
    fn near_edge_inverse_is_finite() {
        let noise = NoiseSpec::new(0.37).unwrap();
        let (m, n) = (123, 457);
        let edge = bulk_edge(noise, m, n);
        let lambda = invert_map(edge * (1.0 + 1e-12), noise, m, n).unwrap();
        let t = bbp_threshold(noise, m, n);
        assert!(lambda.is_finite());
        assert!(lambda > t);
        assert!(rel(lambda, t) < 1e-4, "{lambda} vs {t}");
    }

    #[test]
    fn noiseless_limit_is_identity() {
        let zero = NoiseSpec::new(0.0).unwrap();
        assert_eq!(optimal_shrinker(4.2, zero, 30, 40), 4.2);
        for sigma in [1e-3, 1e-6, 1e-9] {
            let noise = NoiseSpec::new(sigma).unwrap();
            assert!(rel(optimal_shrinker(4.2, noise, 30, 40), 4.2) < 100.0 * sigma);
        }
    }

    #[test]
    fn huge_arguments_do_not_overflow() {
        let noise = NoiseSpec::new(1e150).unwrap();
        let y = 1e160;
        let lambda = invert_map(y, noise, 50, 60).unwrap();
        assert!(rel(forward_map(lambda, noise, 50, 60).unwrap(), y) < 1e-9);
        assert!(alignment_left(1e200, unit(), 10, 10) <= 1.0);
    }

    fn triple() -> impl Strategy<Value = (f64, usize, usize)> {
        (1e-3f64..10.0, 1usize..2000, 1usize..2000)
    }

    proptest! {
        #[test]
        fn threshold_continuity((sigma, m, n) in triple()) {
            let noise = NoiseSpec::new(sigma).unwrap();
            let t = bbp_threshold(noise, m, n);
            let at = forward_unchecked(t, sigma, m as f64, n as f64);
            prop_assert!(rel(at, bulk_edge(noise, m, n)) < 1e-12);
        }

        #[test]
        fn round_trip_and_dominance((sigma, m, n) in triple(), log_ratio in 1e-9f64..4.6) {
            let noise = NoiseSpec::new(sigma).unwrap();
            let y = bulk_edge(noise, m, n) * log_ratio.exp();
            let lambda = invert_map(y, noise, m, n).unwrap();
            prop_assert!(lambda > bbp_threshold(noise, m, n));
            prop_assert!(rel(forward_map(lambda, noise, m, n).unwrap(), y) <= 1e-9);
            let eta = optimal_shrinker(y, noise, m, n);
            prop_assert!(0.0 <= eta && eta <= lambda && lambda <= y);
        }

        #[test]
        fn maps_are_increasing((sigma, m, n) in triple(), a in 1e-6f64..3.0, gap in 1e-6f64..3.0) {
            let noise = NoiseSpec::new(sigma).unwrap();
            let t = bbp_threshold(noise, m, n);
            let (l1, l2) = (t * (1.0 + a), t * (1.0 + a + gap));
            prop_assert!(forward_map(l1, noise, m, n).unwrap() < forward_map(l2, noise, m, n).unwrap());
            let e = bulk_edge(noise, m, n);
            let (y1, y2) = (e * (1.0 + a), e * (1.0 + a + gap));
            prop_assert!(invert_map(y1, noise, m, n).unwrap() < invert_map(y2, noise, m, n).unwrap());
            prop_assert!(forward_map(l1, noise, m, n).unwrap() > e);
        }

        #[test]
        fn square_alignments_coincide(sigma in 1e-3f64..10.0, m in 1usize..2000, lambda in 0.0f64..1e4) {
            let noise = NoiseSpec::new(sigma).unwrap();
            prop_assert_eq!(alignment_left(lambda, noise, m, m), alignment_right(lambda, noise, m, m));
        }
    }
}
