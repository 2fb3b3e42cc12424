//! Closed-form mathematics of the transmission model: the channel rate
//! function, the lower-branch Lambert W solver, the rate-power equilibrium
//! (RPE), the slope band in which an RPE exists, the reachable-set predicate,
//! and the time-optimal transmission duration between states.
//!
//! Everything here is a pure function of its inputs and safe to call from any
//! number of threads.

use crate::error::{Error, Result};

/// Supremum of the rate-power-line slopes that admit an RPE: the derivative
/// of `log2(1 + p)` at `p = 0`, i.e. `1/ln 2`.
pub const K_MAX: f64 = std::f64::consts::LOG2_E;

const LN_2: f64 = std::f64::consts::LN_2;
const NEG_INV_E: f64 = -1.0 / std::f64::consts::E;

/// Maximum transmit power constraint.
///
/// Wraps a validated `p_max > 0` and derives the lower edge of the RPE slope
/// band, `K_min = rate(p_max)/p_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    p_max: f64,
}

impl PowerBudget {
    pub fn new(p_max: f64) -> Result<Self> {
        if !p_max.is_finite() || p_max <= 0.0 {
            return Err(Error::Domain(format!(
                "p_max must be finite and positive, got {p_max}"
            )));
        }
        Ok(PowerBudget { p_max })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Lower edge of the slope band: `rate(p_max)/p_max`.
    pub fn k_min(&self) -> f64 {
        rate(self.p_max).expect("p_max > 0") / self.p_max
    }
}

/// Slope of a rate-power line in the rate-power plane. Strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SlopeK(f64);

impl SlopeK {
    pub fn new(k: f64) -> Result<Self> {
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::Domain(format!(
                "slope k must be finite and positive, got {k}"
            )));
        }
        Ok(SlopeK(k))
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

/// Channel rate at transmit power `p`: `log2(1 + p)`.
///
/// Strictly increasing and concave with `rate(0) = 0`.
pub fn rate(p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("power must be >= 0, got {p}")));
    }
    Ok(p.ln_1p() / LN_2)
}

/// Lower branch `W_{-1}` of the real Lambert W function on `[-1/e, 0)`.
///
/// Returns the `w <= -1` with `w * exp(w) = x`, to an absolute residual of
/// 1e-12. Implemented as a bracketed bisection on `[-700, -1]` followed by
/// Halley refinement; arguments within 1e-14 of the branch point `-1/e` snap
/// to exactly `-1`, where raw iteration loses accuracy.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    if !x.is_finite() || x >= 0.0 || x < NEG_INV_E - 1e-14 {
        return Err(Error::Domain(format!(
            "lambert_w_m1 requires -1/e <= x < 0, got {x}"
        )));
    }
    if (x - NEG_INV_E).abs() <= 1e-14 {
        return Ok(-1.0);
    }

    // g(w) = w e^w is strictly decreasing on [-700, -1], from ~0- down to -1/e.
    let mut lo = -700.0_f64;
    let mut hi = -1.0_f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() > x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    let mut w = 0.5 * (lo + hi);

    // Halley polish on f(w) = w e^w - x.
    for _ in 0..3 {
        let ew = w.exp();
        let f = w * ew - x;
        let f1 = (1.0 + w) * ew;
        if f1.abs() < 1e-300 {
            break;
        }
        let f2 = (2.0 + w) * ew;
        let denom = f1 - 0.5 * f * f2 / f1;
        if denom == 0.0 {
            break;
        }
        let next = w - f / denom;
        // keep the iterate on the lower branch
        if next <= -1.0 && next.is_finite() {
            w = next;
        }
    }
    Ok(w)
}

/// The slope band `(K_min, K_max)` of the budget: an RPE exists for a slope
/// `k` iff `K_min <= k < K_max`.
pub fn k_constants(budget: PowerBudget) -> (f64, f64) {
    (budget.k_min(), K_MAX)
}

/// Transmit power of the rate-power equilibrium for slope `k`, when it exists.
///
/// The RPE is the positive intersection of `r = k*p` with `r = log2(1 + p)`
/// on `(0, p_max]`; its power is
/// `p_e = -(1/(k ln 2)) * W_{-1}(-k ln 2 * 2^{-k}) - 1`.
/// Returns `None` when `k` lies outside `[K_min, K_max)` — out-of-band slopes
/// are legitimate queries, not errors. The comparison against `K_max` is a
/// strict `<` with no tolerance; the tie at `K_min` is inclusive.
pub fn rpe_power(k: SlopeK, budget: PowerBudget) -> Option<f64> {
    let k = k.get();
    if k < budget.k_min() || k >= K_MAX {
        return None;
    }
    let arg = -k * LN_2 * (-k).exp2();
    let w = lambert_w_m1(arg).expect("in-band slope maps into [-1/e, 0)");
    let p = -w / (k * LN_2) - 1.0;
    // k = K_min puts the equilibrium exactly at p_max; round-off may land a
    // hair above it.
    Some(p.min(budget.p_max()))
}

/// Whether the state `(e_end, q_end)` is reachable from `(e_start, q_start)`
/// by some planned transmission within the power budget.
///
/// True iff the end state equals the start state, or both coordinates
/// strictly decrease (to nonnegative values) and the connecting slope
/// `(q_start - q_end)/(e_start - e_end)` lies in `[K_min, K_max)`.
pub fn reachable(
    e_start: f64,
    q_start: f64,
    e_end: f64,
    q_end: f64,
    budget: PowerBudget,
) -> Result<bool> {
    for (name, v) in [
        ("e_start", e_start),
        ("q_start", q_start),
        ("e_end", e_end),
        ("q_end", q_end),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    if e_end == e_start && q_end == q_start {
        return Ok(true);
    }
    if e_end >= e_start || q_end >= q_start {
        return Ok(false);
    }
    let k = (q_start - q_end) / (e_start - e_end);
    Ok(k >= budget.k_min() && k < K_MAX)
}

/// Minimum transmission time to move from `(e_start, q_start)` to
/// `(e_end, q_end)`, achieved by transmitting constantly at the RPE power of
/// the connecting slope: `T = (q_start - q_end)/rate(p_e) =
/// (e_start - e_end)/p_e`. The degenerate end point equal to the start takes
/// zero time.
pub fn optimal_duration(
    e_start: f64,
    q_start: f64,
    e_end: f64,
    q_end: f64,
    budget: PowerBudget,
) -> Result<f64> {
    if !reachable(e_start, q_start, e_end, q_end, budget)? {
        return Err(Error::Domain(format!(
            "end point ({e_end}, {q_end}) is not reachable from ({e_start}, {q_start})"
        )));
    }
    if e_end == e_start && q_end == q_start {
        return Ok(0.0);
    }
    let k = SlopeK::new((q_start - q_end) / (e_start - e_end))?;
    let p_e = rpe_power(k, budget).expect("reachable implies in-band slope");
    Ok((e_start - e_end) / p_e)
}

/// RPE power at the energy-balanced slope `q/e`; transmitting at it for
/// `e / p_bal` time units empties the battery and clears the queue at the
/// same instant.
pub fn balanced_power(e: f64, q: f64, budget: PowerBudget) -> Result<f64> {
    if !(e > 0.0 && e.is_finite()) || !(q >= 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!(
            "balanced_power requires e > 0 and q >= 0, got e={e}, q={q}"
        )));
    }
    let k_bal = q / e;
    rpe_power(SlopeK::new(k_bal)?, budget).ok_or_else(|| {
        Error::Domain(format!(
            "balanced slope {k_bal} lies outside [{}, {K_MAX})",
            budget.k_min()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(p_max: f64) -> PowerBudget {
        PowerBudget::new(p_max).unwrap()
    }

    #[test]
    fn rate_known_points() {
        assert_eq!(rate(0.0).unwrap(), 0.0);
        assert!((rate(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((rate(3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(rate(-0.5).is_err());
    }

    #[test]
    fn rate_increasing_concave() {
        let mut prev = 0.0;
        let mut prev_inc = f64::INFINITY;
        for i in 1..=1000 {
            let p = i as f64 * 0.01;
            let r = rate(p).unwrap();
            let inc = r - prev;
            assert!(r > prev, "not increasing at p={p}");
            assert!(inc < prev_inc, "not concave at p={p}");
            prev = r;
            prev_inc = inc;
        }
    }

    #[test]
    fn lambert_branch_point_and_analytic_value() {
        assert_eq!(lambert_w_m1(NEG_INV_E).unwrap(), -1.0);
        // x = -(ln 2)/2 corresponds to w = -2 ln 2
        let w = lambert_w_m1(-LN_2 / 2.0).unwrap();
        assert!((w - (-2.0 * LN_2)).abs() < 1e-12, "w = {w}");
    }

    #[test]
    fn lambert_frozen_bisection_value() {
        // independent oracle: bisection of w e^w = -0.1 over [-50, -1]
        let w = lambert_w_m1(-0.1).unwrap();
        assert!((w - (-3.577152063957297)).abs() < 1e-11, "w = {w}");
    }

    #[test]
    fn lambert_residual_across_domain() {
        for i in 1..=500 {
            let x = NEG_INV_E + (i as f64 / 501.0) * (-1e-9 - NEG_INV_E);
            let w = lambert_w_m1(x).unwrap();
            assert!(w <= -1.0 + 1e-12);
            assert!((w * w.exp() - x).abs() <= 1e-12, "residual at x={x}");
        }
    }

    #[test]
    fn lambert_domain_errors() {
        assert!(lambert_w_m1(0.0).is_err());
        assert!(lambert_w_m1(0.5).is_err());
        assert!(lambert_w_m1(NEG_INV_E - 1e-6).is_err());
        assert!(lambert_w_m1(f64::NAN).is_err());
    }

    #[test]
    fn k_constants_examples() {
        let (kmin, kmax) = k_constants(budget(3.0));
        assert!((kmin - 2.0 / 3.0).abs() < 1e-15);
        assert!((kmax - 1.4426950408889634).abs() < 1e-15);
        let (kmin, _) = k_constants(budget(1.0));
        assert!((kmin - 1.0).abs() < 1e-15);
        // K_min -> K_max as p_max -> 0+
        let (kmin, kmax) = k_constants(budget(1e-9));
        assert!((kmin - kmax).abs() < 1e-9);
    }

    #[test]
    fn rpe_power_examples() {
        let b = budget(3.0);
        let p = rpe_power(SlopeK::new(1.0).unwrap(), b).unwrap();
        assert!((p - 1.0).abs() < 1e-10, "p = {p}");
        let p = rpe_power(SlopeK::new(2.0 / 3.0).unwrap(), b).unwrap();
        assert!((p - 3.0).abs() < 1e-10, "p = {p}");
        // frozen bisection oracle value for k = 1.2
        let p = rpe_power(SlopeK::new(1.2).unwrap(), b).unwrap();
        assert!((p - 0.43007924132793507).abs() < 1e-10, "p = {p}");
    }

    #[test]
    fn rpe_power_out_of_band() {
        let b = budget(3.0);
        assert!(rpe_power(SlopeK::new(0.5).unwrap(), b).is_none());
        assert!(rpe_power(SlopeK::new(K_MAX).unwrap(), b).is_none());
        assert!(rpe_power(SlopeK::new(10.0).unwrap(), b).is_none());
        assert!(SlopeK::new(-1.0).is_err());
        assert!(SlopeK::new(0.0).is_err());
    }

    #[test]
    fn rpe_power_strictly_decreasing() {
        let b = budget(3.0);
        let (kmin, kmax) = k_constants(b);
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let k = kmin + (i as f64 / 1000.0) * (kmax - kmin);
            let p = rpe_power(SlopeK::new(k).unwrap(), b).unwrap();
            assert!(p < prev, "not strictly decreasing at k={k}");
            prev = p;
        }
    }

    #[test]
    fn reachable_examples() {
        let b = budget(3.0);
        assert!(reachable(1.0, 1.0, 0.0, 0.0, b).unwrap());
        assert!(!reachable(1.0, 1.0, 0.9, 0.99, b).unwrap());
        assert!(reachable(1.0, 1.0, 1.0, 1.0, b).unwrap());
        // growth in either coordinate is unreachable
        assert!(!reachable(1.0, 1.0, 1.1, 0.5, b).unwrap());
        assert!(!reachable(1.0, 1.0, 0.5, 1.1, b).unwrap());
        assert!(reachable(1.0, 1.0, -0.1, 0.0, b).is_err());
    }

    #[test]
    fn optimal_duration_examples() {
        let b = budget(3.0);
        let t = optimal_duration(1.0, 1.0, 0.0, 0.0, b).unwrap();
        assert!((t - 1.0).abs() < 1e-10);
        assert_eq!(optimal_duration(1.0, 1.0, 1.0, 1.0, b).unwrap(), 0.0);
        // end point on the k = 1.2 ray; oracle = (e_start - e_end)/rpe_power(1.2)
        let t = optimal_duration(1.0, 1.0, 0.355, 0.226, b).unwrap();
        assert!((t - 1.4997236276935022).abs() < 1e-9, "t = {t}");
        assert!(optimal_duration(1.0, 1.0, 0.9, 0.99, b).is_err());
    }

    #[test]
    fn optimal_duration_two_expressions_agree() {
        let b = budget(3.0);
        let (kmin, kmax) = k_constants(b);
        for i in 0..200 {
            // strictly interior k: the q_end -> slope roundtrip can shift the
            // boundary by an ulp
            let k = kmin + ((i as f64 + 0.5) / 200.0) * (kmax - kmin);
            let e_end = 0.3;
            let q_end = 1.0 - k * (1.0 - e_end);
            if q_end < 0.0 {
                continue;
            }
            let t = optimal_duration(1.0, 1.0, e_end, q_end, b).unwrap();
            let p_e = rpe_power(SlopeK::new(k).unwrap(), b).unwrap();
            let t_q = (1.0 - q_end) / rate(p_e).unwrap();
            assert!(((t - t_q) / t).abs() < 1e-10, "k={k}: {t} vs {t_q}");
        }
    }

    #[test]
    fn balanced_power_examples() {
        let b = budget(3.0);
        assert!((balanced_power(1.0, 1.0, b).unwrap() - 1.0).abs() < 1e-10);
        assert!((balanced_power(1.0, 2.0 / 3.0, b).unwrap() - 3.0).abs() < 1e-10);
        assert!((balanced_power(1.0, 1.2, b).unwrap() - 0.43007924132793507).abs() < 1e-10);
        // ratio outside the band
        assert!(balanced_power(1.0, 0.1, b).is_err());
        assert!(balanced_power(1.0, 2.0, b).is_err());
        assert!(balanced_power(0.0, 1.0, b).is_err());
    }

    #[test]
    fn duration_increases_with_residual_energy() {
        // with q_end fixed, leaving more energy behind takes strictly longer
        let b = budget(3.0);
        let q_end = 0.2;
        let mut prev = -1.0;
        for i in 0..44 {
            let e_end = i as f64 * 0.01;
            let t = optimal_duration(1.0, 1.0, e_end, q_end, b).unwrap();
            assert!(t > prev, "not increasing at e_end={e_end}");
            prev = t;
        }
    }
}
