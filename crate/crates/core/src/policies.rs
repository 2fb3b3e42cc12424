//! Transmission planners: at each triggered event a planner maps the state
//! the transmitter can see (battery, queue, previous-event record) to a
//! constant-power planned transmission.
//!
//! `plan_robust` is the minimax-optimal design; `plan_estimation` and
//! `plan_greedy` are the comparison baselines. Planners are pure and total
//! over valid contexts.

use crate::error::{Error, Result};
use crate::rate_math::{balanced_power, rate, PowerBudget, K_MAX};

/// A planned transmission: a constant power level held for a planned
/// duration. `duration == 0` implies `power == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedTransmission {
    pub power: f64,
    pub duration: f64,
}

impl PlannedTransmission {
    /// The do-nothing plan.
    pub const IDLE: PlannedTransmission = PlannedTransmission { power: 0.0, duration: 0.0 };
}

/// Record of the previous event, for the estimation baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrevEvent {
    /// Trigger time of the previous event.
    pub t: f64,
    /// Battery energy at the previous event.
    pub e: f64,
    /// Energy harvested over the previous inter-event interval, as observed
    /// through the battery readings and the transmitter's own consumption.
    pub harvested: f64,
}

/// Everything a planner may look at when an event triggers.
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext {
    /// Time of the current event.
    pub t: f64,
    /// Battery energy at the current event.
    pub e: f64,
    /// Data-queue length at the current event.
    pub q: f64,
    /// Previous-event record; `None` at event 0.
    pub prev: Option<PrevEvent>,
    pub budget: PowerBudget,
    /// Triggering threshold the event detector runs with.
    pub epsilon: f64,
}

/// Selects one of the built-in planners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    RobustOptimal,
    EstimationBased { scale: f64 },
    Greedy,
}

impl PolicyKind {
    /// The estimation-based baseline (full-weight harvest estimate).
    pub const ESTIMATION: PolicyKind = PolicyKind::EstimationBased { scale: 1.0 };
    /// The modified estimation-based baseline (quarter-weight estimate).
    pub const MODIFIED: PolicyKind = PolicyKind::EstimationBased { scale: 0.25 };

    /// Parses a policy selection string: `robust`, `estimation`,
    /// `estimation-modified`, or `greedy`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(PolicyKind::RobustOptimal),
            "estimation" => Ok(PolicyKind::ESTIMATION),
            "estimation-modified" => Ok(PolicyKind::MODIFIED),
            "greedy" => Ok(PolicyKind::Greedy),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected robust, estimation, estimation-modified, or greedy)"
            ))),
        }
    }

    /// Canonical label used in CSV output and configs.
    pub fn label(&self) -> String {
        match self {
            PolicyKind::RobustOptimal => "robust".into(),
            PolicyKind::EstimationBased { scale } if *scale == 1.0 => "estimation".into(),
            PolicyKind::EstimationBased { scale } if *scale == 0.25 => "estimation-modified".into(),
            PolicyKind::EstimationBased { scale } => format!("estimation-{scale}"),
            PolicyKind::Greedy => "greedy".into(),
        }
    }
}

/// Energy-balanced slope of a context, `q/e`, taken as infinite for an empty
/// battery with data pending.
fn balanced_slope(e: f64, q: f64) -> f64 {
    if e == 0.0 {
        f64::INFINITY
    } else {
        q / e
    }
}

/// The minimax-optimal planner.
///
/// Classifies the event by the balanced slope `K_bal = q/e`:
/// below `K_min` the battery is abundant and the plan clears the queue at
/// maximum power; inside `[K_min, K_max)` the plan transmits at the balanced
/// power, emptying battery and queue together; at or above `K_max` the queue
/// is unclearable with the energy at hand and the plan transmits nothing.
pub fn plan_robust(ctx: &PolicyContext) -> PlannedTransmission {
    if ctx.q <= 0.0 {
        return PlannedTransmission::IDLE;
    }
    let k_bal = balanced_slope(ctx.e, ctx.q);
    let p_max = ctx.budget.p_max();
    if k_bal < ctx.budget.k_min() {
        let r_max = rate(p_max).expect("p_max > 0");
        PlannedTransmission { power: p_max, duration: ctx.q / r_max }
    } else if k_bal < K_MAX {
        let p_bal = balanced_power(ctx.e, ctx.q, ctx.budget).expect("slope in band");
        PlannedTransmission { power: p_bal, duration: ctx.e / p_bal }
    } else {
        PlannedTransmission::IDLE
    }
}

/// The estimation-based planner.
///
/// Same branch structure as the robust planner, but in the balanced branch it
/// adds `scale` times the average harvesting rate observed over the previous
/// inter-event interval, betting that the future rate matches the past. The
/// power is clipped at `p_max`; the hard power constraint dominates.
pub fn plan_estimation(ctx: &PolicyContext, scale: f64) -> Result<PlannedTransmission> {
    if ctx.q <= 0.0 {
        return Ok(PlannedTransmission::IDLE);
    }
    let delta_p = match &ctx.prev {
        None => 0.0,
        Some(prev) => {
            let dt = ctx.t - prev.t;
            if dt <= 0.0 {
                return Err(Error::Domain(format!(
                    "degenerate inter-event interval: t_prev={} >= t={}",
                    prev.t, ctx.t
                )));
            }
            prev.harvested / dt
        }
    };
    let k_bal = balanced_slope(ctx.e, ctx.q);
    let p_max = ctx.budget.p_max();
    if k_bal < ctx.budget.k_min() {
        let r_max = rate(p_max).expect("p_max > 0");
        Ok(PlannedTransmission { power: p_max, duration: ctx.q / r_max })
    } else if k_bal < K_MAX {
        let p_bal = balanced_power(ctx.e, ctx.q, ctx.budget).expect("slope in band");
        let power = (p_bal + scale * delta_p).min(p_max);
        if power <= 0.0 {
            return Ok(PlannedTransmission::IDLE);
        }
        Ok(PlannedTransmission { power, duration: ctx.e / power })
    } else {
        Ok(PlannedTransmission::IDLE)
    }
}

/// The greedy planner: full power whenever both energy and data remain.
pub fn plan_greedy(ctx: &PolicyContext) -> PlannedTransmission {
    if ctx.e > 0.0 && ctx.q > 0.0 {
        let p_max = ctx.budget.p_max();
        let r_max = rate(p_max).expect("p_max > 0");
        PlannedTransmission {
            power: p_max,
            duration: (ctx.e / p_max).min(ctx.q / r_max),
        }
    } else {
        PlannedTransmission::IDLE
    }
}

/// Dispatches to the planner selected by `kind`.
pub fn plan(kind: PolicyKind, ctx: &PolicyContext) -> Result<PlannedTransmission> {
    match kind {
        PolicyKind::RobustOptimal => Ok(plan_robust(ctx)),
        PolicyKind::EstimationBased { scale } => plan_estimation(ctx, scale),
        PolicyKind::Greedy => Ok(plan_greedy(ctx)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_math::k_constants;

    fn ctx(e: f64, q: f64, p_max: f64) -> PolicyContext {
        PolicyContext {
            t: 0.0,
            e,
            q,
            prev: None,
            budget: PowerBudget::new(p_max).unwrap(),
            epsilon: 0.05,
        }
    }

    fn with_prev(mut c: PolicyContext, t: f64, dt: f64, harvested: f64) -> PolicyContext {
        c.t = t;
        c.prev = Some(PrevEvent { t: t - dt, e: 0.0, harvested });
        c
    }

    #[test]
    fn robust_three_branches() {
        let p = plan_robust(&ctx(1.0, 1.0, 3.0));
        assert!((p.power - 1.0).abs() < 1e-10 && (p.duration - 1.0).abs() < 1e-10);

        // energy-scarce: transmit nothing
        assert_eq!(plan_robust(&ctx(0.2, 1.0, 3.0)), PlannedTransmission::IDLE);

        // energy-abundant: K_bal = 0.2 < K_min = 2/3
        let p = plan_robust(&ctx(10.0, 2.0, 3.0));
        assert!((p.power - 3.0).abs() < 1e-12 && (p.duration - 1.0).abs() < 1e-12);

        // cleared queue and empty battery corner cases
        assert_eq!(plan_robust(&ctx(1.0, 0.0, 3.0)), PlannedTransmission::IDLE);
        assert_eq!(plan_robust(&ctx(0.0, 1.0, 3.0)), PlannedTransmission::IDLE);
    }

    #[test]
    fn robust_middle_branch_exhausts_both() {
        let b = PowerBudget::new(3.0).unwrap();
        let (kmin, kmax) = k_constants(b);
        for i in 0..100 {
            let k = kmin + (i as f64 + 0.5) / 100.0 * (kmax - kmin);
            let e = 0.8;
            let c = ctx(e, k * e, 3.0);
            let p = plan_robust(&c);
            let spent = p.power * p.duration;
            let sent = rate(p.power).unwrap() * p.duration;
            assert!(((spent - c.e) / c.e).abs() < 1e-9, "battery residual at k={k}");
            assert!(((sent - c.q) / c.q).abs() < 1e-9, "queue residual at k={k}");
        }
    }

    #[test]
    fn robust_first_branch_leaves_energy() {
        for &(e, q) in &[(10.0, 2.0), (2.0, 1.0), (5.0, 0.1)] {
            let c = ctx(e, q, 3.0);
            let p = plan_robust(&c);
            assert_eq!(p.power, 3.0);
            let residual = e - p.power * p.duration;
            assert!(residual >= 0.0, "negative residual for e={e}, q={q}");
            // end point matches (e - q/K_min, 0)
            let k_min = c.budget.k_min();
            assert!((residual - (e - q / k_min)).abs() < 1e-9);
        }
    }

    #[test]
    fn estimation_examples() {
        // event 0 coincides with robust
        let p = plan_estimation(&ctx(1.0, 1.0, 3.0), 1.0).unwrap();
        assert!((p.power - 1.0).abs() < 1e-10 && (p.duration - 1.0).abs() < 1e-10);

        // middle branch with p_bal = 1 and observed rate 0.5
        let c = with_prev(ctx(1.0, 1.0, 3.0), 1.0, 0.1, 0.05);
        let p = plan_estimation(&c, 1.0).unwrap();
        assert!((p.power - 1.5).abs() < 1e-10, "power = {}", p.power);
        assert!((p.duration - 2.0 / 3.0).abs() < 1e-10);

        // clipping at p_max: pick q/e whose balanced power is ~2.9
        let q = rate(2.9).unwrap() / 2.9;
        let c = with_prev(ctx(1.0, q, 3.0), 1.0, 0.1, 0.05);
        let p = plan_estimation(&c, 1.0).unwrap();
        assert_eq!(p.power, 3.0);
        assert!((p.duration - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn estimation_degenerate_interval() {
        let mut c = ctx(1.0, 1.0, 3.0);
        c.prev = Some(PrevEvent { t: 0.0, e: 1.0, harvested: 0.05 });
        assert!(plan_estimation(&c, 1.0).is_err());
    }

    #[test]
    fn estimation_with_zero_delta_matches_robust() {
        for &(e, q) in &[(1.0, 1.0), (10.0, 2.0), (0.2, 1.0), (0.7, 0.9), (1.0, 0.0)] {
            let c = with_prev(ctx(e, q, 3.0), 2.0, 0.5, 0.0);
            for scale in [1.0, 0.25, 7.0] {
                assert_eq!(plan_estimation(&c, scale).unwrap(), plan_robust(&c));
            }
        }
    }

    #[test]
    fn greedy_examples() {
        let p = plan_greedy(&ctx(1.0, 1.0, 3.0));
        assert!((p.power - 3.0).abs() < 1e-12 && (p.duration - 1.0 / 3.0).abs() < 1e-12);

        let p = plan_greedy(&ctx(10.0, 1.0, 3.0));
        assert!((p.duration - 0.5).abs() < 1e-12, "queue-limited duration");

        assert_eq!(plan_greedy(&ctx(0.0, 1.0, 3.0)), PlannedTransmission::IDLE);
    }

    #[test]
    fn dispatch() {
        let c = ctx(1.0, 1.0, 3.0);
        assert_eq!(plan(PolicyKind::RobustOptimal, &c).unwrap(), plan_robust(&c));
        assert_eq!(
            plan(PolicyKind::ESTIMATION, &c).unwrap(),
            plan_estimation(&c, 1.0).unwrap()
        );
        let g = ctx(0.2, 1.0, 3.0);
        let p = plan(PolicyKind::Greedy, &g).unwrap();
        assert!((p.duration - 0.2 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn labels_round_trip() {
        for s in ["robust", "estimation", "estimation-modified", "greedy"] {
            assert_eq!(PolicyKind::parse(s).unwrap().label(), s);
        }
        assert!(PolicyKind::parse("clairvoyant").is_err());
    }

    #[test]
    fn planner_outputs_within_bounds() {
        let grid = [0.0, 0.01, 0.2, 0.69, 1.0, 3.0, 10.0];
        for &e in &grid {
            for &q in &grid {
                let base = ctx(e, q, 3.0);
                let with = with_prev(ctx(e, q, 3.0), 1.0, 0.25, 0.4);
                for c in [base, with] {
                    for kind in [
                        PolicyKind::RobustOptimal,
                        PolicyKind::ESTIMATION,
                        PolicyKind::MODIFIED,
                        PolicyKind::Greedy,
                    ] {
                        let p = plan(kind, &c).unwrap();
                        assert!(p.power >= 0.0 && p.power <= 3.0, "{kind:?} power {}", p.power);
                        assert!(p.duration.is_finite() && p.duration >= 0.0);
                        if p.duration == 0.0 {
                            assert_eq!(p.power, 0.0);
                        }
                    }
                }
            }
        }
    }
}
