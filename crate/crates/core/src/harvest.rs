//! Energy-harvesting-rate profiles `H: [0, inf) -> R+`, evaluable at any
//! time and exactly integrable over intervals.
//!
//! Deterministic variants are immutable values. The stochastic variant
//! derives its whole sample path from its seed; the path is lazily extended
//! and cached behind a lock, so repeated integration over overlapping windows
//! is consistent. A profile instance still belongs to one simulation run at a
//! time — the lock guards the cache, not the sampling contract.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// An energy-harvesting-rate profile.
#[derive(Debug, Clone)]
pub enum HarvestProfile {
    /// No energy ever arrives. The worst case for the robust policy.
    Zero,
    /// Piecewise-constant rate: `(t_start, rate)` breakpoints, strictly
    /// ascending in time; the last rate holds forever.
    PiecewiseConstant(Vec<(f64, f64)>),
    /// `amplitude * |sin t|` on `[0, window_end]`, zero afterwards.
    WindowedAbsSin { amplitude: f64, window_end: f64 },
    /// Marked Poisson arrivals: at each arrival `tau_i` (rate `poisson_rate`)
    /// a mark `D_i ~ Normal(amplitude * |sin tau_i|, mark_variance)` is drawn
    /// and `max(D_i, 0)` is held as the rate until the next arrival.
    CompoundPoissonSin(CompoundPoissonSin),
}

impl HarvestProfile {
    pub fn piecewise_constant(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Config("piecewise profile needs at least one breakpoint".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(t, r) in &breakpoints {
            if !t.is_finite() || t < 0.0 || t <= prev {
                return Err(Error::Config(format!(
                    "breakpoint times must be nonnegative and strictly increasing, got {t}"
                )));
            }
            if !r.is_finite() || r < 0.0 {
                return Err(Error::Config(format!("harvest rates must be >= 0, got {r}")));
            }
            prev = t;
        }
        Ok(HarvestProfile::PiecewiseConstant(breakpoints))
    }

    pub fn windowed_abs_sin(amplitude: f64, window_end: f64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::Config(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !window_end.is_finite() || window_end < 0.0 {
            return Err(Error::Config(format!("window_end must be >= 0, got {window_end}")));
        }
        Ok(HarvestProfile::WindowedAbsSin { amplitude, window_end })
    }

    pub fn compound_poisson_sin(
        amplitude: f64,
        poisson_rate: f64,
        mark_variance: f64,
        seed: u64,
    ) -> Result<Self> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::Config(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !poisson_rate.is_finite() || poisson_rate <= 0.0 {
            return Err(Error::Config(format!("poisson_rate must be > 0, got {poisson_rate}")));
        }
        if !mark_variance.is_finite() || mark_variance < 0.0 {
            return Err(Error::Config(format!("mark_variance must be >= 0, got {mark_variance}")));
        }
        Ok(HarvestProfile::CompoundPoissonSin(CompoundPoissonSin::new(
            amplitude,
            poisson_rate,
            mark_variance,
            seed,
        )))
    }

    /// Scenario 1 family: rate `h` on `[0, 0.2)`, then `h/10` forever.
    pub fn scenario1(h: f64) -> Result<Self> {
        Self::piecewise_constant(vec![(0.0, h), (0.2, h / 10.0)])
    }

    /// Scenario 2 family: `a*|sin t|` on `[0, 1]`, zero afterwards.
    pub fn scenario2(a: f64) -> Result<Self> {
        Self::windowed_abs_sin(a, 1.0)
    }

    /// Scenario 3 family: marked Poisson arrivals with rate 2, mark mean
    /// `a*|sin t|` and variance 1.
    pub fn scenario3(a: f64, seed: u64) -> Result<Self> {
        Self::compound_poisson_sin(a, 2.0, 1.0, seed)
    }

    /// Instantaneous harvesting rate `H(t)`.
    pub fn rate_at(&self, t: f64) -> f64 {
        match self {
            HarvestProfile::Zero => 0.0,
            HarvestProfile::PiecewiseConstant(bps) => {
                let mut r = 0.0;
                for &(ts, rv) in bps {
                    if t >= ts {
                        r = rv;
                    } else {
                        break;
                    }
                }
                r
            }
            HarvestProfile::WindowedAbsSin { amplitude, window_end } => {
                if t >= 0.0 && t <= *window_end {
                    amplitude * t.sin().abs()
                } else {
                    0.0
                }
            }
            HarvestProfile::CompoundPoissonSin(cps) => cps.rate_at(t),
        }
    }

    /// Exact integral of the rate over `[t_a, t_b]`.
    pub fn integrate(&self, t_a: f64, t_b: f64) -> Result<f64> {
        if !(t_a.is_finite() && t_b.is_finite()) || t_b < t_a {
            return Err(Error::Domain(format!(
                "integration bounds must be finite with t_a <= t_b, got [{t_a}, {t_b}]"
            )));
        }
        if t_a == t_b {
            return Ok(0.0);
        }
        Ok(match self {
            HarvestProfile::Zero => 0.0,
            HarvestProfile::PiecewiseConstant(bps) => integral_piecewise(bps, t_a, t_b),
            HarvestProfile::WindowedAbsSin { amplitude, window_end } => {
                integral_abs_sin(*amplitude, *window_end, t_a, t_b)
            }
            HarvestProfile::CompoundPoissonSin(cps) => cps.integrate(t_a, t_b),
        })
    }
}

fn integral_piecewise(bps: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for (i, &(ts, r)) in bps.iter().enumerate() {
        let te = bps.get(i + 1).map_or(f64::INFINITY, |&(t, _)| t);
        let lo = a.max(ts);
        let hi = b.min(te);
        if hi > lo {
            total += r * (hi - lo);
        }
    }
    total
}

fn integral_abs_sin(amplitude: f64, window_end: f64, a: f64, b: f64) -> f64 {
    use std::f64::consts::PI;
    let a = a.max(0.0);
    let b = b.min(window_end);
    if b <= a || amplitude == 0.0 {
        return 0.0;
    }
    // |sin| has a fixed sign on each half-period [k*pi, (k+1)*pi]; on a
    // monotone piece the integral is |cos lo - cos hi|.
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (((lo / PI).floor() + 1.0) * PI).min(b);
        total += amplitude * (lo.cos() - hi.cos()).abs();
        lo = hi;
    }
    total
}

/// Stochastic harvesting-rate profile with Poisson arrivals and held marks.
#[derive(Debug)]
pub struct CompoundPoissonSin {
    amplitude: f64,
    poisson_rate: f64,
    mark_std: f64,
    seed: u64,
    path: Mutex<SamplePath>,
}

impl Clone for CompoundPoissonSin {
    fn clone(&self) -> Self {
        CompoundPoissonSin {
            amplitude: self.amplitude,
            poisson_rate: self.poisson_rate,
            mark_std: self.mark_std,
            seed: self.seed,
            path: Mutex::new(self.path.lock().expect("path lock").clone()),
        }
    }
}

#[derive(Debug, Clone)]
struct SamplePath {
    rng: ChaCha8Rng,
    /// `(arrival_time, held_rate)`, ascending; the rate holds until the next
    /// arrival, and is 0 before the first.
    arrivals: Vec<(f64, f64)>,
    next_arrival: f64,
}

impl CompoundPoissonSin {
    fn new(amplitude: f64, poisson_rate: f64, mark_variance: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let next_arrival = exp_interval(&mut rng, poisson_rate);
        CompoundPoissonSin {
            amplitude,
            poisson_rate,
            mark_std: mark_variance.sqrt(),
            seed,
            path: Mutex::new(SamplePath { rng, arrivals: Vec::new(), next_arrival }),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn extend_to(&self, t: f64) {
        let mut path = self.path.lock().expect("path lock");
        while path.next_arrival <= t {
            let tau = path.next_arrival;
            let mean = self.amplitude * tau.sin().abs();
            let mark = if self.mark_std > 0.0 {
                Normal::new(mean, self.mark_std).expect("std > 0").sample(&mut path.rng)
            } else {
                mean
            };
            path.arrivals.push((tau, mark.max(0.0)));
            let step = exp_interval(&mut path.rng, self.poisson_rate);
            path.next_arrival = tau + step;
        }
    }

    fn rate_at(&self, t: f64) -> f64 {
        self.extend_to(t);
        let path = self.path.lock().expect("path lock");
        let idx = path.arrivals.partition_point(|&(tau, _)| tau <= t);
        if idx == 0 {
            0.0
        } else {
            path.arrivals[idx - 1].1
        }
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        self.extend_to(b);
        let path = self.path.lock().expect("path lock");
        let mut total = 0.0;
        let start = path.arrivals.partition_point(|&(tau, _)| tau <= a);
        // segment that was already holding at time a
        if start > 0 {
            let (tau, r) = path.arrivals[start - 1];
            debug_assert!(tau <= a);
            let seg_end = path.arrivals.get(start).map_or(f64::INFINITY, |&(t, _)| t);
            total += r * (seg_end.min(b) - a).max(0.0);
        }
        for i in start..path.arrivals.len() {
            let (tau, r) = path.arrivals[i];
            if tau >= b {
                break;
            }
            let seg_end = path.arrivals.get(i + 1).map_or(f64::INFINITY, |&(t, _)| t);
            total += r * (seg_end.min(b) - tau.max(a)).max(0.0);
        }
        total
    }
}

fn exp_interval(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / lambda
}
