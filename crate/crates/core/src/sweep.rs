//! Parameter sweeps over harvest families: runs the simulator for every
//! (epsilon, policy, parameter, replication) cell, aggregates replications by
//! their worst case, and reports per-policy worst cases and
//! finite-transmission-time regions as CSV.
//!
//! Cells are independent; with the `parallel` feature (default) they are
//! dispatched to a rayon pool whose width the `ETECH_WORKERS` environment
//! variable bounds. Output is deterministic either way: stochastic cells
//! derive their seeds purely from the master seed and the cell indices, and
//! rows are keyed and sorted before emission.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{simulate, Completion, SimConfig};
use crate::error::{Error, Result};
use crate::harvest::HarvestProfile;
use crate::policies::PolicyKind;
use crate::rate_math::PowerBudget;

/// Which harvest family the sweep parameter indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Step profile: rate `h` until t = 0.2, then `h/10`; param is `h`.
    S1,
    /// Windowed `a|sin t|` on [0, 1]; param is `a`.
    S2,
    /// Marked-Poisson profile with mark mean `a|sin t|`; param is `a`.
    S3,
    /// Caller-supplied template profile with all rates scaled by the param.
    Custom,
}

/// Simulation fields shared by every cell (the profile and policy vary).
#[derive(Debug, Clone, Copy)]
pub struct BaseConfig {
    pub e0: f64,
    pub q0: f64,
    pub budget: PowerBudget,
    pub dt: f64,
    pub t_cutoff: f64,
}

impl BaseConfig {
    pub fn new(e0: f64, q0: f64, budget: PowerBudget) -> Self {
        BaseConfig { e0, q0, budget, dt: 1e-4, t_cutoff: 50.0 }
    }
}

/// A full sweep description.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenario: Scenario,
    /// Ascending sweep values (`h` for S1, `a` for S2/S3, scale for Custom).
    pub param_grid: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub epsilons: Vec<f64>,
    pub base: BaseConfig,
    /// Independent stochastic replications per parameter (1 for the
    /// deterministic scenarios).
    pub replications: usize,
    pub master_seed: u64,
    /// Template profile for [`Scenario::Custom`].
    pub custom_profile: Option<HarvestProfile>,
}

impl SweepSpec {
    /// Step-profile sweep: e0=1, q0=1, p_max=3, eps=0.05, h in 0:0.05:2.
    pub fn scenario1() -> Self {
        SweepSpec {
            scenario: Scenario::S1,
            param_grid: grid(0.0, 0.05, 2.0),
            policies: all_policies(),
            epsilons: vec![0.05],
            base: BaseConfig::new(1.0, 1.0, PowerBudget::new(3.0).expect("p_max > 0")),
            replications: 1,
            master_seed: 0,
            custom_profile: None,
        }
    }

    /// Windowed-|sin| sweep: e0=0.2, q0=1, p_max=3, eps in {0.01, 0.2},
    /// a in 0:0.1:5.
    pub fn scenario2() -> Self {
        SweepSpec {
            scenario: Scenario::S2,
            param_grid: grid(0.0, 0.1, 5.0),
            policies: all_policies(),
            epsilons: vec![0.01, 0.2],
            base: BaseConfig::new(0.2, 1.0, PowerBudget::new(3.0).expect("p_max > 0")),
            replications: 1,
            master_seed: 0,
            custom_profile: None,
        }
    }

    /// Stochastic-harvest sweep: e0=1, q0=1, p_max=3, eps in {0.01, 0.05},
    /// a in 0:0.25:5, 200 replications per parameter. The greedy baseline is
    /// excluded; it is far worse than the others here.
    pub fn scenario3(master_seed: u64) -> Self {
        SweepSpec {
            scenario: Scenario::S3,
            param_grid: grid(0.0, 0.25, 5.0),
            policies: vec![PolicyKind::RobustOptimal, PolicyKind::ESTIMATION, PolicyKind::MODIFIED],
            epsilons: vec![0.01, 0.05],
            base: BaseConfig::new(1.0, 1.0, PowerBudget::new(3.0).expect("p_max > 0")),
            replications: 200,
            master_seed,
            custom_profile: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.param_grid.is_empty() {
            return Err(Error::Config("param_grid must be non-empty".into()));
        }
        if self.param_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("param_grid must be strictly ascending".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policies must be non-empty".into()));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilons must be non-empty".into()));
        }
        if self.epsilons.iter().any(|&e| !e.is_finite() || e <= 0.0) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.scenario == Scenario::Custom && self.custom_profile.is_none() {
            return Err(Error::Config("custom scenario requires a template profile".into()));
        }
        Ok(())
    }

    fn profile_for(&self, param: f64, param_idx: usize, rep: usize) -> Result<HarvestProfile> {
        match self.scenario {
            Scenario::S1 => HarvestProfile::scenario1(param),
            Scenario::S2 => HarvestProfile::scenario2(param),
            Scenario::S3 => {
                HarvestProfile::scenario3(param, cell_seed(self.master_seed, param_idx, rep))
            }
            Scenario::Custom => {
                let template = self.custom_profile.as_ref().expect("validated");
                scale_profile(template, param)
            }
        }
    }
}

/// Inclusive ascending grid `lo, lo+step, ..., hi`.
pub fn grid(lo: f64, step: f64, hi: f64) -> Vec<f64> {
    assert!(step > 0.0 && hi >= lo, "grid requires step > 0 and hi >= lo");
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).filter(|&v| v <= hi + 1e-12 * step).collect()
}

fn all_policies() -> Vec<PolicyKind> {
    vec![
        PolicyKind::RobustOptimal,
        PolicyKind::ESTIMATION,
        PolicyKind::MODIFIED,
        PolicyKind::Greedy,
    ]
}

/// Derives a cell seed as a pure function of the master seed and the cell
/// indices. The seed depends only on (parameter, replication) — not on the
/// policy or threshold — so every policy and threshold faces the same sample
/// path family and comparisons stay paired.
pub fn cell_seed(master_seed: u64, param_idx: usize, rep: usize) -> u64 {
    let mut s = splitmix64(master_seed ^ 0x9E37_79B9_7F4A_7C15);
    s = splitmix64(s ^ (param_idx as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    splitmix64(s ^ (rep as u64).wrapping_mul(0x94D0_49BB_1331_11EB))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn scale_profile(template: &HarvestProfile, s: f64) -> Result<HarvestProfile> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Config(format!("profile scale must be >= 0, got {s}")));
    }
    match template {
        HarvestProfile::Zero => Ok(HarvestProfile::Zero),
        HarvestProfile::PiecewiseConstant(bps) => {
            HarvestProfile::piecewise_constant(bps.iter().map(|&(t, r)| (t, r * s)).collect())
        }
        HarvestProfile::WindowedAbsSin { amplitude, window_end } => {
            HarvestProfile::windowed_abs_sin(amplitude * s, *window_end)
        }
        HarvestProfile::CompoundPoissonSin(_) => Err(Error::Config(
            "custom sweeps over stochastic templates are not supported; use scenario s3".into(),
        )),
    }
}

/// One aggregated sweep cell: the worst replication for its
/// (epsilon, policy, param) key.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon: f64,
    pub policy: PolicyKind,
    pub param: f64,
    pub completion: Completion,
    pub events: usize,
}

/// All rows of a finished sweep, sorted by (epsilon, policy, param).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    fn select(&self, epsilon: f64, policy: PolicyKind) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.epsilon == epsilon && r.policy == policy)
            .collect()
    }

    /// Worst case over the swept family: the maximum transmission time, with
    /// a cutoff in any cell dominating every finite value.
    pub fn worst_case(&self, epsilon: f64, policy: PolicyKind) -> Result<Completion> {
        let rows = self.select(epsilon, policy);
        if rows.is_empty() {
            return Err(Error::Lookup(format!(
                "no cells for epsilon={epsilon}, policy={}",
                policy.label()
            )));
        }
        let mut worst = 0.0_f64;
        for row in rows {
            match row.completion {
                Completion::CutoffExceeded => return Ok(Completion::CutoffExceeded),
                Completion::Finished(t) => worst = worst.max(t),
            }
        }
        Ok(Completion::Finished(worst))
    }

    /// The parameter attaining the worst case, when every cell is finite.
    pub fn worst_param(&self, epsilon: f64, policy: PolicyKind) -> Result<(f64, Completion)> {
        let rows = self.select(epsilon, policy);
        if rows.is_empty() {
            return Err(Error::Lookup(format!(
                "no cells for epsilon={epsilon}, policy={}",
                policy.label()
            )));
        }
        let mut best: Option<(f64, Completion)> = None;
        for row in rows {
            let better = match (&row.completion, &best) {
                (_, None) => true,
                (Completion::CutoffExceeded, Some((_, Completion::Finished(_)))) => true,
                (Completion::CutoffExceeded, Some((_, Completion::CutoffExceeded))) => false,
                (Completion::Finished(_), Some((_, Completion::CutoffExceeded))) => false,
                (Completion::Finished(t), Some((_, Completion::Finished(b)))) => t > b,
            };
            if better {
                best = Some((row.param, row.completion));
            }
        }
        Ok(best.expect("rows non-empty"))
    }

    /// Grid parameters with a finite transmission time.
    pub fn finite_region(&self, epsilon: f64, policy: PolicyKind) -> Result<Vec<f64>> {
        let rows = self.select(epsilon, policy);
        if rows.is_empty() {
            return Err(Error::Lookup(format!(
                "no cells for epsilon={epsilon}, policy={}",
                policy.label()
            )));
        }
        Ok(rows
            .iter()
            .filter(|r| r.completion.is_finished())
            .map(|r| r.param)
            .collect())
    }

    /// The row at a given grid parameter (matched to 1e-9).
    pub fn cell(&self, epsilon: f64, policy: PolicyKind, param: f64) -> Result<&SweepRow> {
        self.select(epsilon, policy)
            .into_iter()
            .find(|r| (r.param - param).abs() <= 1e-9)
            .ok_or_else(|| {
                Error::Lookup(format!(
                    "no cell at param={param} for epsilon={epsilon}, policy={}",
                    policy.label()
                ))
            })
    }

    /// Serializes rows as CSV. Cutoff cells carry the literal token `INF`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,policy,param,transmission_time,events\n");
        for r in &self.rows {
            let time = match r.completion {
                Completion::Finished(t) => format!("{t:.9}"),
                Completion::CutoffExceeded => "INF".into(),
            };
            writeln!(
                out,
                "{:.6},{},{:.6},{},{}",
                r.epsilon,
                r.policy.label(),
                r.param,
                time,
                r.events
            )
            .expect("writing to String cannot fail");
        }
        out
    }

    pub fn emit_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy)]
struct CellKey {
    eps_idx: usize,
    pol_idx: usize,
    param_idx: usize,
    rep: usize,
}

fn run_cell(spec: &SweepSpec, key: CellKey) -> Result<(CellKey, Completion, usize)> {
    let profile = spec.profile_for(spec.param_grid[key.param_idx], key.param_idx, key.rep)?;
    let config = SimConfig {
        e0: spec.base.e0,
        q0: spec.base.q0,
        budget: spec.base.budget,
        epsilon: spec.epsilons[key.eps_idx],
        dt: spec.base.dt,
        t_cutoff: spec.base.t_cutoff,
        policy: spec.policies[key.pol_idx],
        profile,
        record_trajectory: false,
        trajectory_stride: 1,
    };
    let outcome = simulate(&config)?;
    Ok((key, outcome.completion, outcome.events.len()))
}

fn cell_keys(spec: &SweepSpec) -> Vec<CellKey> {
    let mut keys = Vec::with_capacity(
        spec.epsilons.len() * spec.policies.len() * spec.param_grid.len() * spec.replications,
    );
    for eps_idx in 0..spec.epsilons.len() {
        for pol_idx in 0..spec.policies.len() {
            for param_idx in 0..spec.param_grid.len() {
                for rep in 0..spec.replications {
                    keys.push(CellKey { eps_idx, pol_idx, param_idx, rep });
                }
            }
        }
    }
    keys
}

/// Folds per-replication outcomes into one row per (epsilon, policy, param):
/// the empirical worst case, with cutoff dominating.
fn aggregate(spec: &SweepSpec, cells: Vec<(CellKey, Completion, usize)>) -> SweepResult {
    let n_params = spec.param_grid.len();
    let n_pols = spec.policies.len();
    let mut slots: Vec<Option<(Completion, usize)>> =
        vec![None; spec.epsilons.len() * n_pols * n_params];
    for (key, completion, events) in cells {
        let slot = &mut slots[(key.eps_idx * n_pols + key.pol_idx) * n_params + key.param_idx];
        let replace = match (&completion, &*slot) {
            (_, None) => true,
            (Completion::CutoffExceeded, Some((Completion::Finished(_), _))) => true,
            (Completion::CutoffExceeded, Some((Completion::CutoffExceeded, _))) => false,
            (Completion::Finished(_), Some((Completion::CutoffExceeded, _))) => false,
            (Completion::Finished(t), Some((Completion::Finished(b), _))) => t > b,
        };
        if replace {
            *slot = Some((completion, events));
        }
    }
    let mut rows = Vec::with_capacity(slots.len());
    for eps_idx in 0..spec.epsilons.len() {
        for pol_idx in 0..n_pols {
            for param_idx in 0..n_params {
                let (completion, events) =
                    slots[(eps_idx * n_pols + pol_idx) * n_params + param_idx].expect("all cells ran");
                rows.push(SweepRow {
                    epsilon: spec.epsilons[eps_idx],
                    policy: spec.policies[pol_idx],
                    param: spec.param_grid[param_idx],
                    completion,
                    events,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then_with(|| a.policy.label().cmp(&b.policy.label()))
            .then_with(|| a.param.total_cmp(&b.param))
    });
    SweepResult { rows }
}

/// Runs every sweep cell one after another on the calling thread.
pub fn run_sweep_sequential(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let cells = cell_keys(spec)
        .into_iter()
        .map(|key| run_cell(spec, key))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(spec, cells))
}

/// Runs the sweep, dispatching cells to a worker pool when the `parallel`
/// feature is enabled (set `ETECH_WORKERS` to bound the pool width), and
/// sequentially otherwise.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    #[cfg(feature = "parallel")]
    {
        run_sweep_parallel(spec)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sweep_sequential(spec)
    }
}

#[cfg(feature = "parallel")]
/// Runs every sweep cell on a rayon pool. `ETECH_WORKERS` bounds the pool
/// width; unset or invalid values fall back to the rayon default.
pub fn run_sweep_parallel(spec: &SweepSpec) -> Result<SweepResult> {
    use rayon::prelude::*;

    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(workers) = env_workers() {
        builder = builder.num_threads(workers);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("failed to build worker pool: {e}")))?;
    let cells = pool.install(|| {
        cell_keys(spec)
            .into_par_iter()
            .map(|key| run_cell(spec, key))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(aggregate(spec, cells))
}

#[cfg(feature = "parallel")]
fn env_workers() -> Option<usize> {
    std::env::var("ETECH_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}
