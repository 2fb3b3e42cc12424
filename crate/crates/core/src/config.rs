//! JSON configuration documents for single runs and sweeps. Field names
//! mirror the runtime structs one-to-one and unknown keys are rejected, so
//! config fixtures stay bit-exact and diff-friendly.

use std::path::Path;

use serde::Deserialize;

use crate::engine::SimConfig;
use crate::error::{Error, Result};
use crate::harvest::HarvestProfile;
use crate::policies::PolicyKind;
use crate::rate_math::PowerBudget;
use crate::sweep::{grid, BaseConfig, Scenario, SweepSpec};

/// Harvest-profile block. The stochastic kind requires an explicit seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Zero,
    PiecewiseConstant { breakpoints: Vec<(f64, f64)> },
    WindowedAbsSin { amplitude: f64, window_end: f64 },
    CompoundPoissonSin {
        amplitude: f64,
        poisson_rate: f64,
        mark_variance: f64,
        seed: u64,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<HarvestProfile> {
        match self {
            ProfileSpec::Zero => Ok(HarvestProfile::Zero),
            ProfileSpec::PiecewiseConstant { breakpoints } => {
                HarvestProfile::piecewise_constant(breakpoints.clone())
            }
            ProfileSpec::WindowedAbsSin { amplitude, window_end } => {
                HarvestProfile::windowed_abs_sin(*amplitude, *window_end)
            }
            ProfileSpec::CompoundPoissonSin { amplitude, poisson_rate, mark_variance, seed } => {
                HarvestProfile::compound_poisson_sin(*amplitude, *poisson_rate, *mark_variance, *seed)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigDoc {
    e0: f64,
    q0: f64,
    p_max: f64,
    epsilon: f64,
    policy: String,
    profile: ProfileSpec,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_cutoff")]
    t_cutoff: f64,
    #[serde(default)]
    record_trajectory: bool,
    #[serde(default = "default_stride")]
    trajectory_stride: usize,
}

fn default_dt() -> f64 {
    1e-4
}
fn default_cutoff() -> f64 {
    50.0
}
fn default_stride() -> usize {
    100
}

/// Parses a single-run config document.
pub fn parse_run_config(json: &str) -> Result<SimConfig> {
    let doc: RunConfigDoc =
        serde_json::from_str(json).map_err(|e| Error::Config(format!("run config: {e}")))?;
    let config = SimConfig {
        e0: doc.e0,
        q0: doc.q0,
        budget: PowerBudget::new(doc.p_max)?,
        epsilon: doc.epsilon,
        dt: doc.dt,
        t_cutoff: doc.t_cutoff,
        policy: PolicyKind::parse(&doc.policy)?,
        profile: doc.profile.build()?,
        record_trajectory: doc.record_trajectory,
        trajectory_stride: doc.trajectory_stride,
    };
    config.validate()?;
    Ok(config)
}

/// Loads and parses a single-run config file.
pub fn load_run_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run_config(&text)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfigDoc {
    scenario: String,
    #[serde(default)]
    param_grid: Option<Vec<f64>>,
    #[serde(default)]
    policies: Option<Vec<String>>,
    #[serde(default)]
    epsilons: Option<Vec<f64>>,
    #[serde(default)]
    e0: Option<f64>,
    #[serde(default)]
    q0: Option<f64>,
    #[serde(default)]
    p_max: Option<f64>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    t_cutoff: Option<f64>,
    #[serde(default)]
    replications: Option<usize>,
    #[serde(default)]
    master_seed: Option<u64>,
    #[serde(default)]
    profile: Option<ProfileSpec>,
}

/// Parses a sweep config document. The scenario (`s1`, `s2`, `s3`, `custom`)
/// supplies defaults for every omitted field; explicit fields override them.
/// `custom` sweeps scale the given template profile by each grid value and
/// have no defaults for the grid.
pub fn parse_sweep_config(json: &str) -> Result<SweepSpec> {
    let doc: SweepConfigDoc =
        serde_json::from_str(json).map_err(|e| Error::Config(format!("sweep config: {e}")))?;

    let mut spec = match doc.scenario.as_str() {
        "s1" => SweepSpec::scenario1(),
        "s2" => SweepSpec::scenario2(),
        "s3" => SweepSpec::scenario3(doc.master_seed.unwrap_or(42)),
        "custom" => SweepSpec {
            scenario: Scenario::Custom,
            param_grid: grid(0.0, 0.1, 1.0),
            policies: vec![PolicyKind::RobustOptimal],
            epsilons: vec![0.05],
            base: BaseConfig::new(1.0, 1.0, PowerBudget::new(3.0)?),
            replications: 1,
            master_seed: doc.master_seed.unwrap_or(42),
            custom_profile: None,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown scenario `{other}` (expected s1, s2, s3, or custom)"
            )))
        }
    };

    if let Some(g) = doc.param_grid {
        spec.param_grid = g;
    }
    if let Some(pols) = doc.policies {
        spec.policies = pols
            .iter()
            .map(|s| PolicyKind::parse(s))
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(eps) = doc.epsilons {
        spec.epsilons = eps;
    }
    if let Some(e0) = doc.e0 {
        spec.base.e0 = e0;
    }
    if let Some(q0) = doc.q0 {
        spec.base.q0 = q0;
    }
    if let Some(p_max) = doc.p_max {
        spec.base.budget = PowerBudget::new(p_max)?;
    }
    if let Some(dt) = doc.dt {
        spec.base.dt = dt;
    }
    if let Some(t_cutoff) = doc.t_cutoff {
        spec.base.t_cutoff = t_cutoff;
    }
    if let Some(reps) = doc.replications {
        spec.replications = reps;
    }
    if let Some(seed) = doc.master_seed {
        spec.master_seed = seed;
    }
    if let Some(profile) = doc.profile {
        spec.custom_profile = Some(profile.build()?);
    }
    spec.validate()?;
    Ok(spec)
}

/// Loads and parses a sweep config file.
pub fn load_sweep_config(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_round_trip() {
        let json = r#"{
            "e0": 1.0, "q0": 1.0, "p_max": 3.0, "epsilon": 0.05,
            "policy": "robust",
            "profile": {"kind": "piecewise_constant", "breakpoints": [[0.0, 0.5], [0.2, 0.05]]}
        }"#;
        let c = parse_run_config(json).unwrap();
        assert_eq!(c.dt, 1e-4);
        assert_eq!(c.t_cutoff, 50.0);
        assert_eq!(c.policy, PolicyKind::RobustOptimal);
        assert!(!c.record_trajectory);
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{
            "e0": 1.0, "q0": 1.0, "p_max": 3.0, "epsilon": 0.05,
            "policy": "robust", "profile": {"kind": "zero"}, "typo_field": 1
        }"#;
        assert!(parse_run_config(json).is_err());

        let json = r#"{"scenario": "s1", "bogus": true}"#;
        assert!(parse_sweep_config(json).is_err());
    }

    #[test]
    fn stochastic_profile_requires_seed() {
        let json = r#"{
            "e0": 1.0, "q0": 1.0, "p_max": 3.0, "epsilon": 0.05,
            "policy": "robust",
            "profile": {"kind": "compound_poisson_sin", "amplitude": 2.0,
                        "poisson_rate": 2.0, "mark_variance": 1.0}
        }"#;
        assert!(parse_run_config(json).is_err());
    }

    #[test]
    fn sweep_presets_and_overrides() {
        let spec = parse_sweep_config(r#"{"scenario": "s1"}"#).unwrap();
        assert_eq!(spec.param_grid.len(), 41);
        assert_eq!(spec.policies.len(), 4);
        assert_eq!(spec.epsilons, vec![0.05]);

        let spec = parse_sweep_config(
            r#"{"scenario": "s1", "epsilons": [0.1], "param_grid": [0.0, 1.0], "dt": 0.001}"#,
        )
        .unwrap();
        assert_eq!(spec.epsilons, vec![0.1]);
        assert_eq!(spec.param_grid.len(), 2);
        assert_eq!(spec.base.dt, 0.001);

        let spec = parse_sweep_config(r#"{"scenario": "s3", "replications": 10}"#).unwrap();
        assert_eq!(spec.replications, 10);
        assert_eq!(spec.master_seed, 42);
    }

    #[test]
    fn custom_scenario_needs_profile() {
        assert!(parse_sweep_config(r#"{"scenario": "custom"}"#).is_err());
        let spec = parse_sweep_config(
            r#"{"scenario": "custom",
                "profile": {"kind": "windowed_abs_sin", "amplitude": 1.0, "window_end": 2.0},
                "param_grid": [0.5, 1.0, 2.0],
                "policies": ["robust", "greedy"],
                "epsilons": [0.05],
                "e0": 0.5, "q0": 1.0, "p_max": 3.0}"#,
        )
        .unwrap();
        assert_eq!(spec.scenario, Scenario::Custom);
        assert_eq!(spec.policies.len(), 2);
    }

    #[test]
    fn bad_policy_and_scenario_strings() {
        assert!(parse_sweep_config(r#"{"scenario": "s9"}"#).is_err());
        assert!(
            parse_sweep_config(r#"{"scenario": "s1", "policies": ["oracle"]}"#).is_err()
        );
    }
}
