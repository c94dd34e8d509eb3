//! Run configuration, named presets and the config file format.
//!
//! A config file is TOML with the sections `scenario`, `training`, `reward`,
//! `discretization`, `noise` and `evaluation`. Every key is required and
//! unknown keys are rejected. Derived quantities (agent frequency, maximum
//! pitch, curriculum length, ...) are never read from the file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discretization::CurriculumGeometry;
use crate::double_q::{ExplorationSchedule, LearningRateParams};
use crate::error::{Error, Result};
use crate::observation::NoiseModel;
use crate::platform::{DerivationInputs, DerivedHyperparams, TrajectoryKind, TrajectorySpec};
use crate::reward::{RewardContext, RewardWeights};
use crate::vehicle::{FlyZone, PidGains, VehicleParams};

/// Environment variable naming a default config file for the CLI.
pub const CONFIG_ENV: &str = "LANDING_CONFIG";

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub fly_zone: FlyZone,
    /// Platform edge length, m.
    pub l_mp: f64,
    /// Height of the platform surface, m.
    pub platform_height: f64,
    /// Training trajectory: max speed (m/s) and amplitude (m).
    pub v_mp: f64,
    pub r_mp: f64,
    pub g: f64,
    /// Physics step, s.
    pub dt_sim: f64,
    /// Observation rate, Hz.
    pub obs_rate: f64,
    /// Cut-off of the relative-acceleration filter, Hz.
    pub accel_cutoff: f64,
    /// Attitude tracking time constant, s.
    pub tau_att: f64,
    pub yaw_pid: PidGains,
    pub vz_pid: PidGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub gamma: f64,
    /// Maximum episode duration, s.
    pub t_max: f64,
    pub learning_rate: LearningRateParams,
    pub exploration: ExplorationSchedule,
    pub k_a: f64,
    pub k_man: f64,
    pub success_window: usize,
    pub success_threshold: f64,
    pub episode_cap: usize,
    /// Uninterrupted time in the latest step required for success, s.
    pub dwell_time: f64,
    pub z_init: f64,
    pub vz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub sigma: f64,
    pub sigma_a: f64,
    pub n_theta: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub n_trials: usize,
    pub z_init: f64,
    pub vz: f64,
    /// Initial relative yaw between platform and vehicle, rad.
    pub psi_rel: f64,
    /// Hard stop for a trial that neither touches down nor leaves the zone, s.
    pub max_duration: f64,
    pub scenarios: Vec<TrajectorySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioSpec,
    pub training: TrainingSection,
    pub reward: RewardWeights,
    pub discretization: DiscretizationSection,
    pub noise: NoiseModel,
    pub evaluation: EvaluationSection,
}

/// Names accepted by [`Config::preset`].
pub const PRESETS: [&str; 4] = ["sim-rpm-0.8", "sim-rpm-1.2", "sim-rpm-1.6", "hardware-rpm-0.4"];

impl Config {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sim-rpm-0.8" => Ok(Self::simulation(0.8)),
            "sim-rpm-1.2" => Ok(Self::simulation(1.2)),
            "sim-rpm-1.6" => Ok(Self::simulation(1.6)),
            "hardware-rpm-0.4" => Ok(Self::hardware()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}', expected one of {}",
                PRESETS.join(", ")
            ))),
        }
    }

    fn base(scenario: ScenarioSpec, eval_scenarios: Vec<TrajectorySpec>) -> Self {
        Self {
            scenario,
            training: TrainingSection {
                gamma: 0.99,
                t_max: 20.0,
                learning_rate: LearningRateParams::default(),
                exploration: ExplorationSchedule::default(),
                k_a: 3.0,
                k_man: 15.0,
                success_window: 100,
                success_threshold: 0.96,
                episode_cap: 10_000,
                dwell_time: 1.0,
                z_init: 4.0,
                vz: -0.1,
            },
            reward: RewardWeights::default(),
            discretization: DiscretizationSection {
                sigma: 0.8,
                sigma_a: 0.416,
                n_theta: 3,
            },
            noise: NoiseModel::ESTIMATOR,
            evaluation: EvaluationSection {
                n_trials: 150,
                z_init: 2.5,
                vz: -0.1,
                psi_rel: std::f64::consts::FRAC_PI_4,
                max_duration: 120.0,
                scenarios: eval_scenarios,
            },
        }
    }

    fn environment(name: &str, x_max: f64, l_mp: f64, v_mp: f64, r_mp: f64) -> ScenarioSpec {
        ScenarioSpec {
            name: name.to_string(),
            fly_zone: FlyZone {
                x_max,
                y_max: x_max,
                z_max: 6.0,
            },
            l_mp,
            platform_height: 0.3,
            v_mp,
            r_mp,
            g: STANDARD_GRAVITY,
            dt_sim: 0.002,
            obs_rate: 100.0,
            accel_cutoff: 0.3,
            tau_att: 0.1,
            yaw_pid: PidGains {
                k_p: 8.0,
                k_i: 1.0,
                k_d: 0.0,
            },
            vz_pid: PidGains {
                k_p: 5.0,
                k_i: 10.0,
                k_d: 0.0,
            },
        }
    }

    fn simulation(v_mp: f64) -> Self {
        let r_mp = 2.0;
        let mut scenarios = vec![TrajectorySpec::stationary()];
        scenarios.extend([0.4, 0.8, 1.2, 1.6].iter().map(|&v| TrajectorySpec::rpm(v, r_mp)));
        scenarios.push(TrajectorySpec::eight_shape(v_mp, r_mp));
        Self::base(
            Self::environment(&format!("simulation RPM {v_mp}"), 4.5, 1.0, v_mp, r_mp),
            scenarios,
        )
    }

    fn hardware() -> Self {
        let r_mp = 0.5;
        Self::base(
            Self::environment("hardware RPM 0.4", 1.0, 0.5, 0.4, r_mp),
            vec![
                TrajectorySpec::stationary(),
                TrajectorySpec::rpm(0.2, r_mp),
                TrajectorySpec::rpm(0.4, r_mp),
                TrajectorySpec::eight_shape(0.4, r_mp),
            ],
        )
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// First 8 bytes of the SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let positive = [
            ("fly_zone.x_max", s.fly_zone.x_max),
            ("fly_zone.y_max", s.fly_zone.y_max),
            ("fly_zone.z_max", s.fly_zone.z_max),
            ("l_mp", s.l_mp),
            ("g", s.g),
            ("dt_sim", s.dt_sim),
            ("obs_rate", s.obs_rate),
            ("accel_cutoff", s.accel_cutoff),
            ("tau_att", s.tau_att),
            ("t_max", self.training.t_max),
            ("k_a", self.training.k_a),
            ("z_init", self.training.z_init),
            ("evaluation.z_init", self.evaluation.z_init),
            ("evaluation.max_duration", self.evaluation.max_duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if s.platform_height < 0.0 {
            return Err(Error::Config("platform_height must be non-negative".into()));
        }
        let obs_period = 1.0 / s.obs_rate;
        if s.dt_sim > obs_period {
            return Err(Error::Config(
                "physics step must not exceed the observation period".into(),
            ));
        }
        let ratio = obs_period / s.dt_sim;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(
                "observation period must be a whole number of physics steps".into(),
            ));
        }
        let t = &self.training;
        if !(0.0..1.0).contains(&t.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", t.gamma)));
        }
        let lr = &t.learning_rate;
        if !(lr.omega > 0.0 && lr.omega <= 1.0) || !(lr.alpha_min > 0.0 && lr.alpha_min <= 1.0) {
            return Err(Error::Config("learning rate needs omega, alpha_min in (0, 1]".into()));
        }
        let ex = &t.exploration;
        if ex.anneal_until < ex.hold_until
            || !(0.0..=1.0).contains(&ex.start)
            || !(0.0..=1.0).contains(&ex.end)
            || ex.end > ex.start
        {
            return Err(Error::Config(
                "exploration schedule must be non-increasing within [0, 1]".into(),
            ));
        }
        if t.success_window == 0 || !(t.success_threshold > 0.0 && t.success_threshold <= 1.0) {
            return Err(Error::Config(
                "success window must be non-empty, threshold in (0, 1]".into(),
            ));
        }
        if t.episode_cap < t.success_window {
            return Err(Error::Config("episode cap must be at least the success window".into()));
        }
        if !(t.dwell_time >= 0.0) {
            return Err(Error::Config("dwell_time must be non-negative".into()));
        }
        if t.z_init > s.fly_zone.z_max || self.evaluation.z_init > s.fly_zone.z_max {
            return Err(Error::Config("initial altitude lies above the fly zone".into()));
        }
        self.reward.validate()?;
        if self.noise.sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config(
                "noise standard deviations must be finite and >= 0".into(),
            ));
        }
        if self.evaluation.n_trials == 0 {
            return Err(Error::Config("evaluation needs at least one trial".into()));
        }
        for sc in &self.evaluation.scenarios {
            sc.validate()?;
        }
        // Surfaces invalid training geometry (static platform, oversize platform, ...).
        self.derive()?;
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedHyperparams> {
        let s = &self.scenario;
        if s.v_mp == 0.0 {
            return Err(Error::InvalidScenario(
                "static training scenario unsupported: v_mp must be positive".into(),
            ));
        }
        DerivedHyperparams::derive(&DerivationInputs {
            v_mp: s.v_mp,
            r_mp: s.r_mp,
            x_max: s.fly_zone.x_max,
            l_mp: s.l_mp,
            sigma: self.discretization.sigma,
            k_a: self.training.k_a,
            k_man: self.training.k_man,
            n_theta: self.discretization.n_theta,
            g: s.g,
        })
    }

    pub fn training_trajectory(&self) -> TrajectorySpec {
        TrajectorySpec {
            kind: TrajectoryKind::Rpm,
            v_mp: self.scenario.v_mp,
            r_mp: self.scenario.r_mp,
        }
    }

    pub fn geometry(&self, latest: usize) -> Result<CurriculumGeometry> {
        CurriculumGeometry::new(latest, self.discretization.sigma, self.discretization.sigma_a)
    }
}

/// Everything an episode or trial needs, computed once from a [`Config`].
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: Config,
    pub derived: DerivedHyperparams,
    pub vehicle: VehicleParams,
    pub reward: RewardContext,
}

impl RunContext {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let derived = config.derive()?;
        let s = &config.scenario;
        let vehicle = VehicleParams {
            g: s.g,
            tau_att: s.tau_att,
            tilt_limit: derived.theta_max,
            yaw_pid: s.yaw_pid,
            vz_pid: s.vz_pid,
        };
        let reward = RewardContext {
            weights: config.reward,
            dt: derived.dt_agent,
            theta_max: derived.theta_max,
            n_theta: config.discretization.n_theta,
        };
        Ok(Self {
            config,
            derived,
            vehicle,
            reward,
        })
    }

    pub fn n_theta(&self) -> u32 {
        self.config.discretization.n_theta
    }

    pub fn n_states(&self) -> usize {
        crate::discretization::DiscreteState::count(self.n_theta())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_derive_table_values() {
        let cases = [
            ("sim-rpm-0.8", 0.32, 11.46, 4),
            ("sim-rpm-1.2", 0.72, 17.19, 4),
            ("sim-rpm-1.6", 1.28, 22.92, 4),
            ("hardware-rpm-0.4", 0.32, 22.92, 3),
        ];
        for (name, a, f, n_cs) in cases {
            let d = Config::preset(name).unwrap().derive().unwrap();
            assert!((d.a_mp_max - a).abs() < 1e-9, "{name}");
            assert!((d.f_ag - f).abs() < 0.005, "{name}: {}", d.f_ag);
            assert_eq!(d.n_cs, n_cs, "{name}");
        }
    }

    #[test]
    fn toml_roundtrip_and_unknown_keys() {
        let cfg = Config::preset("hardware-rpm-0.4").unwrap();
        let text = cfg.to_toml_string();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());

        let bad = text.replace("[training]", "[training]\nbogus = 1");
        assert!(Config::from_toml_str(&bad).is_err());
    }

    #[test]
    fn derived_values_are_not_configurable() {
        let text = Config::preset("hardware-rpm-0.4").unwrap().to_toml_string();
        let bad = text.replace("[discretization]", "[discretization]\nn_cs = 7");
        assert!(Config::from_toml_str(&bad).is_err());
    }

    #[test]
    fn static_training_rejected() {
        let mut cfg = Config::preset("hardware-rpm-0.4").unwrap();
        cfg.scenario.v_mp = 0.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("static"));
    }

    #[test]
    fn unknown_preset() {
        assert!(Config::preset("nope").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = Config::preset("hardware-rpm-0.4").unwrap();
        let mut b = a.clone();
        b.training.gamma = 0.98;
        assert_ne!(a.hash(), b.hash());
    }
}
