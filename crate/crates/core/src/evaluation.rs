//! Landing trials with two instances of a trained agent, one per horizontal
//! axis, and batteries of trials across platform scenarios.
//!
//! The lateral instance reads the stability-frame y channel and its pitch
//! output becomes a roll setpoint of opposite sign, so that in both axes a
//! positive command accelerates toward negative relative coordinates.

use rayon::prelude::*;

use crate::config::RunContext;
use crate::curriculum::{normalized_axis, uniform_in_zone, SimClock};
use crate::discretization::{map_to_discrete, CurriculumGeometry};
use crate::double_q::{select_action, QTablePair};
use crate::error::{Error, Result};
use crate::math::{round_half_even, Vec3};
use crate::observation::{axis_project, Axis, NoiseModel, Observer};
use crate::platform::{platform_state_at, PlatformState, TrajectorySpec};
use crate::rng::{derive_seed, EpisodeRngs};
use crate::vehicle::{
    apply_action, in_fly_zone, pitch_from_index, touchdown_check, Action, Touchdown, UavState, Vehicle,
};

/// Seed-path tag for evaluation trials.
pub const EVAL_TAG: u64 = 0x4556_414c_0000;

/// Trained tables for every curriculum step plus their geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub tables: Vec<QTablePair>,
    pub geometry: CurriculumGeometry,
}

impl Policy {
    pub fn new(tables: Vec<QTablePair>, geometry: CurriculumGeometry) -> Result<Self> {
        if tables.len() != geometry.steps.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} tables for {} curriculum steps",
                tables.len(),
                geometry.steps.len()
            )));
        }
        Ok(Self { tables, geometry })
    }

    /// Checks that the policy can be deployed with `ctx`.
    pub fn check_compatible(&self, ctx: &RunContext) -> Result<()> {
        let n_states = ctx.n_states();
        if self.geometry.latest_index() != ctx.derived.n_cs {
            return Err(Error::GeometryMismatch(format!(
                "policy has {} curriculum steps, configuration derives {}",
                self.geometry.steps.len(),
                ctx.derived.n_cs + 1
            )));
        }
        if let Some(t) = self.tables.iter().find(|t| t.n_states() != n_states) {
            return Err(Error::GeometryMismatch(format!(
                "table with {} states, configuration expects {n_states}",
                t.n_states()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub trajectory: TrajectorySpec,
    pub n_trials: usize,
    pub noise: NoiseModel,
    pub z_init: f64,
    pub vz: f64,
    pub psi_rel: f64,
    pub max_duration: f64,
    pub seed: u64,
    /// Fixed start instead of a uniform draw over the fly zone.
    pub start: Option<Vec3>,
    pub record: bool,
}

impl TrialConfig {
    pub fn from_context(ctx: &RunContext, trajectory: TrajectorySpec, noisy: bool, seed: u64) -> Self {
        let e = &ctx.config.evaluation;
        Self {
            trajectory,
            n_trials: e.n_trials,
            noise: if noisy { ctx.config.noise } else { NoiseModel::NONE },
            z_init: e.z_init,
            vz: e.vz,
            psi_rel: e.psi_rel,
            max_duration: e.max_duration,
            seed,
            start: None,
            record: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    Success,
    /// Touchdown beside the platform, or no touchdown before the time limit.
    Miss,
    FlyzoneExit,
}

/// One agent tick of a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialLogRow {
    pub t: f64,
    pub uav: Vec3,
    pub platform: Vec3,
    pub theta_ref: f64,
    pub phi_ref: f64,
    pub action_lon: Action,
    pub action_lat: Action,
    /// Raw stability-frame (p, v, a) seen by each agent.
    pub obs_lon: [f64; 3],
    pub obs_lat: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub outcome: TrialOutcome,
    pub duration: f64,
    /// Mean of the two agents' action-switch rates.
    pub jitter: f64,
    pub log: Option<Vec<TrialLogRow>>,
}

/// Action switches per second.
pub fn jitter_metric(actions: &[Action], duration: f64) -> f64 {
    if actions.len() < 2 || !(duration > 0.0) {
        return 0.0;
    }
    let switches = actions.windows(2).filter(|w| w[0] != w[1]).count();
    switches as f64 / duration
}

struct AxisAgent {
    axis: Axis,
    i_theta: usize,
    actions: Vec<Action>,
}

impl AxisAgent {
    fn act(
        &mut self,
        policy: &Policy,
        ctx: &RunContext,
        obs: &crate::observation::RelativeObservation,
        rngs: &mut EpisodeRngs,
    ) -> Action {
        let n_theta = ctx.n_theta();
        let norm = normalized_axis(obs, self.axis, ctx);
        let ds = map_to_discrete(&norm, &policy.geometry, self.i_theta);
        let sel = select_action(&policy.tables[ds.step], ds.flat_index(n_theta), 0.0, &mut rngs.tie);
        self.i_theta = apply_action(self.i_theta, sel.action, n_theta);
        self.actions.push(sel.action);
        sel.action
    }
}

/// Runs trial `index` of `cfg` against the trajectory in `cfg`.
pub fn run_trial(ctx: &RunContext, policy: &Policy, cfg: &TrialConfig, index: usize) -> TrialResult {
    run_trial_with(ctx, policy, cfg, index, &|t| platform_state_at(&cfg.trajectory, t))
}

/// Runs one trial against an arbitrary platform motion.
pub fn run_trial_with(
    ctx: &RunContext,
    policy: &Policy,
    cfg: &TrialConfig,
    index: usize,
    platform_at: &dyn Fn(f64) -> PlatformState,
) -> TrialResult {
    let sc = &ctx.config.scenario;
    let n_theta = ctx.n_theta();
    let theta_max = ctx.derived.theta_max;
    let mut rngs = EpisodeRngs::new(cfg.seed, &[EVAL_TAG, index as u64]);
    let start = cfg
        .start
        .unwrap_or_else(|| uniform_in_zone(ctx, cfg.z_init, &mut rngs.init));
    let mut vehicle = Vehicle::new(UavState::hover_at(start, -cfg.psi_rel, cfg.vz), ctx.vehicle);
    let mut observer = Observer::new(sc.accel_cutoff, sc.obs_rate, cfg.noise);
    let mut clock = SimClock::new(sc.dt_sim, sc.obs_rate, ctx.derived.dt_agent);
    let mut lon = AxisAgent {
        axis: Axis::Longitudinal,
        i_theta: n_theta as usize,
        actions: Vec::new(),
    };
    let mut lat = AxisAgent {
        axis: Axis::Lateral,
        i_theta: n_theta as usize,
        actions: Vec::new(),
    };
    let mut log = cfg.record.then(Vec::new);

    let outcome = loop {
        let t = clock.time();
        let platform = platform_at(t);
        if clock.obs_due() {
            observer.observe(&vehicle.state, &platform, &mut rngs.noise);
        }
        if clock.take_agent_tick() {
            let obs = *observer.latest();
            let a_lon = lon.act(policy, ctx, &obs, &mut rngs);
            let a_lat = lat.act(policy, ctx, &obs, &mut rngs);
            let theta = pitch_from_index(lon.i_theta, theta_max, n_theta);
            let phi = -pitch_from_index(lat.i_theta, theta_max, n_theta);
            vehicle.state.attitude_setpoint.pitch = theta;
            vehicle.state.attitude_setpoint.roll = phi;
            if let Some(l) = log.as_mut() {
                let (p, v, a) = axis_project(&obs, Axis::Longitudinal);
                let (py, vy, ay) = axis_project(&obs, Axis::Lateral);
                l.push(TrialLogRow {
                    t,
                    uav: vehicle.state.position,
                    platform: platform.position,
                    theta_ref: theta,
                    phi_ref: phi,
                    action_lon: a_lon,
                    action_lat: a_lat,
                    obs_lon: [p, v, a],
                    obs_lat: [py, vy, ay],
                });
            }
        }
        vehicle.step(clock.dt_sim);
        clock.advance();
        let pos = vehicle.state.position;
        if !vehicle.state.is_finite() {
            break TrialOutcome::FlyzoneExit;
        }
        match touchdown_check(pos, &platform_at(clock.time()), sc.l_mp, sc.platform_height) {
            Touchdown::Success => break TrialOutcome::Success,
            Touchdown::Miss => break TrialOutcome::Miss,
            Touchdown::Airborne => {}
        }
        if !in_fly_zone(pos, &sc.fly_zone) {
            break TrialOutcome::FlyzoneExit;
        }
        if clock.time() >= cfg.max_duration {
            break TrialOutcome::Miss;
        }
    };
    let duration = clock.time();
    let jitter = 0.5 * (jitter_metric(&lon.actions, duration) + jitter_metric(&lat.actions, duration));
    TrialResult {
        outcome,
        duration,
        jitter,
        log,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub label: String,
    pub n_trials: usize,
    pub successes: usize,
    pub misses: usize,
    pub flyzone_exits: usize,
    pub success_rate: f64,
    /// Mean duration of trials that ended in a touchdown, s.
    pub mean_landing_time: f64,
    pub jitter_mean: f64,
    pub jitter_std: f64,
    pub trajectories: Option<Vec<Vec<TrialLogRow>>>,
}

impl TrialStats {
    pub fn from_results(label: String, results: Vec<TrialResult>) -> Self {
        let n = results.len();
        let count = |o: TrialOutcome| results.iter().filter(|r| r.outcome == o).count();
        let (successes, misses, flyzone_exits) = (
            count(TrialOutcome::Success),
            count(TrialOutcome::Miss),
            count(TrialOutcome::FlyzoneExit),
        );
        let landed: Vec<f64> = results
            .iter()
            .filter(|r| r.outcome != TrialOutcome::FlyzoneExit)
            .map(|r| r.duration)
            .collect();
        let mean_landing_time = if landed.is_empty() {
            f64::NAN
        } else {
            landed.iter().sum::<f64>() / landed.len() as f64
        };
        let jitter_mean = results.iter().map(|r| r.jitter).sum::<f64>() / n.max(1) as f64;
        let jitter_var = results.iter().map(|r| (r.jitter - jitter_mean).powi(2)).sum::<f64>() / n.max(1) as f64;
        let trajectories = if results.iter().any(|r| r.log.is_some()) {
            Some(results.into_iter().map(|r| r.log.unwrap_or_default()).collect())
        } else {
            None
        };
        Self {
            label,
            n_trials: n,
            successes,
            misses,
            flyzone_exits,
            success_rate: successes as f64 / n.max(1) as f64,
            mean_landing_time,
            jitter_mean,
            jitter_std: jitter_var.sqrt(),
            trajectories,
        }
    }
}

/// Runs all trials of one scenario, fanned out over the rayon pool.
pub fn run_scenario(ctx: &RunContext, policy: &Policy, cfg: &TrialConfig) -> TrialStats {
    let results: Vec<TrialResult> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| run_trial(ctx, policy, cfg, i))
        .collect();
    TrialStats::from_results(cfg.trajectory.label(), results)
}

/// Runs every scenario in order.
pub fn run_battery(ctx: &RunContext, policy: &Policy, configs: &[TrialConfig]) -> Vec<TrialStats> {
    configs.iter().map(|c| run_scenario(ctx, policy, c)).collect()
}

/// Trial configurations for the configured evaluation scenarios. Scenario
/// seeds depend on the master seed and the scenario position only, so noisy
/// and noiseless batteries start from the same positions.
pub fn battery_configs(ctx: &RunContext, noisy: bool, seed: u64) -> Vec<TrialConfig> {
    ctx.config
        .evaluation
        .scenarios
        .iter()
        .enumerate()
        .map(|(k, t)| TrialConfig::from_context(ctx, *t, noisy, derive_seed(seed, &[EVAL_TAG, k as u64])))
        .collect()
}

/// Results as CSV, full precision, one row per scenario.
pub fn stats_csv(rows: &[(String, Vec<TrialStats>)]) -> String {
    let mut out = String::from(
        "agent,scenario,n_trials,successes,misses,flyzone_exits,success_rate,mean_landing_time,jitter_mean,jitter_std\n",
    );
    for (agent, stats) in rows {
        for s in stats {
            out.push_str(&format!(
                "{agent},{},{},{},{},{},{},{},{},{}\n",
                s.label,
                s.n_trials,
                s.successes,
                s.misses,
                s.flyzone_exits,
                s.success_rate,
                s.mean_landing_time,
                s.jitter_mean,
                s.jitter_std
            ));
        }
    }
    out
}

/// Aligned text table of success rates in percent, one column per scenario.
pub fn stats_table(rows: &[(String, Vec<TrialStats>)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let mut header = vec!["agent".to_string()];
    header.extend(first.iter().map(|s| s.label.clone()));
    let mut body: Vec<Vec<String>> = rows
        .iter()
        .map(|(agent, stats)| {
            let mut r = vec![agent.clone()];
            r.extend(
                stats
                    .iter()
                    .map(|s| format!("{:.2}", round_half_even(100.0 * s.success_rate, 2))),
            );
            r
        })
        .collect();
    body.insert(0, header);
    let cols = body.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| body.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &body {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if c == 0 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Per-tick trajectory of one trial as CSV.
pub fn trajectory_csv(log: &[TrialLogRow]) -> String {
    let mut out = String::from("t,uav_x,uav_y,uav_z,platform_x,platform_y,theta_ref,phi_ref,action_lon,action_lat\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.uav.x,
            r.uav.y,
            r.uav.z,
            r.platform.x,
            r.platform.y,
            r.theta_ref,
            r.phi_ref,
            r.action_lon.index(),
            r.action_lat.index()
        ));
    }
    out
}
