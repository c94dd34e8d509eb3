//! Sequential curriculum training of the 1-D landing agent.

use std::collections::VecDeque;
use std::time::Instant;

use rand_distr::{Distribution, Normal};

use crate::config::RunContext;
use crate::discretization::{is_goal, map_to_discrete, CurriculumGeometry, DiscreteState};
use crate::double_q::{double_q_update, epsilon_at, select_action, QTablePair};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::observation::{
    axis_project, normalize_clip, Axis, NoiseModel, NormalizedObs1D, Observer, RelativeObservation,
};
use crate::platform::{platform_state_at, TrajectorySpec};
use crate::reward::{step_reward, AgentObs, RMax, Terminal};
use crate::rng::EpisodeRngs;
use crate::vehicle::{apply_action, in_fly_zone, pitch_from_index, Action, UavState, Vehicle};

/// Seed-path tag separating training episodes from other streams.
pub const TRAIN_TAG: u64 = 0x7452_4149_4e00;
/// Seed-path tag for post-step greedy checks.
pub const CHECK_TAG: u64 = 0x4348_4543_4b00;

/// Multiplies every action value by `r_max(next) / r_max(current)`.
pub fn scale_q_transfer(q: &QTablePair, rmax_i: &RMax, rmax_next: &RMax) -> Result<QTablePair> {
    if rmax_i.r_max == 0.0 || !rmax_i.r_max.is_finite() {
        return Err(Error::Config(format!(
            "cannot scale Q-values: r_max of the source step is {}",
            rmax_i.r_max
        )));
    }
    Ok(q.scaled(rmax_next.r_max / rmax_i.r_max))
}

/// Number of states whose greedy action (lowest index on ties) differs
/// between `before` and `after`.
pub fn greedy_violations(before: &QTablePair, after: &QTablePair) -> usize {
    (0..before.n_states())
        .filter(|&s| before.greedy_first(s) != after.greedy_first(s))
        .count()
}

/// Initial position for a training episode of curriculum step `step`.
pub fn initial_uav_position<R: rand::Rng + ?Sized>(step: usize, ctx: &RunContext, rng: &mut R) -> Vec3 {
    let zone = &ctx.config.scenario.fly_zone;
    let z = ctx.config.training.z_init;
    if step == 0 {
        let sd = ctx.derived.p_max / 3.0;
        let x = Normal::new(0.0, sd).expect("p_max is positive").sample(rng);
        Vec3::new(x.clamp(-zone.x_max, zone.x_max), 0.0, z)
    } else {
        uniform_in_zone(ctx, z, rng)
    }
}

pub(crate) fn uniform_in_zone<R: rand::Rng + ?Sized>(ctx: &RunContext, z: f64, rng: &mut R) -> Vec3 {
    let zone = &ctx.config.scenario.fly_zone;
    Vec3::new(
        rng.random_range(-zone.x_max..=zone.x_max),
        rng.random_range(-zone.y_max..=zone.y_max),
        z,
    )
}

/// Continuous residence time in the latest curriculum step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalDwellTracker {
    pub time_in_latest_step: f64,
    pub required: f64,
    inside: bool,
}

impl GoalDwellTracker {
    pub fn new(required: f64) -> Self {
        Self {
            time_in_latest_step: 0.0,
            required,
            inside: false,
        }
    }

    /// Records one agent tick; the counter restarts on every entry.
    pub fn update(&mut self, in_latest: bool, dt: f64) -> f64 {
        if in_latest {
            if self.inside {
                self.time_in_latest_step += dt;
            } else {
                self.time_in_latest_step = 0.0;
            }
        } else {
            self.time_in_latest_step = 0.0;
        }
        self.inside = in_latest;
        self.time_in_latest_step
    }

    pub fn satisfied(&self) -> bool {
        self.inside && self.time_in_latest_step + 1e-9 >= self.required
    }
}

/// Fixed-step clock driving physics, observation and agent rates.
#[derive(Debug, Clone)]
pub struct SimClock {
    pub dt_sim: f64,
    pub agent_period: f64,
    steps: u64,
    obs_every: u64,
    agent_ticks: u64,
}

impl SimClock {
    pub fn new(dt_sim: f64, obs_rate: f64, agent_period: f64) -> Self {
        let obs_every = ((1.0 / obs_rate) / dt_sim).round().max(1.0) as u64;
        Self {
            dt_sim,
            agent_period,
            steps: 0,
            obs_every,
            agent_ticks: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt_sim
    }

    pub fn obs_due(&self) -> bool {
        self.steps.is_multiple_of(self.obs_every)
    }

    /// True on the first physics step at or after the next agent tick time;
    /// consuming the tick schedules the following one.
    pub fn take_agent_tick(&mut self) -> bool {
        let due = self.agent_ticks as f64 * self.agent_period;
        if self.time() + 1e-9 >= due {
            self.agent_ticks += 1;
            true
        } else {
            false
        }
    }

    pub fn advance(&mut self) {
        self.steps += 1;
    }
}

/// Normalized observation of one axis.
pub fn normalized_axis(obs: &RelativeObservation, axis: Axis, ctx: &RunContext) -> NormalizedObs1D {
    let (p, v, a) = axis_project(obs, axis);
    let d = &ctx.derived;
    normalize_clip(p, v, a, d.p_max, d.v_max, d.a_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    FlyzoneExit,
    Timeout,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::FlyzoneExit => "flyzone_exit",
            Outcome::Timeout => "timeout",
        }
    }
}

/// One agent tick of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub state: DiscreteState,
    pub action: Action,
    pub explored: bool,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub accumulated_reward: f64,
    pub steps: usize,
    pub duration: f64,
    pub log: Option<Vec<TickRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpisodeMode {
    /// Learning episode number `episode` within the current curriculum step.
    Train { episode: usize },
    /// Greedy rollout without updates.
    Greedy,
}

/// Platform trajectory and optional fixed start for an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSetup {
    pub trajectory: TrajectorySpec,
    pub start: Option<Vec3>,
    pub start_velocity: Vec3,
    pub force_epsilon: Option<f64>,
}

impl EpisodeSetup {
    pub fn training(ctx: &RunContext) -> Self {
        Self {
            trajectory: ctx.config.training_trajectory(),
            start: None,
            start_velocity: Vec3::ZERO,
            force_epsilon: None,
        }
    }
}

struct Pending {
    step: usize,
    row: usize,
    action: Action,
    obs: AgentObs,
}

/// Runs one longitudinal episode with `step_index` as the latest curriculum
/// step. `tables` must hold at least `step_index + 1` entries.
pub fn run_episode(
    ctx: &RunContext,
    setup: &EpisodeSetup,
    step_index: usize,
    tables: &mut [QTablePair],
    mode: EpisodeMode,
    rngs: &mut EpisodeRngs,
    record: bool,
) -> Result<EpisodeResult> {
    if tables.len() <= step_index {
        return Err(Error::GeometryMismatch(format!(
            "{} tables supplied for curriculum step {step_index}",
            tables.len()
        )));
    }
    let cfg = &ctx.config;
    let geo = cfg.geometry(step_index)?;
    let n_theta = ctx.n_theta();
    let theta_max = ctx.derived.theta_max;
    let gamma = cfg.training.gamma;

    let start = match setup.start {
        Some(p) => p,
        None => initial_uav_position(step_index, ctx, &mut rngs.init),
    };
    let mut uav = UavState::hover_at(start, 0.0, cfg.training.vz);
    uav.velocity = setup.start_velocity;
    let mut vehicle = Vehicle::new(uav, ctx.vehicle);
    let mut observer = Observer::new(cfg.scenario.accel_cutoff, cfg.scenario.obs_rate, NoiseModel::NONE);
    let mut clock = SimClock::new(cfg.scenario.dt_sim, cfg.scenario.obs_rate, ctx.derived.dt_agent);
    let mut dwell = GoalDwellTracker::new(cfg.training.dwell_time);
    let mut i_theta = n_theta as usize;
    let mut pending: Option<Pending> = None;
    let mut total = 0.0;
    let mut steps = 0usize;
    let mut log = record.then(Vec::new);

    let epsilon = setup.force_epsilon.unwrap_or(match mode {
        EpisodeMode::Train { episode } => epsilon_at(episode, step_index, &cfg.training.exploration),
        EpisodeMode::Greedy => 0.0,
    });
    let learn = matches!(mode, EpisodeMode::Train { .. });

    // Closes the pending transition into `cur` (observed in `ds`).
    let settle = |pending: &mut Option<Pending>,
                  tables: &mut [QTablePair],
                  cur: &AgentObs,
                  ds: &DiscreteState,
                  terminal: Terminal,
                  rngs: &mut EpisodeRngs|
     -> f64 {
        let Some(p) = pending.take() else { return 0.0 };
        let g = &geo.steps[p.step];
        let rmax = ctx.reward.r_max(g.v_lim, g.a_lim);
        let r = step_reward(&p.obs, cur, g.v_lim, &rmax, &ctx.reward, terminal).total;
        if learn {
            let next = match terminal {
                Terminal::None => Some(tables[ds.step].next_values(ds.flat_index(n_theta))),
                _ => None,
            };
            double_q_update(
                &mut tables[p.step],
                p.row,
                p.action,
                r,
                next,
                gamma,
                &cfg.training.learning_rate,
                &mut rngs.coin,
            );
        }
        r
    };

    let platform_at = |t: f64| platform_state_at(&setup.trajectory, t);

    loop {
        let t = clock.time();
        let platform = platform_at(t);
        if clock.obs_due() {
            observer.observe(&vehicle.state, &platform, &mut rngs.noise);
        }
        if clock.take_agent_tick() {
            let obs = normalized_axis(observer.latest(), Axis::Longitudinal, ctx);
            let ds = map_to_discrete(&obs, &geo, i_theta);
            let cur = AgentObs { obs, i_theta };
            dwell.update(ds.step == step_index, ctx.derived.dt_agent);
            let success = is_goal(&ds, step_index) && dwell.satisfied();
            let terminal = if success { Terminal::Success } else { Terminal::None };
            total += settle(&mut pending, tables, &cur, &ds, terminal, rngs);
            if success {
                return Ok(finish(Outcome::Success, total, steps, t, log));
            }
            if t + 1e-9 >= cfg.training.t_max {
                return Ok(finish(Outcome::Timeout, total, steps, t, log));
            }
            let row = ds.flat_index(n_theta);
            let sel = select_action(&tables[ds.step], row, epsilon, &mut rngs.explore);
            if let Some(l) = log.as_mut() {
                l.push(TickRecord {
                    t,
                    state: ds,
                    action: sel.action,
                    explored: sel.explored,
                    epsilon,
                });
            }
            i_theta = apply_action(i_theta, sel.action, n_theta);
            vehicle.state.attitude_setpoint.pitch = pitch_from_index(i_theta, theta_max, n_theta);
            pending = Some(Pending {
                step: ds.step,
                row,
                action: sel.action,
                obs: cur,
            });
            steps += 1;
        }

        vehicle.step(clock.dt_sim);
        clock.advance();
        if !vehicle.state.is_finite() {
            return Err(Error::NonFinite(format!(
                "vehicle state diverged at t = {:.3} s in curriculum step {step_index}",
                clock.time()
            )));
        }
        if !in_fly_zone(vehicle.state.position, &cfg.scenario.fly_zone) {
            let t = clock.time();
            let fresh = observer.observe(&vehicle.state, &platform_at(t), &mut rngs.noise);
            let obs = normalized_axis(&fresh, Axis::Longitudinal, ctx);
            let ds = map_to_discrete(&obs, &geo, i_theta);
            let cur = AgentObs { obs, i_theta };
            total += settle(&mut pending, tables, &cur, &ds, Terminal::Failure, rngs);
            return Ok(finish(Outcome::FlyzoneExit, total, steps, t, log));
        }
    }
}

fn finish(outcome: Outcome, reward: f64, steps: usize, t: f64, log: Option<Vec<TickRecord>>) -> EpisodeResult {
    EpisodeResult {
        outcome,
        accumulated_reward: reward,
        steps,
        duration: t,
        log,
    }
}

/// One row of the episode-log CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub step_index: usize,
    pub episode: usize,
    pub outcome: Outcome,
    pub reward: f64,
    pub steps: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step_index: usize,
    pub episodes: usize,
    pub converged: bool,
    pub final_window_rate: f64,
    pub wall_clock_s: f64,
    pub transfer_ratio: f64,
    pub transfer_violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingStatus {
    Converged,
    NonConverged { step: usize, episodes: usize },
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub seed: u64,
    /// One table pair per completed or attempted curriculum step.
    pub tables: Vec<QTablePair>,
    pub geometry: CurriculumGeometry,
    pub steps: Vec<StepReport>,
    pub episodes: Vec<EpisodeRecord>,
    /// Entry `i` holds tables `0..=i` as they stood when step `i` ended.
    pub snapshots: Vec<Vec<QTablePair>>,
    pub status: TrainingStatus,
}

impl TrainingRun {
    pub fn ensure_converged(&self) -> Result<()> {
        match self.status {
            TrainingStatus::Converged => Ok(()),
            TrainingStatus::NonConverged { step, episodes } => Err(Error::NonConvergence { step, episodes }),
        }
    }

    pub fn transfer_violations(&self) -> usize {
        self.steps.iter().map(|s| s.transfer_violations).sum()
    }

    pub fn episode_log_csv(&self) -> String {
        let mut out = String::from("step,episode,outcome,reward,steps,epsilon\n");
        for r in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step_index,
                r.episode,
                r.outcome.label(),
                r.reward,
                r.steps,
                r.epsilon
            ));
        }
        out
    }
}

/// Trailing success statistic over the last `capacity` episodes.
#[derive(Debug, Clone)]
pub struct SuccessWindow {
    capacity: usize,
    buf: VecDeque<bool>,
    successes: usize,
}

impl SuccessWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buf: VecDeque::with_capacity(capacity),
            successes: 0,
        }
    }

    pub fn push(&mut self, success: bool) {
        if self.buf.len() == self.capacity && self.buf.pop_front() == Some(true) {
            self.successes -= 1;
        }
        self.buf.push_back(success);
        if success {
            self.successes += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buf.len() == self.capacity
    }

    pub fn rate(&self) -> f64 {
        if self.buf.is_empty() {
            0.0
        } else {
            self.successes as f64 / self.buf.len() as f64
        }
    }
}

/// Trains curriculum steps `0..=n_cs` in order. Running out of episodes on a
/// step stops the run and reports non-convergence; the tables trained so
/// far are returned either way.
pub fn train_curriculum(ctx: &RunContext, seed: u64) -> Result<TrainingRun> {
    let cfg = &ctx.config;
    let n_cs = ctx.derived.n_cs;
    let n_states = ctx.n_states();
    let setup = EpisodeSetup::training(ctx);
    let mut tables: Vec<QTablePair> = vec![QTablePair::zeros(n_states)];
    let mut steps = Vec::new();
    let mut episodes = Vec::new();
    let mut snapshots = Vec::new();
    let mut status = TrainingStatus::Converged;

    for i in 0..=n_cs {
        let started = Instant::now();
        let (mut ratio, mut violations) = (1.0, 0);
        if i > 0 {
            let prev = cfg.geometry(i - 1)?.steps[i - 1];
            let next = cfg.geometry(i)?.steps[i];
            let rmax_i = ctx.reward.r_max(prev.v_lim, prev.a_lim);
            let rmax_next = ctx.reward.r_max(next.v_lim, next.a_lim);
            let scaled = scale_q_transfer(&tables[i - 1], &rmax_i, &rmax_next)?;
            ratio = rmax_next.r_max / rmax_i.r_max;
            violations = greedy_violations(&tables[i - 1], &scaled);
            tables.push(scaled);
        }

        let mut window = SuccessWindow::new(cfg.training.success_window);
        let mut converged = false;
        let mut n = 0;
        while n < cfg.training.episode_cap {
            let mut rngs = EpisodeRngs::new(seed, &[TRAIN_TAG, i as u64, n as u64]);
            let res = run_episode(
                ctx,
                &setup,
                i,
                &mut tables,
                EpisodeMode::Train { episode: n },
                &mut rngs,
                false,
            )?;
            episodes.push(EpisodeRecord {
                step_index: i,
                episode: n,
                outcome: res.outcome,
                reward: res.accumulated_reward,
                steps: res.steps,
                epsilon: epsilon_at(n, i, &cfg.training.exploration),
            });
            window.push(res.outcome == Outcome::Success);
            n += 1;
            if window.is_full() && window.rate() + 1e-12 >= cfg.training.success_threshold {
                converged = true;
                break;
            }
        }
        steps.push(StepReport {
            step_index: i,
            episodes: n,
            converged,
            final_window_rate: window.rate(),
            wall_clock_s: started.elapsed().as_secs_f64(),
            transfer_ratio: ratio,
            transfer_violations: violations,
        });
        snapshots.push(tables.clone());
        if !converged {
            status = TrainingStatus::NonConverged { step: i, episodes: n };
            break;
        }
    }

    let latest = tables.len() - 1;
    Ok(TrainingRun {
        seed,
        tables,
        geometry: cfg.geometry(latest)?,
        steps,
        episodes,
        snapshots,
        status,
    })
}

/// Greedy success rate of curriculum step `step_index` over `episodes` fresh
/// episodes, without learning.
pub fn greedy_success_rate(
    ctx: &RunContext,
    tables: &[QTablePair],
    step_index: usize,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let setup = EpisodeSetup::training(ctx);
    let mut local = tables.to_vec();
    let mut ok = 0;
    for n in 0..episodes {
        let mut rngs = EpisodeRngs::new(seed, &[CHECK_TAG, step_index as u64, n as u64]);
        let res = run_episode(
            ctx,
            &setup,
            step_index,
            &mut local,
            EpisodeMode::Greedy,
            &mut rngs,
            false,
        )?;
        if res.outcome == Outcome::Success {
            ok += 1;
        }
    }
    Ok(ok as f64 / episodes.max(1) as f64)
}
