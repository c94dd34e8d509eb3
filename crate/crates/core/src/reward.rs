//! Shaped per-step reward with clipping and terminal bonuses scaled by the
//! maximum achievable non-terminal reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::NormalizedObs1D;
use crate::vehicle::pitch_from_index;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub w_p: f64,
    pub w_v: f64,
    pub w_theta: f64,
    pub w_dur: f64,
    pub w_suc: f64,
    pub w_fail: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_p: -100.0,
            w_v: -10.0,
            w_theta: -1.55,
            w_dur: -6.0,
            w_suc: 2.6,
            w_fail: -2.6,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let shaping_negative = self.w_p < 0.0 && self.w_v < 0.0 && self.w_theta < 0.0 && self.w_dur < 0.0;
        if !shaping_negative || !(self.w_suc > 0.0) || !(self.w_fail < 0.0) {
            return Err(Error::Config(
                "reward weights need w_p, w_v, w_theta, w_dur, w_fail < 0 and w_suc > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step reward bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RMax {
    pub r_p_max: f64,
    pub r_v_max: f64,
    pub r_theta_max: f64,
    pub r_dur_max: f64,
    pub r_max: f64,
}

pub fn compute_r_max(w: &RewardWeights, v_lim: f64, a_lim: f64, dt: f64, delta_theta: f64, theta_max: f64) -> RMax {
    let r_p_max = w.w_p.abs() * v_lim * dt;
    let r_v_max = w.w_v.abs() * a_lim * dt;
    let r_theta_max = w.w_theta.abs() * v_lim * delta_theta / theta_max;
    let r_dur_max = w.w_dur * v_lim * dt;
    RMax {
        r_p_max,
        r_v_max,
        r_theta_max,
        r_dur_max,
        r_max: r_p_max + r_v_max + r_theta_max + r_dur_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    None,
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub r_p: f64,
    pub r_v: f64,
    pub r_theta: f64,
    pub r_dur: f64,
    pub r_term: f64,
    pub total: f64,
}

/// Constants shared by every reward evaluation in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardContext {
    pub weights: RewardWeights,
    pub dt: f64,
    pub theta_max: f64,
    pub n_theta: u32,
}

impl RewardContext {
    pub fn r_max(&self, v_lim: f64, a_lim: f64) -> RMax {
        compute_r_max(
            &self.weights,
            v_lim,
            a_lim,
            self.dt,
            self.theta_max / f64::from(self.n_theta),
            self.theta_max,
        )
    }
}

/// One agent observation: normalized kinematics plus the pitch index.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentObs {
    pub obs: NormalizedObs1D,
    pub i_theta: usize,
}

pub fn step_reward(
    prev: &AgentObs,
    cur: &AgentObs,
    v_lim: f64,
    rmax: &RMax,
    ctx: &RewardContext,
    terminal: Terminal,
) -> RewardBreakdown {
    let w = &ctx.weights;
    let r_p = (w.w_p * (cur.obs.p.abs() - prev.obs.p.abs())).clamp(-rmax.r_p_max, rmax.r_p_max);
    let r_v = (w.w_v * (cur.obs.v.abs() - prev.obs.v.abs())).clamp(-rmax.r_v_max, rmax.r_v_max);
    let theta_now = pitch_from_index(cur.i_theta, ctx.theta_max, ctx.n_theta);
    let theta_before = pitch_from_index(prev.i_theta, ctx.theta_max, ctx.n_theta);
    let r_theta = w.w_theta * (theta_now.abs() - theta_before.abs()) / ctx.theta_max * v_lim;
    let r_dur = w.w_dur * v_lim * ctx.dt;
    let r_term = match terminal {
        Terminal::None => 0.0,
        Terminal::Success => w.w_suc * rmax.r_max,
        Terminal::Failure => w.w_fail * rmax.r_max,
    };
    RewardBreakdown {
        r_p,
        r_v,
        r_theta,
        r_dur,
        r_term,
        total: r_p + r_v + r_theta + r_dur + r_term,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1.0 / 22.92;

    fn ctx() -> RewardContext {
        RewardContext {
            weights: RewardWeights::default(),
            dt: DT,
            theta_max: 0.3729,
            n_theta: 3,
        }
    }

    fn at(p: f64, v: f64, a: f64, i_theta: usize) -> AgentObs {
        AgentObs {
            obs: NormalizedObs1D { p, v, a },
            i_theta,
        }
    }

    #[test]
    fn r_max_first_step() {
        let r = ctx().r_max(1.0, 1.0);
        assert!((r.r_p_max - 4.3630).abs() < 5e-5);
        assert!((r.r_v_max - 0.4363).abs() < 5e-5);
        assert!((r.r_theta_max - 0.5167).abs() < 5e-5);
        assert!((r.r_dur_max + 0.2618).abs() < 5e-5);
        assert!((r.r_max - 5.0542).abs() < 5e-5);
    }

    #[test]
    fn r_max_scales_with_v_lim() {
        let r0 = ctx().r_max(1.0, 1.0);
        let r1 = ctx().r_max(0.8, 1.0);
        assert!((r1.r_p_max - 0.8 * r0.r_p_max).abs() < 1e-12);
        assert_eq!(r1.r_v_max, r0.r_v_max);
        let mut tiny = ctx();
        tiny.dt = 1e-12;
        let r = tiny.r_max(1.0, 1.0);
        assert!(r.r_p_max < 1e-9 && r.r_v_max < 1e-9 && r.r_dur_max.abs() < 1e-9);
    }

    #[test]
    fn idle_transition_pays_duration_only() {
        let c = ctx();
        let rm = c.r_max(1.0, 1.0);
        let s = at(0.2, 0.1, 0.0, 3);
        let r = step_reward(&s, &s, 1.0, &rm, &c, Terminal::None);
        assert!((r.total + 0.2618).abs() < 5e-5);
        assert_eq!(r.total, r.r_dur);
    }

    #[test]
    fn approaching_is_rewarded() {
        let c = ctx();
        let rm = c.r_max(1.0, 1.0);
        let r = step_reward(
            &at(0.30, 0.0, 0.0, 3),
            &at(0.29, 0.0, 0.0, 3),
            1.0,
            &rm,
            &c,
            Terminal::None,
        );
        assert!((r.r_p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn success_bonus() {
        let c = ctx();
        let rm = c.r_max(1.0, 1.0);
        let s = at(0.0, 0.0, 0.0, 3);
        let r = step_reward(&s, &s, 1.0, &rm, &c, Terminal::Success);
        assert!((r.r_term - 13.141).abs() < 5e-4);
        let f = step_reward(&s, &s, 1.0, &rm, &c, Terminal::Failure);
        assert!((f.r_term + 13.141).abs() < 5e-4);
    }

    #[test]
    fn pitch_reduction_rewarded() {
        let c = ctx();
        let rm = c.r_max(1.0, 1.0);
        let r = step_reward(
            &at(0.0, 0.0, 0.0, 5),
            &at(0.0, 0.0, 0.0, 4),
            1.0,
            &rm,
            &c,
            Terminal::None,
        );
        assert!((r.r_theta - rm.r_theta_max).abs() < 1e-12);
    }

    #[test]
    fn antisymmetry_without_saturation() {
        let c = ctx();
        let rm = c.r_max(1.0, 1.0);
        let a = at(0.31, -0.2, 0.1, 2);
        let b = at(0.30, -0.19, 0.0, 3);
        let f = step_reward(&a, &b, 1.0, &rm, &c, Terminal::None);
        let r = step_reward(&b, &a, 1.0, &rm, &c, Terminal::None);
        assert!((f.r_p + r.r_p).abs() < 1e-12);
        assert!((f.r_v + r.r_v).abs() < 1e-12);
        assert!((f.r_theta + r.r_theta).abs() < 1e-12);
    }

    #[test]
    fn weights_validation() {
        assert!(RewardWeights::default().validate().is_ok());
        let w = RewardWeights {
            w_suc: -1.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn non_terminal_reward_never_exceeds_r_max(
            p0 in -1.0f64..1.0, v0 in -1.0f64..1.0, p1 in -1.0f64..1.0, v1 in -1.0f64..1.0,
            i0 in 0usize..7, step in -1i32..2, v_lim in 0.1f64..1.0,
        ) {
            let c = ctx();
            let rm = c.r_max(v_lim, 1.0);
            let i1 = (i0 as i32 + step).clamp(0, 6) as usize;
            let r = step_reward(&at(p0, v0, 0.0, i0), &at(p1, v1, 0.0, i1), v_lim, &rm, &c, Terminal::None);
            proptest::prop_assert!(r.total <= rm.r_max + 1e-12);
            let floor = rm.r_dur_max - (rm.r_p_max + rm.r_v_max + rm.r_theta_max);
            proptest::prop_assert!(r.total >= floor - 1e-12);
        }
    }
}
