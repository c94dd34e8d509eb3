//! Reduced-order multi-rotor plant.
//!
//! Horizontal motion follows the thrust decomposition of a tilted vehicle
//! with altitude-holding thrust compensation, attitude tracks its setpoint
//! through a first-order lag, and the vertical velocity and yaw are held by
//! PID loops.

use serde::{Deserialize, Serialize};

use crate::math::Vec3;
use crate::platform::PlatformState;

/// Roll, pitch, yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UavState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Attitude,
    pub attitude_setpoint: Attitude,
    pub vz_setpoint: f64,
}

impl UavState {
    /// Hovering at `position` with heading `yaw`.
    pub fn hover_at(position: Vec3, yaw: f64, vz_setpoint: f64) -> Self {
        let att = Attitude {
            roll: 0.0,
            pitch: 0.0,
            yaw,
        };
        Self {
            position,
            velocity: Vec3::ZERO,
            attitude: att,
            attitude_setpoint: att,
            vz_setpoint,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.velocity.is_finite()
            && self.attitude.roll.is_finite()
            && self.attitude.pitch.is_finite()
            && self.attitude.yaw.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlyZone {
    pub x_max: f64,
    pub y_max: f64,
    pub z_max: f64,
}

pub fn in_fly_zone(p: Vec3, zone: &FlyZone) -> bool {
    p.x >= -zone.x_max
        && p.x <= zone.x_max
        && p.y >= -zone.y_max
        && p.y <= zone.y_max
        && p.z >= 0.0
        && p.z <= zone.z_max
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
}

/// PID with trapezoidal integration and derivative on error.
///
/// The first step after a reset treats the previous error as equal to the
/// current one, so it neither produces a derivative kick nor a half-weighted
/// integral sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub gains: PidGains,
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        let prev = self.prev_error.unwrap_or(error);
        self.integral += 0.5 * (error + prev) * dt;
        let derivative = (error - prev) / dt;
        self.prev_error = Some(error);
        self.gains.k_p * error + self.gains.k_i * self.integral + self.gains.k_d * derivative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub g: f64,
    /// Attitude tracking time constant, s.
    pub tau_att: f64,
    /// Symmetric limit applied to roll and pitch, rad.
    pub tilt_limit: f64,
    pub yaw_pid: PidGains,
    pub vz_pid: PidGains,
}

/// The plant: vehicle state plus its low-level loops.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub state: UavState,
    pub params: VehicleParams,
    yaw_pid: PidState,
    vz_pid: PidState,
}

impl Vehicle {
    pub fn new(state: UavState, params: VehicleParams) -> Self {
        Self {
            state,
            params,
            yaw_pid: PidState::new(params.yaw_pid),
            vz_pid: PidState::new(params.vz_pid),
        }
    }

    /// Advances the plant by `dt` (semi-implicit Euler).
    pub fn step(&mut self, dt: f64) {
        let p = &self.params;
        let s = &mut self.state;
        let blend = 1.0 - (-dt / p.tau_att).exp();
        s.attitude.pitch += (s.attitude_setpoint.pitch - s.attitude.pitch) * blend;
        s.attitude.roll += (s.attitude_setpoint.roll - s.attitude.roll) * blend;
        s.attitude.pitch = s.attitude.pitch.clamp(-p.tilt_limit, p.tilt_limit);
        s.attitude.roll = s.attitude.roll.clamp(-p.tilt_limit, p.tilt_limit);

        let yaw_rate = self.yaw_pid.step(s.attitude_setpoint.yaw - s.attitude.yaw, dt);
        s.attitude.yaw += yaw_rate * dt;

        let a_z = self
            .vz_pid
            .step(s.vz_setpoint - s.velocity.z, dt)
            .clamp(-2.0 * p.g, 2.0 * p.g);

        let horizontal = horizontal_acceleration(&s.attitude, p.g);
        let accel = Vec3::new(horizontal.x, horizontal.y, a_z);
        s.velocity += accel * dt;
        s.position += s.velocity * dt;
    }
}

/// Earth-frame horizontal acceleration produced by the current attitude.
/// Positive pitch accelerates along -x of the stability frame, positive roll
/// along +y.
pub fn horizontal_acceleration(att: &Attitude, g: f64) -> Vec3 {
    Vec3::new(-g * att.pitch.tan(), g * att.roll.tan(), 0.0).rotate_z(att.yaw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Increase = 0,
    Decrease = 1,
    Hold = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Increase, Action::Decrease, Action::Hold];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }
}

/// Saturating update of the pitch index.
pub fn apply_action(i_theta: usize, action: Action, n_theta: u32) -> usize {
    let top = 2 * n_theta as usize;
    match action {
        Action::Increase => (i_theta + 1).min(top),
        Action::Decrease => i_theta.saturating_sub(1),
        Action::Hold => i_theta,
    }
}

/// Pitch setpoint of index `i_theta`; the centre index is exactly level and
/// the end indices are exactly `-theta_max` and `theta_max`.
pub fn pitch_from_index(i_theta: usize, theta_max: f64, n_theta: u32) -> f64 {
    let n = f64::from(n_theta);
    theta_max * ((i_theta as f64 - n) / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Touchdown {
    Airborne,
    Success,
    Miss,
}

pub fn touchdown_check(uav_position: Vec3, platform: &PlatformState, l_mp: f64, platform_height: f64) -> Touchdown {
    if uav_position.z > platform_height {
        return Touchdown::Airborne;
    }
    let half = l_mp / 2.0;
    if (uav_position.x - platform.position.x).abs() <= half && (uav_position.y - platform.position.y).abs() <= half {
        Touchdown::Success
    } else {
        Touchdown::Miss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VehicleParams {
        VehicleParams {
            g: 9.81,
            tau_att: 0.1,
            tilt_limit: 0.5,
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

    #[test]
    fn hover_is_an_equilibrium() {
        let start = UavState::hover_at(Vec3::new(0.3, -0.2, 2.0), 0.4, 0.0);
        let mut v = Vehicle::new(start, params());
        for _ in 0..5000 {
            v.step(0.002);
        }
        assert_eq!(v.state.position, start.position);
        assert_eq!(v.state.velocity, Vec3::ZERO);
        assert_eq!(v.state.attitude, start.attitude);
    }

    #[test]
    fn tilted_vehicle_accelerates() {
        let mut s = UavState::hover_at(Vec3::new(0.0, 0.0, 2.0), 0.0, 0.0);
        s.attitude.pitch = 0.1;
        s.attitude_setpoint.pitch = 0.1;
        let mut v = Vehicle::new(s, params());
        v.step(0.002);
        let a = v.state.velocity.x / 0.002;
        assert!((a - (-9.81 * 0.1f64.tan())).abs() < 1e-9);
        assert!((a + 0.9843).abs() < 5e-5);
    }

    #[test]
    fn attitude_lag_single_step() {
        let mut s = UavState::hover_at(Vec3::new(0.0, 0.0, 2.0), 0.0, 0.0);
        s.attitude_setpoint.pitch = 0.1;
        let mut v = Vehicle::new(s, params());
        v.step(0.002);
        let expected = 0.1 * (1.0 - (-0.02f64).exp());
        assert!((v.state.attitude.pitch - expected).abs() < 1e-15);
        assert!((v.state.attitude.pitch - 0.00198).abs() < 1e-5);
    }

    #[test]
    fn attitude_lag_converges_exponentially() {
        let mut s = UavState::hover_at(Vec3::new(0.0, 0.0, 2.0), 0.0, 0.0);
        s.attitude.pitch = -0.2;
        s.attitude_setpoint.pitch = 0.15;
        let mut v = Vehicle::new(s, params());
        for k in 1..=400 {
            v.step(0.002);
            let expected = 0.35 * (-(k as f64) * 0.002 / 0.1).exp();
            assert!(((0.15 - v.state.attitude.pitch) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn max_tilt_delivers_k_a_times_platform_acceleration() {
        let a_mp_max = 1.28;
        let theta_max = crate::platform::derive_theta_max(3.0, a_mp_max, 9.81);
        let mut s = UavState::hover_at(Vec3::new(0.0, 0.0, 2.0), 0.0, 0.0);
        s.attitude.pitch = -theta_max;
        s.attitude_setpoint.pitch = -theta_max;
        let a = horizontal_acceleration(&s.attitude, 9.81);
        assert!((a.x - 3.0 * a_mp_max).abs() < 1e-9);
    }

    #[test]
    fn yaw_rotates_thrust_direction() {
        let att = Attitude {
            roll: 0.0,
            pitch: -0.1,
            yaw: std::f64::consts::FRAC_PI_2,
        };
        let a = horizontal_acceleration(&att, 9.81);
        assert!(a.x.abs() < 1e-12);
        assert!((a.y - 9.81 * 0.1f64.tan()).abs() < 1e-12);
    }

    #[test]
    fn vertical_loop_tracks_descent() {
        let s = UavState::hover_at(Vec3::new(0.0, 0.0, 4.0), 0.0, -0.1);
        let mut v = Vehicle::new(s, params());
        for _ in 0..2500 {
            v.step(0.002);
        }
        assert!((v.state.velocity.z + 0.1).abs() < 1e-3);
    }

    #[test]
    fn pid_examples() {
        let zero = PidGains {
            k_p: 5.0,
            k_i: 10.0,
            k_d: 0.0,
        };
        let mut p = PidState::new(zero);
        for _ in 0..10 {
            assert_eq!(p.step(0.0, 0.01), 0.0);
        }

        let mut p = PidState::new(zero);
        assert!((p.step(0.1, 0.01) - 0.51).abs() < 1e-12);

        let mut p = PidState::new(PidGains {
            k_p: 8.0,
            k_i: 1.0,
            k_d: 0.0,
        });
        assert!((p.step(-0.2, 0.01) + 1.602).abs() < 1e-12);
        p.reset();
        assert_eq!(p.integral, 0.0);
    }

    #[test]
    fn pid_trapezoid_after_first_step() {
        let mut p = PidState::new(PidGains {
            k_p: 0.0,
            k_i: 1.0,
            k_d: 0.0,
        });
        p.step(0.0, 0.1);
        let out = p.step(1.0, 0.1);
        assert!((out - 0.05).abs() < 1e-15);
    }

    #[test]
    fn actions_saturate() {
        assert_eq!(apply_action(3, Action::Hold, 3), 3);
        assert_eq!(apply_action(6, Action::Increase, 3), 6);
        assert_eq!(apply_action(0, Action::Decrease, 3), 0);
        assert_eq!(apply_action(2, Action::Increase, 3), 3);
        assert_eq!(apply_action(2, Action::Decrease, 3), 1);
    }

    #[test]
    fn pitch_grid_is_exact_at_centre_and_ends() {
        for k in 1..2000 {
            let theta_max = 0.0001 * f64::from(k) + 0.01 / f64::from(k);
            for n in 1..8 {
                assert_eq!(pitch_from_index(n as usize, theta_max, n), 0.0);
                assert_eq!(pitch_from_index(0, theta_max, n), -theta_max);
                assert_eq!(pitch_from_index(2 * n as usize, theta_max, n), theta_max);
                for i in 0..n as usize {
                    let (lo, hi) = (
                        pitch_from_index(i, theta_max, n),
                        pitch_from_index(2 * n as usize - i, theta_max, n),
                    );
                    assert_eq!(lo, -hi);
                }
            }
        }
    }

    #[test]
    fn pitch_grid() {
        assert_eq!(pitch_from_index(3, 0.3729, 3), 0.0);
        assert_eq!(pitch_from_index(0, 0.3729, 3), -0.3729);
        assert!((pitch_from_index(5, 0.3729, 3) - 0.2486).abs() < 1e-12);
    }

    #[test]
    fn touchdown_predicate() {
        let pf = PlatformState::default();
        assert_eq!(
            touchdown_check(Vec3::new(0.1, 0.0, 0.31), &pf, 1.0, 0.3),
            Touchdown::Airborne
        );
        assert_eq!(
            touchdown_check(Vec3::new(0.1, 0.0, 0.29), &pf, 1.0, 0.3),
            Touchdown::Success
        );
        assert_eq!(
            touchdown_check(Vec3::new(0.6, 0.0, 0.1), &pf, 1.0, 0.3),
            Touchdown::Miss
        );
        assert_eq!(
            touchdown_check(Vec3::new(0.5, 0.5, 0.0), &pf, 1.0, 0.3),
            Touchdown::Success
        );
    }

    #[test]
    fn fly_zone_membership() {
        let z = FlyZone {
            x_max: 4.5,
            y_max: 4.5,
            z_max: 9.0,
        };
        assert!(in_fly_zone(Vec3::new(0.0, 0.0, 1.0), &z));
        assert!(!in_fly_zone(Vec3::new(4.51, 0.0, 1.0), &z));
        assert!(!in_fly_zone(Vec3::new(0.0, 0.0, -0.01), &z));
        assert!(in_fly_zone(Vec3::new(-4.5, 4.5, 9.0), &z));
    }

    #[test]
    fn integration_is_deterministic() {
        let mut s = UavState::hover_at(Vec3::new(0.2, 0.1, 3.0), 0.7, -0.1);
        s.attitude_setpoint.pitch = 0.05;
        s.attitude_setpoint.roll = -0.03;
        let mut a = Vehicle::new(s, params());
        let mut b = Vehicle::new(s, params());
        for _ in 0..3000 {
            a.step(0.002);
            b.step(0.002);
        }
        assert_eq!(a.state.position.x.to_bits(), b.state.position.x.to_bits());
        assert_eq!(a.state.position.y.to_bits(), b.state.position.y.to_bits());
        assert_eq!(a.state.position.z.to_bits(), b.state.position.z.to_bits());
    }
}
