//! Relative observations in the stability frame.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::math::Vec3;
use crate::platform::PlatformState;
use crate::vehicle::{Attitude, UavState};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelativeObservation {
    pub p_c: Vec3,
    pub v_c: Vec3,
    pub a_c: Vec3,
    pub phi_c: Attitude,
}

/// Platform-minus-vehicle position and velocity, rotated into the
/// vehicle's stability frame. Acceleration is left at zero; it is filled
/// in by [`AccelFilter`].
pub fn relative_state(uav: &UavState, platform: &PlatformState) -> RelativeObservation {
    let yaw = uav.attitude.yaw;
    RelativeObservation {
        p_c: (platform.position - uav.position).rotate_z(-yaw),
        v_c: (platform.velocity - uav.velocity).rotate_z(-yaw),
        a_c: Vec3::ZERO,
        phi_c: Attitude {
            roll: -uav.attitude.roll,
            pitch: -uav.attitude.pitch,
            yaw: -yaw,
        },
    }
}

/// Backward difference of the relative velocity followed by a first-order
/// Butterworth low-pass, discretized with the bilinear transform.
///
/// With `K = tan(pi * fc / fs)`:
/// `y[n] = b (x[n] + x[n-1]) - a1 y[n-1]`, `b = K / (1 + K)`,
/// `a1 = (K - 1) / (K + 1)`. At fc = 0.3 Hz and fs = 100 Hz,
/// `b = 0.0093370` and `a1 = -0.9813260`.
#[derive(Debug, Clone)]
pub struct AccelFilter {
    pub cutoff: f64,
    b: f64,
    a1: f64,
    prev_velocity: Option<Vec3>,
    prev_input: Vec3,
    prev_output: Vec3,
}

impl AccelFilter {
    pub fn new(cutoff: f64, sample_rate: f64) -> Self {
        let (b, a1) = Self::coefficients(cutoff, sample_rate);
        Self {
            cutoff,
            b,
            a1,
            prev_velocity: None,
            prev_input: Vec3::ZERO,
            prev_output: Vec3::ZERO,
        }
    }

    /// `(b0 = b1, a1)` of the discretized filter.
    pub fn coefficients(cutoff: f64, sample_rate: f64) -> (f64, f64) {
        let k = (std::f64::consts::PI * cutoff / sample_rate).tan();
        (k / (1.0 + k), (k - 1.0) / (k + 1.0))
    }

    /// Feeds one velocity sample and returns the filtered acceleration. The
    /// first sample only primes the state.
    pub fn update(&mut self, v_c: Vec3, dt_obs: f64) -> Vec3 {
        let Some(prev_v) = self.prev_velocity.replace(v_c) else {
            return Vec3::ZERO;
        };
        let input = (v_c - prev_v) * (1.0 / dt_obs);
        let out = (input + self.prev_input) * self.b - self.prev_output * self.a1;
        self.prev_input = input;
        self.prev_output = out;
        out
    }

    pub fn reset(&mut self) {
        self.prev_velocity = None;
        self.prev_input = Vec3::ZERO;
        self.prev_output = Vec3::ZERO;
    }
}

/// One axis of observation, each component in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizedObs1D {
    pub p: f64,
    pub v: f64,
    pub a: f64,
}

pub fn normalize_clip(p: f64, v: f64, a: f64, p_max: f64, v_max: f64, a_max: f64) -> NormalizedObs1D {
    NormalizedObs1D {
        p: (p / p_max).clamp(-1.0, 1.0),
        v: (v / v_max).clamp(-1.0, 1.0),
        a: (a / a_max).clamp(-1.0, 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Longitudinal,
    Lateral,
}

/// Raw `(p, v, a)` for one axis of the stability frame.
pub fn axis_project(obs: &RelativeObservation, axis: Axis) -> (f64, f64, f64) {
    match axis {
        Axis::Longitudinal => (obs.p_c.x, obs.v_c.x, obs.a_c.x),
        Axis::Lateral => (obs.p_c.y, obs.v_c.y, obs.a_c.y),
    }
}

/// Standard deviations of additive Gaussian noise on position (m) and
/// velocity (m/s), ordered `px, py, pz, vx, vy, vz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: [f64; 6],
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { sigma: [0.0; 6] };

    /// EKF-grade estimator noise.
    pub const ESTIMATOR: NoiseModel = NoiseModel {
        sigma: [0.1, 0.1, 0.1, 0.25, 0.25, 0.25],
    };

    pub fn is_zero(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0)
    }
}

fn draw<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    // sigma is validated non-negative and finite at configuration time
    Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
}

/// Adds independent zero-mean Gaussian draws to position and velocity.
pub fn add_noise<R: Rng + ?Sized>(obs: &RelativeObservation, noise: &NoiseModel, rng: &mut R) -> RelativeObservation {
    if noise.is_zero() {
        return *obs;
    }
    let s = &noise.sigma;
    let mut out = *obs;
    out.p_c.x += draw(s[0], rng);
    out.p_c.y += draw(s[1], rng);
    out.p_c.z += draw(s[2], rng);
    out.v_c.x += draw(s[3], rng);
    out.v_c.y += draw(s[4], rng);
    out.v_c.z += draw(s[5], rng);
    out
}

/// Observation pipeline owned by one episode: relative state, optional
/// noise, then filtered acceleration from the (possibly noisy) velocity.
#[derive(Debug, Clone)]
pub struct Observer {
    filter: AccelFilter,
    noise: NoiseModel,
    dt_obs: f64,
    latest: RelativeObservation,
}

impl Observer {
    pub fn new(cutoff: f64, obs_rate: f64, noise: NoiseModel) -> Self {
        Self {
            filter: AccelFilter::new(cutoff, obs_rate),
            noise,
            dt_obs: 1.0 / obs_rate,
            latest: RelativeObservation::default(),
        }
    }

    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        uav: &UavState,
        platform: &PlatformState,
        rng: &mut R,
    ) -> RelativeObservation {
        let mut obs = add_noise(&relative_state(uav, platform), &self.noise, rng);
        obs.a_c = self.filter.update(obs.v_c, self.dt_obs);
        self.latest = obs;
        obs
    }

    pub fn latest(&self) -> &RelativeObservation {
        &self.latest
    }
}
