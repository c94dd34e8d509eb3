//! Platform trajectories and the hyperparameters derived from the platform's
//! worst-case motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Static,
    /// Rectilinear periodic movement along the earth x axis.
    Rpm,
    EightShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Maximum platform speed along x, m/s.
    pub v_mp: f64,
    /// Trajectory amplitude, m.
    pub r_mp: f64,
}

impl TrajectorySpec {
    pub fn stationary() -> Self {
        Self {
            kind: TrajectoryKind::Static,
            v_mp: 0.0,
            r_mp: 1.0,
        }
    }

    pub fn rpm(v_mp: f64, r_mp: f64) -> Self {
        Self {
            kind: TrajectoryKind::Rpm,
            v_mp,
            r_mp,
        }
    }

    pub fn eight_shape(v_mp: f64, r_mp: f64) -> Self {
        Self {
            kind: TrajectoryKind::EightShape,
            v_mp,
            r_mp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_mp >= 0.0) || !self.v_mp.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "platform speed must be finite and non-negative, got {}",
                self.v_mp
            )));
        }
        if self.kind != TrajectoryKind::Static && !(self.r_mp > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "trajectory amplitude must be positive, got {}",
                self.r_mp
            )));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        match self.kind {
            TrajectoryKind::Static => 0.0,
            _ => self.v_mp / self.r_mp,
        }
    }

    /// Short label used in result tables, e.g. `RPM 0.4`.
    pub fn label(&self) -> String {
        match self.kind {
            TrajectoryKind::Static => "Static".to_string(),
            TrajectoryKind::Rpm => format!("RPM {}", self.v_mp),
            TrajectoryKind::EightShape => "8-shape".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlatformState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

/// Platform state at time `t` (earth frame). Horizontal motion only.
///
/// The periodic movement uses `x = r sin(wt)`, which satisfies
/// `x'' = -(v^2 / r) sin(wt)` and stays within `[-r, r]`.
pub fn platform_state_at(spec: &TrajectorySpec, t: f64) -> PlatformState {
    let w = spec.omega();
    let r = spec.r_mp;
    match spec.kind {
        TrajectoryKind::Static => PlatformState::default(),
        TrajectoryKind::Rpm => {
            let (s, c) = (w * t).sin_cos();
            PlatformState {
                position: Vec3::new(r * s, 0.0, 0.0),
                velocity: Vec3::new(spec.v_mp * c, 0.0, 0.0),
                acceleration: Vec3::new(-(spec.v_mp * spec.v_mp / r) * s, 0.0, 0.0),
            }
        }
        TrajectoryKind::EightShape => {
            let (s1, c1) = (w * t).sin_cos();
            let (s2, c2) = (0.5 * w * t).sin_cos();
            PlatformState {
                position: Vec3::new(r * s1, r * s2, 0.0),
                velocity: Vec3::new(r * w * c1, 0.5 * r * w * c2, 0.0),
                acceleration: Vec3::new(-r * w * w * s1, -0.25 * r * w * w * s2, 0.0),
            }
        }
    }
}

pub fn max_platform_acceleration(v_mp: f64, r_mp: f64) -> Result<f64> {
    if !(r_mp > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "trajectory amplitude must be positive, got {r_mp}"
        )));
    }
    Ok(v_mp * v_mp / r_mp)
}

/// Largest pitch angle that lets the vehicle out-accelerate the platform by `k_a`.
pub fn derive_theta_max(k_a: f64, a_mp_max: f64, g: f64) -> f64 {
    (k_a * a_mp_max / g).atan()
}

/// Agent frequency letting the vehicle sweep its pitch range `k_man` times
/// faster than the platform sweeps its acceleration range.
pub fn derive_agent_frequency(n_theta: u32, k_man: f64, omega_mp: f64) -> f64 {
    2.0 * f64::from(n_theta) * k_man * omega_mp / std::f64::consts::PI
}

/// Smallest `n` with `sigma^(2(n+1)) * x_max <= l_mp / 2`.
pub fn derive_num_curriculum_steps(sigma: f64, l_mp: f64, x_max: f64) -> Result<usize> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidScenario(format!(
            "contraction factor must lie in (0, 1), got {sigma}"
        )));
    }
    let half = l_mp / 2.0;
    if !(half > 0.0) || !(half < x_max) {
        return Err(Error::InvalidScenario(format!(
            "platform half-width {half} must lie in (0, x_max = {x_max})"
        )));
    }
    let mut n = 0usize;
    // sigma < 1 and half > 0 guarantee termination
    while sigma.powi(2 * (n as i32 + 1)) * x_max > half {
        n += 1;
    }
    Ok(n)
}

/// Time for a platform at constant `a_mp_max` to travel `x_max` from rest.
pub fn worst_case_horizon(x_max: f64, a_mp_max: f64) -> Result<f64> {
    if !(a_mp_max > 0.0) {
        return Err(Error::InvalidScenario(
            "static training scenario unsupported: maximum platform acceleration is zero".into(),
        ));
    }
    Ok((2.0 * x_max / a_mp_max).sqrt())
}

/// Inputs to [`DerivedHyperparams::derive`].
#[derive(Debug, Clone, Copy)]
pub struct DerivationInputs {
    pub v_mp: f64,
    pub r_mp: f64,
    pub x_max: f64,
    pub l_mp: f64,
    pub sigma: f64,
    pub k_a: f64,
    pub k_man: f64,
    pub n_theta: u32,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedHyperparams {
    pub a_mp_max: f64,
    pub omega_mp: f64,
    pub theta_max: f64,
    pub f_ag: f64,
    pub dt_agent: f64,
    pub t_0: f64,
    pub n_cs: usize,
    pub delta_theta: f64,
    /// Normalization constants for position, velocity and acceleration.
    pub p_max: f64,
    pub v_max: f64,
    pub a_max: f64,
}

impl DerivedHyperparams {
    pub fn derive(inp: &DerivationInputs) -> Result<Self> {
        if inp.n_theta == 0 {
            return Err(Error::InvalidScenario("n_theta must be at least 1".into()));
        }
        if !(inp.k_man >= 1.0) || !(inp.k_a > 0.0) || !(inp.g > 0.0) {
            return Err(Error::InvalidScenario("require k_man >= 1, k_a > 0 and g > 0".into()));
        }
        let a_mp_max = max_platform_acceleration(inp.v_mp, inp.r_mp)?;
        let t_0 = worst_case_horizon(inp.x_max, a_mp_max)?;
        let omega_mp = inp.v_mp / inp.r_mp;
        let theta_max = derive_theta_max(inp.k_a, a_mp_max, inp.g);
        let f_ag = derive_agent_frequency(inp.n_theta, inp.k_man, omega_mp);
        let n_cs = derive_num_curriculum_steps(inp.sigma, inp.l_mp, inp.x_max)?;
        Ok(Self {
            a_mp_max,
            omega_mp,
            theta_max,
            f_ag,
            dt_agent: 1.0 / f_ag,
            t_0,
            n_cs,
            delta_theta: theta_max / f64::from(inp.n_theta),
            p_max: inp.x_max,
            v_max: a_mp_max * t_0,
            a_max: a_mp_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn static_platform_is_at_rest() {
        let s = platform_state_at(&TrajectorySpec::stationary(), 7.3);
        assert_eq!(s.position, Vec3::ZERO);
        assert_eq!(s.velocity, Vec3::ZERO);
        assert_eq!(s.acceleration, Vec3::ZERO);
    }

    #[test]
    fn rpm_closed_form_points() {
        let spec = TrajectorySpec::rpm(1.6, 2.0);
        assert_eq!(platform_state_at(&spec, 0.0).acceleration.x, 0.0);
        let quarter = PI / (2.0 * spec.omega());
        let s = platform_state_at(&spec, quarter);
        assert!(close(s.position.x, 2.0, 1e-12));
        assert!(close(s.velocity.x, 0.0, 1e-12));
        assert!(close(s.acceleration.x, -1.28, 1e-12));
    }

    #[test]
    fn eight_shape_initial_velocity() {
        let s = platform_state_at(&TrajectorySpec::eight_shape(1.6, 2.0), 0.0);
        assert_eq!(s.position, Vec3::ZERO);
        assert!(close(s.velocity.x, 1.6, 1e-12));
        assert!(close(s.velocity.y, 0.8, 1e-12));
        assert_eq!(s.velocity.z, 0.0);
    }

    #[test]
    fn eight_shape_derivatives_match_finite_differences() {
        let spec = TrajectorySpec::eight_shape(0.4, 0.5);
        let h = 1e-5;
        for &t in &[0.3, 1.7, 4.2, 9.9] {
            let m = platform_state_at(&spec, t - h);
            let p = platform_state_at(&spec, t + h);
            let c = platform_state_at(&spec, t);
            let v = (p.position - m.position) * (0.5 / h);
            let a = (p.velocity - m.velocity) * (0.5 / h);
            assert!((v - c.velocity).norm() < 1e-8);
            assert!((a - c.acceleration).norm() < 1e-8);
        }
    }

    #[test]
    fn rpm_acceleration_matches_second_difference() {
        let spec = TrajectorySpec::rpm(1.6, 2.0);
        let h = 1e-4;
        let w = spec.omega();
        for k in 0..50 {
            let t = 0.173 * k as f64 + 0.05;
            let xm = platform_state_at(&spec, t - h).position.x;
            let x0 = platform_state_at(&spec, t).position.x;
            let xp = platform_state_at(&spec, t + h).position.x;
            let fd = (xp - 2.0 * x0 + xm) / (h * h);
            let exact = -(1.6 * 1.6 / 2.0) * (w * t).sin();
            if exact.abs() > 1e-2 {
                assert!(((fd - exact) / exact).abs() < 1e-4, "t={t} fd={fd} exact={exact}");
            } else {
                assert!((fd - exact).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn rpm_peak_acceleration_over_period() {
        let spec = TrajectorySpec::rpm(1.6, 2.0);
        let period = 2.0 * PI / spec.omega();
        let n = 10_000;
        let peak = (0..=n)
            .map(|k| {
                platform_state_at(&spec, period * k as f64 / n as f64)
                    .acceleration
                    .x
                    .abs()
            })
            .fold(0.0, f64::max);
        assert!(close(peak, max_platform_acceleration(1.6, 2.0).unwrap(), 1e-9));
    }

    #[test]
    fn rpm_bounded() {
        let spec = TrajectorySpec::rpm(0.4, 0.5);
        for k in 0..2000 {
            let s = platform_state_at(&spec, k as f64 * 0.01);
            assert!(s.position.x.abs() <= 0.5 + 1e-12);
            assert!(s.velocity.x.abs() <= 0.4 + 1e-12);
            assert_eq!(s.position.z, 0.0);
        }
    }

    #[test]
    fn max_acceleration_table_values() {
        assert!(close(max_platform_acceleration(1.6, 2.0).unwrap(), 1.28, 1e-12));
        assert!(close(max_platform_acceleration(0.4, 0.5).unwrap(), 0.32, 1e-12));
        assert_eq!(max_platform_acceleration(0.0, 2.0).unwrap(), 0.0);
        assert!(max_platform_acceleration(1.0, 0.0).is_err());
    }

    #[test]
    fn theta_max_values() {
        assert!(close(derive_theta_max(3.0, 1.28, 9.81), 0.37310, 5e-5));
        assert_eq!(derive_theta_max(3.0, 0.0, 9.81), 0.0);
        assert!(close(derive_theta_max(3.0, 0.32, 9.81), 0.0975, 5e-5));
    }

    #[test]
    fn agent_frequency_values() {
        assert!(close(derive_agent_frequency(3, 15.0, 0.8), 22.92, 5e-3));
        assert!(close(derive_agent_frequency(3, 15.0, 0.4), 11.46, 5e-3));
        assert!(close(derive_agent_frequency(3, 15.0, 0.6), 17.19, 5e-3));
    }

    #[test]
    fn agent_frequency_is_linear_in_each_argument() {
        let base = derive_agent_frequency(3, 15.0, 0.8);
        assert!(close(derive_agent_frequency(6, 15.0, 0.8), 2.0 * base, 1e-12));
        assert!(close(derive_agent_frequency(3, 37.5, 0.8), 2.5 * base, 1e-12));
        assert!(close(derive_agent_frequency(3, 15.0, 0.8 * 1.37), 1.37 * base, 1e-12));
    }

    #[test]
    fn curriculum_step_counts() {
        assert_eq!(derive_num_curriculum_steps(0.8, 1.0, 4.5).unwrap(), 4);
        assert_eq!(derive_num_curriculum_steps(0.8, 0.5, 1.0).unwrap(), 3);
        assert!(derive_num_curriculum_steps(0.8, 9.0, 4.5).is_err());
        assert!(derive_num_curriculum_steps(1.0, 1.0, 4.5).is_err());
    }

    #[test]
    fn horizon_values() {
        assert!(close(worst_case_horizon(4.5, 1.28).unwrap(), 2.6517, 5e-5));
        assert!(close(worst_case_horizon(1.0, 0.32).unwrap(), 2.5, 1e-12));
        assert!(worst_case_horizon(4.5, 0.0).is_err());
    }

    #[test]
    fn derived_hyperparams_consistency() {
        let d = DerivedHyperparams::derive(&DerivationInputs {
            v_mp: 0.4,
            r_mp: 0.5,
            x_max: 1.0,
            l_mp: 0.5,
            sigma: 0.8,
            k_a: 3.0,
            k_man: 15.0,
            n_theta: 3,
            g: 9.81,
        })
        .unwrap();
        assert!(close(d.dt_agent * d.f_ag, 1.0, 1e-15));
        assert!(close(d.delta_theta * 3.0, d.theta_max, 1e-15));
        assert_eq!(d.n_cs, 3);
        assert!(close(d.v_max, 0.8, 1e-12));
    }

    proptest::proptest! {
        #[test]
        fn step_count_brackets_platform(sigma in 0.3f64..0.95, x_max in 0.5f64..20.0, frac in 0.01f64..0.99) {
            let l_mp = 2.0 * x_max * frac;
            let n = derive_num_curriculum_steps(sigma, l_mp, x_max).unwrap();
            let half = l_mp / 2.0;
            proptest::prop_assert!(sigma.powi(2 * (n as i32 + 1)) * x_max <= half);
            proptest::prop_assert!(half < sigma.powi(2 * n as i32) * x_max);
        }
    }
}
