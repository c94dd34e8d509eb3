//! Multiresolution discretization of the normalized observation space.
//!
//! Curriculum step `i` covers `|p| <= sigma^(2i)` and `|v| <= sigma^i`. A
//! non-latest step's goal region coincides with the next step's limit
//! region; the latest step's goal is a third of its limits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::NormalizedObs1D;

/// Goal fraction of the most recently added curriculum step.
pub const LATEST_GOAL_FRACTION: f64 = 1.0 / 3.0;

/// Number of classes per kinematic channel.
pub const CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepGeometry {
    pub index: usize,
    pub p_lim: f64,
    pub v_lim: f64,
    pub a_lim: f64,
    pub p_goal: f64,
    pub v_goal: f64,
    pub a_goal: f64,
    pub is_latest: bool,
}

impl StepGeometry {
    pub fn contains(&self, obs: &NormalizedObs1D) -> bool {
        obs.p.abs() <= self.p_lim && obs.v.abs() <= self.v_lim
    }
}

/// Geometry of curriculum step `i`.
pub fn geometry_for_step(i: usize, sigma: f64, sigma_a: f64, is_latest: bool) -> StepGeometry {
    let (mut p_lim, mut v_lim) = (1.0, 1.0);
    for _ in 0..i {
        p_lim *= sigma * sigma;
        v_lim *= sigma;
    }
    let a_lim = 1.0;
    let (p_goal, v_goal, a_goal) = if is_latest {
        (
            p_lim * LATEST_GOAL_FRACTION,
            v_lim * LATEST_GOAL_FRACTION,
            sigma_a * LATEST_GOAL_FRACTION * a_lim,
        )
    } else {
        (sigma * sigma * p_lim, sigma * v_lim, sigma_a * a_lim)
    };
    StepGeometry {
        index: i,
        p_lim,
        v_lim,
        a_lim,
        p_goal,
        v_goal,
        a_goal,
        is_latest,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumGeometry {
    pub steps: Vec<StepGeometry>,
    pub sigma: f64,
    pub sigma_a: f64,
}

impl CurriculumGeometry {
    /// Geometry for a curriculum whose latest step is `latest`.
    pub fn new(latest: usize, sigma: f64, sigma_a: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) || !(sigma_a > 0.0 && sigma_a < 1.0) {
            return Err(Error::Config(format!(
                "contraction factors must lie in (0, 1), got sigma={sigma}, sigma_a={sigma_a}"
            )));
        }
        let steps = (0..=latest)
            .map(|i| geometry_for_step(i, sigma, sigma_a, i == latest))
            .collect();
        Ok(Self { steps, sigma, sigma_a })
    }

    pub fn latest_index(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn latest(&self) -> &StepGeometry {
        &self.steps[self.latest_index()]
    }

    /// Finest step whose limit region contains `obs`.
    pub fn active_step(&self, obs: &NormalizedObs1D) -> usize {
        // regions are nested, so membership is monotone in the index
        let mut j = 0;
        while j + 1 < self.steps.len() && self.steps[j + 1].contains(obs) {
            j += 1;
        }
        j
    }
}

/// Three-way classification: 0 on `[-x2, -x1)`, 1 on `[-x1, x1]`, 2 on `(x1, x2]`.
pub fn d(x: f64, x1: f64, x2: f64) -> Result<u8> {
    if !(x.abs() <= x2) {
        return Err(Error::OutOfRange { value: x, bound: x2 });
    }
    Ok(classify(x, x1))
}

fn classify(x: f64, x1: f64) -> u8 {
    if x < -x1 {
        0
    } else if x <= x1 {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiscreteState {
    pub step: usize,
    pub p_d: u8,
    pub v_d: u8,
    pub a_d: u8,
    pub i_theta: usize,
}

impl DiscreteState {
    /// Row index into a table with `2 n_theta + 1` pitch levels.
    pub fn flat_index(&self, n_theta: u32) -> usize {
        let levels = 2 * n_theta as usize + 1;
        ((usize::from(self.p_d) * CLASSES + usize::from(self.v_d)) * CLASSES + usize::from(self.a_d)) * levels
            + self.i_theta
    }

    /// Number of distinct states for `n_theta`.
    pub fn count(n_theta: u32) -> usize {
        CLASSES * CLASSES * CLASSES * (2 * n_theta as usize + 1)
    }

    pub fn from_flat_index(idx: usize, step: usize, n_theta: u32) -> Self {
        let levels = 2 * n_theta as usize + 1;
        let i_theta = idx % levels;
        let rest = idx / levels;
        Self {
            step,
            p_d: (rest / (CLASSES * CLASSES)) as u8,
            v_d: ((rest / CLASSES) % CLASSES) as u8,
            a_d: (rest % CLASSES) as u8,
            i_theta,
        }
    }
}

/// Maps an observation to the discrete state of its finest applicable step.
pub fn map_to_discrete(obs: &NormalizedObs1D, geo: &CurriculumGeometry, i_theta: usize) -> DiscreteState {
    let step = geo.active_step(obs);
    let g = &geo.steps[step];
    DiscreteState {
        step,
        p_d: classify(obs.p, g.p_goal),
        v_d: classify(obs.v, g.v_goal),
        a_d: classify(obs.a, g.a_goal),
        i_theta,
    }
}

pub fn is_goal(ds: &DiscreteState, latest_index: usize) -> bool {
    ds.step == latest_index && ds.p_d == 1 && ds.v_d == 1 && ds.a_d == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(p: f64, v: f64, a: f64) -> NormalizedObs1D {
        NormalizedObs1D { p, v, a }
    }

    #[test]
    fn d_examples() {
        assert_eq!(d(0.0, 0.3, 1.0).unwrap(), 1);
        assert_eq!(d(-0.3, 0.3, 1.0).unwrap(), 1);
        assert_eq!(d(-0.30000001, 0.3, 1.0).unwrap(), 0);
        assert_eq!(d(0.31, 0.3, 1.0).unwrap(), 2);
        assert_eq!(d(0.3, 0.3, 1.0).unwrap(), 1);
        assert_eq!(d(1.0, 0.3, 1.0).unwrap(), 2);
        assert_eq!(d(-1.0, 0.3, 1.0).unwrap(), 0);
        assert!(d(1.0000001, 0.3, 1.0).is_err());
        assert!(d(f64::NAN, 0.3, 1.0).is_err());
    }

    #[test]
    fn d_is_odd_symmetric_off_boundary() {
        for k in 0..=1000 {
            let x = -1.0 + 2.0 * k as f64 / 1000.0;
            if (x.abs() - 0.3).abs() < 1e-15 {
                continue;
            }
            assert_eq!(d(-x, 0.3, 1.0).unwrap(), 2 - d(x, 0.3, 1.0).unwrap());
        }
    }

    #[test]
    fn step_geometry_examples() {
        let g0 = geometry_for_step(0, 0.8, 0.416, false);
        assert_eq!((g0.p_lim, g0.v_lim, g0.a_lim), (1.0, 1.0, 1.0));
        assert!((g0.p_goal - 0.64).abs() < 1e-15);
        assert!((g0.v_goal - 0.8).abs() < 1e-15);
        assert!((g0.a_goal - 0.416).abs() < 1e-15);

        let g1 = geometry_for_step(1, 0.8, 0.416, false);
        assert!((g1.p_lim - 0.64).abs() < 1e-15);
        assert!((g1.v_lim - 0.8).abs() < 1e-15);

        let g2 = geometry_for_step(2, 0.8, 0.416, true);
        assert!((g2.p_goal - 0.13653).abs() < 5e-6);
        assert!((g2.v_goal - 0.21333).abs() < 5e-6);
        assert!((g2.a_goal - 0.13867).abs() < 5e-6);
    }

    #[test]
    fn curriculum_nesting_is_exact() {
        let geo = CurriculumGeometry::new(4, 0.8, 0.416).unwrap();
        assert_eq!(geo.steps.iter().filter(|s| s.is_latest).count(), 1);
        assert!(geo.latest().is_latest);
        for w in geo.steps.windows(2) {
            assert_eq!(w[0].p_goal, w[1].p_lim);
            assert_eq!(w[0].v_goal, w[1].v_lim);
            assert!(w[1].p_lim < w[0].p_lim && w[1].v_lim < w[0].v_lim);
        }
        for s in &geo.steps {
            assert!(0.0 < s.p_goal && s.p_goal <= s.p_lim && s.p_lim <= 1.0);
            assert!(0.0 < s.v_goal && s.v_goal <= s.v_lim && s.v_lim <= 1.0);
            assert!(0.0 < s.a_goal && s.a_goal <= s.a_lim && s.a_lim == 1.0);
        }
    }

    #[test]
    fn mapping_examples() {
        let geo = CurriculumGeometry::new(3, 0.8, 0.416).unwrap();
        let ds = map_to_discrete(&obs(0.0, 0.0, 0.0), &geo, 5);
        assert_eq!(ds.step, 3);
        assert_eq!((ds.p_d, ds.v_d, ds.a_d, ds.i_theta), (1, 1, 1, 5));
        assert!(is_goal(&ds, 3));

        let ds = map_to_discrete(&obs(0.7, 0.0, 0.0), &geo, 3);
        assert_eq!(ds.step, 0);
        assert_eq!(ds.p_d, 2);

        let ds = map_to_discrete(&obs(0.5, 0.9, 0.0), &geo, 3);
        assert_eq!(ds.step, 0);
        assert_eq!(ds.v_d, 2);
    }

    #[test]
    fn goal_predicate() {
        let mk = |step, p, v, a, i| DiscreteState {
            step,
            p_d: p,
            v_d: v,
            a_d: a,
            i_theta: i,
        };
        assert!(is_goal(&mk(3, 1, 1, 1, 4), 3));
        assert!(!is_goal(&mk(3, 1, 1, 2, 3), 3));
        assert!(!is_goal(&mk(2, 1, 1, 1, 3), 3));
    }

    #[test]
    fn flat_index_roundtrip() {
        for idx in 0..DiscreteState::count(3) {
            let ds = DiscreteState::from_flat_index(idx, 0, 3);
            assert_eq!(ds.flat_index(3), idx);
        }
    }

    #[test]
    fn grid_coverage_has_no_gaps() {
        let geo = CurriculumGeometry::new(4, 0.8, 0.416).unwrap();
        let n = 2001;
        for i in 0..n {
            for k in 0..n {
                let p = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                let v = -1.0 + 2.0 * k as f64 / (n - 1) as f64;
                let o = obs(p, v, 0.0);
                let ds = map_to_discrete(&o, &geo, 0);
                let matching: Vec<usize> = geo.steps.iter().filter(|s| s.contains(&o)).map(|s| s.index).collect();
                assert_eq!(ds.step, *matching.last().unwrap());
                // exactly one cell per channel
                let g = &geo.steps[ds.step];
                assert_eq!(d(p, g.p_goal, g.p_lim).unwrap(), ds.p_d);
                assert_eq!(d(v, g.v_goal, g.v_lim).unwrap(), ds.v_d);
            }
        }
    }
}
