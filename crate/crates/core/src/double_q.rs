//! Tabular Double Q-Learning with visit-count learning rates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::vehicle::Action;

pub const N_ACTIONS: usize = 3;

/// Two action-value tables and a shared visit counter, stored row-major as
/// `[state][action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTablePair {
    pub q_a: Vec<f64>,
    pub q_b: Vec<f64>,
    pub visits: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    A,
    B,
}

/// Snapshot of both tables' action values in one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextValues {
    pub a: [f64; N_ACTIONS],
    pub b: [f64; N_ACTIONS],
}

impl QTablePair {
    pub fn zeros(n_states: usize) -> Self {
        let n = n_states * N_ACTIONS;
        Self {
            q_a: vec![0.0; n],
            q_b: vec![0.0; n],
            visits: vec![0; n],
        }
    }

    pub fn n_states(&self) -> usize {
        self.q_a.len() / N_ACTIONS
    }

    fn row(values: &[f64], state: usize) -> [f64; N_ACTIONS] {
        let base = state * N_ACTIONS;
        [values[base], values[base + 1], values[base + 2]]
    }

    /// `q_a + q_b` for each action in `state`.
    pub fn combined(&self, state: usize) -> [f64; N_ACTIONS] {
        let a = Self::row(&self.q_a, state);
        let b = Self::row(&self.q_b, state);
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn next_values(&self, state: usize) -> NextValues {
        NextValues {
            a: Self::row(&self.q_a, state),
            b: Self::row(&self.q_b, state),
        }
    }

    /// Greedy action with ties resolved to the lowest index.
    pub fn greedy_first(&self, state: usize) -> Action {
        Action::from_index(argmax_first(&self.combined(state))).expect("three actions")
    }

    /// Multiplies every action value by `factor` and clears the visit counts.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            q_a: self.q_a.iter().map(|q| q * factor).collect(),
            q_b: self.q_b.iter().map(|q| q * factor).collect(),
            visits: vec![0; self.visits.len()],
        }
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.q_a.iter().chain(self.q_b.iter()).all(|q| q.is_finite())
    }
}

pub fn argmax_first(values: &[f64; N_ACTIONS]) -> usize {
    let mut best = 0;
    for i in 1..N_ACTIONS {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRateParams {
    pub omega: f64,
    pub alpha_min: f64,
}

impl Default for LearningRateParams {
    fn default() -> Self {
        Self {
            omega: 0.51,
            alpha_min: 0.02949,
        }
    }
}

pub fn learning_rate(n_c: u64, params: &LearningRateParams) -> f64 {
    ((n_c as f64 + 1.0).powf(-params.omega)).max(params.alpha_min)
}

/// Exploration rate of the first curriculum step: held, then annealed
/// linearly, then constant. Later steps never explore.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSchedule {
    pub hold_until: usize,
    pub anneal_until: usize,
    pub start: f64,
    pub end: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self {
            hold_until: 800,
            anneal_until: 2000,
            start: 1.0,
            end: 0.01,
        }
    }
}

pub fn epsilon_at(episode: usize, curriculum_step: usize, schedule: &ExplorationSchedule) -> f64 {
    if curriculum_step > 0 {
        return 0.0;
    }
    if episode < schedule.hold_until {
        schedule.start
    } else if episode < schedule.anneal_until {
        let span = (schedule.anneal_until - schedule.hold_until) as f64;
        let frac = (episode - schedule.hold_until) as f64 / span;
        schedule.start + (schedule.end - schedule.start) * frac
    } else {
        schedule.end
    }
}

/// Whether the returned action came from the exploration branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: Action,
    pub explored: bool,
}

/// Epsilon-greedy over `q_a + q_b`, with uniform random tie-breaking.
pub fn select_action<R: Rng + ?Sized>(tables: &QTablePair, state: usize, epsilon: f64, rng: &mut R) -> Selection {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        let i = rng.random_range(0..N_ACTIONS);
        return Selection {
            action: Action::ALL[i],
            explored: true,
        };
    }
    let q = tables.combined(state);
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ties = [0usize; N_ACTIONS];
    let mut n = 0;
    for (i, &v) in q.iter().enumerate() {
        if v == best {
            ties[n] = i;
            n += 1;
        }
    }
    let pick = if n == 1 { ties[0] } else { ties[rng.random_range(0..n)] };
    Selection {
        action: Action::ALL[pick],
        explored: false,
    }
}

/// One Double Q-Learning update of `(state, action)`. A fair coin picks the
/// table to update; the other table evaluates the updated table's greedy
/// action in the successor. `next = None` marks a terminal transition.
/// Returns the table that was updated.
#[allow(clippy::too_many_arguments)]
pub fn double_q_update<R: Rng + ?Sized>(
    tables: &mut QTablePair,
    state: usize,
    action: Action,
    reward: f64,
    next: Option<NextValues>,
    gamma: f64,
    params: &LearningRateParams,
    rng: &mut R,
) -> Table {
    let which = if rng.random::<bool>() { Table::A } else { Table::B };
    let target = match next {
        None => reward,
        Some(n) => {
            let (own, other) = match which {
                Table::A => (&n.a, &n.b),
                Table::B => (&n.b, &n.a),
            };
            reward + gamma * other[argmax_first(own)]
        }
    };
    let idx = state * N_ACTIONS + action.index();
    let alpha = learning_rate(tables.visits[idx], params);
    let q = match which {
        Table::A => &mut tables.q_a[idx],
        Table::B => &mut tables.q_b[idx],
    };
    *q += alpha * (target - *q);
    tables.visits[idx] += 1;
    which
}
