//! Active NGC motor cortex.
//!
//! An NGC circuit whose bottom layer reads out one value per action. The top
//! layer is clamped to the state representation; learning clamps the taken
//! action's output to a bootstrapped target and every other output to its own
//! prediction, so only the taken action's synapses receive error.

use std::collections::VecDeque;

use ndarray::Array1;
use rand::Rng;

use crate::error::{CogError, Result};
use crate::ngc::{CircuitState, NgcCircuit, NgcConfig};

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    /// Decay over the first half of `total_steps`.
    pub fn over_half(total_steps: u64) -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_steps: total_steps / 2,
        }
    }

    pub fn constant(epsilon: f64) -> Self {
        Self {
            start: epsilon,
            end: epsilon,
            decay_steps: 0,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }

    fn validate(&self) -> Result<()> {
        for v in [self.start, self.end] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CogError::InvalidParameter(format!(
                    "epsilon must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::over_half(1000)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotorConfig {
    /// Layer sizes `[|A|, hidden.., state_dim]`.
    pub sizes: Vec<usize>,
    pub ngc: NgcConfig,
    pub gamma_d: f64,
    pub alpha_e: f64,
    pub r_clip: f64,
    pub eta_w: f64,
    pub eta_e: f64,
    pub epsilon: EpsilonSchedule,
    /// Ring-buffer capacity; `0` disables replay.
    pub replay_capacity: usize,
    /// Replayed transitions per online update.
    pub replay_batch: usize,
}

impl Default for MotorConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2, 256],
            ngc: NgcConfig::default(),
            gamma_d: 0.9,
            alpha_e: 0.0,
            r_clip: 1.0,
            eta_w: 0.05,
            eta_e: 0.0,
            epsilon: EpsilonSchedule::default(),
            replay_capacity: 0,
            replay_batch: 8,
        }
    }
}

impl MotorConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CogError::InvalidParameter(msg));
        if self.sizes.first().is_none_or(|&a| a < 2) {
            return bad("motor circuit needs at least two actions".into());
        }
        if !(0.0..1.0).contains(&self.gamma_d) {
            return bad(format!("gamma_d must be in [0, 1), got {}", self.gamma_d));
        }
        if !(self.alpha_e >= 0.0 && self.alpha_e.is_finite()) {
            return bad(format!("alpha_e must be finite and >= 0, got {}", self.alpha_e));
        }
        if !(self.r_clip > 0.0) {
            return bad(format!("r_clip must be > 0, got {}", self.r_clip));
        }
        for (name, v) in [("eta_w", self.eta_w), ("eta_e", self.eta_e)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        self.epsilon.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Array1<f64>,
    pub a: usize,
    pub r_env: f64,
    pub s_next: Array1<f64>,
    pub done: bool,
}

/// `min(alpha_e · energy, r_clip)`.
pub fn epistemic_reward(sensory_energy: f64, alpha_e: f64, r_clip: f64) -> f64 {
    (alpha_e * sensory_energy).min(r_clip)
}

/// Argmax with ties to the lowest index.
pub fn greedy(q: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// One uniform draw decides exploration; a second picks the random action.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &Array1<f64>, epsilon: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..q.len())
    } else {
        greedy(q)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Replayed {
    transition: Transition,
    bonus: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotorCircuit {
    circuit: NgcCircuit,
    config: MotorConfig,
    replay: VecDeque<Replayed>,
}

impl MotorCircuit {
    pub fn new(config: MotorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let circuit = NgcCircuit::new(&config.sizes, seed, &config.ngc)?;
        Ok(Self {
            circuit,
            config,
            replay: VecDeque::new(),
        })
    }

    pub fn from_circuit(config: MotorConfig, circuit: NgcCircuit) -> Result<Self> {
        config.validate()?;
        if circuit.sizes() != config.sizes.as_slice() {
            return Err(CogError::Shape(format!(
                "motor circuit sizes {:?} differ from config {:?}",
                circuit.sizes(),
                config.sizes
            )));
        }
        Ok(Self {
            circuit,
            config,
            replay: VecDeque::new(),
        })
    }

    pub fn circuit(&self) -> &NgcCircuit {
        &self.circuit
    }

    pub fn circuit_mut(&mut self) -> &mut NgcCircuit {
        &mut self.circuit
    }

    pub fn config(&self) -> &MotorConfig {
        &self.config
    }

    pub fn num_actions(&self) -> usize {
        self.config.sizes[0]
    }

    pub fn state_dim(&self) -> usize {
        *self.config.sizes.last().expect("validated sizes")
    }

    pub fn epsilon(&self, step: u64) -> f64 {
        self.config.epsilon.value(step)
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    fn check_state(&self, s: &Array1<f64>) -> Result<()> {
        if s.len() != self.state_dim() {
            return Err(CogError::DimensionMismatch {
                expected: self.state_dim(),
                actual: s.len(),
            });
        }
        Ok(())
    }

    fn settle_on(&self, s: &Array1<f64>) -> Result<CircuitState> {
        self.check_state(s)?;
        self.circuit.settle(&[(self.circuit.depth(), s.clone())], None)
    }

    /// Predicted action values `mu^0` with the top layer clamped to `s`.
    pub fn q_values(&self, s: &Array1<f64>) -> Result<Array1<f64>> {
        Ok(self.settle_on(s)?.mu.swap_remove(0))
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &Array1<f64>, epsilon: f64, rng: &mut R) -> Result<usize> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(CogError::InvalidParameter(format!(
                "epsilon must be in [0, 1], got {epsilon}"
            )));
        }
        Ok(epsilon_greedy(&self.q_values(s)?, epsilon, rng))
    }

    fn check_transition(&self, t: &Transition) -> Result<()> {
        self.check_state(&t.s)?;
        self.check_state(&t.s_next)?;
        if t.a >= self.num_actions() {
            return Err(CogError::InvalidParameter(format!(
                "action {} out of range for {} actions",
                t.a,
                self.num_actions()
            )));
        }
        if !t.r_env.is_finite() {
            return Err(CogError::NonFinite("environment reward".into()));
        }
        Ok(())
    }

    /// Bootstrapped target `y` for a transition.
    pub fn target(&self, t: &Transition, sensory_energy: f64) -> Result<f64> {
        self.check_transition(t)?;
        if !(sensory_energy >= 0.0) {
            return Err(CogError::InvalidParameter(format!(
                "sensory energy must be >= 0, got {sensory_energy}"
            )));
        }
        let bonus = epistemic_reward(sensory_energy, self.config.alpha_e, self.config.r_clip);
        self.target_with_bonus(t, bonus)
    }

    fn target_with_bonus(&self, t: &Transition, bonus: f64) -> Result<f64> {
        let clip = self.config.r_clip;
        let r = t.r_env.clamp(-clip, clip) + bonus;
        let y = if t.done || self.config.gamma_d == 0.0 {
            r
        } else {
            let next = self.q_values(&t.s_next)?;
            r + self.config.gamma_d * next.fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        };
        if !y.is_finite() {
            return Err(CogError::NonFinite("bootstrapped target".into()));
        }
        Ok(y)
    }

    /// One online update; returns the target used. Also replays stored
    /// transitions when replay is enabled.
    pub fn learn(&mut self, t: &Transition, sensory_energy: f64) -> Result<f64> {
        let y = self.target(t, sensory_energy)?;
        self.fit(&t.s, |q| q[t.a] = y)?;
        if self.config.replay_capacity > 0 {
            let bonus = epistemic_reward(sensory_energy, self.config.alpha_e, self.config.r_clip);
            if self.replay.len() == self.config.replay_capacity {
                self.replay.pop_front();
            }
            self.replay.push_back(Replayed {
                transition: t.clone(),
                bonus,
            });
        }
        Ok(y)
    }

    /// Replays `replay_batch` uniformly drawn stored transitions.
    pub fn replay<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.replay.is_empty() {
            return Ok(());
        }
        for _ in 0..self.config.replay_batch {
            let i = rng.random_range(0..self.replay.len());
            let item = self.replay[i].clone();
            let y = self.target_with_bonus(&item.transition, item.bonus)?;
            self.fit(&item.transition.s, |q| q[item.transition.a] = y)?;
        }
        Ok(())
    }

    /// Direct regression of every output onto `±1` one-hot targets.
    pub fn learn_supervised(&mut self, s: &Array1<f64>, label: usize) -> Result<()> {
        if label >= self.num_actions() {
            return Err(CogError::InvalidParameter(format!("label {label} out of range")));
        }
        self.fit(s, |q| {
            q.fill(-1.0);
            q[label] = 1.0;
        })
    }

    fn fit(&mut self, s: &Array1<f64>, edit: impl FnOnce(&mut Array1<f64>)) -> Result<()> {
        let mut target = self.q_values(s)?;
        edit(&mut target);
        let top = self.circuit.depth();
        let state = self.circuit.settle(&[(top, s.clone()), (0, target)], None)?;
        self.circuit
            .update_weights(&state, self.config.eta_w, self.config.eta_e)
    }

    pub(crate) fn replay_parts(&self) -> Vec<(Transition, f64)> {
        self.replay
            .iter()
            .map(|r| (r.transition.clone(), r.bonus))
            .collect()
    }

    pub(crate) fn restore_replay(&mut self, items: Vec<(Transition, f64)>) -> Result<()> {
        self.replay.clear();
        for (transition, bonus) in items {
            self.check_transition(&transition)?;
            self.replay.push_back(Replayed { transition, bonus });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn motor(sizes: &[usize], sigma: f64) -> MotorCircuit {
        let cfg = MotorConfig {
            sizes: sizes.to_vec(),
            ngc: NgcConfig {
                sigma,
                ..NgcConfig::default()
            },
            ..MotorConfig::default()
        };
        MotorCircuit::new(cfg, 3).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_q() {
        let m = motor(&[4, 6], 0.0);
        let q = m.q_values(&Array1::from_elem(6, 0.3)).unwrap();
        assert_eq!(q, Array1::zeros(4));
    }

    #[test]
    fn q_values_are_deterministic() {
        let m = motor(&[3, 5, 6], 0.2);
        let s = Array1::linspace(-1.0, 1.0, 6);
        assert_eq!(m.q_values(&s).unwrap(), m.q_values(&s).unwrap());
        assert!(m.q_values(&array![1.0]).is_err());
    }

    #[test]
    fn greedy_rules() {
        assert_eq!(greedy(&array![0.1, 0.9, 0.3]), 1);
        assert_eq!(greedy(&array![0.5, 0.5, 0.5]), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(epsilon_greedy(&array![0.1, 0.9, 0.3], 0.0, &mut rng), 1);
    }

    #[test]
    fn epistemic_reward_arithmetic() {
        assert_eq!(epistemic_reward(0.0, 0.1, 1.0), 0.0);
        assert_eq!(epistemic_reward(5.0, 0.0, 1.0), 0.0);
        assert!((epistemic_reward(3.0, 0.1, 1.0) - 0.3).abs() < 1e-15);
        assert_eq!(epistemic_reward(30.0, 0.1, 1.0), 1.0);
    }

    #[test]
    fn schedule_decays_linearly_then_holds() {
        let s = EpsilonSchedule::over_half(100);
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(25) - 0.525).abs() < 1e-12);
        assert_eq!(s.value(50), 0.05);
        assert_eq!(s.value(1000), 0.05);
        assert_eq!(EpsilonSchedule::constant(0.2).value(7), 0.2);
    }

    #[test]
    fn terminal_step_moves_q_toward_reward() {
        for r in [1.0, -1.0] {
            let mut m = motor(&[3, 4], 0.0);
            let s = array![0.5, -0.2, 0.1, 0.9];
            let t = Transition {
                s: s.clone(),
                a: 1,
                r_env: r,
                s_next: s.clone(),
                done: true,
            };
            assert_eq!(m.learn(&t, 0.0).unwrap(), r);
            let q = m.q_values(&s).unwrap();
            assert_eq!(q[1].signum(), r);
            assert!(q[1].abs() < 1.0);
            assert_eq!((q[0], q[2]), (0.0, 0.0));
        }
    }

    #[test]
    fn zero_reward_changes_nothing() {
        let mut m = motor(&[2, 3], 0.0);
        let before = m.clone();
        let s = array![1.0, 2.0, 3.0];
        let t = Transition {
            s: s.clone(),
            a: 0,
            r_env: 0.0,
            s_next: s,
            done: false,
        };
        m.learn(&t, 0.0).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn gamma_zero_target_is_reward() {
        let mut cfg = MotorConfig {
            sizes: vec![2, 3],
            gamma_d: 0.0,
            ..MotorConfig::default()
        };
        cfg.ngc.sigma = 0.5;
        let m = MotorCircuit::new(cfg, 1).unwrap();
        let t = Transition {
            s: array![1.0, 0.0, 0.0],
            a: 1,
            r_env: 0.7,
            s_next: array![0.0, 1.0, 0.0],
            done: false,
        };
        assert_eq!(m.target(&t, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn reward_is_clipped_before_bonus() {
        let mut cfg = MotorConfig {
            sizes: vec![2, 1],
            alpha_e: 0.1,
            r_clip: 1.0,
            ..MotorConfig::default()
        };
        cfg.ngc.sigma = 0.0;
        let m = MotorCircuit::new(cfg, 1).unwrap();
        let t = Transition {
            s: array![1.0],
            a: 0,
            r_env: 5.0,
            s_next: array![1.0],
            done: true,
        };
        assert!((m.target(&t, 3.0).unwrap() - 1.3).abs() < 1e-15);
    }

    #[test]
    fn invalid_transitions_rejected() {
        let mut m = motor(&[2, 2], 0.0);
        let mut t = Transition {
            s: array![0.0, 0.0],
            a: 2,
            r_env: 0.0,
            s_next: array![0.0, 0.0],
            done: true,
        };
        assert!(m.learn(&t, 0.0).is_err());
        t.a = 0;
        t.r_env = f64::NAN;
        assert!(m.learn(&t, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        let base = MotorConfig::default();
        for cfg in [
            MotorConfig {
                sizes: vec![1, 4],
                ..base.clone()
            },
            MotorConfig {
                gamma_d: 1.0,
                ..base.clone()
            },
            MotorConfig {
                epsilon: EpsilonSchedule::constant(1.5),
                ..base.clone()
            },
        ] {
            assert!(MotorCircuit::new(cfg, 0).is_err());
        }
    }

    #[test]
    fn replay_buffer_is_bounded() {
        let cfg = MotorConfig {
            sizes: vec![2, 2],
            replay_capacity: 3,
            replay_batch: 2,
            ..MotorConfig::default()
        };
        let mut m = MotorCircuit::new(cfg, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..5 {
            let t = Transition {
                s: array![1.0, i as f64],
                a: i % 2,
                r_env: 1.0,
                s_next: array![0.0, 0.0],
                done: true,
            };
            m.learn(&t, 0.0).unwrap();
            m.replay(&mut rng).unwrap();
        }
        assert_eq!(m.replay_len(), 3);
    }
}
