//! Neural generative coding circuits.
//!
//! Layer `ℓ` predicts the layer below through generative weights `W^ℓ`
//! (shape `J_{ℓ−1} × J_ℓ`):
//!
//! ```text
//! mu^{ℓ−1} = W^ℓ · phi(z^ℓ ⊙ m^ℓ)
//! e^ℓ      = z^ℓ − mu^ℓ            (e^L = 0)
//! ```
//!
//! Settling relaxes every unclamped layer `ℓ ≥ 1` for `K` steps with
//!
//! ```text
//! z^ℓ ← z^ℓ + beta · (−gamma · z^ℓ − e^ℓ + (E^ℓ · e^{ℓ−1}) ⊙ m^ℓ)
//! ```
//!
//! where `E^ℓ` (shape `J_ℓ × J_{ℓ−1}`) is a separately stored error-feedback
//! matrix. Synapses then change by the local Hebbian products
//! `ΔW^ℓ = eta_W · e^{ℓ−1} ⊗ phi(z^ℓ ⊙ m^ℓ)` and
//! `ΔE^ℓ = eta_E · phi(z^ℓ ⊙ m^ℓ) ⊗ e^{ℓ−1}`. The activation derivative is
//! left out of the state update; the feedback matrices absorb it.
//!
//! An unclamped layer 0 is a free readout: it is set to its prediction on
//! every step, so it carries no error.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CogError, Result};

/// Settling aborts once any state magnitude exceeds this bound.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// How the error-feedback matrices start out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackInit {
    /// `E^ℓ` starts as a copy of `(W^ℓ)ᵀ` and then learns on its own.
    Transpose,
    /// `E^ℓ` is drawn independently of `W^ℓ`.
    Independent,
}

impl FeedbackInit {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackInit::Transpose => "transpose",
            FeedbackInit::Independent => "independent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "transpose" => Some(FeedbackInit::Transpose),
            "independent" => Some(FeedbackInit::Independent),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgcConfig {
    /// Standard deviation of the initial synaptic weights.
    pub sigma: f64,
    /// State step size.
    pub beta: f64,
    /// State leak.
    pub gamma: f64,
    /// Settling iterations `K`.
    pub steps: usize,
    pub hidden_activation: Activation,
    pub feedback_init: FeedbackInit,
    /// Optional radius for per-unit weight norm clipping after updates.
    pub column_clip: Option<f64>,
}

impl Default for NgcConfig {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            beta: 0.05,
            gamma: 0.001,
            steps: 50,
            hidden_activation: Activation::Tanh,
            feedback_init: FeedbackInit::Transpose,
            column_clip: None,
        }
    }
}

impl NgcConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CogError::InvalidParameter(msg));
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if self.steps == 0 {
            return bad("settling steps K must be at least 1".into());
        }
        if let Some(r) = self.column_clip {
            if !(r > 0.0) {
                return bad(format!("column clip radius must be positive, got {r}"));
            }
        }
        Ok(())
    }
}

/// Per-layer multiplicative gates over the hidden layers `1..=L`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatingMask {
    layers: Vec<Array1<f64>>,
}

impl GatingMask {
    /// `layers[i]` gates circuit layer `i + 1`.
    pub fn new(layers: Vec<Array1<f64>>) -> Result<Self> {
        for (i, g) in layers.iter().enumerate() {
            if g.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(CogError::InvalidParameter(format!(
                    "gate values for layer {} must lie in [0, 1]",
                    i + 1
                )));
            }
        }
        Ok(Self { layers })
    }

    /// All-ones mask for the given hidden sizes (no gating).
    pub fn ones(hidden_sizes: &[usize]) -> Self {
        Self {
            layers: hidden_sizes.iter().map(|&n| Array1::ones(n)).collect(),
        }
    }

    /// Gate vector for circuit layer `l` (`l ≥ 1`).
    pub fn layer(&self, l: usize) -> Option<&Array1<f64>> {
        l.checked_sub(1).and_then(|i| self.layers.get(i))
    }

    pub fn layers(&self) -> &[Array1<f64>] {
        &self.layers
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Array1::len).collect()
    }
}

/// State units, predictions and errors of one settling run.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitState {
    /// `z[ℓ]` for `ℓ = 0..=L`.
    pub z: Vec<Array1<f64>>,
    /// `mu[ℓ]` for `ℓ = 0..L`.
    pub mu: Vec<Array1<f64>>,
    /// `e[ℓ]` for `ℓ = 0..=L`; `e[L]` is always zero.
    pub e: Vec<Array1<f64>>,
    clamped: Vec<bool>,
    mask: Option<GatingMask>,
    initial_energy: f64,
}

impl CircuitState {
    pub fn is_clamped(&self, l: usize) -> bool {
        self.clamped.get(l).copied().unwrap_or(false)
    }

    pub fn mask(&self) -> Option<&GatingMask> {
        self.mask.as_ref()
    }

    /// Energy before the first settling step.
    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn energy(&self) -> f64 {
        energy(self)
    }

    fn gate(&self, l: usize) -> Option<&Array1<f64>> {
        self.mask.as_ref().and_then(|m| m.layer(l))
    }
}

/// `Σ_ℓ ½‖e^ℓ‖²`.
pub fn energy(state: &CircuitState) -> f64 {
    state.e.iter().map(|e| 0.5 * e.dot(e)).sum()
}

/// Presynaptic drive `phi(z ⊙ m)` for one layer.
pub fn gated_activity(z: &Array1<f64>, gate: Option<&Array1<f64>>, act: Activation) -> Array1<f64> {
    match gate {
        Some(g) => Array1::from_iter(z.iter().zip(g).map(|(&zi, &gi)| act.apply(zi * gi))),
        None => z.mapv(|zi| act.apply(zi)),
    }
}

/// Hebbian update for `W^ℓ` from the two quantities local to its synapses:
/// the error below and the gated activity of the layer itself.
pub fn local_weight_update(
    e_below: &Array1<f64>,
    z: &Array1<f64>,
    gate: Option<&Array1<f64>>,
    act: Activation,
    eta: f64,
) -> Array2<f64> {
    let post = gated_activity(z, gate, act);
    let col = e_below.view().insert_axis(Axis(1));
    let row = post.view().insert_axis(Axis(0));
    col.dot(&row) * eta
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgcCircuit {
    sizes: Vec<usize>,
    /// `weights[ℓ − 1]` is `W^ℓ`.
    weights: Vec<Array2<f64>>,
    /// `feedback[ℓ − 1]` is `E^ℓ`.
    feedback: Vec<Array2<f64>>,
    config: NgcConfig,
}

impl NgcCircuit {
    /// Random circuit with layer sizes `J_0..J_L`.
    pub fn new(sizes: &[usize], seed: u64, config: &NgcConfig) -> Result<Self> {
        Self::validate_sizes(sizes)?;
        config.validate()?;
        let normal = Normal::new(0.0, config.sigma)
            .map_err(|e| CogError::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<Array2<f64>> = sizes
            .windows(2)
            .map(|w| Array2::from_shape_simple_fn((w[0], w[1]), || normal.sample(&mut rng)))
            .collect();
        let feedback = match config.feedback_init {
            FeedbackInit::Transpose => weights.iter().map(|w| w.t().to_owned()).collect(),
            FeedbackInit::Independent => sizes
                .windows(2)
                .map(|w| Array2::from_shape_simple_fn((w[1], w[0]), || normal.sample(&mut rng)))
                .collect(),
        };
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            feedback,
            config: config.clone(),
        })
    }

    /// Assembles a circuit from explicit matrices.
    pub fn from_parts(
        sizes: &[usize],
        weights: Vec<Array2<f64>>,
        feedback: Vec<Array2<f64>>,
        config: &NgcConfig,
    ) -> Result<Self> {
        Self::validate_sizes(sizes)?;
        config.validate()?;
        if weights.len() != sizes.len() - 1 || feedback.len() != sizes.len() - 1 {
            return Err(CogError::Shape(format!(
                "expected {} weight and feedback matrices",
                sizes.len() - 1
            )));
        }
        for l in 1..sizes.len() {
            let w = &weights[l - 1];
            let e = &feedback[l - 1];
            if w.dim() != (sizes[l - 1], sizes[l]) || e.dim() != (sizes[l], sizes[l - 1]) {
                return Err(CogError::Shape(format!(
                    "layer {l}: W is {:?}, E is {:?}, sizes {:?}",
                    w.dim(),
                    e.dim(),
                    sizes
                )));
            }
            if w.iter().chain(e.iter()).any(|v| !v.is_finite()) {
                return Err(CogError::NonFinite(format!("layer {l} parameters")));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            feedback,
            config: config.clone(),
        })
    }

    fn validate_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 {
            return Err(CogError::InvalidParameter(
                "a circuit needs at least two layer sizes".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(CogError::InvalidParameter(format!(
                "layer sizes must be >= 1, got {sizes:?}"
            )));
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of generative layers `L`.
    pub fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.sizes[1..]
    }

    pub fn config(&self) -> &NgcConfig {
        &self.config
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        let mut next = self.config.clone();
        next.beta = beta;
        next.validate()?;
        self.config = next;
        Ok(())
    }

    /// `W^l` for `l` in `1..=L`.
    pub fn weight(&self, l: usize) -> &Array2<f64> {
        &self.weights[l - 1]
    }

    /// `E^l` for `l` in `1..=L`.
    pub fn feedback(&self, l: usize) -> &Array2<f64> {
        &self.feedback[l - 1]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut Array2<f64> {
        &mut self.weights[l - 1]
    }

    pub fn activation(&self, l: usize) -> Activation {
        if l == 0 {
            Activation::Identity
        } else {
            self.config.hidden_activation
        }
    }

    fn check_mask(&self, mask: Option<&GatingMask>) -> Result<()> {
        if let Some(m) = mask {
            if m.hidden_sizes() != self.hidden_sizes() {
                return Err(CogError::Shape(format!(
                    "mask sizes {:?} do not match hidden sizes {:?}",
                    m.hidden_sizes(),
                    self.hidden_sizes()
                )));
            }
        }
        Ok(())
    }

    /// Zero state with the given layers clamped, predictions refreshed.
    pub fn initial_state(
        &self,
        clamps: &[(usize, Array1<f64>)],
        mask: Option<&GatingMask>,
    ) -> Result<CircuitState> {
        self.check_mask(mask)?;
        let mut z: Vec<Array1<f64>> = self.sizes.iter().map(|&n| Array1::zeros(n)).collect();
        let mut clamped = vec![false; self.sizes.len()];
        for (l, value) in clamps {
            let l = *l;
            if l >= self.sizes.len() {
                return Err(CogError::Shape(format!("clamp on missing layer {l}")));
            }
            if value.len() != self.sizes[l] {
                return Err(CogError::DimensionMismatch {
                    expected: self.sizes[l],
                    actual: value.len(),
                });
            }
            if value.iter().any(|v| !v.is_finite()) {
                return Err(CogError::NonFinite(format!("clamp on layer {l}")));
            }
            z[l] = value.clone();
            clamped[l] = true;
        }
        let mut state = CircuitState {
            mu: self.sizes[..self.depth()].iter().map(|&n| Array1::zeros(n)).collect(),
            e: self.sizes.iter().map(|&n| Array1::zeros(n)).collect(),
            z,
            clamped,
            mask: mask.cloned(),
            initial_energy: 0.0,
        };
        self.refresh(&mut state);
        state.initial_energy = energy(&state);
        Ok(state)
    }

    fn check_state(&self, state: &CircuitState) -> Result<()> {
        let ok = state.z.len() == self.sizes.len()
            && state.e.len() == self.sizes.len()
            && state.mu.len() == self.depth()
            && state.z.iter().zip(&self.sizes).all(|(z, &n)| z.len() == n)
            && state.e.iter().zip(&self.sizes).all(|(e, &n)| e.len() == n)
            && state.mu.iter().zip(&self.sizes).all(|(m, &n)| m.len() == n);
        if !ok {
            return Err(CogError::Shape("state does not match circuit sizes".into()));
        }
        self.check_mask(state.mask.as_ref())
    }

    /// Recomputes `mu` and `e` from the current `z`.
    pub fn predict(&self, state: &mut CircuitState) -> Result<()> {
        self.check_state(state)?;
        self.compute_predictions(state);
        Ok(())
    }

    fn compute_predictions(&self, state: &mut CircuitState) {
        let top = self.depth();
        for l in 1..=top {
            let post = gated_activity(&state.z[l], state.gate(l), self.activation(l));
            state.mu[l - 1] = self.weights[l - 1].dot(&post);
        }
        for l in 0..top {
            state.e[l] = &state.z[l] - &state.mu[l];
        }
        state.e[top].fill(0.0);
    }

    /// Predictions plus the free-readout rule for an unclamped layer 0.
    fn refresh(&self, state: &mut CircuitState) {
        self.compute_predictions(state);
        if !state.clamped[0] {
            state.z[0] = state.mu[0].clone();
            state.e[0].fill(0.0);
        }
    }

    /// Runs `K` settling steps from a fresh zero state.
    pub fn settle(
        &self,
        clamps: &[(usize, Array1<f64>)],
        mask: Option<&GatingMask>,
    ) -> Result<CircuitState> {
        let state = self.initial_state(clamps, mask)?;
        self.settle_from(state)
    }

    /// Runs `K` settling steps from an existing state.
    pub fn settle_from(&self, mut state: CircuitState) -> Result<CircuitState> {
        self.check_state(&state)?;
        self.refresh(&mut state);
        state.initial_energy = energy(&state);
        if state.clamped[1..].iter().all(|&c| c) {
            return Ok(state);
        }
        let beta = self.config.beta;
        let gamma = self.config.gamma;
        for _ in 0..self.config.steps {
            let mut next = Vec::with_capacity(self.depth());
            for l in 1..=self.depth() {
                if state.clamped[l] {
                    next.push(None);
                    continue;
                }
                let mut drive = self.feedback[l - 1].dot(&state.e[l - 1]);
                if let Some(g) = state.gate(l) {
                    drive *= g;
                }
                let z = &state.z[l];
                let dz = (&drive - &state.e[l]) - &(z * gamma);
                next.push(Some(z + &(dz * beta)));
            }
            for (i, z) in next.into_iter().enumerate() {
                if let Some(z) = z {
                    if z.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
                        return Err(CogError::Divergence {
                            beta,
                            limit: DIVERGENCE_LIMIT,
                        });
                    }
                    state.z[i + 1] = z;
                }
            }
            self.refresh(&mut state);
        }
        Ok(state)
    }

    /// The Hebbian weight changes `ΔW^ℓ` for a settled state.
    pub fn weight_updates(&self, state: &CircuitState, eta_w: f64) -> Vec<Array2<f64>> {
        (1..=self.depth())
            .map(|l| {
                local_weight_update(
                    &state.e[l - 1],
                    &state.z[l],
                    state.gate(l),
                    self.activation(l),
                    eta_w,
                )
            })
            .collect()
    }

    /// Applies `ΔW^ℓ = eta_w · e^{ℓ−1} ⊗ phi(z^ℓ ⊙ m^ℓ)` and
    /// `ΔE^ℓ = eta_e · phi(z^ℓ ⊙ m^ℓ) ⊗ e^{ℓ−1}`.
    pub fn update_weights(&mut self, state: &CircuitState, eta_w: f64, eta_e: f64) -> Result<()> {
        self.check_state(state)?;
        for l in 1..=self.depth() {
            let post = gated_activity(&state.z[l], state.gate(l), self.activation(l));
            let err = &state.e[l - 1];
            if eta_w != 0.0 {
                let w = &mut self.weights[l - 1];
                for (mut row, &ei) in w.rows_mut().into_iter().zip(err) {
                    if ei != 0.0 {
                        row.scaled_add(eta_w * ei, &post);
                    }
                }
            }
            if eta_e != 0.0 {
                let e = &mut self.feedback[l - 1];
                for (mut row, &pj) in e.rows_mut().into_iter().zip(&post) {
                    if pj != 0.0 {
                        row.scaled_add(eta_e * pj, err);
                    }
                }
            }
            if let Some(radius) = self.config.column_clip {
                clip_columns(self.weights[l - 1].view_mut(), radius);
                clip_columns(self.feedback[l - 1].view_mut().reversed_axes(), radius);
            }
        }
        if self
            .weights
            .iter()
            .chain(&self.feedback)
            .any(|m| m.iter().any(|v| !v.is_finite()))
        {
            return Err(CogError::NonFinite("synaptic update".into()));
        }
        Ok(())
    }

    /// Top-layer representation `phi(z^L ⊙ m^L)`.
    pub fn latent(&self, state: &CircuitState) -> Array1<f64> {
        let top = self.depth();
        gated_activity(&state.z[top], state.gate(top), self.activation(top))
    }

    /// Settles with `z^0 = x` and returns `(mu^0, ‖x − mu^0‖)`.
    pub fn reconstruct(
        &self,
        x: &Array1<f64>,
        mask: Option<&GatingMask>,
    ) -> Result<(Array1<f64>, f64)> {
        let state = self.settle(&[(0, x.clone())], mask)?;
        let x_hat = state.mu[0].clone();
        let err = (x - &x_hat).mapv(|v| v * v).sum().sqrt();
        Ok((x_hat, err))
    }
}

fn clip_columns(mut m: ndarray::ArrayViewMut2<'_, f64>, radius: f64) {
    for mut col in m.columns_mut() {
        let n = col.dot(&col).sqrt();
        if n > radius {
            col *= radius / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn zero_config() -> NgcConfig {
        NgcConfig {
            sigma: 0.0,
            ..NgcConfig::default()
        }
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let cfg = NgcConfig::default();
        let a = NgcCircuit::new(&[8, 16, 8], 3, &cfg).unwrap();
        let b = NgcCircuit::new(&[8, 16, 8], 3, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weight(1).dim(), (8, 16));
        assert_eq!(a.feedback(1).dim(), (16, 8));
        assert_eq!(a.weight(2).dim(), (16, 8));
        let z = NgcCircuit::new(&[8, 16, 8], 3, &zero_config()).unwrap();
        assert!(z.weight(1).iter().all(|&v| v == 0.0));
        assert!(NgcCircuit::new(&[], 0, &cfg).is_err());
        assert!(NgcCircuit::new(&[4, 0], 0, &cfg).is_err());
    }

    #[test]
    fn transpose_feedback_starts_tied() {
        let c = NgcCircuit::new(&[5, 7], 1, &NgcConfig::default()).unwrap();
        assert_eq!(c.feedback(1), &c.weight(1).t().to_owned());
        let cfg = NgcConfig {
            feedback_init: FeedbackInit::Independent,
            ..NgcConfig::default()
        };
        let c = NgcCircuit::new(&[5, 7], 1, &cfg).unwrap();
        assert_ne!(c.feedback(1), &c.weight(1).t().to_owned());
    }

    #[test]
    fn zero_weights_predict_nothing() {
        let c = NgcCircuit::new(&[3, 4], 0, &zero_config()).unwrap();
        let x = array![1.0, -2.0, 0.5];
        let mut s = c.initial_state(&[(0, x.clone()), (1, Array1::ones(4))], None).unwrap();
        c.predict(&mut s).unwrap();
        assert!(s.mu[0].iter().all(|&v| v == 0.0));
        assert_eq!(s.e[0], x);
        assert!(s.e[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_mask_blocks_prediction() {
        let c = NgcCircuit::new(&[3, 4], 9, &NgcConfig::default()).unwrap();
        let mask = GatingMask::new(vec![Array1::zeros(4)]).unwrap();
        let s = c
            .initial_state(&[(0, array![1.0, 1.0, 1.0]), (1, array![0.3, -0.2, 0.9, 1.0])], Some(&mask))
            .unwrap();
        assert!(s.mu[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_generative_map_has_no_error() {
        let cfg = NgcConfig {
            hidden_activation: Activation::Identity,
            ..NgcConfig::default()
        };
        let w = Array2::eye(3);
        let c = NgcCircuit::from_parts(&[3, 3], vec![w.clone()], vec![w], &cfg).unwrap();
        let x = array![0.2, -0.7, 1.5];
        let s = c.initial_state(&[(0, x.clone()), (1, x)], None).unwrap();
        assert!(s.e[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_arithmetic() {
        let c = NgcCircuit::new(&[2, 3], 0, &zero_config()).unwrap();
        let s = c.initial_state(&[(0, array![3.0, 4.0])], None).unwrap();
        assert_eq!(energy(&s), 12.5);
        let quiet = c.initial_state(&[(0, array![0.0, 0.0])], None).unwrap();
        assert_eq!(energy(&quiet), 0.0);
    }

    #[test]
    fn zero_weights_only_leak_hidden_state() {
        let c = NgcCircuit::new(&[3, 4], 0, &zero_config()).unwrap();
        let x = array![1.0, 2.0, 3.0];
        let mut s = c.initial_state(&[(0, x.clone())], None).unwrap();
        s.z[1] = array![1.0, -1.0, 0.5, 2.0];
        let start = s.z[1].clone();
        let settled = c.settle_from(s).unwrap();
        let cfg = c.config();
        // Top layer carries no error, so only the leak acts.
        let factor = (1.0 - cfg.beta * cfg.gamma).powi(cfg.steps as i32);
        for (a, b) in settled.z[1].iter().zip(start.iter()) {
            assert!((a - b * factor).abs() < 1e-12);
        }
        assert_eq!(settled.z[0], x);
    }

    #[test]
    fn beta_zero_leaves_state() {
        let mut c = NgcCircuit::new(&[4, 6, 3], 5, &NgcConfig::default()).unwrap();
        c.set_beta(0.0).unwrap();
        let s = c.initial_state(&[(0, array![0.1, 0.2, 0.3, 0.4])], None).unwrap();
        let settled = c.settle_from(s.clone()).unwrap();
        assert_eq!(settled, s);
    }

    #[test]
    fn clamped_layers_are_untouched() {
        let c = NgcCircuit::new(&[4, 6, 3], 5, &NgcConfig::default()).unwrap();
        let x = array![0.1, -0.2, 0.3, 0.4];
        let top = array![0.5, -0.5, 0.25];
        let s = c.settle(&[(0, x.clone()), (2, top.clone())], None).unwrap();
        assert_eq!(s.z[0], x);
        assert_eq!(s.z[2], top);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = NgcConfig {
            sigma: 3.0,
            beta: 50.0,
            steps: 50,
            hidden_activation: Activation::Identity,
            ..NgcConfig::default()
        };
        let c = NgcCircuit::new(&[6, 6, 6], 1, &cfg).unwrap();
        let err = c.settle(&[(0, Array1::ones(6))], None).unwrap_err();
        assert!(matches!(err, CogError::Divergence { beta, .. } if beta == 50.0));
    }

    #[test]
    fn free_readout_carries_no_error() {
        let c = NgcCircuit::new(&[3, 5], 2, &NgcConfig::default()).unwrap();
        let s = c.settle(&[(1, array![0.5, -1.0, 0.2, 0.0, 0.7])], None).unwrap();
        assert_eq!(s.z[0], s.mu[0]);
        assert_eq!(energy(&s), 0.0);
    }

    #[test]
    fn masked_units_get_no_plasticity() {
        let mut c = NgcCircuit::new(&[4, 5], 8, &NgcConfig::default()).unwrap();
        let mask = GatingMask::new(vec![array![1.0, 0.0, 1.0, 0.0, 1.0]]).unwrap();
        let before = c.clone();
        let s = c.settle(&[(0, array![1.0, 0.5, -0.5, 0.25])], Some(&mask)).unwrap();
        c.update_weights(&s, 0.1, 0.1).unwrap();
        for j in [1usize, 3] {
            assert_eq!(c.weight(1).column(j), before.weight(1).column(j));
            assert_eq!(c.feedback(1).row(j), before.feedback(1).row(j));
        }
        assert_ne!(c.weight(1).column(0), before.weight(1).column(0));
    }

    #[test]
    fn zero_learning_rate_is_noop() {
        let mut c = NgcCircuit::new(&[4, 5, 3], 8, &NgcConfig::default()).unwrap();
        let before = c.clone();
        let s = c.settle(&[(0, array![1.0, 0.5, -0.5, 0.25])], None).unwrap();
        c.update_weights(&s, 0.0, 0.0).unwrap();
        assert_eq!(c, before);
    }

    #[test]
    fn column_clipping_bounds_norms() {
        let cfg = NgcConfig {
            column_clip: Some(1.0),
            ..NgcConfig::default()
        };
        let mut c = NgcCircuit::new(&[6, 4], 2, &cfg).unwrap();
        let s = c.settle(&[(0, Array1::from_elem(6, 10.0))], None).unwrap();
        c.update_weights(&s, 5.0, 5.0).unwrap();
        for col in c.weight(1).columns() {
            assert!(col.dot(&col).sqrt() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn reconstruct_checks_dimension() {
        let c = NgcCircuit::new(&[4, 5], 8, &NgcConfig::default()).unwrap();
        assert!(matches!(
            c.reconstruct(&Array1::zeros(3), None),
            Err(CogError::DimensionMismatch { .. })
        ));
        let (x_hat, err) = c.reconstruct(&Array1::zeros(4), None).unwrap();
        assert!(x_hat.iter().all(|&v| v == 0.0));
        assert_eq!(err, 0.0);
    }

    #[test]
    fn mask_values_must_be_unit_interval() {
        assert!(GatingMask::new(vec![array![0.0, 1.5]]).is_err());
        let c = NgcCircuit::new(&[4, 5], 8, &NgcConfig::default()).unwrap();
        let wrong = GatingMask::ones(&[3]);
        assert!(c.settle(&[(0, Array1::zeros(4))], Some(&wrong)).is_err());
    }
}
