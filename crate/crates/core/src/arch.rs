//! Common Model wiring: buffers, the cognitive cycle and snapshots.
//!
//! One cycle runs perceive, routed memory transfers, action selection and
//! motor learning in that order. All mutable state except the sensory
//! synapses lives in a working copy that is committed only when the whole
//! cycle succeeds; the sensory update is applied last.

use indexmap::IndexMap;
use ndarray::{concatenate, Array1, Array2, Axis};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{format_kv, join_list, KvMap};
use crate::error::{CogError, Result};
use crate::gate::{CompetitiveGate, ContextWindow, GateConfig, MaskKind, Metric, Selection};
use crate::hrr::{HrrVector, SymbolLexicon};
use crate::memory::{DeclarativeMemory, WorkingMemoryBuffer};
use crate::motor::{greedy, MotorCircuit, MotorConfig, Transition};
use crate::ngc::{Activation, CircuitState, FeedbackInit, GatingMask, NgcCircuit, NgcConfig};
use crate::snapshot::Container;

pub const PERCEPTION: &str = "perception";
pub const RETRIEVAL: &str = "retrieval";
pub const GOAL: &str = "goal";

/// Which dashed-arrow transfers run when a gate unit wins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoutingDirective {
    pub wm_encode_on: bool,
    pub dm_store_on: bool,
    pub dm_retrieve_on: bool,
}

impl RoutingDirective {
    pub const ALL_ON: Self = Self {
        wm_encode_on: true,
        dm_store_on: true,
        dm_retrieve_on: true,
    };
    pub const ALL_OFF: Self = Self {
        wm_encode_on: false,
        dm_store_on: false,
        dm_retrieve_on: false,
    };

    pub fn bits(self) -> u64 {
        self.wm_encode_on as u64 | (self.dm_store_on as u64) << 1 | (self.dm_retrieve_on as u64) << 2
    }

    pub fn from_bits(bits: u64) -> Self {
        Self {
            wm_encode_on: bits & 1 != 0,
            dm_store_on: bits & 2 != 0,
            dm_retrieve_on: bits & 4 != 0,
        }
    }
}

impl Default for RoutingDirective {
    fn default() -> Self {
        Self::ALL_ON
    }
}

/// Counter that drives the exploration schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsilonClock {
    Cycles,
    Episodes,
}

impl EpsilonClock {
    pub fn name(self) -> &'static str {
        match self {
            EpsilonClock::Cycles => "cycles",
            EpsilonClock::Episodes => "episodes",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cycles" => Some(EpsilonClock::Cycles),
            "episodes" => Some(EpsilonClock::Episodes),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub seed: u64,
    /// HRR dimension shared by all buffers and memories.
    pub d: usize,
    /// Sensory layer sizes `[J_0, .., J_L]`.
    pub sensory_sizes: Vec<usize>,
    pub sensory: NgcConfig,
    pub sensory_eta_w: f64,
    pub sensory_eta_e: f64,
    /// Gate settings; the mask seed is derived from `seed`.
    pub gate: GateConfig,
    pub context_window: usize,
    pub wm_rho: f64,
    pub dm_tau: f64,
    /// Motor settings; `motor.sizes` is `[|A|, hidden.., motor_in]`.
    pub motor: MotorConfig,
    pub epsilon_clock: EpsilonClock,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            d: 1024,
            sensory_sizes: vec![784, 360, 360],
            sensory: NgcConfig::default(),
            sensory_eta_w: 0.01,
            sensory_eta_e: 0.01,
            gate: GateConfig::default(),
            context_window: crate::gate::DEFAULT_CONTEXT_WINDOW,
            wm_rho: 0.9,
            dm_tau: crate::memory::DEFAULT_TAU,
            motor: MotorConfig::default(),
            epsilon_clock: EpsilonClock::Cycles,
        }
    }
}

fn clip_text(c: Option<f64>) -> String {
    c.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn parse_clip(s: &str) -> Option<Option<f64>> {
    if s == "none" {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}

fn ngc_pairs(prefix: &str, c: &NgcConfig) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}_sigma"), c.sigma.to_string()),
        (format!("{prefix}_beta"), c.beta.to_string()),
        (format!("{prefix}_gamma"), c.gamma.to_string()),
        (format!("{prefix}_steps"), c.steps.to_string()),
        (format!("{prefix}_activation"), c.hidden_activation.name().into()),
        (format!("{prefix}_feedback"), c.feedback_init.name().into()),
        (format!("{prefix}_clip"), clip_text(c.column_clip)),
    ]
}

fn take_ngc(kv: &mut KvMap, prefix: &str, c: &mut NgcConfig) -> Result<()> {
    kv.take_into(&format!("{prefix}_sigma"), &mut c.sigma)?;
    kv.take_into(&format!("{prefix}_beta"), &mut c.beta)?;
    kv.take_into(&format!("{prefix}_gamma"), &mut c.gamma)?;
    kv.take_into(&format!("{prefix}_steps"), &mut c.steps)?;
    if let Some(a) = kv.take_with(&format!("{prefix}_activation"), Activation::parse)? {
        c.hidden_activation = a;
    }
    if let Some(f) = kv.take_with(&format!("{prefix}_feedback"), FeedbackInit::parse)? {
        c.feedback_init = f;
    }
    if let Some(clip) = kv.take_with(&format!("{prefix}_clip"), parse_clip)? {
        c.column_clip = clip;
    }
    Ok(())
}

impl AgentConfig {
    /// Every setting as `(key, value)` text pairs.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let m = &self.motor;
        let g = &self.gate;
        let mut out: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("d".into(), self.d.to_string()),
            ("sensory_sizes".into(), join_list(&self.sensory_sizes)),
        ];
        out.extend(ngc_pairs("sensory", &self.sensory));
        out.extend([
            ("sensory_eta_w".into(), self.sensory_eta_w.to_string()),
            ("sensory_eta_e".into(), self.sensory_eta_e.to_string()),
            ("gate_max_units".into(), g.max_units.to_string()),
            ("gate_theta".into(), g.theta.to_string()),
            ("gate_eta_c".into(), g.eta_c.to_string()),
            ("gate_density".into(), g.density.to_string()),
            ("gate_masks".into(), g.mask_kind.name().into()),
            ("gate_metric".into(), g.metric.name().into()),
            ("route_wm_encode".into(), g.routing.wm_encode_on.to_string()),
            ("route_dm_store".into(), g.routing.dm_store_on.to_string()),
            ("route_dm_retrieve".into(), g.routing.dm_retrieve_on.to_string()),
            ("context_window".into(), self.context_window.to_string()),
            ("wm_rho".into(), self.wm_rho.to_string()),
            ("dm_tau".into(), self.dm_tau.to_string()),
            ("actions".into(), m.sizes[0].to_string()),
            ("motor_hidden".into(), join_list(&m.sizes[1..m.sizes.len() - 1])),
            ("motor_in".into(), m.sizes[m.sizes.len() - 1].to_string()),
        ]);
        out.extend(ngc_pairs("motor", &m.ngc));
        out.extend([
            ("gamma_d".into(), m.gamma_d.to_string()),
            ("alpha_e".into(), m.alpha_e.to_string()),
            ("r_clip".into(), m.r_clip.to_string()),
            ("motor_eta_w".into(), m.eta_w.to_string()),
            ("motor_eta_e".into(), m.eta_e.to_string()),
            ("epsilon_start".into(), m.epsilon.start.to_string()),
            ("epsilon_end".into(), m.epsilon.end.to_string()),
            ("epsilon_decay".into(), m.epsilon.decay_steps.to_string()),
            ("epsilon_clock".into(), self.epsilon_clock.name().into()),
            ("replay_capacity".into(), m.replay_capacity.to_string()),
            ("replay_batch".into(), m.replay_batch.to_string()),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        format_kv(self.to_pairs())
    }

    /// Consumes every agent key present in `kv`, leaving other keys.
    pub fn apply(&mut self, kv: &mut KvMap) -> Result<()> {
        kv.take_into("seed", &mut self.seed)?;
        kv.take_into("d", &mut self.d)?;
        if let Some(s) = kv.take_list("sensory_sizes")? {
            self.sensory_sizes = s;
        }
        take_ngc(kv, "sensory", &mut self.sensory)?;
        kv.take_into("sensory_eta_w", &mut self.sensory_eta_w)?;
        kv.take_into("sensory_eta_e", &mut self.sensory_eta_e)?;
        let g = &mut self.gate;
        kv.take_into("gate_max_units", &mut g.max_units)?;
        kv.take_into("gate_theta", &mut g.theta)?;
        kv.take_into("gate_eta_c", &mut g.eta_c)?;
        kv.take_into("gate_density", &mut g.density)?;
        if let Some(k) = kv.take_with("gate_masks", MaskKind::parse)? {
            g.mask_kind = k;
        }
        if let Some(mt) = kv.take_with("gate_metric", Metric::parse)? {
            g.metric = mt;
        }
        kv.take_into("route_wm_encode", &mut g.routing.wm_encode_on)?;
        kv.take_into("route_dm_store", &mut g.routing.dm_store_on)?;
        kv.take_into("route_dm_retrieve", &mut g.routing.dm_retrieve_on)?;
        kv.take_into("context_window", &mut self.context_window)?;
        kv.take_into("wm_rho", &mut self.wm_rho)?;
        kv.take_into("dm_tau", &mut self.dm_tau)?;

        let m = &mut self.motor;
        let n = m.sizes.len();
        let mut actions = m.sizes[0];
        let mut hidden = m.sizes[1..n - 1].to_vec();
        let mut motor_in = m.sizes[n - 1];
        kv.take_into("actions", &mut actions)?;
        if let Some(h) = kv.take_list("motor_hidden")? {
            hidden = h;
        }
        kv.take_into("motor_in", &mut motor_in)?;
        m.sizes = std::iter::once(actions)
            .chain(hidden)
            .chain(std::iter::once(motor_in))
            .collect();
        take_ngc(kv, "motor", &mut m.ngc)?;
        kv.take_into("gamma_d", &mut m.gamma_d)?;
        kv.take_into("alpha_e", &mut m.alpha_e)?;
        kv.take_into("r_clip", &mut m.r_clip)?;
        kv.take_into("motor_eta_w", &mut m.eta_w)?;
        kv.take_into("motor_eta_e", &mut m.eta_e)?;
        kv.take_into("epsilon_start", &mut m.epsilon.start)?;
        kv.take_into("epsilon_end", &mut m.epsilon.end)?;
        kv.take_into("epsilon_decay", &mut m.epsilon.decay_steps)?;
        if let Some(c) = kv.take_with("epsilon_clock", EpsilonClock::parse)? {
            self.epsilon_clock = c;
        }
        kv.take_into("replay_capacity", &mut m.replay_capacity)?;
        kv.take_into("replay_batch", &mut m.replay_batch)?;
        Ok(())
    }

    /// Parses a complete agent config; unknown keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = KvMap::parse(text)?;
        let mut cfg = Self::default();
        cfg.apply(&mut kv)?;
        kv.finish()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CogError::Config(msg));
        if self.d == 0 {
            return bad("d must be >= 1".into());
        }
        if self.sensory_sizes.len() < 2 {
            return bad("sensory_sizes needs an input and at least one latent layer".into());
        }
        if self.context_window == 0 {
            return bad("context_window must be >= 1".into());
        }
        Ok(())
    }
}

/// Named buffers plus the cycle bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct CognitiveState {
    buffers: IndexMap<String, HrrVector>,
    wm: WorkingMemoryBuffer,
    last_action: Option<usize>,
    step: u64,
    episodes: u64,
    goal_name: Option<String>,
    pending: Option<(Array1<f64>, usize)>,
    last_energy: f64,
    last_winner: Option<usize>,
}

impl CognitiveState {
    fn new(d: usize, rho: f64) -> Result<Self> {
        let zero = HrrVector::zeros(d)?;
        let buffers = [PERCEPTION, RETRIEVAL, GOAL]
            .into_iter()
            .map(|n| (n.to_string(), zero.clone()))
            .collect();
        Ok(Self {
            buffers,
            wm: WorkingMemoryBuffer::new(d, rho)?,
            last_action: None,
            step: 0,
            episodes: 0,
            goal_name: None,
            pending: None,
            last_energy: 0.0,
            last_winner: None,
        })
    }

    pub fn buffer(&self, name: &str) -> Option<&HrrVector> {
        self.buffers.get(name)
    }

    pub fn buffer_names(&self) -> impl Iterator<Item = &str> {
        self.buffers.keys().map(String::as_str)
    }

    fn set_buffer(&mut self, name: &str, v: HrrVector) {
        *self.buffers.get_mut(name).expect("fixed buffer set") = v;
    }

    pub fn perception(&self) -> &HrrVector {
        &self.buffers[PERCEPTION]
    }

    pub fn retrieval(&self) -> &HrrVector {
        &self.buffers[RETRIEVAL]
    }

    pub fn goal(&self) -> &HrrVector {
        &self.buffers[GOAL]
    }

    pub fn goal_name(&self) -> Option<&str> {
        self.goal_name.as_deref()
    }

    pub fn wm(&self) -> &WorkingMemoryBuffer {
        &self.wm
    }

    pub fn last_action(&self) -> Option<usize> {
        self.last_action
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Sensory energy of the most recent perception.
    pub fn last_energy(&self) -> f64 {
        self.last_energy
    }

    pub fn last_winner(&self) -> Option<usize> {
        self.last_winner
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }
}

/// Everything a cycle may change apart from the sensory synapses.
#[derive(Clone, Debug, PartialEq)]
struct Live {
    gate: CompetitiveGate,
    dm: DeclarativeMemory,
    state: CognitiveState,
    context: ContextWindow,
    eval_context: ContextWindow,
    motor: MotorCircuit,
    rng: ChaCha8Rng,
}

struct Perceived {
    settled: CircuitState,
    latent: Array1<f64>,
    perception: HrrVector,
    selection: Selection,
}

const STREAM_SENSORY: u64 = 1;
const STREAM_MOTOR: u64 = 2;
const STREAM_BRIDGE: u64 = 3;
const STREAM_MOTOR_BRIDGE: u64 = 4;
const STREAM_GATE: u64 = 5;
const STREAM_LEXICON: u64 = 6;

/// Independent seed for one component, derived from the agent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn gaussian_matrix(rows: usize, cols: usize, std: f64, seed: u64, stream: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    config: AgentConfig,
    sensory: NgcCircuit,
    /// `d × J_L` latent-to-HRR projection.
    bridge: Array2<f64>,
    /// `motor_in × 3d` projection of `[perception ∥ retrieval ∥ wm]`.
    motor_bridge: Array2<f64>,
    live: Live,
}

impl Agent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let d = config.d;
        let top = *config.sensory_sizes.last().expect("validated");
        let sensory = NgcCircuit::new(
            &config.sensory_sizes,
            derive_seed(seed, STREAM_SENSORY),
            &config.sensory,
        )?;
        let motor = MotorCircuit::new(config.motor.clone(), derive_seed(seed, STREAM_MOTOR))?;
        let bridge = gaussian_matrix(d, top, 1.0 / (d as f64).sqrt(), seed, STREAM_BRIDGE);
        let motor_bridge = gaussian_matrix(motor.state_dim(), 3 * d, 1.0, seed, STREAM_MOTOR_BRIDGE);
        Self::assemble(config, sensory, motor, bridge, motor_bridge)
    }

    /// Builds an agent around explicit circuits and projections.
    pub fn from_components(
        config: AgentConfig,
        sensory: NgcCircuit,
        motor: MotorCircuit,
        bridge: Array2<f64>,
        motor_bridge: Array2<f64>,
    ) -> Result<Self> {
        config.validate()?;
        Self::assemble(config, sensory, motor, bridge, motor_bridge)
    }

    fn assemble(
        config: AgentConfig,
        sensory: NgcCircuit,
        motor: MotorCircuit,
        bridge: Array2<f64>,
        motor_bridge: Array2<f64>,
    ) -> Result<Self> {
        let d = config.d;
        let sizes = sensory.sizes().to_vec();
        if sizes != config.sensory_sizes {
            return Err(CogError::Config(format!(
                "sensory circuit sizes {sizes:?} differ from config {:?}",
                config.sensory_sizes
            )));
        }
        let top = sizes[sizes.len() - 1];
        if bridge.dim() != (d, top) {
            return Err(CogError::Shape(format!(
                "bridge is {:?}, expected ({d}, {top})",
                bridge.dim()
            )));
        }
        if motor_bridge.dim() != (motor.state_dim(), 3 * d) {
            return Err(CogError::Shape(format!(
                "motor bridge is {:?}, expected ({}, {})",
                motor_bridge.dim(),
                motor.state_dim(),
                3 * d
            )));
        }
        let gate_cfg = GateConfig {
            seed: derive_seed(config.seed, STREAM_GATE),
            ..config.gate.clone()
        };
        let gate = CompetitiveGate::new(gate_cfg, sizes[0], sensory.hidden_sizes())?;
        let lexicon = SymbolLexicon::new(d, derive_seed(config.seed, STREAM_LEXICON))?;
        let live = Live {
            gate,
            dm: DeclarativeMemory::new(lexicon, config.dm_tau)?,
            state: CognitiveState::new(d, config.wm_rho)?,
            context: ContextWindow::new(config.context_window, sizes[0])?,
            eval_context: ContextWindow::new(config.context_window, sizes[0])?,
            motor,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        Ok(Self {
            config,
            sensory,
            bridge,
            motor_bridge,
            live,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn sensory(&self) -> &NgcCircuit {
        &self.sensory
    }

    pub fn motor(&self) -> &MotorCircuit {
        &self.live.motor
    }

    pub fn gate(&self) -> &CompetitiveGate {
        &self.live.gate
    }

    pub fn gate_mut(&mut self) -> &mut CompetitiveGate {
        &mut self.live.gate
    }

    pub fn dm(&self) -> &DeclarativeMemory {
        &self.live.dm
    }

    pub fn state(&self) -> &CognitiveState {
        &self.live.state
    }

    pub fn bridge(&self) -> &Array2<f64> {
        &self.bridge
    }

    pub fn motor_bridge(&self) -> &Array2<f64> {
        &self.motor_bridge
    }

    pub fn num_actions(&self) -> usize {
        self.live.motor.num_actions()
    }

    pub fn observation_dim(&self) -> usize {
        self.config.sensory_sizes[0]
    }

    /// Current exploration rate.
    pub fn epsilon(&self) -> f64 {
        let clock = match self.config.epsilon_clock {
            EpsilonClock::Cycles => self.live.state.step,
            EpsilonClock::Episodes => self.live.state.episodes,
        };
        self.live.motor.epsilon(clock)
    }

    /// Places the named task symbol in the goal buffer.
    pub fn set_goal(&mut self, name: &str) -> Result<()> {
        let mut dm = self.live.dm.clone();
        let v = dm.lexicon_mut().get_or_insert(name)?.clone();
        self.live.dm = dm;
        self.live.state.set_buffer(GOAL, v);
        self.live.state.goal_name = Some(name.to_string());
        Ok(())
    }

    fn check_observation(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.observation_dim() {
            return Err(CogError::DimensionMismatch {
                expected: self.observation_dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CogError::NonFinite("observation".into()));
        }
        Ok(())
    }

    /// `normalize(bridge · latent)`, or zero when the projection vanishes.
    fn to_hrr(&self, latent: &Array1<f64>) -> Result<HrrVector> {
        let v = HrrVector::new(self.bridge.dot(latent).to_vec())?;
        if v.is_zero() {
            Ok(v)
        } else {
            v.normalized()
        }
    }

    fn settle_sensory(&self, x: &Array1<f64>, mask: &GatingMask) -> Result<(CircuitState, Array1<f64>, HrrVector)> {
        let settled = self.sensory.settle(&[(0, x.clone())], Some(mask))?;
        let latent = self.sensory.latent(&settled);
        let perception = self.to_hrr(&latent)?;
        Ok((settled, latent, perception))
    }

    fn perceive_into(&self, live: &mut Live, x: &Array1<f64>) -> Result<Perceived> {
        self.check_observation(x)?;
        live.context.push(x)?;
        let ctx = live.context.mean();
        // Until the window fills, the first unit follows the partial mean.
        let selection = if live.gate.is_empty() || live.context.is_full() {
            let s = live.gate.select_or_recruit(&ctx)?;
            live.gate.update_winner(s.winner, &ctx)?;
            s
        } else {
            let (winner, distance) = live.gate.best_match(&ctx)?;
            live.gate.track(winner, &ctx)?;
            Selection {
                winner,
                distance,
                recruited: false,
                saturated: false,
            }
        };
        let mask = live.gate.mask_for(selection.winner)?.clone();
        let (settled, latent, perception) = self.settle_sensory(x, &mask)?;
        live.state.set_buffer(PERCEPTION, perception.clone());
        live.state.last_energy = settled.energy();
        live.state.last_winner = Some(selection.winner);
        Ok(Perceived {
            settled,
            latent,
            perception,
            selection,
        })
    }

    fn commit(&mut self, live: Live, settled: Option<&CircuitState>) -> Result<()> {
        if let Some(state) = settled {
            self.sensory
                .update_weights(state, self.config.sensory_eta_w, self.config.sensory_eta_e)?;
        }
        self.live = live;
        Ok(())
    }

    /// Gate selection, masked settling and sensory learning for one
    /// observation; returns the top-layer activity.
    pub fn perceive(&mut self, x: &Array1<f64>) -> Result<Array1<f64>> {
        let mut live = self.live.clone();
        let p = self.perceive_into(&mut live, x)?;
        self.commit(live, Some(&p.settled))?;
        Ok(p.latent)
    }

    /// Gate selection made during the most recent perception, if any.
    pub fn last_selection(&self) -> Option<usize> {
        self.live.state.last_winner
    }

    fn route(&self, live: &mut Live, winner: usize, perception: &HrrVector) -> Result<()> {
        let routing = live.gate.routing(winner)?;
        if routing.wm_encode_on {
            live.state.wm.encode(perception)?;
        }
        if routing.dm_store_on {
            let concept = live
                .state
                .goal_name
                .clone()
                .unwrap_or_else(|| format!("unit-{winner}"));
            live.dm.lexicon_mut().get_or_insert(&concept)?;
            live.dm.store_vector(&concept, perception)?;
        }
        if routing.dm_retrieve_on {
            if let Some(v) = Self::recall(&live.dm, perception)? {
                live.state.set_buffer(RETRIEVAL, v);
            }
        }
        Ok(())
    }

    /// Normalized top trace for a cue; `None` when nothing can be retrieved.
    fn recall(dm: &DeclarativeMemory, cue: &HrrVector) -> Result<Option<HrrVector>> {
        if cue.is_zero() || dm.is_empty() {
            return Ok(None);
        }
        let top = dm.retrieve(cue, 1)?;
        let name = &top.ranked[0].0;
        let trace = dm.trace(name).expect("ranked concept has a trace");
        Ok(Some(trace.normalized()?))
    }

    fn motor_input(&self, perception: &HrrVector, retrieval: &HrrVector, wm: &HrrVector) -> Result<Array1<f64>> {
        for v in [perception, retrieval, wm] {
            if v.dim() != self.config.d {
                return Err(CogError::DimensionMismatch {
                    expected: self.config.d,
                    actual: v.dim(),
                });
            }
        }
        let parts = [perception, retrieval, wm].map(|v| Array1::from(v.as_slice().to_vec()));
        let joined = concatenate(Axis(0), &[parts[0].view(), parts[1].view(), parts[2].view()])
            .map_err(|e| CogError::Shape(e.to_string()))?;
        Ok(self.motor_bridge.dot(&joined))
    }

    /// One cognitive cycle. `r_env` and `done` report the outcome of the
    /// previous action; `done` stops bootstrapping through this observation.
    pub fn cycle(&mut self, x: &Array1<f64>, r_env: f64, done: bool) -> Result<usize> {
        let mut live = self.live.clone();
        let p = self.perceive_into(&mut live, x)?;
        self.route(&mut live, p.selection.winner, &p.perception)?;
        let st = &live.state;
        let s = self.motor_input(st.perception(), st.retrieval(), st.wm.contents())?;
        let clock = match self.config.epsilon_clock {
            EpsilonClock::Cycles => st.step,
            EpsilonClock::Episodes => st.episodes,
        };
        let epsilon = live.motor.epsilon(clock);
        let a = live.motor.act(&s, epsilon, &mut live.rng)?;
        if let Some((s_prev, a_prev)) = live.state.pending.take() {
            let t = Transition {
                s: s_prev,
                a: a_prev,
                r_env,
                s_next: s.clone(),
                done,
            };
            live.motor.learn(&t, live.state.last_energy)?;
            live.motor.replay(&mut live.rng)?;
        }
        live.state.pending = Some((s, a));
        live.state.last_action = Some(a);
        live.state.step += 1;
        self.commit(live, Some(&p.settled))?;
        Ok(a)
    }

    /// Terminal reward for the last action; ends the episode.
    pub fn finish(&mut self, r_env: f64) -> Result<()> {
        let mut live = self.live.clone();
        if let Some((s, a)) = live.state.pending.take() {
            let t = Transition {
                s_next: s.clone(),
                s,
                a,
                r_env,
                done: true,
            };
            live.motor.learn(&t, live.state.last_energy)?;
            live.motor.replay(&mut live.rng)?;
        }
        live.state.episodes += 1;
        self.commit(live, None)
    }

    /// Clears the evaluation context window.
    pub fn begin_eval(&mut self) {
        self.live.eval_context.clear();
    }

    /// Adds an observation to the evaluation context without predicting.
    pub fn prime_eval(&mut self, x: &Array1<f64>) -> Result<()> {
        self.check_observation(x)?;
        self.live.eval_context.push(x)
    }

    /// Greedy action with no learning, recruitment or buffer change; only
    /// the evaluation context window advances.
    pub fn predict(&mut self, x: &Array1<f64>) -> Result<usize> {
        self.check_observation(x)?;
        self.live.eval_context.push(x)?;
        let (winner, _) = self.live.gate.best_match(&self.live.eval_context.mean())?;
        let mask = self.live.gate.mask_for(winner)?;
        let (_, _, perception) = self.settle_sensory(x, mask)?;
        let st = &self.live.state;
        let mut retrieval = st.retrieval().clone();
        if self.live.gate.routing(winner)?.dm_retrieve_on {
            if let Some(v) = Self::recall(&self.live.dm, &perception)? {
                retrieval = v;
            }
        }
        let s = self.motor_input(&perception, &retrieval, st.wm.contents())?;
        Ok(greedy(&self.live.motor.q_values(&s)?))
    }

    /// Supervised readout training on one labelled observation.
    pub fn train_supervised(&mut self, x: &Array1<f64>, label: usize) -> Result<()> {
        let mut live = self.live.clone();
        let p = self.perceive_into(&mut live, x)?;
        self.route(&mut live, p.selection.winner, &p.perception)?;
        let st = &live.state;
        let s = self.motor_input(st.perception(), st.retrieval(), st.wm.contents())?;
        live.motor.learn_supervised(&s, label)?;
        live.state.step += 1;
        self.commit(live, Some(&p.settled))
    }
}

fn put_matrix(c: &mut Container, name: &str, m: &Array2<f64>) -> Result<()> {
    let m = m.as_standard_layout();
    c.put_array(name, &[m.nrows(), m.ncols()], m.as_slice().expect("standard layout"))
}

fn get_matrix(c: &Container, name: &str) -> Result<Array2<f64>> {
    let (shape, data) = c.array(name)?;
    if shape.len() != 2 {
        return Err(CogError::Snapshot(format!("entry `{name}` is not a matrix")));
    }
    Array2::from_shape_vec((shape[0], shape[1]), data.to_vec())
        .map_err(|e| CogError::Snapshot(e.to_string()))
}

fn put_vector(c: &mut Container, name: &str, v: &[f64]) -> Result<()> {
    c.put_array(name, &[v.len()], v)
}

fn get_vector(c: &Container, name: &str) -> Result<Vec<f64>> {
    let (shape, data) = c.array(name)?;
    if shape.len() != 1 {
        return Err(CogError::Snapshot(format!("entry `{name}` is not a vector")));
    }
    Ok(data.to_vec())
}

fn put_rows<'a>(c: &mut Container, name: &str, dim: usize, rows: impl Iterator<Item = &'a Array1<f64>>) -> Result<()> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        data.extend(r.iter());
        n += 1;
    }
    c.put_array(name, &[n, dim], &data)
}

fn get_rows(c: &Container, name: &str, dim: usize) -> Result<Vec<Array1<f64>>> {
    let (shape, data) = c.array(name)?;
    if shape.len() != 2 || shape[1] != dim {
        return Err(CogError::Snapshot(format!("entry `{name}` has shape {shape:?}")));
    }
    Ok(data
        .chunks(dim.max(1))
        .take(shape[0])
        .map(|r| Array1::from(r.to_vec()))
        .collect())
}

fn opt_index(v: Option<usize>) -> i64 {
    v.map_or(-1, |i| i as i64)
}

fn from_opt_index(v: i64) -> Option<usize> {
    usize::try_from(v).ok()
}

impl Agent {
    /// Every parameter, buffer, counter and generator state.
    pub fn snapshot(&self) -> Result<Container> {
        let mut c = Container::new(self.config.seed);
        c.put_text("config", self.config.to_text())?;
        for l in 1..=self.sensory.depth() {
            put_matrix(&mut c, &format!("sensory/W{l}"), self.sensory.weight(l))?;
            put_matrix(&mut c, &format!("sensory/E{l}"), self.sensory.feedback(l))?;
        }
        put_matrix(&mut c, "bridge", &self.bridge)?;
        put_matrix(&mut c, "motor_bridge", &self.motor_bridge)?;

        let live = &self.live;
        let motor = live.motor.circuit();
        for l in 1..=motor.depth() {
            put_matrix(&mut c, &format!("motor/W{l}"), motor.weight(l))?;
            put_matrix(&mut c, &format!("motor/E{l}"), motor.feedback(l))?;
        }
        let replay = live.motor.replay_parts();
        let dim = live.motor.state_dim();
        put_rows(&mut c, "motor/replay/s", dim, replay.iter().map(|(t, _)| &t.s))?;
        put_rows(&mut c, "motor/replay/s_next", dim, replay.iter().map(|(t, _)| &t.s_next))?;
        let meta: Vec<f64> = replay
            .iter()
            .flat_map(|(t, bonus)| [t.a as f64, t.r_env, t.done as u8 as f64, *bonus])
            .collect();
        c.put_array("motor/replay/meta", &[replay.len(), 4], &meta)?;

        let gate = &live.gate;
        c.put_u64("gate/max_units", gate.config().max_units as u64)?;
        c.put_u64("gate/count", gate.active_count() as u64)?;
        c.put_u64("gate/saturation_events", gate.saturation_events())?;
        for k in 0..gate.active_count() {
            put_vector(&mut c, &format!("gate/unit{k}/prototype"), gate.prototype(k).expect("recruited").as_slice().expect("contiguous"))?;
            for (l, m) in gate.mask_for(k)?.layers().iter().enumerate() {
                put_vector(&mut c, &format!("gate/unit{k}/mask{}", l + 1), m.as_slice().expect("contiguous"))?;
            }
            c.put_u64(format!("gate/unit{k}/usage"), gate.usage()[k])?;
            c.put_u64(format!("gate/unit{k}/routing"), gate.routing(k)?.bits())?;
        }

        c.put_text("dm/lexicon", live.dm.lexicon().to_text())?;
        let concepts: Vec<&str> = live.dm.counts().map(|(n, _)| n).collect();
        c.put_text("dm/concepts", concepts.join("\n"))?;
        for (i, (name, count)) in live.dm.counts().enumerate() {
            c.put_u64(format!("dm/count{i}"), count)?;
            if let Some(t) = live.dm.trace(name) {
                put_vector(&mut c, &format!("dm/trace{i}"), t.as_slice())?;
            }
        }

        let st = &live.state;
        for name in st.buffer_names() {
            put_vector(&mut c, &format!("state/{name}"), st.buffers[name].as_slice())?;
        }
        c.put_text("state/goal_name", st.goal_name.clone().unwrap_or_default())?;
        c.put_u64("state/has_goal", st.goal_name.is_some() as u64)?;
        put_vector(&mut c, "wm/m", st.wm.contents().as_slice())?;
        c.put_u64("wm/position", st.wm.position() as u64)?;
        c.put_i64("state/last_action", opt_index(st.last_action))?;
        c.put_i64("state/last_winner", opt_index(st.last_winner))?;
        c.put_u64("state/step", st.step)?;
        c.put_u64("state/episodes", st.episodes)?;
        c.put_f64("state/last_energy", st.last_energy)?;
        match &st.pending {
            Some((s, a)) => {
                put_vector(&mut c, "state/pending_s", s.as_slice().expect("contiguous"))?;
                c.put_i64("state/pending_a", *a as i64)?;
            }
            None => c.put_i64("state/pending_a", -1)?,
        }

        let obs = self.observation_dim();
        put_rows(&mut c, "context/train", obs, live.context.rows())?;
        put_rows(&mut c, "context/eval", obs, live.eval_context.rows())?;

        let seed = live.rng.get_seed();
        for (i, chunk) in seed.chunks(8).enumerate() {
            c.put_u64(format!("rng/seed{i}"), u64::from_le_bytes(chunk.try_into().expect("8 bytes")))?;
        }
        c.put_u64("rng/stream", live.rng.get_stream())?;
        let pos = live.rng.get_word_pos();
        c.put_u64("rng/word_pos_hi", (pos >> 64) as u64)?;
        c.put_u64("rng/word_pos_lo", pos as u64)?;
        Ok(c)
    }

    /// Rebuilds an agent from [`Agent::snapshot`] output.
    pub fn restore(c: &Container) -> Result<Self> {
        let config = AgentConfig::from_text(c.text("config")?)?;
        if config.seed != c.seed() {
            return Err(CogError::Snapshot("header seed differs from stored config".into()));
        }
        let depth = config.sensory_sizes.len() - 1;
        let mut w = Vec::with_capacity(depth);
        let mut e = Vec::with_capacity(depth);
        for l in 1..=depth {
            w.push(get_matrix(c, &format!("sensory/W{l}"))?);
            e.push(get_matrix(c, &format!("sensory/E{l}"))?);
        }
        let sensory = NgcCircuit::from_parts(&config.sensory_sizes, w, e, &config.sensory)?;
        let motor_depth = config.motor.sizes.len() - 1;
        let mut w = Vec::with_capacity(motor_depth);
        let mut e = Vec::with_capacity(motor_depth);
        for l in 1..=motor_depth {
            w.push(get_matrix(c, &format!("motor/W{l}"))?);
            e.push(get_matrix(c, &format!("motor/E{l}"))?);
        }
        let motor_circuit = NgcCircuit::from_parts(&config.motor.sizes, w, e, &config.motor.ngc)?;
        let mut motor = MotorCircuit::from_circuit(config.motor.clone(), motor_circuit)?;
        let dim = motor.state_dim();
        let s_rows = get_rows(c, "motor/replay/s", dim)?;
        let n_rows = get_rows(c, "motor/replay/s_next", dim)?;
        let meta = c.array_shaped("motor/replay/meta", &[s_rows.len(), 4])?;
        if n_rows.len() != s_rows.len() {
            return Err(CogError::Snapshot("replay arrays disagree in length".into()));
        }
        let replay = s_rows
            .into_iter()
            .zip(n_rows)
            .zip(meta.chunks(4))
            .map(|((s, s_next), m)| {
                (
                    Transition {
                        s,
                        a: m[0] as usize,
                        r_env: m[1],
                        s_next,
                        done: m[2] != 0.0,
                    },
                    m[3],
                )
            })
            .collect();
        motor.restore_replay(replay)?;

        let bridge = get_matrix(c, "bridge")?;
        let motor_bridge = get_matrix(c, "motor_bridge")?;
        let mut agent = Self::from_components(config, sensory, motor, bridge, motor_bridge)?;
        let d = agent.config.d;
        let obs = agent.observation_dim();

        let hidden = agent.sensory.hidden_sizes().to_vec();
        let mut gate_cfg = agent.live.gate.config().clone();
        gate_cfg.max_units = c.u64("gate/max_units")? as usize;
        let count = c.u64("gate/count")? as usize;
        let mut units = Vec::with_capacity(count);
        for k in 0..count {
            let proto = Array1::from(get_vector(c, &format!("gate/unit{k}/prototype"))?);
            let layers = (1..=hidden.len())
                .map(|l| get_vector(c, &format!("gate/unit{k}/mask{l}")).map(Array1::from))
                .collect::<Result<Vec<_>>>()?;
            units.push((
                proto,
                GatingMask::new(layers)?,
                c.u64(&format!("gate/unit{k}/usage"))?,
                RoutingDirective::from_bits(c.u64(&format!("gate/unit{k}/routing"))?),
            ));
        }
        agent.live.gate = CompetitiveGate::from_parts(
            gate_cfg,
            obs,
            &hidden,
            units,
            c.u64("gate/saturation_events")?,
        )?;

        let lexicon_text = c.text("dm/lexicon")?;
        let lexicon = if lexicon_text.is_empty() {
            SymbolLexicon::new(agent.config.d, derive_seed(agent.config.seed, STREAM_LEXICON))?
        } else {
            SymbolLexicon::from_text(lexicon_text)?
        };
        let mut dm = DeclarativeMemory::new(lexicon, agent.config.dm_tau)?;
        let concepts_text = c.text("dm/concepts")?;
        let concepts: Vec<&str> = if concepts_text.is_empty() {
            Vec::new()
        } else {
            concepts_text.split('\n').collect()
        };
        let mut traces = Vec::new();
        let mut counts = Vec::new();
        for (i, name) in concepts.iter().enumerate() {
            counts.push((name.to_string(), c.u64(&format!("dm/count{i}"))?));
            if c.get(&format!("dm/trace{i}")).is_ok() {
                traces.push((name.to_string(), HrrVector::new(get_vector(c, &format!("dm/trace{i}"))?)?));
            }
        }
        dm.restore_parts(traces, counts)?;
        agent.live.dm = dm;

        let mut st = CognitiveState::new(d, agent.config.wm_rho)?;
        for name in [PERCEPTION, RETRIEVAL, GOAL] {
            st.set_buffer(name, HrrVector::new(get_vector(c, &format!("state/{name}"))?)?);
        }
        st.goal_name = (c.u64("state/has_goal")? != 0).then(|| c.text("state/goal_name").map(str::to_string)).transpose()?;
        st.wm = WorkingMemoryBuffer::from_parts(
            HrrVector::new(get_vector(c, "wm/m")?)?,
            agent.config.wm_rho,
            c.u64("wm/position")? as usize,
        )?;
        st.last_action = from_opt_index(c.i64("state/last_action")?);
        st.last_winner = from_opt_index(c.i64("state/last_winner")?);
        st.step = c.u64("state/step")?;
        st.episodes = c.u64("state/episodes")?;
        st.last_energy = c.f64("state/last_energy")?;
        st.pending = match from_opt_index(c.i64("state/pending_a")?) {
            Some(a) => Some((Array1::from(get_vector(c, "state/pending_s")?), a)),
            None => None,
        };
        agent.live.state = st;

        for (name, window) in [("context/train", &mut agent.live.context), ("context/eval", &mut agent.live.eval_context)] {
            window.clear();
            for row in get_rows(c, name, obs)? {
                window.push(&row)?;
            }
        }

        let mut seed = [0u8; 32];
        for i in 0..4 {
            seed[i * 8..(i + 1) * 8].copy_from_slice(&c.u64(&format!("rng/seed{i}"))?.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(c.u64("rng/stream")?);
        let pos = ((c.u64("rng/word_pos_hi")? as u128) << 64) | c.u64("rng/word_pos_lo")? as u128;
        rng.set_word_pos(pos);
        agent.live.rng = rng;
        Ok(agent)
    }
}
