//! Competitive-Hebbian task gate (basal ganglia).
//!
//! Each recruited unit owns a prototype in context space and a fixed binary
//! mask over the cortical hidden units. A context is matched to the nearest
//! prototype; if it is farther than `theta` from every prototype and spare
//! capacity remains, a new unit is recruited at the context. Only the winner
//! moves toward the context (hard winner-take-all), and masks never change
//! after recruitment.

use std::collections::VecDeque;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::RoutingDirective;
use crate::error::{CogError, Result};
use crate::ngc::GatingMask;

/// Default width of the context averaging window.
pub const DEFAULT_CONTEXT_WINDOW: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    /// Exactly `round(p · n)` ones per layer at random positions.
    Random,
    /// Contiguous disjoint blocks of width `n / round(1/p)`, assigned round-robin.
    Block,
}

impl MaskKind {
    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Random => "random",
            MaskKind::Block => "block",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(MaskKind::Random),
            "block" => Some(MaskKind::Block),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    /// `1 − cos(context, prototype)`.
    Cosine,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euclidean" => Some(Metric::Euclidean),
            "cosine" => Some(Metric::Cosine),
            _ => None,
        }
    }

    pub fn distance(self, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let na = a.dot(a).sqrt();
                let nb = b.dot(b).sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - a.dot(b) / (na * nb)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateConfig {
    pub max_units: usize,
    /// Novelty distance threshold.
    pub theta: f64,
    /// Prototype learning rate.
    pub eta_c: f64,
    /// Fraction of open gates per mask.
    pub density: f64,
    pub mask_kind: MaskKind,
    pub metric: Metric,
    pub seed: u64,
    /// Directive given to every newly recruited unit.
    pub routing: RoutingDirective,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            max_units: 8,
            theta: 1.0,
            eta_c: 0.1,
            density: 0.5,
            mask_kind: MaskKind::Random,
            metric: Metric::Euclidean,
            seed: 0,
            routing: RoutingDirective::default(),
        }
    }
}

impl GateConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CogError::InvalidParameter(msg));
        if self.max_units == 0 {
            return bad("gate needs capacity for at least one unit".into());
        }
        if !(self.theta >= 0.0) {
            return bad(format!("theta must be >= 0, got {}", self.theta));
        }
        if !(0.0..=1.0).contains(&self.eta_c) {
            return bad(format!("eta_c must be in [0, 1], got {}", self.eta_c));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("mask density must be in (0, 1], got {}", self.density));
        }
        Ok(())
    }
}

/// Outcome of [`CompetitiveGate::select_or_recruit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub winner: usize,
    /// Distance from the context to the winner before any update.
    pub distance: f64,
    pub recruited: bool,
    /// Novelty was detected but no capacity was left.
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompetitiveGate {
    config: GateConfig,
    context_dim: usize,
    hidden_sizes: Vec<usize>,
    prototypes: Vec<Array1<f64>>,
    masks: Vec<GatingMask>,
    usage: Vec<u64>,
    routing: Vec<RoutingDirective>,
    saturation_events: u64,
}

impl CompetitiveGate {
    pub fn new(config: GateConfig, context_dim: usize, hidden_sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        if context_dim == 0 {
            return Err(CogError::InvalidDimension("context dimension must be >= 1".into()));
        }
        Ok(Self {
            config,
            context_dim,
            hidden_sizes: hidden_sizes.to_vec(),
            prototypes: Vec::new(),
            masks: Vec::new(),
            usage: Vec::new(),
            routing: Vec::new(),
            saturation_events: 0,
        })
    }

    pub fn config(&self) -> &GateConfig {
        &self.config
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.hidden_sizes
    }

    /// Number of recruited units.
    pub fn active_count(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn prototype(&self, k: usize) -> Option<&Array1<f64>> {
        self.prototypes.get(k)
    }

    pub fn usage(&self) -> &[u64] {
        &self.usage
    }

    pub fn saturation_events(&self) -> u64 {
        self.saturation_events
    }

    pub fn routing(&self, k: usize) -> Result<RoutingDirective> {
        self.routing.get(k).copied().ok_or(CogError::Unrecruited(k))
    }

    pub fn set_routing(&mut self, k: usize, directive: RoutingDirective) -> Result<()> {
        let slot = self.routing.get_mut(k).ok_or(CogError::Unrecruited(k))?;
        *slot = directive;
        Ok(())
    }

    /// Raises capacity without touching recruited units.
    pub fn set_max_units(&mut self, max_units: usize) -> Result<()> {
        if max_units < self.active_count() || max_units == 0 {
            return Err(CogError::InvalidParameter(format!(
                "capacity {max_units} below {} recruited units",
                self.active_count()
            )));
        }
        self.config.max_units = max_units;
        Ok(())
    }

    fn check_context(&self, context: &Array1<f64>) -> Result<()> {
        if context.len() != self.context_dim {
            return Err(CogError::DimensionMismatch {
                expected: self.context_dim,
                actual: context.len(),
            });
        }
        if context.iter().any(|v| !v.is_finite()) {
            return Err(CogError::NonFinite("gate context".into()));
        }
        Ok(())
    }

    /// Nearest recruited prototype; ties go to the lowest index.
    pub fn best_match(&self, context: &Array1<f64>) -> Result<(usize, f64)> {
        self.check_context(context)?;
        let mut best: Option<(usize, f64)> = None;
        for (k, w) in self.prototypes.iter().enumerate() {
            let d = self.config.metric.distance(context, w);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best.ok_or(CogError::NoUnits)
    }

    /// Matches the context, recruiting a fresh unit on novelty.
    pub fn select_or_recruit(&mut self, context: &Array1<f64>) -> Result<Selection> {
        self.check_context(context)?;
        let selection = match self.best_match(context) {
            Err(CogError::NoUnits) => Selection {
                winner: self.recruit(context),
                distance: 0.0,
                recruited: true,
                saturated: false,
            },
            Err(e) => return Err(e),
            Ok((winner, distance)) if distance > self.config.theta => {
                if self.active_count() < self.config.max_units {
                    Selection {
                        winner: self.recruit(context),
                        distance: 0.0,
                        recruited: true,
                        saturated: false,
                    }
                } else {
                    self.saturation_events += 1;
                    Selection {
                        winner,
                        distance,
                        recruited: false,
                        saturated: true,
                    }
                }
            }
            Ok((winner, distance)) => Selection {
                winner,
                distance,
                recruited: false,
                saturated: false,
            },
        };
        self.usage[selection.winner] += 1;
        Ok(selection)
    }

    /// Counts a use of `winner` and moves its prototype onto `context`.
    /// Used while the context window fills, so the first unit ends warm-up
    /// holding a full-window mean rather than its first sample.
    pub fn track(&mut self, winner: usize, context: &Array1<f64>) -> Result<()> {
        self.check_context(context)?;
        let slot = self.usage.get_mut(winner).ok_or(CogError::Unrecruited(winner))?;
        *slot += 1;
        self.prototypes[winner].assign(context);
        Ok(())
    }

    fn recruit(&mut self, context: &Array1<f64>) -> usize {
        let k = self.prototypes.len();
        self.prototypes.push(context.clone());
        self.masks.push(self.make_mask(k));
        self.usage.push(0);
        self.routing.push(self.config.routing);
        k
    }

    fn make_mask(&self, unit: usize) -> GatingMask {
        let p = self.config.density;
        let layers = self
            .hidden_sizes
            .iter()
            .enumerate()
            .map(|(layer, &n)| match self.config.mask_kind {
                MaskKind::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                    rng.set_stream(((unit as u64) << 16) | layer as u64);
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut rng);
                    let ones = ((p * n as f64).round() as usize).min(n);
                    let mut gate = Array1::zeros(n);
                    for &i in &idx[..ones] {
                        gate[i] = 1.0;
                    }
                    gate
                }
                MaskKind::Block => {
                    let blocks = ((1.0 / p).round() as usize).max(1);
                    let b = unit % blocks;
                    let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
                    Array1::from_shape_fn(n, |i| if (lo..hi).contains(&i) { 1.0 } else { 0.0 })
                }
            })
            .collect();
        GatingMask::new(layers).expect("binary gates are in range")
    }

    /// `w ← w + eta_c · (context − w)` for the winner only.
    pub fn update_winner(&mut self, winner: usize, context: &Array1<f64>) -> Result<()> {
        self.check_context(context)?;
        let eta = self.config.eta_c;
        let w = self
            .prototypes
            .get_mut(winner)
            .ok_or(CogError::Unrecruited(winner))?;
        w.zip_mut_with(context, |wi, &ci| *wi += eta * (ci - *wi));
        Ok(())
    }

    pub fn mask_for(&self, winner: usize) -> Result<&GatingMask> {
        self.masks.get(winner).ok_or(CogError::Unrecruited(winner))
    }

    /// Rebuilds a gate from stored parts (used by snapshot restore).
    pub fn from_parts(
        config: GateConfig,
        context_dim: usize,
        hidden_sizes: &[usize],
        units: Vec<(Array1<f64>, GatingMask, u64, RoutingDirective)>,
        saturation_events: u64,
    ) -> Result<Self> {
        let mut gate = Self::new(config, context_dim, hidden_sizes)?;
        if units.len() > gate.config.max_units {
            return Err(CogError::InvalidParameter("more units than capacity".into()));
        }
        for (w, mask, usage, routing) in units {
            gate.check_context(&w)?;
            if mask.hidden_sizes() != gate.hidden_sizes {
                return Err(CogError::Shape("stored mask does not match hidden sizes".into()));
            }
            gate.prototypes.push(w);
            gate.masks.push(mask);
            gate.usage.push(usage);
            gate.routing.push(routing);
        }
        gate.saturation_events = saturation_events;
        Ok(gate)
    }
}

/// Running mean of the most recent observations; drives the gate.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextWindow {
    capacity: usize,
    dim: usize,
    rows: VecDeque<Array1<f64>>,
}

impl ContextWindow {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(CogError::InvalidParameter(
                "context window needs positive capacity and dimension".into(),
            ));
        }
        Ok(Self {
            capacity,
            dim,
            rows: VecDeque::with_capacity(capacity),
        })
    }

    pub fn push(&mut self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(CogError::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        if self.rows.len() == self.capacity {
            self.rows.pop_front();
        }
        self.rows.push_back(x.clone());
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> impl Iterator<Item = &Array1<f64>> {
        self.rows.iter()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    /// Mean of the stored rows (oldest first); zero when empty.
    pub fn mean(&self) -> Array1<f64> {
        let mut acc = Array1::zeros(self.dim);
        for r in &self.rows {
            acc += r;
        }
        if !self.rows.is_empty() {
            acc /= self.rows.len() as f64;
        }
        acc
    }
}
