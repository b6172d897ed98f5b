//! Cognitive-architecture toolkit: holographic memory, neural generative
//! coding circuits, a competitive basal-ganglia gate, an active NGC motor
//! cortex and the agent that wires them into one cognitive cycle.

pub mod arch;
pub mod config;
pub mod error;
pub mod gate;
pub mod hrr;
pub mod memory;
pub mod motor;
pub mod ngc;
pub mod snapshot;

pub use arch::{Agent, AgentConfig, CognitiveState, EpsilonClock, RoutingDirective};
pub use config::KvMap;
pub use error::{CogError, Result};
pub use gate::{CompetitiveGate, ContextWindow, GateConfig, MaskKind, Metric, Selection};
pub use hrr::{HrrVector, SymbolLexicon};
pub use memory::{DeclarativeMemory, RetrievalResult, WorkingMemoryBuffer};
pub use motor::{EpsilonSchedule, MotorCircuit, MotorConfig, Transition};
pub use ngc::{Activation, CircuitState, FeedbackInit, GatingMask, NgcCircuit, NgcConfig};
pub use snapshot::Container;
