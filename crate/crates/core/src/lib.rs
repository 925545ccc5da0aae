//! Answer-set reasoning engine and the UATM vertiport-closure domain built
//! on top of it.

pub mod domain;
pub mod fixtures;
pub mod ground;
pub mod scenario;
pub mod service;
pub mod solve;
pub mod syntax;

pub use domain::{load_network, AgentState, ConfigError, Network, ValidationError};
pub use ground::{ground, GroundAtom, GroundError, GroundProgram, Value};
pub use scenario::{golden_scenario, ScenarioError, ScenarioEvent, Session};
pub use service::{OperatorService, ServiceError};
pub use solve::{answer_sets, explain, well_founded, AnswerSet, DerivationTree, SolveError, SolveReport};
pub use syntax::{parse_program, Program, Signature, SyntaxError};
