//! Toolkit for one-sided matching markets: housing allocation and housing
//! market instances, sequential reference solvers (serial dictatorship, top
//! trading cycle, rank-weighted assignment), lex-first maximal matching
//! reductions, polynomial-time matching verifiers, and a deterministic
//! synchronous message-passing simulator running distributed cycle-finding
//! and distributed top-trading-cycle protocols.

pub mod cycles;
pub mod dttc;
pub mod gen;
pub mod instance;
pub mod io;
pub mod lfmm;
pub mod sim;
pub mod solve;
pub mod verify;

pub use instance::{AgentId, HouseId, Instance, InstanceKind, Matching, PreferenceList};
