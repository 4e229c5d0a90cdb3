//! Out-of-core full-amplitude state-vector simulation.
//!
//! The state vector lives in a block-structured file ([`store`]). Each gate
//! is applied in one sweep over pair units ([`kernel`]): blocks stream
//! through a bounded sliding window ([`cache`]) and can be split across
//! workers ([`parallel`]). A dense Kronecker-expansion simulator
//! ([`dense`]) serves as reference and baseline.

pub mod cache;
pub mod circuit_io;
pub mod dense;
pub mod engine;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod store;

pub use error::{Error, ParseErrorKind, Result};
pub use model::{Circuit, ComplexAmp, Gate2x2, GateLabel, GateOp};
