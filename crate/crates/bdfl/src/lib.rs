//! Vertical federated logistic regression for two data parties and an
//! arbiter, trained on a quadratic approximation of the logistic loss so
//! that every cross-party quantity can be exchanged under additively
//! homomorphic encryption.
//!
//! The crate is organised around the three-party protocol:
//!
//! - [`phe`]: Paillier cryptosystem plus fixed-point encoding of signed
//!   reals into the plaintext ring.
//! - [`model`]: the per-sample and batch model mathematics (intermediate
//!   values, residuals, losses, gradients, prediction).
//! - [`optim`]: gradient-descent and quasi-Newton parameter updates (DFP,
//!   BFGS, and their convex blend) with curvature safeguards.
//! - [`data`]: CSV ingestion, vertical feature splitting, seeded
//!   train/test partitioning and standardization.
//! - [`fed`]: the host/guest/arbiter state machines, message schema,
//!   transports and the round driver.
//! - [`oracle`]: a centralized plaintext run of the identical computation,
//!   used as ground truth for the encrypted protocol.
//! - [`config`]: run configuration, metrics records and output writers.

pub mod config;
pub mod data;
pub mod error;
pub mod fed;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod phe;

pub use config::{MetricsRecord, RunConfig, RunMode};
pub use error::{ConfigError, CryptoError, DataError, ModelError, ProtocolError};
