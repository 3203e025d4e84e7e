//! Data-driven reachability for learned dynamics.
//!
//! Pipeline: simulate a quadrotor, learn its vector field with a multistep
//! network, lift the network online to linear time-varying maps with windowed
//! DMD with control, and propagate supporting hyperplanes of the reachable set
//! through the lifts. A Monte-Carlo oracle checks the resulting polytopes.

pub mod config;
pub mod dmdc;
pub mod error;
pub mod hull;
pub mod io;
pub mod mc;
pub mod mlp;
pub mod oracle;
pub mod pipeline;
pub mod quadrotor;
pub mod reach;
pub mod rng;
pub mod sets;

pub use error::{Error, Result};
