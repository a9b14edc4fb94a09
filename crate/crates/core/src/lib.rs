//! Simulation and verification laboratory for the inherited-sterility process
//! IS(λ,p), the blocked-site process Spont(λ,p), and the contact process on
//! finite boxes of Z^d.
//!
//! Everything is driven by one graphical construction: four Poisson mark
//! families (fertile/sterile birth arrows per oriented edge, fertile/sterile
//! death clocks per site) merged into a deterministic, seed-reproducible
//! event stream. Couplings replay the same stream under different flip
//! semantics, which makes stochastic-domination claims checkable pathwise.
//!
//! Modules follow the subsystems:
//!
//! - [`lattice`]: finite boxes, neighbors, translations, configurations
//! - [`events`]: Poisson mark streams (Harris construction), restriction,
//!   split streams for parameter couplings
//! - [`dynamics`]: flip semantics, trajectory evolution, survival proxies
//! - [`coupling`]: coupled replays and pathwise order monitoring
//! - [`monotone`]: Borrello rate-table monotonicity criterion
//! - [`percolation`]: oriented site percolation on the even lattice
//! - [`renorm`]: space-time block construction, good events, wet sites
//! - [`ctmc`]: exact finite-chain oracle for small boxes

pub mod coupling;
pub mod ctmc;
pub mod dynamics;
pub mod error;
pub mod events;
pub mod lattice;
pub mod monotone;
pub mod percolation;
pub mod renorm;
pub mod stream;

pub use error::{Error, Result};
