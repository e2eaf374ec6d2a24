//! Lyapunov-based stability regions for reservoir computers.
//!
//! A reservoir of `M` scalar nodes evolves as
//! `r_i' = f(r_i) + Σ_j A_ij r_j + w_i s` (continuous time) or
//! `r_i(n+1) = f(r_i(n)) + Σ_j A_ij r_j(n) + w_i s(n)` (discrete time).
//! Bounding the ratio `f(r)/r` on `[-c, c]` decouples stability of the unforced
//! reservoir into a nodal term and a topology term, which gives a certified
//! radius `c_max` of the basin around the operating fixed point.
//!
//! - [`signals`]: Lorenz and Duffing drive/target signals.
//! - [`dynamics`]: the nodal-dynamics family and the extremal ratio candidates.
//! - [`network`]: random adjacency construction and spectral thresholds.
//! - [`stability`]: `K*` bounds, `c_max` solvers, fixed-point shift, basin checks.
//! - [`reservoir`]: driven simulation, minimum-norm readout and training error.
//! - [`sweep`]: parameter-grid experiments, boundary curves and box statistics.

pub mod csv;
pub mod dynamics;
pub mod error;
pub mod network;
pub mod reservoir;
pub mod signals;
pub mod stability;
pub mod sweep;

mod integrate;

pub use dynamics::NodalDynamics;
pub use error::{Error, Result};
pub use network::{ReservoirNetwork, SpectralSummary};
pub use stability::{Regime, StabilityReport};

use serde::{Deserialize, Serialize};

/// Whether the reservoir is a flow or a map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeKind {
    Continuous,
    Discrete,
}
