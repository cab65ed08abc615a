//! Learning delay-coordinate dynamics of chaotic systems from partial
//! observations.
//!
//! The crate covers the full workflow:
//!
//! 1. [`dynsys`] — ground-truth trajectories of the Lorenz-63 ODE and the
//!    Kuramoto–Sivashinsky PDE, plus the generic ODE kernels (fixed-step RK4,
//!    adaptive Dormand–Prince 5(4)) reused by the neural-ODE models.
//! 2. [`embedding`] — projection to partial observations, delay-coordinate
//!    construction, and embedding-parameter selection via mutual information
//!    and false nearest neighbors.
//! 3. [`nn`] — dense feed-forward networks with reverse-mode gradients, Adam,
//!    step learning-rate schedules, and checksummed serialization.
//! 4. [`models`] — the three learned maps: a discrete-time stepper advancing
//!    the newest embedding block by one delay, a continuous-time flow
//!    (neural ODE with linear damping), and a reconstruction map back to the
//!    full state.
//! 5. [`eval`] — ensemble tracking error, autocorrelation, joint PDFs,
//!    KL divergence, and collapse detection for long model trajectories.
//!
//! All randomness is seeded and all training is single-threaded at the
//! optimizer level, so identical inputs produce bit-identical outputs.

pub mod dynsys;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod timeseries;

pub use error::{Error, Result};
pub use timeseries::TimeSeries;
