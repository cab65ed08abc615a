//! Ground-truth chaotic systems and ODE integration kernels.

pub mod kse;
pub mod lorenz;
pub mod ode;

pub use kse::{simulate_kse, simulate_kse_from, spatial_mean, spectral_derivatives, KseParams};
pub use lorenz::{lorenz_rhs, simulate_lorenz, LorenzParams};
pub use ode::{dopri5_step, integrate_ode, rk4_step, Dopri5Driver, IntegrationMethod, IntegratorConfig};
