//! Lorenz-63 system and trajectory generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynsys::ode::{integrate_ode, IntegratorConfig};
use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0 }
    }
}

/// dx/dt = sigma (y - x), dy/dt = x (rho - z) - y, dz/dt = x y - beta z.
pub fn lorenz_rhs(state: [f64; 3], params: &LorenzParams) -> [f64; 3] {
    let [x, y, z] = state;
    [
        params.sigma * (y - x),
        x * (params.rho - z) - y,
        x * y - params.beta * z,
    ]
}

/// Simulates the Lorenz system from a seeded initial condition, discarding
/// `transient_discard` leading samples so the returned series starts on the
/// attractor. The result is deterministic per (params, seed).
pub fn simulate_lorenz(
    params: &LorenzParams,
    n_samples: usize,
    sample_dt: f64,
    transient_discard: usize,
    seed: u64,
) -> Result<TimeSeries> {
    if n_samples < 1 {
        return Err(Error::invalid("n_samples must be at least 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y0: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();

    let total = transient_discard + n_samples;
    let t_end = total as f64 * sample_dt;
    let config = IntegratorConfig::dopri5(1e-8, 1e-10);
    let p = *params;
    let full = integrate_ode(
        |_t, y, dy| {
            let d = lorenz_rhs([y[0], y[1], y[2]], &p);
            dy.copy_from_slice(&d);
        },
        &y0,
        (0.0, t_end),
        &config,
        sample_dt,
    )?;
    let mut ts = full.slice_samples(transient_discard, transient_discard + n_samples)?;
    ts.t0 = 0.0;
    ts.with_channel_names(vec!["x".into(), "y".into(), "z".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_fixed_point() {
        let d = lorenz_rhs([0.0, 0.0, 0.0], &LorenzParams::default());
        assert_eq!(d, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn nontrivial_fixed_point() {
        // (sqrt(beta (rho-1)), sqrt(beta (rho-1)), rho-1) with defaults: sqrt(72).
        let c = 72.0f64.sqrt();
        let d = lorenz_rhs([c, c, 27.0], &LorenzParams::default());
        for v in d {
            assert!(v.abs() < 1e-12, "residual {v}");
        }
    }

    #[test]
    fn unit_point_derivative() {
        let d = lorenz_rhs([1.0, 1.0, 1.0], &LorenzParams::default());
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 26.0);
        assert!((d[2] - (-5.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_start_stays_constant() {
        let c = 72.0f64.sqrt();
        let p = LorenzParams::default();
        let cfg = IntegratorConfig::dopri5(1e-10, 1e-12);
        let ts = integrate_ode(
            |_t, y, dy| {
                let d = lorenz_rhs([y[0], y[1], y[2]], &p);
                dy.copy_from_slice(&d);
            },
            &[c, c, 27.0],
            (0.0, 1.0),
            &cfg,
            0.1,
        )
        .unwrap();
        for i in 0..ts.n_samples() {
            assert!((ts.values[[i, 0]] - c).abs() < 1e-6);
            assert!((ts.values[[i, 2]] - 27.0).abs() < 1e-6);
        }
    }

    #[test]
    fn single_sample_is_finite() {
        let ts = simulate_lorenz(&LorenzParams::default(), 1, 0.1, 0, 42).unwrap();
        assert_eq!(ts.n_samples(), 1);
        assert_eq!(ts.n_channels(), 3);
    }

    #[test]
    fn same_seed_bit_identical() {
        let p = LorenzParams::default();
        let a = simulate_lorenz(&p, 200, 0.1, 50, 7).unwrap();
        let b = simulate_lorenz(&p, 200, 0.1, 50, 7).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let c = simulate_lorenz(&p, 200, 0.1, 50, 8).unwrap();
        assert_ne!(a.values, c.values);
    }
}
