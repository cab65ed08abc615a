//! Fixed-step RK4 and adaptive Dormand–Prince 5(4) kernels.
//!
//! The adaptive driver steps exactly onto every output sample boundary, so a
//! trajectory sampled at `sample_dt` is reproducible independently of how the
//! controller subdivides the interior of each interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    Rk4Fixed,
    Dopri5Adaptive,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: IntegrationMethod,
    pub rtol: f64,
    pub atol: f64,
    /// Step size for `Rk4Fixed` (intervals are subdivided to land on sample
    /// boundaries); upper bound on the step for `Dopri5Adaptive`.
    pub max_step: f64,
}

impl IntegratorConfig {
    pub fn dopri5(rtol: f64, atol: f64) -> Self {
        IntegratorConfig { method: IntegrationMethod::Dopri5Adaptive, rtol, atol, max_step: f64::INFINITY }
    }

    pub fn rk4(step: f64) -> Self {
        IntegratorConfig { method: IntegrationMethod::Rk4Fixed, rtol: 1e-8, atol: 1e-10, max_step: step }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::invalid(format!(
                "tolerances must be positive: rtol={}, atol={}",
                self.rtol, self.atol
            )));
        }
        if self.method == IntegrationMethod::Rk4Fixed && !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(Error::invalid("rk4_fixed requires a finite positive max_step".to_string()));
        }
        Ok(())
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::dopri5(1e-8, 1e-10)
    }
}

/// One classical RK4 step of size `h`. `rhs(t, y, dydt)` fills the derivative.
pub fn rk4_step<F>(rhs: &F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);

    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error weights b5 - b4 (embedded 4th-order solution).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand–Prince 5(4) step. Returns the 5th-order solution and the
/// embedded error estimate per component.
pub fn dopri5_step<F>(rhs: &F, t: f64, y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];

    rhs(t, y, &mut k[0]);
    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k[0][i];
    }
    rhs(t + h / 5.0, &tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    }
    rhs(t + 3.0 * h / 10.0, &tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    }
    rhs(t + 4.0 * h / 5.0, &tmp, &mut k[3]);
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    }
    rhs(t + 8.0 * h / 9.0, &tmp, &mut k[4]);
    for i in 0..n {
        tmp[i] = y[i]
            + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    }
    rhs(t + h, &tmp, &mut k[5]);
    let y5: Vec<f64> = (0..n)
        .map(|i| {
            y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i])
        })
        .collect();
    rhs(t + h, &y5, &mut k[6]);
    let err: Vec<f64> = (0..n)
        .map(|i| {
            h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i])
        })
        .collect();
    (y5, err)
}

/// Integrates `rhs` over `t_span`, emitting samples every `sample_dt`
/// starting at `t_span.0`. Sample boundaries are hit exactly.
pub fn integrate_ode<F>(
    rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    config: &IntegratorConfig,
    sample_dt: f64,
) -> Result<TimeSeries>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    config.validate()?;
    let (t_start, t_end) = t_span;
    if !(t_end > t_start) {
        return Err(Error::invalid(format!("t_span must be increasing, got ({t_start}, {t_end})")));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::invalid(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let n_intervals = ((t_end - t_start) / sample_dt + 1e-9).floor() as usize;
    let n_samples = n_intervals + 1;

    let mut rows: Vec<f64> = Vec::with_capacity(n_samples * y0.len());
    rows.extend_from_slice(y0);
    let mut y = y0.to_vec();
    let mut stepper = match config.method {
        IntegrationMethod::Rk4Fixed => Stepper::Rk4,
        IntegrationMethod::Dopri5Adaptive => {
            Stepper::Dopri5(Dopri5Driver::new(*config, initial_step(sample_dt, config)))
        }
    };
    for k in 0..n_intervals {
        let t_from = t_start + k as f64 * sample_dt;
        let t_to = t_start + (k + 1) as f64 * sample_dt;
        advance_interval(&rhs, &mut y, t_from, t_to, config, &mut stepper)?;
        rows.extend_from_slice(&y);
    }
    let values = ndarray::Array2::from_shape_vec((n_samples, y0.len()), rows)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    TimeSeries::new(values, sample_dt, t_start)
}

enum Stepper {
    Rk4,
    Dopri5(Dopri5Driver),
}

fn initial_step(sample_dt: f64, config: &IntegratorConfig) -> f64 {
    (sample_dt / 10.0).min(config.max_step)
}

/// Adaptive Dormand–Prince driver that carries its proposed step size across
/// intervals, so repeated `advance` calls behave like one long integration.
pub struct Dopri5Driver {
    config: IntegratorConfig,
    h_prop: f64,
}

impl Dopri5Driver {
    pub fn new(config: IntegratorConfig, initial_h: f64) -> Self {
        Dopri5Driver { config, h_prop: initial_h.min(config.max_step) }
    }

    /// Advances `y` from `t_from` to `t_to`, landing on `t_to` exactly.
    pub fn advance<F>(&mut self, rhs: &F, y: &mut Vec<f64>, t_from: f64, t_to: f64) -> Result<()>
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let mut t = t_from;
        let h_min_floor = 1e-14 * (t_to - t_from).abs().max(1.0);
        while t < t_to {
            let h = self.h_prop.min(t_to - t).min(self.config.max_step);
            if h < h_min_floor {
                return Err(Error::IntegrationFailure {
                    t_last: t,
                    reason: "step size underflow".to_string(),
                });
            }
            let (y_new, err) = dopri5_step(rhs, t, y, h);
            let err_norm = scaled_error_norm(y, &y_new, &err, &self.config);
            if err_norm.is_finite() && err_norm <= 1.0 {
                t += h;
                *y = y_new;
                // Grow cautiously; never by more than 10x nor above max_step.
                let factor = if err_norm == 0.0 {
                    10.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 10.0)
                };
                self.h_prop = (h * factor).min(self.config.max_step);
            } else {
                let factor = if err_norm.is_finite() {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                self.h_prop = h * factor;
            }
        }
        Ok(())
    }
}

fn advance_interval<F>(
    rhs: &F,
    y: &mut Vec<f64>,
    t_from: f64,
    t_to: f64,
    config: &IntegratorConfig,
    stepper: &mut Stepper,
) -> Result<()>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    match stepper {
        Stepper::Rk4 => {
            let span = t_to - t_from;
            let n_sub = (span / config.max_step).ceil().max(1.0) as usize;
            let h = span / n_sub as f64;
            let mut t = t_from;
            for _ in 0..n_sub {
                *y = rk4_step(rhs, t, y, h);
                t += h;
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationFailure {
                    t_last: t_from,
                    reason: "state became non-finite".to_string(),
                });
            }
            Ok(())
        }
        Stepper::Dopri5(driver) => driver.advance(rhs, y, t_from, t_to),
    }
}

fn scaled_error_norm(y_old: &[f64], y_new: &[f64], err: &[f64], config: &IntegratorConfig) -> f64 {
    let n = y_old.len();
    let mut acc = 0.0;
    for i in 0..n {
        let scale = config.atol + config.rtol * y_old[i].abs().max(y_new[i].abs());
        let r = err[i] / scale;
        acc += r * r;
    }
    (acc / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -y[0];
    }

    #[test]
    fn exponential_decay_matches_analytic() {
        let cfg = IntegratorConfig::dopri5(1e-8, 1e-10);
        let ts = integrate_ode(decay, &[1.0], (0.0, 1.0), &cfg, 0.5).unwrap();
        assert_eq!(ts.n_samples(), 3);
        let y1 = ts.values[[2, 0]];
        assert!((y1 - (-1.0f64).exp()).abs() < 1e-6, "y(1) = {y1}");
    }

    #[test]
    fn zero_rhs_is_constant() {
        let cfg = IntegratorConfig::rk4(0.01);
        let ts = integrate_ode(|_, _, dy| dy.fill(0.0), &[3.5, -2.0], (0.0, 1.0), &cfg, 0.1).unwrap();
        for i in 0..ts.n_samples() {
            assert_eq!(ts.values[[i, 0]], 3.5);
            assert_eq!(ts.values[[i, 1]], -2.0);
        }
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        // One unit of du/dt = -u at step h vs h/2.
        let exact = (-1.0f64).exp();
        let err_at = |h: f64| {
            let mut y = vec![1.0];
            let n = (1.0 / h).round() as usize;
            for k in 0..n {
                y = rk4_step(&decay, k as f64 * h, &y, h);
            }
            (y[0] - exact).abs()
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        let order = (e1 / e2).log2();
        assert!(order >= 3.8, "observed order {order}");
    }

    #[test]
    fn dopri5_fifth_order_convergence() {
        let exact = (-1.0f64).exp();
        let err_at = |h: f64| {
            let mut y = vec![1.0];
            let n = (1.0 / h).round() as usize;
            for k in 0..n {
                let (y_new, _) = dopri5_step(&decay, k as f64 * h, &y, h);
                y = y_new;
            }
            (y[0] - exact).abs()
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        let order = (e1 / e2).log2();
        assert!(order >= 4.5, "observed order {order}");
    }

    #[test]
    fn stiff_blowup_reports_failure_time() {
        // du/dt = u^2 from u(0)=1 blows up at t = 1.
        let res = integrate_ode(
            |_, y, dy| dy[0] = y[0] * y[0],
            &[1.0],
            (0.0, 2.0),
            &IntegratorConfig::dopri5(1e-8, 1e-10),
            0.5,
        );
        match res {
            Err(Error::IntegrationFailure { t_last, .. }) => {
                assert!(t_last <= 1.01, "failure reported at t = {t_last}");
            }
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_spans_and_tolerances() {
        let cfg = IntegratorConfig::dopri5(1e-8, 1e-10);
        assert!(integrate_ode(decay, &[1.0], (1.0, 0.0), &cfg, 0.1).is_err());
        assert!(integrate_ode(decay, &[1.0], (0.0, 1.0), &cfg, -0.1).is_err());
        let bad = IntegratorConfig { rtol: -1.0, ..cfg };
        assert!(integrate_ode(decay, &[1.0], (0.0, 1.0), &bad, 0.1).is_err());
    }
}
