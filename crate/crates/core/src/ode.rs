//! Explicit Runge-Kutta integrators over flat complex state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedRk4,
    #[default]
    AdaptiveRk45,
}

/// Integrator settings. Times in µs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4, initial step for the adaptive method.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Observer is called every `sample_stride` accepted steps.
    pub sample_stride: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveRk45,
            dt: 5e-5,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            sample_stride: 2000,
            min_dt: 1e-12,
            max_dt: 1.0,
            max_steps: 200_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_rk4(dt: f64) -> Self {
        Self {
            method: Method::FixedRk4,
            dt,
            ..Self::default()
        }
    }

    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.dt, self.min_dt, self.max_dt];
        if positive.iter().any(|v| !(*v > 0.0)) || self.sample_stride == 0 {
            return Err(Error::InvalidParameter("integrator steps and stride must be positive".into()));
        }
        if self.method == Method::AdaptiveRk45 && !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub last_dt: f64,
}

// Dormand-Prince 5(4)
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` in place.
///
/// `observer(t, y)` runs at `t0`, after every `sample_stride` accepted
/// steps and at `t1`; an error from it aborts the integration.
pub fn integrate<F, O>(
    y: &mut [C64],
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
    mut rhs: F,
    mut observer: O,
) -> Result<StepStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]) -> Result<()>,
{
    config.validate()?;
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid time span [{t0}, {t1}]")));
    }
    observer(t0, y)?;
    if t1 == t0 {
        return Ok(StepStats::default());
    }
    let stats = match config.method {
        Method::FixedRk4 => rk4(y, t0, t1, config, &mut rhs, &mut observer)?,
        Method::AdaptiveRk45 => dopri5(y, t0, t1, config, &mut rhs, &mut observer)?,
    };
    Ok(stats)
}

fn rk4<F, O>(y: &mut [C64], t0: f64, t1: f64, config: &IntegratorConfig, rhs: &mut F, observer: &mut O) -> Result<StepStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let steps = ((t1 - t0) / config.dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let zero = C64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut stats = StepStats { last_dt: h, ..Default::default() };
    for step in 0..steps {
        let t = t0 + h * step as f64;
        rhs(t, y, &mut k1);
        combine(&mut tmp, y, h, &[(0.5, &k1)]);
        rhs(t + 0.5 * h, &tmp, &mut k2);
        combine(&mut tmp, y, h, &[(0.5, &k2)]);
        rhs(t + 0.5 * h, &tmp, &mut k3);
        combine(&mut tmp, y, h, &[(1.0, &k3)]);
        rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        stats.accepted += 1;
        stats.rhs_evals += 4;
        let t_next = if step + 1 == steps { t1 } else { t + h };
        if step + 1 == steps || stats.accepted % config.sample_stride == 0 {
            observer(t_next, y)?;
        }
    }
    Ok(stats)
}

fn dopri5<F, O>(y: &mut [C64], t0: f64, t1: f64, config: &IntegratorConfig, rhs: &mut F, observer: &mut O) -> Result<StepStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let zero = C64::new(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut stats = StepStats::default();

    let mut t = t0;
    let mut h = config.dt.min(config.max_dt).min(t1 - t0);
    rhs(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    while t < t1 {
        if stats.accepted + stats.rejected >= config.max_steps {
            return Err(Error::Diverged {
                t,
                reason: format!("exceeded {} integration steps", config.max_steps),
            });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        {
            let (k1, rest) = k.split_at_mut(1);
            let (k2, rest) = rest.split_at_mut(1);
            let (k3, rest) = rest.split_at_mut(1);
            let (k4, rest) = rest.split_at_mut(1);
            let (k5, rest) = rest.split_at_mut(1);
            let (k6, k7) = rest.split_at_mut(1);
            let (k1, k2, k3, k4, k5, k6, k7) =
                (&k1[0], &mut k2[0], &mut k3[0], &mut k4[0], &mut k5[0], &mut k6[0], &mut k7[0]);

            combine(&mut tmp, y, h, &[(A21, k1)]);
            rhs(t + C2 * h, &tmp, k2);
            combine(&mut tmp, y, h, &[(A31, k1), (A32, k2)]);
            rhs(t + C3 * h, &tmp, k3);
            combine(&mut tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
            rhs(t + C4 * h, &tmp, k4);
            combine(&mut tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            rhs(t + C5 * h, &tmp, k5);
            combine(&mut tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
            rhs(t + h, &tmp, k6);
            combine(&mut y_new, y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
            rhs(t + h, &y_new, k7);
            stats.rhs_evals += 6;

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                let scale = config.abs_tol + config.rel_tol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / scale).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Diverged {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                stats.last_dt = h;
                if t >= t1 || stats.accepted % config.sample_stride == 0 {
                    observer(t, y)?;
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * factor).min(config.max_dt);
            } else {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < config.min_dt {
                    return Err(Error::Stiffness { t, dt: h });
                }
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotate(omega: f64) -> impl FnMut(f64, &[C64], &mut [C64]) {
        move |_t, y, out| {
            for (o, v) in out.iter_mut().zip(y) {
                *o = C64::new(0.0, -omega) * v;
            }
        }
    }

    #[test]
    fn adaptive_matches_exact_rotation() {
        let mut y = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.5)];
        let cfg = IntegratorConfig::adaptive(1e-10, 1e-12);
        integrate(&mut y, 0.0, 3.0, &cfg, rotate(2.0), |_, _| Ok(())).unwrap();
        let exact = C64::from_polar(1.0, -6.0);
        assert!((y[0] - exact).norm() < 1e-8);
        assert!((y[1] - exact * C64::new(0.0, 0.5)).norm() < 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |dt: f64| {
            let mut y = vec![C64::new(1.0, 0.0)];
            integrate(&mut y, 0.0, 2.0, &IntegratorConfig::fixed_rk4(dt), rotate(3.0), |_, _| Ok(())).unwrap();
            (y[0] - C64::from_polar(1.0, -6.0)).norm()
        };
        let ratio = run(0.02) / run(0.01);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn observer_sees_endpoints_and_stride() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut times = Vec::new();
        let cfg = IntegratorConfig::fixed_rk4(0.1).with_stride(3);
        integrate(&mut y, 0.0, 1.0, &cfg, rotate(1.0), |t, _| {
            times.push(t);
            Ok(())
        })
        .unwrap();
        assert_eq!(times.first(), Some(&0.0));
        assert_eq!(times.last(), Some(&1.0));
        assert_eq!(times.len(), 1 + 3 + 1);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_span_is_identity() {
        let mut y = vec![C64::new(0.3, 0.4)];
        let stats = integrate(&mut y, 2.0, 2.0, &IntegratorConfig::default(), rotate(5.0), |_, _| Ok(())).unwrap();
        assert_eq!(y[0], C64::new(0.3, 0.4));
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn underflow_reports_stiffness() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let cfg = IntegratorConfig { min_dt: 1e-3, ..IntegratorConfig::adaptive(1e-12, 1e-14) };
        let err = integrate(&mut y, 0.0, 1.0, &cfg, rotate(1e6), |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::Stiffness { .. }));
    }
}
