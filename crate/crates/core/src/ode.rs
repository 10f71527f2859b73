//! Adaptive scalar ODE integration (Cash-Karp 4(5)) for the log-Laplace
//! equation; tolerance is far below Monte Carlo noise so oracle error is
//! negligible in acceptance tests.

use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MAX_STEPS: usize = 2_000_000;

/// Integrate u' = f(u) from u(0) = u0 over [0, t] with absolute/relative
/// tolerance `tol`.
pub fn integrate_autonomous(f: impl Fn(f64) -> f64, u0: f64, t: f64, tol: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "integration time must be >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(u0);
    }
    let mut u = u0;
    let mut s = 0.0;
    let mut h = (t / 16.0).min(0.1).max(1e-8);
    for _ in 0..MAX_STEPS {
        if s + h > t {
            h = t - s;
        }
        let (u_next, err) = cash_karp_step(&f, u, h);
        let scale = tol * (1.0 + u.abs().max(u_next.abs()));
        if err <= scale || h <= 1e-14 {
            u = u_next;
            s += h;
            if s >= t - 1e-15 {
                return Ok(u);
            }
        }
        let ratio = if err > 0.0 { scale / err } else { 10.0 };
        h = (h * SAFETY * ratio.powf(0.2))
            .clamp(h * 0.1, h * 5.0)
            .min(t - s + 1e-30);
        if !u.is_finite() {
            return Err(Error::Numerical("ODE state diverged".into()));
        }
    }
    Err(Error::Numerical("ODE step limit exceeded".into()))
}

fn cash_karp_step(f: &impl Fn(f64) -> f64, u: f64, h: f64) -> (f64, f64) {
    let k1 = f(u);
    let k2 = f(u + h * (0.2 * k1));
    let k3 = f(u + h * (0.075 * k1 + 0.225 * k2));
    let k4 = f(u + h * (0.3 * k1 - 0.9 * k2 + 1.2 * k3));
    let k5 = f(u + h * (-11.0 / 54.0 * k1 + 2.5 * k2 - 70.0 / 27.0 * k3 + 35.0 / 27.0 * k4));
    let k6 = f(u + h
        * (1631.0 / 55296.0 * k1
            + 175.0 / 512.0 * k2
            + 575.0 / 13824.0 * k3
            + 44275.0 / 110592.0 * k4
            + 253.0 / 4096.0 * k5));
    let u5 =
        u + h * (37.0 / 378.0 * k1 + 250.0 / 621.0 * k3 + 125.0 / 594.0 * k4 + 512.0 / 1771.0 * k6);
    let u4 = u + h
        * (2825.0 / 27648.0 * k1
            + 18575.0 / 48384.0 * k3
            + 13525.0 / 55296.0 * k4
            + 277.0 / 14336.0 * k5
            + 0.25 * k6);
    (u5, (u5 - u4).abs())
}
