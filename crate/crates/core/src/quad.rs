//! Gauss-Hermite / Gauss-Legendre rules and integration against the
//! reference measures of the two OU motions.
//!
//! All spatial integrals reduce, after an affine substitution, to the
//! standard Hermite weight `e^{-|z|^2}`, tensorized over axes. Integrals
//! against the outward motion's infinite reference measure are only
//! accepted in factored form `g(x) * exp(-r|x-x0|^2)` with `r` strictly
//! dominating the measure's growth rate; anything else is refused rather
//! than silently diverging.

use crate::error::{Error, Result};
use crate::spatial::{MotionKind, SpatialMotion};

/// Nodes and weights for `∫ f(x) e^{-x^2} dx` (physicists' Hermite).
///
/// Newton iteration on the normalized three-term recurrence; a rule of
/// order n integrates polynomials of degree 2n-1 exactly.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "hermite order must be at least 2");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = 0.751_125_544_464_942_8_f64; // pi^{-1/4}
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..(n + 1) / 2 {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Nodes and weights for `∫_{-1}^{1} f(x) dx`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "legendre order must be at least 2");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Quadrature configuration shared by the analytic oracles.
#[derive(Clone, Debug)]
pub struct QuadratureSpec {
    /// Gauss-Hermite order per axis.
    pub hermite_order: usize,
    /// Number of panels for composite time integration.
    pub time_panels: usize,
    /// Gauss-Legendre order per panel.
    pub time_order: usize,
    /// Target tolerance; also controls resolvent truncation horizons.
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            hermite_order: 64,
            time_panels: 24,
            time_order: 16,
            tol: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hermite_order < 2 || self.time_order < 2 || self.time_panels == 0 {
            return Err(Error::Config(
                "quadrature orders must be >= 2 with at least one panel".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(
                "quadrature tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Precomputed node tables; one per worker, never shared mutably.
pub struct QuadCtx {
    pub spec: QuadratureSpec,
    pub gh_nodes: Vec<f64>,
    pub gh_weights: Vec<f64>,
    pub gl_nodes: Vec<f64>,
    pub gl_weights: Vec<f64>,
}

impl QuadCtx {
    pub fn new(spec: &QuadratureSpec) -> Self {
        let (gh_nodes, gh_weights) = gauss_hermite(spec.hermite_order);
        let (gl_nodes, gl_weights) = gauss_legendre(spec.time_order);
        QuadCtx {
            spec: spec.clone(),
            gh_nodes,
            gh_weights,
            gl_nodes,
            gl_weights,
        }
    }

    /// Tensorized Hermite sum `Σ_K W_K f(scale·Z_K + shift)` over d axes.
    ///
    /// `shift` has length d; the node vector is built in place. The caller
    /// divides by `π^{d/2}` when a probability expectation is intended.
    pub fn hermite_sum_d(
        &self,
        shift: &[f64],
        scale: f64,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> f64 {
        let d = shift.len();
        let n = self.gh_nodes.len();
        let mut idx = vec![0usize; d];
        let mut point = vec![0.0; d];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for (axis, &i) in idx.iter().enumerate() {
                w *= self.gh_weights[i];
                point[axis] = shift[axis] + scale * self.gh_nodes[i];
            }
            total += w * f(&point);
            // odometer over the multi-index
            let mut axis = 0;
            loop {
                if axis == d {
                    return total;
                }
                idx[axis] += 1;
                if idx[axis] < n {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }

    /// Expectation `E[f(Z)]` for `Z ~ N(mean, var·I_d)`.
    pub fn gaussian_expect(&self, mean: &[f64], var: f64, f: impl FnMut(&[f64]) -> f64) -> f64 {
        let d = mean.len();
        let scale = (2.0 * var).sqrt();
        let norm = std::f64::consts::PI.powi(d as i32).sqrt();
        self.hermite_sum_d(mean, scale, f) / norm
    }

    /// Composite Gauss-Legendre integral of `f` over `[a, b]`.
    ///
    /// With `refine_toward_end` the panel widths shrink geometrically
    /// toward `b`, where the variance-formula integrand varies fastest.
    pub fn time_integral(
        &self,
        a: f64,
        b: f64,
        refine_toward_end: bool,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        if b <= a {
            return 0.0;
        }
        let p = self.spec.time_panels;
        let mut edges = Vec::with_capacity(p + 1);
        if refine_toward_end {
            // edges b - (b-a)·rho^k, forced to start exactly at a
            let rho = 0.65f64;
            edges.push(a);
            for k in (1..p).rev() {
                edges.push(b - (b - a) * rho.powi(k as i32));
            }
            edges.push(b);
        } else {
            for k in 0..=p {
                edges.push(a + (b - a) * k as f64 / p as f64);
            }
        }
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut panel = 0.0;
            for (z, wt) in self.gl_nodes.iter().zip(&self.gl_weights) {
                panel += wt * f(mid + half * z);
            }
            total += panel * half;
        }
        total
    }
}

/// A declared factor `exp(-rate·|x-center|^2)` dominating an integrand.
#[derive(Clone, Debug)]
pub struct GaussianEnvelope {
    pub rate: f64,
    pub center: Vec<f64>,
}

impl GaussianEnvelope {
    pub fn centered(rate: f64, d: usize) -> Self {
        GaussianEnvelope {
            rate,
            center: vec![0.0; d],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.log_eval(x).exp()
    }

    pub fn log_eval(&self, x: &[f64]) -> f64 {
        let s: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        -self.rate * s
    }

    /// Envelope of a product of two Gaussian-dominated factors: rates add,
    /// centers combine rate-weighted. The product of the factors is bounded
    /// by a constant times the combined envelope.
    pub fn combine(&self, other: &GaussianEnvelope) -> GaussianEnvelope {
        let rate = self.rate + other.rate;
        let center = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (self.rate * a + other.rate * b) / rate)
            .collect();
        GaussianEnvelope { rate, center }
    }
}

/// `∫ g(x) · exp(-r|x-x0|^2) m(dx)` for the motion's reference measure m.
///
/// For the inward motion the envelope may be omitted (m itself is a
/// Gaussian probability measure). For the outward motion the envelope is
/// mandatory and must satisfy `rate > c`; otherwise the integral against
/// `e^{c|x|^2}dx` may diverge and the call is refused.
pub fn integrate_m(
    ctx: &QuadCtx,
    motion: &SpatialMotion,
    envelope: Option<&GaussianEnvelope>,
    g: impl FnMut(&[f64]) -> f64,
) -> Result<f64> {
    let d = motion.dim();
    let c = motion.drift_coefficient();
    let (r, x0): (f64, Vec<f64>) = match envelope {
        Some(env) => {
            if env.center.len() != d {
                return Err(Error::Config("envelope center dimension mismatch".into()));
            }
            (env.rate, env.center.clone())
        }
        None => (0.0, vec![0.0; d]),
    };
    let sign = match motion.kind() {
        MotionKind::InwardOu => 1.0,
        MotionKind::OutwardOu => -1.0,
    };
    if motion.kind() == MotionKind::OutwardOu && !(r > c * (1.0 + 1e-12)) {
        return Err(Error::Config(format!(
            "integrand against the outward reference measure needs a dominating \
             Gaussian envelope with rate > c = {c}, got rate {r}"
        )));
    }
    // total exponent: -sign·c|x|^2 - r|x-x0|^2 = -(r + sign·c)|x - xbar|^2 - delta
    let gamma = r + sign * c;
    let x0n2: f64 = x0.iter().map(|v| v * v).sum();
    let xbar: Vec<f64> = x0.iter().map(|v| v * r / gamma).collect();
    let delta = x0n2 * (r * sign * c / gamma);
    let prefactor = (c / std::f64::consts::PI)
        .powi(d as i32)
        .sqrt()
        .powi(sign as i32)
        * (-delta).exp()
        / gamma.powi(d as i32).sqrt();
    let sum = ctx.hermite_sum_d(&xbar, 1.0 / gamma.sqrt(), g);
    Ok(prefactor * sum)
}
