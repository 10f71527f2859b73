//! The closed family of scalar fields used for model coefficients and
//! test functions: constants, monomials of total degree ≤ 4, Gaussians,
//! ball indicators, and sums/products of these.
//!
//! Keeping the family closed makes every oracle integral Gauss-Hermite
//! exact or spectrally accurate, and makes boundedness and decay-rate
//! queries decidable symbolically.

use crate::error::{Error, Result};

pub const MAX_POLY_DEGREE: u32 = 4;

#[derive(Clone, Debug)]
pub enum Field {
    Const(f64),
    /// coef · Π_j x_j^{exps[j]}; total degree at most 4.
    Monomial {
        coef: f64,
        exps: Vec<u32>,
    },
    /// amp · exp(-rate·|x-center|²); `rate` may be negative, which encodes
    /// the growing factors appearing in ground-state transforms.
    Gaussian {
        amp: f64,
        rate: f64,
        center: Vec<f64>,
    },
    /// Indicator of the closed ball |x-center| ≤ radius.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Sum(Vec<Field>),
    Product(Vec<Field>),
}

impl Field {
    pub fn constant(v: f64) -> Field {
        Field::Const(v)
    }

    /// The coordinate function x_j.
    pub fn coordinate(j: usize, d: usize) -> Field {
        let mut exps = vec![0; d];
        exps[j] = 1;
        Field::Monomial { coef: 1.0, exps }
    }

    pub fn gaussian(amp: f64, rate: f64, center: Vec<f64>) -> Field {
        Field::Gaussian { amp, rate, center }
    }

    pub fn ball_indicator(center: Vec<f64>, radius: f64) -> Field {
        Field::Ball { center, radius }
    }

    pub fn scaled(self, k: f64) -> Field {
        Field::Product(vec![Field::Const(k), self])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Field::Const(v) => *v,
            Field::Monomial { coef, exps } => {
                let mut v = *coef;
                for (xi, &e) in x.iter().zip(exps) {
                    for _ in 0..e {
                        v *= xi;
                    }
                }
                v
            }
            Field::Gaussian { amp, rate, center } => {
                let s: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                amp * (-rate * s).exp()
            }
            Field::Ball { center, radius } => {
                let s: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                if s.sqrt() <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Field::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            Field::Product(factors) => factors.iter().map(|f| f.eval(x)).product(),
        }
    }

    pub fn is_continuous(&self) -> bool {
        match self {
            Field::Ball { .. } => false,
            Field::Sum(ts) | Field::Product(ts) => ts.iter().all(Field::is_continuous),
            _ => true,
        }
    }

    /// Discontinuity set has zero Lebesgue (hence zero m) measure. True for
    /// the whole family: the only discontinuities are spheres.
    pub fn discontinuity_zero_measure(&self) -> bool {
        true
    }

    /// Net Gaussian decay rate at infinity: `+∞` for compactly supported
    /// members, 0 for polynomials/constants, the (possibly negative) sum of
    /// rates for products. For sums, the slowest-decaying term.
    pub fn decay_rate(&self) -> f64 {
        match self {
            Field::Const(v) => {
                if *v == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Field::Monomial { coef, .. } => {
                if *coef == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Field::Gaussian { rate, .. } => *rate,
            Field::Ball { .. } => f64::INFINITY,
            Field::Sum(ts) => ts
                .iter()
                .map(Field::decay_rate)
                .fold(f64::INFINITY, f64::min),
            Field::Product(fs) => {
                let mut rate = 0.0;
                for f in fs {
                    let r = f.decay_rate();
                    if r == f64::INFINITY {
                        return f64::INFINITY;
                    }
                    rate += r;
                }
                rate
            }
        }
    }

    /// Total polynomial degree (max over sum terms, sum over product factors).
    pub fn degree(&self) -> u32 {
        match self {
            Field::Const(_) | Field::Gaussian { .. } | Field::Ball { .. } => 0,
            Field::Monomial { exps, .. } => exps.iter().sum(),
            Field::Sum(ts) => ts.iter().map(Field::degree).max().unwrap_or(0),
            Field::Product(fs) => fs.iter().map(Field::degree).sum(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Field::Sum(ts) => ts.iter().all(Field::is_bounded),
            _ => {
                let r = self.decay_rate();
                r > 0.0 || (r == 0.0 && self.degree() == 0)
            }
        }
    }

    /// Continuous and vanishing at infinity.
    pub fn is_c0(&self) -> bool {
        if !self.is_continuous() {
            return false;
        }
        match self {
            Field::Const(v) => *v == 0.0,
            Field::Monomial { coef, .. } => *coef == 0.0,
            Field::Gaussian { rate, amp, .. } => *amp == 0.0 || *rate > 0.0,
            Field::Ball { .. } => false,
            Field::Sum(ts) => ts.iter().all(Field::is_c0),
            // a product vanishes at infinity if it decays overall and every
            // factor alone is at worst polynomially growing
            Field::Product(_) => self.decay_rate() > 0.0,
        }
    }

    /// A sup-norm bound when one is symbolically available.
    ///
    /// Handles the cases arising from the closed family: anything with
    /// positive decay and polynomial part, pure constants, and compact
    /// indicators. Returns None when the member is unbounded or the bound
    /// is not tractable.
    pub fn sup_norm_bound(&self) -> Option<f64> {
        match self {
            Field::Const(v) => Some(v.abs()),
            Field::Monomial { coef, exps } => {
                if exps.iter().all(|&e| e == 0) || *coef == 0.0 {
                    Some(coef.abs())
                } else {
                    None
                }
            }
            Field::Gaussian { amp, rate, .. } => {
                if *rate >= 0.0 {
                    Some(amp.abs())
                } else {
                    None
                }
            }
            Field::Ball { .. } => Some(1.0),
            Field::Sum(ts) => {
                let mut total = 0.0;
                for t in ts {
                    total += t.sup_norm_bound()?;
                }
                Some(total)
            }
            Field::Product(fs) => {
                let rate = self.decay_rate();
                let deg = self.degree();
                if rate < 0.0 || (rate == 0.0 && deg > 0) {
                    return None;
                }
                if rate == f64::INFINITY {
                    let mut total = 1.0;
                    for f in fs {
                        total *= f.sup_norm_bound()?;
                    }
                    return Some(total);
                }
                // collect the Gaussian exponent Σ r_i|x-c_i|² = R|x-x̄|² - D
                let mut amp = 1.0;
                let mut lin: Vec<f64> = Vec::new();
                let mut quad_const = 0.0;
                let mut centers_zero = true;
                for f in fs {
                    match f {
                        Field::Gaussian {
                            amp: a,
                            rate: r,
                            center,
                        } => {
                            amp *= a.abs();
                            if lin.is_empty() {
                                lin = vec![0.0; center.len()];
                            }
                            for (l, c) in lin.iter_mut().zip(center) {
                                *l += r * c;
                                if *c != 0.0 {
                                    centers_zero = false;
                                }
                            }
                            quad_const += r * center.iter().map(|c| c * c).sum::<f64>();
                        }
                        Field::Monomial { coef, .. } => amp *= coef.abs(),
                        Field::Const(v) => amp *= v.abs(),
                        _ => return None,
                    }
                }
                let lin2: f64 = lin.iter().map(|l| l * l).sum();
                if rate == 0.0 {
                    // bounded only when the linear exponent part cancels
                    if lin2 > 0.0 {
                        return None;
                    }
                    return Some(amp * (-quad_const).exp());
                }
                let exp_max = (lin2 / rate - quad_const).exp();
                if deg == 0 {
                    Some(amp * exp_max)
                } else if centers_zero {
                    // |x|^k e^{-R|x|²} peaks at (k/(2Re))^{k/2}
                    let k = deg as f64;
                    Some(amp * (k / (2.0 * rate * std::f64::consts::E)).powf(k / 2.0))
                } else {
                    None
                }
            }
        }
    }

    /// For a one-dimensional indicator (possibly scaled by a positive
    /// constant), the interval and scale; enables closed-form Gaussian
    /// integrals instead of quadrature across a discontinuity.
    pub fn as_scaled_interval(&self) -> Option<(f64, f64, f64)> {
        match self {
            Field::Ball { center, radius } if center.len() == 1 => {
                Some((center[0] - radius, center[0] + radius, 1.0))
            }
            Field::Product(fs) => {
                let mut scale = 1.0;
                let mut interval = None;
                for f in fs {
                    match f {
                        Field::Const(v) => scale *= v,
                        Field::Ball { center, radius } if center.len() == 1 => {
                            if interval.is_some() {
                                return None;
                            }
                            interval = Some((center[0] - radius, center[0] + radius));
                        }
                        _ => return None,
                    }
                }
                interval.map(|(lo, hi)| (lo, hi, scale))
            }
            _ => None,
        }
    }

    /// Enforce the family's degree cap; called by model validation.
    pub fn check_degree(&self) -> Result<()> {
        match self {
            Field::Monomial { exps, .. } => {
                let deg: u32 = exps.iter().sum();
                if deg > MAX_POLY_DEGREE {
                    return Err(Error::Config(format!(
                        "monomial degree {deg} exceeds the family cap {MAX_POLY_DEGREE}"
                    )));
                }
            }
            Field::Sum(ts) | Field::Product(ts) => {
                for t in ts {
                    t.check_degree()?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}
