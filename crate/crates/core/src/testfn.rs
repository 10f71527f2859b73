//! Test functions for the scaling-limit experiments: members of the closed
//! field family plus tabulated resolvent functions, carrying the flags the
//! limit theorems require (boundedness relative to φ0, continuity at
//! infinity, null discontinuity set).

use crate::error::{Error, Result};
use crate::field::Field;

/// Natural cubic spline on a uniform grid, clamped to its end values
/// outside the grid.
#[derive(Clone, Debug)]
pub struct CubicSpline1d {
    x0: f64,
    dx: f64,
    ys: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline1d {
    pub fn fit(x0: f64, dx: f64, ys: Vec<f64>) -> Self {
        let n = ys.len();
        assert!(n >= 3, "spline needs at least 3 knots");
        // natural spline: tridiagonal solve for second derivatives
        let mut m = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            diag[i] = 2.0 * dx / 3.0;
            rhs[i] = (ys[i + 1] - 2.0 * ys[i] + ys[i - 1]) / dx;
        }
        // forward sweep (off-diagonals are dx/6)
        let off = dx / 6.0;
        for i in 2..n - 1 {
            let w = off / diag[i - 1];
            diag[i] -= w * off;
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            let upper = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - off * upper) / diag[i];
        }
        CubicSpline1d { x0, dx, ys, m }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.dx * (self.ys.len() - 1) as f64)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.ys.len();
        let (lo, hi) = self.domain();
        let xc = x.clamp(lo, hi);
        let mut i = ((xc - self.x0) / self.dx) as usize;
        if i >= n - 1 {
            i = n - 2;
        }
        let xa = self.x0 + self.dx * i as f64;
        let t = (xc - xa) / self.dx;
        let h2 = self.dx * self.dx;
        let a = 1.0 - t;
        a * self.ys[i]
            + t * self.ys[i + 1]
            + h2 / 6.0 * ((a * a * a - a) * self.m[i] + (t * t * t - t) * self.m[i + 1])
    }
}

#[derive(Clone, Debug)]
pub enum TestKind {
    Analytic(Field),
    /// One-dimensional tabulated function (resolvent observables).
    Spline(CubicSpline1d),
}

/// A test function together with the hypotheses it satisfies.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub name: String,
    pub kind: TestKind,
    /// Continuous and vanishing at infinity.
    pub c0: bool,
    /// A constant c with |f| ≤ c·φ0, when declared.
    pub phi0_domination: Option<f64>,
    /// Discontinuity set has zero m-measure.
    pub disc_zero_measure: bool,
}

impl TestFunction {
    pub fn from_field(name: impl Into<String>, field: Field) -> Self {
        let c0 = field.is_c0();
        TestFunction {
            name: name.into(),
            c0,
            phi0_domination: None,
            disc_zero_measure: field.discontinuity_zero_measure(),
            kind: TestKind::Analytic(field),
        }
    }

    pub fn with_phi0_domination(mut self, c: f64) -> Self {
        self.phi0_domination = Some(c);
        self
    }

    pub fn constant(v: f64) -> Self {
        Self::from_field(format!("const[{v}]"), Field::constant(v))
    }

    pub fn gaussian(amp: f64, rate: f64, center: Vec<f64>) -> Self {
        Self::from_field(
            format!("gauss[{amp}*exp(-{rate}|x-c|^2)]"),
            Field::gaussian(amp, rate, center),
        )
    }

    pub fn indicator_interval(lo: f64, hi: f64) -> Self {
        let center = 0.5 * (lo + hi);
        let radius = 0.5 * (hi - lo);
        Self::from_field(
            format!("ind[{lo},{hi}]"),
            Field::ball_indicator(vec![center], radius),
        )
    }

    pub fn coordinate(j: usize, d: usize) -> Self {
        Self::from_field(format!("coord[{j}]"), Field::coordinate(j, d))
    }

    pub fn from_spline(name: impl Into<String>, spline: CubicSpline1d, c0: bool) -> Self {
        TestFunction {
            name: name.into(),
            kind: TestKind::Spline(spline),
            c0,
            phi0_domination: None,
            disc_zero_measure: true,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TestKind::Analytic(f) => f.eval(x),
            TestKind::Spline(s) => s.eval(x[0]),
        }
    }

    /// Underlying field, when analytic.
    pub fn field(&self) -> Option<&Field> {
        match &self.kind {
            TestKind::Analytic(f) => Some(f),
            TestKind::Spline(_) => None,
        }
    }

    /// Scaled-interval view for closed-form Gaussian integrals.
    pub fn as_scaled_interval(&self) -> Option<(f64, f64, f64)> {
        self.field().and_then(Field::as_scaled_interval)
    }

    pub fn require_c0(&self) -> Result<()> {
        if self.c0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "test function '{}' is not continuous-vanishing-at-infinity",
                self.name
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_smooth_function() {
        let n = 257;
        let (lo, hi) = (-4.0f64, 4.0f64);
        let dx = (hi - lo) / (n - 1) as f64;
        let ys: Vec<f64> = (0..n)
            .map(|i| ((lo + i as f64 * dx) as f64).sin())
            .collect();
        let s = CubicSpline1d::fit(lo, dx, ys);
        // interior accuracy (the natural boundary condition costs accuracy
        // in the outermost panels, which users pad away)
        for k in 0..100 {
            let x = (lo + 0.5) + (hi - lo - 1.0) * (k as f64 + 0.3) / 100.0;
            assert!((s.eval(x) - x.sin()).abs() < 2e-6, "x = {x}");
        }
        // clamped outside the domain
        assert_eq!(s.eval(hi + 5.0), s.eval(hi));
    }

    #[test]
    fn flags_follow_field_family() {
        assert!(TestFunction::gaussian(1.0, 1.0, vec![0.0]).c0);
        assert!(!TestFunction::constant(1.0).c0);
        let ind = TestFunction::indicator_interval(-1.0, 1.0);
        assert!(!ind.c0);
        assert!(ind.disc_zero_measure);
        assert_eq!(ind.as_scaled_interval(), Some((-1.0, 1.0, 1.0)));
        assert!(ind.require_c0().is_err());
        assert_eq!(ind.eval(&[0.3]), 1.0);
        assert_eq!(ind.eval(&[1.2]), 0.0);
    }
}
