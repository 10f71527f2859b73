//! Quadrature and closed-form oracles for the expectations the theory
//! prescribes: the mean (Feynman-Kac) semigroup, the second-moment
//! formula, resolvents, the ground-state-transformed semigroup, the
//! log-Laplace ODE and extinction probabilities.
//!
//! Everything here is deterministic; the particle engine is validated
//! against these values.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::model::ModelSpec;
use crate::ode;
use crate::quad::{GaussianEnvelope, QuadCtx};
use crate::spatial::{MotionKind, SpatialMotion};
use crate::spectral::SpectralData;
use crate::stats;
use crate::testfn::{TestFunction, TestKind};

/// The constant Feynman-Kac rate α = β·a, required by the analytic layer.
/// Spatially varying rates are supported only through the ground-state
/// transform, which produces a constant-rate model.
pub fn const_alpha(model: &ModelSpec) -> Result<f64> {
    match (&model.branching.beta, &model.branching.a) {
        (Field::Const(beta), Field::Const(a)) => Ok(beta * a),
        _ => Err(Error::UnsupportedModel(
            "oracles need constant β·a; reduce variable-rate models via the \
             ground-state transform first"
                .into(),
        )),
    }
}

/// Expectation E_x[g(ξ_t)] for an analytic field g, completing the square
/// with g's dominant Gaussian factor so that narrow integrands under
/// wide transition laws are still resolved to machine precision.
pub fn expect_field(
    ctx: &QuadCtx,
    motion: &SpatialMotion,
    t: f64,
    x: &[f64],
    g: &Field,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "expectation lag must be > 0, got {t}"
        )));
    }
    let f = motion.mean_factor(t);
    let var = motion.transition_variance(t);
    let mean: Vec<f64> = x.iter().map(|&v| v * f).collect();
    Ok(expect_gaussian_field(ctx, &mean, var, g))
}

fn expect_gaussian_field(ctx: &QuadCtx, mean: &[f64], var: f64, g: &Field) -> f64 {
    let d = mean.len();
    match dominant_gaussian(g) {
        Some((q, y0)) if q > 0.0 => {
            let a = 1.0 / (2.0 * var);
            let r = a + q;
            let mut delta = 0.0;
            let mut xbar = vec![0.0; d];
            for i in 0..d {
                xbar[i] = (a * mean[i] + q * y0[i]) / r;
                delta += a * mean[i] * mean[i] + q * y0[i] * y0[i] - r * xbar[i] * xbar[i];
            }
            // the expectation is bounded by e^{-delta}·sup|res|; once that
            // underflows the outer quadrature only needs a clean zero
            if delta > 600.0 {
                return 0.0;
            }
            let norm =
                (2.0 * std::f64::consts::PI * var).powf(d as f64 / 2.0) * r.powf(d as f64 / 2.0);
            let sum = ctx.hermite_sum_d(&xbar, 1.0 / r.sqrt(), |y| {
                let gv = g.eval(y);
                if gv == 0.0 {
                    // the field underflowed; unwinding the envelope would
                    // produce 0·inf while the true node value is < 1e-260
                    return 0.0;
                }
                let s: f64 = y.iter().zip(&y0).map(|(a, b)| (a - b) * (a - b)).sum();
                gv * (q * s).exp()
            });
            (-delta).exp() * sum / norm
        }
        _ => ctx.gaussian_expect(mean, var, |y| g.eval(y)),
    }
}

/// Exact total Gaussian part of a field: rate (sum over product factors)
/// and the completed-square center. None when no positive Gaussian factor
/// is available.
fn dominant_gaussian(f: &Field) -> Option<(f64, Vec<f64>)> {
    match f {
        Field::Gaussian { rate, center, .. } if *rate > 0.0 => Some((*rate, center.clone())),
        Field::Product(fs) => {
            let mut rate = 0.0;
            let mut lin: Option<Vec<f64>> = None;
            for f in fs {
                match f {
                    Field::Gaussian {
                        rate: r, center, ..
                    } => {
                        rate += r;
                        let lin = lin.get_or_insert_with(|| vec![0.0; center.len()]);
                        for (l, c) in lin.iter_mut().zip(center) {
                            *l += r * c;
                        }
                    }
                    Field::Const(_) | Field::Monomial { .. } => {}
                    _ => return None,
                }
            }
            if rate > 0.0 {
                let center = lin?.iter().map(|l| l / rate).collect();
                Some((rate, center))
            } else {
                None
            }
        }
        Field::Sum(terms) => {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for t in terms {
                let (r, c) = dominant_gaussian(t)?;
                if best.as_ref().map_or(true, |(br, _)| r < *br) {
                    best = Some((r, c));
                }
            }
            best
        }
        _ => None,
    }
}

/// Expectation E_x[f(ξ_t)] of a test function under the exact transition
/// law; one-dimensional indicators go through the Gaussian CDF.
pub fn transition_expectation(
    ctx: &QuadCtx,
    motion: &SpatialMotion,
    t: f64,
    x: &[f64],
    f: &TestFunction,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(f.eval(x));
    }
    if let Some((lo, hi, scale)) = f.as_scaled_interval() {
        if motion.dim() == 1 {
            let mean = x[0] * motion.mean_factor(t);
            let var = motion.transition_variance(t);
            return Ok(scale * stats::gaussian_interval_prob(mean, var, lo, hi));
        }
    }
    match &f.kind {
        TestKind::Analytic(field) => expect_field(ctx, motion, t, x, field),
        TestKind::Spline(s) => {
            let fm = motion.mean_factor(t);
            let var = motion.transition_variance(t);
            let mean: Vec<f64> = x.iter().map(|&v| v * fm).collect();
            Ok(ctx.gaussian_expect(&mean, var, |y| s.eval(y[0])))
        }
    }
}

/// Mean semigroup T_t f(x) = e^{αt} (P_t f)(x): the first moment of the
/// mass functional ⟨f, X_t⟩ started from δ_x.
pub fn mean_semigroup(
    model: &ModelSpec,
    t: f64,
    f: &TestFunction,
    x: &[f64],
    ctx: &QuadCtx,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let alpha = const_alpha(model)?;
    Ok((alpha * t).exp() * transition_expectation(ctx, &model.spatial, t, x, f)?)
}

/// Variance of ⟨f, X_t⟩ started from δ_x:
/// ∫_0^t T_s[A·(T_{t-s} f)²](x) ds, by composite time quadrature of
/// spatial quadratures. For constant f the inner semigroup is scalar and
/// the integrand stays in the closed field family.
pub fn variance_oracle(
    model: &ModelSpec,
    t: f64,
    f: &TestFunction,
    x: &[f64],
    ctx: &QuadCtx,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let alpha = const_alpha(model)?;
    let motion = &model.spatial;
    let mech = &model.branching;

    let const_f = match &f.kind {
        TestKind::Analytic(Field::Const(v)) => Some(*v),
        _ => None,
    };

    let mut failure: Option<Error> = None;
    let value = ctx.time_integral(0.0, t, true, |s| {
        if failure.is_some() {
            return 0.0;
        }
        let inner = |y: &[f64]| -> f64 {
            let tf = (alpha * (t - s)).exp()
                * match transition_expectation(ctx, motion, t - s, y, f) {
                    Ok(v) => v,
                    Err(_) => f64::NAN,
                };
            mech.big_a(y) * tf * tf
        };
        let expectation = if let Some(v) = const_f {
            // T_{t-s} f = v e^{α(t-s)}: integrand is A(y) times a scalar
            let scale = (v * (alpha * (t - s)).exp()).powi(2);
            let a_field = big_a_field(mech);
            match expect_field(ctx, motion, s, x, &a_field) {
                Ok(e) => scale * e,
                Err(e) => {
                    failure = Some(e);
                    return 0.0;
                }
            }
        } else if s == 0.0 {
            inner(x)
        } else {
            let fm = motion.mean_factor(s);
            let var = motion.transition_variance(s);
            let mean: Vec<f64> = x.iter().map(|&v| v * fm).collect();
            ctx.gaussian_expect(&mean, var, inner)
        };
        (alpha * s).exp() * expectation
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if value.is_nan() {
        return Err(Error::Numerical("variance quadrature produced NaN".into()));
    }
    if value < -ctx.spec.tol.max(1e-9) {
        return Err(Error::Numerical(format!(
            "variance quadrature returned {value} < 0 beyond tolerance"
        )));
    }
    Ok(value.max(0.0))
}

/// A(x) as a member of the closed field family.
fn big_a_field(mech: &crate::model::BranchingMechanism) -> Field {
    let mut terms = vec![Field::Product(vec![
        Field::constant(2.0),
        mech.beta.clone(),
        mech.b.clone(),
    ])];
    for atom in &mech.atoms {
        terms.push(Field::Product(vec![
            Field::constant(atom.size * atom.size),
            mech.beta.clone(),
            atom.weight.clone(),
        ]));
    }
    Field::Sum(terms)
}

/// Resolvent U_q f(x) = ∫_0^∞ e^{-qs} T_s f(x) ds, truncated at
/// T_max = ln(1/tol)/(q - λ0); the registered spectral growth
/// |T_s f| ≲ e^{λ0 s} bounds the discarded tail by tol·C_f.
///
/// Convergence of the integral needs q > λ0. The a-priori sufficient
/// condition in the theory is the stronger q > max{K, λ0}; for the
/// registered closed-form models the spectral bound justifies truncation
/// on the full range q > λ0, which the experiments use.
pub fn resolvent(
    model: &ModelSpec,
    sd: &SpectralData,
    q: f64,
    f: &TestFunction,
    x: &[f64],
    ctx: &QuadCtx,
) -> Result<f64> {
    if q <= sd.lambda0 {
        return Err(Error::Domain(format!(
            "resolvent requires q > lambda0 = {}, got q = {q} (integral may diverge)",
            sd.lambda0
        )));
    }
    let tol = ctx.spec.tol.min(1e-9);
    let t_max = (1.0 / tol).ln() / (q - sd.lambda0);
    let mut failure: Option<Error> = None;
    let value = ctx.time_integral(0.0, t_max, false, |s| {
        if failure.is_some() {
            return 0.0;
        }
        match mean_semigroup(model, s, f, x, ctx) {
            Ok(v) => (-q * s).exp() * v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Ground-state transformed semigroup
/// T_t^{φ0} f(x) = e^{-λ0 t} T_t(f·φ0)(x) / φ0(x); a conservative Markov
/// semigroup (T_t^{φ0} 1 = 1).
pub fn h_semigroup(
    model: &ModelSpec,
    sd: &SpectralData,
    t: f64,
    f: &TestFunction,
    x: &[f64],
    ctx: &QuadCtx,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.eval(x));
    }
    let alpha = const_alpha(model)?;
    let phi0_x = sd.phi0.eval(x);
    let t_val = match &f.kind {
        TestKind::Analytic(field) => {
            let product = Field::Product(vec![field.clone(), sd.phi0.clone()]);
            (alpha * t).exp() * expect_field(ctx, &model.spatial, t, x, &product)?
        }
        TestKind::Spline(_) => {
            // spline observables arise for the inward models where φ0 ≡ 1
            match &sd.phi0 {
                Field::Const(c) => {
                    c * (alpha * t).exp() * transition_expectation(ctx, &model.spatial, t, x, f)?
                }
                _ => {
                    return Err(Error::UnsupportedModel(
                        "tabulated test functions are only paired with constant φ0".into(),
                    ))
                }
            }
        }
    };
    Ok((-sd.lambda0 * t).exp() * t_val / phi0_x)
}

/// Sup-norm gaps ‖T_t^{φ0} f - f‖ over a point grid for a decreasing time
/// sequence; the strong-continuity diagnostic for the transformed
/// semigroup.
#[derive(Clone, Debug)]
pub struct FellerReport {
    /// (t, max over grid of |T_t^{φ0} f - f|), in the order supplied.
    pub gaps: Vec<(f64, f64)>,
    pub monotone_decreasing: bool,
    /// Final gap relative to the grid sup of |f|.
    pub final_gap_fraction: f64,
}

pub fn feller_check(
    model: &ModelSpec,
    sd: &SpectralData,
    f: &TestFunction,
    t_sequence: &[f64],
    grid: &[Vec<f64>],
    ctx: &QuadCtx,
) -> Result<FellerReport> {
    f.require_c0()?;
    if t_sequence.is_empty() || grid.is_empty() {
        return Err(Error::Config(
            "need a nonempty time sequence and grid".into(),
        ));
    }
    let mut gaps = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        let mut sup: f64 = 0.0;
        for x in grid {
            let v = h_semigroup(model, sd, t, f, x, ctx)?;
            sup = sup.max((v - f.eval(x)).abs());
        }
        gaps.push((t, sup));
    }
    let monotone_decreasing = gaps.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-14);
    let f_sup = grid.iter().map(|x| f.eval(x).abs()).fold(0.0, f64::max);
    let final_gap_fraction = if f_sup > 0.0 {
        gaps.last().unwrap().1 / f_sup
    } else {
        gaps.last().unwrap().1
    };
    Ok(FellerReport {
        gaps,
        monotone_decreasing,
        final_gap_fraction,
    })
}

/// ⟨f, φ̂0⟩_m together with a provenance note for reports.
pub fn pair_with_phi0_hat(
    ctx: &QuadCtx,
    motion: &SpatialMotion,
    sd: &SpectralData,
    f: &TestFunction,
) -> Result<(f64, &'static str)> {
    match motion.kind() {
        MotionKind::InwardOu => {
            // φ̂0 ≡ 1: integrate f against the Gaussian probability measure m
            if let Some((lo, hi, scale)) = f.as_scaled_interval() {
                if motion.dim() == 1 {
                    let var = 1.0 / (2.0 * motion.drift_coefficient());
                    let v = scale * stats::gaussian_interval_prob(0.0, var, lo, hi);
                    return Ok((v, "analytic-gaussian-measure"));
                }
            }
            let phi0_hat = sd.phi0_hat.clone();
            let v = crate::quad::integrate_m(ctx, motion, None, |x| f.eval(x) * phi0_hat.eval(x))?;
            Ok((v, "gauss-hermite"))
        }
        MotionKind::OutwardOu => {
            // φ̂0·m is exactly Lebesgue measure: ⟨f, φ̂0⟩_m = ∫ f dx
            let field = f.field().ok_or_else(|| {
                Error::UnsupportedModel(
                    "pairing of tabulated functions against the outward measure is not supported"
                        .into(),
                )
            })?;
            let (rate, center) = dominant_gaussian(field).ok_or_else(|| {
                Error::Config(format!(
                    "test function '{}' lacks the Gaussian decay required against \
                     the outward reference measure",
                    f.name
                ))
            })?;
            let v = lebesgue_integral(ctx, &GaussianEnvelope { rate, center }, |x| field.eval(x));
            Ok((v, "gauss-hermite-lebesgue"))
        }
    }
}

/// ∫ f(x) dx by Gauss-Hermite with nodes placed by the envelope.
pub fn lebesgue_integral(
    ctx: &QuadCtx,
    env: &GaussianEnvelope,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let d = env.center.len();
    let r = env.rate;
    let sum = ctx.hermite_sum_d(&env.center, 1.0 / r.sqrt(), |y| {
        let s: f64 = y
            .iter()
            .zip(&env.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        f(y) * (r * s).exp()
    });
    sum / r.powf(d as f64 / 2.0)
}

/// Tabulate U_q g on [lo, hi] (one-dimensional motions) and wrap the cubic
/// interpolant as a test function for particle evaluation; the direct
/// resolvent quadrature is too slow per particle per event. The grid is
/// refined until the interpolant matches direct evaluation at panel
/// midpoints within `budget`, and padded so natural-spline boundary bias
/// stays outside the requested window.
pub fn build_resolvent_observable(
    model: &ModelSpec,
    sd: &SpectralData,
    q: f64,
    g: &TestFunction,
    lo: f64,
    hi: f64,
    budget: f64,
    ctx: &QuadCtx,
) -> Result<TestFunction> {
    if model.spatial.dim() != 1 {
        return Err(Error::UnsupportedModel(
            "tabulated resolvent observables are one-dimensional".into(),
        ));
    }
    let pad = 0.1 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let direct = |x: f64| resolvent(model, sd, q, g, &[x], ctx);
    let mut n = 129usize;
    loop {
        let dx = (hi - lo) / (n - 1) as f64;
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            ys.push(direct(lo + i as f64 * dx)?);
        }
        let spline = crate::testfn::CubicSpline1d::fit(lo, dx, ys);
        // check at panel midpoints away from the padded boundary
        let mut worst: f64 = 0.0;
        let probe = (n - 1).min(64);
        for k in 0..probe {
            let x = lo + pad + (hi - lo - 2.0 * pad) * (k as f64 + 0.5) / probe as f64;
            worst = worst.max((spline.eval(x) - direct(x)?).abs());
        }
        if worst <= budget {
            let mut tf =
                TestFunction::from_spline(format!("resolvent[q={q}]({})", g.name), spline, g.c0);
            // |U_q g| ≤ ‖g/φ0‖_∞ φ0/(q - λ0)-style domination, declared from
            // the tabulated sup for the experiment layer
            let sup = (0..n)
                .map(|i| tf.eval(&[lo + i as f64 * dx]).abs())
                .fold(0.0, f64::max);
            tf.phi0_domination = Some(sup);
            return Ok(tf);
        }
        n = 2 * (n - 1) + 1;
        if n > 8193 {
            return Err(Error::Numerical(format!(
                "resolvent tabulation did not reach the {budget} interpolation budget"
            )));
        }
    }
}

/// Scalar log-Laplace equation u' = -β ψ(u), u(0) = θ, for spatially
/// homogeneous branching: P_μ e^{-θ⟨1, X_t⟩} = e^{-u_θ(t)·‖μ‖}.
pub fn log_laplace_ode(model: &ModelSpec, theta: f64, t: f64) -> Result<f64> {
    if theta < 0.0 {
        return Err(Error::Domain(format!("theta must be >= 0, got {theta}")));
    }
    if !model.branching.is_spatially_constant() {
        return Err(Error::UnsupportedModel(
            "log-Laplace ODE needs spatially homogeneous branching coefficients".into(),
        ));
    }
    let mech = model.branching.clone();
    let origin = vec![0.0; model.spatial.dim()];
    let beta = mech.beta.eval(&origin);
    ode::integrate_autonomous(
        |u| -beta * mech.psi(&origin, u.max(0.0)).unwrap_or(f64::NAN),
        theta,
        t,
        1e-10,
    )
}

/// Closed logistic solution of the quadratic log-Laplace equation
/// (b > 0, no jump atoms): u(t) = aθe^{aβt} / (a + bθ(e^{aβt} - 1)).
pub fn logistic_log_laplace(a: f64, b: f64, beta: f64, theta: f64, t: f64) -> f64 {
    let g = (a * beta * t).exp();
    a * theta * g / (a + b * theta * (g - 1.0))
}

#[derive(Clone, Copy, Debug)]
pub struct Extinction {
    /// Extinction probability per unit initial mass: P(extinction) for μ
    /// with ‖μ‖ = m is prob^m.
    pub prob_per_unit_mass: f64,
    /// The mass process is deterministic (no quadratic or jump part).
    pub deterministic: bool,
}

/// Long-time extinction probability via the θ → ∞ limit of the
/// log-Laplace equation: e^{-u*} with u* the largest root of ψ.
pub fn extinction_probability(model: &ModelSpec) -> Result<Extinction> {
    if !model.branching.is_spatially_constant() {
        return Err(Error::UnsupportedModel(
            "extinction probability needs spatially homogeneous branching".into(),
        ));
    }
    let origin = vec![0.0; model.spatial.dim()];
    let mech = &model.branching;
    let a = mech.a.eval(&origin);
    let b = mech.b.eval(&origin);
    if mech.atoms.is_empty() {
        if b > 0.0 {
            return Ok(Extinction {
                prob_per_unit_mass: if a > 0.0 { (-a / b).exp() } else { 1.0 },
                deterministic: false,
            });
        }
        // pure drift: mass moves deterministically, never hits zero
        return Ok(Extinction {
            prob_per_unit_mass: 0.0,
            deterministic: true,
        });
    }
    // jump atoms: march the ODE from a large θ to stationarity
    let beta = mech.beta.eval(&origin);
    let mut u = 1e6;
    let mut t = 0.0;
    loop {
        let next = ode::integrate_autonomous(
            |v| -beta * mech.psi(&origin, v.max(0.0)).unwrap_or(f64::NAN),
            u,
            1.0,
            1e-10,
        )?;
        t += 1.0;
        if (next - u).abs() < 1e-8 * (1.0 + next.abs()) {
            return Ok(Extinction {
                prob_per_unit_mass: (-next).exp(),
                deterministic: false,
            });
        }
        u = next;
        if t > 400.0 {
            return Err(Error::Numerical(
                "extinction ODE did not reach stationarity".into(),
            ));
        }
    }
}
