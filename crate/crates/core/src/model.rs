//! Branching mechanisms, full model specifications, and the standing
//! assumption checks that gate simulation.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng::PathRng;
use crate::spatial::SpatialMotion;

/// One atom of the jump kernel: weight field w(x) ≥ 0 and jump size y > 0.
#[derive(Clone, Debug)]
pub struct JumpAtom {
    pub weight: Field,
    pub size: f64,
}

/// Declared global sup-norms for the coefficient fields. These are part of
/// the model contract (suprema over R^d are not computed symbolically) and
/// are spot-verified by sampling during validation. Thinning bound rates in
/// the particle engine are built from them.
#[derive(Clone, Debug)]
pub struct DeclaredBounds {
    pub a_abs: f64,
    pub b_sup: f64,
    pub beta_sup: f64,
    pub atom_w_sup: Vec<f64>,
}

impl DeclaredBounds {
    pub fn for_constants(a: f64, b: f64, beta: f64, atom_ws: &[f64]) -> Self {
        DeclaredBounds {
            a_abs: a.abs(),
            b_sup: b,
            beta_sup: beta,
            atom_w_sup: atom_ws.to_vec(),
        }
    }
}

/// The branching mechanism
/// ψ(x,λ) = -a(x)λ + b(x)λ² + Σ_i w_i(x)(e^{-λ y_i} - 1 + λ y_i),
/// together with the branching rate β(x).
#[derive(Clone, Debug)]
pub struct BranchingMechanism {
    pub a: Field,
    pub b: Field,
    pub atoms: Vec<JumpAtom>,
    pub beta: Field,
    pub bounds: DeclaredBounds,
}

impl BranchingMechanism {
    /// Constant-coefficient mechanism with no jump atoms.
    pub fn quadratic(a: f64, b: f64, beta: f64) -> Self {
        BranchingMechanism {
            a: Field::constant(a),
            b: Field::constant(b),
            atoms: Vec::new(),
            beta: Field::constant(beta),
            bounds: DeclaredBounds::for_constants(a, b, beta, &[]),
        }
    }

    /// ψ(x, λ).
    pub fn psi(&self, x: &[f64], lambda: f64) -> Result<f64> {
        if lambda < 0.0 {
            return Err(Error::Domain(format!(
                "psi requires lambda >= 0, got {lambda}"
            )));
        }
        let mut v = -self.a.eval(x) * lambda + self.b.eval(x) * lambda * lambda;
        for atom in &self.atoms {
            let y = atom.size;
            v += atom.weight.eval(x) * ((-lambda * y).exp() - 1.0 + lambda * y);
        }
        Ok(v)
    }

    /// α(x) = β(x)·a(x), the Feynman-Kac rate of the mean semigroup;
    /// equals -β(x)·∂ψ/∂λ(x, 0+).
    pub fn alpha(&self, x: &[f64]) -> f64 {
        self.beta.eval(x) * self.a.eval(x)
    }

    /// A(x) = β(x)(2b(x) + Σ_i w_i(x) y_i²), the variance rate;
    /// equals β(x)·∂²ψ/∂λ²(x, 0+).
    pub fn big_a(&self, x: &[f64]) -> f64 {
        let mut sum = 2.0 * self.b.eval(x);
        for atom in &self.atoms {
            sum += atom.weight.eval(x) * atom.size * atom.size;
        }
        self.beta.eval(x) * sum
    }

    /// First moment of the jump kernel, Σ_i w_i(x)·y_i.
    pub fn jump_mean(&self, x: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|atom| atom.weight.eval(x) * atom.size)
            .sum()
    }

    /// Linear coefficient after rewriting ψ with the jump compensator
    /// absorbed: ψ(x,λ) = -a_q(x)λ + b(x)λ² + Σ w_i(x)(e^{-λy_i}-1) with
    /// a_q = a - Σ w_i y_i. This is the drift the binary channel carries so
    /// that the uncompensated spawn channel restores the correct mean α = βa.
    pub fn a_uncompensated(&self, x: &[f64]) -> f64 {
        self.a.eval(x) - self.jump_mean(x)
    }

    /// Global bound K ≥ sup_x (|α(x)| + A(x)) from the declared bounds.
    /// An upper bound, not an infimum.
    pub fn k_bound(&self) -> Result<f64> {
        let b = &self.bounds;
        if !(b.a_abs.is_finite() && b.b_sup.is_finite() && b.beta_sup.is_finite()) {
            return Err(Error::Config("declared bounds must be finite".into()));
        }
        if b.atom_w_sup.len() != self.atoms.len() {
            return Err(Error::Config(format!(
                "declared atom weight bounds ({}) do not match atom count ({})",
                b.atom_w_sup.len(),
                self.atoms.len()
            )));
        }
        let second_moment: f64 = self
            .atoms
            .iter()
            .zip(&b.atom_w_sup)
            .map(|(atom, w)| w * atom.size * atom.size)
            .sum();
        Ok(b.beta_sup * b.a_abs + b.beta_sup * (2.0 * b.b_sup + second_moment))
    }

    /// Discrete second moment condition sup_x Σ w_i(x) y_i², from bounds.
    pub fn second_moment_bound(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.bounds.atom_w_sup)
            .map(|(atom, w)| w * atom.size * atom.size)
            .sum()
    }

    pub fn is_spatially_constant(&self) -> bool {
        let const_field = |f: &Field| matches!(f, Field::Const(_));
        const_field(&self.a)
            && const_field(&self.b)
            && const_field(&self.beta)
            && self.atoms.iter().all(|a| const_field(&a.weight))
    }
}

/// Finite atomic initial measure μ = Σ mass_i · δ_{x_i}.
#[derive(Clone, Debug)]
pub struct InitialMeasure {
    pub atoms: Vec<(Vec<f64>, f64)>,
}

impl InitialMeasure {
    pub fn point_mass(x: Vec<f64>, mass: f64) -> Self {
        InitialMeasure {
            atoms: vec![(x, mass)],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::Config(
                "initial measure must have at least one atom".into(),
            ));
        }
        for (x, m) in &self.atoms {
            if x.len() != dim {
                return Err(Error::Config(format!(
                    "initial atom dimension {} does not match spatial dimension {dim}",
                    x.len()
                )));
            }
            if !(*m > 0.0) {
                return Err(Error::Config(format!(
                    "initial atom masses must be > 0, got {m}"
                )));
            }
        }
        Ok(())
    }
}

/// A complete model: spatial motion, branching mechanism, initial measure.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub spatial: SpatialMotion,
    pub branching: BranchingMechanism,
    pub initial: InitialMeasure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not decidable here (e.g. supercriticality without registry data).
    Skipped,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

/// Aggregated standing-assumption report; a passing report is required
/// before simulation.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    fn push(&mut self, name: &'static str, ok: bool, detail: String) {
        self.checks.push(CheckResult {
            name,
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail,
        });
    }
}

/// Sample points used for spot checks: initial atom positions plus draws
/// around them. Deterministic (fixed probe seed).
pub(crate) fn probe_points(spec: &ModelSpec, n: usize) -> Vec<Vec<f64>> {
    let d = spec.spatial.dim();
    let mut rng = PathRng::new(0x5EED_CAFE, 17);
    let mut pts: Vec<Vec<f64>> = spec.initial.atoms.iter().map(|(x, _)| x.clone()).collect();
    while pts.len() < n {
        pts.push((0..d).map(|_| 1.5 * rng.standard_normal()).collect());
    }
    pts
}

/// Standing-assumption checks: nonnegativity and declared-bound respect at
/// sampled points, second moment condition, supercriticality (when λ0 is
/// known), and initial measure admissibility.
pub fn validate_model(spec: &ModelSpec, lambda0: Option<f64>) -> ValidationReport {
    let mut report = ValidationReport { checks: Vec::new() };
    let mech = &spec.branching;
    let pts = probe_points(spec, 64);

    let mut nonneg_ok = true;
    let mut bounds_ok = true;
    let mut worst = String::new();
    for x in &pts {
        let b = mech.b.eval(x);
        let beta = mech.beta.eval(x);
        if b < 0.0 || beta < 0.0 {
            nonneg_ok = false;
            worst = format!("b({x:?}) = {b}, beta({x:?}) = {beta}");
        }
        for atom in &mech.atoms {
            if atom.weight.eval(x) < 0.0 {
                nonneg_ok = false;
                worst = format!("atom weight negative at {x:?}");
            }
        }
        if mech.a.eval(x).abs() > mech.bounds.a_abs * (1.0 + 1e-12)
            || b > mech.bounds.b_sup * (1.0 + 1e-12)
            || beta > mech.bounds.beta_sup * (1.0 + 1e-12)
        {
            bounds_ok = false;
            worst = format!("declared bound violated at {x:?}");
        }
        for (atom, w_sup) in mech.atoms.iter().zip(&mech.bounds.atom_w_sup) {
            if atom.weight.eval(x) > w_sup * (1.0 + 1e-12) {
                bounds_ok = false;
                worst = format!("atom weight bound violated at {x:?}");
            }
        }
    }
    report.push(
        "nonnegativity",
        nonneg_ok,
        if nonneg_ok {
            "b, w_i, beta >= 0 at all sampled points".into()
        } else {
            worst.clone()
        },
    );
    report.push(
        "declared-bounds",
        bounds_ok,
        if bounds_ok {
            "fields within declared sup-norms at all sampled points".into()
        } else {
            worst.clone()
        },
    );

    let atom_sizes_ok = mech.atoms.iter().all(|a| a.size > 0.0);
    let m2 = mech.second_moment_bound();
    report.push(
        "second-moment",
        atom_sizes_ok && m2.is_finite(),
        format!("sup_x Σ w_i y_i² <= {m2}"),
    );

    let degree_ok = [&mech.a, &mech.b, &mech.beta]
        .into_iter()
        .chain(mech.atoms.iter().map(|a| &a.weight))
        .all(|f| f.check_degree().is_ok());
    report.push(
        "field-family",
        degree_ok,
        "coefficient fields within the closed family".into(),
    );

    match lambda0 {
        Some(l0) => report.push("supercritical", l0 > 0.0, format!("lambda0 = {l0}")),
        None => report.checks.push(CheckResult {
            name: "supercritical",
            status: CheckStatus::Skipped,
            detail: "no spectral data registered; SLLN experiments unavailable".into(),
        }),
    }

    let init_ok = spec.initial.validate(spec.spatial.dim()).is_ok();
    report.push(
        "initial-measure",
        init_ok,
        format!(
            "{} atoms, total mass {}",
            spec.initial.atoms.len(),
            spec.initial.total_mass()
        ),
    );

    // The binary channel can only carry the linear drift where b > 0.
    let drift_carried = pts.iter().all(|x| {
        let aq = mech.a_uncompensated(x);
        aq == 0.0 || mech.b.eval(x) > 0.0
    });
    report.push(
        "drift-carrier",
        drift_carried,
        "b(x) > 0 wherever the uncompensated linear coefficient is nonzero".into(),
    );

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_model(a: f64, b: f64, beta: f64) -> ModelSpec {
        ModelSpec {
            spatial: SpatialMotion::inward_ou(1.0, 1).unwrap(),
            branching: BranchingMechanism::quadratic(a, b, beta),
            initial: InitialMeasure::point_mass(vec![0.0], 1.0),
        }
    }

    #[test]
    fn psi_reference_values() {
        let m = BranchingMechanism::quadratic(1.0, 1.0, 1.0);
        // psi(x, 0) = 0 and the root at lambda = a/b
        assert_eq!(m.psi(&[0.0], 0.0).unwrap(), 0.0);
        assert!((m.psi(&[0.3], 1.0).unwrap()).abs() < 1e-15);
        // pure-jump value e^{-1}
        let jump = BranchingMechanism {
            a: Field::constant(0.0),
            b: Field::constant(0.0),
            atoms: vec![JumpAtom {
                weight: Field::constant(1.0),
                size: 1.0,
            }],
            beta: Field::constant(1.0),
            bounds: DeclaredBounds::for_constants(0.0, 0.0, 1.0, &[1.0]),
        };
        let v = jump.psi(&[0.0], 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(jump.psi(&[0.0], -0.1).is_err());
    }

    #[test]
    fn alpha_and_big_a() {
        let m = BranchingMechanism::quadratic(0.5, 1.0, 2.0);
        assert!((m.alpha(&[0.0]) - 1.0).abs() < 1e-15);
        assert!((m.big_a(&[0.0]) - 4.0).abs() < 1e-15);
        let jump = BranchingMechanism {
            a: Field::constant(0.0),
            b: Field::constant(0.0),
            atoms: vec![JumpAtom {
                weight: Field::constant(3.0),
                size: 2.0,
            }],
            beta: Field::constant(1.0),
            bounds: DeclaredBounds::for_constants(0.0, 0.0, 1.0, &[3.0]),
        };
        assert!((jump.big_a(&[0.0]) - 12.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_by_finite_differences() {
        // alpha = -beta·(psi(h)-psi(0))/h + O(h), independent of atoms
        let m = BranchingMechanism {
            a: Field::constant(0.8),
            b: Field::constant(0.6),
            atoms: vec![
                JumpAtom {
                    weight: Field::constant(0.5),
                    size: 1.5,
                },
                JumpAtom {
                    weight: Field::constant(0.2),
                    size: 0.7,
                },
            ],
            beta: Field::constant(1.3),
            bounds: DeclaredBounds::for_constants(0.8, 0.6, 1.3, &[0.5, 0.2]),
        };
        let x = [0.0];
        let h = 1e-6;
        let fd_alpha = -m.beta.eval(&x) * (m.psi(&x, h).unwrap() - m.psi(&x, 0.0).unwrap()) / h;
        assert!((fd_alpha - m.alpha(&x)).abs() < 1e-4);
        let fd_a = m.beta.eval(&x)
            * (m.psi(&x, 2.0 * h).unwrap() - 2.0 * m.psi(&x, h).unwrap() + m.psi(&x, 0.0).unwrap())
            / (h * h);
        assert!((fd_a - m.big_a(&x)).abs() < 1e-3);
    }

    #[test]
    fn k_bound_values() {
        let m = BranchingMechanism::quadratic(1.0, 1.0, 1.0);
        assert!((m.k_bound().unwrap() - 3.0).abs() < 1e-15);
        let z = BranchingMechanism::quadratic(0.0, 0.0, 1.0);
        assert_eq!(z.k_bound().unwrap(), 0.0);
        let with_atom = BranchingMechanism {
            a: Field::constant(1.0),
            b: Field::constant(0.5),
            atoms: vec![JumpAtom {
                weight: Field::constant(1.0),
                size: 1.0,
            }],
            beta: Field::constant(1.0),
            bounds: DeclaredBounds::for_constants(1.0, 0.5, 1.0, &[1.0]),
        };
        assert!((with_atom.k_bound().unwrap() - 3.0).abs() < 1e-15);
        // mismatched declared bounds are a configuration error
        let mut broken = with_atom.clone();
        broken.bounds.atom_w_sup.clear();
        assert!(broken.k_bound().is_err());
    }

    #[test]
    fn k_bound_dominates_pointwise() {
        let mech = BranchingMechanism {
            a: Field::gaussian(0.9, 0.7, vec![0.3]),
            b: Field::Sum(vec![
                Field::constant(0.4),
                Field::gaussian(0.6, 1.0, vec![0.0]),
            ]),
            atoms: vec![JumpAtom {
                weight: Field::gaussian(0.8, 0.5, vec![-0.2]),
                size: 0.5,
            }],
            beta: Field::constant(1.2),
            bounds: DeclaredBounds {
                a_abs: 0.9,
                b_sup: 1.0,
                beta_sup: 1.2,
                atom_w_sup: vec![0.8],
            },
        };
        let k = mech.k_bound().unwrap();
        let mut rng = PathRng::new(3, 3);
        for _ in 0..200 {
            let x = [2.0 * rng.standard_normal()];
            assert!(k >= mech.alpha(&x).abs() + mech.big_a(&x) - 1e-12);
        }
    }

    #[test]
    fn psi_shifted_convexity() {
        // psi(x, λ) + a(x)λ is convex in λ: second differences >= 0
        let m = BranchingMechanism {
            a: Field::constant(-0.5),
            b: Field::constant(0.3),
            atoms: vec![JumpAtom {
                weight: Field::constant(1.1),
                size: 0.9,
            }],
            beta: Field::constant(1.0),
            bounds: DeclaredBounds::for_constants(-0.5, 0.3, 1.0, &[1.1]),
        };
        let x = [0.0];
        let a = m.a.eval(&x);
        let g = |l: f64| m.psi(&x, l).unwrap() + a * l;
        let h = 0.05;
        for k in 0..60 {
            let l = k as f64 * h;
            let second = g(l + 2.0 * h) - 2.0 * g(l + h) + g(l);
            assert!(second >= -1e-12);
        }
    }

    #[test]
    fn validation_reports() {
        let good = point_model(1.0, 1.0, 1.0);
        let report = validate_model(&good, Some(1.0));
        assert!(report.all_passed());

        // negative b fails nonnegativity
        let mut bad = point_model(1.0, 1.0, 1.0);
        bad.branching.b = Field::constant(-0.5);
        let report = validate_model(&bad, Some(1.0));
        assert!(!report.all_passed());

        // critical model (lambda0 = 0) fails supercriticality
        let report = validate_model(&good, Some(0.0));
        assert!(report
            .checks
            .iter()
            .any(|c| c.name == "supercritical" && c.status == CheckStatus::Fail));

        // unregistered spectral data: skipped, not failed
        let report = validate_model(&good, None);
        assert!(report.all_passed());
        assert!(report
            .checks
            .iter()
            .any(|c| c.name == "supercritical" && c.status == CheckStatus::Skipped));
    }

    #[test]
    fn initial_measure_checks() {
        let m = InitialMeasure::point_mass(vec![0.0, 0.0], 1.0);
        assert!(m.validate(2).is_ok());
        assert!(m.validate(1).is_err());
        let zero = InitialMeasure::point_mass(vec![0.0], 0.0);
        assert!(zero.validate(1).is_err());
    }
}
