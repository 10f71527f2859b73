//! Named model presets addressable from experiment configurations.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::model::{BranchingMechanism, InitialMeasure, ModelSpec};
use crate::spatial::SpatialMotion;
use crate::spectral::{htransform_build, HTransformData};

/// Overridable parameters for the named presets; `None` keeps the preset
/// default.
#[derive(Clone, Debug, Default)]
pub struct PresetParams {
    pub beta: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<usize>,
    pub initial_mass: Option<f64>,
    /// Ground-state-transform constants (htransform-ou preset).
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

/// A resolved preset: the simulable model plus, for the transformed
/// preset, the transform data mapping back to the original.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub model: ModelSpec,
    pub htransform: Option<HTransformData>,
}

pub const PRESET_NAMES: [&str; 3] = ["inward-ou", "outward-ou", "htransform-ou"];

/// Build a named preset.
///
/// * `inward-ou`: inward OU (c=1, d=1), β=a=b=1, unit mass at the origin.
/// * `outward-ou`: outward OU (c=1, d=1), β=3, a=b=1 (λ0 = β - c·d = 2).
/// * `htransform-ou`: the transformed model for linear coefficient
///   c1|x|²+c2 over inward OU with c=3, c1=2, c2=1, d=1 and quadratic
///   coefficient decaying like the ground state's growth: an inward OU
///   model with constant rate λ_c = c2 + d·υ.
pub fn build_preset(name: &str, params: &PresetParams) -> Result<Preset> {
    let mass = params.initial_mass.unwrap_or(1.0);
    match name {
        "inward-ou" => {
            let c = params.c.unwrap_or(1.0);
            let d = params.d.unwrap_or(1);
            let model = ModelSpec {
                spatial: SpatialMotion::inward_ou(c, d)?,
                branching: BranchingMechanism::quadratic(
                    params.a.unwrap_or(1.0),
                    params.b.unwrap_or(1.0),
                    params.beta.unwrap_or(1.0),
                ),
                initial: InitialMeasure::point_mass(vec![0.0; d], mass),
            };
            Ok(Preset {
                name: "inward-ou",
                model,
                htransform: None,
            })
        }
        "outward-ou" => {
            let c = params.c.unwrap_or(1.0);
            let d = params.d.unwrap_or(1);
            let model = ModelSpec {
                spatial: SpatialMotion::outward_ou(c, d)?,
                branching: BranchingMechanism::quadratic(
                    params.a.unwrap_or(1.0),
                    params.b.unwrap_or(1.0),
                    params.beta.unwrap_or(3.0),
                ),
                initial: InitialMeasure::point_mass(vec![0.0; d], mass),
            };
            Ok(Preset {
                name: "outward-ou",
                model,
                htransform: None,
            })
        }
        "htransform-ou" => {
            let c = params.c.unwrap_or(3.0);
            let c1 = params.c1.unwrap_or(2.0);
            let c2 = params.c2.unwrap_or(1.0);
            let d = params.d.unwrap_or(1);
            let upsilon = 0.5 * (c - (c * c - 2.0 * c1).sqrt());
            // original quadratic coefficient e^{-υ|x|²}: h·α is then constant
            let alpha_orig = Field::gaussian(params.b.unwrap_or(1.0), upsilon, vec![0.0; d]);
            let ht = htransform_build(c, c1, c2, d, alpha_orig)?;
            let model = ModelSpec {
                spatial: ht.transformed_motion.clone(),
                branching: ht.transformed_branching.clone(),
                initial: InitialMeasure::point_mass(vec![0.0; d], mass),
            };
            Ok(Preset {
                name: "htransform-ou",
                model,
                htransform: Some(ht),
            })
        }
        other => Err(Error::Config(format!(
            "unknown preset '{other}'; available: {PRESET_NAMES:?}"
        ))),
    }
}
