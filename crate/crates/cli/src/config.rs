//! Experiment configuration: one TOML file with four sections (model,
//! sim, experiment, output). Unknown keys are rejected so a config file
//! plus the binary version pins a run completely.

use std::path::PathBuf;

use serde::Deserialize;
use supersim::error::Error;
use supersim::field::Field;
use supersim::particle::SimConfig;
use supersim::presets::{build_preset, Preset, PresetParams};
use supersim::quad::QuadratureSpec;
use supersim::testfn::TestFunction;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub sim: SimSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: String,
    pub beta: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<usize>,
    pub initial_mass: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub epsilon: f64,
    pub seed: u64,
    pub max_particles: usize,
    pub observation_times: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_paths: usize,
    pub workers: Option<usize>,
    /// Observable descriptors, e.g. "const:1", "indicator:-1:1",
    /// "gaussian:1:1:0", "coordinate:0", "phi0".
    #[serde(default)]
    pub observables: Vec<String>,
    /// Adds the tabulated resolvent observable U_q g for a Gaussian g.
    pub resolvent_q: Option<f64>,
    /// amp, rate, center (one-dimensional).
    pub resolvent_gaussian: Option<Vec<f64>>,
    pub quad_hermite_order: Option<usize>,
    /// Time grid for the spatial-motion integrability checks (validate).
    #[serde(default)]
    pub assumption1_grid: Vec<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
    /// Also write the long-format per-path trajectory CSV (slln runs).
    #[serde(default)]
    pub trajectories: bool,
}

impl ExperimentConfig {
    pub fn parse(raw: &str) -> Result<Self, Error> {
        toml::from_str(raw).map_err(|e| Error::Config(format!("config parse: {e}")))
    }

    pub fn preset(&self) -> Result<Preset, Error> {
        let m = &self.model;
        let params = PresetParams {
            beta: m.beta,
            a: m.a,
            b: m.b,
            c: m.c,
            d: m.d,
            initial_mass: m.initial_mass,
            c1: m.c1,
            c2: m.c2,
        };
        build_preset(&m.preset, &params)
    }

    pub fn sim_config(&self, seed_override: Option<u64>) -> SimConfig {
        SimConfig {
            epsilon: self.sim.epsilon,
            max_particles: self.sim.max_particles,
            seed: seed_override.unwrap_or(self.sim.seed),
            observation_times: self.sim.observation_times.clone(),
        }
    }

    pub fn quad_spec(&self) -> QuadratureSpec {
        let mut spec = QuadratureSpec::default();
        if let Some(order) = self.experiment.quad_hermite_order {
            spec.hermite_order = order;
        }
        spec
    }
}

pub fn parse_observable(s: &str, dim: usize) -> Result<TestFunction, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| -> Result<f64, Error> {
        v.parse::<f64>()
            .map_err(|_| Error::Config(format!("observable '{s}': bad number '{v}'")))
    };
    match parts.as_slice() {
        ["const", v] => Ok(TestFunction::constant(num(v)?)),
        ["indicator", lo, hi] => {
            if dim != 1 {
                return Err(Error::Config(
                    "indicator observables are one-dimensional".into(),
                ));
            }
            let (lo, hi) = (num(lo)?, num(hi)?);
            if hi <= lo {
                return Err(Error::Config(format!("observable '{s}': empty interval")));
            }
            Ok(TestFunction::indicator_interval(lo, hi))
        }
        ["gaussian", amp, rate, center] => Ok(TestFunction::gaussian(
            num(amp)?,
            num(rate)?,
            vec![num(center)?; dim],
        )),
        ["coordinate", j] => {
            let j: usize = j
                .parse()
                .map_err(|_| Error::Config(format!("observable '{s}': bad index")))?;
            if j >= dim {
                return Err(Error::Config(format!(
                    "observable '{s}': coordinate {j} out of range for dimension {dim}"
                )));
            }
            Ok(TestFunction::coordinate(j, dim))
        }
        ["phi0"] => Ok(TestFunction::from_field(
            "phi0",
            Field::constant(f64::NAN), // replaced by the caller with the registry φ0
        )),
        _ => Err(Error::Config(format!(
            "unknown observable descriptor '{s}'; expected const:V, indicator:LO:HI, \
             gaussian:AMP:RATE:CENTER, coordinate:J or phi0"
        ))),
    }
}
