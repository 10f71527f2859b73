//! Uniform-mass branching-particle approximation of the measure-valued
//! process.
//!
//! Scheme (exact in law): every particle carries mass ε and moves by the
//! exact OU transition, materialized lazily at event and observation
//! times. Population-level aggregate exponential clocks propose events at
//! constant per-particle bound rates; a uniformly chosen particle accepts
//! by thinning against the declared coefficient bounds.
//!
//! * binary channel, bound rate 2·sup(βb)/ε: accepted with probability
//!   β(x)b(x)/sup(βb); the particle is replaced by 2 offspring with
//!   probability ½ + ε·a_q(x)/(4b(x)) and by 0 otherwise, where
//!   a_q = a - Σ w_i y_i is the jump-compensated linear coefficient;
//! * one spawn channel per jump atom, bound rate ε·sup(βw_i): accepted
//!   with probability β(x)w_i(x)/sup(βw_i); round(y_i/ε) offspring are
//!   created at the parent's position (parent survives).
//!
//! Per unit mass the scheme's drift is exactly β·a and its variance rate
//! exactly β(2b + Σ w_i y_i²) when round(y_i/ε)·ε = y_i; the remaining
//! discretization error in higher moments is O(ε).

use crate::error::{Error, Result};
use crate::field::Field;
use crate::model::{InitialMeasure, ModelSpec};
use crate::rng::PathRng;
use crate::spatial::SpatialMotion;
use crate::spectral::SpectralData;
use crate::testfn::TestFunction;

/// Simulation parameters for one ensemble.
#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Particle mass.
    pub epsilon: f64,
    /// Hard population cap; exceeding it is an error carrying the partial state.
    pub max_particles: usize,
    /// Master seed; path i draws from the stream keyed (seed, i).
    pub seed: u64,
    /// Strictly increasing observation times.
    pub observation_times: Vec<f64>,
}

impl SimConfig {
    /// Static admissibility of the configuration against a model:
    /// positive mass, initial masses commensurable with ε, spawn cluster
    /// rounding within 1% of each jump size, and offspring probabilities
    /// in [0, 1] at sampled points (which caps ε by 2b/|a_q|).
    pub fn validate_for(&self, model: &ModelSpec) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.observation_times.is_empty() {
            return Err(Error::Config("need at least one observation time".into()));
        }
        let mut prev = 0.0;
        for &t in &self.observation_times {
            if !(t > prev) {
                return Err(Error::Config(format!(
                    "observation times must be strictly increasing and positive, got {t} after {prev}"
                )));
            }
            prev = t;
        }
        let mut init_count = 0usize;
        for (x, m) in &model.initial.atoms {
            let k = (m / self.epsilon).round();
            if (k * self.epsilon - m).abs() > 1e-12 * m.max(1.0) || k < 1.0 {
                return Err(Error::Config(format!(
                    "initial atom mass {m} at {x:?} is not an integer multiple of epsilon = {}; \
                     nearest admissible masses are {} and {}",
                    self.epsilon,
                    k.max(1.0) * self.epsilon,
                    (k + 1.0) * self.epsilon
                )));
            }
            init_count += k as usize;
        }
        if init_count > self.max_particles {
            return Err(Error::Capacity {
                time_reached: 0.0,
                count: init_count,
                cap: self.max_particles,
            });
        }
        for atom in &model.branching.atoms {
            let k = (atom.size / self.epsilon).round();
            if k < 1.0 || (k * self.epsilon - atom.size).abs() > 0.01 * atom.size {
                return Err(Error::Config(format!(
                    "jump size {} is not representable within 1% by multiples of epsilon = {}",
                    atom.size, self.epsilon
                )));
            }
        }
        // offspring probability bound at sampled points
        let mech = &model.branching;
        for x in crate::model::probe_points(model, 64) {
            let b = mech.b.eval(&x);
            let aq = mech.a_uncompensated(&x);
            if b > 0.0 {
                let dev = self.epsilon * aq.abs() / (4.0 * b);
                if dev > 0.5 {
                    return Err(Error::Config(format!(
                        "offspring probability outside [0,1] at x = {x:?}: epsilon = {} exceeds \
                         the admissible bound 2b/|a_q| = {}",
                        self.epsilon,
                        2.0 * b / aq.abs()
                    )));
                }
            } else if aq != 0.0 {
                return Err(Error::Config(format!(
                    "b(x) = 0 while the compensated linear coefficient is {aq} at x = {x:?}; \
                     the binary channel cannot carry the drift"
                )));
            }
        }
        Ok(())
    }
}

/// Per-particle bound rates and acceptance data derived from the declared
/// coefficient bounds.
#[derive(Clone, Debug)]
pub(crate) struct Channels {
    pub binary_bound: f64,
    /// (bound rate, cluster size, weight index)
    pub spawn: Vec<(f64, usize)>,
    pub total_bound: f64,
    /// All coefficient fields constant: thinning never rejects and the
    /// offspring probability is position-free.
    pub constant: bool,
    pub p2_const: f64,
    pub binary_accept_const: f64,
    pub spawn_accept_const: Vec<f64>,
}

impl Channels {
    pub fn build(model: &ModelSpec, epsilon: f64) -> Result<Channels> {
        let mech = &model.branching;
        let bounds = &mech.bounds;
        if bounds.atom_w_sup.len() != mech.atoms.len() {
            return Err(Error::Config(
                "declared atom weight bounds do not match atom count".into(),
            ));
        }
        let binary_bound = 2.0 * bounds.beta_sup * bounds.b_sup / epsilon;
        let mut spawn = Vec::with_capacity(mech.atoms.len());
        let mut total = binary_bound;
        for (atom, w_sup) in mech.atoms.iter().zip(&bounds.atom_w_sup) {
            let k = (atom.size / epsilon).round() as usize;
            let rate = epsilon * bounds.beta_sup * w_sup;
            total += rate;
            spawn.push((rate, k));
        }
        let constant = mech.is_spatially_constant();
        let origin = vec![0.0; model.spatial.dim()];
        let (p2_const, binary_accept_const) = if constant {
            let b = mech.b.eval(&origin);
            let beta = mech.beta.eval(&origin);
            let p2 = if b > 0.0 {
                0.5 + epsilon * mech.a_uncompensated(&origin) / (4.0 * b)
            } else {
                0.5
            };
            let accept = if bounds.beta_sup * bounds.b_sup > 0.0 {
                beta * b / (bounds.beta_sup * bounds.b_sup)
            } else {
                0.0
            };
            (p2, accept)
        } else {
            (f64::NAN, f64::NAN)
        };
        let spawn_accept_const = if constant {
            mech.atoms
                .iter()
                .zip(&bounds.atom_w_sup)
                .map(|(atom, w_sup)| {
                    let w = atom.weight.eval(&origin);
                    let beta = mech.beta.eval(&origin);
                    if *w_sup > 0.0 {
                        beta * w / (bounds.beta_sup * w_sup)
                    } else {
                        0.0
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Channels {
            binary_bound,
            spawn,
            total_bound: total,
            constant,
            p2_const,
            binary_accept_const,
            spawn_accept_const,
        })
    }
}

/// The population at a point in time: a finite list of equal-mass
/// particles, the owning random stream, and bookkeeping counters.
/// Positions are materialized lazily; `anchor[i]` is the time at which
/// `position(i)` was last drawn.
#[derive(Clone, Debug)]
pub struct PopulationState {
    pub time: f64,
    pub epsilon: f64,
    motion: SpatialMotion,
    positions: Vec<f64>,
    anchors: Vec<f64>,
    pub event_count: u64,
    pub rng: PathRng,
}

impl PopulationState {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.epsilon * self.len() as f64
    }

    pub fn dim(&self) -> usize {
        self.motion.dim()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.motion.dim();
        &self.positions[i * d..(i + 1) * d]
    }

    /// Advance particle i's position snapshot to time t (exact transition).
    #[inline]
    fn materialize(&mut self, i: usize, t: f64) {
        let dt = t - self.anchors[i];
        if dt <= 0.0 {
            return;
        }
        let f = self.motion.mean_factor(dt);
        let sd = self.motion.transition_variance(dt).sqrt();
        let d = self.motion.dim();
        for k in 0..d {
            let p = &mut self.positions[i * d + k];
            *p = *p * f + sd * self.rng.standard_normal();
        }
        self.anchors[i] = t;
    }

    /// Advance every particle's snapshot to the state time.
    pub fn materialize_all(&mut self) {
        for i in 0..self.len() {
            self.materialize(i, self.time);
        }
    }

    fn swap_remove(&mut self, i: usize) {
        let d = self.motion.dim();
        let last = self.len() - 1;
        if i != last {
            for k in 0..d {
                self.positions[i * d + k] = self.positions[last * d + k];
            }
            self.anchors[i] = self.anchors[last];
        }
        self.positions.truncate(last * d);
        self.anchors.truncate(last);
    }

    fn push_copy_of(&mut self, i: usize) {
        let d = self.motion.dim();
        let src = i * d;
        for k in 0..d {
            let v = self.positions[src + k];
            self.positions.push(v);
        }
        self.anchors.push(self.anchors[i]);
    }

    /// ⟨f, X_t⟩ = ε · Σ f(position_i); positions are synced to the state
    /// time first.
    pub fn functional(&mut self, f: &TestFunction) -> f64 {
        self.materialize_all();
        let d = self.motion.dim();
        let mut total = 0.0;
        for i in 0..self.len() {
            total += f.eval(&self.positions[i * d..(i + 1) * d]);
        }
        self.epsilon * total
    }

    /// Same for a raw field (used for φ0).
    pub fn functional_field(&mut self, f: &Field) -> f64 {
        self.materialize_all();
        let d = self.motion.dim();
        let mut total = 0.0;
        for i in 0..self.len() {
            total += f.eval(&self.positions[i * d..(i + 1) * d]);
        }
        self.epsilon * total
    }

    /// W_t = e^{-λ0 t} ⟨φ0, X_t⟩.
    pub fn martingale_value(&mut self, sd: &SpectralData) -> f64 {
        (-sd.lambda0 * self.time).exp() * self.functional_field(&sd.phi0.clone())
    }
}

/// Build the initial population: each atom (x, m) becomes m/ε particles
/// at x. Total mass is reproduced exactly.
pub fn init_population(
    mu: &InitialMeasure,
    model: &ModelSpec,
    cfg: &SimConfig,
    path_id: u64,
) -> Result<PopulationState> {
    cfg.validate_for(model)?;
    let mut positions = Vec::new();
    let mut anchors = Vec::new();
    for (x, m) in &mu.atoms {
        let k = (m / cfg.epsilon).round() as usize;
        for _ in 0..k {
            positions.extend_from_slice(x);
            anchors.push(0.0);
        }
    }
    Ok(PopulationState {
        time: 0.0,
        epsilon: cfg.epsilon,
        motion: model.spatial.clone(),
        positions,
        anchors,
        event_count: 0,
        rng: PathRng::new(cfg.seed, path_id),
    })
}

/// Evolve the population to `t_target` by the thinned aggregate-clock
/// event scheme. On a capacity error the state is left at the time
/// reached, usable as a flagged partial result.
pub fn step_to(
    state: &mut PopulationState,
    t_target: f64,
    model: &ModelSpec,
    cfg: &SimConfig,
) -> Result<()> {
    let channels = Channels::build(model, cfg.epsilon)?;
    step_to_with(state, t_target, model, cfg, &channels)
}

pub(crate) fn step_to_with(
    state: &mut PopulationState,
    t_target: f64,
    model: &ModelSpec,
    cfg: &SimConfig,
    ch: &Channels,
) -> Result<()> {
    if t_target < state.time {
        return Err(Error::Domain(format!(
            "target time {t_target} precedes state time {}",
            state.time
        )));
    }
    let mech = &model.branching;
    let bounds = &mech.bounds;
    let epsilon = cfg.epsilon;
    loop {
        let n = state.len();
        if n == 0 || ch.total_bound == 0.0 {
            state.time = t_target;
            return Ok(());
        }
        let dt = state.rng.exponential(n as f64 * ch.total_bound);
        if state.time + dt >= t_target {
            state.time = t_target;
            return Ok(());
        }
        state.time += dt;
        state.event_count += 1;
        let j = state.rng.index(n);
        // channel selection within the per-particle bound budget
        let pick = if ch.spawn.is_empty() {
            0.0
        } else {
            state.rng.uniform() * ch.total_bound
        };
        if pick < ch.binary_bound {
            // binary channel
            let (accept, p2) = if ch.constant {
                (ch.binary_accept_const, ch.p2_const)
            } else {
                state.materialize(j, state.time);
                let x = state.position(j);
                let b = mech.b.eval(x);
                let beta = mech.beta.eval(x);
                let accept = beta * b / (bounds.beta_sup * bounds.b_sup);
                if accept > 1.0 + 1e-9 {
                    return Err(Error::Config(format!(
                        "declared bound sup(βb) violated at x = {x:?}"
                    )));
                }
                let p2 = if b > 0.0 {
                    0.5 + epsilon * mech.a_uncompensated(x) / (4.0 * b)
                } else {
                    f64::NAN
                };
                (accept.min(1.0), p2)
            };
            if accept < 1.0 && state.rng.uniform() >= accept {
                continue;
            }
            if !(0.0..=1.0).contains(&p2) {
                return Err(Error::Config(format!(
                    "offspring probability {p2} outside [0,1]; reduce epsilon below 2b/|a_q|"
                )));
            }
            if state.rng.uniform() < p2 {
                // split into two
                if n + 1 > cfg.max_particles {
                    return Err(Error::Capacity {
                        time_reached: state.time,
                        count: n,
                        cap: cfg.max_particles,
                    });
                }
                state.materialize(j, state.time);
                state.push_copy_of(j);
            } else {
                state.swap_remove(j);
            }
        } else {
            // spawn channels
            let mut acc = ch.binary_bound;
            for (i, &(rate, k)) in ch.spawn.iter().enumerate() {
                if pick < acc + rate {
                    let accept = if ch.constant {
                        ch.spawn_accept_const[i]
                    } else {
                        state.materialize(j, state.time);
                        let x = state.position(j);
                        let w = mech.atoms[i].weight.eval(x);
                        let beta = mech.beta.eval(x);
                        let a = beta * w / (bounds.beta_sup * bounds.atom_w_sup[i]);
                        if a > 1.0 + 1e-9 {
                            return Err(Error::Config(format!(
                                "declared bound sup(βw) violated at x = {x:?}"
                            )));
                        }
                        a.min(1.0)
                    };
                    if accept >= 1.0 || state.rng.uniform() < accept {
                        if n + k > cfg.max_particles {
                            return Err(Error::Capacity {
                                time_reached: state.time,
                                count: n,
                                cap: cfg.max_particles,
                            });
                        }
                        state.materialize(j, state.time);
                        for _ in 0..k {
                            state.push_copy_of(j);
                        }
                    }
                    break;
                }
                acc += rate;
            }
        }
    }
}

/// Per-path record of the observed functionals, written at the configured
/// observation times.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub path_id: u64,
    pub times: Vec<f64>,
    /// observable_values[j][k] = ⟨f_j, X_{t_k}⟩.
    pub observable_values: Vec<Vec<f64>>,
    /// W_t when spectral data is available, NaN otherwise.
    pub w_values: Vec<f64>,
    pub particle_counts: Vec<usize>,
    pub extinct: Vec<bool>,
    /// Set when the hard cap stopped the path: (time reached, count).
    pub truncated: Option<(f64, usize)>,
}

impl TrajectoryRecord {
    pub fn survives(&self) -> bool {
        self.extinct.last().map_or(false, |e| !e) && self.truncated.is_none()
    }
}

/// Run one path through the observation grid, recording every observable,
/// the martingale value and the particle count. Deterministic given
/// (cfg.seed, path_id). Capacity exhaustion flags the record and leaves
/// recorded prefixes intact.
pub fn simulate_path(
    model: &ModelSpec,
    cfg: &SimConfig,
    observables: &[TestFunction],
    sd: Option<&SpectralData>,
    path_id: u64,
) -> Result<TrajectoryRecord> {
    let channels = Channels::build(model, cfg.epsilon)?;
    let mut state = init_population(&model.initial, model, cfg, path_id)?;
    let mut record = TrajectoryRecord {
        path_id,
        times: Vec::with_capacity(cfg.observation_times.len()),
        observable_values: vec![Vec::with_capacity(cfg.observation_times.len()); observables.len()],
        w_values: Vec::with_capacity(cfg.observation_times.len()),
        particle_counts: Vec::with_capacity(cfg.observation_times.len()),
        extinct: Vec::with_capacity(cfg.observation_times.len()),
        truncated: None,
    };
    for &t in &cfg.observation_times {
        match step_to_with(&mut state, t, model, cfg, &channels) {
            Ok(()) => {}
            Err(Error::Capacity {
                time_reached,
                count,
                ..
            }) => {
                record.truncated = Some((time_reached, count));
                return Ok(record);
            }
            Err(e) => return Err(e),
        }
        record.times.push(t);
        for (j, f) in observables.iter().enumerate() {
            let v = state.functional(f);
            record.observable_values[j].push(v);
        }
        record.w_values.push(match sd {
            Some(sd) => state.martingale_value(sd),
            None => f64::NAN,
        });
        record.particle_counts.push(state.len());
        record.extinct.push(state.is_empty());
    }
    Ok(record)
}

/// Count-only fast path for ensembles whose observables, eigenfunction and
/// branching coefficients are all spatially constant: particle positions
/// then never enter any recorded quantity, and the mass process
/// (ε × a birth-death chain with the same channel rates) has exactly the
/// law of the full scheme's mass. Used by the experiment layer.
pub(crate) fn simulate_mass_path(
    model: &ModelSpec,
    cfg: &SimConfig,
    observables: &[TestFunction],
    sd: Option<&SpectralData>,
    path_id: u64,
) -> Result<TrajectoryRecord> {
    let ch = Channels::build(model, cfg.epsilon)?;
    debug_assert!(ch.constant);
    cfg.validate_for(model)?;
    let obs_consts: Vec<f64> = observables
        .iter()
        .map(|f| match f.field() {
            Some(Field::Const(v)) => *v,
            _ => f64::NAN,
        })
        .collect();
    let phi0_const = sd.map(|s| match &s.phi0 {
        Field::Const(v) => *v,
        _ => f64::NAN,
    });
    let mut n: usize = model
        .initial
        .atoms
        .iter()
        .map(|(_, m)| (m / cfg.epsilon).round() as usize)
        .sum();
    let mut rng = PathRng::new(cfg.seed, path_id);
    let mut time = 0.0;
    let mut event_count = 0u64;
    let mut record = TrajectoryRecord {
        path_id,
        times: Vec::with_capacity(cfg.observation_times.len()),
        observable_values: vec![Vec::with_capacity(cfg.observation_times.len()); observables.len()],
        w_values: Vec::with_capacity(cfg.observation_times.len()),
        particle_counts: Vec::with_capacity(cfg.observation_times.len()),
        extinct: Vec::with_capacity(cfg.observation_times.len()),
        truncated: None,
    };
    let single_channel = ch.spawn.is_empty();
    for &t_obs in &cfg.observation_times {
        'evolve: loop {
            if n == 0 || ch.total_bound == 0.0 {
                break 'evolve;
            }
            let dt = rng.exponential(n as f64 * ch.total_bound);
            if time + dt >= t_obs {
                break 'evolve;
            }
            time += dt;
            event_count += 1;
            let pick = if single_channel {
                0.0
            } else {
                rng.uniform() * ch.total_bound
            };
            if pick < ch.binary_bound {
                if ch.binary_accept_const < 1.0 && rng.uniform() >= ch.binary_accept_const {
                    continue;
                }
                if rng.uniform() < ch.p2_const {
                    n += 1;
                    if n > cfg.max_particles {
                        record.truncated = Some((time, n));
                        return Ok(record);
                    }
                } else {
                    n -= 1;
                }
            } else {
                let mut acc = ch.binary_bound;
                for (i, &(rate, k)) in ch.spawn.iter().enumerate() {
                    if pick < acc + rate {
                        let a = ch.spawn_accept_const[i];
                        if a >= 1.0 || rng.uniform() < a {
                            n += k;
                            if n > cfg.max_particles {
                                record.truncated = Some((time, n));
                                return Ok(record);
                            }
                        }
                        break;
                    }
                    acc += rate;
                }
            }
        }
        time = t_obs;
        let mass = cfg.epsilon * n as f64;
        record.times.push(t_obs);
        for (j, v) in obs_consts.iter().enumerate() {
            record.observable_values[j].push(v * mass);
        }
        record.w_values.push(match (sd, phi0_const) {
            (Some(s), Some(p)) => (-s.lambda0 * t_obs).exp() * p * mass,
            _ => f64::NAN,
        });
        record.particle_counts.push(n);
        record.extinct.push(n == 0);
    }
    let _ = event_count;
    Ok(record)
}

/// Whether an ensemble can run on the count-only engine.
pub(crate) fn mass_only_eligible(
    model: &ModelSpec,
    observables: &[TestFunction],
    sd: Option<&SpectralData>,
) -> bool {
    model.branching.is_spatially_constant()
        && observables
            .iter()
            .all(|f| matches!(f.field(), Some(Field::Const(_))))
        && sd.map_or(true, |s| matches!(s.phi0, Field::Const(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BranchingMechanism, InitialMeasure};
    use crate::spectral::registry_lookup;

    fn model(a: f64, b: f64, beta: f64) -> ModelSpec {
        ModelSpec {
            spatial: SpatialMotion::inward_ou(1.0, 1).unwrap(),
            branching: BranchingMechanism::quadratic(a, b, beta),
            initial: InitialMeasure::point_mass(vec![0.0], 1.0),
        }
    }

    fn cfg(epsilon: f64, times: &[f64]) -> SimConfig {
        SimConfig {
            epsilon,
            max_particles: 4_000_000,
            seed: 42,
            observation_times: times.to_vec(),
        }
    }

    #[test]
    fn init_population_counts() {
        let m = model(1.0, 1.0, 1.0);
        let c = cfg(0.01, &[1.0]);
        let state = init_population(&m.initial, &m, &c, 0).unwrap();
        assert_eq!(state.len(), 100);
        assert!((state.total_mass() - 1.0).abs() < 1e-12);

        let mut two_atoms = m.clone();
        two_atoms.initial = InitialMeasure {
            atoms: vec![(vec![0.0], 0.5), (vec![1.0], 0.5)],
        };
        let c = cfg(0.25, &[1.0]);
        let state = init_population(&two_atoms.initial, &two_atoms, &c, 0).unwrap();
        assert_eq!(state.len(), 4);

        // incommensurable mass
        let mut bad = m.clone();
        bad.initial = InitialMeasure::point_mass(vec![0.0], 0.3);
        assert!(matches!(
            init_population(&bad.initial, &bad, &cfg(0.2, &[1.0]), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn epsilon_admissibility() {
        // a_q/b large: epsilon must satisfy ε ≤ 2b/|a_q|
        let m = model(8.0, 0.5, 1.0);
        let c = cfg(0.5, &[1.0]);
        let err = c.validate_for(&m).unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("2b/|a_q|"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(cfg(0.1, &[1.0]).validate_for(&m).is_ok());
    }

    #[test]
    fn zero_branching_preserves_mass_and_law() {
        // a = b = 0, no atoms: no events fire; mass constant; positions
        // follow the pure OU law (KS test at 1%)
        let m = model(0.0, 0.0, 1.0);
        let c = cfg(0.05, &[0.7]);
        let mut samples = Vec::new();
        for path in 0..500 {
            let mut state = init_population(&m.initial, &m, &c, path).unwrap();
            step_to(&mut state, 0.7, &m, &c).unwrap();
            assert_eq!(state.len(), 20);
            assert_eq!(state.event_count, 0);
            state.materialize_all();
            for i in 0..state.len() {
                samples.push(state.position(i)[0]);
            }
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sd = m.spatial.transition_variance(0.7).sqrt();
        let d = crate::stats::ks_statistic(&samples, |v| crate::stats::normal_cdf(v / sd));
        // positions within one path share ancestry here (no branching), so
        // they are independent; 10^4 draws at the 1% level
        assert!(
            d < crate::stats::ks_critical_1pct(samples.len()),
            "KS = {d}"
        );
    }

    #[test]
    fn mean_and_variance_match_oracles_small_scale() {
        // β=a=b=1, ε=0.05, t=1: E mass = e, Var = 2e²(1-1/e)
        let m = model(1.0, 1.0, 1.0);
        let c = cfg(0.05, &[1.0]);
        let n_paths = 4000;
        let mut masses = Vec::with_capacity(n_paths);
        for path in 0..n_paths {
            let mut state = init_population(&m.initial, &m, &c, path as u64).unwrap();
            step_to(&mut state, 1.0, &m, &c).unwrap();
            masses.push(state.total_mass());
        }
        let mean = crate::stats::mean(&masses);
        let se = crate::stats::standard_error(&masses);
        let target = std::f64::consts::E;
        assert!(
            (mean - target).abs() < 3.0 * se,
            "mean {mean} vs {target} (se {se})"
        );
        let var = crate::stats::sample_variance(&masses);
        let var_target = 2.0 * (2.0f64).exp() * (1.0 - (-1.0f64).exp());
        let var_se = crate::stats::variance_standard_error(&masses);
        assert!(
            (var - var_target).abs() < 4.0 * var_se,
            "var {var} vs {var_target} (se {var_se})"
        );
    }

    #[test]
    fn mass_only_engine_matches_spatial_engine_in_law() {
        // same model, same number of paths: the two engines must agree on
        // the mass distribution within Monte Carlo error
        let m = model(1.0, 1.0, 1.0);
        let c = cfg(0.05, &[1.0]);
        let one = [TestFunction::constant(1.0)];
        let sd = registry_lookup(&m).unwrap();
        let n_paths = 3000;
        let (mut spatial, mut mass) = (Vec::new(), Vec::new());
        for path in 0..n_paths {
            let r = simulate_path(&m, &c, &one, Some(&sd), path).unwrap();
            spatial.push(r.observable_values[0][0]);
            let r = simulate_mass_path(&m, &c, &one, Some(&sd), path + n_paths).unwrap();
            mass.push(r.observable_values[0][0]);
        }
        let (m1, m2) = (crate::stats::mean(&spatial), crate::stats::mean(&mass));
        let se = (crate::stats::standard_error(&spatial).powi(2)
            + crate::stats::standard_error(&mass).powi(2))
        .sqrt();
        assert!((m1 - m2).abs() < 3.5 * se, "{m1} vs {m2} (se {se})");
        let (v1, v2) = (
            crate::stats::sample_variance(&spatial),
            crate::stats::sample_variance(&mass),
        );
        let vse = (crate::stats::variance_standard_error(&spatial).powi(2)
            + crate::stats::variance_standard_error(&mass).powi(2))
        .sqrt();
        assert!((v1 - v2).abs() < 4.0 * vse, "{v1} vs {v2} (se {vse})");
    }

    #[test]
    fn spawn_channel_moments() {
        // atoms only: a=0.4, b=0.3, one atom (w=0.5, y=0.2), ε=0.05 makes
        // k=4 exact; mean e^{0.4t}, variance from the closed form with
        // A = 2βb + βw y²
        let mut m = model(0.4, 0.3, 1.0);
        m.branching = BranchingMechanism {
            a: Field::constant(0.4),
            b: Field::constant(0.3),
            atoms: vec![crate::model::JumpAtom {
                weight: Field::constant(0.5),
                size: 0.2,
            }],
            beta: Field::constant(1.0),
            bounds: crate::model::DeclaredBounds::for_constants(0.4, 0.3, 1.0, &[0.5]),
        };
        let c = cfg(0.05, &[1.0]);
        let n_paths = 4000;
        let mut masses = Vec::with_capacity(n_paths);
        for path in 0..n_paths {
            let mut state = init_population(&m.initial, &m, &c, path as u64).unwrap();
            step_to(&mut state, 1.0, &m, &c).unwrap();
            masses.push(state.total_mass());
        }
        let alpha = 0.4;
        let big_a = 2.0 * 0.3 + 0.5 * 0.04;
        let mean_target = (alpha * 1.0f64).exp();
        let var_target =
            big_a * (2.0 * alpha * 1.0f64).exp() * (1.0 - (-alpha * 1.0f64).exp()) / alpha;
        let mean = crate::stats::mean(&masses);
        let se = crate::stats::standard_error(&masses);
        assert!(
            (mean - mean_target).abs() < 3.0 * se,
            "mean {mean} vs {mean_target}"
        );
        let var = crate::stats::sample_variance(&masses);
        let var_se = crate::stats::variance_standard_error(&masses);
        assert!(
            (var - var_target).abs() < 4.0 * var_se,
            "var {var} vs {var_target} (se {var_se})"
        );
    }

    #[test]
    fn variable_quadratic_coefficient_thinning() {
        // b(x) = 0.5 + 0.3 e^{-x²} exercises positional thinning and the
        // position-dependent offspring probability; the mean is unaffected
        // by b and the variance must match the nested-quadrature oracle.
        let mut m = model(1.0, 1.0, 1.0);
        m.branching = BranchingMechanism {
            a: Field::constant(1.0),
            b: Field::Sum(vec![
                Field::constant(0.5),
                Field::gaussian(0.3, 1.0, vec![0.0]),
            ]),
            atoms: vec![],
            beta: Field::constant(1.0),
            bounds: crate::model::DeclaredBounds {
                a_abs: 1.0,
                b_sup: 0.8,
                beta_sup: 1.0,
                atom_w_sup: vec![],
            },
        };
        let c = cfg(0.05, &[1.0]);
        let n_paths = 4000;
        let mut masses = Vec::with_capacity(n_paths);
        for path in 0..n_paths {
            let mut state = init_population(&m.initial, &m, &c, path as u64).unwrap();
            step_to(&mut state, 1.0, &m, &c).unwrap();
            masses.push(state.total_mass());
        }
        let mean = crate::stats::mean(&masses);
        let se = crate::stats::standard_error(&masses);
        assert!(
            (mean - std::f64::consts::E).abs() < 3.0 * se,
            "mean {mean} vs e (se {se})"
        );
        let quad = crate::quad::QuadCtx::new(&crate::quad::QuadratureSpec::default());
        let one = TestFunction::constant(1.0);
        let var_target = crate::semigroup::variance_oracle(&m, 1.0, &one, &[0.0], &quad).unwrap();
        let var = crate::stats::sample_variance(&masses);
        let var_se = crate::stats::variance_standard_error(&masses);
        assert!(
            (var - var_target).abs() < 4.0 * var_se,
            "var {var} vs {var_target} (se {var_se})"
        );
    }

    #[test]
    fn martingale_mean_is_one() {
        let m = model(1.0, 1.0, 1.0);
        let sd = registry_lookup(&m).unwrap();
        let c = cfg(0.05, &[0.5, 1.5]);
        let n_paths = 3000;
        let mut w_half = Vec::new();
        let mut w_final = Vec::new();
        for path in 0..n_paths {
            let r = simulate_path(&m, &c, &[], Some(&sd), path as u64).unwrap();
            w_half.push(r.w_values[0]);
            w_final.push(r.w_values[1]);
        }
        for (ws, t) in [(&w_half, 0.5), (&w_final, 1.5)] {
            let mean = crate::stats::mean(ws);
            let se = crate::stats::standard_error(ws);
            assert!(
                (mean - 1.0).abs() < 3.0 * se,
                "t={t}: E W = {mean} (se {se})"
            );
        }
    }

    #[test]
    fn reproducibility_bitwise() {
        let m = model(1.0, 1.0, 1.0);
        let c = cfg(0.02, &[0.5, 1.0]);
        let obs = [
            TestFunction::constant(1.0),
            TestFunction::indicator_interval(-1.0, 1.0),
        ];
        let sd = registry_lookup(&m).unwrap();
        let a = simulate_path(&m, &c, &obs, Some(&sd), 7).unwrap();
        let b = simulate_path(&m, &c, &obs, Some(&sd), 7).unwrap();
        assert_eq!(a.observable_values, b.observable_values);
        assert_eq!(a.w_values, b.w_values);
        assert_eq!(a.particle_counts, b.particle_counts);
        // a different path index decorrelates
        let c2 = simulate_path(&m, &c, &obs, Some(&sd), 8).unwrap();
        assert_ne!(a.observable_values, c2.observable_values);
    }

    #[test]
    fn capacity_policy_flags_partial_record() {
        let m = model(1.0, 1.0, 1.0);
        let mut c = cfg(0.01, &[1.0, 6.0]);
        c.max_particles = 500;
        // surviving paths (≈ 63% of them) must hit the cap well before t=6
        let mut truncations = 0;
        for path in 0..20 {
            let r = simulate_path(&m, &c, &[], None, path).unwrap();
            if let Some((t, count)) = r.truncated {
                truncations += 1;
                assert!(t < 6.0);
                assert!(count >= 500);
                assert!(!r.survives());
            } else {
                // no truncation means the path died out
                assert!(*r.extinct.last().unwrap());
            }
        }
        assert!(
            truncations >= 5,
            "only {truncations} truncations in 20 paths"
        );
    }

    #[test]
    fn extinct_population_stays_extinct() {
        // strongly subcritical: a = -2 drives mass to zero fast
        let m = model(-2.0, 1.0, 1.0);
        let c = cfg(0.25, &[4.0, 8.0]);
        let mut extinct_seen = 0;
        for path in 0..50 {
            let r = simulate_path(&m, &c, &[], None, path).unwrap();
            if r.extinct[0] {
                extinct_seen += 1;
                assert!(r.extinct[1], "extinction must be absorbing");
                assert_eq!(r.particle_counts[1], 0);
            }
        }
        assert!(
            extinct_seen > 25,
            "only {extinct_seen} extinctions observed"
        );
    }

    #[test]
    fn functional_edge_cases() {
        let m = model(0.0, 0.0, 1.0);
        let c = cfg(0.5, &[1.0]);
        let mut state = init_population(&m.initial, &m, &c, 0).unwrap();
        // W_0 = <phi0, mu> = 1 for unit initial mass
        let sd = registry_lookup(&m).unwrap();
        assert!((state.martingale_value(&sd) - 1.0).abs() < 1e-12);
        // f ≡ 1 gives total mass; indicator at the start point too
        let one = TestFunction::constant(1.0);
        assert!((state.functional(&one) - 1.0).abs() < 1e-12);
        let ind = TestFunction::indicator_interval(-0.5, 0.5);
        assert!((state.functional(&ind) - 1.0).abs() < 1e-12);
        // empty population: zero for every f
        let mut empty = state.clone();
        while !empty.is_empty() {
            empty.swap_remove(0);
        }
        assert_eq!(empty.functional(&one), 0.0);
        // time is nondecreasing under evolution
        step_to(&mut state, 0.5, &m, &c).unwrap();
        assert!(matches!(
            step_to(&mut state, 0.2, &m, &c),
            Err(Error::Domain(_))
        ));
    }
}
