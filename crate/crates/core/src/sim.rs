//! Fixed-step simulation of a scheduled vehicle plant against a bank of
//! vertex models, with per-step inclusion test and weight estimation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearSystem, ParameterVector};
use crate::tying::VertexModelSet;
use crate::vehicle::{build_vehicle_system, SignConvention, VehicleParams, UNCERTAIN_PARAMETERS};
use crate::weights::{
    estimate_state, inclusion_criterion, solve_weights, ErrorMatrix, InclusionStatus, SimplexWeights,
    DEFAULT_REGULARIZATION,
};

/// Index of the yaw rate in the state vector.
pub const YAW_CHANNEL: usize = 1;
pub const DEFAULT_DEADBAND_FACTOR: f64 = 1e-9;

/// One classical Runge-Kutta step of `x' = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Front steering angle as a function of time; amplitudes in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SteeringProfile {
    Sine { amplitude_deg: f64, frequency_hz: f64 },
    Step { amplitude_deg: f64, at: f64 },
    /// Linear chirp from `f0_hz` at t = 0 to `f1_hz` at `sweep_time`.
    SweptSine { amplitude_deg: f64, f0_hz: f64, f1_hz: f64, sweep_time: f64 },
}

impl Default for SteeringProfile {
    fn default() -> Self {
        SteeringProfile::Sine {
            amplitude_deg: 2.0,
            frequency_hz: 0.5,
        }
    }
}

impl SteeringProfile {
    /// Steering angle in radians.
    pub fn angle(&self, t: f64) -> f64 {
        let deg = PI / 180.0;
        match *self {
            SteeringProfile::Sine {
                amplitude_deg,
                frequency_hz,
            } => amplitude_deg * deg * (2.0 * PI * frequency_hz * t).sin(),
            SteeringProfile::Step { amplitude_deg, at } => {
                if t >= at {
                    amplitude_deg * deg
                } else {
                    0.0
                }
            }
            SteeringProfile::SweptSine {
                amplitude_deg,
                f0_hz,
                f1_hz,
                sweep_time,
            } => {
                let rate = (f1_hz - f0_hz) / sweep_time;
                amplitude_deg * deg * (2.0 * PI * (f0_hz * t + 0.5 * rate * t * t)).sin()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SteeringProfile::Sine {
                amplitude_deg,
                frequency_hz,
            } => amplitude_deg.is_finite() && frequency_hz.is_finite() && frequency_hz >= 0.0,
            SteeringProfile::Step { amplitude_deg, at } => amplitude_deg.is_finite() && at.is_finite(),
            SteeringProfile::SweptSine {
                amplitude_deg,
                f0_hz,
                f1_hz,
                sweep_time,
            } => {
                amplitude_deg.is_finite()
                    && f0_hz.is_finite()
                    && f1_hz.is_finite()
                    && sweep_time.is_finite()
                    && sweep_time > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!("bad steering profile {self:?}")))
        }
    }
}

/// Time course of one uncertain parameter, in its own units (angles in radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterTrajectory {
    Constant { value: f64 },
    /// Holds `values[k]` from `times[k]` on; `values[0]` before `times[0]`.
    Piecewise { times: Vec<f64>, values: Vec<f64> },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear from `from` at `t0` to `to` at `t1`, constant outside.
    Ramp { from: f64, to: f64, t0: f64, t1: f64 },
}

impl ParameterTrajectory {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            ParameterTrajectory::Constant { value } => *value,
            ParameterTrajectory::Piecewise { times, values } => {
                let idx = times.iter().rposition(|&s| t >= s).unwrap_or(0);
                values[idx]
            }
            ParameterTrajectory::Sinusoid {
                mean,
                amplitude,
                frequency_hz,
                phase,
            } => mean + amplitude * (2.0 * PI * frequency_hz * t + phase).sin(),
            ParameterTrajectory::Ramp { from, to, t0, t1 } => {
                if t <= *t0 {
                    *from
                } else if t >= *t1 {
                    *to
                } else {
                    from + (to - from) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ParameterTrajectory::Constant { value } => value.is_finite(),
            ParameterTrajectory::Piecewise { times, values } => {
                !times.is_empty()
                    && times.len() == values.len()
                    && times.windows(2).all(|w| w[0] < w[1])
                    && times.iter().chain(values).all(|v| v.is_finite())
            }
            ParameterTrajectory::Sinusoid {
                mean,
                amplitude,
                frequency_hz,
                phase,
            } => [mean, amplitude, frequency_hz, phase].iter().all(|v| v.is_finite()),
            ParameterTrajectory::Ramp { from, to, t0, t1 } => {
                [from, to, t0, t1].iter().all(|v| v.is_finite()) && t1 > t0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!("bad parameter trajectory {self:?}")))
        }
    }
}

/// How the plant's matrices evolve over the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSchedule {
    /// Uncertain parameters follow the given trajectories; unlisted ones stay
    /// at their values in the scenario's vehicle parameters.
    Parameters {
        #[serde(default)]
        trajectories: BTreeMap<String, ParameterTrajectory>,
    },
    /// Plant matrices are the fixed convex combination `sum w_i (A_i, B_i)`
    /// of the vertex models.
    Mixture { weights: Vec<f64> },
}

impl Default for PlantSchedule {
    fn default() -> Self {
        PlantSchedule::Parameters {
            trajectories: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Constant longitudinal speed (m/s); overrides the vehicle's `u`.
    pub speed: f64,
    pub steering: SteeringProfile,
    pub horizon: f64,
    pub step: f64,
    pub plant: PlantSchedule,
    /// Bound of a uniform disturbance added to the plant's steering input (degrees).
    pub disturbance_deg: f64,
    pub seed: u64,
    /// Defaults to the standard-sign variant, whose open-loop dynamics are stable.
    pub vehicle: VehicleParams,
    pub regularization: f64,
    pub deadband_factor: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            speed: 50.0 / 3.6,
            steering: SteeringProfile::default(),
            horizon: 10.0,
            step: 1e-3,
            plant: PlantSchedule::default(),
            disturbance_deg: 0.0,
            seed: 0,
            vehicle: VehicleParams {
                sign: SignConvention::Standard,
                ..VehicleParams::default()
            },
            regularization: DEFAULT_REGULARIZATION,
            deadband_factor: DEFAULT_DEADBAND_FACTOR,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidScenario(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= 10.0 * self.step) || !self.horizon.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "horizon {} is shorter than ten steps of {}",
                self.horizon, self.step
            )));
        }
        if !(self.disturbance_deg >= 0.0) || !self.disturbance_deg.is_finite() {
            return Err(Error::InvalidScenario("disturbance bound must be >= 0".into()));
        }
        if !(self.deadband_factor >= 0.0) || !(self.regularization >= 0.0) {
            return Err(Error::InvalidScenario("deadband and regularization must be >= 0".into()));
        }
        self.steering.validate()?;
        if let PlantSchedule::Parameters { trajectories } = &self.plant {
            for (name, traj) in trajectories {
                if !UNCERTAIN_PARAMETERS.contains(&name.as_str()) {
                    return Err(Error::InvalidScenario(format!(
                        "unknown parameter {name:?}; expected one of {UNCERTAIN_PARAMETERS:?}"
                    )));
                }
                traj.validate()?;
            }
        }
        self.vehicle_at_speed().validate()
    }

    /// The scenario's vehicle parameters with `u` set to the scenario speed.
    pub fn vehicle_at_speed(&self) -> VehicleParams {
        VehicleParams {
            u: self.speed,
            ..self.vehicle.clone()
        }
    }

    /// Number of integration steps covering the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub steering: f64,
    pub plant: DVector<f64>,
    pub models: Vec<DVector<f64>>,
    pub estimate: DVector<f64>,
    pub weights: SimplexWeights,
    pub inclusion: InclusionStatus,
    /// `||E w||` on the observed channel.
    pub residual: f64,
    /// `||E||_F` on the observed channel.
    pub error_norm: f64,
    pub deadband: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub samples: Vec<TraceSample>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, status: InclusionStatus) -> usize {
        self.samples.iter().filter(|s| s.inclusion == status).count()
    }

    /// Root mean square of state component `k` of the plant.
    pub fn plant_rms(&self, k: usize) -> f64 {
        rms(self.samples.iter().map(|s| s.plant[k]))
    }

    /// Root mean square of the estimation error in component `k`.
    pub fn estimate_rmse(&self, k: usize) -> f64 {
        rms(self.samples.iter().map(|s| s.estimate[k] - s.plant[k]))
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimulationError {
    Setup(Error),
    /// A state became non-finite at time `t`; `partial` holds every sample before it.
    Diverged { t: f64, partial: SimulationTrace },
}

impl std::fmt::Display for SimulationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimulationError::Setup(e) => write!(f, "{e}"),
            SimulationError::Diverged { t, partial } => write!(
                f,
                "state diverged at t = {t:.6} s after {} recorded samples",
                partial.len()
            ),
        }
    }
}

impl std::error::Error for SimulationError {}

impl From<Error> for SimulationError {
    fn from(e: Error) -> Self {
        SimulationError::Setup(e)
    }
}

enum Plant {
    Scheduled {
        base: VehicleParams,
        trajectories: Vec<(usize, ParameterTrajectory)>,
    },
    Fixed(LinearSystem),
}

impl Plant {
    fn system(&self, t: f64) -> Result<LinearSystem> {
        match self {
            Plant::Fixed(sys) => Ok(sys.clone()),
            Plant::Scheduled { base, trajectories } => {
                let mut m = base.uncertain().values().to_vec();
                for (idx, traj) in trajectories {
                    m[*idx] = traj.value(t);
                }
                build_vehicle_system(&base.with_uncertain(&ParameterVector::new(m)))
            }
        }
    }
}

fn mixture_system(models: &VertexModelSet, weights: &[f64]) -> Result<LinearSystem> {
    let w = SimplexWeights::new(weights.to_vec())?;
    if w.len() != models.len() {
        return Err(Error::InvalidScenario(format!(
            "mixture has {} weights for {} models",
            w.len(),
            models.len()
        )));
    }
    let first = &models.systems[0];
    let mut a = DMatrix::zeros(first.n(), first.n());
    let mut b = DMatrix::zeros(first.n(), first.inputs());
    for (sys, wi) in models.systems.iter().zip(w.values()) {
        a += sys.a() * *wi;
        b += sys.b() * *wi;
    }
    LinearSystem::new(a, b)
}

fn linear_rhs(sys: &LinearSystem, x: &DVector<f64>, u: f64) -> DVector<f64> {
    sys.a() * x + sys.b().column(0) * u
}

/// Runs the scenario with every state starting at zero.
pub fn simulate_scenario(sc: &Scenario, models: &VertexModelSet) -> std::result::Result<SimulationTrace, SimulationError> {
    sc.validate()?;
    if models.len() < 2 {
        return Err(Error::InvalidScenario(format!("need at least two models, got {}", models.len())).into());
    }
    if models.systems.iter().any(|s| s.n() != 4 || s.inputs() != 1) {
        return Err(Error::DimensionMismatch("vertex models must be 4-state, single-input".into()).into());
    }
    let plant = match &sc.plant {
        PlantSchedule::Mixture { weights } => Plant::Fixed(mixture_system(models, weights)?),
        PlantSchedule::Parameters { trajectories } => Plant::Scheduled {
            base: sc.vehicle_at_speed(),
            trajectories: trajectories
                .iter()
                .map(|(name, traj)| {
                    let idx = UNCERTAIN_PARAMETERS.iter().position(|p| p == name).expect("validated");
                    (idx, traj.clone())
                })
                .collect(),
        },
    };
    let fixed = match &plant {
        Plant::Fixed(sys) => Some(sys.clone()),
        Plant::Scheduled { .. } => None,
    };

    let h = sc.step;
    let steps = sc.steps();
    let n_models = models.len();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut x_p = DVector::zeros(4);
    let mut x_m: Vec<DVector<f64>> = vec![DVector::zeros(4); n_models];
    let mut w = SimplexWeights::uniform(n_models);
    let mut yaw_sq_sum = 0.0;
    let mut trace = SimulationTrace::default();
    trace.samples.reserve(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * h;
        let delta = sc.steering.angle(t);

        yaw_sq_sum += x_p[YAW_CHANNEL] * x_p[YAW_CHANNEL];
        let running_rms = (yaw_sq_sum / (k + 1) as f64).sqrt();
        let row: Vec<f64> = x_m.iter().map(|x| x[YAW_CHANNEL] - x_p[YAW_CHANNEL]).collect();
        let e = ErrorMatrix::from_row(&row, t)?;
        let deadband = sc.deadband_factor * running_rms;
        let verdict = inclusion_criterion(&e, deadband);
        let sol = solve_weights(&e, sc.regularization, Some(&w))?;
        w = sol.weights;
        let estimate = estimate_state(&x_m, &w)?;
        trace.samples.push(TraceSample {
            t,
            steering: delta,
            plant: x_p.clone(),
            models: x_m.clone(),
            estimate,
            weights: w.clone(),
            inclusion: verdict.status,
            residual: sol.residual,
            error_norm: e.matrix().norm(),
            deadband,
        });
        if k == steps {
            break;
        }

        let disturbance = if sc.disturbance_deg > 0.0 {
            rng.gen_range(-1.0..=1.0) * sc.disturbance_deg * PI / 180.0
        } else {
            0.0
        };
        let input = |s: f64| sc.steering.angle(s);
        x_p = match &fixed {
            Some(sys) => rk4_step(|s, x| linear_rhs(sys, x, input(s) + disturbance), t, &x_p, h),
            None => {
                let stages = [plant.system(t)?, plant.system(t + 0.5 * h)?, plant.system(t + h)?];
                rk4_step(
                    |s, x| {
                        let sys = if s == t {
                            &stages[0]
                        } else if s == t + h {
                            &stages[2]
                        } else {
                            &stages[1]
                        };
                        linear_rhs(sys, x, input(s) + disturbance)
                    },
                    t,
                    &x_p,
                    h,
                )
            }
        };
        for (x, sys) in x_m.iter_mut().zip(&models.systems) {
            *x = rk4_step(|s, x| linear_rhs(sys, x, input(s)), t, x, h);
        }
        let finite = x_p.iter().chain(x_m.iter().flat_map(|x| x.iter())).all(|v| v.is_finite());
        if !finite {
            return Err(SimulationError::Diverged {
                t: t + h,
                partial: trace,
            });
        }
    }
    Ok(trace)
}

/// Plant-only trajectory of a scenario, used to check integration order.
pub fn simulate_plant(sc: &Scenario) -> Result<Vec<DVector<f64>>> {
    sc.validate()?;
    let base = sc.vehicle_at_speed();
    let trajectories: Vec<(usize, ParameterTrajectory)> = match &sc.plant {
        PlantSchedule::Parameters { trajectories } => trajectories
            .iter()
            .map(|(name, traj)| {
                let idx = UNCERTAIN_PARAMETERS.iter().position(|p| p == name).expect("validated");
                (idx, traj.clone())
            })
            .collect(),
        PlantSchedule::Mixture { .. } => {
            return Err(Error::InvalidScenario("mixture plants need a model set".into()));
        }
    };
    let plant = Plant::Scheduled { base, trajectories };
    let h = sc.step;
    let mut x = DVector::zeros(4);
    let mut out = vec![x.clone()];
    for k in 0..sc.steps() {
        let t = k as f64 * h;
        let stages = [plant.system(t)?, plant.system(t + 0.5 * h)?, plant.system(t + h)?];
        x = rk4_step(
            |s, x| {
                let sys = if s == t {
                    &stages[0]
                } else if s == t + h {
                    &stages[2]
                } else {
                    &stages[1]
                };
                linear_rhs(sys, x, sc.steering.angle(s))
            },
            t,
            &x,
            h,
        );
        out.push(x.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Corner;
    use crate::vehicle::make_uncertain_vehicle;

    fn standard_vehicle() -> VehicleParams {
        VehicleParams {
            sign: SignConvention::Standard,
            ..VehicleParams::default()
        }
    }

    fn two_models(vp: &VehicleParams) -> VertexModelSet {
        let ps = make_uncertain_vehicle(vp).unwrap();
        let corners = vec![Corner::from_index(6, 0), Corner::from_index(6, 63)];
        let systems = corners.iter().map(|c| ps.eval_at_corner(c).unwrap()).collect();
        VertexModelSet::from_systems(corners, systems, 1e-10).unwrap()
    }

    #[test]
    fn rk4_is_exact_for_cubic_time() {
        // x' = 3 t^2 integrates exactly to t^3
        let x = rk4_step(|t, _| DVector::from_element(1, 3.0 * t * t), 1.0, &DVector::from_element(1, 1.0), 0.5);
        assert!((x[0] - 1.5f64.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn zero_input_gives_zero_trace() {
        let vp = standard_vehicle();
        let sc = Scenario {
            steering: SteeringProfile::Sine {
                amplitude_deg: 0.0,
                frequency_hz: 0.5,
            },
            horizon: 0.5,
            vehicle: vp.clone(),
            ..Scenario::default()
        };
        let trace = simulate_scenario(&sc, &two_models(&vp)).unwrap();
        for s in &trace.samples {
            assert!(s.plant.iter().chain(s.estimate.iter()).all(|v| *v == 0.0));
            assert_eq!(s.inclusion, InclusionStatus::Boundary);
        }
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let base = Scenario {
            horizon: 2.0,
            vehicle: standard_vehicle(),
            plant: PlantSchedule::Parameters {
                trajectories: [(
                    "C_af".to_string(),
                    ParameterTrajectory::Sinusoid {
                        mean: 80400.0,
                        amplitude: 15000.0,
                        frequency_hz: 0.7,
                        phase: 0.0,
                    },
                )]
                .into_iter()
                .collect(),
            },
            ..Scenario::default()
        };
        let run = |h: f64| {
            let xs = simulate_plant(&Scenario { step: h, ..base.clone() }).unwrap();
            xs.last().unwrap().clone()
        };
        let h = 0.02;
        let coarse = run(h);
        let fine = run(h / 2.0);
        let reference = run(h / 4.0);
        let ratio = (coarse - &reference).amax() / (fine - &reference).amax();
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn vertex_plant_pins_weight() {
        let vp = standard_vehicle();
        let models = two_models(&vp);
        let sc = Scenario {
            horizon: 2.0,
            vehicle: vp,
            plant: PlantSchedule::Mixture { weights: vec![1.0, 0.0] },
            ..Scenario::default()
        };
        let trace = simulate_scenario(&sc, &models).unwrap();
        for s in trace.samples.iter().filter(|s| s.t >= 1.0) {
            assert!((s.weights.values()[0] - 1.0).abs() <= 1e-3, "{:?}", s.weights);
        }
    }

    #[test]
    fn divergence_keeps_partial_trace() {
        let vp = VehicleParams::default();
        let models = two_models(&vp);
        let sc = Scenario {
            horizon: 200.0,
            step: 0.01,
            vehicle: vp,
            ..Scenario::default()
        };
        match simulate_scenario(&sc, &models) {
            Err(SimulationError::Diverged { t, partial }) => {
                assert!(t > 0.0 && t < 200.0);
                assert!(!partial.is_empty());
                assert!(partial.samples.iter().all(|s| s.plant.iter().all(|v| v.is_finite())));
            }
            other => panic!("expected divergence, got {:?}", other.map(|t| t.len())),
        }
    }

    #[test]
    fn rejects_bad_scenarios() {
        let models = two_models(&standard_vehicle());
        let short = Scenario {
            horizon: 0.005,
            ..Scenario::default()
        };
        assert!(matches!(
            simulate_scenario(&short, &models),
            Err(SimulationError::Setup(Error::InvalidScenario(_)))
        ));
        let unknown = Scenario {
            plant: PlantSchedule::Parameters {
                trajectories: [("mass".to_string(), ParameterTrajectory::Constant { value: 1.0 })]
                    .into_iter()
                    .collect(),
            },
            ..Scenario::default()
        };
        assert!(simulate_scenario(&unknown, &models).is_err());
    }

    #[test]
    fn trajectories_evaluate() {
        let p = ParameterTrajectory::Piecewise {
            times: vec![0.0, 1.0, 2.0],
            values: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(p.value(-1.0), 1.0);
        assert_eq!(p.value(1.5), 2.0);
        assert_eq!(p.value(5.0), 3.0);
        let r = ParameterTrajectory::Ramp {
            from: 0.0,
            to: 10.0,
            t0: 1.0,
            t1: 2.0,
        };
        assert_eq!(r.value(0.0), 0.0);
        assert_eq!(r.value(1.5), 5.0);
        assert_eq!(r.value(3.0), 10.0);
    }
}
