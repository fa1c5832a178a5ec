//! Fixed-step RK4 integration and the fixed-duration simulation loop.

use crate::dynamics::{eom_rhs, DynamicsError, ModelMatrices, VesselState};
use nalgebra::{SVector, Vector6};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Default integration step (s).
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("integration diverged at t = {t}: non-finite state {state:?}")]
    Diverged { t: f64, state: Box<VesselState> },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("trajectory output: {0}")]
    Io(#[from] std::io::Error),
}

/// Classical RK4 step for `x' = f(t, x)` on a fixed-size vector.
pub fn rk4<const N: usize, E>(
    mut f: impl FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
    t: f64,
    x: &SVector<f64, N>,
    h: f64,
) -> Result<SVector<f64, N>, E> {
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &(x + k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(x + k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(x + k3 * h))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn stack(state: &VesselState) -> SVector<f64, 12> {
    let mut x = SVector::<f64, 12>::zeros();
    x.fixed_rows_mut::<6>(0).copy_from(&state.eta);
    x.fixed_rows_mut::<6>(6).copy_from(&state.nu);
    x
}

fn unstack(x: &SVector<f64, 12>) -> VesselState {
    VesselState::new(x.fixed_rows::<6>(0).into(), x.fixed_rows::<6>(6).into())
}

/// Advance the 12-dimensional vessel state by one RK4 step.
///
/// `load_fn` is evaluated at the four stage points `(t, t+h/2, t+h/2, t+h)`.
/// Angles are wrapped after the step.
pub fn rk4_step(
    state: &VesselState,
    mut load_fn: impl FnMut(f64, &VesselState) -> Vector6<f64>,
    t: f64,
    dt: f64,
    mats: &ModelMatrices,
    current: &Vector6<f64>,
) -> Result<VesselState, IntegratorError> {
    let rhs = |ts: f64, x: &SVector<f64, 12>| -> Result<SVector<f64, 12>, IntegratorError> {
        let s = unstack(x);
        let tau = load_fn(ts, &s);
        let (eta_dot, nu_dot) = eom_rhs(&s, &tau, mats, current)?;
        let mut dx = SVector::<f64, 12>::zeros();
        dx.fixed_rows_mut::<6>(0).copy_from(&eta_dot);
        dx.fixed_rows_mut::<6>(6).copy_from(&nu_dot);
        if dx.iter().all(|v| v.is_finite()) {
            Ok(dx)
        } else {
            Err(IntegratorError::Diverged {
                t: ts,
                state: Box::new(s),
            })
        }
    };
    let next = unstack(&rk4(rhs, t, &stack(state), dt)?);
    if !next.is_finite() {
        return Err(IntegratorError::Diverged {
            t: t + dt,
            state: Box::new(next),
        });
    }
    Ok(next.wrapped())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub initial: VesselState,
    /// Controller is re-evaluated every `control_every` integration steps.
    pub control_every: usize,
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64, initial: VesselState) -> Self {
        Self {
            dt,
            duration,
            initial,
            control_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(IntegratorError::InvalidConfig(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(IntegratorError::InvalidConfig(format!(
                "duration must be >= 0, got {}",
                self.duration
            )));
        }
        if self.control_every == 0 {
            return Err(IntegratorError::InvalidConfig(
                "control_every must be >= 1".into(),
            ));
        }
        if !self.initial.is_finite() {
            return Err(IntegratorError::InvalidConfig(
                "initial state must be finite".into(),
            ));
        }
        let steps = self.duration / self.dt;
        if steps > u32::MAX as f64 {
            return Err(IntegratorError::InvalidConfig(format!(
                "duration / dt = {steps} exceeds the step counter"
            )));
        }
        Ok(())
    }

    /// `ceil(duration / dt)`, tolerant to round-off in the ratio.
    pub fn step_count(&self) -> usize {
        step_count(self.duration, self.dt)
    }
}

pub(crate) fn step_count(duration: f64, dt: f64) -> usize {
    let ratio = duration / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// One logged sample: state at `t` and the load held over `[t, t + dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: VesselState,
    pub tau: Vector6<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

pub const TRAJECTORY_COLUMNS: [&str; 16] = [
    "t", "x", "y", "z", "phi", "theta", "psi", "u", "v", "w", "p", "q", "r", "tau_x", "tau_y",
    "tau_n",
];

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IntegratorError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRAJECTORY_COLUMNS).map_err(csv_io)?;
        for s in &self.samples {
            let mut row = Vec::with_capacity(16);
            row.push(s.t.to_string());
            row.extend(s.state.eta.iter().map(f64::to_string));
            row.extend(s.state.nu.iter().map(f64::to_string));
            row.extend([s.tau[0], s.tau[1], s.tau[5]].iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), IntegratorError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn csv_io(e: csv::Error) -> IntegratorError {
    IntegratorError::Io(std::io::Error::other(e))
}

/// Stepping plant: the controller's load is held constant over each step
/// while an optional environmental load may vary with time.
#[derive(Debug, Clone)]
pub struct Plant<'a> {
    pub mats: &'a ModelMatrices,
    pub current: Vector6<f64>,
    pub state: VesselState,
    pub t: f64,
    pub dt: f64,
    steps: usize,
}

impl<'a> Plant<'a> {
    pub fn new(mats: &'a ModelMatrices, current: Vector6<f64>, initial: VesselState, dt: f64) -> Self {
        Self {
            mats,
            current,
            state: initial,
            t: 0.0,
            dt,
            steps: 0,
        }
    }

    /// Integrate one step with `control` held (zero-order hold) and
    /// `environment(t)` added at every stage.
    pub fn step(
        &mut self,
        control: &Vector6<f64>,
        environment: Option<&dyn Fn(f64) -> Vector6<f64>>,
    ) -> Result<&VesselState, IntegratorError> {
        let held = *control;
        let next = match environment {
            Some(env) => rk4_step(
                &self.state,
                |ts, _| held + env(ts),
                self.t,
                self.dt,
                self.mats,
                &self.current,
            )?,
            None => rk4_step(&self.state, |_, _| held, self.t, self.dt, self.mats, &self.current)?,
        };
        self.state = next;
        self.steps += 1;
        // Multiplying avoids accumulating round-off in the time base.
        self.t = self.steps as f64 * self.dt;
        Ok(&self.state)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Run a fixed-duration simulation.
///
/// The controller is called at step boundaries (every `control_every`
/// steps) and its output is held over the RK4 stages. The trajectory has
/// `ceil(duration / dt) + 1` samples; the last sample repeats the final held
/// load.
pub fn run_sim(
    config: &SimConfig,
    mats: &ModelMatrices,
    current: &Vector6<f64>,
    mut controller: impl FnMut(f64, &VesselState) -> Vector6<f64>,
) -> Result<Trajectory, IntegratorError> {
    config.validate()?;
    let n = config.step_count();
    let mut plant = Plant::new(mats, *current, config.initial, config.dt);
    let mut samples = Vec::with_capacity(n + 1);
    let mut tau = Vector6::zeros();
    for k in 0..n {
        if k % config.control_every == 0 {
            tau = controller(plant.t, &plant.state);
        }
        samples.push(TrajectorySample {
            t: plant.t,
            state: plant.state,
            tau,
        });
        plant.step(&tau, None)?;
    }
    samples.push(TrajectorySample {
        t: plant.t,
        state: plant.state,
        tau,
    });
    Ok(Trajectory { samples })
}
