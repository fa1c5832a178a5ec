//! Default DP control stack on the surge/sway/yaw subspace.
//!
//! * [`RefFilterState`]: third-order reference model producing smooth
//!   `eta_d`, `eta_d_dot`, `eta_d_ddot` from step setpoints.
//! * [`pose_control`]: PD law in the body frame.
//! * [`VelocityController`]: PI with acceleration and damping feedforward.
//! * [`Multiplexer`]: selects which controller drives the allocator.

use crate::dynamics::wrap_angle;
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GncError {
    #[error("reference filter step {dt} s too large for bandwidth {omega_max} rad/s (need dt * omega < 0.1)")]
    StepTooLarge { dt: f64, omega_max: f64 },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("no candidate load supplied for active mode `{0}`")]
    MissingCandidate(ControlMode),
}

/// Planar rotation `R(psi)` from body to world.
pub fn rotation(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Pose difference `a - b` with the heading component wrapped.
pub fn pose_error(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let mut e = a - b;
    e[2] = wrap_angle(e[2]);
    e
}

/// Reference model state `x = [eta_d, eta_d_dot, eta_d_ddot]` with its
/// bandwidth `Omega` and relative damping `Delta` (both diagonal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefFilterState {
    pub eta_d: Vector3<f64>,
    pub eta_d_dot: Vector3<f64>,
    pub eta_d_ddot: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub delta: Vector3<f64>,
}

impl RefFilterState {
    /// Filter at rest at `pose`.
    pub fn at_rest(pose: Vector3<f64>, omega: Vector3<f64>, delta: Vector3<f64>) -> Result<Self, GncError> {
        if omega.iter().chain(delta.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GncError::InvalidGains(format!(
                "reference filter omega and delta must be > 0, got {omega:?}, {delta:?}"
            )));
        }
        Ok(Self {
            eta_d: pose,
            eta_d_dot: Vector3::zeros(),
            eta_d_ddot: Vector3::zeros(),
            omega,
            delta,
        })
    }

    pub fn stacked(&self) -> SVector<f64, 9> {
        let mut x = SVector::<f64, 9>::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.eta_d);
        x.fixed_rows_mut::<3>(3).copy_from(&self.eta_d_dot);
        x.fixed_rows_mut::<3>(6).copy_from(&self.eta_d_ddot);
        x
    }

    fn blocks(&self) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
        let w = self.omega;
        let two_delta_plus_one = self.delta * 2.0 + Vector3::repeat(1.0);
        (
            Matrix3::from_diagonal(&w.map(|v| v * v * v)),
            Matrix3::from_diagonal(&two_delta_plus_one.component_mul(&w.component_mul(&w))),
            Matrix3::from_diagonal(&two_delta_plus_one.component_mul(&w)),
        )
    }

    /// System matrix `A_d`.
    pub fn a_matrix(&self) -> SMatrix<f64, 9, 9> {
        let (w3, k2, k1) = self.blocks();
        let mut a = SMatrix::<f64, 9, 9>::zeros();
        a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        a.fixed_view_mut::<3, 3>(3, 6).copy_from(&Matrix3::identity());
        a.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-w3));
        a.fixed_view_mut::<3, 3>(6, 3).copy_from(&(-k2));
        a.fixed_view_mut::<3, 3>(6, 6).copy_from(&(-k1));
        a
    }

    /// Input matrix `B_d`.
    pub fn b_matrix(&self) -> SMatrix<f64, 9, 3> {
        let (w3, _, _) = self.blocks();
        let mut b = SMatrix::<f64, 9, 3>::zeros();
        b.fixed_view_mut::<3, 3>(6, 0).copy_from(&w3);
        b
    }

    /// Setpoint with its heading moved to the branch nearest `eta_d[2]`.
    pub fn unwrap_setpoint(&self, eta_r: &Vector3<f64>) -> Vector3<f64> {
        let mut r = *eta_r;
        r[2] = self.eta_d[2] + wrap_angle(eta_r[2] - self.eta_d[2]);
        r
    }

    /// Forward-Euler update `x <- x + dt (A_d x + B_d eta_r)`.
    pub fn step(&self, eta_r: &Vector3<f64>, dt: f64) -> Result<Self, GncError> {
        let omega_max = self.omega.max();
        if !(dt > 0.0 && dt * omega_max < 0.1) {
            return Err(GncError::StepTooLarge { dt, omega_max });
        }
        let r = self.unwrap_setpoint(eta_r);
        let (w3, k2, k1) = self.blocks();
        let jerk = w3 * (r - self.eta_d) - k2 * self.eta_d_dot - k1 * self.eta_d_ddot;
        Ok(Self {
            eta_d: self.eta_d + self.eta_d_dot * dt,
            eta_d_dot: self.eta_d_dot + self.eta_d_ddot * dt,
            eta_d_ddot: self.eta_d_ddot + jerk * dt,
            ..*self
        })
    }

    /// Desired body-frame velocity and acceleration, expressed in the
    /// desired heading frame: `nu_d = R(psi_d)^T eta_d_dot` and its time
    /// derivative `R^T eta_d_ddot - S(psi_d_dot) nu_d`.
    pub fn body_reference(&self) -> (Vector3<f64>, Vector3<f64>) {
        let rt = rotation(self.eta_d[2]).transpose();
        let nu_d = rt * self.eta_d_dot;
        let r = self.eta_d_dot[2];
        let coriolis = Vector3::new(-r * nu_d[1], r * nu_d[0], 0.0);
        (nu_d, rt * self.eta_d_ddot - coriolis)
    }
}

fn check_spd(name: &str, m: &Matrix3<f64>) -> Result<(), GncError> {
    if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
        return Err(GncError::InvalidGains(format!("{name} must be symmetric")));
    }
    let min_eig = m.symmetric_eigenvalues().min();
    if !(min_eig > 0.0) {
        return Err(GncError::InvalidGains(format!(
            "{name} must be positive definite (min eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseGains {
    pub kp: Matrix3<f64>,
    pub kd: Matrix3<f64>,
}

impl PoseGains {
    pub fn diagonal(kp: Vector3<f64>, kd: Vector3<f64>) -> Result<Self, GncError> {
        let gains = Self {
            kp: Matrix3::from_diagonal(&kp),
            kd: Matrix3::from_diagonal(&kd),
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<(), GncError> {
        check_spd("pose kp", &self.kp)?;
        check_spd("pose kd", &self.kd)
    }
}

/// PD pose law `tau = -Kp R(psi)^T (eta - eta_d) - Kd R(psi)^T (eta_dot - eta_d_dot)`.
///
/// `eta` and `eta_dot` are world-frame `(x, y, psi)` and rates.
pub fn pose_control(
    eta: &Vector3<f64>,
    eta_dot: &Vector3<f64>,
    filt: &RefFilterState,
    gains: &PoseGains,
) -> Vector3<f64> {
    let rt = rotation(eta[2]).transpose();
    let e = pose_error(eta, &filt.eta_d);
    let e_dot = eta_dot - filt.eta_d_dot;
    -(gains.kp * (rt * e)) - gains.kd * (rt * e_dot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelGains {
    pub kp: Vector3<f64>,
    pub ki: Vector3<f64>,
    /// Anti-windup bound on each integral state.
    pub xi_max: Vector3<f64>,
}

impl VelGains {
    pub fn validate(&self) -> Result<(), GncError> {
        for (name, v) in [("velocity kp", &self.kp), ("velocity ki", &self.ki)] {
            if v.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
                return Err(GncError::InvalidGains(format!("{name} must be > 0, got {v:?}")));
            }
        }
        if self.xi_max.iter().any(|k| !(*k > 0.0)) {
            return Err(GncError::InvalidGains(format!(
                "xi_max must be > 0, got {:?}",
                self.xi_max
            )));
        }
        Ok(())
    }
}

/// Output of one velocity-controller update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityOutput {
    pub tau: Vector3<f64>,
    /// `nu - nu_d`
    pub error: Vector3<f64>,
    /// Integral state used for `tau`.
    pub xi: Vector3<f64>,
}

/// PI-RFF velocity controller:
/// `a = nu_d_dot - Kp e - Ki xi`, `tau = M a + D nu_d`, `xi_dot = e`.
///
/// The integral is advanced with the current error before the law is
/// evaluated, so the first update after construction or [`reset`](Self::reset)
/// runs with `xi = 0`. With this ordering the sampled
/// `V = ½ eᵀMe + ½ xiᵀ Ki M xi` is non-increasing under a held command.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityController {
    pub gains: VelGains,
    xi: Vector3<f64>,
    primed: bool,
}

impl VelocityController {
    pub fn new(gains: VelGains) -> Result<Self, GncError> {
        gains.validate()?;
        Ok(Self {
            gains,
            xi: Vector3::zeros(),
            primed: false,
        })
    }

    pub fn xi(&self) -> Vector3<f64> {
        self.xi
    }

    pub fn reset(&mut self) {
        self.xi = Vector3::zeros();
        self.primed = false;
    }

    pub fn step(
        &mut self,
        nu: &Vector3<f64>,
        nu_d: &Vector3<f64>,
        nu_d_dot: &Vector3<f64>,
        mass: &Matrix3<f64>,
        damping: &Matrix3<f64>,
        dt: f64,
    ) -> VelocityOutput {
        let error = nu - nu_d;
        if self.primed {
            let lim = self.gains.xi_max;
            let next = self.xi + error * dt;
            self.xi = Vector3::from_fn(|i, _| next[i].clamp(-lim[i], lim[i]));
        }
        self.primed = true;
        let a = nu_d_dot - self.gains.kp.component_mul(&error) - self.gains.ki.component_mul(&self.xi);
        VelocityOutput {
            tau: mass * a + damping * nu_d,
            error,
            xi: self.xi,
        }
    }

    /// Lyapunov function at the given error and the current integral state.
    pub fn lyapunov(&self, error: &Vector3<f64>, mass: &Matrix3<f64>) -> f64 {
        lyapunov(error, &self.xi, &self.gains.ki, mass)
    }
}

/// `V = ½ eᵀ M e + ½ xiᵀ Ki M xi`.
pub fn lyapunov(error: &Vector3<f64>, xi: &Vector3<f64>, ki: &Vector3<f64>, mass: &Matrix3<f64>) -> f64 {
    0.5 * error.dot(&(mass * error)) + 0.5 * xi.dot(&(Matrix3::from_diagonal(ki) * mass * xi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Pose,
    Velocity,
    External,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::Pose => "pose",
            ControlMode::Velocity => "velocity",
            ControlMode::External => "external",
        })
    }
}

/// Per-mode controller outputs offered to the multiplexer.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Candidates {
    pub pose: Option<Vector3<f64>>,
    pub velocity: Option<Vector3<f64>>,
    pub external: Option<Vector3<f64>>,
}

/// Forward exactly the active mode's candidate.
pub fn mux_select(mode: ControlMode, candidates: &Candidates) -> Result<Vector3<f64>, GncError> {
    match mode {
        ControlMode::Pose => candidates.pose,
        ControlMode::Velocity => candidates.velocity,
        ControlMode::External => candidates.external,
    }
    .ok_or(GncError::MissingCandidate(mode))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multiplexer {
    active: ControlMode,
}

impl Multiplexer {
    pub fn new(mode: ControlMode) -> Self {
        Self { active: mode }
    }

    pub fn active(&self) -> ControlMode {
        self.active
    }

    /// Change the active mode; a change resets the velocity integral.
    /// Returns whether the mode changed.
    pub fn switch_to(&mut self, mode: ControlMode, velocity: &mut VelocityController) -> bool {
        if mode == self.active {
            return false;
        }
        self.active = mode;
        velocity.reset();
        true
    }

    pub fn select(&self, candidates: &Candidates) -> Result<Vector3<f64>, GncError> {
        mux_select(self.active, candidates)
    }
}
