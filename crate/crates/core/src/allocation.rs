//! Thrust allocation: minimum-norm pseudo-inverse followed by per-command
//! saturation and rate limiting.
//!
//! Azimuth thrusters use the extended formulation: each contributes two
//! independent commands (body-frame `F_x`, `F_y`) so the problem stays
//! linear. Angles are recovered as `atan2(F_y, F_x)` for logging only.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("configuration matrix has rank {rank}; at least 3 is required")]
    Underactuated { rank: usize },
    #[error("invalid thruster {index}: {reason}")]
    InvalidThruster { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThrusterKind {
    /// Force along the fixed body-frame direction `angle`.
    Fixed,
    Azimuth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thruster {
    /// Longitudinal lever arm (m, positive forward).
    pub lx: f64,
    /// Lateral lever arm (m, positive starboard).
    pub ly: f64,
    #[serde(rename = "type")]
    pub kind: ThrusterKind,
    /// Thrust direction of a fixed thruster (rad); unused for azimuths.
    #[serde(default)]
    pub angle: f64,
    /// Per-command force limit (N).
    pub max_force: f64,
    /// Per-command rate limit (N/s).
    pub max_rate: f64,
}

impl Thruster {
    pub fn command_count(&self) -> usize {
        match self.kind {
            ThrusterKind::Fixed => 1,
            ThrusterKind::Azimuth => 2,
        }
    }

    fn columns(&self) -> Vec<Vector3<f64>> {
        match self.kind {
            ThrusterKind::Fixed => {
                let (s, c) = self.angle.sin_cos();
                vec![Vector3::new(c, s, self.lx * s - self.ly * c)]
            }
            ThrusterKind::Azimuth => vec![
                Vector3::new(1.0, 0.0, -self.ly),
                Vector3::new(0.0, 1.0, self.lx),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThrusterLayout {
    pub thrusters: Vec<Thruster>,
}

impl Default for ThrusterLayout {
    /// Two stern azimuths and a bow tunnel thruster on a ~1 m model.
    fn default() -> Self {
        let azimuth = |ly| Thruster {
            lx: -0.4,
            ly,
            kind: ThrusterKind::Azimuth,
            angle: 0.0,
            max_force: 2.0,
            max_rate: 10.0,
        };
        Self {
            thrusters: vec![
                azimuth(-0.1),
                azimuth(0.1),
                Thruster {
                    lx: 0.45,
                    ly: 0.0,
                    kind: ThrusterKind::Fixed,
                    angle: std::f64::consts::FRAC_PI_2,
                    max_force: 2.0,
                    max_rate: 10.0,
                },
            ],
        }
    }
}

impl ThrusterLayout {
    pub fn validate(&self) -> Result<(), AllocationError> {
        for (index, t) in self.thrusters.iter().enumerate() {
            let bad = |reason: &str| AllocationError::InvalidThruster {
                index,
                reason: reason.into(),
            };
            if !(t.max_force.is_finite() && t.max_force > 0.0) {
                return Err(bad("max_force must be > 0"));
            }
            if !(t.max_rate.is_finite() && t.max_rate > 0.0) {
                return Err(bad("max_rate must be > 0"));
            }
            if !(t.lx.is_finite() && t.ly.is_finite()) {
                return Err(bad("lever arms must be finite"));
            }
            if !t.angle.is_finite() {
                return Err(bad("angle must be finite"));
            }
        }
        Ok(())
    }

    pub fn command_count(&self) -> usize {
        self.thrusters.iter().map(Thruster::command_count).sum()
    }

    /// Per-command `(max_force, max_rate)`, azimuths repeated for both components.
    pub fn command_limits(&self) -> Vec<(f64, f64)> {
        self.thrusters
            .iter()
            .flat_map(|t| std::iter::repeat_n((t.max_force, t.max_rate), t.command_count()))
            .collect()
    }

    /// Largest `|tau_j|` reachable per DOF inside the saturation box.
    pub fn capacity(&self) -> Result<Vector3<f64>, AllocationError> {
        let b = config_matrix(self)?;
        let limits = self.command_limits();
        Ok(Vector3::from_fn(|j, _| {
            (0..b.ncols()).map(|i| b[(j, i)].abs() * limits[i].0).sum()
        }))
    }
}

fn raw_matrix(layout: &ThrusterLayout) -> DMatrix<f64> {
    let cols: Vec<Vector3<f64>> = layout.thrusters.iter().flat_map(Thruster::columns).collect();
    let mut b = DMatrix::zeros(3, cols.len());
    for (i, c) in cols.iter().enumerate() {
        b.set_column(i, c);
    }
    b
}

/// Numerical rank from singular values relative to the largest.
pub fn rank(b: &DMatrix<f64>) -> usize {
    if b.ncols() == 0 {
        return 0;
    }
    let sv = b.clone().svd(false, false).singular_values;
    let tol = sv.max() * 1e-10 * b.nrows().max(b.ncols()) as f64;
    sv.iter().filter(|s| **s > tol).count()
}

/// Configuration matrix `B` (3 x n) with columns per command.
pub fn config_matrix(layout: &ThrusterLayout) -> Result<DMatrix<f64>, AllocationError> {
    layout.validate()?;
    let b = raw_matrix(layout);
    let r = rank(&b);
    if r < 3 {
        return Err(AllocationError::Underactuated { rank: r });
    }
    Ok(b)
}

/// Result of one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Unconstrained minimum-norm solution `B⁺ tau_cmd`.
    pub unconstrained: DVector<f64>,
    /// Saturated and rate-limited commands.
    pub commands: DVector<f64>,
    /// `B u`, the load actually produced.
    pub realized: Vector3<f64>,
}

/// Stateful allocator; owns the previous command for rate limiting.
#[derive(Debug, Clone)]
pub struct Allocator {
    layout: ThrusterLayout,
    b: DMatrix<f64>,
    pinv: DMatrix<f64>,
    limits: Vec<(f64, f64)>,
    previous: DVector<f64>,
}

impl Allocator {
    pub fn new(layout: ThrusterLayout) -> Result<Self, AllocationError> {
        let b = config_matrix(&layout)?;
        let bbt = &b * b.transpose();
        let inv = bbt
            .try_inverse()
            .ok_or(AllocationError::Underactuated { rank: rank(&b) })?;
        let pinv = b.transpose() * inv;
        let limits = layout.command_limits();
        let previous = DVector::zeros(b.ncols());
        Ok(Self {
            layout,
            b,
            pinv,
            limits,
            previous,
        })
    }

    pub fn layout(&self) -> &ThrusterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn pseudo_inverse(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn previous(&self) -> &DVector<f64> {
        &self.previous
    }

    pub fn set_previous(&mut self, u: DVector<f64>) {
        assert_eq!(u.len(), self.b.ncols());
        self.previous = u;
    }

    /// Allocate `tau_cmd` over a control interval `dt`: saturate each
    /// command, then limit its change against the previous command.
    pub fn allocate(&mut self, tau_cmd: &Vector3<f64>, dt: f64) -> Allocation {
        let tau = DVector::from_column_slice(tau_cmd.as_slice());
        let unconstrained = &self.pinv * tau;
        let commands = DVector::from_fn(unconstrained.len(), |i, _| {
            let (fmax, rate) = self.limits[i];
            let prev = self.previous[i];
            let step = rate * dt;
            unconstrained[i].clamp(-fmax, fmax).clamp(prev - step, prev + step)
        });
        let realized_d = &self.b * &commands;
        self.previous = commands.clone();
        Allocation {
            unconstrained,
            commands,
            realized: Vector3::new(realized_d[0], realized_d[1], realized_d[2]),
        }
    }

    /// Azimuth angles `atan2(F_y, F_x)` in layout order (fixed thrusters skipped).
    pub fn azimuth_angles(&self, commands: &DVector<f64>) -> Vec<f64> {
        let mut angles = Vec::new();
        let mut i = 0;
        for t in &self.layout.thrusters {
            if let ThrusterKind::Azimuth = t.kind {
                angles.push(commands[i + 1].atan2(commands[i]));
            }
            i += t.command_count();
        }
        angles
    }
}
