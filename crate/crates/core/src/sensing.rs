//! Motion-capture measurement model and a held-pose observer.

use crate::dynamics::{wrap_angle, VesselState};
use crate::gnc::pose_error;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("invalid motion-capture parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("observer has not received a valid measurement yet")]
    NotReady,
    #[error("measurement log: {0}")]
    Csv(#[from] csv::Error),
}

/// Optical tracking noise and sampling. Defaults put 3σ at 1 cm and 0.5°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoCapModel {
    pub sigma_position: f64,
    pub sigma_heading: f64,
    pub rate_hz: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for MoCapModel {
    fn default() -> Self {
        Self {
            sigma_position: 0.0033,
            sigma_heading: 0.17f64.to_radians(),
            rate_hz: 100.0,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl MoCapModel {
    pub fn ideal() -> Self {
        Self {
            sigma_position: 0.0,
            sigma_heading: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        let bad = |field, reason: String| Err(SensingError::InvalidParameter { field, reason });
        if !(self.sigma_position.is_finite() && self.sigma_position >= 0.0) {
            return bad("sigma_position", format!("must be >= 0, got {}", self.sigma_position));
        }
        if !(self.sigma_heading.is_finite() && self.sigma_heading >= 0.0) {
            return bad("sigma_heading", format!("must be >= 0, got {}", self.sigma_heading));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return bad("rate_hz", format!("must be > 0, got {}", self.rate_hz));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", format!("must be in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}

/// One motion-capture sample; `pose` is `None` for a dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MocapSample {
    pub t: f64,
    pub pose: Option<Vector3<f64>>,
}

/// Sampled noisy tracker with its own seeded generator.
#[derive(Debug, Clone)]
pub struct MoCapSensor {
    model: MoCapModel,
    rng: ChaCha8Rng,
    next_index: u64,
}

impl MoCapSensor {
    pub fn new(model: MoCapModel) -> Result<Self, SensingError> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(Self {
            model,
            rng,
            next_index: 0,
        })
    }

    pub fn model(&self) -> &MoCapModel {
        &self.model
    }

    /// Sample the truth if `t` has reached the next sample instant.
    pub fn measure(&mut self, truth: &VesselState, t: f64) -> Option<MocapSample> {
        let period = 1.0 / self.model.rate_hz;
        let due = self.next_index as f64 * period;
        if t + 1e-9 * period < due {
            return None;
        }
        // Skip instants the caller stepped over.
        self.next_index = ((t / period) + 1e-9).floor() as u64 + 1;
        let dropped = self.rng.random::<f64>() < self.model.dropout;
        let n: [f64; 3] = [
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
        ];
        let truth = truth.planar_pose();
        let pose = Vector3::new(
            truth[0] + self.model.sigma_position * n[0],
            truth[1] + self.model.sigma_position * n[1],
            wrap_angle(truth[2] + self.model.sigma_heading * n[2]),
        );
        Some(MocapSample {
            t,
            pose: (!dropped).then_some(pose),
        })
    }
}

/// Default time constant of the velocity low-pass filter (s).
pub const DEFAULT_VELOCITY_TIME_CONSTANT: f64 = 0.2;

/// Holds the last valid pose and low-pass filters its finite difference.
#[derive(Debug, Clone, PartialEq)]
pub struct Observer {
    time_constant: f64,
    last: Option<(f64, Vector3<f64>)>,
    velocity: Vector3<f64>,
}

impl Observer {
    pub fn new(time_constant: f64) -> Result<Self, SensingError> {
        if !(time_constant.is_finite() && time_constant > 0.0) {
            return Err(SensingError::InvalidParameter {
                field: "velocity_time_constant",
                reason: format!("must be > 0, got {time_constant}"),
            });
        }
        Ok(Self {
            time_constant,
            last: None,
            velocity: Vector3::zeros(),
        })
    }

    pub fn update(&mut self, sample: &MocapSample) {
        let Some(pose) = sample.pose else { return };
        if !pose.iter().all(|v| v.is_finite()) || !sample.t.is_finite() {
            return;
        }
        match self.last {
            None => self.last = Some((sample.t, pose)),
            Some((t_prev, prev)) => {
                let dt = sample.t - t_prev;
                if dt <= 0.0 {
                    return;
                }
                let raw = pose_error(&pose, &prev) / dt;
                let alpha = 1.0 - (-dt / self.time_constant).exp();
                self.velocity += (raw - self.velocity) * alpha;
                self.last = Some((sample.t, pose));
            }
        }
    }

    /// `(pose, world-frame pose rate)`.
    pub fn estimate(&self) -> Result<(Vector3<f64>, Vector3<f64>), SensingError> {
        self.last
            .map(|(_, pose)| (pose, self.velocity))
            .ok_or(SensingError::NotReady)
    }
}

/// Write samples as `t, x_m, y_m, psi_m, valid`.
pub fn write_measurements<W: Write>(out: W, samples: &[MocapSample]) -> Result<(), SensingError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x_m", "y_m", "psi_m", "valid"])?;
    for s in samples {
        let row = match s.pose {
            Some(p) => [s.t.to_string(), p[0].to_string(), p[1].to_string(), p[2].to_string(), "1".into()],
            None => [s.t.to_string(), String::new(), String::new(), String::new(), "0".into()],
        };
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct MeasurementRow {
    t: f64,
    x_m: Option<f64>,
    y_m: Option<f64>,
    psi_m: Option<f64>,
    valid: u8,
}

/// Read a measurement log written by [`write_measurements`] or a basin recording.
pub fn read_measurements<R: Read>(input: R) -> Result<Vec<MocapSample>, SensingError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize::<MeasurementRow>() {
        let row = row?;
        let pose = match (row.valid, row.x_m, row.y_m, row.psi_m) {
            (1, Some(x), Some(y), Some(psi)) => Some(Vector3::new(x, y, psi)),
            _ => None,
        };
        out.push(MocapSample { t: row.t, pose });
    }
    Ok(out)
}

/// Feeds recorded samples whose timestamps have been reached.
#[derive(Debug, Clone)]
pub struct Replay {
    samples: Vec<MocapSample>,
    cursor: usize,
}

impl Replay {
    pub fn new(samples: Vec<MocapSample>) -> Self {
        Self { samples, cursor: 0 }
    }

    pub fn due(&mut self, t: f64) -> &[MocapSample] {
        let start = self.cursor;
        while self.cursor < self.samples.len() && self.samples[self.cursor].t <= t + 1e-12 {
            self.cursor += 1;
        }
        &self.samples[start..self.cursor]
    }
}
