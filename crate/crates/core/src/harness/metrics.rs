//! Tracking-error metrics over an evaluation window.

use crate::dynamics::wrap_angle;
use nalgebra::Vector3;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trajectory has {actual} samples but reference has {reference}")]
    LengthMismatch { actual: usize, reference: usize },
    #[error("sample {index}: time {actual} does not match reference time {reference}")]
    TimeMismatch { index: usize, actual: f64, reference: f64 },
    #[error("evaluation window is empty")]
    EmptyWindow,
}

/// Planar pose `(x, y, psi)` and world-frame rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarSample {
    pub t: f64,
    pub pose: Vector3<f64>,
    pub rate: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMetrics {
    pub index: usize,
    pub samples: usize,
    pub position_rmse: f64,
    pub yaw_rmse_deg: f64,
    pub velocity_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub position_rmse: f64,
    pub yaw_rmse_deg: f64,
    pub velocity_rmse: f64,
    pub samples: usize,
    pub window_start: f64,
    pub window_end: f64,
    pub segments: Vec<SegmentMetrics>,
    /// Per setpoint: time from segment start until the final hold began.
    pub settling_times: Vec<Option<f64>>,
    pub mission_completed: Option<bool>,
    pub mission_time: Option<f64>,
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    position: f64,
    yaw: f64,
    velocity: f64,
}

impl Accumulator {
    fn add(&mut self, a: &PlanarSample, r: &PlanarSample) {
        let e = a.pose - r.pose;
        let ev = a.rate - r.rate;
        self.n += 1;
        self.position += e[0] * e[0] + e[1] * e[1];
        let yaw = wrap_angle(e[2]);
        self.yaw += yaw * yaw;
        self.velocity += ev[0] * ev[0] + ev[1] * ev[1];
    }

    fn rms(sum: f64, n: usize) -> f64 {
        (sum / n as f64).sqrt()
    }
}

/// RMS errors of `actual` against `reference` over samples `window_start..`.
///
/// Position error is the planar distance, yaw error is wrapped into
/// (-180°, 180°], velocity error is the norm of the planar rate difference.
/// `segments`, when given, labels each sample with its mission segment for
/// per-segment breakdowns.
pub fn compute_metrics(
    actual: &[PlanarSample],
    reference: &[PlanarSample],
    window_start: usize,
    segments: Option<&[usize]>,
) -> Result<MetricsReport, MetricsError> {
    if actual.len() != reference.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            reference: reference.len(),
        });
    }
    if let Some(labels) = segments {
        if labels.len() != actual.len() {
            return Err(MetricsError::LengthMismatch {
                actual: labels.len(),
                reference: actual.len(),
            });
        }
    }
    for (index, (a, r)) in actual.iter().zip(reference).enumerate() {
        if (a.t - r.t).abs() > 1e-9 * a.t.abs().max(1.0) {
            return Err(MetricsError::TimeMismatch {
                index,
                actual: a.t,
                reference: r.t,
            });
        }
    }
    if window_start >= actual.len() {
        return Err(MetricsError::EmptyWindow);
    }

    let mut total = Accumulator::default();
    let mut per_segment: Vec<(usize, Accumulator)> = Vec::new();
    for i in window_start..actual.len() {
        total.add(&actual[i], &reference[i]);
        if let Some(labels) = segments {
            let label = labels[i];
            match per_segment.iter_mut().find(|(l, _)| *l == label) {
                Some((_, acc)) => acc.add(&actual[i], &reference[i]),
                None => {
                    let mut acc = Accumulator::default();
                    acc.add(&actual[i], &reference[i]);
                    per_segment.push((label, acc));
                }
            }
        }
    }
    per_segment.sort_by_key(|(l, _)| *l);
    let segments = per_segment
        .into_iter()
        .map(|(index, acc)| SegmentMetrics {
            index,
            samples: acc.n,
            position_rmse: Accumulator::rms(acc.position, acc.n),
            yaw_rmse_deg: Accumulator::rms(acc.yaw, acc.n).to_degrees(),
            velocity_rmse: Accumulator::rms(acc.velocity, acc.n),
        })
        .collect();
    Ok(MetricsReport {
        position_rmse: Accumulator::rms(total.position, total.n),
        yaw_rmse_deg: Accumulator::rms(total.yaw, total.n).to_degrees(),
        velocity_rmse: Accumulator::rms(total.velocity, total.n),
        samples: total.n,
        window_start: actual[window_start].t,
        window_end: actual[actual.len() - 1].t,
        segments,
        settling_times: Vec::new(),
        mission_completed: None,
        mission_time: None,
    })
}

impl MetricsReport {
    /// Flat, key-sorted JSON object.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        let mut put = |k: String, v: Value| {
            m.insert(k, v);
        };
        put("position_rmse_m".into(), self.position_rmse.into());
        put("yaw_rmse_deg".into(), self.yaw_rmse_deg.into());
        put("velocity_rmse_mps".into(), self.velocity_rmse.into());
        put("samples".into(), self.samples.into());
        put("window_start_s".into(), self.window_start.into());
        put("window_end_s".into(), self.window_end.into());
        put("segments".into(), self.segments.len().into());
        if let Some(done) = self.mission_completed {
            put("mission_completed".into(), done.into());
        }
        if let Some(t) = self.mission_time {
            put("mission_time_s".into(), t.into());
        }
        for s in &self.segments {
            let k = s.index;
            put(format!("segment_{k}_samples"), s.samples.into());
            put(format!("segment_{k}_position_rmse_m"), s.position_rmse.into());
            put(format!("segment_{k}_yaw_rmse_deg"), s.yaw_rmse_deg.into());
            put(format!("segment_{k}_velocity_rmse_mps"), s.velocity_rmse.into());
        }
        for (k, ts) in self.settling_times.iter().enumerate() {
            if let Some(ts) = ts {
                put(format!("segment_{k}_settling_time_s"), (*ts).into());
            }
        }
        Value::Object(m)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("metrics are plain numbers");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample(t: f64, x: f64, y: f64, psi: f64) -> PlanarSample {
        PlanarSample {
            t,
            pose: Vector3::new(x, y, psi),
            rate: Vector3::zeros(),
        }
    }

    #[test]
    fn identical_tracks_have_zero_error() {
        let track: Vec<_> = (0..50).map(|k| sample(k as f64 * 0.1, k as f64, 1.0, 0.3)).collect();
        let m = compute_metrics(&track, &track, 0, None).unwrap();
        assert_eq!((m.position_rmse, m.yaw_rmse_deg, m.velocity_rmse), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_offset() {
        let actual: Vec<_> = (0..50).map(|k| sample(k as f64, 0.1, 0.0, 0.0)).collect();
        let reference: Vec<_> = (0..50).map(|k| sample(k as f64, 0.0, 0.0, 0.0)).collect();
        let m = compute_metrics(&actual, &reference, 0, None).unwrap();
        assert!((m.position_rmse - 0.1).abs() < 1e-15);
    }

    #[test]
    fn yaw_error_wraps() {
        let actual = vec![sample(0.0, 0.0, 0.0, 179f64.to_radians())];
        let reference = vec![sample(0.0, 0.0, 0.0, -179f64.to_radians())];
        let m = compute_metrics(&actual, &reference, 0, None).unwrap();
        assert!((m.yaw_rmse_deg - 2.0).abs() < 1e-9);
    }

    // RMS of A sin(w t) over whole periods is A / sqrt(2).
    #[test]
    fn sinusoidal_error_rms() {
        let amp = 0.05;
        let period = 2.0;
        let per_period = 64;
        let n = 100 * per_period;
        let dt = period / per_period as f64;
        let actual: Vec<_> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                sample(t, amp * (2.0 * PI * t / period).sin(), 0.0, 0.0)
            })
            .collect();
        let reference: Vec<_> = actual.iter().map(|s| sample(s.t, 0.0, 0.0, 0.0)).collect();
        let m = compute_metrics(&actual, &reference, 0, None).unwrap();
        assert!((m.position_rmse / (amp / 2f64.sqrt()) - 1.0).abs() < 0.01);
    }

    #[test]
    fn window_shift_changes_count_by_one() {
        let track: Vec<_> = (0..30).map(|k| sample(k as f64, 0.0, 0.0, 0.0)).collect();
        let a = compute_metrics(&track, &track, 10, None).unwrap();
        let b = compute_metrics(&track, &track, 11, None).unwrap();
        assert_eq!(a.samples, b.samples + 1);
        assert_eq!(a.window_start, 10.0);
    }

    #[test]
    fn errors() {
        let a: Vec<_> = (0..3).map(|k| sample(k as f64, 0.0, 0.0, 0.0)).collect();
        assert_eq!(
            compute_metrics(&a, &a[..2], 0, None),
            Err(MetricsError::LengthMismatch { actual: 3, reference: 2 })
        );
        assert_eq!(compute_metrics(&a, &a, 3, None), Err(MetricsError::EmptyWindow));
        let shifted: Vec<_> = a.iter().map(|s| sample(s.t + 0.5, 0.0, 0.0, 0.0)).collect();
        assert!(matches!(
            compute_metrics(&a, &shifted, 0, None),
            Err(MetricsError::TimeMismatch { index: 0, .. })
        ));
    }

    #[test]
    fn per_segment_breakdown_and_flat_json() {
        let actual: Vec<_> = (0..4).map(|k| sample(k as f64, if k < 2 { 0.1 } else { 0.2 }, 0.0, 0.0)).collect();
        let reference: Vec<_> = (0..4).map(|k| sample(k as f64, 0.0, 0.0, 0.0)).collect();
        let m = compute_metrics(&actual, &reference, 0, Some(&[1, 1, 2, 2])).unwrap();
        assert_eq!(m.segments.len(), 2);
        assert!((m.segments[1].position_rmse - 0.2).abs() < 1e-15);
        let json = m.to_json();
        let obj = json.as_object().unwrap();
        assert!(obj.values().all(|v| !v.is_object() && !v.is_array()));
        assert!(obj.contains_key("segment_2_position_rmse_m"));
    }
}
