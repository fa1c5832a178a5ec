//! Setpoint sequences and the hold-condition supervisor that advances them.

use crate::gnc::pose_error;
use nalgebra::Vector3;

/// 4-corner box: surge step, sway step, heading step, combined return,
/// heading return. Six poses including the starting origin.
pub fn four_corner_mission(box_size: f64, yaw: f64) -> Vec<Vector3<f64>> {
    let l = box_size;
    vec![
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(l, 0.0, 0.0),
        Vector3::new(l, -l, 0.0),
        Vector3::new(l, -l, -yaw),
        Vector3::new(0.0, 0.0, -yaw),
        Vector3::new(0.0, 0.0, 0.0),
    ]
}

/// Tolerances that must all hold continuously for `hold_time` before the
/// mission moves to the next setpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldCondition {
    pub position: f64,
    /// rad
    pub heading: f64,
    pub speed: f64,
    pub hold_time: f64,
}

impl Default for HoldCondition {
    fn default() -> Self {
        Self {
            position: 0.02,
            heading: 1f64.to_radians(),
            speed: 0.01,
            hold_time: 2.0,
        }
    }
}

impl HoldCondition {
    pub fn satisfied(&self, pose: &Vector3<f64>, speed: f64, setpoint: &Vector3<f64>) -> bool {
        let e = pose_error(pose, setpoint);
        e.xy().norm() < self.position && e[2].abs() < self.heading && speed < self.speed
    }
}

/// Steps through a setpoint sequence.
#[derive(Debug, Clone)]
pub struct MissionSupervisor {
    setpoints: Vec<Vector3<f64>>,
    condition: HoldCondition,
    index: usize,
    segment_start: f64,
    hold_start: Option<f64>,
    settling: Vec<Option<f64>>,
    completed_at: Option<f64>,
}

impl MissionSupervisor {
    pub fn new(setpoints: Vec<Vector3<f64>>, condition: HoldCondition) -> Self {
        assert!(!setpoints.is_empty(), "mission needs at least one setpoint");
        let n = setpoints.len();
        Self {
            setpoints,
            condition,
            index: 0,
            segment_start: 0.0,
            hold_start: None,
            settling: vec![None; n],
            completed_at: None,
        }
    }

    pub fn setpoints(&self) -> &[Vector3<f64>] {
        &self.setpoints
    }

    /// Index of the active setpoint.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn setpoint(&self) -> Vector3<f64> {
        self.setpoints[self.index]
    }

    pub fn completed_at(&self) -> Option<f64> {
        self.completed_at
    }

    /// Time from segment start until the hold window began, per setpoint.
    pub fn settling_times(&self) -> &[Option<f64>] {
        &self.settling
    }

    /// Evaluate the hold condition at `t` and return the active setpoint.
    pub fn update(&mut self, t: f64, pose: &Vector3<f64>, speed: f64) -> Vector3<f64> {
        if self.completed_at.is_some() {
            return self.setpoint();
        }
        if self.condition.satisfied(pose, speed, &self.setpoint()) {
            let start = *self.hold_start.get_or_insert(t);
            if t - start >= self.condition.hold_time - 1e-9 {
                self.settling[self.index] = Some(start - self.segment_start);
                if self.index + 1 == self.setpoints.len() {
                    self.completed_at = Some(t);
                } else {
                    self.index += 1;
                    self.segment_start = t;
                    self.hold_start = None;
                }
            }
        } else {
            self.hold_start = None;
        }
        self.setpoint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_corner_shape() {
        let yaw = 45f64.to_radians();
        let sp = four_corner_mission(1.0, yaw);
        assert_eq!(sp.len(), 6);
        assert_eq!(sp[0], Vector3::zeros());
        assert_eq!(sp[5], Vector3::zeros());
        for w in sp.windows(2) {
            let d = w[1] - w[0];
            let moves_position = d[0] != 0.0 || d[1] != 0.0;
            let moves_heading = d[2] != 0.0;
            assert!(moves_position ^ moves_heading, "{:?} -> {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn degenerate_box_is_all_equal() {
        let sp = four_corner_mission(0.0, 0.0);
        assert!(sp.iter().all(|p| *p == Vector3::zeros()));
        let mut sup = MissionSupervisor::new(sp, HoldCondition::default());
        let mut t = 0.0;
        while sup.completed_at().is_none() {
            sup.update(t, &Vector3::zeros(), 0.0);
            t += 0.01;
            assert!(t < 20.0);
        }
    }

    #[test]
    fn advances_after_continuous_hold() {
        let sp = vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        let mut sup = MissionSupervisor::new(sp, HoldCondition::default());
        let dt = 0.01;
        // Hold broken at t = 1.0 by a speed spike restarts the window.
        for k in 0..=301 {
            let t = k as f64 * dt;
            let speed = if k == 100 { 0.5 } else { 0.0 };
            sup.update(t, &Vector3::zeros(), speed);
            if t < 3.0 - 1e-9 {
                assert_eq!(sup.index(), 0, "advanced early at t = {t}");
            }
        }
        assert_eq!(sup.index(), 1);
        assert!((sup.settling_times()[0].unwrap() - 1.01).abs() < 1e-9);
    }

    #[test]
    fn heading_tolerance_is_wrap_aware() {
        let c = HoldCondition::default();
        let pose = Vector3::new(0.0, 0.0, 179.7f64.to_radians());
        let sp = Vector3::new(0.0, 0.0, -179.8f64.to_radians());
        assert!(c.satisfied(&pose, 0.0, &sp));
    }
}
