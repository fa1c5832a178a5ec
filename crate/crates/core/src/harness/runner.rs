//! Closed-loop scenario execution:
//! sensor → observer → reference filter → controllers → multiplexer →
//! allocator → plant, with the mission supervisor advancing setpoints.

use super::config::{MetricsReference, MissionKind, Scenario};
use super::metrics::{compute_metrics, MetricsReport, PlanarSample};
use super::mission::{four_corner_mission, HoldCondition, MissionSupervisor};
use super::HarnessError;
use crate::allocation::Allocator;
use crate::dynamics::{build_matrices, embed_planar, VesselState};
use crate::gnc::{
    pose_control, rotation, Candidates, ControlMode, Multiplexer, PoseGains, RefFilterState, VelGains,
    VelocityController,
};
use crate::integrator::{step_count, Plant, TRAJECTORY_COLUMNS};
use crate::seastate::{realize, wave_load, WaveRealization};
use crate::sensing::{read_measurements, write_measurements, MoCapSensor, MocapSample, Observer, Replay};
use nalgebra::{DVector, Matrix3, Vector3, Vector6};
use std::io::Write;
use std::path::Path;

/// Mixed into the scenario seed so the tracker noise and the wave phases
/// draw from different streams.
const SENSOR_STREAM: u64 = 0x6d6f_6361_7000_0001;

fn gnc_config(path: &str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: e.to_string(),
    }
}

/// One logged control step. State is at `t`; loads are those held over
/// `[t, t + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    pub state: VesselState,
    /// Load realized by the thrusters, `B u`.
    pub tau: Vector3<f64>,
    pub tau_cmd: Vector3<f64>,
    pub tau_wave: Vector3<f64>,
    pub mode: ControlMode,
    pub segment: usize,
    pub eta_d: Vector3<f64>,
    pub eta_d_dot: Vector3<f64>,
    pub setpoint: Vector3<f64>,
    pub nu_err: Option<Vector3<f64>>,
    pub xi: Vector3<f64>,
    pub lyapunov: Option<f64>,
    pub commands: DVector<f64>,
    pub azimuths: Vec<f64>,
}

impl Row {
    fn truth_sample(&self) -> PlanarSample {
        PlanarSample {
            t: self.t,
            pose: self.state.planar_pose(),
            rate: rotation(self.state.eta[5]) * self.state.planar_velocity(),
        }
    }
}

/// In-memory result of a scenario.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub metrics: MetricsReport,
    /// `None` when the scenario has no mission.
    pub completed: Option<bool>,
    pub measurements: Vec<MocapSample>,
    pub waves: Option<WaveRealization>,
    pub thrusters: usize,
}

impl RunOutput {
    pub fn timed_out(&self) -> bool {
        self.completed == Some(false)
    }

    pub fn trajectory_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = TRAJECTORY_COLUMNS.iter().map(|s| s.to_string()).collect();
        cols.extend(
            [
                "mode", "segment", "x_d", "y_d", "psi_d", "xdot_d", "ydot_d", "psidot_d", "x_r", "y_r", "psi_r",
                "tau_cmd_x", "tau_cmd_y", "tau_cmd_n", "tau_wave_x", "tau_wave_y", "tau_wave_n", "nu_err_u",
                "nu_err_v", "nu_err_r", "xi_u", "xi_v", "xi_r", "lyapunov",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        let n = self.rows.first().map_or(self.thrusters, |r| r.commands.len());
        cols.extend((1..=n).map(|i| format!("u_{i}")));
        let m = self.rows.first().map_or(0, |r| r.azimuths.len());
        cols.extend((1..=m).map(|i| format!("azimuth_{i}")));
        cols
    }

    pub fn write_trajectory<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| HarnessError::Io(std::io::Error::other(e));
        w.write_record(self.trajectory_columns()).map_err(csv_err)?;
        let num = |v: f64| v.to_string();
        for r in &self.rows {
            let mut rec: Vec<String> = Vec::with_capacity(48);
            rec.push(num(r.t));
            rec.extend(r.state.eta.iter().copied().map(num));
            rec.extend(r.state.nu.iter().copied().map(num));
            rec.extend(r.tau.iter().copied().map(num));
            rec.push(r.mode.to_string());
            rec.push(r.segment.to_string());
            rec.extend(r.eta_d.iter().copied().map(num));
            rec.extend(r.eta_d_dot.iter().copied().map(num));
            rec.extend(r.setpoint.iter().copied().map(num));
            rec.extend(r.tau_cmd.iter().copied().map(num));
            rec.extend(r.tau_wave.iter().copied().map(num));
            match r.nu_err {
                Some(e) => rec.extend(e.iter().copied().map(num)),
                None => rec.extend(std::iter::repeat_n(String::new(), 3)),
            }
            rec.extend(r.xi.iter().copied().map(num));
            rec.push(r.lyapunov.map(num).unwrap_or_default());
            rec.extend(r.commands.iter().copied().map(num));
            rec.extend(r.azimuths.iter().copied().map(num));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn setpoints(scenario: &Scenario) -> Option<(Vec<Vector3<f64>>, HoldCondition)> {
    let mission = scenario.mission.as_ref()?;
    let points = match mission.kind {
        MissionKind::FourCorner => four_corner_mission(mission.box_size, mission.yaw_deg.to_radians()),
        MissionKind::Setpoints => mission
            .setpoints
            .iter()
            .map(|p| Vector3::new(p[0], p[1], p[2].to_radians()))
            .collect(),
    };
    let hold = HoldCondition {
        position: mission.position_tolerance,
        heading: mission.heading_tolerance_deg.to_radians(),
        speed: mission.speed_tolerance,
        hold_time: mission.hold_time,
    };
    Some((points, hold))
}

enum Feedback {
    Truth,
    Tracker(MoCapSensor, Observer),
    Replay(Replay, Observer),
}

/// Run a validated scenario in memory.
///
/// Mission supervision and the metrics use the true vessel state; the
/// controllers see whatever the configured feedback path provides. The run
/// stops when the mission completes or the duration elapses.
pub fn simulate(scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    scenario.validate()?;
    let vessel = scenario.vessel();
    let params = vessel.params();
    let mats = build_matrices(&params).map_err(|e| gnc_config("vessel", e))?;
    let layout = vessel.layout();
    let capacity = layout.capacity().map_err(|e| gnc_config("vessel.thrusters", e))?;
    let mut allocator = Allocator::new(layout).map_err(|e| gnc_config("vessel.thrusters", e))?;

    let g = &scenario.gains;
    let v3 = Vector3::from;
    let pose_gains = PoseGains::diagonal(v3(g.pose_kp), v3(g.pose_kd)).map_err(|e| gnc_config("gains", e))?;
    let model_mass = mats.planar_mass() * g.model_scale;
    let model_damping = mats.planar_damping() * g.model_scale;
    let ki = v3(g.velocity_ki);
    // Default integral bound: Ki * xi_max * M is half the thrust capacity.
    let xi_max = g
        .velocity_xi_max
        .map(v3)
        .unwrap_or_else(|| Vector3::from_fn(|i, _| 0.5 * capacity[i] / (model_mass[i] * ki[i])));
    let mut velocity = VelocityController::new(VelGains {
        kp: v3(g.velocity_kp),
        ki,
        xi_max,
    })
    .map_err(|e| gnc_config("gains", e))?;
    let mass3 = Matrix3::from_diagonal(&model_mass);
    let damping3 = Matrix3::from_diagonal(&model_damping);

    let initial_pose = Vector3::new(scenario.initial[0], scenario.initial[1], scenario.initial[2].to_radians());
    let mut filter = RefFilterState::at_rest(initial_pose, v3(g.filter_omega), v3(g.filter_delta))
        .map_err(|e| gnc_config("gains", e))?;
    let mut eta0 = Vector6::zeros();
    eta0[0] = initial_pose[0];
    eta0[1] = initial_pose[1];
    eta0[5] = initial_pose[2];
    let mut plant = Plant::new(
        &mats,
        params.current_vector(),
        VesselState::new(eta0, Vector6::zeros()),
        scenario.dt,
    );

    let mut supervisor = setpoints(scenario).map(|(points, hold)| MissionSupervisor::new(points, hold));
    let mut mux = Multiplexer::new(scenario.modes[0].mode);

    let waves = match &scenario.sea_state {
        Some(sea) => Some(realize(&sea.spectrum(), scenario.seed).map_err(|e| gnc_config("sea_state", e))?),
        None => None,
    };
    let wave_gain = scenario.sea_state.as_ref().map_or(Vector3::zeros(), |s| v3(s.load_gain));

    let mut feedback = match &scenario.sensing {
        None => Feedback::Truth,
        Some(s) => {
            let observer = Observer::new(s.velocity_time_constant).map_err(|e| gnc_config("sensing", e))?;
            match &s.replay {
                Some(path) => {
                    let file = std::fs::File::open(path)
                        .map_err(|e| gnc_config("sensing.replay", format!("{}: {e}", path.display())))?;
                    let samples =
                        read_measurements(file).map_err(|e| gnc_config("sensing.replay", e))?;
                    Feedback::Replay(Replay::new(samples), observer)
                }
                None => {
                    let sensor = MoCapSensor::new(s.model(scenario.seed ^ SENSOR_STREAM))
                        .map_err(|e| gnc_config("sensing", e))?;
                    Feedback::Tracker(sensor, observer)
                }
            }
        }
    };

    let n = step_count(scenario.duration, scenario.dt);
    let dt_control = scenario.dt * scenario.control_every as f64;
    let mut rows: Vec<Row> = Vec::with_capacity(n + 1);
    let mut measurements = Vec::new();
    let mut first_settled: Option<usize> = None;
    let mut completed = supervisor.as_ref().map(|_| false);

    let mut held = Held {
        tau: Vector3::zeros(),
        tau_cmd: Vector3::zeros(),
        nu_err: None,
        lyapunov: None,
        commands: allocator.previous().clone(),
    };
    let mut filter_now = filter;

    for k in 0..=n {
        if n == 0 {
            break;
        }
        let t = plant.t;
        let truth = plant.state;

        // Feedback.
        let estimate = match &mut feedback {
            Feedback::Truth => Some((truth.planar_pose(), rotation(truth.eta[5]) * truth.planar_velocity())),
            Feedback::Tracker(sensor, observer) => {
                if let Some(sample) = sensor.measure(&truth, t) {
                    observer.update(&sample);
                    measurements.push(sample);
                }
                observer.estimate().ok()
            }
            Feedback::Replay(replay, observer) => {
                for sample in replay.due(t) {
                    observer.update(sample);
                }
                observer.estimate().ok()
            }
        };

        // Mission supervision on the true state.
        let setpoint = match &mut supervisor {
            Some(sup) => {
                let speed = truth.planar_velocity().xy().norm();
                let sp = sup.update(t, &truth.planar_pose(), speed);
                if first_settled.is_none() && (sup.index() > 0 || sup.completed_at().is_some()) {
                    first_settled = Some(rows.len());
                }
                sp
            }
            None => filter.eta_d,
        };
        let segment = supervisor.as_ref().map_or(0, |s| s.index());

        if k % scenario.control_every == 0 {
            let schedule = scenario
                .modes
                .iter()
                .rev()
                .find(|m| m.t <= t + 1e-9)
                .unwrap_or(&scenario.modes[0]);
            mux.switch_to(schedule.mode, &mut velocity);
            filter_now = filter;

            held.nu_err = None;
            held.lyapunov = None;
            held.tau_cmd = match estimate {
                None => Vector3::zeros(),
                Some((pose, rate)) => {
                    let mut candidates = Candidates {
                        pose: Some(pose_control(&pose, &rate, &filter, &pose_gains)),
                        external: schedule.tau.map(v3),
                        ..Candidates::default()
                    };
                    if mux.active() == ControlMode::Velocity {
                        let nu = rotation(pose[2]).transpose() * rate;
                        let (nu_d, nu_d_dot) = match schedule.velocity {
                            Some(v) => (v3(v), Vector3::zeros()),
                            None => filter.body_reference(),
                        };
                        let out = velocity.step(&nu, &nu_d, &nu_d_dot, &mass3, &damping3, dt_control);
                        held.nu_err = Some(out.error);
                        held.lyapunov = Some(velocity.lyapunov(&out.error, &mass3));
                        candidates.velocity = Some(out.tau);
                    }
                    mux.select(&candidates).map_err(|e| gnc_config("modes", e))?
                }
            };
            let alloc = allocator.allocate(&held.tau_cmd, dt_control);
            held.tau = alloc.realized;
            held.commands = alloc.commands;

            if supervisor.is_some() || scenario.has_pose_mode() {
                filter = filter.step(&setpoint, dt_control).map_err(|e| gnc_config("gains.filter_omega", e))?;
            }
        }

        let tau_wave = match &waves {
            Some(w) => wave_load(w, &wave_gain, t),
            None => Vector3::zeros(),
        };
        rows.push(Row {
            t,
            state: truth,
            tau: held.tau,
            tau_cmd: held.tau_cmd,
            tau_wave,
            mode: mux.active(),
            segment,
            eta_d: filter_now.eta_d,
            eta_d_dot: filter_now.eta_d_dot,
            setpoint,
            nu_err: held.nu_err,
            xi: velocity.xi(),
            lyapunov: held.lyapunov,
            azimuths: allocator.azimuth_angles(&held.commands),
            commands: held.commands.clone(),
        });

        if supervisor.as_ref().is_some_and(|s| s.completed_at().is_some()) {
            completed = Some(true);
            break;
        }
        if k == n {
            break;
        }

        let control = embed_planar(&held.tau);
        match &waves {
            Some(w) => {
                let env = |ts: f64| embed_planar(&wave_load(w, &wave_gain, ts));
                plant.step(&control, Some(&env))?;
            }
            None => {
                plant.step(&control, None)?;
            }
        }
    }

    let reference: Vec<PlanarSample> = rows
        .iter()
        .map(|r| match scenario.metrics.reference {
            MetricsReference::Filter => PlanarSample {
                t: r.t,
                pose: r.eta_d,
                rate: r.eta_d_dot,
            },
            MetricsReference::Setpoint => PlanarSample {
                t: r.t,
                pose: r.setpoint,
                rate: Vector3::zeros(),
            },
        })
        .collect();
    let actual: Vec<PlanarSample> = rows.iter().map(Row::truth_sample).collect();
    let labels: Vec<usize> = rows.iter().map(|r| r.segment).collect();
    let window_start = first_settled.unwrap_or(0);
    let mut metrics = compute_metrics(&actual, &reference, window_start, Some(&labels))?;
    if let Some(sup) = &supervisor {
        metrics.settling_times = sup.settling_times().to_vec();
        metrics.mission_completed = completed;
        metrics.mission_time = sup.completed_at();
    }

    Ok(RunOutput {
        rows,
        metrics,
        completed,
        measurements,
        waves,
        thrusters: allocator.previous().len(),
    })
}

struct Held {
    tau: Vector3<f64>,
    tau_cmd: Vector3<f64>,
    nu_err: Option<Vector3<f64>>,
    lyapunov: Option<f64>,
    commands: DVector<f64>,
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Run a scenario and write its trajectory, metrics and optional extra
/// outputs. A mission timeout is reported through
/// [`RunOutput::timed_out`], with the outputs still written.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    let out = simulate(scenario)?;
    let o = &scenario.output;
    out.write_trajectory(create(&o.trajectory)?)?;
    create(&o.metrics)?.write_all(out.metrics.to_json_string().as_bytes())?;
    if let (Some(path), Some(waves)) = (&o.elevation, &out.waves) {
        waves
            .write_elevation_csv(create(path)?, scenario.duration, scenario.dt)
            .map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
    }
    if let Some(path) = &o.measurements {
        write_measurements(create(path)?, &out.measurements).map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}
