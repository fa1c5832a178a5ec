use anyhow::Context;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vessel_gnc::harness::config::{OutputConfig, SensingConfig};
use vessel_gnc::harness::{run_scenario, HarnessError, RunOutput, Scenario};
use vessel_gnc::seastate::{realize, spectrum_density, SpectrumParams};

#[derive(Parser)]
#[command(name = "vessel-gnc", version, about = "Model-scale vessel simulation and DP control harness")]
struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { scenario: PathBuf },
    /// Run the 4-corner benchmark with the default vessel and gains.
    FourCorner {
        /// Box side (m).
        #[arg(long = "box", default_value_t = 1.0)]
        box_size: f64,
        /// Heading step (deg).
        #[arg(long, default_value_t = 45.0)]
        yaw: f64,
        /// Close the loop through the noisy motion-capture model.
        #[arg(long)]
        noise: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a JONSWAP spectrum table and optionally an elevation record.
    Spectrum {
        #[arg(long)]
        hs: f64,
        #[arg(long)]
        tp: f64,
        #[arg(long, default_value_t = 3.3)]
        gamma: f64,
        /// Spectrum CSV (omega, S).
        #[arg(long)]
        out: PathBuf,
        /// Elevation CSV (t, eta_w) of one realization.
        #[arg(long)]
        elevation: Option<PathBuf>,
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Run several scenario files concurrently.
    Batch { scenarios: Vec<PathBuf> },
}

fn report(label: &str, out: &RunOutput) {
    let m = &out.metrics;
    println!(
        "{label}: position RMSE {:.4} m, yaw RMSE {:.3} deg, velocity RMSE {:.4} m/s over {} samples",
        m.position_rmse, m.yaw_rmse_deg, m.velocity_rmse, m.samples
    );
    match (out.completed, m.mission_time) {
        (Some(true), Some(t)) => println!("{label}: mission completed at t = {t:.2} s"),
        (Some(false), _) => eprintln!("{label}: mission timed out"),
        _ => {}
    }
}

fn status(result: &Result<RunOutput, HarnessError>, label: &str) -> u8 {
    match result {
        Ok(out) => {
            report(label, out);
            if out.timed_out() {
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("{label}: {e}");
            e.exit_code() as u8
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, HarnessError> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn write_spectrum(hs: f64, tp: f64, gamma: f64, out: &Path) -> anyhow::Result<SpectrumParams> {
    let params = SpectrumParams::jonswap(hs, tp, gamma);
    params.validate()?;
    let (lo, hi) = params.frequency_range();
    let n = params.components;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(["omega", "S"])?;
    for i in 0..n {
        let omega = lo + (i as f64 + 0.5) * (hi - lo) / n as f64;
        w.write_record([omega.to_string(), spectrum_density(&params, omega)?.to_string()])?;
    }
    w.flush()?;
    Ok(params)
}

fn main() -> ExitCode {
    // Usage errors share exit status 1 with config errors; 2 is divergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run { scenario } => {
            let result = load(&scenario, cli.seed).and_then(|s| run_scenario(&s));
            status(&result, &scenario.display().to_string())
        }
        Command::FourCorner {
            box_size,
            yaw,
            noise,
            out,
        } => {
            let mut s = Scenario::four_corner(box_size, yaw);
            s.seed = cli.seed.unwrap_or(0);
            if noise {
                s.sensing = Some(SensingConfig::default());
            }
            s.output = OutputConfig::in_dir(&out);
            let result = run_scenario(&s);
            status(&result, "four-corner")
        }
        Command::Spectrum {
            hs,
            tp,
            gamma,
            out,
            elevation,
            duration,
            dt,
        } => {
            let result = write_spectrum(hs, tp, gamma, &out).and_then(|params| {
                if let Some(path) = elevation {
                    let waves = realize(&params, cli.seed.unwrap_or(0))?;
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    waves.write_elevation_csv(file, duration, dt)?;
                }
                Ok(())
            });
            match result {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("spectrum: {e:#}");
                    1
                }
            }
        }
        Command::Validate { scenario } => match load(&scenario, cli.seed) {
            Ok(_) => {
                println!("{}: ok", scenario.display());
                0
            }
            Err(e) => {
                eprintln!("{}: {e}", scenario.display());
                e.exit_code() as u8
            }
        },
        Command::Batch { scenarios } => {
            let seed = cli.seed;
            let results: Vec<_> = std::thread::scope(|scope| {
                let handles: Vec<_> = scenarios
                    .iter()
                    .map(|path| scope.spawn(move || load(path, seed).and_then(|s| run_scenario(&s))))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
            });
            scenarios
                .iter()
                .zip(&results)
                .map(|(path, r)| status(r, &path.display().to_string()))
                .max()
                .unwrap_or(0)
        }
    };
    ExitCode::from(code)
}
