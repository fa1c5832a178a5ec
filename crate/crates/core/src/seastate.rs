//! Wave spectra, random-phase sea realizations and a first-order wave load.

use crate::dynamics::GRAVITY;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeaStateError {
    #[error("invalid spectrum parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("spectral density is defined for omega > 0, got {0}")]
    Domain(f64),
}

/// JONSWAP parameters; `gamma = 1` is Pierson–Moskowitz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub hs: f64,
    pub tp: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Lower frequency cutoff (rad/s); defaults to `0.2 * omega_p`.
    #[serde(default)]
    pub omega_min: Option<f64>,
    /// Upper frequency cutoff (rad/s); defaults to `5 * omega_p`.
    #[serde(default)]
    pub omega_max: Option<f64>,
    #[serde(default = "default_components")]
    pub components: usize,
}

fn default_gamma() -> f64 {
    3.3
}

fn default_components() -> usize {
    200
}

impl Default for SpectrumParams {
    /// Model-basin sea: Hs = 5 cm, Tp = 1.5 s.
    fn default() -> Self {
        Self::jonswap(0.05, 1.5, 3.3)
    }
}

impl SpectrumParams {
    pub fn jonswap(hs: f64, tp: f64, gamma: f64) -> Self {
        Self {
            hs,
            tp,
            gamma,
            omega_min: None,
            omega_max: None,
            components: default_components(),
        }
    }

    pub fn peak_frequency(&self) -> f64 {
        2.0 * PI / self.tp
    }

    pub fn frequency_range(&self) -> (f64, f64) {
        let wp = self.peak_frequency();
        (
            self.omega_min.unwrap_or(0.2 * wp),
            self.omega_max.unwrap_or(5.0 * wp),
        )
    }

    pub fn validate(&self) -> Result<(), SeaStateError> {
        let invalid = |field, reason: String| Err(SeaStateError::InvalidParameter { field, reason });
        if !(self.hs.is_finite() && self.hs > 0.0) {
            return invalid("hs", format!("must be > 0, got {}", self.hs));
        }
        if !(self.tp.is_finite() && self.tp > 0.0) {
            return invalid("tp", format!("must be > 0, got {}", self.tp));
        }
        if !(self.gamma.is_finite() && self.gamma >= 1.0) {
            return invalid("gamma", format!("must be >= 1, got {}", self.gamma));
        }
        if self.components < 2 {
            return invalid("components", format!("must be >= 2, got {}", self.components));
        }
        let (lo, hi) = self.frequency_range();
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return invalid(
                "omega_min",
                format!("need 0 < omega_min < omega_max, got [{lo}, {hi}]"),
            );
        }
        Ok(())
    }
}

/// Pierson–Moskowitz density parameterised by `Hs` and `omega_p`.
pub fn pierson_moskowitz(hs: f64, omega_p: f64, omega: f64) -> f64 {
    let ratio = omega_p / omega;
    5.0 / 16.0 * hs * hs * omega_p.powi(4) * omega.powi(-5) * (-1.25 * ratio.powi(4)).exp()
}

/// JONSWAP spectral density `S(omega)` (m²·s).
///
/// PM shape times the peak enhancement `gamma^exp(-(w - wp)² / (2 σ² wp²))`,
/// σ = 0.07 below the peak and 0.09 above, normalised by
/// `A = 1 - 0.287 ln(gamma)`.
pub fn spectrum_density(params: &SpectrumParams, omega: f64) -> Result<f64, SeaStateError> {
    if !(omega > 0.0) {
        return Err(SeaStateError::Domain(omega));
    }
    let wp = params.peak_frequency();
    let pm = pierson_moskowitz(params.hs, wp, omega);
    let sigma = if omega <= wp { 0.07 } else { 0.09 };
    let shape = (-(omega - wp).powi(2) / (2.0 * sigma * sigma * wp * wp)).exp();
    let normalisation = 1.0 - 0.287 * params.gamma.ln();
    Ok(normalisation * pm * params.gamma.powf(shape))
}

/// Trapezoidal zeroth moment over `[lo, hi]` with `n` points.
pub fn zeroth_moment(params: &SpectrumParams, lo: f64, hi: f64, n: usize) -> Result<f64, SeaStateError> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let w = lo + i as f64 * h;
        let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += weight * spectrum_density(params, w)?;
    }
    Ok(sum * h)
}

/// Harmonic components of one sea-surface realization.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveRealization {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    pub seed: u64,
}

/// Random-phase realization on a uniform midpoint grid, `a_i = sqrt(2 S(w_i) dw)`.
pub fn realize(params: &SpectrumParams, seed: u64) -> Result<WaveRealization, SeaStateError> {
    params.validate()?;
    let (lo, hi) = params.frequency_range();
    let n = params.components;
    let dw = (hi - lo) / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amplitudes = Vec::with_capacity(n);
    let mut frequencies = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    for i in 0..n {
        let w = lo + (i as f64 + 0.5) * dw;
        amplitudes.push((2.0 * spectrum_density(params, w)? * dw).sqrt());
        frequencies.push(w);
        phases.push(rng.random_range(0.0..2.0 * PI));
    }
    Ok(WaveRealization {
        amplitudes,
        frequencies,
        phases,
        seed,
    })
}

impl WaveRealization {
    pub fn elevation(&self, t: f64) -> f64 {
        elevation(self, t)
    }

    /// Variance of the realized process, `sum a_i² / 2`.
    pub fn variance(&self) -> f64 {
        self.amplitudes.iter().map(|a| 0.5 * a * a).sum()
    }

    /// Write `t, eta_w` rows sampled every `dt` over `[0, duration]`.
    pub fn write_elevation_csv<W: Write>(&self, out: W, duration: f64, dt: f64) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "eta_w"])?;
        let n = crate::integrator::step_count(duration, dt);
        for k in 0..=n {
            let t = k as f64 * dt;
            w.write_record([t.to_string(), self.elevation(t).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Surface elevation `sum a_i cos(w_i t + phi_i)` at the origin.
pub fn elevation(real: &WaveRealization, t: f64) -> f64 {
    real.amplitudes
        .iter()
        .zip(&real.frequencies)
        .zip(&real.phases)
        .map(|((a, w), phi)| a * (w * t + phi).cos())
        .sum()
}

/// Deep-water surface slope at the origin, `sum a_i k_i sin(w_i t + phi_i)`, `k = w²/g`.
pub fn slope(real: &WaveRealization, t: f64) -> f64 {
    real.amplitudes
        .iter()
        .zip(&real.frequencies)
        .zip(&real.phases)
        .map(|((a, w), phi)| a * w * w / GRAVITY * (w * t + phi).sin())
        .sum()
}

/// Surge/sway/yaw disturbance `gain ⊙ [s, s, s]` with `s` the surface slope.
pub fn wave_load(real: &WaveRealization, gain: &Vector3<f64>, t: f64) -> Vector3<f64> {
    gain * slope(real, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_one_is_pierson_moskowitz() {
        let p = SpectrumParams::jonswap(0.05, 1.5, 1.0);
        for i in 1..500 {
            let w = 0.05 * i as f64;
            let pm = pierson_moskowitz(0.05, p.peak_frequency(), w);
            let js = spectrum_density(&p, w).unwrap();
            assert!((js - pm).abs() <= 1e-12 * pm.abs());
        }
    }

    #[test]
    fn peak_at_omega_p() {
        for gamma in [1.0, 3.3] {
            let p = SpectrumParams::jonswap(0.1, 2.0, gamma);
            let wp = p.peak_frequency();
            let h = 1e-4;
            let (best, _) = (0..100_000)
                .map(|i| 0.5 * wp + i as f64 * h)
                .map(|w| (w, spectrum_density(&p, w).unwrap()))
                .fold((0.0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
            assert!((best - wp).abs() <= h, "gamma {gamma}: {best} vs {wp}");
        }
    }

    #[test]
    fn vanishes_at_both_ends() {
        let p = SpectrumParams::default();
        assert!(spectrum_density(&p, 1e-3).unwrap() < 1e-300);
        assert!(spectrum_density(&p, 1e4).unwrap() < 1e-20);
    }

    #[test]
    fn non_positive_frequency_is_a_domain_error() {
        let p = SpectrumParams::default();
        assert_eq!(spectrum_density(&p, 0.0), Err(SeaStateError::Domain(0.0)));
        assert!(spectrum_density(&p, -1.0).is_err());
    }

    #[test]
    fn hs_recovered_from_m0() {
        let p = SpectrumParams::jonswap(0.05, 1.5, 3.3);
        let wp = p.peak_frequency();
        let m0 = zeroth_moment(&p, 0.2 * wp, 6.0 * wp, 2000).unwrap();
        assert_relative_eq!(4.0 * m0.sqrt(), 0.05, max_relative = 0.02);
    }

    #[test]
    fn calm_sea_has_tiny_amplitudes() {
        let calm = realize(&SpectrumParams::jonswap(1e-9, 1.5, 3.3), 1).unwrap();
        assert!(calm.amplitudes.iter().all(|a| *a < 1e-9));
    }

    #[test]
    fn seeds_change_phases_only() {
        let p = SpectrumParams::default();
        let a = realize(&p, 1).unwrap();
        let b = realize(&p, 2).unwrap();
        assert_eq!(a.amplitudes, b.amplitudes);
        assert_eq!(a.frequencies, b.frequencies);
        assert_ne!(a.phases, b.phases);
        assert!(a.phases.iter().all(|phi| (0.0..2.0 * PI).contains(phi)));
        assert_eq!(a, realize(&p, 1).unwrap());
    }

    fn single() -> WaveRealization {
        WaveRealization {
            amplitudes: vec![1.0],
            frequencies: vec![1.0],
            phases: vec![0.0],
            seed: 0,
        }
    }

    #[test]
    fn single_component_elevation() {
        let r = single();
        assert_eq!(elevation(&r, 0.0), 1.0);
        let t = 0.7;
        assert_relative_eq!(elevation(&r, t), elevation(&r, t + 2.0 * PI), epsilon = 1e-12);
    }

    #[test]
    fn elevation_bounded_by_amplitude_sum() {
        let r = realize(&SpectrumParams::default(), 3).unwrap();
        let bound: f64 = r.amplitudes.iter().sum();
        for k in 0..20_000 {
            assert!(elevation(&r, k as f64 * 0.05).abs() <= bound);
        }
    }

    #[test]
    fn wave_load_is_linear_in_gain() {
        let r = realize(&SpectrumParams::default(), 3).unwrap();
        let t = 4.2;
        assert_eq!(wave_load(&r, &Vector3::zeros(), t), Vector3::zeros());
        let g = Vector3::new(0.5, -1.0, 0.2);
        assert_eq!(wave_load(&r, &(g * 2.0), t), wave_load(&r, &g, t) * 2.0);
    }

    #[test]
    fn unit_component_gives_pure_surge_sinusoid() {
        let r = single();
        let gain = Vector3::new(1.0, 0.0, 0.0);
        for k in 0..50 {
            let t = 0.1 * k as f64;
            let load = wave_load(&r, &gain, t);
            assert_eq!((load[1], load[2]), (0.0, 0.0));
            assert_relative_eq!(load[0], t.sin() / GRAVITY, epsilon = 1e-15);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = SpectrumParams::default();
        p.gamma = 0.5;
        assert!(realize(&p, 0).is_err());
        let mut p = SpectrumParams::default();
        p.components = 1;
        assert!(realize(&p, 0).is_err());
        let mut p = SpectrumParams::default();
        p.omega_min = Some(100.0);
        assert!(realize(&p, 0).is_err());
    }
}
