use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use proptest::prelude::*;
use std::f64::consts::PI;
use vessel_gnc::allocation::{Allocator, ThrusterLayout};
use vessel_gnc::dynamics::{build_matrices, coriolis, ModelMatrices, wrap_angle, VesselParams, VesselState};
use vessel_gnc::gnc::RefFilterState;
use vessel_gnc::harness::{compute_metrics, PlanarSample};
use vessel_gnc::integrator::Plant;
use vessel_gnc::seastate::{spectrum_density, SpectrumParams};
use vessel_gnc::sensing::{MocapSample, Observer};

fn vessel() -> impl Strategy<Value = VesselParams> {
    (0.2..3.0f64, 0.05..1.0f64, 0.01..0.5f64, prop::array::uniform6(0.0..2.0f64)).prop_map(
        |(l, b, t, alpha)| {
            let mut p = VesselParams::prism(l, b, t, 1000.0);
            p.added_mass = alpha;
            p
        },
    )
}

fn vec6(scale: f64) -> impl Strategy<Value = Vector6<f64>> {
    prop::array::uniform6(-scale..scale).prop_map(Vector6::from)
}

fn vec3(lo: f64, hi: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(lo..hi).prop_map(Vector3::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coriolis_is_skew_symmetric(p in vessel(), nu in vec6(2.0), x in vec6(2.0), a in prop::array::uniform32(-1.0..1.0f64)) {
        let mats = build_matrices(&p).unwrap();
        // A dense symmetric positive definite inertia as well as the diagonal ones.
        let g = Matrix6::from_fn(|i, j| if i * 6 + j < 32 { a[i * 6 + j] } else { 0.5 });
        let dense = g * g.transpose() + Matrix6::identity();
        for m in [mats.rigid_body, mats.added_mass, mats.mass(), dense] {
            let c = coriolis(&m, &nu);
            let scale = m.abs().max() * nu.abs().max().max(1e-12);
            prop_assert!((c + c.transpose()).abs().max() <= 1e-12 * scale);
            prop_assert!(x.dot(&(c * x)).abs() <= 1e-12 * scale * x.norm_squared().max(1e-300));
        }
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(p in vessel()) {
        let m: Matrix6<f64> = build_matrices(&p).unwrap().mass();
        prop_assert_eq!(m, m.transpose());
        prop_assert!(m.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn wrapped_angle_in_half_open_interval(a in -1e4..1e4f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        let turns = (a - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reference_filter_is_hurwitz(omega in vec3(0.01, 10.0), delta in vec3(0.01, 10.0)) {
        let f = RefFilterState::at_rest(Vector3::zeros(), omega, delta).unwrap();
        let max_re = f.a_matrix().complex_eigenvalues().iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(max_re < 0.0);
    }

    #[test]
    fn pseudo_inverse_is_minimum_norm(tau in vec3(-3.0, 3.0), z in prop::collection::vec(-5.0..5.0f64, 5)) {
        let alloc = Allocator::new(ThrusterLayout::default()).unwrap();
        let b = alloc.matrix();
        let pinv = alloc.pseudo_inverse();
        let tau = DVector::from_column_slice(tau.as_slice());
        let u = pinv * &tau;
        let n = b.ncols();
        let null = DMatrix::identity(n, n) - pinv * b;
        let v = &u + null * DVector::from_vec(z);
        prop_assert!((b * &u - &tau).amax() < 1e-12);
        prop_assert!((b * &v - &tau).amax() < 1e-9);
        prop_assert!(u.norm() <= v.norm() + 1e-12);
    }

    #[test]
    fn observer_stays_finite_under_dropouts(
        pattern in prop::collection::vec((any::<bool>(), -5.0..5.0f64, -5.0..5.0f64, -PI..PI), 1..200),
    ) {
        let mut obs = Observer::new(0.2).unwrap();
        for (k, (valid, x, y, psi)) in pattern.into_iter().enumerate() {
            obs.update(&MocapSample {
                t: k as f64 * 0.01,
                pose: valid.then(|| Vector3::new(x, y, psi)),
            });
            if let Ok((pose, rate)) = obs.estimate() {
                prop_assert!(pose.iter().chain(rate.iter()).all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn metric_window_shift_changes_count_by_one(n in 2usize..200, start in 0usize..199) {
        prop_assume!(start + 1 < n);
        let track: Vec<_> = (0..n)
            .map(|k| PlanarSample { t: k as f64 * 0.01, pose: Vector3::zeros(), rate: Vector3::zeros() })
            .collect();
        let a = compute_metrics(&track, &track, start, None).unwrap();
        let b = compute_metrics(&track, &track, start + 1, None).unwrap();
        prop_assert_eq!(a.samples, b.samples + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spectrum_is_non_negative_and_finite(hs in 0.001..1.0f64, tp in 0.3..5.0f64, gamma in 1.0..7.0f64) {
        let params = SpectrumParams::jonswap(hs, tp, gamma);
        for i in 0..10_000 {
            let w = 1e-3 + i as f64 * 50.0 / 10_000.0;
            let s = spectrum_density(&params, w).unwrap();
            prop_assert!(s.is_finite() && s >= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // No load, no current, no restoring: kinetic energy can only be dissipated.
    #[test]
    fn unforced_energy_is_non_increasing(p in vessel(), nu in vec6(0.5)) {
        let built = build_matrices(&p).unwrap();
        let mats = ModelMatrices::new(built.rigid_body, built.added_mass, built.damping, Matrix6::zeros()).unwrap();
        let m = mats.mass();
        let mut plant = Plant::new(&mats, Vector6::zeros(), VesselState::new(Vector6::zeros(), nu), 0.01);
        let energy = |s: &VesselState| 0.5 * s.nu.dot(&(m * s.nu));
        let mut prev = energy(&plant.state);
        for _ in 0..500 {
            let e = energy(plant.step(&Vector6::zeros(), None).unwrap());
            prop_assert!(e <= prev * (1.0 + 1e-12) + 1e-15, "energy rose from {} to {}", prev, e);
            prev = e;
        }
    }
}
