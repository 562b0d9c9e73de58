use atomflux_core::scattering::{solve_matching, FieldSetup};
use atomflux_core::{Complex64, HBAR};
use proptest::prelude::*;

const MASS: f64 = 2.2e-25;
const K0: f64 = MASS * 0.01 / HBAR;

/// Rectangular step of height `v` over `[0, l]`: `(r, t)` for `e^{ikx}`
/// incident from the left, transmitted wave `t e^{ikx}`.
fn barrier(v: f64, l: f64, k: f64) -> (Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    let kappa = Complex64::new(k * k - 2.0 * MASS * v / (HBAR * HBAR), 0.0).sqrt();
    let (c, s) = ((kappa * l).cos(), (kappa * l).sin());
    let denom = c - i * (k * k + kappa * kappa) / (2.0 * k * kappa) * s;
    let r = i * (kappa * kappa - k * k) / (2.0 * k * kappa) * s / denom;
    (r, Complex64::from_polar(1.0, -k * l) / denom)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flux_is_conserved(
        k in 0.3 * K0..3.0 * K0,
        rabi in 0.0..4e5_f64,
        detuning in -2e5..2e5_f64,
        phase in -3.2..3.2_f64,
        l in 1e-6..2e-4_f64,
    ) {
        let setup = FieldSetup::new(MASS, detuning, rabi, phase, l).unwrap();
        let s = solve_matching(&setup, k).unwrap();
        prop_assert!(s.unitarity_residual().abs() < 1e-10, "residual {}", s.unitarity_residual());
        prop_assert!(s.matching_residual() < 1e-10, "matching {}", s.matching_residual());
    }

    #[test]
    fn resonant_detuning_free_case_matches_step_formula(
        k in 0.5 * K0..2.0 * K0,
        rabi in 1e4..3e5_f64,
        l in 1e-6..2e-5_f64,
    ) {
        let setup = FieldSetup::new(MASS, 0.0, rabi, 0.0, l).unwrap();
        let s = solve_matching(&setup, k).unwrap();
        let v = 0.5 * HBAR * rabi;
        let ((rp, tp), (rm, tm)) = (barrier(v, l, k), barrier(-v, l, k));
        let (t1, t2) = s.transmission_amplitudes();
        prop_assert!((t1 - 0.5 * (tp + tm)).norm() < 1e-10);
        prop_assert!((t2 - 0.5 * (tp - tm)).norm() < 1e-10);
        prop_assert!((s.r1 - 0.5 * (rp + rm)).norm() < 1e-10);
        prop_assert!((s.r2 - 0.5 * (rp - rm)).norm() < 1e-10);
    }

    #[test]
    fn phase_only_rotates_channel_two(
        k in 0.5 * K0..2.0 * K0,
        rabi in 1e4..3e5_f64,
        phase in -3.0..3.0_f64,
    ) {
        let l = 2e-5;
        let a = solve_matching(&FieldSetup::new(MASS, 1e4, rabi, 0.0, l).unwrap(), k).unwrap();
        let b = solve_matching(&FieldSetup::new(MASS, 1e4, rabi, phase, l).unwrap(), k).unwrap();
        prop_assert!((a.transmission() - b.transmission()).abs() < 1e-10);
        prop_assert!((a.t1 - b.t1).norm() < 1e-10);
        prop_assert!((a.t2.norm() - b.t2.norm()).abs() < 1e-10);
    }
}

#[test]
fn no_coupling_is_transparent() {
    for detuning in [0.0, 5e4, -5e4] {
        let setup = FieldSetup::new(MASS, detuning, 0.0, 0.0, 1e-4).unwrap();
        let s = solve_matching(&setup, K0).unwrap();
        let (t1, t2) = s.transmission_amplitudes();
        assert!((t1 - 1.0).norm() < 1e-12, "T1 = {t1}");
        assert!(s.r1.norm() < 1e-12 && s.r2.norm() < 1e-12 && t2.norm() < 1e-12);
    }
}

#[test]
fn transmission_peaks_where_the_lower_channel_fits_whole_wavelengths() {
    // With the upper dressed channel deeply evanescent only the lower one
    // carries flux, and T1 = t-/2 has |T1| = 1/2 when κ-l is a multiple of π.
    let l = 2e-5;
    let rabi = 3e5;
    let k = 0.5 * K0;
    let kappa = (k * k + MASS * rabi / HBAR).sqrt();
    let n = (kappa * l / std::f64::consts::PI).round();
    let l_res = n * std::f64::consts::PI / kappa;
    let s = solve_matching(&FieldSetup::new(MASS, 0.0, rabi, 0.0, l_res).unwrap(), k).unwrap();
    let (t1, t2) = s.transmission_amplitudes();
    assert!((t1.norm() - 0.5).abs() < 1e-6, "|T1| = {}", t1.norm());
    assert!((t2.norm() - 0.5).abs() < 1e-6, "|T2| = {}", t2.norm());
}

#[test]
fn closed_channel_carries_no_flux() {
    // q² = k² + 2mΔ/ħ < 0
    let k = 0.5 * K0;
    let detuning = -2.0 * k * k * HBAR / (2.0 * MASS);
    let setup = FieldSetup::new(MASS, detuning, 1e5, 0.0, 5e-6).unwrap();
    let s = solve_matching(&setup, k).unwrap();
    assert!(!s.channel2_open());
    assert!(s.q.re == 0.0 && s.q.im > 0.0);
    assert!((s.r1.norm_sqr() + s.t1.norm_sqr() - 1.0).abs() < 1e-10);
    assert!(s.matching_residual() < 1e-10);
}

#[test]
fn deep_tunnelling_stays_finite() {
    let setup = FieldSetup::new(MASS, -3e5, 3e5, 0.0, 2e-4).unwrap();
    let s = solve_matching(&setup, 0.3 * K0).unwrap();
    assert!(s.t1.is_finite() && s.t2.is_finite() && s.r1.is_finite() && s.r2.is_finite());
    assert!(s.unitarity_residual().abs() < 1e-10);
}
