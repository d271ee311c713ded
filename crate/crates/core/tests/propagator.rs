use std::collections::BTreeMap;

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use ringlattice::bands::{band_energy_theta, bloch_state_on_ring, BlochLabel};
use ringlattice::propagator::{evolve, evolve_band_basis, two_level_evolve, BandBasisOptions};
use ringlattice::wavefunction::WaveFunction;
use ringlattice::{DriveSchedule, RingLatticeParams};

fn p(v: f64) -> RingLatticeParams {
    RingLatticeParams::dimensionless(v, 2).unwrap()
}

#[test]
fn free_plane_wave_picks_up_kinetic_phase() {
    let params = p(0.0);
    let m = 3;
    let psi = WaveFunction::plane_wave(64, m).unwrap();
    let t = 10.0;
    let tr = evolve(&psi, &params, &DriveSchedule::stationary(0.0), (0.0, t), 0.01, 100).unwrap();
    let ov = psi.inner(&tr.final_state).unwrap();
    assert_relative_eq!(ov.norm(), 1.0, epsilon = 1e-12);
    let want = Complex64::from_polar(1.0, -(m * m) as f64 / 4.0 * t);
    assert!((ov - want).norm() < 1e-9, "{ov} vs {want}");
    assert!(tr.lz.iter().all(|l| (l - m as f64).abs() < 1e-12));
}

#[test]
fn stationary_bloch_state_only_gains_phase() {
    let params = p(3.0);
    let label = BlochLabel::new(0, 0, 0.0);
    let psi = bloch_state_on_ring(&params, &label, 128).unwrap();
    let e = band_energy_theta(&params, &label, 32).unwrap();
    let t = 20.0;
    let phase_err = |dt: f64| {
        let tr = evolve(&psi, &params, &DriveSchedule::stationary(3.0), (0.0, t), dt, usize::MAX).unwrap();
        let ov = psi.inner(&tr.final_state).unwrap();
        assert_relative_eq!(ov.norm(), 1.0, epsilon = 1e-9);
        (ov * Complex64::from_polar(1.0, e * t)).arg().abs()
    };
    let (a, b) = (phase_err(0.005), phase_err(0.0025));
    assert!(a < 1e-3, "phase error {a}");
    assert!((a / b).log2() > 1.9, "{a} {b}");
}

#[test]
fn band_basis_matches_split_step_on_short_ramp() {
    let params = p(1.0);
    let sched = DriveSchedule::linear_ramp(&params, 1.0, 0.005);
    let init = bloch_state_on_ring(&params, &BlochLabel::new(0, 0, 0.0), 128).unwrap();
    let ss = evolve(&init, &params, &sched, (0.0, 200.0), 0.005, 20000).unwrap();
    let mut c = BTreeMap::new();
    c.insert((0usize, 0i64), Complex64::new(1.0, 0.0));
    let opts = BandBasisOptions { n_bands: 4, sample_dt: 100.0, ..Default::default() };
    let bb = evolve_band_basis(&c, &params, &sched, (0.0, 200.0), &opts).unwrap();
    assert!((ss.lz.last().unwrap() - bb.lz.last().unwrap()).abs() < 1e-4);
}

#[test]
fn two_level_crossing_follows_lz() {
    let params = p(0.5);
    let s_c = std::f64::consts::PI / 64.0;
    let w = 10.0 * 0.5 * 2.0 / 8.0;
    let r = two_level_evolve(&params, s_c, (2.0 - w, 2.0 + w), 50).unwrap();
    assert_relative_eq!(r.excited_fraction, (-1f64).exp(), max_relative = 0.02);
    assert!(two_level_evolve(&params, -1.0, (0.0, 1.0), 10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn propagation_is_unitary(
        v in 0.0f64..5.0,
        s in -0.05f64..0.05,
        amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5),
    ) {
        let params = p(v);
        let coeffs: Vec<(i64, Complex64)> = amps.iter().enumerate().map(|(i, (a, b))| (i as i64 - 2, Complex64::new(*a, *b))).collect();
        prop_assume!(coeffs.iter().map(|c| c.1.norm_sqr()).sum::<f64>() > 1e-3);
        let mut psi = WaveFunction::from_momentum(64, &coeffs).unwrap();
        psi.normalize().unwrap();
        let sched = DriveSchedule::linear_ramp(&params, v, s);
        let tr = evolve(&psi, &params, &sched, (0.0, 5.0), 0.005, 100).unwrap();
        prop_assert!((tr.final_state.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!(tr.max_norm_drift < 1e-10);
    }
}
