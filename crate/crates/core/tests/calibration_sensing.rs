use approx::assert_relative_eq;
use proptest::prelude::*;
use ringlattice::analysis::{detect_bloch_signature, trace_derivative};
use ringlattice::calibration::{calibrate_iv, fit_affine, infer_angular_acceleration, predicted_inverse_bloch};
use ringlattice::protocols::{run_experiment, Drive, ExperimentConfig};
use ringlattice::{Error, RingLatticeParams};

fn p() -> RingLatticeParams {
    RingLatticeParams::dimensionless(0.5, 2).unwrap()
}

#[test]
fn simulated_chirp_calibrates_inertia() {
    let b = 0.0045;
    let mut cfg = ExperimentConfig::new(p(), Drive::Chirp { b }, 5400.0);
    cfg.grid_n = 64;
    cfg.dt = 0.01;
    let tr = run_experiment(&cfg).unwrap();
    let sig = detect_bloch_signature(&trace_derivative(&tr).unwrap()).unwrap();
    let r = calibrate_iv(sig.t_b, sig.peak_amplitude, b, 2, 1.0).unwrap();
    assert_relative_eq!(r.inertia, 2.0, max_relative = 0.01);
    assert_relative_eq!(r.depth, 0.5, max_relative = 0.05);
}

#[test]
fn reversed_oscillation_is_flagged() {
    assert!(predicted_inverse_bloch(&p(), 0.002, 1e-3) < 0.0);
    assert!(matches!(infer_angular_acceleration(0.004, 500.0, 0.004, 700.0, 2), Err(Error::DegenerateInput(_))));
}

proptest! {
    #[test]
    fn pairs_and_fit_agree_on_exact_data(w in -2e-3f64..2e-3, bs in proptest::collection::vec(0.001f64..0.05, 3..6)) {
        let mut bs = bs;
        bs.sort_by(f64::total_cmp);
        bs.dedup_by(|a, b| (*a - *b).abs() < 1e-4);
        prop_assume!(bs.len() >= 3);
        let inv: Vec<f64> = bs.iter().map(|&b| predicted_inverse_bloch(&p(), b, w)).collect();
        prop_assume!(inv.iter().all(|x| x.abs() > 1e-6));
        let pair = infer_angular_acceleration(bs[0], 1.0 / inv[0], bs[1], 1.0 / inv[1], 2).unwrap();
        let fit = fit_affine(&bs, &inv, 2, None).unwrap();
        prop_assert!((pair.omega_dot - w).abs() < 1e-9);
        prop_assert!((fit.omega_dot - w).abs() < 1e-9);
        prop_assert!(fit.residual_rms < 1e-12);
    }
}
