use approx::assert_relative_eq;
use proptest::prelude::*;
use ringlattice::protocols::{
    check_adiabaticity, critical_ramp_rate, loading_fidelity, lz_analytics, lz_phase, run_experiment, staircase_prediction,
    Drive, ExperimentConfig, LoadingMode, Stage,
};
use ringlattice::RingLatticeParams;

fn p(v: f64) -> RingLatticeParams {
    RingLatticeParams::dimensionless(v, 2).unwrap()
}

#[test]
fn critical_rate_gives_inverse_e() {
    let params = p(0.5);
    let s_c = critical_ramp_rate(&params);
    assert_relative_eq!(s_c, std::f64::consts::PI / 64.0, max_relative = 1e-14);
    let r = lz_analytics(&params, s_c).unwrap();
    assert_relative_eq!(r.t_lz, (-1f64).exp(), max_relative = 1e-12);
    assert_relative_eq!(r.adiabatic_margin, 1.0, max_relative = 1e-12);
    assert!(!check_adiabaticity(&params, Stage::Rotation { ramp_rate: s_c }, 10.0).ok);
    assert!(check_adiabaticity(&params, Stage::Rotation { ramp_rate: s_c / 20.0 }, 10.0).ok);
}

#[test]
fn staircase_limits() {
    for n in 0..6 {
        assert_relative_eq!(staircase_prediction(0.0, n, 2).unwrap(), -4.0 * f64::from(n), epsilon = 1e-12);
        assert_relative_eq!(staircase_prediction(1.0, n, 2).unwrap(), 0.0, epsilon = 1e-12);
    }
    assert!(staircase_prediction(1.5, 1, 2).is_err());
}

#[test]
fn lz_phase_vanishes_adiabatically() {
    assert!((lz_phase(50.0) - 1.0 / 600.0).abs() < 1e-6);
    assert_relative_eq!(lz_phase(1e-12), std::f64::consts::FRAC_PI_4, epsilon = 1e-9);
}

#[test]
fn ramp_loading_then_rotation() {
    let mut cfg = ExperimentConfig::new(p(5.0), Drive::Ramp { s: 0.01 }, 400.0);
    cfg.loading = LoadingMode::Ramp;
    cfg.load_time = 1.2;
    cfg.grid_n = 64;
    cfg.dt = 0.001;
    let tr = run_experiment(&cfg).unwrap();
    assert!(tr.metadata.warnings.is_empty(), "{:?}", tr.metadata.warnings);
    // about 1% is left outside the ground band after loading
    assert!((tr.value_at(400.0).unwrap() + 4.0).abs() < 0.1);
    cfg.loading = LoadingMode::GroundState;
    let exact = run_experiment(&cfg).unwrap();
    assert!((exact.value_at(400.0).unwrap() + 4.0).abs() < 0.01);
    assert!(loading_fidelity(&p(5.0), 0.15, 64, 0.001).unwrap() < loading_fidelity(&p(5.0), 1.2, 64, 0.001).unwrap());
}

#[test]
fn guard_breach_is_reported() {
    let mut cfg = ExperimentConfig::new(p(0.5), Drive::Ramp { s: 0.05 }, 10.0);
    cfg.grid_n = 32;
    let tr = run_experiment(&cfg).unwrap();
    assert!(tr.metadata.warnings.iter().any(|w| w.contains("not adiabatic")));
}

#[test]
fn invalid_configs_rejected() {
    let mut cfg = ExperimentConfig::new(p(0.5), Drive::Ramp { s: 0.01 }, 10.0);
    cfg.external_acceleration = Some(1e-3);
    assert!(cfg.validate().is_err());
    let mut cfg = ExperimentConfig::new(p(0.5), Drive::Ramp { s: 0.01 }, 10.0);
    cfg.grid_n = 30;
    assert!(cfg.validate().is_err());
}

proptest! {
    #[test]
    fn staircase_between_bounds(t in 0.0f64..1.0, n in 0u32..8) {
        let v = staircase_prediction(t, n, 2).unwrap();
        prop_assert!(v <= 1e-12 && v >= -4.0 * f64::from(n) - 1e-12);
        if n > 0 {
            prop_assert!(v <= staircase_prediction(t, n - 1, 2).unwrap() + 1e-12);
        }
    }

    #[test]
    fn transmission_decreases_with_slower_ramp(v in 0.1f64..3.0, s in 1e-3f64..0.5) {
        let a = lz_analytics(&p(v), s).unwrap();
        let b = lz_analytics(&p(v), s / 2.0).unwrap();
        prop_assert!(b.t_lz <= a.t_lz);
        prop_assert!((a.t_lz - (-2.0 * std::f64::consts::PI * a.gamma).exp()).abs() < 1e-14);
    }
}
