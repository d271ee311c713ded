use approx::assert_relative_eq;
use proptest::prelude::*;
use ringlattice::model::{bloch_time, chirp_rate_for_ramp, eta_of_t, ramp_for_chirp, ramp_rate, Segment};
use ringlattice::{DriveSchedule, Error, Program, RingLatticeParams, UnitSystem};

#[test]
fn recoil_scale_follows_inertia() {
    let p = RingLatticeParams::new(8.0, 1.0, 4, UnitSystem::physical(1.0)).unwrap();
    assert_relative_eq!(p.recoil_energy, 1.0, max_relative = 1e-15);
    assert!(matches!(RingLatticeParams::new(2.0, 1.0, 0, UnitSystem::dimensionless()), Err(Error::InvalidParameter(_))));
    assert!(RingLatticeParams::new(-1.0, 1.0, 2, UnitSystem::physical(1.0)).is_err());
    assert!(RingLatticeParams::dimensionless(-0.5, 2).is_err());
}

#[test]
fn linear_ramp_has_constant_rate() {
    let p = RingLatticeParams::dimensionless(3.0, 2).unwrap();
    let s = DriveSchedule::linear_ramp(&p, 3.0, 0.01);
    for t in [0.0, 13.0, 400.0, 1200.0] {
        assert_relative_eq!(ramp_rate(&s, &p, t), 0.01, max_relative = 1e-12);
        assert_relative_eq!(eta_of_t(&s, &p, t), 0.01 * t, epsilon = 1e-12);
    }
    assert_relative_eq!(bloch_time(&p, 0.01), 400.0, max_relative = 1e-14);
}

#[test]
fn piecewise_program_is_continuous_where_declared() {
    let prog = Program::piecewise(vec![(-1.0, Segment::Linear { value: 0.0, slope: 2.0 }), (0.0, Segment::Constant { value: 2.0 })]).unwrap();
    assert_relative_eq!(prog.eval(-0.5), 1.0, epsilon = 1e-15);
    assert_relative_eq!(prog.eval(3.0), 2.0, epsilon = 1e-15);
    assert_relative_eq!(prog.integral(-1.0, 1.0).unwrap(), 1.0 + 2.0, epsilon = 1e-12);
}

proptest! {
    #[test]
    fn chirp_and_ramp_are_inverse(b in -0.1f64..0.1, w in -1e-3f64..1e-3, inertia in 0.5f64..8.0) {
        let p = RingLatticeParams::new(inertia, 1.0, 2, UnitSystem::physical(1.0)).unwrap();
        let s = ramp_for_chirp(&p, b, 0.0);
        prop_assert!((chirp_rate_for_ramp(&p, s) - b).abs() <= 1e-12 * b.abs().max(1e-12));
        let sw = ramp_for_chirp(&p, b, w);
        prop_assert!((sw - (s - inertia * w)).abs() <= 1e-12 * (1.0 + sw.abs()));
    }

    #[test]
    fn eta_integrates_rate(s in 1e-4f64..0.1, t in 0.0f64..2000.0) {
        let p = RingLatticeParams::dimensionless(0.5, 2).unwrap();
        let sched = DriveSchedule::linear_ramp(&p, 0.5, s);
        prop_assert!((eta_of_t(&sched, &p, t) - s * t).abs() <= 1e-10 * (1.0 + s * t));
    }
}
