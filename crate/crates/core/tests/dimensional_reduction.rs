use approx::assert_relative_eq;
use proptest::prelude::*;
use ringlattice::reduction::{estimate_params, lg_profile, lg_profile_max, reduce_3d, Trap3DParams};

fn trap(width_ratio: f64, l: u32) -> Trap3DParams {
    let omega = 1.0 / (width_ratio * width_ratio);
    Trap3DParams {
        mass: 1.0,
        ring_radius: 1.0,
        omega_perp: omega,
        omega_z: omega,
        beam_waist: 1.0 / (f64::from(l) / 2.0).sqrt(),
        rayleigh_length: 1.0,
        lattice_scale_u: 1.0,
        l,
    }
}

#[test]
fn thin_ring_matches_estimate() {
    let t = trap(0.01, 2);
    let r = reduce_3d(&t, 1.0).unwrap();
    let est = estimate_params(&t);
    assert_relative_eq!(r.inertia, est.inertia, max_relative = 1e-3);
    assert_relative_eq!(r.depth, est.depth, max_relative = 1e-2);
    assert!(r.warnings.is_empty());
}

#[test]
fn thick_ring_warns() {
    let r = reduce_3d(&trap(0.2, 2), 1.0).unwrap();
    assert!(!r.warnings.is_empty());
}

#[test]
fn invalid_trap_rejected() {
    let mut t = trap(0.01, 2);
    t.mass = 0.0;
    assert!(reduce_3d(&t, 1.0).is_err());
    assert!(reduce_3d(&trap(0.01, 2), 0.0).is_err());
}

proptest! {
    #[test]
    fn profile_peaks_at_sqrt_l(l in 1u32..6, xi in 0.01f64..4.0) {
        prop_assert!(lg_profile(l, xi) <= lg_profile_max(l) * (1.0 + 1e-12));
        let peak = lg_profile(l, f64::from(l).sqrt());
        prop_assert!((peak - lg_profile_max(l)).abs() <= 1e-12 * peak);
    }

    #[test]
    fn depth_bounded_by_profile_peak(ratio in 0.005f64..0.08, l in 1u32..5) {
        let t = trap(ratio, l);
        let r = reduce_3d(&t, 1.0).unwrap();
        prop_assert!(r.depth > 0.0);
        prop_assert!(r.depth <= t.lattice_scale_u * lg_profile_max(l) * (1.0 + 1e-9));
        prop_assert!(r.inertia > 0.0);
    }
}
