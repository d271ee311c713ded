use approx::assert_relative_eq;
use proptest::prelude::*;
use ringlattice::analysis::mean_angular_momentum;
use ringlattice::bands::{band_table, bloch_state_on_ring, group_velocity, solve_bands, BlochLabel};
use ringlattice::RingLatticeParams;

fn p(v: f64) -> RingLatticeParams {
    RingLatticeParams::dimensionless(v, 2).unwrap()
}

#[test]
fn free_ring_bands_are_parabolas() {
    let b = solve_bands(&p(0.0), 0.5, 2, 32).unwrap();
    let want = [0.0625, (0.5f64 - 4.0).powi(2) / 4.0, (0.5f64 + 4.0).powi(2) / 4.0];
    for (e, w) in b.energies.iter().zip(want) {
        assert_relative_eq!(*e, w, epsilon = 1e-12);
    }
}

#[test]
fn table_shape() {
    let qs: Vec<f64> = (0..161).map(|i| -2.0 + 4.0 * f64::from(i) / 160.0).collect();
    let rows = band_table(&p(1.0), &qs, 3, 32).unwrap();
    assert_eq!(rows.len(), 161 * 4);
    assert!(solve_bands(&p(1.0), 0.0, 40, 32).is_err());
}

#[test]
fn bloch_state_carries_band_momentum() {
    let params = p(3.0);
    let psi = bloch_state_on_ring(&params, &BlochLabel::new(0, 0, 0.0), 128).unwrap();
    assert_relative_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-12);
    assert!(mean_angular_momentum(&psi, 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn bands_periodic_and_even(q in -2.0f64..2.0, v in 0.0f64..5.0) {
        let params = p(v);
        let a = solve_bands(&params, q, 3, 32).unwrap();
        let b = solve_bands(&params, q + 4.0, 3, 32).unwrap();
        let c = solve_bands(&params, -q, 3, 32).unwrap();
        for n in 0..4 {
            prop_assert!((a.energies[n] - b.energies[n]).abs() < 1e-9);
            prop_assert!((a.energies[n] - c.energies[n]).abs() < 1e-9);
            if n > 0 {
                prop_assert!(a.energies[n] >= a.energies[n - 1] - 1e-12);
            }
        }
    }

    #[test]
    fn group_velocity_is_band_slope(q in -1.8f64..1.8, v in 0.5f64..5.0) {
        let params = p(v);
        let h = 1e-4;
        let fd = (solve_bands(&params, q + h, 0, 32).unwrap().energies[0]
            - solve_bands(&params, q - h, 0, 32).unwrap().energies[0]) / (2.0 * h);
        let g = group_velocity(&params, 0, q).unwrap();
        prop_assert!((g - fd).abs() < 1e-6);
    }

    #[test]
    fn ground_band_is_below_free_minimum_plus_mean_depth(q in -2.0f64..2.0, v in 0.0f64..5.0) {
        let e0 = solve_bands(&p(v), q, 0, 32).unwrap().energies[0];
        prop_assert!(e0 <= q * q / 4.0 + v / 2.0 + 1e-12);
        prop_assert!(e0 >= 0.0 - 1e-12);
    }
}
