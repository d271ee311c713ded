//! Complex log-gamma on the principal (continuous) branch.

use num_complex::Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(z)` continued analytically off the negative real axis, so that
/// `Im ln Γ(z)` is the unwrapped argument of `Γ(z)`.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Upward recurrence keeps the branch continuous: ln Γ(z) = ln Γ(z+n) - Σ ln(z+k).
        let n = (0.5 - z.re).ceil();
        let mut shift = Complex64::new(0.0, 0.0);
        let mut k = 0.0;
        while k < n {
            shift += (z + k).ln();
            k += 1.0;
        }
        return ln_gamma(z + n) - shift;
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}
