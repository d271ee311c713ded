//! Real symmetric tridiagonal eigensolver: implicit QL with Wilkinson shifts
//! for eigenvalues, inverse iteration for selected eigenvectors.

use crate::error::{Error, Result};

const MAX_QL_ITER: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[j]` belongs to `values[j]`; unit Euclidean norm.
    pub vectors: Vec<Vec<f64>>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::InvalidInput(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        if diag.iter().chain(off.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numerical("tridiagonal matrix has non-finite entries".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn norm_estimate(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        ql_implicit(&mut d, &mut e, None)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Full decomposition by QL with accumulated rotations.
    pub fn eigen_decomposition(&self) -> Result<Eigenpairs> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        ql_implicit(&mut d, &mut e, Some(&mut z))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&j| d[j]).collect();
        let vectors = order.iter().map(|&j| (0..n).map(|k| z[k * n + j]).collect()).collect();
        Ok(Eigenpairs { values, vectors })
    }

    /// The `count` lowest eigenpairs. Eigenvalues come from QL on the whole
    /// matrix, eigenvectors from inverse iteration with re-orthogonalisation
    /// inside clusters of close eigenvalues.
    pub fn lowest(&self, count: usize) -> Result<Eigenpairs> {
        let n = self.dim();
        let count = count.min(n);
        let values: Vec<f64> = self.eigenvalues()?.into_iter().take(count).collect();
        if self.off.iter().all(|&x| x == 0.0) {
            return Ok(self.diagonal_pairs(count));
        }
        let scale = self.norm_estimate().max(f64::MIN_POSITIVE);
        let cluster_tol = 1e-3 * scale;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for (j, &lambda) in values.iter().enumerate() {
            let cluster: Vec<&Vec<f64>> = (0..j)
                .filter(|&i| (values[i] - lambda).abs() < cluster_tol)
                .map(|i| &vectors[i])
                .collect();
            let v = self.inverse_iteration(lambda, scale, j, &cluster)?;
            vectors.push(v);
        }
        Ok(Eigenpairs { values, vectors })
    }

    fn diagonal_pairs(&self, count: usize) -> Eigenpairs {
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.diag[a].total_cmp(&self.diag[b]));
        let values = order.iter().take(count).map(|&i| self.diag[i]).collect();
        let vectors = order
            .iter()
            .take(count)
            .map(|&i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v
            })
            .collect();
        Eigenpairs { values, vectors }
    }

    fn inverse_iteration(&self, lambda: f64, scale: f64, seed: usize, against: &[&Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.dim();
        let tiny = f64::EPSILON * scale;
        // Deterministic, non-degenerate start vector.
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * (((i + 1) * (seed + 3)) as f64 * 0.618_033_988_749_895).fract())
            .collect();
        let lu = TridiagLu::factor(&self.diag, &self.off, lambda, tiny);
        for _ in 0..3 {
            orthogonalize(&mut x, against);
            normalize(&mut x)?;
            lu.solve(&mut x);
        }
        orthogonalize(&mut x, against);
        normalize(&mut x)?;
        Ok(x)
    }
}

fn orthogonalize(x: &mut [f64], against: &[&Vec<f64>]) {
    for v in against {
        let p: f64 = x.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        for (xi, vi) in x.iter_mut().zip(v.iter()) {
            *xi -= p * vi;
        }
    }
}

fn normalize(x: &mut [f64]) -> Result<()> {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Numerical("inverse iteration collapsed".into()));
    }
    x.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

/// LU factorisation of `T - λI` with partial pivoting (Gaussian elimination
/// for tridiagonal systems; the upper factor gains a second super-diagonal).
struct TridiagLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(diag: &[f64], off: &[f64], lambda: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut u0: Vec<f64> = diag.iter().map(|d| d - lambda).collect();
        let mut u1: Vec<f64> = off.to_vec();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        // `lower[i]` is the sub-diagonal entry below row i still to eliminate.
        let mut lower: Vec<f64> = off.to_vec();
        lower.push(0.0);
        for i in 0..n.saturating_sub(1) {
            let below = lower[i];
            if below.abs() > u0[i].abs() {
                // Swap rows i and i + 1.
                swapped[i] = true;
                let (a0, a1, a2) = (u0[i], u1[i], u2[i]);
                u0[i] = below;
                u1[i] = u0[i + 1];
                u2[i] = u1[i + 1];
                let m = a0 / below;
                mult[i] = m;
                u0[i + 1] = a1 - m * u1[i];
                u1[i + 1] = a2 - m * u2[i];
            } else {
                let piv = if u0[i] == 0.0 { tiny } else { u0[i] };
                u0[i] = piv;
                let m = below / piv;
                mult[i] = m;
                u0[i + 1] -= m * u1[i];
                u1[i + 1] -= m * u2[i];
            }
        }
        for p in u0.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        Self { u0, u1, u2, mult, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.mult[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * b[i + 2];
            }
            b[i] = s / self.u0[i];
        }
        // Rescale to keep magnitudes bounded across iterations.
        let m = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m > 0.0 && m.is_finite() {
            b.iter_mut().for_each(|v| *v /= m);
        }
    }
}

/// Implicit QL iteration (EISPACK `tql2` lineage). `e[i]` couples `i` and
/// `i + 1`; `e[n-1]` must be zero. On return `d` holds the unsorted
/// eigenvalues and `z` (row-major, `n×n`) the eigenvectors as columns.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITER {
                    return Err(Error::Numerical(format!(
                        "QL iteration failed to converge for eigenvalue {l}"
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        for k in 0..n {
                            let zi1 = z[k * n + i + 1];
                            let zi = z[k * n + i];
                            z[k * n + i + 1] = s * zi + c * zi1;
                            z[k * n + i] = c * zi - s * zi1;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("QL produced non-finite eigenvalues".into()));
    }
    Ok(())
}
