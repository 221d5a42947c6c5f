//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use num_complex::Complex64;

use super::matrix::{c, CMat, ZERO};

const MAX_SWEEPS: usize = 100;
const OFF_TOL: f64 = 1e-12;

/// Eigen-decomposition `M = V diag(λ) V†` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigen {
    /// Rebuild `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for k in 0..n {
                    if fv[k] != 0.0 {
                        acc += v[(i, k)] * v[(j, k)].conj() * fv[k];
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
        }
        for i in 0..n {
            out[(i, i)].im = 0.0;
        }
        out
    }

    pub fn reconstruct(&self) -> CMat {
        self.map(|l| l)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k).iter().copied().collect()
    }
}

fn off_norm_sq(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s
}

/// Eigen-decomposition of a Hermitian matrix. Only the Hermitian part of `m`
/// is used.
///
/// Stops once the off-diagonal Frobenius norm falls below 1e-12 relative to
/// the Frobenius norm of the input.
pub fn eigh(m: &CMat) -> Eigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh needs a square matrix");
    let mut a = CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let mut v = CMat::identity(n, n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = OFF_TOL * scale;

    for _ in 0..MAX_SWEEPS {
        if off_norm_sq(&a).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let z = a[(p, q)];
                let absz = z.norm();
                if absz <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Rotation is a no-op at double precision.
                if absz < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                let phase = z / absz; // e^{iφ}
                let theta = (aqq - app) / (2.0 * absz);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let upp = c(cs, 0.0);
                let upq = c(sn, 0.0);
                let uqp = -phase.conj() * sn;
                let uqq = phase.conj() * cs;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * upp + akq * uqp;
                    a[(k, q)] = akp * upq + akq * uqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * upp + vkq * uqp;
                    v[(k, q)] = vkp * upq + vkq * uqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |r, k| v[(r, order[k])]);
    Eigen { values, vectors }
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).values
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigh(m).min()
}

/// Positive part `M_+` of a Hermitian matrix.
pub fn positive_part(m: &CMat) -> CMat {
    eigh(m).map(|l| l.max(0.0))
}

/// Matrix square root of a PSD matrix (negative eigenvalues clipped).
pub fn sqrt_psd(m: &CMat) -> CMat {
    eigh(m).map(|l| l.max(0.0).sqrt())
}

/// Trace norm ‖M‖₁ of a Hermitian matrix.
pub fn trace_norm(m: &CMat) -> f64 {
    eigvalsh(m).iter().map(|l| l.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{max_abs, unitarity_defect};
    use crate::qcore::random::random_hermitian;
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pauli_x_has_eigenvalues_plus_minus_one() {
        let x = crate::qcore::matrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let e = eigh(&x);
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_unitarity_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &d in &[2usize, 3, 4, 8, 16] {
            for _ in 0..1000 {
                let h = random_hermitian(d, &mut rng);
                let e = eigh(&h);
                assert!(max_abs(&(e.reconstruct() - &h)) <= 1e-9, "dim {d}");
                assert!(unitarity_defect(&e.vectors) <= 1e-9, "dim {d}");
            }
        }
    }

    #[test]
    fn agrees_with_nalgebra_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &d in &[2usize, 5, 16] {
            let h = random_hermitian(d, &mut rng);
            let mut reference: Vec<f64> =
                SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            let ours = eigvalsh(&h);
            for (a, b) in ours.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_and_diagonal_inputs() {
        let e = eigh(&(CMat::identity(4, 4) * c(0.25, 0.0)));
        assert!(e.values.iter().all(|l| (l - 0.25).abs() < 1e-15));
        let d = crate::qcore::matrix::diag(&[0.3, -0.2, 0.0]);
        assert_eq!(eigvalsh(&d), vec![-0.2, 0.0, 0.3]);
    }
}
