//! Linear minimisation over spectrahedra of density matrices, via clarabel.
//!
//! The variable is a Hermitian `n×n` matrix `μ`, parametrised by its real
//! diagonal and the real/imaginary parts of the upper triangle. Constraints
//! are `Tr μ = 1`, linear equalities `Tr(A μ) = b`, and any number of
//! positivity constraints `L(μ) ⪰ 0` for linear Hermitian maps `L`. Complex
//! PSD blocks enter the real solver through `X ↦ [[Re X, −Im X], [Im X, Re X]]`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};
use crate::qcore::matrix::{c, hermitize, trace_product_re, CMat, ZERO};

/// Hermitian basis: `|i⟩⟨i|`, `|i⟩⟨j| + |j⟩⟨i|`, `i(|i⟩⟨j| − |j⟩⟨i|)`.
pub fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMat::zeros(n, n);
        e[(i, i)] = c(1.0, 0.0);
        out.push(e);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = CMat::zeros(n, n);
            s[(i, j)] = c(1.0, 0.0);
            s[(j, i)] = c(1.0, 0.0);
            out.push(s);
            let mut a = CMat::zeros(n, n);
            a[(i, j)] = c(0.0, 1.0);
            a[(j, i)] = c(0.0, -1.0);
            out.push(a);
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn coordinates(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let mut x = Vec::with_capacity(n * n);
    for i in 0..n {
        x.push(m[(i, i)].re);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            x.push(m[(i, j)].re);
            x.push(m[(i, j)].im);
        }
    }
    x
}

fn assemble(x: &[f64], n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = c(x[k], 0.0);
        k += 1;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            m[(i, j)] = c(x[k], x[k + 1]);
            m[(j, i)] = c(x[k], -x[k + 1]);
            k += 2;
        }
    }
    m
}

/// svec of the real embedding of a Hermitian matrix: upper triangle,
/// column-major, off-diagonal entries scaled by √2.
fn svec_embedded(h: &CMat) -> Vec<f64> {
    let m = h.nrows();
    let big = |r: usize, s: usize| -> f64 {
        let (bi, i) = (r / m, r % m);
        let (bj, j) = (s / m, s % m);
        let z = h[(i, j)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    };
    let d = 2 * m;
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for col in 0..d {
        for row in 0..=col {
            let v = big(row, col);
            out.push(if row == col { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// A spectrahedron of density matrices.
#[derive(Clone, Debug)]
pub struct Spectrahedron {
    n: usize,
    equalities: Vec<(CMat, f64)>,
    /// Images of the basis elements under each positivity map.
    psd_blocks: Vec<Vec<CMat>>,
}

/// Minimiser and certified values of one linear minimisation.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub argmin: CMat,
    pub primal: f64,
    /// Dual objective; a lower bound on the true minimum up to solver accuracy.
    pub dual: f64,
}

impl Spectrahedron {
    /// All density matrices of dimension `n`.
    pub fn states(n: usize) -> Self {
        Spectrahedron { n, equalities: Vec::new(), psd_blocks: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add_equality(&mut self, a: CMat, b: f64) {
        self.equalities.push((hermitize(&a), b));
    }

    /// Add `L(μ) ⪰ 0` for a linear map given pointwise.
    pub fn add_psd_map(&mut self, map: impl Fn(&CMat) -> CMat) {
        let imgs = hermitian_basis(self.n).iter().map(|b| hermitize(&map(b))).collect();
        self.psd_blocks.push(imgs);
    }

    /// Minimise `Re Tr(G μ)` over the spectrahedron.
    pub fn minimize(&self, g: &CMat) -> Result<SdpSolution> {
        let n = self.n;
        let basis = hermitian_basis(n);
        let nv = basis.len();
        let q: Vec<f64> = basis.iter().map(|b| trace_product_re(g, b)).collect();
        // Solve with a unit-size objective; the argmin is unchanged.
        let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let q: Vec<f64> = q.iter().map(|v| v / scale).collect();

        // Dense columns of A, row blocks: [trace; equalities; psd(μ); psd(L_k)].
        let mut rows_b: Vec<f64> = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); nv];
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        let n_eq = 1 + self.equalities.len();
        for (k, b) in basis.iter().enumerate() {
            cols[k].push(crate::qcore::matrix::trace(b).re);
            for (a, _) in &self.equalities {
                cols[k].push(trace_product_re(a, b));
            }
        }
        rows_b.push(1.0);
        rows_b.extend(self.equalities.iter().map(|(_, v)| *v));
        cones.push(SupportedConeT::ZeroConeT(n_eq));

        let mut push_block = |imgs: &[CMat], cols: &mut Vec<Vec<f64>>, rows_b: &mut Vec<f64>| {
            let m = imgs[0].nrows();
            for (k, img) in imgs.iter().enumerate() {
                cols[k].extend(svec_embedded(img).into_iter().map(|v| -v));
            }
            let len = (2 * m) * (2 * m + 1) / 2;
            rows_b.extend(std::iter::repeat_n(0.0, len));
            cones.push(SupportedConeT::PSDTriangleConeT(2 * m));
        };
        push_block(&basis, &mut cols, &mut rows_b);
        for imgs in &self.psd_blocks {
            push_block(imgs, &mut cols, &mut rows_b);
        }

        let m_rows = rows_b.len();
        let mut colptr = Vec::with_capacity(nv + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &cols {
            for (r, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    rowval.push(r);
                    nzval.push(v);
                }
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m_rows, nv, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::zeros((nv, nv));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(200)
            .build()
            .map_err(|e| Error::Numerical(format!("solver settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &rows_b, &cones, settings)
            .map_err(|e| Error::Numerical(format!("solver setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {}
            s => return Err(Error::Numerical(format!("SDP status {s:?}"))),
        }
        let argmin = assemble(&sol.x, n);
        Ok(SdpSolution { primal: sol.obj_val * scale, dual: sol.obj_val_dual * scale, argmin })
    }
}

/// Clip tiny negative eigenvalues and renormalise an SDP solution.
pub fn clean_state(m: &CMat) -> CMat {
    let p = crate::qcore::eig::positive_part(m);
    let t = crate::qcore::matrix::trace(&p).re;
    if t > 0.0 {
        p * c(1.0 / t, 0.0)
    } else {
        m.map(|_| ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::eig::eigh;
    use crate::qcore::random::random_hermitian;
    use crate::qcore::tensor_ops::partial_transpose_raw;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coordinates_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(3, &mut rng);
        let x = coordinates(&h);
        assert!(crate::qcore::matrix::max_abs(&(assemble(&x, 3) - &h)) < 1e-15);
    }

    #[test]
    fn unconstrained_minimum_is_smallest_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2, 3, 4] {
            let g = random_hermitian(n, &mut rng);
            let sol = Spectrahedron::states(n).minimize(&g).unwrap();
            let lmin = eigh(&g).min();
            assert!((sol.primal - lmin).abs() < 1e-6, "n={n}: {} vs {lmin}", sol.primal);
            assert!(sol.dual <= lmin + 1e-6);
        }
    }

    #[test]
    fn ppt_minimum_against_bell_state() {
        // min over PPT two-qubit states of −⟨Φ+|μ|Φ+⟩ is −1/2.
        let h = 0.5;
        let phi = crate::qcore::matrix::from_real_rows(&[
            &[h, 0.0, 0.0, h],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[h, 0.0, 0.0, h],
        ]);
        let mut s = Spectrahedron::states(4);
        s.add_psd_map(|m| partial_transpose_raw(m, &[2, 2], 1));
        let sol = s.minimize(&(-phi)).unwrap();
        assert!((sol.primal + 0.5).abs() < 1e-6);
    }
}
