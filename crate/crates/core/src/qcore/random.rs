//! Random matrices and states for sampling and property tests.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{c, CMat};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()) * c(0.5, 0.0)
}

/// Haar-random unitary (QR of a Ginibre matrix with phase fix).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let qr = ginibre(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        if n > 0.0 {
            let ph = rjj / n;
            for i in 0..d {
                q[(i, j)] *= ph;
            }
        }
    }
    q
}

/// Haar-random unit vector.
pub fn haar_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..d).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= n;
    }
    v
}

/// Random unit vector with real entries.
pub fn real_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= n;
    }
    v.into_iter().map(|x| c(x, 0.0)).collect()
}

/// Random density matrix from the induced (Hilbert–Schmidt) measure.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, d, rng);
    let m = &g * g.adjoint();
    let t = super::matrix::trace(&m).re;
    m * c(1.0 / t, 0.0)
}

/// Random density matrix of rank at most `rank`.
pub fn random_density_rank<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = super::matrix::trace(&m).re;
    m * c(1.0 / t, 0.0)
}

/// Random probability vector (flat Dirichlet).
pub fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{hermiticity_defect, trace, unitarity_defect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=8 {
            assert!(unitarity_defect(&haar_unitary(d, &mut rng)) < 1e-12);
        }
    }

    #[test]
    fn random_density_is_a_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(4, &mut rng);
        assert!(hermiticity_defect(&rho) < 1e-14);
        assert!((trace(&rho).re - 1.0).abs() < 1e-14);
        assert!(crate::qcore::eig::min_eigenvalue(&rho) > -1e-14);
    }
}
