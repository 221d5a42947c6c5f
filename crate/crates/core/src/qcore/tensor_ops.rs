//! Index-level tensor manipulations on raw matrices with explicit party dimensions.

use super::matrix::{CMat, ZERO};
use super::structure::{digits, flat};

/// Partial trace keeping the parties at `keep` (sorted ascending).
pub fn partial_trace_raw(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let n = dims.len();
    let kdims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let kd: usize = kdims.iter().product();
    let total: usize = dims.iter().product();
    let traced: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let mut out = CMat::zeros(kd, kd);
    let mut di = vec![0; n];
    let mut dj = vec![0; n];
    let mut ki = vec![0; keep.len()];
    let mut kj = vec![0; keep.len()];
    for i in 0..total {
        digits(i, dims, &mut di);
        for j in 0..total {
            digits(j, dims, &mut dj);
            if traced.iter().any(|&t| di[t] != dj[t]) {
                continue;
            }
            for (s, &k) in keep.iter().enumerate() {
                ki[s] = di[k];
                kj[s] = dj[k];
            }
            out[(flat(&ki, &kdims), flat(&kj, &kdims))] += m[(i, j)];
        }
    }
    out
}

/// Reorder tensor factors: output party `s` is input party `order[s]`.
pub fn permute_raw(m: &CMat, dims: &[usize], order: &[usize]) -> CMat {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let pdims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let map: Vec<usize> = (0..total)
        .map(|i| {
            let mut d = vec![0; n];
            digits(i, dims, &mut d);
            let pd: Vec<usize> = order.iter().map(|&k| d[k]).collect();
            flat(&pd, &pdims)
        })
        .collect();
    let mut out = CMat::zeros(m.nrows().min(total), m.ncols().min(total));
    for i in 0..total {
        for j in 0..total {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    out
}

/// Unitary permutation matrix `P` with `P (⊗ x_k) = ⊗ x_{order[s]}`.
pub fn permutation_matrix(dims: &[usize], order: &[usize]) -> CMat {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let pdims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let mut p = CMat::zeros(total, total);
    let mut d = vec![0; n];
    for i in 0..total {
        digits(i, dims, &mut d);
        let pd: Vec<usize> = order.iter().map(|&k| d[k]).collect();
        p[(flat(&pd, &pdims), i)] = super::matrix::ONE;
    }
    p
}

/// Partial transpose on party `k`.
pub fn partial_transpose_raw(m: &CMat, dims: &[usize], k: usize) -> CMat {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let mut out = CMat::zeros(total, total);
    let mut di = vec![0; n];
    let mut dj = vec![0; n];
    for i in 0..total {
        digits(i, dims, &mut di);
        for j in 0..total {
            digits(j, dims, &mut dj);
            std::mem::swap(&mut di[k], &mut dj[k]);
            out[(flat(&di, dims), flat(&dj, dims))] = m[(i, j)];
            std::mem::swap(&mut di[k], &mut dj[k]);
        }
    }
    out
}

/// Embed an operator acting on the parties at `positions` (ascending) into the
/// full space, as `op ⊗ I` on the remaining parties.
///
/// `op` may be rectangular; `out_dims` gives the output dimensions of the
/// acted-on parties (equal to the input dims for square operators).
pub fn embed_raw(op: &CMat, dims: &[usize], positions: &[usize], out_dims: &[usize]) -> CMat {
    let n = dims.len();
    let mut odims_full = dims.to_vec();
    for (s, &k) in positions.iter().enumerate() {
        odims_full[k] = out_dims[s];
    }
    let in_total: usize = dims.iter().product();
    let out_total: usize = odims_full.iter().product();
    let in_local: Vec<usize> = positions.iter().map(|&k| dims[k]).collect();
    let out_local: Vec<usize> = out_dims.to_vec();
    let mut out = CMat::zeros(out_total, in_total);
    let mut di = vec![0; n];
    let mut dj = vec![0; n];
    let mut li = vec![0; positions.len()];
    let mut lj = vec![0; positions.len()];
    for i in 0..out_total {
        digits(i, &odims_full, &mut di);
        for j in 0..in_total {
            digits(j, dims, &mut dj);
            let rest_equal = (0..n).all(|k| positions.contains(&k) || di[k] == dj[k]);
            if !rest_equal {
                continue;
            }
            for (s, &k) in positions.iter().enumerate() {
                li[s] = di[k];
                lj[s] = dj[k];
            }
            let v = op[(flat(&li, &out_local), flat(&lj, &in_local))];
            if v != ZERO {
                out[(i, j)] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{kron, max_abs};
    use crate::qcore::random::{ginibre, random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partial_trace_of_product_returns_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let ab = kron(&a, &b);
        assert!(max_abs(&(partial_trace_raw(&ab, &[2, 3], &[0]) - &a)) < 1e-12);
        assert!(max_abs(&(partial_trace_raw(&ab, &[2, 3], &[1]) - &b)) < 1e-12);
    }

    #[test]
    fn permutation_swaps_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let swapped = permute_raw(&kron(&a, &b), &[2, 3], &[1, 0]);
        assert!(max_abs(&(swapped - kron(&b, &a))) < 1e-14);
        let p = permutation_matrix(&[2, 3], &[1, 0]);
        let via_p = &p * kron(&a, &b) * p.adjoint();
        assert!(max_abs(&(via_p - kron(&b, &a))) < 1e-14);
    }

    #[test]
    fn embed_matches_kronecker_with_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = ginibre(2, 2, &mut rng);
        let e = embed_raw(&op, &[3, 2, 2], &[1], &[2]);
        let expect = kron(&kron(&CMat::identity(3, 3), &op), &CMat::identity(2, 2));
        assert!(max_abs(&(e - expect)) < 1e-14);
    }

    #[test]
    fn embed_rectangular_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let op = ginibre(4, 2, &mut rng);
        let e = embed_raw(&op, &[2, 3], &[0], &[4]);
        assert!(max_abs(&(e - kron(&op, &CMat::identity(3, 3)))) < 1e-14);
    }
}
