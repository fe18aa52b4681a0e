//! Small dense Hermitian helpers: sorted eigendecomposition, frame alignment,
//! Hermitian exponentials.

use nalgebra::DMatrix;

use crate::num::{norm_sqr, re, Real, CMat, C};

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending
/// (multiplicity included); column `j` of the returned matrix is eigenvector `j`.
pub fn eigh<T: Real>(h: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let n = h.nrows();
    if n == 1 {
        return (vec![h[(0, 0)].re], CMat::identity(1, 1));
    }
    if n == 2 {
        return eigh_2x2(h);
    }
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Closed-form 2×2 Hermitian eigenproblem; accurate to round-off and
/// deterministic, which keeps per-node fields reproducible.
fn eigh_2x2<T: Real>(h: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let half = nalgebra::convert::<f64, T>(0.5);
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = (h[(0, 1)] + h[(1, 0)].conj()) * re(half);
    let mean = (a + d) * half;
    let diff = (a - d) * half;
    let rad = (diff * diff + norm_sqr(b)).sqrt();
    let lo = mean - rad;
    let hi = mean + rad;
    let mut v = CMat::zeros(2, 2);
    if rad == T::zero() {
        v[(0, 0)] = re(T::one());
        v[(1, 1)] = re(T::one());
        return (vec![lo, hi], v);
    }
    // upper eigenvector: (diff + rad, conj(b)) or (b, rad - diff), whichever is better conditioned
    let upper = if diff >= T::zero() {
        [re(diff + rad), b.conj()]
    } else {
        [b, re(rad - diff)]
    };
    let un = (norm_sqr(upper[0]) + norm_sqr(upper[1])).sqrt();
    let u0 = upper[0] / un;
    let u1 = upper[1] / un;
    // lower eigenvector orthogonal to the upper one
    v[(0, 0)] = -u1.conj();
    v[(1, 0)] = u0.conj();
    v[(0, 1)] = u0;
    v[(1, 1)] = u1;
    (vec![lo, hi], v)
}

/// Columns `cols` of `v` as a new matrix.
pub fn select_columns<T: Real>(v: &CMat<T>, cols: &[usize]) -> CMat<T> {
    let mut out = CMat::zeros(v.nrows(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        out.set_column(k, &v.column(c));
    }
    out
}

/// Right-multiplies `frame` by the unitary `G` that maximizes
/// `Re tr(reference^† frame G)`, i.e. the polar factor of the overlap.
pub fn align_frame<T: Real>(reference: &CMat<T>, frame: &CMat<T>) -> CMat<T> {
    let overlap = reference.adjoint() * frame;
    frame * polar_unitary(&overlap).adjoint()
}

/// Unitary factor `U` of the polar decomposition `S = U |S|`.
pub fn polar_unitary<T: Real>(s: &CMat<T>) -> CMat<T> {
    if s.nrows() == 1 && s.ncols() == 1 {
        let z = s[(0, 0)];
        let n = norm_sqr(z).sqrt();
        let u = if n > T::zero() { z / n } else { re(T::one()) };
        return CMat::from_element(1, 1, u);
    }
    let svd = s.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    u * vt
}

/// `exp(c·H)` for Hermitian `H` and complex scalar `c`.
pub fn expm_hermitian<T: Real>(h: &CMat<T>, c: C<T>) -> CMat<T> {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let mut d = CMat::zeros(n, n);
    for (i, l) in vals.iter().enumerate() {
        d[(i, i)] = crate::num::cexp(c * *l);
    }
    &vecs * d * vecs.adjoint()
}

/// Eigenvalues of a real symmetric tridiagonal matrix and its eigenvectors.
pub fn tridiagonal_eigh<T: Real>(alpha: &[T], beta: &[T]) -> (Vec<T>, DMatrix<T>) {
    let n = alpha.len();
    let mut t = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alpha[i];
        if i + 1 < n {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Largest deviation of `F^† F` from the identity.
pub fn orthonormality_defect<T: Real>(frame: &CMat<T>) -> T {
    let g = frame.adjoint() * frame;
    let id = CMat::<T>::identity(g.nrows(), g.ncols());
    crate::num::max_abs(&(g - id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{cplx, max_abs};

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let h = CMat::<f64>::from_row_slice(
            3,
            3,
            &[
                cplx(2.0, 0.0), cplx(0.5, 0.3), cplx(0.0, 0.0),
                cplx(0.5, -0.3), cplx(-1.0, 0.0), cplx(0.2, 0.0),
                cplx(0.0, 0.0), cplx(0.2, 0.0), cplx(0.5, 0.0),
            ],
        );
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(3, vals.iter().map(|v| cplx(*v, 0.0))));
        assert!(max_abs(&(&vecs * d * vecs.adjoint() - &h)) < 1e-12);
    }

    #[test]
    fn closed_form_2x2_matches_definition() {
        for (a, d, b) in [(1.0, -1.0, cplx(0.0, 0.0)), (0.0, 0.0, cplx(0.5, 0.0)), (-0.3, 0.7, cplx(0.2, -0.9))] {
            let h = CMat::<f64>::from_row_slice(2, 2, &[cplx(a, 0.0), b, b.conj(), cplx(d, 0.0)]);
            let (vals, vecs) = eigh(&h);
            assert!(vals[0] <= vals[1]);
            for j in 0..2 {
                let v = vecs.column(j).into_owned();
                let r = &h * &v - &v * cplx(vals[j], 0.0);
                assert!(r.norm() < 1e-14);
            }
            assert!(orthonormality_defect(&vecs) < 1e-14);
        }
    }

    #[test]
    fn alignment_removes_phase() {
        let f = CMat::<f64>::from_column_slice(2, 1, &[cplx(0.6, 0.0), cplx(0.8, 0.0)]);
        let g = &f * cplx(0.0, 1.0);
        let aligned = align_frame(&f, &g);
        assert!(max_abs(&(aligned - f)) < 1e-15);
    }
}
