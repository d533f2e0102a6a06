//! Per-slice dense kernels with deterministic sign and phase conventions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::tensor::CMat;

/// Economy QR with a real nonnegative diagonal in `R`.
///
/// Returns `Q` (`m × min(m, n)`, orthonormal columns) and `R`
/// (`min(m, n) × n`, upper triangular).
pub fn qr_econ(a: &CMat) -> (CMat, CMat) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        let d = r[(i, i)];
        let mag = d.norm();
        let phase = if mag > 0.0 { d / mag } else { Complex64::new(1.0, 0.0) };
        for x in q.column_mut(i).iter_mut() {
            *x *= phase;
        }
        let inv = phase.conj();
        for x in r.row_mut(i).iter_mut() {
            *x *= inv;
        }
        r[(i, i)] = Complex64::new(mag, 0.0);
    }
    (q, r)
}

/// Orthonormal basis of the column space of `a` (the `Q` of [`qr_econ`]).
pub fn orth(a: &CMat) -> CMat {
    qr_econ(a).0
}

/// Thin SVD with singular values in nonincreasing order (stable w.r.t. the
/// solver's native order on ties) and the first non-negligible entry of
/// every left singular vector made real nonnegative.
pub struct ThinSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd_thin(a: &CMat) -> ThinSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));

    let mut uo = CMat::zeros(a.nrows(), r);
    let mut vo = CMat::zeros(a.ncols(), r);
    let mut s = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        s.push(svd.singular_values[src]);
        let mut ucol = u.column(src).into_owned();
        let mut vcol = v_t.row(src).adjoint();
        let phase = ucol
            .iter()
            .find(|z| z.norm() > 1e-12)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(Complex64::new(1.0, 0.0));
        ucol *= phase;
        vcol *= phase;
        uo.set_column(dst, &ucol);
        vo.set_column(dst, &vcol);
    }
    ThinSvd { u: uo, s, v: vo }
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `‖a‖²_F`.
pub fn norm_sqr(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

/// `U · diag(s) · Vᴴ` for the leading `s.len()` columns.
pub fn compose(u: &CMat, s: &[f64], v: &CMat) -> CMat {
    let k = s.len();
    let mut us = u.columns(0, k).into_owned();
    for (j, &sv) in s.iter().enumerate() {
        us.column_mut(j).scale_mut(sv);
    }
    us * v.columns(0, k).adjoint()
}

/// Moore-Penrose pseudo-inverse via the thin SVD, discarding singular
/// values below `rcond · σ_max`.
pub fn pinv(a: &CMat, rcond: f64) -> CMat {
    let ThinSvd { u, s, v } = svd_thin(a);
    let cutoff = rcond * s.first().copied().unwrap_or(0.0);
    let inv: DVector<f64> = DVector::from_iterator(
        s.len(),
        s.iter().map(|&x| if x > cutoff { 1.0 / x } else { 0.0 }),
    );
    let mut vs = v.clone();
    for (j, &w) in inv.iter().enumerate() {
        vs.column_mut(j).scale_mut(w);
    }
    vs * u.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn crandom(m: usize, n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(m, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn qr_reconstructs_with_nonnegative_diagonal() {
        for &(m, n) in &[(6, 3), (3, 6), (4, 4)] {
            let a = crandom(m, n, 9);
            let (q, r) = qr_econ(&a);
            assert!((&q * &r - &a).norm() < 1e-12 * a.norm());
            let eye = CMat::identity(q.ncols(), q.ncols());
            assert!((q.adjoint() * &q - eye).norm() < 1e-12);
            for i in 0..r.nrows().min(r.ncols()) {
                assert_eq!(r[(i, i)].im, 0.0);
                assert!(r[(i, i)].re >= 0.0);
                for row in i + 1..r.nrows() {
                    assert_eq!(r[(row, i)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn svd_is_sorted_and_phase_fixed() {
        let a = crandom(7, 5, 4);
        let ThinSvd { u, s, v } = svd_thin(&a);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!((compose(&u, &s, &v) - &a).norm() < 1e-12 * a.norm());
        for j in 0..u.ncols() {
            let first = u.column(j).iter().find(|z| z.norm() > 1e-12).copied().unwrap();
            assert!(first.im.abs() < 1e-15 && first.re > 0.0);
        }
        assert_eq!(singular_values(&a).len(), 5);
        for (x, y) in singular_values(&a).iter().zip(&s) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pinv_of_full_row_rank_is_right_inverse() {
        let a = crandom(3, 7, 2);
        let p = pinv(&a, 1e-12);
        assert!((&a * p - CMat::identity(3, 3)).norm() < 1e-12);
    }
}
