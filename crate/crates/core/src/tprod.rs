//! The t-product and its companion operations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg;
use crate::tensor::{fft_mode3, ifft_mode3, CMat, FourierTensor3, Tensor3};

/// Default tolerance of the structural predicates.
pub const PREDICATE_TOL: f64 = 1e-10;

/// Work budget (multiply-adds) for [`tprod_naive`].
pub const NAIVE_BUDGET: usize = 1 << 26;

/// `A ∗ B` computed slice-wise in the Fourier domain.
pub fn tprod(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    Executor::default().tprod(a, b)
}

/// Reference t-product by explicit circular convolution of tubes.
pub fn tprod_naive(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    check_product(a, b, "tprod_naive")?;
    let (n1, n2, n3) = a.dims();
    let n4 = b.n2();
    let work = n1 * n2 * n4 * n3 * n3;
    if work > NAIVE_BUDGET {
        return Err(Error::SizeLimit {
            required: work,
            budget: NAIVE_BUDGET,
        });
    }
    let mut c = Tensor3::zeros(n1, n4, n3);
    for i in 0..n1 {
        for j in 0..n4 {
            for t in 0..n3 {
                let mut acc = 0.0;
                for k in 0..n2 {
                    for s in 0..n3 {
                        acc += a.get(i, k, s) * b.get(k, j, (t + n3 - s) % n3);
                    }
                }
                c.set(i, j, t, acc);
            }
        }
    }
    Ok(c)
}

fn check_product(a: &Tensor3, b: &Tensor3, op: &'static str) -> Result<()> {
    if a.n2() != b.n1() || a.n3() != b.n3() {
        return Err(Error::mismatch(
            op,
            format!("{:?} ∗ {:?}", a.dims(), b.dims()),
        ));
    }
    Ok(())
}

/// Tensor transpose: transpose each frontal slice, then reverse the order
/// of slices 2 through n3.
pub fn ttranspose(a: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = a.dims();
    Tensor3::from_fn(n2, n1, n3, |j, i, k| a.get(i, j, (n3 - k) % n3))
}

pub fn identity_tensor(n: usize, n3: usize) -> Tensor3 {
    Tensor3::from_fn(n, n, n3, |i, j, k| if k == 0 && i == j { 1.0 } else { 0.0 })
}

/// t-QR: economy QR of every Fourier slice, `R` with real nonnegative
/// diagonal per slice.
pub fn t_qr(a: &Tensor3) -> Result<(Tensor3, Tensor3)> {
    Executor::default().t_qr(a)
}

/// `‖Aᵀ ∗ A − I‖_F ≤ tol · sqrt(n2 · n3)`.
pub fn is_orthogonal(a: &Tensor3, tol: f64) -> bool {
    let (_, n2, n3) = a.dims();
    let Ok(gram) = tprod(&ttranspose(a), a) else {
        return false;
    };
    let eye = identity_tensor(n2, n3);
    gram.sub(&eye)
        .map(|d| d.frobenius_norm() <= tol * ((n2 * n3) as f64).sqrt())
        .unwrap_or(false)
}

/// Every off-diagonal entry of every frontal slice is at most `tol · ‖A‖_F`.
pub fn is_f_diagonal(a: &Tensor3, tol: f64) -> bool {
    let (n1, n2, n3) = a.dims();
    let limit = tol * a.frobenius_norm();
    (0..n3).all(|k| {
        (0..n2).all(|j| (0..n1).all(|i| i == j || a.get(i, j, k).abs() <= limit))
    })
}

impl Executor {
    pub fn tprod(&self, a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
        check_product(a, b, "tprod")?;
        let fa = fft_mode3(a);
        let fb = fft_mode3(b);
        let n3 = a.n3();
        let slices = self.map(self.slice_count(n3), |i| fa.slice(i) * fb.slice(i));
        ifft_mode3(&FourierTensor3::assemble(n3, slices))
    }

    pub fn t_qr(&self, a: &Tensor3) -> Result<(Tensor3, Tensor3)> {
        let fa = fft_mode3(a);
        let n3 = a.n3();
        let (qs, rs): (Vec<CMat>, Vec<CMat>) = self
            .map(self.slice_count(n3), |i| linalg::qr_econ(fa.slice(i)))
            .into_iter()
            .unzip();
        let q = ifft_mode3(&FourierTensor3::assemble(n3, qs))?;
        let r = ifft_mode3(&FourierTensor3::assemble(n3, rs))?;
        Ok((q, r))
    }
}

/// Matrix-valued Fourier slice products, exposed for oracle checks.
pub fn fourier_slices(t: &Tensor3) -> Vec<CMat> {
    fft_mode3(t).into_slices()
}

/// `(F ⊗ I) · M · (Fᴴ ⊗ I)` with the unitary DFT matrix `F = F_n3 / sqrt(n3)`,
/// applied to a block-circulant matricization.
pub fn fourier_block_diagonalize(m: &DMatrix<f64>, n1: usize, n2: usize, n3: usize) -> CMat {
    let scale = 1.0 / (n3 as f64).sqrt();
    let dft = CMat::from_fn(n3, n3, |r, c| {
        let angle = -2.0 * std::f64::consts::PI * ((r * c) % n3) as f64 / n3 as f64;
        Complex64::from_polar(scale, angle)
    });
    let kron = |n: usize, adjoint: bool| {
        CMat::from_fn(n3 * n, n3 * n, |r, c| {
            if r % n != c % n {
                return Complex64::new(0.0, 0.0);
            }
            let (br, bc) = (r / n, c / n);
            if adjoint {
                dft[(bc, br)].conj()
            } else {
                dft[(br, bc)]
            }
        })
    };
    kron(n1, false) * linalg::to_complex(m) * kron(n2, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n1: usize, n2: usize, n3: usize, seed: u64) -> Tensor3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor3::from_fn(n1, n2, n3, |_, _, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn mismatched_inner_dims() {
        let a = random(3, 2, 4, 0);
        let b = random(3, 2, 4, 1);
        assert!(matches!(tprod(&a, &b), Err(Error::DimensionMismatch { .. })));
        let c = random(2, 2, 5, 1);
        assert!(matches!(tprod_naive(&a, &c), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn naive_impulse_and_shift() {
        let x = Tensor3::new(1, 1, 3, vec![2.0, 3.0, 5.0]).unwrap();
        let e0 = Tensor3::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let e1 = Tensor3::new(1, 1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(tprod_naive(&e0, &x).unwrap().data(), &[2.0, 3.0, 5.0]);
        assert_eq!(tprod_naive(&e1, &x).unwrap().data(), &[5.0, 2.0, 3.0]);
    }

    #[test]
    fn naive_respects_budget() {
        let a = random(64, 64, 32, 0);
        assert!(matches!(tprod_naive(&a, &a), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn fft_product_matches_naive() {
        let a = random(3, 2, 4, 5);
        let b = random(2, 2, 4, 6);
        let fast = tprod(&a, &b).unwrap();
        let slow = tprod_naive(&a, &b).unwrap();
        assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-12);
    }

    #[test]
    fn n3_one_is_matrix_product() {
        let a = random(3, 4, 1, 1);
        let b = random(4, 2, 1, 2);
        let c = tprod(&a, &b).unwrap();
        let m = a.frontal_slice(0) * b.frontal_slice(0);
        assert!((c.frontal_slice(0) - m).norm() < 1e-14);
    }

    #[test]
    fn identity_laws() {
        let a = random(3, 4, 5, 3);
        assert!(tprod(&a, &identity_tensor(4, 5)).unwrap().max_abs_diff(&a).unwrap() < 1e-14);
        assert!(tprod(&identity_tensor(3, 5), &a).unwrap().max_abs_diff(&a).unwrap() < 1e-14);
        let i = identity_tensor(3, 4);
        assert!(tprod(&i, &i).unwrap().max_abs_diff(&i).unwrap() < 1e-15);
        for s in fft_mode3(&i).slices() {
            assert_eq!(*s, CMat::identity(3, 3));
        }
    }

    #[test]
    fn transpose() {
        let a = random(3, 2, 1, 7);
        assert_eq!(ttranspose(&a).frontal_slice(0), a.frontal_slice(0).transpose());
        let b = random(3, 2, 4, 8);
        assert_eq!(ttranspose(&ttranspose(&b)), b);
        let c = random(2, 3, 4, 9);
        let lhs = ttranspose(&tprod_naive(&b, &c).unwrap());
        let rhs = tprod_naive(&ttranspose(&c), &ttranspose(&b)).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-13);
    }

    #[test]
    fn t_qr_reconstructs() {
        let a = random(6, 3, 4, 11);
        let (q, r) = t_qr(&a).unwrap();
        assert_eq!(q.dims(), (6, 3, 4));
        assert_eq!(r.dims(), (3, 3, 4));
        let back = tprod(&q, &r).unwrap();
        assert!(back.sub(&a).unwrap().frobenius_norm() <= 1e-12 * a.frobenius_norm());
        assert!(is_orthogonal(&q, PREDICATE_TOL));
    }

    #[test]
    fn t_qr_of_wide_and_matrix_cases() {
        let a = random(2, 5, 3, 12);
        let (q, r) = t_qr(&a).unwrap();
        assert_eq!((q.dims(), r.dims()), ((2, 2, 3), (2, 5, 3)));
        let m = random(5, 3, 1, 13);
        let (q, r) = t_qr(&m).unwrap();
        let back = q.frontal_slice(0) * r.frontal_slice(0);
        assert!((back - m.frontal_slice(0)).norm() < 1e-13);
    }

    #[test]
    fn t_qr_of_orthogonal_input() {
        let (q0, _) = t_qr(&random(7, 3, 5, 14)).unwrap();
        let (q, r) = t_qr(&q0).unwrap();
        let qta = tprod(&ttranspose(&q), &q0).unwrap();
        assert!(qta.sub(&r).unwrap().frobenius_norm() <= 1e-10);
        for s in fourier_slices(&r) {
            for i in 0..3 {
                for j in 0..i {
                    assert!(s[(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn predicates() {
        assert!(is_orthogonal(&identity_tensor(3, 5), PREDICATE_TOL));
        assert!(!is_orthogonal(&identity_tensor(3, 5).scaled(2.0), PREDICATE_TOL));
        assert!(is_f_diagonal(&identity_tensor(3, 5), PREDICATE_TOL));
        let mut t = identity_tensor(3, 2);
        t.set(0, 1, 1, 1.0);
        assert!(!is_f_diagonal(&t, PREDICATE_TOL));
    }

    #[test]
    fn symmetry_toggle_gives_same_product() {
        let a = random(4, 3, 6, 15);
        let b = random(3, 2, 6, 16);
        let on = Executor::sequential().tprod(&a, &b).unwrap();
        let off = Executor::sequential().with_symmetry(false).tprod(&a, &b).unwrap();
        assert!(on.max_abs_diff(&off).unwrap() < 1e-13);
    }
}
