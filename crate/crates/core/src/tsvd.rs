//! Deterministic truncated t-SVD and the optimal truncation error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg;
use crate::tensor::{fft_mode3, ifft_mode3, CMat, FourierTensor3, Tensor3};
use crate::tprod::ttranspose;

/// Per-Fourier-slice singular values `σ̂_j^(i)`, one nonincreasing row per
/// slice, together with the dimensions of the tensor they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaHat {
    dims: [usize; 3],
    width: usize,
    values: Vec<f64>,
}

impl SigmaHat {
    pub(crate) fn from_rows(dims: [usize; 3], rows: Vec<Vec<f64>>) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        debug_assert!(rows.iter().all(|r| r.len() == width));
        SigmaHat {
            dims,
            width,
            values: rows.into_iter().flatten().collect(),
        }
    }

    /// Spectrum given directly, one row per Fourier slice. Rows must have
    /// equal length, be nonincreasing and nonnegative, and there must be `n3`
    /// of them.
    pub fn from_parts(dims: [usize; 3], rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != dims[2] {
            return Err(Error::mismatch("SigmaHat", format!("{} rows for n3 = {}", rows.len(), dims[2])));
        }
        let width = rows.first().map_or(0, Vec::len);
        for r in &rows {
            if r.len() != width || r.iter().any(|s| s.is_nan() || *s < 0.0) || r.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::mismatch("SigmaHat", "rows must be equal-length, nonincreasing and nonnegative"));
            }
        }
        Ok(Self::from_rows(dims, rows))
    }

    /// Dimensions `(n1, n2, n3)` of the source tensor.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dims[0], self.dims[1], self.dims[2])
    }

    pub fn n3(&self) -> usize {
        self.dims[2]
    }

    /// Number of singular values stored per slice.
    pub fn width(&self) -> usize {
        self.width
    }

    /// True when every slice carries all `min(n1, n2)` values.
    pub fn is_complete(&self) -> bool {
        self.width == self.dims[0].min(self.dims[1])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    /// `σ̂_j^(i)`, zero-based `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }

    /// `Σ_{j>k} (σ̂_j^(i))²`.
    pub fn tail_energy(&self, i: usize, k: usize) -> f64 {
        self.row(i).iter().skip(k).map(|s| s * s).sum()
    }

    /// Gap `τ_k^(i) = σ̂_{k+1}^(i) / σ̂_k^(i)`; zero when the slice has rank
    /// below `k` or carries no value beyond `k`.
    pub fn gap(&self, i: usize, k: usize) -> f64 {
        if k == 0 || k >= self.width {
            return 0.0;
        }
        let row = self.row(i);
        if row[k - 1] == 0.0 {
            0.0
        } else {
            row[k] / row[k - 1]
        }
    }

    pub fn gaps(&self, k: usize) -> Vec<f64> {
        (0..self.n3()).map(|i| self.gap(i, k)).collect()
    }

    /// `((1/n3) Σᵢ Σ_{j>k} (σ̂_j^(i))²)^{1/2}`.
    pub fn optimal_error(&self, k: usize) -> Result<f64> {
        if k > self.width {
            return Err(Error::RankOutOfRange { k, max: self.width });
        }
        let n3 = self.n3() as f64;
        Ok(((0..self.n3()).map(|i| self.tail_energy(i, k)).sum::<f64>() / n3).sqrt())
    }

    /// `‖A‖_F` recovered from a complete spectrum.
    pub fn norm(&self) -> f64 {
        self.optimal_error(0).unwrap_or(0.0)
    }
}

/// Factors `U_k ∗ S_k ∗ V_kᵀ` of a (possibly approximate) truncated t-SVD.
///
/// For the deterministic decomposition `sigma_hat` holds every singular
/// value of every Fourier slice; randomized decompositions store the
/// `k + p` estimates they computed.
#[derive(Clone, Debug, PartialEq)]
pub struct TSVDFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub k: usize,
    pub sigma_hat: SigmaHat,
}

pub fn tsvd_truncated(a: &Tensor3, k: usize) -> Result<TSVDFactors> {
    Executor::default().tsvd_truncated(a, k)
}

/// `U ∗ S ∗ Vᵀ`.
pub fn reconstruct(f: &TSVDFactors) -> Result<Tensor3> {
    let ex = Executor::default();
    ex.tprod(&f.u, &ex.tprod(&f.s, &ttranspose(&f.v))?)
}

/// Theoretical minimal error `‖A − A_k‖_F` from the stored spectrum.
pub fn optimal_error(f: &TSVDFactors, k: usize) -> Result<f64> {
    f.sigma_hat.optimal_error(k)
}

pub(crate) fn check_rank(k: usize, n1: usize, n2: usize) -> Result<()> {
    let max = n1.min(n2);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    Ok(())
}

/// Real tensors from truncated per-slice factors.
pub(crate) fn assemble_factors(
    n3: usize,
    us: Vec<CMat>,
    ss: Vec<Vec<f64>>,
    vs: Vec<CMat>,
    k: usize,
) -> Result<(Tensor3, Tensor3, Tensor3)> {
    let s_slices: Vec<CMat> = ss
        .iter()
        .map(|s| CMat::from_fn(k, k, |i, j| if i == j { s[i].into() } else { 0.0.into() }))
        .collect();
    let u = ifft_mode3(&FourierTensor3::assemble(n3, us))?;
    let s = ifft_mode3(&FourierTensor3::assemble(n3, s_slices))?;
    let v = ifft_mode3(&FourierTensor3::assemble(n3, vs))?;
    Ok((u, s, v))
}

/// Rows computed for the leading slices, extended by mirroring.
pub(crate) fn mirror_rows<T: Clone>(n3: usize, mut rows: Vec<T>) -> Vec<T> {
    for i in rows.len()..n3 {
        rows.push(rows[n3 - i].clone());
    }
    rows
}

impl Executor {
    pub fn tsvd_truncated(&self, a: &Tensor3, k: usize) -> Result<TSVDFactors> {
        let (n1, n2, n3) = a.dims();
        check_rank(k, n1, n2)?;
        let fa = fft_mode3(a);
        let parts = self.map(self.slice_count(n3), |i| {
            let linalg::ThinSvd { u, s, v } = linalg::svd_thin(fa.slice(i));
            (u.columns(0, k).into_owned(), s, v.columns(0, k).into_owned())
        });
        let mut us = Vec::with_capacity(parts.len());
        let mut sig = Vec::with_capacity(parts.len());
        let mut vs = Vec::with_capacity(parts.len());
        for (u, s, v) in parts {
            us.push(u);
            sig.push(s);
            vs.push(v);
        }
        let sig = mirror_rows(n3, sig);
        let truncated: Vec<Vec<f64>> = sig.iter().take(us.len()).map(|s| s[..k].to_vec()).collect();
        let (u, s, v) = assemble_factors(n3, us, truncated, vs, k)?;
        Ok(TSVDFactors {
            u,
            s,
            v,
            k,
            sigma_hat: SigmaHat::from_rows([n1, n2, n3], sig),
        })
    }

    /// All singular values of every Fourier slice, without vectors.
    pub fn singular_spectrum(&self, a: &Tensor3) -> SigmaHat {
        let (n1, n2, n3) = a.dims();
        let fa = fft_mode3(a);
        let rows = self.map(self.slice_count(n3), |i| linalg::singular_values(fa.slice(i)));
        SigmaHat::from_rows([n1, n2, n3], mirror_rows(n3, rows))
    }
}

pub fn singular_spectrum(a: &Tensor3) -> SigmaHat {
    Executor::default().singular_spectrum(a)
}
