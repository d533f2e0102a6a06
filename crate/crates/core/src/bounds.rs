//! Error bounds for randomized range finding, as computable diagnostics.
//!
//! Matrix forms take a nonincreasing list of singular values and return
//! bounds on the expected squared Frobenius error. Tensor forms take the
//! per-Fourier-slice spectrum and return absolute (not squared) bounds.

use crate::error::{Error, Result};
use crate::linalg::{self, ThinSvd};
use crate::randomized::{resolve_iterations, subspace_range_with, SketchConfig};
use crate::tensor::CMat;
use crate::tsvd::SigmaHat;

fn tail_sq(sigma: &[f64], k: usize) -> f64 {
    sigma.iter().skip(k).map(|s| s * s).sum()
}

fn gap(sigma: &[f64], k: usize) -> f64 {
    match (k.checked_sub(1).and_then(|i| sigma.get(i)), sigma.get(k)) {
        (Some(&lead), Some(&next)) if lead > 0.0 => next / lead,
        _ => 0.0,
    }
}

fn require_oversampling(p: usize) -> Result<()> {
    if p < 2 {
        Err(Error::OversamplingTooSmall(p))
    } else {
        Ok(())
    }
}

/// `(1 + k/(p−1)) Σ_{j>k} σ_j²`: expected squared error of the plain range finder.
pub fn range_finder_bound_sq(sigma: &[f64], k: usize, p: usize) -> Result<f64> {
    subspace_bound_sq(sigma, k, p, 0)
}

/// `(1 + (k/(p−1)) τ_k^{4q}) Σ_{j>k} σ_j²`: expected squared error after `q`
/// subspace iterations.
pub fn subspace_bound_sq(sigma: &[f64], k: usize, p: usize, q: usize) -> Result<f64> {
    require_oversampling(p)?;
    let residual = k as f64 / (p - 1) as f64 * gap(sigma, k).powf(4.0 * q as f64);
    Ok((1.0 + residual) * tail_sq(sigma, k))
}

/// The subspace bound loosened with `Σ_{j>k} σ_j² ≤ (n−k) σ_{k+1}²` in the
/// residual term, for comparison against [`gu_subspace_bound_sq`].
pub fn simplified_subspace_bound_sq(sigma: &[f64], n: usize, k: usize, p: usize, q: usize) -> Result<f64> {
    require_oversampling(p)?;
    let next = sigma.get(k).copied().unwrap_or(0.0);
    let tau4q = gap(sigma, k).powf(4.0 * q as f64);
    Ok(tail_sq(sigma, k) + k as f64 * tau4q * (n - k) as f64 / (p - 1) as f64 * next * next)
}

/// Gu's expected squared-error bound for subspace iteration with
/// `C = (sqrt(n−k) + sqrt(k+p) + 7) · 4e·sqrt(k+p)/(p+1)`.
pub fn gu_subspace_bound_sq(sigma: &[f64], n: usize, k: usize, p: usize, q: usize) -> f64 {
    let l = (k + p) as f64;
    let c = (((n - k) as f64).sqrt() + l.sqrt() + 7.0) * (4.0 * std::f64::consts::E * l.sqrt() / (p + 1) as f64);
    let next = sigma.get(k).copied().unwrap_or(0.0);
    let tau4q = gap(sigma, k).powf(4.0 * q as f64);
    tail_sq(sigma, k) + k as f64 * tau4q * (n - k) as f64 * c * c * next * next
}

/// Expected-error bound for the randomized t-SVD with per-slice iteration
/// counts `q`:
/// `( (1/n3) Σᵢ (1 + (k/(p−1)) (τ_k^(i))^{4qᵢ}) Σ_{j>k} (σ̂_j^(i))² )^{1/2}`.
pub fn expected_bound(sigma: &SigmaHat, k: usize, p: usize, q: &[usize]) -> Result<f64> {
    require_oversampling(p)?;
    let ratio = k as f64 / (p - 1) as f64;
    tensor_bound(sigma, k, q, ratio)
}

fn tensor_bound(sigma: &SigmaHat, k: usize, q: &[usize], coeff: f64) -> Result<f64> {
    let n3 = sigma.n3();
    if q.len() != n3 {
        return Err(Error::IterationVectorLength {
            expected: n3,
            got: q.len(),
        });
    }
    if k > sigma.width() {
        return Err(Error::RankOutOfRange { k, max: sigma.width() });
    }
    let total: f64 = (0..n3)
        .map(|i| {
            let damp = sigma.gap(i, k).powf(4.0 * q[i] as f64);
            (1.0 + coeff * damp) * sigma.tail_energy(i, k)
        })
        .sum();
    Ok((total / n3 as f64).sqrt())
}

/// Tail-bound constant
/// `C_δ = e·sqrt(k+p)/(p+1) · (2/δ)^{1/(p+1)} · (sqrt(n−k) + sqrt(k+p) + sqrt(2 log(2/δ)))`.
pub fn c_delta(n: usize, k: usize, p: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if k > n {
        return Err(Error::RankOutOfRange { k, max: n });
    }
    let l = (k + p) as f64;
    let lead = std::f64::consts::E * l.sqrt() / (p + 1) as f64;
    let scale = (2.0 / delta).powf(1.0 / (p + 1) as f64);
    let spread = ((n - k) as f64).sqrt() + l.sqrt() + (2.0 * (2.0 / delta).ln()).sqrt();
    Ok(lead * scale * spread)
}

/// Bound on `‖A − Q ∗ Qᵀ ∗ A‖_F` that fails with probability at most `δ`,
/// together with `C_δ`:
/// `( (1/n3) Σᵢ (1 + C_δ² (τ_k^(i))^{4qᵢ}) Σ_{j>k} (σ̂_j^(i))² )^{1/2}`.
pub fn tail_bound(sigma: &SigmaHat, k: usize, p: usize, q: &[usize], delta: f64) -> Result<(f64, f64)> {
    let (_, n2, _) = sigma.dims();
    let c = c_delta(n2, k, p, delta)?;
    Ok((tensor_bound(sigma, k, q, c * c)?, c))
}

fn config_iterations(sigma: &SigmaHat, cfg: &SketchConfig, p: usize) -> Result<Vec<usize>> {
    resolve_iterations(&cfg.q, sigma.n3(), || {
        let eps = cfg.eps.ok_or(Error::InvalidEpsilon(f64::NAN))?;
        crate::randomized::choose_iterations(sigma, cfg.k, p, eps, cfg.q_max)
    })
}

/// [`expected_bound`] for the oversampling and iteration counts that `cfg`
/// would use on the tensor `sigma` describes.
pub fn bound_expected(sigma: &SigmaHat, cfg: &SketchConfig) -> Result<f64> {
    let (n1, n2, _) = sigma.dims();
    let (_, p, _) = cfg.clamp(n1, n2)?;
    let q = config_iterations(sigma, cfg, p)?;
    expected_bound(sigma, cfg.k, p, &q)
}

/// [`tail_bound`] for the parameters in `cfg`.
pub fn tail_bound_for(sigma: &SigmaHat, cfg: &SketchConfig, delta: f64) -> Result<(f64, f64)> {
    let (n1, n2, _) = sigma.dims();
    let (_, p, _) = cfg.clamp(n1, n2)?;
    let q = config_iterations(sigma, cfg, p)?;
    tail_bound(sigma, cfg.k, p, &q, delta)
}

/// Deterministic right-hand side
/// `‖Σ₂‖²_F + τ_k^{4q} ‖Σ₂ W₂ W₁†‖²_F`
/// bounding `‖(I − QQᴴ) A‖²_F` for the basis produced from the specific
/// sketch `w` after `q` subspace iterations.
pub fn structural_error_bound(a: &CMat, w: &CMat, k: usize, q: usize) -> Result<f64> {
    if w.nrows() != a.ncols() {
        return Err(Error::mismatch(
            "structural_error_bound",
            format!("sketch has {} rows, matrix has {} columns", w.nrows(), a.ncols()),
        ));
    }
    let ThinSvd { s, v, .. } = linalg::svd_thin(a);
    let r = s.len();
    if k == 0 || k > r {
        return Err(Error::RankOutOfRange { k, max: r });
    }
    let w1 = v.columns(0, k).ad_mul(w);
    let w1_sv = linalg::singular_values(&w1);
    let smallest = if w1_sv.len() < k { 0.0 } else { w1_sv[k - 1] };
    if smallest == 0.0 || smallest <= 1e-12 * w1_sv[0] {
        return Err(Error::RankDeficientSketch);
    }
    let tail = tail_sq(&s, k);
    if k == r {
        return Ok(tail);
    }
    let mut w2 = v.columns(k, r - k).ad_mul(w);
    for (row, sv) in s[k..].iter().enumerate() {
        w2.row_mut(row).scale_mut(*sv);
    }
    let cross = linalg::norm_sqr(&(w2 * linalg::pinv(&w1, 1e-14)));
    Ok(tail + gap(&s, k).powf(4.0 * q as f64) * cross)
}

/// Realized `‖(I − QQᴴ) A‖²_F` for the same sketch and iteration count.
pub fn structural_realized_error(a: &CMat, w: &CMat, q: usize) -> f64 {
    let basis = subspace_range_with(a, w, q);
    linalg::norm_sqr(&(a - &basis * basis.ad_mul(a)))
}
