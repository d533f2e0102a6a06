//! Randomized range finding for matrices and the randomized t-SVD.
//!
//! Every Fourier slice of the tensor is sketched with the same real Gaussian
//! matrix: the Gaussian random tensor has a single nonzero frontal slice, so
//! its transform repeats that slice `n3` times. The generator is drawn once,
//! before any parallel work starts, which keeps output independent of the
//! worker count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg::{self, ThinSvd};
use crate::tensor::{fft_mode3, ifft_mode3, CMat, FourierTensor3, Tensor3};
use crate::tsvd::{assemble_factors, check_rank, mirror_rows, SigmaHat, TSVDFactors};

/// How many subspace iterations each Fourier slice receives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Iterations {
    Uniform(usize),
    PerSlice(Vec<usize>),
    /// Pick per-slice counts from the exact spectrum with [`choose_iterations`].
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub k: usize,
    pub p: usize,
    pub q: Iterations,
    pub eps: Option<f64>,
    pub seed: u64,
    /// Iteration count used for slices whose gap is numerically 1.
    pub q_max: usize,
    /// Failure probability for the tail bound in reports.
    pub delta: f64,
}

impl SketchConfig {
    pub fn new(k: usize, p: usize) -> Self {
        SketchConfig {
            k,
            p,
            q: Iterations::Uniform(0),
            eps: None,
            seed: 0,
            q_max: 50,
            delta: 0.05,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = Iterations::Uniform(q);
        self
    }

    pub fn with_iterations(mut self, q: Vec<usize>) -> Self {
        self.q = Iterations::PerSlice(q);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self.q = Iterations::Adaptive;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_q_max(mut self, q_max: usize) -> Self {
        self.q_max = q_max;
        self
    }

    /// Sketch width and effective oversampling after clamping
    /// `k + p` to `min(n1, n2)`.
    pub fn clamp(&self, n1: usize, n2: usize) -> Result<(usize, usize, Option<String>)> {
        check_rank(self.k, n1, n2)?;
        let cap = n1.min(n2);
        let width = (self.k + self.p).min(cap);
        let note = (width < self.k + self.p).then(|| {
            format!(
                "oversampling reduced from {} to {} (k + p capped at min(n1, n2) = {cap})",
                self.p,
                width - self.k
            )
        });
        Ok((width, width - self.k, note))
    }
}

/// Iteration counts for every slice of an `n3`-slice spectrum.
pub(crate) fn resolve_iterations(
    q: &Iterations,
    n3: usize,
    adaptive: impl FnOnce() -> Result<Vec<usize>>,
) -> Result<Vec<usize>> {
    let qs = match q {
        Iterations::Uniform(q) => vec![*q; n3],
        Iterations::PerSlice(v) => {
            if v.len() != n3 {
                return Err(Error::IterationVectorLength {
                    expected: n3,
                    got: v.len(),
                });
            }
            v.clone()
        }
        Iterations::Adaptive => adaptive()?,
    };
    for i in 1..n3 {
        if qs[i] != qs[n3 - i] {
            return Err(Error::AsymmetricIterations {
                slice: i.min(n3 - i),
                mirror: i.max(n3 - i),
            });
        }
    }
    Ok(qs)
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(rows, cols, data)
}

/// `n2 × l × n3` tensor whose first frontal slice is standard normal and
/// whose other slices are zero.
pub fn gaussian_random_tensor(n2: usize, l: usize, n3: usize, seed: u64) -> Tensor3 {
    let slice = gaussian_matrix(n2, l, seed);
    let mut data = slice.as_slice().to_vec();
    data.resize(n2 * l * n3, 0.0);
    Tensor3::new(n2, l, n3, data).expect("gaussian draws are finite")
}

/// Rank-`k` factorization `U · diag(s) · Vᴴ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRank {
    pub u: CMat,
    pub s: DVector<f64>,
    pub v: CMat,
}

impl LowRank {
    pub fn to_matrix(&self) -> CMat {
        linalg::compose(&self.u, self.s.as_slice(), &self.v)
    }
}

fn check_matrix_sketch(m: usize, n: usize, k: usize, p: usize) -> Result<()> {
    let max = m.min(n);
    if k == 0 || k + p > max {
        return Err(Error::RankOutOfRange { k: k + p, max });
    }
    Ok(())
}

/// Orthonormal basis of `range((A Aᴴ)^q A W)` built by alternating
/// QR-reorthogonalized products.
pub fn subspace_range_with(a: &CMat, w: &CMat, q: usize) -> CMat {
    let mut basis = linalg::orth(&(a * w));
    for _ in 0..q {
        let g = linalg::orth(&a.ad_mul(&basis));
        basis = linalg::orth(&(a * g));
    }
    basis
}

/// Range finder with `q` subspace iterations; `q = 0` is the plain
/// randomized range finder.
pub fn subspace_range_matrix(a: &CMat, k: usize, p: usize, q: usize, seed: u64) -> Result<CMat> {
    check_matrix_sketch(a.nrows(), a.ncols(), k, p)?;
    let w = linalg::to_complex(&gaussian_matrix(a.ncols(), k + p, seed));
    Ok(subspace_range_with(a, &w, q))
}

/// Randomized SVD of a complex matrix.
pub fn rsvd_matrix(a: &CMat, k: usize, p: usize, seed: u64) -> Result<LowRank> {
    let basis = subspace_range_matrix(a, k, p, 0, seed)?;
    let s = finish_slice(a, basis, k);
    Ok(LowRank {
        u: s.u_k,
        s: DVector::from_column_slice(&s.sigma[..k]),
        v: s.v_k,
    })
}

struct SliceSketch {
    basis: CMat,
    u_k: CMat,
    sigma: Vec<f64>,
    v_k: CMat,
    projection_sq: f64,
    truncation_sq: f64,
}

fn finish_slice(a: &CMat, basis: CMat, k: usize) -> SliceSketch {
    let b = basis.ad_mul(a);
    let projection_sq = linalg::norm_sqr(&(a - &basis * &b));
    let ThinSvd { u, s, v } = linalg::svd_thin(&b);
    let u_k = &basis * u.columns(0, k);
    let v_k = v.columns(0, k).into_owned();
    let truncation_sq = linalg::norm_sqr(&(a - linalg::compose(&u_k, &s[..k], &v_k)));
    SliceSketch {
        basis,
        u_k,
        sigma: s,
        v_k,
        projection_sq,
        truncation_sq,
    }
}

/// Raw output of the randomized t-SVD pipeline.
#[derive(Clone, Debug)]
pub struct Sketch {
    pub factors: TSVDFactors,
    /// `Q`, `n1 × (k + p) × n3`, partially orthogonal.
    pub basis: Tensor3,
    /// Oversampling actually used after clamping.
    pub oversampling: usize,
    pub iterations: Vec<usize>,
    /// `‖A − Q ∗ Qᵀ ∗ A‖_F`.
    pub projection_error: f64,
    /// `‖A − U_k ∗ S_k ∗ V_kᵀ‖_F`.
    pub truncation_error: f64,
    pub warnings: Vec<String>,
}

/// Realized errors next to the optimum and every applicable bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub k: usize,
    pub oversampling: usize,
    /// `‖A‖_F`.
    pub norm: f64,
    /// Relative error of the rank-`k` factorization.
    pub realized: f64,
    /// Relative projection error `‖(I − Q ∗ Qᵀ) A‖_F / ‖A‖_F`.
    pub projection: f64,
    /// Relative optimal error `e_k`.
    pub optimal: f64,
    /// Expected-error bound (absolute); `None` when `p < 2`.
    pub expected_bound: Option<f64>,
    pub expected_bound_relative: Option<f64>,
    pub delta: f64,
    pub c_delta: f64,
    /// Tail bound on the projection error (absolute).
    pub tail_bound: f64,
    pub tail_bound_relative: f64,
    pub tau: Vec<f64>,
    pub iterations: Vec<usize>,
    pub warnings: Vec<String>,
}

fn relative(x: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        x / norm
    } else {
        0.0
    }
}

impl ErrorReport {
    /// Evaluate a sketch against the exact spectrum of the tensor it came from.
    pub fn evaluate(spectrum: &SigmaHat, sketch: &Sketch, delta: f64) -> Result<ErrorReport> {
        let k = sketch.factors.k;
        let p = sketch.oversampling;
        let norm = spectrum.norm();
        let optimal = spectrum.optimal_error(k)?;
        let expected = match bounds::expected_bound(spectrum, k, p, &sketch.iterations) {
            Ok(b) => Some(b),
            Err(Error::OversamplingTooSmall(_)) => None,
            Err(e) => return Err(e),
        };
        let (tail, c_delta) = bounds::tail_bound(spectrum, k, p, &sketch.iterations, delta)?;
        Ok(ErrorReport {
            k,
            oversampling: p,
            norm,
            realized: relative(sketch.truncation_error, norm),
            projection: relative(sketch.projection_error, norm),
            optimal: relative(optimal, norm),
            expected_bound: expected,
            expected_bound_relative: expected.map(|b| relative(b, norm)),
            delta,
            c_delta,
            tail_bound: tail,
            tail_bound_relative: relative(tail, norm),
            tau: spectrum.gaps(k),
            iterations: sketch.iterations.clone(),
            warnings: sketch.warnings.clone(),
        })
    }
}

/// Per-slice iteration counts from the rule
/// `qᵢ = ⌈(1/4) · log(ε(p−1)/k) / log τ_k^(i)⌉`, floored at zero.
///
/// Slices with `τ = 0` get no iterations; slices with `τ ≥ 1 − 1e-12` get
/// `q_max`. Every other count is capped at `q_max`.
pub fn choose_iterations(sigma: &SigmaHat, k: usize, p: usize, eps: f64, q_max: usize) -> Result<Vec<usize>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    if p < 2 {
        return Err(Error::OversamplingTooSmall(p));
    }
    if k == 0 {
        return Err(Error::RankOutOfRange { k, max: sigma.width() });
    }
    let ratio = k as f64 / (p - 1) as f64;
    let target = eps / ratio;
    Ok(sigma
        .gaps(k)
        .into_iter()
        .map(|tau| {
            if tau == 0.0 {
                return 0;
            }
            if tau >= 1.0 - 1e-12 {
                return q_max;
            }
            if target >= 1.0 {
                return 0;
            }
            let raw = 0.25 * target.ln() / tau.ln();
            let mut q = (raw.ceil().max(0.0) as usize).min(q_max);
            // guard against the ceiling landing one short after rounding
            while q < q_max && ratio * tau.powf(4.0 * q as f64) > eps {
                q += 1;
            }
            q
        })
        .collect())
}

pub fn rtsvd(a: &Tensor3, cfg: &SketchConfig) -> Result<(TSVDFactors, ErrorReport)> {
    Executor::default().rtsvd(a, cfg)
}

pub fn rtsvd_subspace(a: &Tensor3, cfg: &SketchConfig) -> Result<(TSVDFactors, ErrorReport)> {
    Executor::default().rtsvd_subspace(a, cfg)
}

impl Executor {
    /// The randomized t-SVD pipeline with explicit per-slice iteration counts.
    pub fn sketch(&self, a: &Tensor3, cfg: &SketchConfig, iterations: &[usize]) -> Result<Sketch> {
        let (n1, n2, n3) = a.dims();
        let (width, oversampling, note) = cfg.clamp(n1, n2)?;
        let qs = resolve_iterations(&Iterations::PerSlice(iterations.to_vec()), n3, || unreachable!())?;
        let k = cfg.k;
        let fa = fft_mode3(a);
        let w = linalg::to_complex(&gaussian_matrix(n2, width, cfg.seed));

        let parts = self.map(self.slice_count(n3), |i| {
            let slice = fa.slice(i);
            finish_slice(slice, subspace_range_with(slice, &w, qs[i]), k)
        });

        let count = parts.len();
        let mut weights = vec![0usize; count];
        for i in 0..n3 {
            weights[if i < count { i } else { n3 - i }] += 1;
        }
        let mut projection_sq = 0.0;
        let mut truncation_sq = 0.0;
        let mut bases = Vec::with_capacity(count);
        let mut us = Vec::with_capacity(count);
        let mut sig = Vec::with_capacity(count);
        let mut vs = Vec::with_capacity(count);
        for (part, wgt) in parts.into_iter().zip(&weights) {
            projection_sq += *wgt as f64 * part.projection_sq;
            truncation_sq += *wgt as f64 * part.truncation_sq;
            bases.push(part.basis);
            us.push(part.u_k);
            sig.push(part.sigma);
            vs.push(part.v_k);
        }
        let truncated: Vec<Vec<f64>> = sig.iter().map(|s| s[..k].to_vec()).collect();
        let (u, s, v) = assemble_factors(n3, us, truncated, vs, k)?;
        let basis = ifft_mode3(&FourierTensor3::assemble(n3, bases))?;
        let sigma_hat = SigmaHat::from_rows([n1, n2, n3], mirror_rows(n3, sig));
        let nn = n3 as f64;
        Ok(Sketch {
            factors: TSVDFactors {
                u,
                s,
                v,
                k,
                sigma_hat,
            },
            basis,
            oversampling,
            iterations: qs,
            projection_error: (projection_sq / nn).sqrt(),
            truncation_error: (truncation_sq / nn).sqrt(),
            warnings: note.into_iter().collect(),
        })
    }

    /// Iteration counts requested by `cfg` for tensor `a`; the adaptive rule
    /// consults `spectrum`.
    pub fn iterations_for(&self, cfg: &SketchConfig, spectrum: &SigmaHat) -> Result<Vec<usize>> {
        let (n1, n2, n3) = spectrum.dims();
        let (_, p, _) = cfg.clamp(n1, n2)?;
        resolve_iterations(&cfg.q, n3, || {
            let eps = cfg.eps.ok_or(Error::InvalidEpsilon(f64::NAN))?;
            choose_iterations(spectrum, cfg.k, p, eps, cfg.q_max)
        })
    }

    /// Randomized t-SVD without subspace iteration; `cfg.q` is ignored.
    pub fn rtsvd(&self, a: &Tensor3, cfg: &SketchConfig) -> Result<(TSVDFactors, ErrorReport)> {
        let sketch = self.sketch(a, cfg, &vec![0; a.n3()])?;
        let spectrum = self.singular_spectrum(a);
        let report = ErrorReport::evaluate(&spectrum, &sketch, cfg.delta)?;
        Ok((sketch.factors, report))
    }

    /// Randomized t-SVD with per-slice subspace iteration.
    pub fn rtsvd_subspace(&self, a: &Tensor3, cfg: &SketchConfig) -> Result<(TSVDFactors, ErrorReport)> {
        let spectrum = self.singular_spectrum(a);
        let qs = self.iterations_for(cfg, &spectrum)?;
        let sketch = self.sketch(a, cfg, &qs)?;
        let report = ErrorReport::evaluate(&spectrum, &sketch, cfg.delta)?;
        Ok((sketch.factors, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tprod::{is_orthogonal, tprod, ttranspose, PREDICATE_TOL};
    use crate::tsvd::{reconstruct, singular_spectrum};
    use linalg::to_complex as complex;

    fn random(n1: usize, n2: usize, n3: usize, seed: u64) -> Tensor3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor3::from_fn(n1, n2, n3, |_, _, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gaussian_tensor_is_deterministic_and_impulsive() {
        let w = gaussian_random_tensor(5, 3, 4, 7);
        assert_eq!(w, gaussian_random_tensor(5, 3, 4, 7));
        assert_ne!(w, gaussian_random_tensor(5, 3, 4, 8));
        let fw = fft_mode3(&w);
        let first = fw.slice(0).clone();
        assert!(fw.slices().iter().all(|s| *s == first));
    }

    #[test]
    fn matrix_sketch_rank_checks() {
        let a = complex(&DMatrix::from_fn(5, 4, |i, j| (i + j) as f64));
        assert!(matches!(rsvd_matrix(&a, 3, 2, 0), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(subspace_range_matrix(&a, 0, 1, 0, 0), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn exact_rank_matrix_is_captured() {
        let l = complex(&DMatrix::from_fn(12, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0));
        let r = complex(&DMatrix::from_fn(3, 9, |i, j| ((i * 2 + j * 5) % 7) as f64 - 3.0));
        let a = &l * &r;
        let low = rsvd_matrix(&a, 3, 2, 1).unwrap();
        assert!((low.to_matrix() - &a).norm() <= 1e-10 * a.norm());
        let eye = CMat::identity(3, 3);
        assert!((low.u.ad_mul(&low.u) - &eye).norm() < 1e-10);
        assert!((low.v.ad_mul(&low.v) - &eye).norm() < 1e-10);
        assert!(low.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn diagonal_matrix_error_is_at_least_optimal() {
        let a = complex(&DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 4.0, 3.0, 2.0, 1.0])));
        for seed in 0..20 {
            let low = rsvd_matrix(&a, 2, 2, seed).unwrap();
            assert!(low.s.iter().all(|&s| (0.0..=5.0 + 1e-12).contains(&s)));
            let err = (low.to_matrix() - &a).norm();
            assert!(err >= (9.0f64 + 4.0 + 1.0).sqrt() - 1e-10);
        }
    }

    #[test]
    fn q_zero_range_matches_rsvd_range() {
        let a = complex(&DMatrix::from_fn(9, 7, |i, j| ((i * 3 + j * j) % 11) as f64));
        let q0 = subspace_range_matrix(&a, 2, 2, 0, 3).unwrap();
        let w = complex(&gaussian_matrix(7, 4, 3));
        assert_eq!(q0, linalg::orth(&(&a * w)));
        let q2 = subspace_range_matrix(&a, 2, 2, 2, 3).unwrap();
        assert!((q2.ad_mul(&q2) - CMat::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn clamp_reduces_oversampling() {
        let cfg = SketchConfig::new(3, 10);
        let (w, p, note) = cfg.clamp(6, 8).unwrap();
        assert_eq!((w, p), (6, 3));
        assert!(note.is_some());
        assert!(matches!(SketchConfig::new(7, 0).clamp(6, 8), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn iteration_vector_validation() {
        let a = random(6, 5, 4, 0);
        let cfg = SketchConfig::new(2, 2).with_iterations(vec![0, 1, 2]);
        assert_eq!(
            rtsvd_subspace(&a, &cfg).unwrap_err(),
            Error::IterationVectorLength { expected: 4, got: 3 }
        );
        let cfg = SketchConfig::new(2, 2).with_iterations(vec![0, 1, 2, 3]);
        assert_eq!(
            rtsvd_subspace(&a, &cfg).unwrap_err(),
            Error::AsymmetricIterations { slice: 1, mirror: 3 }
        );
        let cfg = SketchConfig::new(2, 2).with_iterations(vec![0, 1, 2, 1]);
        assert!(rtsvd_subspace(&a, &cfg).is_ok());
    }

    #[test]
    fn factors_are_consistent() {
        let a = random(10, 8, 5, 4);
        let cfg = SketchConfig::new(3, 2).with_seed(11).with_q(1);
        let sk = Executor::default().sketch(&a, &cfg, &[1; 5]).unwrap();
        assert!(is_orthogonal(&sk.factors.u, PREDICATE_TOL));
        assert!(is_orthogonal(&sk.factors.v, PREDICATE_TOL));
        assert!(is_orthogonal(&sk.basis, PREDICATE_TOL));
        let trunc = a.sub(&reconstruct(&sk.factors).unwrap()).unwrap().frobenius_norm();
        assert!((trunc - sk.truncation_error).abs() < 1e-10);
        let qqa = tprod(&sk.basis, &tprod(&ttranspose(&sk.basis), &a).unwrap()).unwrap();
        let proj = a.sub(&qqa).unwrap().frobenius_norm();
        assert!((proj - sk.projection_error).abs() < 1e-10);
        assert!(sk.projection_error <= sk.truncation_error + 1e-12);
    }

    #[test]
    fn report_fields() {
        let a = random(12, 10, 4, 5);
        let cfg = SketchConfig::new(3, 1).with_seed(2);
        let (_, rep) = rtsvd(&a, &cfg).unwrap();
        assert!(rep.expected_bound.is_none());
        assert!(rep.optimal <= rep.realized + 1e-10);
        assert!(rep.c_delta > 0.0 && rep.tail_bound > 0.0);
        assert_eq!(rep.tau.len(), 4);
        let (_, rep) = rtsvd(&a, &SketchConfig::new(3, 4)).unwrap();
        assert!(rep.expected_bound.unwrap() >= rep.optimal * rep.norm);
    }

    #[test]
    fn adaptive_iterations_are_used() {
        let a = random(12, 10, 4, 6);
        let cfg = SketchConfig::new(3, 3).with_eps(0.1);
        let (_, rep) = rtsvd_subspace(&a, &cfg).unwrap();
        let want = choose_iterations(&singular_spectrum(&a), 3, 3, 0.1, 50).unwrap();
        assert_eq!(rep.iterations, want);
        assert!(matches!(
            rtsvd_subspace(&a, &SketchConfig { eps: None, ..cfg }),
            Err(Error::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn choose_iterations_edge_cases() {
        let s = SigmaHat::from_rows([4, 4, 3], vec![vec![2.0, 1.0, 0.5, 0.1]; 3]);
        assert!(matches!(choose_iterations(&s, 1, 2, 1.5, 10), Err(Error::InvalidEpsilon(_))));
        assert!(matches!(choose_iterations(&s, 1, 1, 0.5, 10), Err(Error::OversamplingTooSmall(1))));
        let flat = SigmaHat::from_rows([2, 2, 1], vec![vec![1.0, 1.0]]);
        assert_eq!(choose_iterations(&flat, 1, 2, 0.5, 17).unwrap(), vec![17]);
        let low = SigmaHat::from_rows([3, 3, 2], vec![vec![1.0, 0.0, 0.0]; 2]);
        assert_eq!(choose_iterations(&low, 1, 2, 0.5, 17).unwrap(), vec![0, 0]);
    }
}
