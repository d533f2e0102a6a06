//! Dense third-order tensors and their tube-wise Fourier transforms.
//!
//! Storage layout: entry `(i, j, k)` of an `n1 × n2 × n3` tensor lives at
//! flat index `i + n1 * (j + n2 * k)`. Each frontal slice is therefore a
//! contiguous column-major `n1 × n2` block and the frontal slice index varies
//! slowest. The tensor file format writes this buffer verbatim.
//!
//! The DFT along tubes is unnormalized in the forward direction and carries
//! the `1/n3` factor on the inverse, so `‖A‖²_F = (1/n3) Σᵢ ‖Âᵢ‖²_F`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Relative tolerance under which a spectrum counts as conjugate symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Imaginary residue allowed by [`ifft_mode3`], relative to `‖f‖_F`.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Default entry budget for dense oracle matricizations.
pub const DEFAULT_DENSE_BUDGET: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    /// Build from a slice-major buffer. Rejects empty dimensions, wrong
    /// lengths and non-finite entries.
    pub fn new(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        check_dims([n1, n2, n3])?;
        if data.len() != n1 * n2 * n3 {
            return Err(Error::DataLength {
                dims: [n1, n2, n3],
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Tensor3 {
            dims: [n1, n2, n3],
            data,
        })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0, "tensor dimensions must be positive");
        Tensor3 {
            dims: [n1, n2, n3],
            data: vec![0.0; n1 * n2 * n3],
        }
    }

    /// # Panics
    /// If any dimension is zero or `f` yields a non-finite value.
    pub fn from_fn(n1: usize, n2: usize, n3: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n1, n2, n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    let v = f(i, j, k);
                    assert!(v.is_finite(), "non-finite tensor entry");
                    t.data[i + n1 * (j + n2 * k)] = v;
                }
            }
        }
        t
    }

    /// Stack real frontal slices; all must share one shape.
    pub fn from_frontal_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices.first().ok_or(Error::InvalidShape([0, 0, 0]))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for s in slices {
            if s.shape() != (n1, n2) {
                return Err(Error::mismatch(
                    "from_frontal_slices",
                    format!("slice shape {:?} differs from {:?}", s.shape(), (n1, n2)),
                ));
            }
            data.extend_from_slice(s.as_slice());
        }
        Tensor3::new(n1, n2, slices.len(), data)
    }

    pub(crate) fn from_raw(dims: [usize; 3], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Tensor3 { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dims[0], self.dims[1], self.dims[2])
    }

    pub fn n1(&self) -> usize {
        self.dims[0]
    }

    pub fn n2(&self) -> usize {
        self.dims[1]
    }

    pub fn n3(&self) -> usize {
        self.dims[2]
    }

    /// The raw slice-major buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        assert!(v.is_finite(), "non-finite tensor entry");
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn frontal_slice(&self, k: usize) -> DMatrix<f64> {
        let len = self.dims[0] * self.dims[1];
        DMatrix::from_column_slice(self.dims[0], self.dims[1], &self.data[k * len..(k + 1) * len])
    }

    /// The `n1 × 1 × n3` lateral slice `A(:, j, :)`.
    pub fn lateral_slice(&self, j: usize) -> Tensor3 {
        self.select_lateral(&[j])
    }

    /// Gather lateral slices in the given order into an `n1 × idx.len() × n3` tensor.
    pub fn select_lateral(&self, idx: &[usize]) -> Tensor3 {
        let (n1, _, n3) = self.dims();
        let mut out = Vec::with_capacity(n1 * idx.len() * n3);
        for k in 0..n3 {
            for &j in idx {
                let o = self.offset(0, j, k);
                out.extend_from_slice(&self.data[o..o + n1]);
            }
        }
        Tensor3::from_raw([n1, idx.len(), n3], out)
    }

    /// Concatenate tensors along the second dimension.
    pub fn concat_lateral(parts: &[Tensor3]) -> Result<Tensor3> {
        let first = parts.first().ok_or(Error::InvalidShape([0, 0, 0]))?;
        let (n1, _, n3) = first.dims();
        if let Some(bad) = parts.iter().find(|p| p.n1() != n1 || p.n3() != n3) {
            return Err(Error::mismatch(
                "concat_lateral",
                format!("{:?} does not match {n1}×·×{n3}", bad.dims()),
            ));
        }
        let n2: usize = parts.iter().map(Tensor3::n2).sum();
        let mut out = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for p in parts {
                let len = n1 * p.n2();
                out.extend_from_slice(&p.data[k * len..(k + 1) * len]);
            }
        }
        Ok(Tensor3::from_raw([n1, n2, n3], out))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn scaled(&self, factor: f64) -> Tensor3 {
        Tensor3::from_raw(self.dims, self.data.iter().map(|x| x * factor).collect())
    }

    fn zip(&self, other: &Tensor3, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        if self.dims != other.dims {
            return Err(Error::mismatch(
                op,
                format!("{:?} vs {:?}", self.dims(), other.dims()),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Tensor3::from_raw(self.dims, data))
    }

    /// Largest absolute entrywise difference; `None` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor3) -> Option<f64> {
        (self.dims == other.dims).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        })
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.contains(&0) {
        Err(Error::InvalidShape(dims))
    } else {
        Ok(())
    }
}

/// Complex frontal slices of a tensor after the tube-wise DFT.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTensor3 {
    dims: [usize; 3],
    slices: Vec<CMat>,
    symmetric: bool,
}

impl FourierTensor3 {
    /// Wrap arbitrary complex slices. The symmetric flag is set iff the
    /// slices satisfy `slice(n3 - i) = conj(slice(i))` (zero-based) and the
    /// self-conjugate slices are real, to relative tolerance [`SYMMETRY_TOL`].
    pub fn from_slices(slices: Vec<CMat>) -> Result<Self> {
        let first = slices.first().ok_or(Error::InvalidShape([0, 0, 0]))?;
        let (n1, n2) = first.shape();
        check_dims([n1, n2, slices.len()])?;
        if let Some(bad) = slices.iter().find(|s| s.shape() != (n1, n2)) {
            return Err(Error::mismatch(
                "FourierTensor3::from_slices",
                format!("slice shape {:?} differs from {:?}", bad.shape(), (n1, n2)),
            ));
        }
        if slices.iter().flat_map(|s| s.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(0));
        }
        let symmetric = is_conjugate_symmetric(&slices, SYMMETRY_TOL);
        Ok(FourierTensor3 {
            dims: [n1, n2, slices.len()],
            slices,
            symmetric,
        })
    }

    /// Complete a spectrum from its first `n3/2 + 1` slices by conjugate
    /// mirroring. Self-conjugate slices have their imaginary parts cleared.
    pub(crate) fn from_half(n3: usize, half: Vec<CMat>) -> Self {
        let (n1, n2) = half[0].shape();
        let mut slices = mirror(n3, half);
        clear_self_conjugate_imag(&mut slices);
        FourierTensor3 {
            dims: [n1, n2, n3],
            slices,
            symmetric: true,
        }
    }

    /// Assemble computed slices: mirrored when only the leading half was
    /// computed, checked otherwise.
    pub(crate) fn assemble(n3: usize, computed: Vec<CMat>) -> Self {
        if computed.len() == n3 {
            let (n1, n2) = computed[0].shape();
            let symmetric = is_conjugate_symmetric(&computed, SYMMETRY_TOL);
            FourierTensor3 {
                dims: [n1, n2, n3],
                slices: computed,
                symmetric,
            }
        } else {
            Self::from_half(n3, computed)
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dims[0], self.dims[1], self.dims[2])
    }

    pub fn n3(&self) -> usize {
        self.dims[2]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn slices(&self) -> &[CMat] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> &CMat {
        &self.slices[i]
    }

    pub fn into_slices(self) -> Vec<CMat> {
        self.slices
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| s.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn mirror(n3: usize, half: Vec<CMat>) -> Vec<CMat> {
    let mut full = half;
    for i in full.len()..n3 {
        let src = full[n3 - i].map(|z| z.conj());
        full.push(src);
    }
    full
}

fn clear_self_conjugate_imag(slices: &mut [CMat]) {
    let n3 = slices.len();
    let fix = |s: &mut CMat| s.iter_mut().for_each(|z| z.im = 0.0);
    fix(&mut slices[0]);
    if n3.is_multiple_of(2) {
        fix(&mut slices[n3 / 2]);
    }
}

fn is_conjugate_symmetric(slices: &[CMat], tol: f64) -> bool {
    let n3 = slices.len();
    let norm = slices
        .iter()
        .flat_map(|s| s.iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let limit = tol * norm;
    (0..n3).all(|i| {
        let mirror = &slices[(n3 - i) % n3];
        let diff = slices[i]
            .iter()
            .zip(mirror.iter())
            .map(|(a, b)| (a - b.conj()).norm_sqr())
            .sum::<f64>()
            .sqrt();
        diff <= limit
    })
}

/// Unnormalized forward DFT of every tube fiber.
pub fn fft_mode3(t: &Tensor3) -> FourierTensor3 {
    let (n1, n2, n3) = t.dims();
    let tubes = n1 * n2;
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); tubes * n3];
    for s in 0..n3 {
        let src = &t.data[s * tubes..(s + 1) * tubes];
        for (tube, &x) in src.iter().enumerate() {
            buf[tube * n3 + s] = Complex64::new(x, 0.0);
        }
    }
    if n3 > 1 {
        FftPlanner::new().plan_fft_forward(n3).process(&mut buf);
    }
    // only the non-redundant half is read back; the rest is mirrored exactly
    let half = (0..=n3 / 2)
        .map(|s| CMat::from_fn(n1, n2, |i, j| buf[(i + n1 * j) * n3 + s]))
        .collect();
    FourierTensor3::from_half(n3, half)
}

/// Inverse of [`fft_mode3`]. Fails with `SymmetryViolation` when the result
/// has an imaginary part above `1e-8 · ‖f‖_F`; smaller residues are dropped.
pub fn ifft_mode3(f: &FourierTensor3) -> Result<Tensor3> {
    let (n1, n2, n3) = f.dims();
    let tubes = n1 * n2;
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); tubes * n3];
    for (s, slice) in f.slices.iter().enumerate() {
        for (tube, z) in slice.iter().enumerate() {
            buf[tube * n3 + s] = *z;
        }
    }
    if n3 > 1 {
        FftPlanner::new().plan_fft_inverse(n3).process(&mut buf);
    }
    let scale = 1.0 / n3 as f64;
    let mut residue: f64 = 0.0;
    let mut data = vec![0.0; tubes * n3];
    for tube in 0..tubes {
        for s in 0..n3 {
            let z = buf[tube * n3 + s] * scale;
            residue = residue.max(z.im.abs());
            data[tube + tubes * s] = z.re;
        }
    }
    let tolerance = IMAG_RESIDUE_TOL * f.frobenius_norm();
    if residue > tolerance {
        return Err(Error::SymmetryViolation { residue, tolerance });
    }
    if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    Ok(Tensor3::from_raw(f.dims, data))
}

/// Anything with a Frobenius norm.
pub trait FrobeniusNorm {
    fn frobenius_norm(&self) -> f64;
}

impl FrobeniusNorm for Tensor3 {
    fn frobenius_norm(&self) -> f64 {
        Tensor3::frobenius_norm(self)
    }
}

impl FrobeniusNorm for FourierTensor3 {
    fn frobenius_norm(&self) -> f64 {
        FourierTensor3::frobenius_norm(self)
    }
}

pub fn frobenius_norm<T: FrobeniusNorm + ?Sized>(t: &T) -> f64 {
    t.frobenius_norm()
}

/// Block-circulant matricization with first block column
/// `(A⁽¹⁾; A⁽²⁾; …; A⁽ⁿ³⁾)`; block `(r, c)` is `A^((r - c) mod n3)`.
pub fn block_circulant(t: &Tensor3) -> Result<DMatrix<f64>> {
    block_circulant_with_budget(t, DEFAULT_DENSE_BUDGET)
}

pub fn block_circulant_with_budget(t: &Tensor3, budget: usize) -> Result<DMatrix<f64>> {
    let (n1, n2, n3) = t.dims();
    let required = (n1 * n3).saturating_mul(n2 * n3);
    if required > budget {
        return Err(Error::SizeLimit { required, budget });
    }
    let mut m = DMatrix::zeros(n1 * n3, n2 * n3);
    for r in 0..n3 {
        for c in 0..n3 {
            let k = (r + n3 - c) % n3;
            for j in 0..n2 {
                for i in 0..n1 {
                    m[(r * n1 + i, c * n2 + j)] = t.get(i, j, k);
                }
            }
        }
    }
    Ok(m)
}
