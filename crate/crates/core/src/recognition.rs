//! Face recognition with t-SVD projectors.
//!
//! Images are lateral slices (`n1 = rows`, `n3 = columns`). Training
//! mean-shifts the image tensor, computes a rank-`k` projector `U_k` and
//! stores the coefficients `C = U_kᵀ ∗ A`. A probe is mean-shifted,
//! projected the same way and assigned the label of the nearest coefficient
//! slice in Frobenius distance.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::randomized::{Iterations, SketchConfig};
use crate::tensor::Tensor3;
use crate::tprod::ttranspose;

#[derive(Clone, Debug, PartialEq)]
pub struct FaceDataset {
    pub tensor: Tensor3,
    /// Class id of every lateral slice.
    pub labels: Vec<usize>,
    /// Human-readable class names indexed by id; may be empty.
    pub class_names: Vec<String>,
}

impl FaceDataset {
    pub fn new(tensor: Tensor3, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != tensor.n2() {
            return Err(Error::mismatch(
                "FaceDataset::new",
                format!("{} labels for {} images", labels.len(), tensor.n2()),
            ));
        }
        Ok(FaceDataset {
            tensor,
            labels,
            class_names: Vec::new(),
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = names;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Arithmetic mean of the lateral slices, `n1 × 1 × n3`.
    pub fn mean_slice(&self) -> Tensor3 {
        lateral_mean(&self.tensor)
    }

    pub fn subset(&self, idx: &[usize]) -> FaceDataset {
        FaceDataset {
            tensor: self.tensor.select_lateral(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

fn lateral_mean(t: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = t.dims();
    Tensor3::from_fn(n1, 1, n3, |i, _, k| (0..n2).map(|j| t.get(i, j, k)).sum::<f64>() / n2 as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Tsvd,
    Rtsvd,
    RtsvdSubspace(Iterations),
}

impl Method {
    pub fn is_randomized(&self) -> bool {
        !matches!(self, Method::Tsvd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Tsvd => f.write_str("tsvd"),
            Method::Rtsvd => f.write_str("rtsvd"),
            Method::RtsvdSubspace(Iterations::Uniform(q)) => write!(f, "rtsvd-q{q}"),
            Method::RtsvdSubspace(Iterations::PerSlice(_)) => f.write_str("rtsvd-qvec"),
            Method::RtsvdSubspace(Iterations::Adaptive) => f.write_str("rtsvd-qeps"),
        }
    }
}

/// How training and probe images are shifted before projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanShift {
    /// Subtract the mean lateral slice.
    #[default]
    Center,
    /// Subtract the mean and divide by the per-pixel standard deviation.
    Standardize,
}

#[derive(Clone, Debug)]
pub struct RecognitionModel {
    pub projector: Tensor3,
    pub coefficients: Tensor3,
    pub labels: Vec<usize>,
    pub mean_slice: Tensor3,
    pub method: Method,
    scale: Option<Tensor3>,
    /// Coefficient slices flattened to columns (`k·n3 × n_train`).
    coeff_cols: DMatrix<f64>,
    coeff_norms: Vec<f64>,
}

/// Flatten each lateral slice of a `k × m × n3` tensor into a column.
fn lateral_columns(t: &Tensor3) -> DMatrix<f64> {
    let (k, m, n3) = t.dims();
    let mut out = DMatrix::zeros(k * n3, m);
    for s in 0..n3 {
        for j in 0..m {
            for r in 0..k {
                out[(r + k * s, j)] = t.get(r, j, s);
            }
        }
    }
    out
}

fn shift(images: &Tensor3, mean: &Tensor3, scale: Option<&Tensor3>) -> Tensor3 {
    let (n1, m, n3) = images.dims();
    Tensor3::from_fn(n1, m, n3, |i, j, k| {
        let x = images.get(i, j, k) - mean.get(i, 0, k);
        match scale {
            Some(sd) => x / sd.get(i, 0, k),
            None => x,
        }
    })
}

fn pixel_std(t: &Tensor3, mean: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = t.dims();
    Tensor3::from_fn(n1, 1, n3, |i, _, k| {
        let var = (0..n2).map(|j| (t.get(i, j, k) - mean.get(i, 0, k)).powi(2)).sum::<f64>() / n2 as f64;
        if var > 0.0 {
            var.sqrt()
        } else {
            1.0
        }
    })
}

fn projector(exec: &Executor, a: &Tensor3, k: usize, method: &Method, cfg: &SketchConfig) -> Result<Tensor3> {
    let cfg = SketchConfig { k, ..cfg.clone() };
    match method {
        Method::Tsvd => Ok(exec.tsvd_truncated(a, k)?.u),
        Method::Rtsvd => Ok(exec.sketch(a, &cfg, &vec![0; a.n3()])?.factors.u),
        Method::RtsvdSubspace(q) => {
            let cfg = SketchConfig { q: q.clone(), ..cfg };
            let qs = match q {
                Iterations::Adaptive => exec.iterations_for(&cfg, &exec.singular_spectrum(a))?,
                _ => crate::randomized::resolve_iterations(q, a.n3(), || unreachable!())?,
            };
            Ok(exec.sketch(a, &cfg, &qs)?.factors.u)
        }
    }
}

pub fn train(data: &FaceDataset, k: usize, method: &Method, cfg: &SketchConfig) -> Result<RecognitionModel> {
    Executor::default().train(data, k, method, cfg, MeanShift::Center)
}

pub fn classify(model: &RecognitionModel, image: &Tensor3) -> Result<(usize, f64)> {
    Executor::default().classify(model, image)
}

impl RecognitionModel {
    pub fn k(&self) -> usize {
        self.projector.n2()
    }

    pub fn training_count(&self) -> usize {
        self.labels.len()
    }
}

/// One classified probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub label: usize,
    /// Index of the nearest training slice.
    pub index: usize,
    pub distance: f64,
}

impl Executor {
    pub fn train(
        &self,
        data: &FaceDataset,
        k: usize,
        method: &Method,
        cfg: &SketchConfig,
        shift_mode: MeanShift,
    ) -> Result<RecognitionModel> {
        let mean_slice = data.mean_slice();
        let scale = (shift_mode == MeanShift::Standardize).then(|| pixel_std(&data.tensor, &mean_slice));
        let a = shift(&data.tensor, &mean_slice, scale.as_ref());
        let projector = projector(self, &a, k, method, cfg)?;
        let coefficients = self.tprod(&ttranspose(&projector), &a)?;
        let coeff_cols = lateral_columns(&coefficients);
        let coeff_norms = coeff_cols.column_iter().map(|c| c.norm_squared()).collect();
        Ok(RecognitionModel {
            projector,
            coefficients,
            labels: data.labels.clone(),
            mean_slice,
            method: method.clone(),
            scale,
            coeff_cols,
            coeff_norms,
        })
    }

    pub fn classify(&self, model: &RecognitionModel, image: &Tensor3) -> Result<(usize, f64)> {
        if image.n2() != 1 {
            return Err(Error::mismatch("classify", format!("probe {:?} is not a lateral slice", image.dims())));
        }
        let m = self.classify_batch(model, image)?[0];
        Ok((m.label, m.distance))
    }

    /// Classify every lateral slice of `probes`. Ties go to the smallest
    /// training index.
    pub fn classify_batch(&self, model: &RecognitionModel, probes: &Tensor3) -> Result<Vec<Match>> {
        let (n1, _, n3) = model.mean_slice.dims();
        if probes.n1() != n1 || probes.n3() != n3 {
            return Err(Error::mismatch(
                "classify",
                format!("probe {:?} vs model images {n1}×·×{n3}", probes.dims()),
            ));
        }
        let t = shift(probes, &model.mean_slice, model.scale.as_ref());
        let ct = self.tprod(&ttranspose(&model.projector), &t)?;
        let cols = lateral_columns(&ct);
        let gram = cols.tr_mul(&model.coeff_cols);
        Ok(cols
            .column_iter()
            .enumerate()
            .map(|(j, probe)| {
                let pn = probe.norm_squared();
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (t, tn) in model.coeff_norms.iter().enumerate() {
                    let d = pn + tn - 2.0 * gram[(j, t)];
                    if d < best_d {
                        best_d = d;
                        best = t;
                    }
                }
                let distance = (probe - model.coeff_cols.column(best)).norm();
                Match {
                    label: model.labels[best],
                    index: best,
                    distance,
                }
            })
            .collect())
    }

    pub fn cross_validate(&self, data: &FaceDataset, k: usize, methods: &[Method], cv: &CvConfig) -> Result<CVReport> {
        let folds = fold_partition(data.len(), cv.folds, cv.seed)?;
        let per_fold = self.map(folds.len(), |f| -> Result<Vec<FoldStats>> {
            let test = &folds[f];
            let mut in_test = vec![false; data.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| !in_test[i]).collect();
            let train_set = data.subset(&train_idx);
            let test_set = data.subset(test);
            methods
                .iter()
                .map(|method| {
                    let runs = if method.is_randomized() { cv.trials.max(1) } else { 1 };
                    let mut rates = Vec::with_capacity(runs);
                    let mut seconds = 0.0;
                    for trial in 0..runs {
                        let cfg = SketchConfig {
                            seed: derive_seed(cv.seed, f as u64, trial as u64),
                            ..cv.sketch.clone()
                        };
                        let start = Instant::now();
                        let model = self.train(&train_set, k, method, &cfg, cv.shift)?;
                        seconds += start.elapsed().as_secs_f64();
                        let hits = self
                            .classify_batch(&model, &test_set.tensor)?
                            .iter()
                            .zip(&test_set.labels)
                            .filter(|(m, want)| m.label == **want)
                            .count();
                        rates.push(hits as f64 / test_set.len() as f64);
                    }
                    Ok(FoldStats::new(f, test_set.len(), rates, seconds / runs as f64))
                })
                .collect()
        });
        let mut table: Vec<MethodReport> = methods
            .iter()
            .map(|m| MethodReport {
                method: m.to_string(),
                folds: Vec::with_capacity(folds.len()),
            })
            .collect();
        for fold in per_fold {
            for (row, stats) in table.iter_mut().zip(fold?) {
                row.folds.push(stats);
            }
        }
        Ok(CVReport {
            k,
            folds: cv.folds,
            trials: cv.trials,
            seed: cv.seed,
            methods: table,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub trials: usize,
    pub seed: u64,
    /// Oversampling, iteration cap and so on for randomized methods; `k` and
    /// `seed` are overridden per run.
    pub sketch: SketchConfig,
    pub shift: MeanShift,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            trials: 20,
            seed: 0,
            sketch: SketchConfig::new(1, 10),
            shift: MeanShift::Center,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub folds: usize,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<MethodReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub folds: Vec<FoldStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldStats {
    pub fold: usize,
    pub test_count: usize,
    pub rates: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Mean wall time of one training decomposition. Not serialized, so
    /// reports from identical runs stay byte-identical.
    #[serde(skip)]
    pub train_seconds: f64,
}

impl FoldStats {
    fn new(fold: usize, test_count: usize, rates: Vec<f64>, train_seconds: f64) -> Self {
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        FoldStats {
            fold,
            test_count,
            rates,
            mean,
            min,
            max,
            train_seconds,
        }
    }
}

/// Seeded random partition of `0..n` into `folds` test sets; the first
/// `n % folds` folds hold one extra sample.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::TooFewSamples { samples: n, folds });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one randomized run of one fold.
pub fn derive_seed(base: u64, fold: u64, trial: u64) -> u64 {
    splitmix(base ^ splitmix(fold << 32 | trial))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_is_disjoint_cover_with_extra_first() {
        let folds = fold_partition(23, 10, 5).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, fold_partition(23, 10, 5).unwrap());
        assert_ne!(folds, fold_partition(23, 10, 6).unwrap());
        assert_eq!(fold_partition(9, 10, 0), Err(Error::TooFewSamples { samples: 9, folds: 10 }));
    }

    #[test]
    fn mean_slice_is_average() {
        let t = Tensor3::from_fn(2, 4, 3, |i, j, k| (i + 2 * j + 3 * k) as f64);
        let ds = FaceDataset::new(t, vec![0, 0, 1, 1]).unwrap();
        let m = ds.mean_slice();
        assert_eq!(m.dims(), (2, 1, 3));
        for i in 0..2 {
            for k in 0..3 {
                assert!((m.get(i, 0, k) - (i as f64 + 3.0 + 3.0 * k as f64)).abs() < 1e-12);
            }
        }
        assert!(FaceDataset::new(Tensor3::zeros(2, 3, 2), vec![0]).is_err());
    }

    #[test]
    fn seeds_differ_per_fold_and_trial() {
        let s = derive_seed(1, 0, 0);
        assert_ne!(s, derive_seed(1, 0, 1));
        assert_ne!(s, derive_seed(1, 1, 0));
        assert_eq!(s, derive_seed(1, 0, 0));
    }

    #[test]
    fn method_names() {
        assert_eq!(Method::Tsvd.to_string(), "tsvd");
        assert_eq!(Method::RtsvdSubspace(Iterations::Uniform(2)).to_string(), "rtsvd-q2");
        assert!(!Method::Tsvd.is_randomized());
    }
}
