//! The command implementations behind the `rtsvd` binary.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rtsvd::bounds;
use rtsvd::recognition::{CvConfig, MeanShift};
use rtsvd::{CVReport, ErrorReport, Executor, FaceDataset, Tensor3};

use crate::config::{Format, MethodArg, RunConfig};
use crate::dataset::{load_image_dir, Layout};
use crate::tensor_file;

fn executor(cfg: &RunConfig) -> Executor {
    Executor::new(cfg.workers)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write `text` to `--out` if given, else to stdout.
fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn rows_text<T: Serialize>(rows: &[T], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            Ok(String::from_utf8(w.into_inner()?)?)
        }
    }
}

/// `x` with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.5}");
    }
    let decimals = (5 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Clone, Debug, Serialize)]
pub struct DecomposeReport {
    pub method: MethodArg,
    pub dims: [usize; 3],
    pub k: usize,
    pub workers: usize,
    pub seed: u64,
    /// `‖A − U ∗ S ∗ Vᵀ‖_F / ‖A‖_F`.
    pub realized: f64,
    pub optimal: f64,
    /// Randomized diagnostics; absent for the exact decomposition.
    pub randomized: Option<ErrorReport>,
    /// Wall time of the decomposition alone.
    pub wall_seconds: f64,
}

pub fn decompose(input: &Path, cfg: &RunConfig) -> Result<DecomposeReport> {
    let a = tensor_file::read(input).with_context(|| format!("reading {}", input.display()))?;
    let k = cfg.single_k()?;
    let method = match cfg.methods.as_slice() {
        [m] => *m,
        _ => bail!("decompose takes a single --method"),
    };
    let exec = executor(cfg);
    let sketch_cfg = cfg.sketch(k);
    let start = Instant::now();
    let (factors, randomized) = match method {
        MethodArg::Tsvd => (exec.tsvd_truncated(&a, k)?, None),
        MethodArg::Rtsvd => {
            let (f, r) = exec.rtsvd(&a, &sketch_cfg)?;
            (f, Some(r))
        }
        MethodArg::RtsvdQ => {
            let (f, r) = exec.rtsvd_subspace(&a, &sketch_cfg)?;
            (f, Some(r))
        }
    };
    let wall_seconds = start.elapsed().as_secs_f64();

    let dir = out_dir(cfg)?;
    tensor_file::write(dir.join("U.tt3"), &factors.u)?;
    tensor_file::write(dir.join("S.tt3"), &factors.s)?;
    tensor_file::write(dir.join("V.tt3"), &factors.v)?;

    let rec = exec.tprod(&factors.u, &exec.tprod(&factors.s, &rtsvd::ttranspose(&factors.v))?)?;
    let norm = a.frobenius_norm();
    let rel = |x: f64| if norm > 0.0 { x / norm } else { 0.0 };
    let optimal = match &randomized {
        Some(r) => r.optimal,
        None => rel(factors.sigma_hat.optimal_error(k)?),
    };
    let (n1, n2, n3) = a.dims();
    let report = DecomposeReport {
        method,
        dims: [n1, n2, n3],
        k,
        workers: exec.workers(),
        seed: cfg.seed,
        realized: rel(a.sub(&rec)?.frobenius_norm()),
        optimal,
        randomized,
        wall_seconds,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

/// One row of the error benchmark. Errors are relative to `‖A‖_F`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub k: usize,
    pub q: usize,
    /// Optimal error `e_k`.
    pub e_k: f64,
    /// Mean, min and max error of the rank-`k` randomized factorization.
    pub mean_e: f64,
    pub min_e: f64,
    pub max_e: f64,
    /// Mean projection error `‖A − Q ∗ Qᵀ ∗ A‖_F`.
    pub mean_proj: f64,
    /// Expected-error bound on the projection error; empty when `p < 2`.
    pub bound: Option<f64>,
    pub tail_bound: f64,
    /// Mean seconds per decomposition.
    pub wall_time: f64,
}

pub fn bench_rows(a: &Tensor3, cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    if cfg.k.is_empty() {
        bail!("--k is required");
    }
    let exec = executor(cfg);
    let spectrum = exec.singular_spectrum(a);
    let norm = spectrum.norm();
    let rel = |x: f64| if norm > 0.0 { x / norm } else { 0.0 };
    let n3 = a.n3();
    let mut rows = Vec::new();
    for &k in &cfg.k {
        for &q in &cfg.q {
            let qs = vec![q; n3];
            let mut errs = Vec::with_capacity(cfg.trials);
            let mut proj = 0.0;
            let mut seconds = 0.0;
            let mut p_eff = cfg.p;
            for trial in 0..cfg.trials {
                let sc = cfg.sketch(k).with_seed(cfg.seed.wrapping_add(trial as u64));
                let start = Instant::now();
                let sk = exec.sketch(a, &sc, &qs)?;
                seconds += start.elapsed().as_secs_f64();
                errs.push(rel(sk.truncation_error));
                proj += rel(sk.projection_error);
                p_eff = sk.oversampling;
            }
            let n = cfg.trials as f64;
            let bound = match bounds::expected_bound(&spectrum, k, p_eff, &qs) {
                Ok(b) => Some(rel(b)),
                Err(rtsvd::Error::OversamplingTooSmall(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let (tail, _) = bounds::tail_bound(&spectrum, k, p_eff, &qs, cfg.delta)?;
            rows.push(BenchRow {
                k,
                q,
                e_k: rel(spectrum.optimal_error(k)?),
                mean_e: errs.iter().sum::<f64>() / n,
                min_e: errs.iter().copied().fold(f64::INFINITY, f64::min),
                max_e: errs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_proj: proj / n,
                bound,
                tail_bound: rel(tail),
                wall_time: seconds / n,
            });
        }
    }
    Ok(rows)
}

pub fn bench_error(input: &Path, cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    let a = tensor_file::read(input).with_context(|| format!("reading {}", input.display()))?;
    let rows = bench_rows(&a, cfg)?;
    emit(cfg, &rows_text(&rows, cfg.format)?)?;
    Ok(rows)
}

/// Images from a directory, or a tensor file plus `--labels`.
pub fn load_dataset(input: &Path, cfg: &RunConfig) -> Result<FaceDataset> {
    if input.is_dir() {
        return Ok(load_image_dir(input, Layout::RowsFirst)?);
    }
    let tensor = tensor_file::read(input).with_context(|| format!("reading {}", input.display()))?;
    let Some(path) = &cfg.labels else {
        bail!("a tensor-file dataset needs --labels");
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let mut ids = BTreeMap::new();
    for l in &raw {
        ids.insert(*l, 0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    let labels = raw.iter().map(|l| ids[l]).collect();
    let names = ids.keys().map(|s| s.to_string()).collect();
    Ok(FaceDataset::new(tensor, labels)?.with_class_names(names))
}

pub fn run_cv(data: &FaceDataset, cfg: &RunConfig) -> Result<CVReport> {
    let k = cfg.single_k()?;
    let cv = CvConfig {
        folds: cfg.folds,
        trials: cfg.trials,
        seed: cfg.seed,
        sketch: cfg.sketch(k),
        shift: if cfg.zscore { MeanShift::Standardize } else { MeanShift::Center },
    };
    let methods: Vec<_> = cfg.methods.iter().map(|&m| cfg.method(m)).collect();
    Ok(executor(cfg).cross_validate(data, k, &methods, &cv)?)
}

/// Rates laid out with one column per fold and mean/min/max rows per method.
pub fn rate_table(report: &CVReport) -> String {
    let mut out = String::from("method,stat");
    for f in 1..=report.folds {
        out += &format!(",fold{f}");
    }
    out.push('\n');
    for m in &report.methods {
        for (stat, pick) in [("mean", 0), ("min", 1), ("max", 2)] {
            out += &format!("{},{stat}", m.method);
            for f in &m.folds {
                out.push(',');
                out += &sig6([f.mean, f.min, f.max][pick]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn timing_table(report: &CVReport) -> String {
    let mut out = String::from("method,fold,train_seconds\n");
    for m in &report.methods {
        for f in &m.folds {
            out += &format!("{},{},{:.6}\n", m.method, f.fold + 1, f.train_seconds);
        }
    }
    out
}

/// Cross-validated recognition rates written as `report.json`, `table.csv`
/// and `timing.csv` under `--out`.
pub fn recognize(input: &Path, cfg: &RunConfig) -> Result<CVReport> {
    let data = load_dataset(input, cfg)?;
    let report = run_cv(&data, cfg)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("report.json"), &report)?;
    fs::write(dir.join("table.csv"), rate_table(&report))?;
    fs::write(dir.join("timing.csv"), timing_table(&report))?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub method: String,
    pub fold: usize,
    pub trial: usize,
    pub test_count: usize,
    pub rate: f64,
}

/// Every per-trial rate as CSV or JSON rows.
pub fn cross_validate(input: &Path, cfg: &RunConfig) -> Result<Vec<TrialRow>> {
    let data = load_dataset(input, cfg)?;
    let report = run_cv(&data, cfg)?;
    let rows: Vec<TrialRow> = report
        .methods
        .iter()
        .flat_map(|m| {
            m.folds.iter().flat_map(move |f| {
                f.rates.iter().enumerate().map(move |(t, &rate)| TrialRow {
                    method: m.method.clone(),
                    fold: f.fold + 1,
                    trial: t + 1,
                    test_count: f.test_count,
                    rate,
                })
            })
        })
        .collect();
    emit(cfg, &rows_text(&rows, cfg.format)?)?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Info {
    Tensor {
        version: u16,
        dims: [usize; 3],
        frobenius_norm: f64,
        max_abs: f64,
    },
    Images {
        images: usize,
        classes: usize,
        /// `(n1, n2, n3)` of the assembled tensor.
        dims: [usize; 3],
    },
}

pub fn info(input: &Path, cfg: &RunConfig) -> Result<Info> {
    let info = if input.is_dir() {
        let ds = load_image_dir(input, Layout::RowsFirst)?;
        let (n1, n2, n3) = ds.tensor.dims();
        Info::Images {
            images: ds.len(),
            classes: ds.class_names.len(),
            dims: [n1, n2, n3],
        }
    } else {
        let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
        let (version, _) = tensor_file::header(&bytes)?;
        let t = tensor_file::decode(&bytes)?;
        let (n1, n2, n3) = t.dims();
        Info::Tensor {
            version,
            dims: [n1, n2, n3],
            frobenius_norm: t.frobenius_norm(),
            max_abs: t.max_abs(),
        }
    };
    let text = match cfg.format {
        Format::Json => serde_json::to_string_pretty(&info)? + "\n",
        Format::Csv => match &info {
            Info::Tensor {
                version,
                dims,
                frobenius_norm,
                max_abs,
            } => format!(
                "format: TT3F v{version}\ndims: {} x {} x {}\nfrobenius norm: {frobenius_norm}\nmax |entry|: {max_abs}\nchecksum: ok\n",
                dims[0], dims[1], dims[2]
            ),
            Info::Images { images, classes, dims } => format!(
                "images: {images}\nclasses: {classes}\ntensor: {} x {} x {}\n",
                dims[0], dims[1], dims[2]
            ),
        },
    };
    emit(cfg, &text)?;
    Ok(info)
}
