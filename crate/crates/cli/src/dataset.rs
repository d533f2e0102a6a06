//! Loading labelled image directories into a [`FaceDataset`].
//!
//! Each subdirectory of the root is one class; its name is the class name
//! and its `.pgm` files (sorted by name) are that class's images. Images
//! placed directly in the root take the class named by their file stem up
//! to the first `_`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rtsvd::{FaceDataset, Tensor3};

use crate::pgm;

/// Where image axes go in the tensor. Image index is always dimension 2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Layout {
    /// Rows to dimension 1, columns to dimension 3.
    #[default]
    RowsFirst,
    /// Columns to dimension 1, rows to dimension 3.
    ColsFirst,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: image is {got:?} (height × width), expected {expected:?}")]
    MixedImageSizes {
        path: PathBuf,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("no .pgm images under {0}")]
    Empty(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] rtsvd::Error),
}

fn is_pgm(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut v = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<Vec<_>, _>>()?;
    v.sort();
    Ok(v)
}

/// Image paths grouped by class name, classes and files in sorted order.
pub fn scan(root: &Path) -> Result<BTreeMap<String, Vec<PathBuf>>, DatasetError> {
    let mut classes: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in sorted_entries(root)? {
        if entry.is_dir() {
            let name = entry.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let files: Vec<PathBuf> = sorted_entries(&entry)?.into_iter().filter(|p| is_pgm(p)).collect();
            if !files.is_empty() {
                classes.entry(name).or_default().extend(files);
            }
        } else if is_pgm(&entry) {
            let stem = entry.file_stem().unwrap_or_default().to_string_lossy();
            let name = stem.split('_').next().unwrap_or_default().to_string();
            classes.entry(name).or_default().push(entry);
        }
    }
    for files in classes.values_mut() {
        files.sort();
    }
    Ok(classes)
}

pub fn load_image_dir(path: impl AsRef<Path>, layout: Layout) -> Result<FaceDataset, DatasetError> {
    let root = path.as_ref();
    let classes = scan(root)?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    let mut shape = None;
    for (label, (name, files)) in classes.into_iter().enumerate() {
        names.push(name);
        for file in files {
            let img = pgm::read(&file).map_err(|e| DatasetError::UnreadableImage {
                path: file.clone(),
                reason: e.to_string(),
            })?;
            let got = (img.height, img.width);
            match shape {
                None => shape = Some(got),
                Some(expected) if expected != got => {
                    return Err(DatasetError::MixedImageSizes {
                        path: file,
                        expected,
                        got,
                    })
                }
                _ => {}
            }
            images.push(img);
            labels.push(label);
        }
    }
    let Some((h, w)) = shape else {
        return Err(DatasetError::Empty(root.to_path_buf()));
    };
    let tensor = match layout {
        Layout::RowsFirst => Tensor3::from_fn(h, images.len(), w, |i, j, k| images[j].get(i, k)),
        Layout::ColsFirst => Tensor3::from_fn(w, images.len(), h, |i, j, k| images[j].get(k, i)),
    };
    Ok(FaceDataset::new(tensor, labels)?.with_class_names(names))
}
