//! IDX image/label ingestion and binary task construction.
//!
//! The IDX layout is the classic big-endian format: a magic number
//! (`0x00000803` for images, `0x00000801` for labels), one big-endian `u32`
//! per dimension, then the raw payload bytes. Parse errors name the byte
//! offset at which the file stopped making sense.

pub mod synthetic;

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::problems::BinaryTask;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at byte offset {offset}: {detail}")]
    Format { offset: usize, detail: String },
    #[error("split needs {needed} samples but the pool holds {available}")]
    Insufficient { needed: usize, available: usize },
    #[error("downsample factor {factor} does not divide image side {side}")]
    Downsample { factor: usize, side: usize },
    #[error("digit {digit} is not a decimal digit")]
    BadDigit { digit: u8 },
    #[error("labels file has {labels} entries but images file has {images}")]
    CountMismatch { labels: usize, images: usize },
    #[error(transparent)]
    Problem(#[from] crate::problems::ProblemError),
}

/// Raw image stack as stored in an IDX file: `count` images of
/// `rows × cols` bytes, row-major within each image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxFile {
    Images(RawImages),
    Labels(Vec<u8>),
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32, DataError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DataError::Format {
            offset: bytes.len(),
            detail: format!("file truncated; expected 4 bytes at offset {offset}"),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an IDX file (images or labels, selected by its magic number).
pub fn read_idx(path: &Path) -> Result<IdxFile, DataError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxFile, DataError> {
    let magic = be_u32(bytes, 0)?;
    match magic {
        IMAGE_MAGIC => {
            let count = be_u32(bytes, 4)? as usize;
            let rows = be_u32(bytes, 8)? as usize;
            let cols = be_u32(bytes, 12)? as usize;
            let expected = (count as u64)
                .checked_mul(rows as u64)
                .and_then(|v| v.checked_mul(cols as u64))
                .ok_or(DataError::Format {
                    offset: 4,
                    detail: "image dimensions overflow".to_string(),
                })?;
            let payload = &bytes[16..];
            if payload.len() as u64 != expected {
                return Err(DataError::Format {
                    offset: 16,
                    detail: format!(
                        "payload holds {} bytes, header promises {}",
                        payload.len(),
                        expected
                    ),
                });
            }
            Ok(IdxFile::Images(RawImages {
                count,
                rows,
                cols,
                pixels: payload.to_vec(),
            }))
        }
        LABEL_MAGIC => {
            let count = be_u32(bytes, 4)? as usize;
            let payload = &bytes[8..];
            if payload.len() != count {
                return Err(DataError::Format {
                    offset: 8,
                    detail: format!(
                        "payload holds {} bytes, header promises {}",
                        payload.len(),
                        count
                    ),
                });
            }
            Ok(IdxFile::Labels(payload.to_vec()))
        }
        other => Err(DataError::Format {
            offset: 0,
            detail: format!("unrecognised magic number {other:#010x}"),
        }),
    }
}

/// How to carve the image pool into the four disjoint splits, and how to turn
/// pixels into features. The shuffle is a Fisher–Yates pass driven by a
/// ChaCha8 stream seeded with `seed`, so every digit sees the same ordering
/// and the splits are disjoint by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_size: usize,
    pub test_size: usize,
    pub validation_train_size: usize,
    pub validation_test_size: usize,
    pub seed: u64,
    /// Non-overlapping mean pooling factor; 1 keeps full resolution.
    pub downsample_factor: usize,
    /// Divide pixel bytes by 255 so features live in [0, 1].
    pub normalize: bool,
}

impl SplitSpec {
    fn total(&self) -> usize {
        self.train_size + self.test_size + self.validation_train_size + self.validation_test_size
    }
}

fn shuffled_indices(count: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx
}

/// Mean-pool one image by `factor` and scale. Pixels are row-major.
fn image_features(
    images: &RawImages,
    index: usize,
    factor: usize,
    normalize: bool,
    out: &mut [f64],
) {
    let (rows, cols) = (images.rows, images.cols);
    let base = index * rows * cols;
    let (pr, pc) = (rows / factor, cols / factor);
    let scale = if normalize { 1.0 / 255.0 } else { 1.0 };
    let block = (factor * factor) as f64;
    for r in 0..pr {
        for c in 0..pc {
            let mut acc = 0.0;
            for dr in 0..factor {
                let row_off = base + (r * factor + dr) * cols + c * factor;
                for dc in 0..factor {
                    acc += images.pixels[row_off + dc] as f64;
                }
            }
            out[r * pc + c] = acc / block * scale;
        }
    }
}

fn feature_matrix(
    images: &RawImages,
    picks: &[usize],
    spec: &SplitSpec,
) -> Result<DMatrix<f64>, DataError> {
    let factor = spec.downsample_factor.max(1);
    if images.rows % factor != 0 {
        return Err(DataError::Downsample {
            factor,
            side: images.rows,
        });
    }
    if images.cols % factor != 0 {
        return Err(DataError::Downsample {
            factor,
            side: images.cols,
        });
    }
    let dim = (images.rows / factor) * (images.cols / factor);
    let mut m = DMatrix::zeros(picks.len(), dim);
    let mut row = vec![0.0; dim];
    for (i, &pick) in picks.iter().enumerate() {
        image_features(images, pick, factor, spec.normalize, &mut row);
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn binary_labels(labels: &[u8], picks: &[usize], digit: u8) -> DVector<f64> {
    DVector::from_fn(picks.len(), |i, _| {
        if labels[picks[i]] == digit {
            1.0
        } else {
            -1.0
        }
    })
}

fn check_pool(images: &RawImages, labels: &[u8], spec: &SplitSpec) -> Result<(), DataError> {
    if labels.len() != images.count {
        return Err(DataError::CountMismatch {
            labels: labels.len(),
            images: images.count,
        });
    }
    if spec.total() > images.count {
        return Err(DataError::Insufficient {
            needed: spec.total(),
            available: images.count,
        });
    }
    Ok(())
}

/// Build the one-vs-rest task for `digit` from the shared pool. The shuffled
/// pool is carved as `[train | test | validation-train | validation-test]`;
/// the same seed gives every digit identical index sets, so tasks share
/// feature matrices and differ only in label signs.
pub fn make_binary_task(
    images: &RawImages,
    labels: &[u8],
    digit: u8,
    spec: &SplitSpec,
) -> Result<BinaryTask, DataError> {
    if digit > 9 {
        return Err(DataError::BadDigit { digit });
    }
    check_pool(images, labels, spec)?;
    let idx = shuffled_indices(images.count, spec.seed);
    let train = &idx[0..spec.train_size];
    let test = &idx[spec.train_size..spec.train_size + spec.test_size];
    Ok(BinaryTask::new(
        feature_matrix(images, train, spec)?,
        binary_labels(labels, train, digit),
        feature_matrix(images, test, spec)?,
        binary_labels(labels, test, digit),
        digit,
    )?)
}

/// Tasks for all ten digits over the validation splits (the third and fourth
/// segments of the shuffled pool), used for final held-out scoring.
pub fn validation_tasks(
    images: &RawImages,
    labels: &[u8],
    spec: &SplitSpec,
) -> Result<Vec<BinaryTask>, DataError> {
    check_pool(images, labels, spec)?;
    let idx = shuffled_indices(images.count, spec.seed);
    let start = spec.train_size + spec.test_size;
    let vtrain = &idx[start..start + spec.validation_train_size];
    let vtest =
        &idx[start + spec.validation_train_size..start + spec.validation_train_size + spec.validation_test_size];
    let train_features = feature_matrix(images, vtrain, spec)?;
    let test_features = feature_matrix(images, vtest, spec)?;
    (0..10u8)
        .map(|digit| {
            Ok(BinaryTask::new(
                train_features.clone(),
                binary_labels(labels, vtrain, digit),
                test_features.clone(),
                binary_labels(labels, vtest, digit),
                digit,
            )?)
        })
        .collect()
}
