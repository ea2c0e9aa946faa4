//! Deterministic synthetic digit dataset in IDX format.
//!
//! Ten sparse class prototypes — each a handful of bright cells on a
//! mid-grey background, like the salient strokes that tell handwritten
//! digits apart — are laid out at 7×7 resolution, replicated to 28×28 and
//! mixed with per-pixel noise. The block structure survives mean pooling, so
//! the classes stay linearly separable at both full and pooled resolution
//! while the noise keeps the tasks from being trivial. Useful wherever the
//! real handwritten-digit files are not available: unit tests, acceptance
//! runs, demos.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, RawImages, IMAGE_MAGIC, LABEL_MAGIC};

pub const SIDE: usize = 28;
const BLOCK: usize = 4;
const GRID: usize = SIDE / BLOCK; // 7x7 prototypes
/// Weight of the class prototype against uniform pixel noise.
const SIGNAL: f64 = 0.80;
/// Bright cells per class prototype; the rest sit at [`BACKGROUND`].
const HOT_CELLS: usize = 4;
/// Intensity of non-hot prototype cells. Near-black, like the canvas real
/// digits are written on; a bright background would hand every feature a
/// large constant offset that linear fits must cancel out of the weights.
const BACKGROUND: f64 = 0.0;

/// Per-pixel noise skewed toward black: squaring a uniform draw leaves most
/// pixels dim with occasional bright speckles, matching the mostly-dark
/// canvas of scanned handwriting.
fn dark_noise(rng: &mut ChaCha8Rng) -> f64 {
    let u = rng.gen::<f64>();
    u * u
}

/// Deal each class a disjoint set of bright cells at seeded random
/// positions. Sparse prototypes concentrate the class evidence in a few
/// high-contrast features, the way real digits differ on a few strokes.
fn prototypes(rng: &mut ChaCha8Rng) -> [[f64; GRID * GRID]; 10] {
    let mut cells: Vec<usize> = (0..GRID * GRID).collect();
    for i in 0..10 * HOT_CELLS {
        let j = rng.gen_range(i..cells.len());
        cells.swap(i, j);
    }
    let mut protos = [[BACKGROUND; GRID * GRID]; 10];
    for (d, proto) in protos.iter_mut().enumerate() {
        for &cell in &cells[d * HOT_CELLS..(d + 1) * HOT_CELLS] {
            proto[cell] = 1.0;
        }
    }
    protos
}

/// Generate `count` labelled images from a ChaCha8 stream seeded with `seed`.
/// Labels are drawn uniformly over 0..=9, so each digit shows up for roughly
/// a tenth of the pool.
pub fn synthetic_digits(count: usize, seed: u64) -> (RawImages, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos = prototypes(&mut rng);
    let mut labels = Vec::with_capacity(count);
    let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
    for _ in 0..count {
        let label = rng.gen_range(0..10u8);
        labels.push(label);
        let proto = &protos[label as usize];
        for r in 0..SIDE {
            for c in 0..SIDE {
                let base = proto[(r / BLOCK) * GRID + c / BLOCK];
                let noise = dark_noise(&mut rng);
                let v = SIGNAL * base + (1.0 - SIGNAL) * noise;
                pixels.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    (
        RawImages {
            count,
            rows: SIDE,
            cols: SIDE,
            pixels,
        },
        labels,
    )
}

/// Like [`synthetic_digits`], but each image is, with probability `overlap`,
/// rendered from the prototype of a fixed confusable partner class (0↔1,
/// 2↔3, …, 8↔9) while keeping its own label. At `overlap = 0` the classes
/// are as separable as in the plain pool; raising it plants a seed-stable
/// fraction of images that genuinely look like the partner digit — the
/// irreducible-error regime real handwriting sits in (think 4 vs 9 or
/// 3 vs 5). Full swaps beat partial blends here: a blend sits near the
/// decision boundary, where the fitted probability — and with it the test
/// loss — stays sensitive to the exact weight vector, while a swapped image
/// is classified confidently wrong and contributes a flat, solver-independent
/// error. Swapping toward a fixed partner rather than a random class matters
/// too: a 0 disguised as, say, 7 is still cheap to tell from a 1, so random
/// swaps leave each pairwise task asymptotically clean and only a fixed
/// partner caps it.
///
/// The draw sequence (label, swap decision, pixel noise) is part of the
/// format; the `overlap = 0` pool is *not* stream-compatible with
/// [`synthetic_digits`], but pools at different `overlap` values share the
/// label stream and differ only in which prototype renders each image.
pub fn synthetic_digits_overlapping(
    count: usize,
    seed: u64,
    overlap: f64,
) -> (RawImages, Vec<u8>) {
    assert!(
        (0.0..1.0).contains(&overlap),
        "overlap must lie in [0, 1), got {overlap}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos = prototypes(&mut rng);
    let mut labels = Vec::with_capacity(count);
    let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
    for _ in 0..count {
        let label = rng.gen_range(0..10u8);
        labels.push(label);
        let swapped = rng.gen::<f64>() < overlap;
        let proto = &protos[if swapped { label ^ 1 } else { label } as usize];
        for r in 0..SIDE {
            for c in 0..SIDE {
                let cell = (r / BLOCK) * GRID + c / BLOCK;
                let noise = dark_noise(&mut rng);
                let v = SIGNAL * proto[cell] + (1.0 - SIGNAL) * noise;
                pixels.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    (
        RawImages {
            count,
            rows: SIDE,
            cols: SIDE,
            pixels,
        },
        labels,
    )
}

pub fn write_idx_images(path: &Path, images: &RawImages) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    let mut header = Vec::with_capacity(16);
    header.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    header.extend_from_slice(&(images.count as u32).to_be_bytes());
    header.extend_from_slice(&(images.rows as u32).to_be_bytes());
    header.extend_from_slice(&(images.cols as u32).to_be_bytes());
    f.write_all(&header).map_err(io_err)?;
    f.write_all(&images.pixels).map_err(io_err)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    let mut header = Vec::with_capacity(8);
    header.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    header.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    f.write_all(&header).map_err(io_err)?;
    f.write_all(labels).map_err(io_err)?;
    Ok(())
}

/// Write a `(images, labels)` IDX pair into `dir` and return the two paths.
pub fn write_synthetic_dataset(
    dir: &Path,
    count: usize,
    seed: u64,
) -> Result<(PathBuf, PathBuf), DataError> {
    let (images, labels) = synthetic_digits(count, seed);
    write_pair(dir, &images, &labels)
}

/// [`write_synthetic_dataset`] over the class-overlapping pool.
pub fn write_synthetic_dataset_overlapping(
    dir: &Path,
    count: usize,
    seed: u64,
    overlap: f64,
) -> Result<(PathBuf, PathBuf), DataError> {
    let (images, labels) = synthetic_digits_overlapping(count, seed, overlap);
    write_pair(dir, &images, &labels)
}

fn write_pair(
    dir: &Path,
    images: &RawImages,
    labels: &[u8],
) -> Result<(PathBuf, PathBuf), DataError> {
    let img_path = dir.join("synthetic-images-idx3-ubyte");
    let lab_path = dir.join("synthetic-labels-idx1-ubyte");
    write_idx_images(&img_path, images)?;
    write_idx_labels(&lab_path, labels)?;
    Ok((img_path, lab_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let (a, la) = synthetic_digits(50, 9);
        let (b, lb) = synthetic_digits(50, 9);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = synthetic_digits(50, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn labels_cover_all_digits_in_a_modest_pool() {
        let (_, labels) = synthetic_digits(500, 0);
        for d in 0..10u8 {
            assert!(labels.contains(&d), "digit {d} missing");
        }
    }

    #[test]
    fn overlapping_pool_is_deterministic_and_blends_toward_partner() {
        let (a, la) = synthetic_digits_overlapping(60, 3, 0.8);
        let (b, lb) = synthetic_digits_overlapping(60, 3, 0.8);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        // More overlap moves pixels; the label stream is draw-order stable.
        let (c, lc) = synthetic_digits_overlapping(60, 3, 0.2);
        assert_eq!(la, lc);
        assert_ne!(a, c);
        for d in 0..10u8 {
            assert!(la.contains(&d) || la.len() < 100, "digit {d} missing");
        }
    }

    #[test]
    fn overlap_narrows_the_partner_gap_but_not_cross_pair_gaps() {
        // Mean image per class: swaps pull 0 toward 1 but not toward 2.
        let (imgs, labels) = synthetic_digits_overlapping(1200, 9, 0.4);
        let px = SIDE * SIDE;
        let mean_image = |digit: u8| -> Vec<f64> {
            let mut acc = vec![0.0f64; px];
            let mut n = 0usize;
            for (i, &l) in labels.iter().enumerate() {
                if l == digit {
                    n += 1;
                    for (a, &b) in acc.iter_mut().zip(&imgs.pixels[i * px..(i + 1) * px]) {
                        *a += f64::from(b);
                    }
                }
            }
            acc.iter().map(|v| v / n as f64).collect()
        };
        let dist = |x: &[f64], y: &[f64]| -> f64 {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let (m0, m1, m2) = (mean_image(0), mean_image(1), mean_image(2));
        let (clean, clean_labels) = synthetic_digits_overlapping(1200, 9, 0.0);
        assert_eq!(labels, clean_labels);
        let clean_mean = |digit: u8| -> Vec<f64> {
            let mut acc = vec![0.0f64; px];
            let mut n = 0usize;
            for (i, &l) in clean_labels.iter().enumerate() {
                if l == digit {
                    n += 1;
                    for (a, &b) in acc.iter_mut().zip(&clean.pixels[i * px..(i + 1) * px]) {
                        *a += f64::from(b);
                    }
                }
            }
            acc.iter().map(|v| v / n as f64).collect()
        };
        let (c0, c1, c2) = (clean_mean(0), clean_mean(1), clean_mean(2));
        let shrink_partner = dist(&m0, &m1) / dist(&c0, &c1);
        let shrink_cross = dist(&m0, &m2) / dist(&c0, &c2);
        assert!(
            shrink_partner < 0.5 * shrink_cross,
            "pairing should close the partner gap far more than cross-pair \
             gaps: partner ratio {shrink_partner}, cross ratio {shrink_cross}"
        );
    }

    #[test]
    #[should_panic(expected = "overlap must lie in [0, 1)")]
    fn full_overlap_is_rejected() {
        synthetic_digits_overlapping(10, 0, 1.0);
    }

    #[test]
    fn dataset_roundtrips_through_idx_files() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, labs) = write_synthetic_dataset(dir.path(), 20, 4).unwrap();
        match super::super::read_idx(&imgs).unwrap() {
            super::super::IdxFile::Images(images) => {
                assert_eq!(images.count, 20);
                assert_eq!(images.rows, SIDE);
            }
            _ => panic!("expected images"),
        }
        match super::super::read_idx(&labs).unwrap() {
            super::super::IdxFile::Labels(labels) => assert_eq!(labels.len(), 20),
            _ => panic!("expected labels"),
        }
    }
}
