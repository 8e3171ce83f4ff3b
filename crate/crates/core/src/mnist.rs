//! IDX parsing and the 0/3/8 MNIST subset used by the reservoir task.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const DATA_DIR_ENV: &str = "QUMEM_DATA_DIR";

pub const CROP_ROWS: usize = 18;
pub const CROP_COLS: usize = 12;

/// Raw images as parsed from an IDX3 file.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data(format!("IDX header truncated at byte {at}")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Data(format!("bad IDX magic {magic:#010x}, expected {expected:#010x}")));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let want = n * rows * cols;
    let body = &bytes[16..];
    if body.len() < want {
        return Err(Error::Data(format!(
            "IDX image file truncated: {} of {want} pixel bytes",
            body.len()
        )));
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: body[..want].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::Data(format!("IDX label file truncated: {} of {n} labels", body.len())));
    }
    Ok(body[..n].to_vec())
}

/// Reads a file, transparently gunzipping it when it starts with the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Top-left corner of the crop window inside the 28×28 frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crop {
    pub row: usize,
    pub col: usize,
}

impl Default for Crop {
    fn default() -> Self {
        Self { row: 5, col: 8 }
    }
}

/// An 18×12 image with pixels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub pixels: Vec<f64>,
    pub label: u8,
    /// Position in the source file.
    pub source_index: usize,
}

impl Image {
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * CROP_COLS + c]
    }
}

pub fn crop(raw: &[u8], rows: usize, cols: usize, window: Crop) -> Result<Vec<f64>> {
    if raw.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            actual: raw.len(),
        });
    }
    if window.row + CROP_ROWS > rows || window.col + CROP_COLS > cols {
        return Err(Error::InvalidDimension(format!(
            "crop at ({}, {}) leaves a {rows}x{cols} frame",
            window.row, window.col
        )));
    }
    let mut out = Vec::with_capacity(CROP_ROWS * CROP_COLS);
    for r in window.row..window.row + CROP_ROWS {
        for c in window.col..window.col + CROP_COLS {
            out.push(f64::from(raw[r * cols + c]) / 255.0);
        }
    }
    Ok(out)
}

/// Left-to-right pixel columns of an 18×12 image.
pub fn columns_as_sequence(pixels: &[f64]) -> Result<Vec<Vec<f64>>> {
    if pixels.len() != CROP_ROWS * CROP_COLS {
        return Err(Error::DimensionMismatch {
            expected: CROP_ROWS * CROP_COLS,
            actual: pixels.len(),
        });
    }
    Ok((0..CROP_COLS)
        .map(|c| (0..CROP_ROWS).map(|r| pixels[r * CROP_COLS + c]).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnistConfig {
    /// Dataset directory; falls back to `$QUMEM_DATA_DIR/mnist`, then `data/mnist`.
    pub dir: Option<PathBuf>,
    pub digits: Vec<u8>,
    pub train: usize,
    pub test: usize,
    pub crop: Crop,
    pub seed: u64,
}

impl Default for MnistConfig {
    fn default() -> Self {
        Self {
            dir: None,
            digits: vec![0, 3, 8],
            train: 1000,
            test: 1000,
            crop: Crop::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistSubset {
    pub train: Vec<Image>,
    pub test: Vec<Image>,
    pub digits: Vec<u8>,
    pub crop: Crop,
    /// Files the images were read from.
    pub sources: Vec<PathBuf>,
}

impl MnistSubset {
    /// Position of `label` in the digit list, i.e. the class index.
    pub fn class_of(&self, label: u8) -> Option<usize> {
        self.digits.iter().position(|&d| d == label)
    }
}

/// Resolves the dataset directory: explicit, then `$QUMEM_DATA_DIR/mnist`
/// (or `$QUMEM_DATA_DIR` itself), then `data/mnist` under the workspace.
pub fn data_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Ok(root) = std::env::var(DATA_DIR_ENV) {
        let root = PathBuf::from(root);
        let nested = root.join("mnist");
        return if nested.is_dir() { nested } else { root };
    }
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    if bundled.is_dir() {
        bundled
    } else {
        PathBuf::from("data/mnist")
    }
}

fn find(dir: &Path, stem: &str) -> Option<PathBuf> {
    [format!("{stem}.gz"), stem.to_string()]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

struct Labelled {
    images: IdxImages,
    labels: Vec<u8>,
}

fn load_pair(images: &Path, labels: &Path) -> Result<Labelled> {
    let images = parse_idx_images(&read_maybe_gz(images)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels)?)?;
    if images.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(Labelled { images, labels })
}

/// Indices of each requested digit, in file order.
fn by_digit(labels: &[u8], digits: &[u8]) -> Vec<Vec<usize>> {
    digits
        .iter()
        .map(|&d| (0..labels.len()).filter(|&i| labels[i] == d).collect())
        .collect()
}

/// Balanced quota: `total` split evenly, remainder to the first classes.
fn quotas(total: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|k| total / classes + usize::from(k < total % classes))
        .collect()
}

fn to_images(src: &Labelled, idx: &[usize], window: Crop) -> Result<Vec<Image>> {
    idx.iter()
        .map(|&i| {
            Ok(Image {
                pixels: crop(src.images.image(i), src.images.rows, src.images.cols, window)?,
                label: src.labels[i],
                source_index: i,
            })
        })
        .collect()
}

/// Loads the digit subset.
///
/// With the official four files (`train-*`/`t10k-*`) the test images come
/// from `t10k` and training images from `train`. With a single pair of files
/// (the bundled `digits038-*`) a balanced test set is drawn first and the
/// training set from what remains. Both draws are seeded shuffles.
pub fn load_mnist(cfg: &MnistConfig) -> Result<MnistSubset> {
    if cfg.digits.is_empty() {
        return Err(Error::Config("no digits requested".into()));
    }
    let dir = data_dir(cfg.dir.as_deref());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let official = (
        find(&dir, "train-images-idx3-ubyte"),
        find(&dir, "train-labels-idx1-ubyte"),
        find(&dir, "t10k-images-idx3-ubyte"),
        find(&dir, "t10k-labels-idx1-ubyte"),
    );
    let (test_src, train_src, sources) = match official {
        (Some(a), Some(b), Some(c), Some(d)) => {
            let train = load_pair(&a, &b)?;
            let test = load_pair(&c, &d)?;
            (test, Some(train), vec![a, b, c, d])
        }
        _ => {
            let imgs = find(&dir, "digits038-images-idx3-ubyte")
                .ok_or_else(|| Error::Data(format!("no MNIST image file in {}", dir.display())))?;
            let labs = find(&dir, "digits038-labels-idx1-ubyte")
                .ok_or_else(|| Error::Data(format!("no MNIST label file in {}", dir.display())))?;
            (load_pair(&imgs, &labs)?, None, vec![imgs, labs])
        }
    };

    let mut pools = by_digit(&test_src.labels, &cfg.digits);
    for pool in pools.iter_mut() {
        pool.shuffle(&mut rng);
    }
    let mut test_idx = Vec::new();
    for ((pool, want), digit) in pools.iter_mut().zip(quotas(cfg.test, cfg.digits.len())).zip(&cfg.digits) {
        if pool.len() < want {
            return Err(Error::Data(format!(
                "only {} images of digit {digit}, {want} needed for the test set",
                pool.len()
            )));
        }
        test_idx.extend(pool.drain(..want));
    }
    test_idx.sort_unstable();
    let test = to_images(&test_src, &test_idx, cfg.crop)?;

    let (train_pool_src, mut remainder): (&Labelled, Vec<usize>) = match &train_src {
        Some(t) => {
            let all: Vec<usize> = by_digit(&t.labels, &cfg.digits).concat();
            (t, all)
        }
        None => (&test_src, pools.concat()),
    };
    remainder.sort_unstable();
    remainder.shuffle(&mut rng);
    if remainder.len() < cfg.train {
        return Err(Error::Data(format!(
            "only {} images left for training, {} requested",
            remainder.len(),
            cfg.train
        )));
    }
    remainder.truncate(cfg.train);
    let train = to_images(train_pool_src, &remainder, cfg.crop)?;

    Ok(MnistSubset {
        train,
        test,
        digits: cfg.digits.clone(),
        crop: cfg.crop,
        sources,
    })
}
