//! MNIST IDX files and synthetic Gaussian blobs.
//!
//! IDX layout (all integers big-endian): a 4-byte magic `0x00000803`
//! (images) or `0x00000801` (labels), one `u32` per dimension, then the raw
//! `u8` payload.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::nn::Rng;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Environment variable overriding the data directory.
pub const DATA_DIR_ENV: &str = "LGAE_DATA_DIR";

pub const MNIST_SIDE: usize = 28;
pub const MNIST_CLASSES: usize = 10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number {found:#010x} (expected {expected:#010x})")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: need {expected} bytes, found {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} outside 0..{num_classes}")]
    InvalidLabel { label: u8, num_classes: usize },
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Raw image bytes as stored in an IDX file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        for d in [self.count, self.rows, self.cols] {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn header(bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(DataError::TruncatedFile {
            expected: need,
            actual: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let found = word(0);
    if found != magic {
        return Err(DataError::BadMagic {
            expected: magic,
            found,
        });
    }
    Ok((1..=dims).map(|i| word(i) as usize).collect())
}

fn payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    let expected = offset + len;
    match bytes.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(DataError::TruncatedFile {
            expected,
            actual: bytes.len(),
        }),
        std::cmp::Ordering::Greater => Err(DataError::DimensionMismatch(format!(
            "{} trailing bytes after the declared payload",
            bytes.len() - expected
        ))),
        std::cmp::Ordering::Equal => Ok(&bytes[offset..]),
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let dims = header(bytes, IMAGE_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(DataError::DimensionMismatch(format!(
            "image size {rows}x{cols}"
        )));
    }
    let pixels = payload(bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let dims = header(bytes, LABEL_MAGIC, 1)?;
    Ok(payload(bytes, 8, dims[0])?.to_vec())
}

pub fn labels_to_idx_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&read_file(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read_file(path.as_ref())?)
}

/// Pixel bytes scaled to `[0, 1]` by `v / 255`, one image per row.
pub fn normalize(images: &IdxImages) -> DenseMatrix {
    let data = images
        .pixels
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    DenseMatrix::from_vec(images.count, images.pixels_per_image(), data)
}

/// Inputs in `[0, 1]` with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub labels: Vec<u8>,
    pub num_classes: usize,
    /// `(height, width)` used when rendering rows as images.
    pub image_shape: (usize, usize),
}

impl Dataset {
    pub fn new(
        x: DenseMatrix,
        labels: Vec<u8>,
        num_classes: usize,
        image_shape: (usize, usize),
    ) -> Result<Self> {
        if x.rows() != labels.len() {
            return Err(DataError::CountMismatch {
                images: x.rows(),
                labels: labels.len(),
            });
        }
        if image_shape.0 * image_shape.1 != x.cols() {
            return Err(DataError::DimensionMismatch(format!(
                "image shape {image_shape:?} does not cover {} columns",
                x.cols()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| usize::from(l) >= num_classes) {
            return Err(DataError::InvalidLabel { label, num_classes });
        }
        if x.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(DataError::DimensionMismatch(
                "input values outside [0, 1]".into(),
            ));
        }
        Ok(Self {
            x,
            labels,
            num_classes,
            image_shape,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// The first `n` examples (or all of them).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            x: self.x.slice_rows(0, n),
            labels: self.labels[..n].to_vec(),
            num_classes: self.num_classes,
            image_shape: self.image_shape,
        }
    }
}

/// Pairs an image file with its label file.
pub fn load_labeled(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    num_classes: usize,
) -> Result<Dataset> {
    let images = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    let shape = (images.rows, images.cols);
    Dataset::new(normalize(&images), labels, num_classes, shape)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_names(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }
}

/// `$LGAE_DATA_DIR` if set, else `fallback`.
pub fn resolve_data_dir(fallback: impl AsRef<Path>) -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| fallback.as_ref().to_path_buf())
}

/// Loads one MNIST split from the uncompressed files in `dir`.
pub fn load_mnist(dir: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let dir = dir.as_ref();
    let (img, lbl) = split.file_names();
    let ds = load_labeled(dir.join(img), dir.join(lbl), MNIST_CLASSES)?;
    if ds.image_shape != (MNIST_SIDE, MNIST_SIDE) {
        return Err(DataError::DimensionMismatch(format!(
            "MNIST images must be 28x28, found {:?}",
            ds.image_shape
        )));
    }
    Ok(ds)
}

/// Gaussian clusters in `[0, 1]^dim`.
///
/// Centers are drawn uniformly from `[0.15, 0.85]^dim` and rejected until
/// every pair is at least `12 * spread` apart, so that a nearest-centroid
/// rule separates the classes with overwhelming probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Blobs {
    pub centers: DenseMatrix,
    pub spread: f64,
}

const BLOB_SPREAD: f64 = 0.03;
const BLOB_SEPARATION: f64 = 12.0;
const BLOB_TRIES: usize = 10_000;

impl Blobs {
    pub fn new(rng: &mut Rng, dim: usize, num_classes: usize) -> Self {
        assert!(dim > 0 && num_classes > 0, "Blobs::new: empty shape");
        let mut spread = BLOB_SPREAD;
        loop {
            let min_dist = BLOB_SEPARATION * spread;
            let mut centers: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
            let mut tries = 0;
            while centers.len() < num_classes && tries < BLOB_TRIES {
                tries += 1;
                let c: Vec<f64> = (0..dim).map(|_| rng.uniform_range(0.15, 0.85)).collect();
                let far = centers.iter().all(|o| {
                    o.iter()
                        .zip(&c)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                        >= min_dist
                });
                if far {
                    centers.push(c);
                }
            }
            if centers.len() == num_classes {
                return Self {
                    centers: DenseMatrix::from_rows(&centers),
                    spread,
                };
            }
            spread *= 0.8;
        }
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.centers.rows()
    }

    /// `n` points; example `i` belongs to cluster `i mod num_classes`.
    pub fn sample(&self, rng: &mut Rng, n: usize) -> Dataset {
        let dim = self.dim();
        let classes = self.num_classes();
        let mut x = DenseMatrix::zeros(n, dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            labels.push(c as u8);
            let row = x.row_mut(i);
            rng.fill_gaussian(row);
            for (v, &m) in row.iter_mut().zip(self.centers.row(c)) {
                *v = (m + self.spread * *v).clamp(0.0, 1.0);
            }
        }
        let side = (dim as f64).sqrt().round() as usize;
        let shape = if side * side == dim {
            (side, side)
        } else {
            (1, dim)
        };
        Dataset::new(x, labels, classes, shape).expect("blob samples satisfy Dataset invariants")
    }
}

/// Draws cluster centers and then `n` labelled points from one generator.
pub fn synthetic_blobs(rng: &mut Rng, n: usize, dim: usize, num_classes: usize) -> Dataset {
    assert!(num_classes <= 256, "labels are stored as u8");
    Blobs::new(rng, dim, num_classes).sample(rng, n)
}
