//! Nearest-centroid probing, loss-curve CSV files and PGM sample grids.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {0} has no training examples")]
    EmptyClass(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Per-class mean vectors. Row `i` of `centroids` belongs to `class_ids[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidModel {
    pub centroids: DenseMatrix,
    pub class_ids: Vec<usize>,
}

impl CentroidModel {
    /// Fits one centroid per class `0..num_classes`. Every class must occur.
    pub fn fit(reps: &DenseMatrix, labels: &[u8], num_classes: usize) -> Result<Self> {
        if labels.len() != reps.rows() {
            return Err(EvalError::DimensionMismatch {
                expected: reps.rows(),
                actual: labels.len(),
            });
        }
        let width = reps.cols();
        let mut sums = DenseMatrix::zeros(num_classes, width);
        let mut counts = vec![0usize; num_classes];
        for (i, &label) in labels.iter().enumerate() {
            let c = label as usize;
            if c >= num_classes {
                return Err(EvalError::InvalidArgument(format!(
                    "label {c} outside 0..{num_classes}"
                )));
            }
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(reps.row(i)) {
                *s += v;
            }
        }
        for (c, &n) in counts.iter().enumerate() {
            if n == 0 {
                return Err(EvalError::EmptyClass(c));
            }
            for s in sums.row_mut(c) {
                *s /= n as f64;
            }
        }
        Ok(Self {
            centroids: sums,
            class_ids: (0..num_classes).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.centroids.cols()
    }

    /// Nearest centroid by Euclidean distance; ties go to the lowest class id.
    pub fn classify(&self, reps: &DenseMatrix) -> Result<Vec<usize>> {
        if reps.cols() != self.width() {
            return Err(EvalError::DimensionMismatch {
                expected: self.width(),
                actual: reps.cols(),
            });
        }
        let out = (0..reps.rows())
            .map(|i| {
                let x = reps.row(i);
                let mut best: Option<(f64, usize)> = None;
                for (r, &class) in self.class_ids.iter().enumerate() {
                    let d: f64 = x
                        .iter()
                        .zip(self.centroids.row(r))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    let better = match best {
                        None => true,
                        Some((bd, bc)) => d < bd || (d == bd && class < bc),
                    };
                    if better {
                        best = Some((d, class));
                    }
                }
                best.map_or(0, |(_, c)| c)
            })
            .collect();
        Ok(out)
    }
}

/// Percentage of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[u8]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(EvalError::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::InvalidArgument(
            "accuracy of an empty set".into(),
        ));
    }
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(&p, &t)| p == t as usize)
        .count();
    Ok(100.0 * hits as f64 / pred.len() as f64)
}

/// Fit on one set of representations and score another.
pub fn nearest_centroid_accuracy(
    train: &DenseMatrix,
    train_labels: &[u8],
    test: &DenseMatrix,
    test_labels: &[u8],
    num_classes: usize,
) -> Result<f64> {
    let model = CentroidModel::fit(train, train_labels, num_classes)?;
    accuracy(&model.classify(test)?, test_labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub train_total: f64,
    pub train_rec: f64,
    pub train_reg: f64,
    pub test_total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossCurve {
    rows: Vec<LossRow>,
}

pub const LOSS_CSV_HEADER: &str = "epoch,train_total,train_rec,train_reg,test_total";

impl LossCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[LossRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&LossRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row; epochs must be strictly increasing.
    pub fn push(&mut self, row: LossRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.epoch <= last.epoch {
                return Err(EvalError::InvalidArgument(format!(
                    "epoch {} after epoch {}",
                    row.epoch, last.epoch
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Drops rows after `epoch`.
    pub fn truncate_after(&mut self, epoch: usize) {
        self.rows.retain(|r| r.epoch <= epoch);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(LOSS_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            // `{:?}` prints the shortest string that parses back exactly
            s.push_str(&format!(
                "{},{:?},{:?},{:?},{:?}\n",
                r.epoch, r.train_total, r.train_rec, r.train_reg, r.test_total
            ));
        }
        s
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| EvalError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == LOSS_CSV_HEADER => {}
            other => return Err(err(1, format!("unexpected header {other:?}"))),
        }
        let mut curve = Self::new();
        for (n, line) in lines.enumerate() {
            let lineno = n + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(err(
                    lineno,
                    format!("expected 5 fields, got {}", fields.len()),
                ));
            }
            let epoch = fields[0]
                .trim()
                .parse()
                .map_err(|e| err(lineno, format!("epoch: {e}")))?;
            let mut vals = [0.0; 4];
            for (v, f) in vals.iter_mut().zip(&fields[1..]) {
                *v = f
                    .trim()
                    .parse()
                    .map_err(|e| err(lineno, format!("{f}: {e}")))?;
            }
            curve
                .push(LossRow {
                    epoch,
                    train_total: vals[0],
                    train_rec: vals[1],
                    train_reg: vals[2],
                    test_total: vals[3],
                })
                .map_err(|e| err(lineno, e.to_string()))?;
        }
        Ok(curve)
    }
}

pub fn write_loss_csv(curve: &LossCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve.to_csv()).map_err(io_err(path))
}

pub fn read_loss_csv(path: impl AsRef<Path>) -> Result<LossCurve> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    LossCurve::parse_csv(&text, path)
}

/// `round(v * 255)` with halves rounded up, clamped to `0..=255`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Tiles the first `rows * cols` images (one per row of `images`, each
/// `height x width` row-major) into a binary PGM.
pub fn encode_pgm_grid(
    images: &DenseMatrix,
    (height, width): (usize, usize),
    rows: usize,
    cols: usize,
) -> Result<Vec<u8>> {
    if images.cols() != height * width {
        return Err(EvalError::DimensionMismatch {
            expected: height * width,
            actual: images.cols(),
        });
    }
    if rows == 0 || cols == 0 || rows * cols > images.rows() {
        return Err(EvalError::InvalidArgument(format!(
            "{rows}x{cols} grid needs {} images, have {}",
            rows * cols,
            images.rows()
        )));
    }
    let (w, h) = (cols * width, rows * height);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for py in 0..h {
        let (tr, y) = (py / height, py % height);
        for tc in 0..cols {
            let img = images.row(tr * cols + tc);
            out.extend(img[y * width..(y + 1) * width].iter().map(|&v| quantize(v)));
        }
    }
    Ok(out)
}

pub fn write_sample_grid(
    images: &DenseMatrix,
    shape: (usize, usize),
    rows: usize,
    cols: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm_grid(images, shape, rows, cols)?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Near-square grid for `count` tiles: `cols = ceil(sqrt(count))`.
pub fn grid_shape(count: usize) -> (usize, usize) {
    let cols = (1..).find(|c| c * c >= count).unwrap_or(1).max(1);
    let rows = count.div_ceil(cols).max(1);
    (rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroids_are_class_means() {
        let reps = DenseMatrix::from_rows(&[[0.0], [2.0], [10.0], [12.0]]);
        let m = CentroidModel::fit(&reps, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(m.centroids, DenseMatrix::from_rows(&[[1.0], [11.0]]));

        let dup =
            DenseMatrix::from_rows(&[[0.0], [2.0], [10.0], [12.0], [0.0], [2.0], [10.0], [12.0]]);
        let m2 = CentroidModel::fit(&dup, &[0, 0, 1, 1, 0, 0, 1, 1], 2).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn single_examples_become_centroids() {
        let reps = DenseMatrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5], [7.0, 7.0]]);
        let m = CentroidModel::fit(&reps, &[2, 0, 1], 3).unwrap();
        assert_eq!(m.centroids.row(2), reps.row(0));
        assert_eq!(m.classify(&reps).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn missing_class_is_an_error() {
        let reps = DenseMatrix::from_rows(&[[0.0], [1.0]]);
        assert!(matches!(
            CentroidModel::fit(&reps, &[0, 0], 2),
            Err(EvalError::EmptyClass(1))
        ));
    }

    #[test]
    fn ties_go_to_lower_class_id() {
        let m = CentroidModel {
            centroids: DenseMatrix::from_rows(&[[2.0], [0.0]]),
            class_ids: vec![5, 3],
        };
        assert_eq!(
            m.classify(&DenseMatrix::from_rows(&[[1.0]])).unwrap(),
            vec![3]
        );
    }

    #[test]
    fn width_mismatch() {
        let m = CentroidModel::fit(&DenseMatrix::from_rows(&[[0.0]]), &[0], 1).unwrap();
        assert!(m.classify(&DenseMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&[0, 1, 2, 3], &[0, 1, 0, 0]).unwrap(), 50.0);
        assert_eq!(accuracy(&[4, 4], &[4, 4]).unwrap(), 100.0);
        assert!(accuracy(&[1], &[]).is_err());
    }

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(1.0 / 255.0), 1);
    }

    #[test]
    fn pgm_layout() {
        let img = DenseMatrix::from_fn(1, 28 * 28, |_, _| 0.5);
        let bytes = encode_pgm_grid(&img, (28, 28), 1, 1).unwrap();
        let header = b"P5\n28 28\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 784);
        assert!(bytes[header.len()..].iter().all(|&b| b == 128));

        // two 1x2 tiles side by side, then a second row
        let imgs = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]);
        let bytes = encode_pgm_grid(&imgs, (1, 2), 2, 2).unwrap();
        let body = &bytes[b"P5\n4 2\n255\n".len()..];
        assert_eq!(body, &[0, 255, 255, 0, 0, 0, 255, 255]);
        assert!(encode_pgm_grid(&imgs, (1, 2), 3, 2).is_err());
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(1), (1, 1));
        assert_eq!(grid_shape(64), (8, 8));
        assert_eq!(grid_shape(10), (3, 4));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut c = LossCurve::new();
        c.push(LossRow {
            epoch: 1,
            train_total: 0.1 + 0.2,
            train_rec: 1e-300,
            train_reg: 123456.789,
            test_total: f64::MIN_POSITIVE,
        })
        .unwrap();
        c.push(LossRow {
            epoch: 2,
            train_total: 1.0 / 3.0,
            train_rec: 2.0,
            train_reg: 0.0,
            test_total: 99.5,
        })
        .unwrap();
        let text = c.to_csv();
        assert!(text.starts_with(LOSS_CSV_HEADER));
        assert_eq!(LossCurve::parse_csv(&text, Path::new("x")).unwrap(), c);
    }

    #[test]
    fn epochs_must_increase() {
        let row = LossRow {
            epoch: 3,
            train_total: 0.0,
            train_rec: 0.0,
            train_reg: 0.0,
            test_total: 0.0,
        };
        let mut c = LossCurve::new();
        c.push(row).unwrap();
        assert!(c.push(row).is_err());
    }
}
