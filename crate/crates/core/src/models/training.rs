use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::nn::{AdagradState, Rng};

use super::{LgaeModel, LossParts, ModelError, Result};

/// Per-sample means of the minibatch losses seen during one pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub loss: LossParts,
    pub batches: usize,
    pub samples: usize,
}

#[derive(Default)]
struct Running {
    total: f64,
    rec: f64,
    reg: f64,
    samples: usize,
    batches: usize,
}

impl Running {
    fn add(&mut self, l: LossParts, rows: usize) {
        let w = rows as f64;
        self.total += l.total * w;
        self.rec += l.rec * w;
        self.reg += l.reg * w;
        self.samples += rows;
        self.batches += 1;
    }

    fn finish(self) -> EpochMetrics {
        let n = self.samples.max(1) as f64;
        EpochMetrics {
            loss: LossParts {
                total: self.total / n,
                rec: self.rec / n,
                reg: self.reg / n,
            },
            batches: self.batches,
            samples: self.samples,
        }
    }
}

fn check_batch(x: &DenseMatrix, batch_size: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(ModelError::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(ModelError::InvalidConfig(
            "batch size must be positive".into(),
        ));
    }
    Ok(())
}

/// One shuffled pass over `x`. The last batch may be smaller.
pub fn train_epoch(
    model: &mut LgaeModel,
    opt: &mut AdagradState,
    x: &DenseMatrix,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<EpochMetrics> {
    check_batch(x, batch_size)?;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    rng.shuffle(&mut order);
    let mut run = Running::default();
    for idx in order.chunks(batch_size) {
        let batch = x.select_rows(idx);
        let loss = model.train_step(&batch, opt, rng)?;
        run.add(loss, idx.len());
    }
    Ok(run.finish())
}

/// Sample-weighted mean loss over `x` in order, without touching parameters.
pub fn eval_loss(
    model: &LgaeModel,
    x: &DenseMatrix,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<LossParts> {
    check_batch(x, batch_size)?;
    let m = model.spec.samples_per_input;
    let mut run = Running::default();
    for start in (0..x.rows()).step_by(batch_size) {
        let end = (start + batch_size).min(x.rows());
        let batch = x.slice_rows(start, end);
        let mut noise = DenseMatrix::zeros(batch.rows() * m, model.latent_dim());
        rng.fill_gaussian(noise.as_mut_slice());
        run.add(model.loss_with_noise(&batch, &noise)?, batch.rows());
    }
    Ok(run.finish().loss)
}
