use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::eval::{
    encode_pgm_grid, grid_shape, nearest_centroid_accuracy, write_loss_csv, LossCurve, LossRow,
};
use crate::linalg::DenseMatrix;
use crate::models::{
    eval_loss, train_epoch, LgaeModel, ModelError, ModelSpec, ModelVariant, RepresentationKind,
};
use crate::nn::{gradient_check, AdagradState, GradCheckReport, Rng};

use super::{Checkpoint, CliError, Result, TrainConfig, EVAL_STREAM_BASE};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOSS_CSV_FILE: &str = "loss.csv";

#[derive(Debug)]
pub struct TrainOutcome {
    pub curve: LossCurve,
    pub checkpoint_path: PathBuf,
    pub csv_path: PathBuf,
    pub model: LgaeModel,
}

fn emit(log: &mut dyn Write, line: std::fmt::Arguments) {
    // losing a progress line is not worth aborting a run over
    let _ = writeln!(log, "{line}");
}

/// Trains from scratch, or continues from `resume`, until `config.epochs`.
///
/// After every epoch the loss CSV and the checkpoint in the output directory
/// are rewritten, so an interrupted run can be resumed from its last epoch.
pub fn cmd_train(
    config: &TrainConfig,
    resume: Option<&Path>,
    log: &mut dyn Write,
) -> Result<TrainOutcome> {
    config.validate()?;
    let (train, test) = config.load_data()?;
    let out_dir = config.out_dir();
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    let csv_path = out_dir.join(LOSS_CSV_FILE);

    let (mut model, mut opt, mut rng, mut curve, start) = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let expected = TrainConfig {
                epochs: ck.config.epochs,
                ..config.echo()
            };
            if ck.config != expected {
                return Err(CliError::Usage(format!(
                    "{} was written with a different configuration",
                    path.display()
                )));
            }
            if ck.epoch > config.epochs {
                return Err(CliError::Usage(format!(
                    "checkpoint is at epoch {} but only {} epochs were requested",
                    ck.epoch, config.epochs
                )));
            }
            (
                ck.model()?,
                ck.optimizer.clone(),
                Rng::from_state(ck.rng),
                ck.curve()?,
                ck.epoch,
            )
        }
        None => {
            let mut rng = Rng::new(config.seed);
            let model = LgaeModel::new(config.model_spec(train.dim()), &mut rng)?;
            (
                model,
                AdagradState::new(config.lr),
                rng,
                LossCurve::new(),
                0,
            )
        }
    };
    if model.input_dim() != train.dim() {
        return Err(ModelError::DimensionMismatch {
            context: "dataset width",
            expected: model.input_dim(),
            actual: train.dim(),
        }
        .into());
    }

    let save = |model: &LgaeModel,
                opt: &AdagradState,
                rng: &Rng,
                curve: &LossCurve,
                epoch|
     -> Result<()> {
        write_loss_csv(curve, &csv_path)?;
        Checkpoint::capture(config, model, epoch, opt, rng.state(), curve).save(&checkpoint_path)
    };
    if start == 0 || start == config.epochs {
        save(&model, &opt, &rng, &curve, start)?;
    }

    for epoch in start + 1..=config.epochs {
        let metrics = match train_epoch(&mut model, &mut opt, &train.x, config.batch_size, &mut rng)
        {
            Err(ModelError::NonFiniteLoss(v)) => {
                emit(
                    log,
                    format_args!("epoch {epoch}: loss became {v}, aborting"),
                );
                return Err(CliError::Numeric(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            other => other?,
        };
        let mut eval_rng = Rng::with_stream(config.seed, EVAL_STREAM_BASE + epoch as u64);
        let test_loss = eval_loss(&model, &test.x, config.batch_size, &mut eval_rng)?;
        if !test_loss.total.is_finite() {
            emit(
                log,
                format_args!(
                    "epoch {epoch}: test loss became {}, aborting",
                    test_loss.total
                ),
            );
            return Err(CliError::Numeric(format!(
                "non-finite test loss at epoch {epoch}"
            )));
        }
        let row = LossRow {
            epoch,
            train_total: metrics.loss.total,
            train_rec: metrics.loss.rec,
            train_reg: metrics.loss.reg,
            test_total: test_loss.total,
        };
        curve.push(row)?;
        emit(
            log,
            format_args!(
                "epoch {epoch:>4}  train {:.4} (rec {:.4}, reg {:.4})  test {:.4}",
                row.train_total, row.train_rec, row.train_reg, row.test_total
            ),
        );
        save(&model, &opt, &rng, &curve, epoch)?;
    }
    Ok(TrainOutcome {
        curve,
        checkpoint_path,
        csv_path,
        model,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub variant: ModelVariant,
    pub kind: RepresentationKind,
    pub epoch: usize,
    pub train_examples: usize,
    pub test_examples: usize,
    pub accuracy: f64,
}

/// Nearest-centroid test accuracy of one representation kind, fitted on the
/// training split. `data_dir` overrides where MNIST is read from.
pub fn cmd_eval(
    checkpoint: &Path,
    kind: RepresentationKind,
    data_dir: Option<&Path>,
) -> Result<EvalReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.model()?;
    let config = TrainConfig {
        data_dir: data_dir.map(Path::to_path_buf),
        ..ck.config.clone()
    };
    let (train, test) = config.load_data()?;
    let train_rep = model.extract_representation(&train.x, kind)?;
    let test_rep = model.extract_representation(&test.x, kind)?;
    let accuracy = nearest_centroid_accuracy(
        &train_rep.vectors,
        &train.labels,
        &test_rep.vectors,
        &test.labels,
        train.num_classes,
    )?;
    Ok(EvalReport {
        variant: model.variant(),
        kind,
        epoch: ck.epoch,
        train_examples: train.len(),
        test_examples: test.len(),
        accuracy,
    })
}

/// Decodes `count` codes `z ~ N(0, I)` drawn from `seed` and returns the
/// probabilities together with a PGM grid of them. Unused tiles are black.
pub fn cmd_generate(checkpoint: &Path, count: usize, seed: u64) -> Result<(DenseMatrix, Vec<u8>)> {
    if count == 0 {
        return Err(CliError::Usage("count must be at least 1".into()));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.model()?;
    let mut rng = Rng::new(seed);
    let mut z = DenseMatrix::zeros(count, model.latent_dim());
    rng.fill_gaussian(z.as_mut_slice());
    let images = model.decode(&z)?;
    let (rows, cols) = grid_shape(count);
    let mut tiles = images.as_slice().to_vec();
    tiles.resize(rows * cols * images.cols(), 0.0);
    let tiles = DenseMatrix::from_vec(rows * cols, images.cols(), tiles);
    let pgm = encode_pgm_grid(&tiles, ck.config.image_shape(), rows, cols)?;
    Ok((images, pgm))
}

#[derive(Clone, Debug)]
pub struct GradcheckEntry {
    pub variant: ModelVariant,
    pub report: GradCheckReport,
}

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.report.passed)
    }
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Finite-difference check of one variant on a 6-input, 4-hidden, K = 2
/// model with four inputs and frozen noise. With `corrupt` the analytic
/// gradient is deliberately perturbed, which must make the check fail.
pub fn gradcheck_variant(variant: ModelVariant, corrupt: bool) -> Result<GradCheckReport> {
    let spec = ModelSpec {
        variant,
        input_dim: 6,
        hidden: 4,
        latent_dim: 2,
        lambda: 0.5,
        samples_per_input: 1,
    };
    let mut rng = Rng::new(0);
    let mut model = LgaeModel::new(spec, &mut rng)?;
    // larger weights than the default init so every unit is exercised
    let params: Vec<f64> = model.params_flat().iter().map(|p| p * 5.0).collect();
    model.set_params_flat(&params);
    let x = DenseMatrix::from_fn(4, 6, |_, _| rng.uniform());
    let mut noise = DenseMatrix::zeros(4, 2);
    rng.fill_gaussian(noise.as_mut_slice());

    model.loss_and_grad_with_noise(&x, &noise)?;
    let mut analytic = model.grads_flat();
    if corrupt {
        for g in &mut analytic {
            *g += 0.1 * g.abs().max(1.0);
        }
    }
    let mut probe = model.clone();
    let mut failure = None;
    let report = gradient_check(
        |p| {
            probe.set_params_flat(p);
            match probe.loss_with_noise(&x, &noise) {
                Ok(l) => l.total,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &params,
        &analytic,
        GRADCHECK_TOLERANCE,
    );
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(report),
    }
}

pub fn cmd_gradcheck(corrupt: bool) -> Result<GradcheckReport> {
    let entries = ModelVariant::ALL
        .iter()
        .map(|&variant| {
            Ok(GradcheckEntry {
                variant,
                report: gradcheck_variant(variant, corrupt)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GradcheckReport { entries })
}
