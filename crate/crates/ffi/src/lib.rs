//! C ABI for `lgae`.
//!
//! Every function returns an [`LgaeStatus`]. Each call also records a
//! per-thread message (empty after success) that can be copied out with
//! [`lgae_last_error_message`]. Matrices are passed as row-major `double`
//! arrays together with their shape. Models live behind an opaque
//! [`LgaeModel`] handle that must be released with [`lgae_model_free`].
//! Panics never cross the boundary; they are reported as
//! `LGAE_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lgae::cli::Checkpoint;
use lgae::liegroup::{self, DiagGaussian, LieGroupError, TangentDiag, Utdat};
use lgae::linalg::DenseMatrix;
use lgae::models::{self, ModelError, ModelSpec, ModelVariant, RepresentationKind};
use lgae::nn::{AdagradState, Rng};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LgaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numeric = 4,
    Io = 5,
    Panic = 6,
}

/// Values of the `variant` arguments.
pub const LGAE_VARIANT_LGAE: u32 = 0;
pub const LGAE_VARIANT_LGAE_KL: u32 = 1;
pub const LGAE_VARIANT_VAE: u32 = 2;

/// Values of the `repr` arguments.
pub const LGAE_REPR_MU: u32 = 0;
pub const LGAE_REPR_MU_CONCAT_SIGMA: u32 = 1;
pub const LGAE_REPR_LIE_ALGEBRA: u32 = 2;

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LgaeLoss {
    pub total: f64,
    pub rec: f64,
    pub reg: f64,
}

/// Opaque model handle: parameters, optimizer state and random generator.
pub struct LgaeModel {
    model: models::LgaeModel,
    optimizer: AdagradState,
    rng: Rng,
}

struct Failure(LgaeStatus, String);

type Result<T> = std::result::Result<T, Failure>;

fn fail<T>(status: LgaeStatus, msg: impl Into<String>) -> Result<T> {
    Err(Failure(status, msg.into()))
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match &e {
            ModelError::DimensionMismatch { .. } => LgaeStatus::DimensionMismatch,
            ModelError::InvalidConfig(_)
            | ModelError::UnsupportedKind { .. }
            | ModelError::EmptyDataset => LgaeStatus::InvalidArgument,
            _ => LgaeStatus::Numeric,
        };
        Failure(status, e.to_string())
    }
}

impl From<LieGroupError> for Failure {
    fn from(e: LieGroupError) -> Self {
        let status = match &e {
            LieGroupError::DimensionMismatch { .. } => LgaeStatus::DimensionMismatch,
            LieGroupError::NonConvergent(_) | LieGroupError::NonFinite => LgaeStatus::Numeric,
            _ => LgaeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<()>) -> LgaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            LgaeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            LgaeStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, name: &str) -> Result<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return fail(LgaeStatus::NullPointer, format!("`{name}` is null"));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return fail(LgaeStatus::NullPointer, format!("`{name}` is null"));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T> {
    ptr.as_mut()
        .ok_or_else(|| Failure(LgaeStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn handle_ref<'a>(ptr: *const LgaeModel) -> Result<&'a LgaeModel> {
    ptr.as_ref()
        .ok_or_else(|| Failure(LgaeStatus::NullPointer, "model handle is null".into()))
}

unsafe fn handle<'a>(ptr: *mut LgaeModel) -> Result<&'a mut LgaeModel> {
    ptr.as_mut()
        .ok_or_else(|| Failure(LgaeStatus::NullPointer, "model handle is null".into()))
}

fn area(rows: usize, cols: usize) -> Result<usize> {
    rows.checked_mul(cols).map_or_else(
        || fail(LgaeStatus::InvalidArgument, "matrix size overflows"),
        Ok,
    )
}

unsafe fn matrix(ptr: *const f64, rows: usize, cols: usize, name: &str) -> Result<DenseMatrix> {
    let data = input(ptr, area(rows, cols)?, name)?;
    Ok(DenseMatrix::from_vec(rows, cols, data.to_vec()))
}

fn variant_from(code: u32) -> Result<ModelVariant> {
    match code {
        LGAE_VARIANT_LGAE => Ok(ModelVariant::Lgae),
        LGAE_VARIANT_LGAE_KL => Ok(ModelVariant::LgaeKl),
        LGAE_VARIANT_VAE => Ok(ModelVariant::Vae),
        other => fail(
            LgaeStatus::InvalidArgument,
            format!("unknown variant {other}"),
        ),
    }
}

fn repr_from(code: u32) -> Result<RepresentationKind> {
    match code {
        LGAE_REPR_MU => Ok(RepresentationKind::Mu),
        LGAE_REPR_MU_CONCAT_SIGMA => Ok(RepresentationKind::MuConcatSigma),
        LGAE_REPR_LIE_ALGEBRA => Ok(RepresentationKind::LieAlgebra),
        other => fail(
            LgaeStatus::InvalidArgument,
            format!("unknown representation {other}"),
        ),
    }
}

fn loss_out(l: models::LossParts) -> LgaeLoss {
    LgaeLoss {
        total: l.total,
        rec: l.rec,
        reg: l.reg,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lgae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the message recorded by the calling thread's most recent call into `buf` (truncated and
/// always NUL-terminated when `buf_len > 0`). Returns the buffer size needed
/// for the full message including the terminator.
#[no_mangle]
pub unsafe extern "C" fn lgae_last_error_message(buf: *mut c_char, buf_len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes_with_nul();
        if !buf.is_null() && buf_len > 0 {
            let n = bytes.len().min(buf_len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// `sigma = exp(phi)`, `mu = theta * (exp(phi) - 1) / phi` for `k` components.
#[no_mangle]
pub unsafe extern "C" fn lgae_diag_exp_map(
    phi: *const f64,
    theta: *const f64,
    k: usize,
    mu_out: *mut f64,
    sigma_out: *mut f64,
) -> LgaeStatus {
    guard(|| {
        let t = TangentDiag::new(
            input(phi, k, "phi")?.to_vec(),
            input(theta, k, "theta")?.to_vec(),
        )?;
        let q = liegroup::diag_exp_map(&t);
        output(mu_out, k, "mu_out")?.copy_from_slice(&q.mu);
        output(sigma_out, k, "sigma_out")?.copy_from_slice(&q.sigma);
        Ok(())
    })
}

/// Inverse of [`lgae_diag_exp_map`]; every `sigma` must be positive.
#[no_mangle]
pub unsafe extern "C" fn lgae_diag_log_map(
    mu: *const f64,
    sigma: *const f64,
    k: usize,
    phi_out: *mut f64,
    theta_out: *mut f64,
) -> LgaeStatus {
    guard(|| {
        let q = DiagGaussian::new(
            input(mu, k, "mu")?.to_vec(),
            input(sigma, k, "sigma")?.to_vec(),
        )?;
        let t = liegroup::diag_log_map(&q);
        output(phi_out, k, "phi_out")?.copy_from_slice(&t.phi);
        output(theta_out, k, "theta_out")?.copy_from_slice(&t.theta);
        Ok(())
    })
}

/// Geodesic distance between two UTDATs given as upper-triangular `n x n`
/// factors (row-major) and `n`-vectors of means.
#[no_mangle]
pub unsafe extern "C" fn lgae_geodesic_distance(
    n: usize,
    u_a: *const f64,
    mu_a: *const f64,
    u_b: *const f64,
    mu_b: *const f64,
    out: *mut f64,
) -> LgaeStatus {
    guard(|| {
        let a = Utdat::new(matrix(u_a, n, n, "u_a")?, input(mu_a, n, "mu_a")?.to_vec())?;
        let b = Utdat::new(matrix(u_b, n, n, "u_b")?, input(mu_b, n, "mu_b")?.to_vec())?;
        *out_ref(out, "out")? = liegroup::geodesic_distance(&a, &b)?;
        Ok(())
    })
}

/// Mean over `batch` rows of `sum(phi^2 + theta^2)`; `phi` and `theta` are
/// `batch x k`.
#[no_mangle]
pub unsafe extern "C" fn lgae_intrinsic_loss(
    phi: *const f64,
    theta: *const f64,
    batch: usize,
    k: usize,
    out: *mut f64,
) -> LgaeStatus {
    guard(|| {
        let len = area(batch, k)?;
        let (p, t) = (input(phi, len, "phi")?, input(theta, len, "theta")?);
        let tangents = (0..batch)
            .map(|i| {
                TangentDiag::new(
                    p[i * k..(i + 1) * k].to_vec(),
                    t[i * k..(i + 1) * k].to_vec(),
                )
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        *out_ref(out, "out")? = liegroup::intrinsic_loss(&tangents)?;
        Ok(())
    })
}

/// Creates a randomly initialized model with samples per input `m = 1`.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_new(
    variant: u32,
    input_dim: usize,
    hidden: usize,
    latent_dim: usize,
    lambda: f64,
    learning_rate: f64,
    seed: u64,
    out: *mut *mut LgaeModel,
) -> LgaeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return fail(
                LgaeStatus::InvalidArgument,
                "learning rate must be positive",
            );
        }
        let spec = ModelSpec {
            variant: variant_from(variant)?,
            input_dim,
            hidden,
            latent_dim,
            lambda,
            samples_per_input: 1,
        };
        let mut rng = Rng::new(seed);
        let model = models::LgaeModel::new(spec, &mut rng)?;
        *out = Box::into_raw(Box::new(LgaeModel {
            model,
            optimizer: AdagradState::new(learning_rate),
            rng,
        }));
        Ok(())
    })
}

/// Loads a checkpoint written by `lgae train`, including optimizer and
/// random generator state.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_load(
    path: *const c_char,
    out: *mut *mut LgaeModel,
) -> LgaeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        if path.is_null() {
            return fail(LgaeStatus::NullPointer, "`path` is null");
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(LgaeStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let ck = Checkpoint::load(Path::new(path))
            .map_err(|e| Failure(LgaeStatus::Io, e.to_string()))?;
        let model = ck
            .model()
            .map_err(|e| Failure(LgaeStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(LgaeModel {
            model,
            optimizer: ck.optimizer.clone(),
            rng: Rng::from_state(ck.rng),
        }));
        Ok(())
    })
}

/// Releases a handle. Null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_free(model: *mut LgaeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lgae_model_dims(
    model: *const LgaeModel,
    input_dim: *mut usize,
    latent_dim: *mut usize,
) -> LgaeStatus {
    guard(|| {
        let m = handle_ref(model)?;
        *out_ref(input_dim, "input_dim")? = m.model.input_dim();
        *out_ref(latent_dim, "latent_dim")? = m.model.latent_dim();
        Ok(())
    })
}

/// Number of `double`s written by [`lgae_model_encode`] per input row.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_repr_width(
    model: *const LgaeModel,
    repr: u32,
    width: *mut usize,
) -> LgaeStatus {
    guard(|| {
        let m = handle_ref(model)?;
        let k = m.model.latent_dim();
        *out_ref(width, "width")? = match repr_from(repr)? {
            RepresentationKind::Mu => k,
            _ => 2 * k,
        };
        Ok(())
    })
}

/// Deterministic encoder features of `rows` inputs. `out_len` must equal
/// `rows` times the width reported by [`lgae_model_repr_width`].
#[no_mangle]
pub unsafe extern "C" fn lgae_model_encode(
    model: *const LgaeModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    repr: u32,
    out: *mut f64,
    out_len: usize,
) -> LgaeStatus {
    guard(|| {
        let m = handle_ref(model)?;
        let x = matrix(x, rows, cols, "x")?;
        let rep = m.model.extract_representation(&x, repr_from(repr)?)?;
        let data = rep.vectors.as_slice();
        if data.len() != out_len {
            return fail(
                LgaeStatus::DimensionMismatch,
                format!("out_len is {out_len}, need {}", data.len()),
            );
        }
        output(out, out_len, "out")?.copy_from_slice(data);
        Ok(())
    })
}

/// Decoder probabilities for `rows` latent codes; writes `rows * input_dim`
/// values.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_decode(
    model: *const LgaeModel,
    z: *const f64,
    rows: usize,
    latent_dim: usize,
    out: *mut f64,
    out_len: usize,
) -> LgaeStatus {
    guard(|| {
        let m = handle_ref(model)?;
        let z = matrix(z, rows, latent_dim, "z")?;
        let p = m.model.decode(&z)?;
        if p.as_slice().len() != out_len {
            return fail(
                LgaeStatus::DimensionMismatch,
                format!("out_len is {out_len}, need {}", p.as_slice().len()),
            );
        }
        output(out, out_len, "out")?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// One Adagrad step on a minibatch; `loss` receives the pre-update loss.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_train_step(
    model: *mut LgaeModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    loss: *mut LgaeLoss,
) -> LgaeStatus {
    guard(|| {
        let m = handle(model)?;
        let x = matrix(x, rows, cols, "x")?;
        let l = m.model.train_step(&x, &mut m.optimizer, &mut m.rng)?;
        if let Some(out) = loss.as_mut() {
            *out = loss_out(l);
        }
        Ok(())
    })
}

/// One shuffled pass over `rows` examples; `loss` receives the epoch means.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_train_epoch(
    model: *mut LgaeModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    batch_size: usize,
    loss: *mut LgaeLoss,
) -> LgaeStatus {
    guard(|| {
        let m = handle(model)?;
        let x = matrix(x, rows, cols, "x")?;
        let metrics =
            models::train_epoch(&mut m.model, &mut m.optimizer, &x, batch_size, &mut m.rng)?;
        if let Some(out) = loss.as_mut() {
            *out = loss_out(metrics.loss);
        }
        Ok(())
    })
}

/// Mean loss over `rows` examples with sampling noise drawn from `seed`.
/// Leaves the model untouched.
#[no_mangle]
pub unsafe extern "C" fn lgae_model_eval_loss(
    model: *const LgaeModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    batch_size: usize,
    seed: u64,
    loss: *mut LgaeLoss,
) -> LgaeStatus {
    guard(|| {
        let m = handle_ref(model)?;
        let x = matrix(x, rows, cols, "x")?;
        let l = models::eval_loss(&m.model, &x, batch_size, &mut Rng::new(seed))?;
        *out_ref(loss, "loss")? = loss_out(l);
        Ok(())
    })
}
