use serde::{Deserialize, Serialize};

use crate::liegroup::{exprel, exprel_derivative, intrinsic_loss, DiagGaussian, TangentDiag};
use crate::linalg::DenseMatrix;
use crate::nn::{
    bce_with_logits, bce_with_logits_grad, sigmoid, Activation, ForwardCache, Mlp, Rng,
};

use super::{ModelError, ModelVariant, Representation, RepresentationKind, Result};

/// Architecture and loss settings of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub input_dim: usize,
    pub hidden: usize,
    pub latent_dim: usize,
    pub lambda: f64,
    pub samples_per_input: usize,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.input_dim == 0 || self.hidden == 0 {
            return bad("input_dim and hidden must be positive");
        }
        if self.latent_dim == 0 {
            return bad("K must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if self.samples_per_input == 0 {
            return bad("samples_per_input must be at least 1");
        }
        Ok(())
    }
}

/// Loss value and its two parts. `reg` is the intrinsic loss for `lgae` and
/// the KL divergence for the other variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub rec: f64,
    pub reg: f64,
}

/// Encoder output together with the Gaussians it describes.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub variant: ModelVariant,
    /// Raw `2K`-wide encoder output: `phi | theta` for the mapping variants,
    /// `mu | log sigma^2` for `vae`.
    pub raw: DenseMatrix,
    pub mu: DenseMatrix,
    pub sigma: DenseMatrix,
}

impl Encoded {
    fn from_raw(variant: ModelVariant, raw: DenseMatrix) -> Self {
        let k = raw.cols() / 2;
        let b = raw.rows();
        let mut mu = DenseMatrix::zeros(b, k);
        let mut sigma = DenseMatrix::zeros(b, k);
        for i in 0..b {
            let row = raw.row(i);
            let (first, second) = row.split_at(k);
            for j in 0..k {
                if variant.uses_exp_map() {
                    let (phi, theta) = (first[j], second[j]);
                    sigma[(i, j)] = phi.exp();
                    mu[(i, j)] = theta * exprel(phi);
                } else {
                    mu[(i, j)] = first[j];
                    sigma[(i, j)] = (0.5 * second[j]).exp();
                }
            }
        }
        Self {
            variant,
            raw,
            mu,
            sigma,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.cols()
    }

    /// Lie-algebra coordinates of each Gaussian. For `vae` these come from
    /// the closed-form log map of `(mu, sigma)`.
    pub fn tangents(&self) -> Vec<TangentDiag> {
        let k = self.latent_dim();
        (0..self.raw.rows())
            .map(|i| {
                if self.variant.uses_exp_map() {
                    let row = self.raw.row(i);
                    TangentDiag {
                        phi: row[..k].to_vec(),
                        theta: row[k..].to_vec(),
                    }
                } else {
                    crate::liegroup::diag_log_map(&self.gaussian(i))
                }
            })
            .collect()
    }

    pub fn gaussian(&self, i: usize) -> DiagGaussian {
        DiagGaussian {
            mu: self.mu.row(i).to_vec(),
            sigma: self.sigma.row(i).to_vec(),
        }
    }

    pub fn gaussians(&self) -> Vec<DiagGaussian> {
        (0..self.raw.rows()).map(|i| self.gaussian(i)).collect()
    }
}

/// Everything produced by one pass through the model.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub encoded: Encoded,
    /// Standard-normal draws, `B*m x K`; row `i*m + j` belongs to input `i`.
    pub noise: DenseMatrix,
    pub z: DenseMatrix,
    pub logits: DenseMatrix,
    /// `sigmoid(logits)`.
    pub x_hat: DenseMatrix,
}

struct Pass {
    enc: ForwardCache,
    dec: ForwardCache,
    encoded: Encoded,
    noise: DenseMatrix,
}

impl Pass {
    fn logits(&self) -> &DenseMatrix {
        self.dec.output()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LgaeModel {
    pub spec: ModelSpec,
    pub encoder: Mlp,
    pub decoder: Mlp,
}

fn repeat_rows(x: &DenseMatrix, m: usize) -> DenseMatrix {
    if m == 1 {
        return x.clone();
    }
    let idx: Vec<usize> = (0..x.rows())
        .flat_map(|i| std::iter::repeat_n(i, m))
        .collect();
    x.select_rows(&idx)
}

fn check_rows(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(ModelError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Cross-entropy over `x` repeated to match the number of logit rows.
fn reconstruction_loss(x: &DenseMatrix, logits: &DenseMatrix) -> Result<f64> {
    check_rows("reconstruction width", x.cols(), logits.cols())?;
    if x.rows() == 0 || !logits.rows().is_multiple_of(x.rows()) {
        return Err(ModelError::DimensionMismatch {
            context: "reconstruction rows",
            expected: x.rows(),
            actual: logits.rows(),
        });
    }
    let m = logits.rows() / x.rows();
    Ok(bce_with_logits(&repeat_rows(x, m), logits))
}

/// Mean over rows of `1/2 sum_k (mu^2 + e^{logvar} - 1 - logvar)`.
fn kl_from_logvar(mu: &DenseMatrix, logvar: &DenseMatrix) -> f64 {
    let s: f64 = mu
        .as_slice()
        .iter()
        .zip(logvar.as_slice())
        .map(|(&m, &lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum();
    s / mu.rows() as f64
}

/// `lambda * intrinsic_loss(tangents) + cross_entropy(x, sigmoid(logits))`.
pub fn loss_lgae(
    x: &DenseMatrix,
    logits: &DenseMatrix,
    tangents: &[TangentDiag],
    lambda: f64,
) -> Result<LossParts> {
    let rec = reconstruction_loss(x, logits)?;
    let reg = intrinsic_loss(tangents)?;
    Ok(LossParts {
        total: lambda * reg + rec,
        rec,
        reg,
    })
}

/// `KL(N(mu, sigma^2) || N(0, I)) + cross_entropy(x, sigmoid(logits))`.
pub fn loss_kl(
    x: &DenseMatrix,
    logits: &DenseMatrix,
    mu: &DenseMatrix,
    sigma: &DenseMatrix,
) -> Result<LossParts> {
    check_rows(
        "kl shapes",
        mu.rows() * mu.cols(),
        sigma.rows() * sigma.cols(),
    )?;
    if sigma.as_slice().iter().any(|&s| !(s > 0.0)) {
        return Err(ModelError::InvalidConfig("sigma must be positive".into()));
    }
    let rec = reconstruction_loss(x, logits)?;
    let logvar = sigma.map(|s| 2.0 * s.ln());
    let reg = kl_from_logvar(mu, &logvar);
    Ok(LossParts {
        total: reg + rec,
        rec,
        reg,
    })
}

impl LgaeModel {
    /// Encoder `D -> hidden (tanh) -> 2K`, decoder `K -> hidden (tanh) -> D`
    /// logits, with all parameters drawn from `rng` (encoder first).
    pub fn new(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let (d, h, k) = (spec.input_dim, spec.hidden, spec.latent_dim);
        let acts = [Activation::Tanh, Activation::Identity];
        let encoder = Mlp::random(&[d, h, 2 * k], &acts, rng)?;
        let decoder = Mlp::random(&[k, h, d], &acts, rng)?;
        Ok(Self {
            spec,
            encoder,
            decoder,
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.spec.variant
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn encode(&self, x: &DenseMatrix) -> Result<Encoded> {
        self.check_input(x)?;
        let raw = self.encoder.predict(x)?;
        Ok(Encoded::from_raw(self.variant(), raw))
    }

    /// Decoder probabilities for latent codes `z`.
    pub fn decode(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        check_rows("latent width", self.latent_dim(), z.cols())?;
        Ok(self.decoder.predict(z)?.map(sigmoid))
    }

    fn check_input(&self, x: &DenseMatrix) -> Result<()> {
        check_rows("input width", self.input_dim(), x.cols())
    }

    fn draw_noise(&self, rows: usize, rng: &mut Rng) -> DenseMatrix {
        let mut noise = DenseMatrix::zeros(rows * self.spec.samples_per_input, self.latent_dim());
        rng.fill_gaussian(noise.as_mut_slice());
        noise
    }

    fn pass(&self, x: &DenseMatrix, noise: DenseMatrix) -> Result<Pass> {
        self.check_input(x)?;
        let m = self.spec.samples_per_input;
        check_rows("noise rows", x.rows() * m, noise.rows())?;
        check_rows("noise width", self.latent_dim(), noise.cols())?;
        let enc = self.encoder.forward(x)?;
        let encoded = Encoded::from_raw(self.variant(), enc.output().clone());
        // z = sigma * v + mu, the diagonal case of G [v; 1]
        let mut z = noise.clone();
        for r in 0..z.rows() {
            let i = r / m;
            let (mu, sigma) = (encoded.mu.row(i), encoded.sigma.row(i));
            for ((zv, &s), &u) in z.row_mut(r).iter_mut().zip(sigma).zip(mu) {
                *zv = s * *zv + u;
            }
        }
        let dec = self.decoder.forward(&z)?;
        Ok(Pass {
            enc,
            dec,
            encoded,
            noise,
        })
    }

    fn pass_loss(&self, x: &DenseMatrix, pass: &Pass) -> Result<LossParts> {
        let rec = reconstruction_loss(x, pass.logits())?;
        let enc = &pass.encoded;
        let b = enc.raw.rows() as f64;
        Ok(match self.variant() {
            ModelVariant::Lgae => {
                let reg = enc.raw.as_slice().iter().map(|v| v * v).sum::<f64>() / b;
                LossParts {
                    total: self.spec.lambda * reg + rec,
                    rec,
                    reg,
                }
            }
            ModelVariant::LgaeKl => {
                let k = self.latent_dim();
                let logvar = enc.raw.slice_cols(0, k).scale(2.0);
                let reg = kl_from_logvar(&enc.mu, &logvar);
                LossParts {
                    total: reg + rec,
                    rec,
                    reg,
                }
            }
            ModelVariant::Vae => {
                let k = self.latent_dim();
                let logvar = enc.raw.slice_cols(k, 2 * k);
                let reg = kl_from_logvar(&enc.mu, &logvar);
                LossParts {
                    total: reg + rec,
                    rec,
                    reg,
                }
            }
        })
    }

    /// Full pipeline `x -> g -> G -> z -> x_hat` with noise from `rng`.
    pub fn reconstruct(&self, x: &DenseMatrix, rng: &mut Rng) -> Result<Reconstruction> {
        let noise = self.draw_noise(x.rows(), rng);
        self.reconstruct_with_noise(x, noise)
    }

    pub fn reconstruct_with_noise(
        &self,
        x: &DenseMatrix,
        noise: DenseMatrix,
    ) -> Result<Reconstruction> {
        let mut pass = self.pass(x, noise)?;
        let logits = pass.dec.activations.pop().expect("decoder output");
        let z = pass.dec.inputs.swap_remove(0);
        Ok(Reconstruction {
            x_hat: logits.map(sigmoid),
            logits,
            z,
            encoded: pass.encoded,
            noise: pass.noise,
        })
    }

    /// Loss for a fixed noise matrix (`B*m x K`).
    pub fn loss_with_noise(&self, x: &DenseMatrix, noise: &DenseMatrix) -> Result<LossParts> {
        let pass = self.pass(x, noise.clone())?;
        self.pass_loss(x, &pass)
    }

    /// Loss and parameter gradients for a fixed noise matrix. Gradient
    /// buffers are reset first; afterwards they hold `dL/dparams`.
    pub fn loss_and_grad_with_noise(
        &mut self,
        x: &DenseMatrix,
        noise: &DenseMatrix,
    ) -> Result<LossParts> {
        let pass = self.pass(x, noise.clone())?;
        let loss = self.pass_loss(x, &pass)?;
        self.backward(x, &pass)?;
        Ok(loss)
    }

    fn backward(&mut self, x: &DenseMatrix, pass: &Pass) -> Result<()> {
        self.encoder.zero_grad();
        self.decoder.zero_grad();

        let m = self.spec.samples_per_input;
        let k = self.latent_dim();
        let enc = &pass.encoded;
        let b = enc.raw.rows();
        let inv_b = 1.0 / b as f64;

        let targets = repeat_rows(x, m);
        let grad_logits = bce_with_logits_grad(&targets, pass.logits());
        let grad_z = self.decoder.backward(&pass.dec, &grad_logits)?;

        // dL/dmu and dL/dsigma through z = sigma * v + mu
        let mut g_mu = DenseMatrix::zeros(b, k);
        let mut g_sigma = DenseMatrix::zeros(b, k);
        for r in 0..grad_z.rows() {
            let i = r / m;
            for j in 0..k {
                let g = grad_z[(r, j)];
                g_mu[(i, j)] += g;
                g_sigma[(i, j)] += g * pass.noise[(r, j)];
            }
        }

        let mut g_raw = DenseMatrix::zeros(b, 2 * k);
        let lambda = self.spec.lambda;
        for i in 0..b {
            for j in 0..k {
                let (a, c) = (enc.raw[(i, j)], enc.raw[(i, k + j)]);
                let (mu, sigma) = (enc.mu[(i, j)], enc.sigma[(i, j)]);
                let (gm, gs) = (g_mu[(i, j)], g_sigma[(i, j)]);
                let (g_first, g_second) = match self.spec.variant {
                    ModelVariant::Lgae => {
                        // a = phi, c = theta; reg = sum(phi^2 + theta^2) / B
                        let g_phi =
                            gs * sigma + gm * c * exprel_derivative(a) + lambda * 2.0 * a * inv_b;
                        let g_theta = gm * exprel(a) + lambda * 2.0 * c * inv_b;
                        (g_phi, g_theta)
                    }
                    ModelVariant::LgaeKl => {
                        // KL = 1/2 (mu^2 + e^{2 phi} - 1 - 2 phi) / B
                        let gm = gm + mu * inv_b;
                        let g_phi = gs * sigma
                            + gm * c * exprel_derivative(a)
                            + (sigma * sigma - 1.0) * inv_b;
                        let g_theta = gm * exprel(a);
                        (g_phi, g_theta)
                    }
                    ModelVariant::Vae => {
                        // a = mu, c = log sigma^2
                        let g_mu_out = gm + mu * inv_b;
                        let g_logvar = gs * 0.5 * sigma + 0.5 * (c.exp() - 1.0) * inv_b;
                        (g_mu_out, g_logvar)
                    }
                };
                g_raw[(i, j)] = g_first;
                g_raw[(i, k + j)] = g_second;
            }
        }
        self.encoder.accumulate_gradients(&pass.enc, &g_raw)?;
        Ok(())
    }

    /// One optimizer step on a minibatch; returns the pre-update loss.
    pub fn train_step(
        &mut self,
        x: &DenseMatrix,
        opt: &mut crate::nn::AdagradState,
        rng: &mut Rng,
    ) -> Result<LossParts> {
        let noise = self.draw_noise(x.rows(), rng);
        self.train_step_with_noise(x, &noise, opt)
    }

    pub fn train_step_with_noise(
        &mut self,
        x: &DenseMatrix,
        noise: &DenseMatrix,
        opt: &mut crate::nn::AdagradState,
    ) -> Result<LossParts> {
        let loss = self.loss_and_grad_with_noise(x, noise)?;
        if !loss.total.is_finite() {
            return Err(ModelError::NonFiniteLoss(loss.total));
        }
        let Self {
            encoder, decoder, ..
        } = self;
        let mut slots = encoder.param_grad_pairs();
        slots.extend(decoder.param_grad_pairs());
        opt.step(slots)?;
        Ok(loss)
    }

    /// Deterministic encoder features (no sampling).
    pub fn extract_representation(
        &self,
        x: &DenseMatrix,
        kind: RepresentationKind,
    ) -> Result<Representation> {
        if kind == RepresentationKind::LieAlgebra && !self.variant().uses_exp_map() {
            return Err(ModelError::UnsupportedKind {
                variant: self.variant(),
                kind,
            });
        }
        const CHUNK: usize = 1000;
        let width = match kind {
            RepresentationKind::Mu => self.latent_dim(),
            _ => 2 * self.latent_dim(),
        };
        self.check_input(x)?;
        let mut out = Vec::with_capacity(x.rows() * width);
        for start in (0..x.rows()).step_by(CHUNK) {
            let end = (start + CHUNK).min(x.rows());
            let enc = self.encode(&x.slice_rows(start, end))?;
            let block = match kind {
                RepresentationKind::Mu => enc.mu,
                RepresentationKind::MuConcatSigma => enc.mu.hconcat(&enc.sigma),
                RepresentationKind::LieAlgebra => enc.raw,
            };
            out.extend(block.into_vec());
        }
        Ok(Representation {
            kind,
            vectors: DenseMatrix::from_vec(x.rows(), width, out),
        })
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Encoder parameters followed by decoder parameters.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = self.encoder.params_flat();
        p.extend(self.decoder.params_flat());
        p
    }

    pub fn grads_flat(&self) -> Vec<f64> {
        let mut g = self.encoder.grads_flat();
        g.extend(self.decoder.grads_flat());
        g
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "set_params_flat: length");
        let rest = self.encoder.set_params_flat(flat);
        self.decoder.set_params_flat(rest);
    }
}
