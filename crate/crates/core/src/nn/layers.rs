use serde::{Deserialize, Serialize};

use crate::linalg::{gemm, DenseMatrix, Trans};

use super::{NnError, Result, Rng};

/// Standard deviation of the initial weights and biases (variance 0.01).
pub const INIT_STD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => super::sigmoid(v),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer `y = act(x W^T + b)` with `W` of shape `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub grad_weights: DenseMatrix,
    pub grad_bias: Vec<f64>,
    pub activation: Activation,
}

impl LinearLayer {
    pub fn new(weights: DenseMatrix, bias: Vec<f64>, activation: Activation) -> Self {
        assert_eq!(weights.rows(), bias.len(), "LinearLayer: bias length");
        let (out, inp) = weights.shape();
        Self {
            weights,
            bias,
            grad_weights: DenseMatrix::zeros(out, inp),
            grad_bias: vec![0.0; out],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self::new(
            DenseMatrix::zeros(outputs, inputs),
            vec![0.0; outputs],
            activation,
        )
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.fill(0.0);
        self.grad_bias.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Per-layer inputs, pre-activations and activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub inputs: Vec<DenseMatrix>,
    pub pre_activations: Vec<DenseMatrix>,
    pub activations: Vec<DenseMatrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &DenseMatrix {
        self.activations
            .last()
            .expect("forward cache of an empty network")
    }
}

/// Draws every weight and bias independently from `N(0, INIT_STD^2)`,
/// layer by layer, weights (row-major) before biases.
pub fn init_params(
    sizes: &[usize],
    activations: &[Activation],
    rng: &mut Rng,
) -> Result<Vec<LinearLayer>> {
    if sizes.len() < 2 {
        return Err(NnError::TooFewLayers);
    }
    if activations.len() != sizes.len() - 1 {
        return Err(NnError::DimensionMismatch {
            context: "init_params activations",
            expected: sizes.len() - 1,
            actual: activations.len(),
        });
    }
    let layers = sizes
        .windows(2)
        .zip(activations)
        .map(|(w, &act)| {
            let (inp, out) = (w[0], w[1]);
            let mut weights = DenseMatrix::zeros(out, inp);
            rng.fill_gaussian(weights.as_mut_slice());
            weights
                .as_mut_slice()
                .iter_mut()
                .for_each(|v| *v *= INIT_STD);
            let mut bias = vec![0.0; out];
            rng.fill_gaussian(&mut bias);
            bias.iter_mut().for_each(|v| *v *= INIT_STD);
            LinearLayer::new(weights, bias, act)
        })
        .collect();
    Ok(layers)
}

/// A stack of [`LinearLayer`]s.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<LinearLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<LinearLayer>) -> Self {
        for pair in layers.windows(2) {
            assert_eq!(
                pair[0].outputs(),
                pair[1].inputs(),
                "Mlp: consecutive layer widths disagree"
            );
        }
        Self { layers }
    }

    pub fn random(sizes: &[usize], activations: &[Activation], rng: &mut Rng) -> Result<Self> {
        Ok(Self::new(init_params(sizes, activations, rng)?))
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, LinearLayer::inputs)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, LinearLayer::outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(LinearLayer::zero_grad);
    }

    pub fn forward(&self, x: &DenseMatrix) -> Result<ForwardCache> {
        if x.cols() != self.input_width() {
            return Err(NnError::DimensionMismatch {
                context: "forward input width",
                expected: self.input_width(),
                actual: x.cols(),
            });
        }
        let n = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n),
            pre_activations: Vec::with_capacity(n),
            activations: Vec::with_capacity(n),
        };
        let mut current = x.clone();
        for layer in &self.layers {
            let mut pre = DenseMatrix::zeros(current.rows(), layer.outputs());
            gemm(
                1.0,
                &current,
                Trans::No,
                &layer.weights,
                Trans::Yes,
                0.0,
                &mut pre,
            );
            for r in 0..pre.rows() {
                for (v, b) in pre.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let act = match layer.activation {
                Activation::Identity => pre.clone(),
                a => pre.map(|v| a.apply(v)),
            };
            cache.inputs.push(current);
            cache.pre_activations.push(pre);
            current = act.clone();
            cache.activations.push(act);
        }
        Ok(cache)
    }

    /// Convenience forward pass returning only the output.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut cache = self.forward(x)?;
        Ok(cache.activations.pop().expect("non-empty network"))
    }

    /// Accumulates parameter gradients for `dL/d(output) = grad_out` and
    /// returns `dL/d(input)`.
    pub fn backward(
        &mut self,
        cache: &ForwardCache,
        grad_out: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        Ok(self
            .backward_impl(cache, grad_out, true)?
            .expect("input gradient requested"))
    }

    /// Like [`Mlp::backward`] but skips the input gradient.
    pub fn accumulate_gradients(
        &mut self,
        cache: &ForwardCache,
        grad_out: &DenseMatrix,
    ) -> Result<()> {
        self.backward_impl(cache, grad_out, false).map(|_| ())
    }

    fn backward_impl(
        &mut self,
        cache: &ForwardCache,
        grad_out: &DenseMatrix,
        want_input_grad: bool,
    ) -> Result<Option<DenseMatrix>> {
        if cache.activations.len() != self.layers.len()
            || cache.inputs.len() != self.layers.len()
            || cache.output().shape() != grad_out.shape()
        {
            return Err(NnError::StaleCache);
        }
        for (layer, input) in self.layers.iter().zip(&cache.inputs) {
            if input.cols() != layer.inputs() || input.rows() != grad_out.rows() {
                return Err(NnError::StaleCache);
            }
        }

        let mut grad = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &mut self.layers[l];
            if layer.activation != Activation::Identity {
                let act = layer.activation;
                for (g, &a) in grad
                    .as_mut_slice()
                    .iter_mut()
                    .zip(cache.activations[l].as_slice())
                {
                    *g *= act.derivative_from_output(a);
                }
            }
            let input = &cache.inputs[l];
            gemm(
                1.0,
                &grad,
                Trans::Yes,
                input,
                Trans::No,
                1.0,
                &mut layer.grad_weights,
            );
            for r in 0..grad.rows() {
                for (gb, g) in layer.grad_bias.iter_mut().zip(grad.row(r)) {
                    *gb += g;
                }
            }
            if l > 0 || want_input_grad {
                let mut next = DenseMatrix::zeros(grad.rows(), layer.inputs());
                gemm(
                    1.0,
                    &grad,
                    Trans::No,
                    &layer.weights,
                    Trans::No,
                    0.0,
                    &mut next,
                );
                grad = next;
            }
        }
        Ok(want_input_grad.then_some(grad))
    }

    /// `(parameter, gradient)` slices in a fixed order: per layer, weights
    /// then bias.
    pub fn param_grad_pairs(&mut self) -> Vec<(&mut [f64], &[f64])> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in &mut self.layers {
            let LinearLayer {
                weights,
                bias,
                grad_weights,
                grad_bias,
                ..
            } = layer;
            out.push((weights.as_mut_slice(), grad_weights.as_slice()));
            out.push((bias.as_mut_slice(), grad_bias.as_slice()));
        }
        out
    }

    /// Parameters flattened in [`Mlp::param_grad_pairs`] order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn grads_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.grad_weights.as_slice());
            out.extend_from_slice(&l.grad_bias);
        }
        out
    }

    /// Overwrites parameters from a flat slice; returns the unused tail.
    pub fn set_params_flat<'a>(&mut self, mut flat: &'a [f64]) -> &'a [f64] {
        for l in &mut self.layers {
            let nw = l.weights.as_slice().len();
            l.weights.as_mut_slice().copy_from_slice(&flat[..nw]);
            flat = &flat[nw..];
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[..nb]);
            flat = &flat[nb..];
        }
        flat
    }
}
