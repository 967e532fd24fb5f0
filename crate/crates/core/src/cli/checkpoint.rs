use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::{LossCurve, LossRow};
use crate::linalg::DenseMatrix;
use crate::models::LgaeModel;
use crate::nn::{Activation, AdagradState, LinearLayer, Mlp, RngState};

use super::{CliError, Result, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerRecord {
    fn from_layer(l: &LinearLayer) -> Self {
        Self {
            inputs: l.inputs(),
            outputs: l.outputs(),
            activation: l.activation,
            weights: l.weights.as_slice().to_vec(),
            bias: l.bias.clone(),
        }
    }

    fn to_layer(&self) -> Result<LinearLayer> {
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(CliError::Checkpoint(format!(
                "layer {}x{} has {} weights and {} biases",
                self.outputs,
                self.inputs,
                self.weights.len(),
                self.bias.len()
            )));
        }
        let w = DenseMatrix::from_vec(self.outputs, self.inputs, self.weights.clone());
        Ok(LinearLayer::new(w, self.bias.clone(), self.activation))
    }
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub input_dim: usize,
    pub epoch: usize,
    pub encoder: Vec<LayerRecord>,
    pub decoder: Vec<LayerRecord>,
    pub optimizer: AdagradState,
    pub rng: RngState,
    pub history: Vec<LossRow>,
}

fn mlp_records(m: &Mlp) -> Vec<LayerRecord> {
    m.layers.iter().map(LayerRecord::from_layer).collect()
}

fn mlp_from_records(r: &[LayerRecord]) -> Result<Mlp> {
    let layers = r
        .iter()
        .map(LayerRecord::to_layer)
        .collect::<Result<Vec<_>>>()?;
    if layers.is_empty() || layers.windows(2).any(|p| p[0].outputs() != p[1].inputs()) {
        return Err(CliError::Checkpoint("inconsistent layer widths".into()));
    }
    Ok(Mlp::new(layers))
}

impl Checkpoint {
    pub fn capture(
        config: &TrainConfig,
        model: &LgaeModel,
        epoch: usize,
        optimizer: &AdagradState,
        rng: RngState,
        curve: &LossCurve,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: config.echo(),
            input_dim: model.input_dim(),
            epoch,
            encoder: mlp_records(&model.encoder),
            decoder: mlp_records(&model.decoder),
            optimizer: optimizer.clone(),
            rng,
            history: curve.rows().to_vec(),
        }
    }

    pub fn model(&self) -> Result<LgaeModel> {
        let spec = self.config.model_spec(self.input_dim);
        let encoder = mlp_from_records(&self.encoder)?;
        let decoder = mlp_from_records(&self.decoder)?;
        let k = spec.latent_dim;
        let ok = encoder.input_width() == spec.input_dim
            && encoder.output_width() == 2 * k
            && decoder.input_width() == k
            && decoder.output_width() == spec.input_dim;
        if !ok {
            return Err(CliError::Checkpoint(
                "layer shapes do not match the config".into(),
            ));
        }
        Ok(LgaeModel {
            spec,
            encoder,
            decoder,
        })
    }

    pub fn curve(&self) -> Result<LossCurve> {
        let mut c = LossCurve::new();
        for r in &self.history {
            c.push(*r)
                .map_err(|e| CliError::Checkpoint(e.to_string()))?;
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(text)
            .map_err(|e| CliError::Checkpoint(format!("missing format_version: {e}")))?;
        if v.format_version != FORMAT_VERSION {
            return Err(CliError::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                v.format_version
            )));
        }
        serde_json::from_str(text).map_err(|e| CliError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}
