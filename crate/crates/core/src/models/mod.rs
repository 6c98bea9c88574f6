//! The three architectures, assembled from [`crate::nn`] layers, and the
//! training loop that fits them to recorded datasets.

mod train;

pub use train::{
    decode_steer, embed_sequences, evaluate_set, overfit_sanity, prepare_examples, train, train_autoencoder, train_examples,
    EpochRecord, Example, OverfitReport, SetMetrics, TrainConfig, TrainError, TrainHistory, TrainOutcome,
    AutoencoderOutcome, OVERFIT_MSE,
};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::nn::{LayerSpec, Network, NnError, Scalar};

/// What the last layer produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// One tanh-bounded steering value.
    Regression,
    /// Logits over this many steering bins.
    Classification(usize),
    /// A feature vector of this width (encoder).
    Embedding(usize),
    /// An image (decoder, or a stacked autoencoder reproducing its input).
    Reconstruction,
}

impl Head {
    pub fn width(self) -> Option<usize> {
        match self {
            Head::Regression => Some(1),
            Head::Classification(n) | Head::Embedding(n) => Some(n),
            Head::Reconstruction => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
    pub head: Head,
}

impl ModelSpec {
    /// Shape-checks every layer and the head width.
    pub fn validate(&self) -> Result<(), NnError> {
        let net = Network::<f32>::zeroed(&self.layers, &self.input_shape)?;
        let out = net.output_shape();
        let ok = match self.head.width() {
            Some(w) => out == [w],
            // decoders widen, stacked autoencoders keep the input size
            None => self.name != "autoencoder" || out == self.input_shape.as_slice(),
        };
        if !ok {
            return Err(NnError::BadSpec(format!("{}: output {out:?} does not match {:?} head", self.name, self.head)));
        }
        if self.head == Head::Regression && self.layers.last() != Some(&LayerSpec::Tanh) {
            return Err(NnError::BadSpec(format!("{}: regression head must end in tanh", self.name)));
        }
        Ok(())
    }

    pub fn build<T: Scalar>(&self, seed: u64) -> Result<Network<T>, NnError> {
        self.validate()?;
        Network::new(&self.layers, &self.input_shape, seed)
    }

    pub fn param_count(&self) -> Result<usize, NnError> {
        Ok(Network::<f32>::zeroed(&self.layers, &self.input_shape)?.param_count())
    }
}

fn chw(input_shape: &[usize]) -> Result<(usize, usize, usize), NnError> {
    match *input_shape {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(NnError::BadSpec(format!("expected [channels, height, width], got {input_shape:?}"))),
    }
}

fn push_head(layers: &mut Vec<LayerSpec>, inputs: usize, head: Head) -> Result<(), NnError> {
    let outputs = match head {
        Head::Regression | Head::Classification(_) => head.width().unwrap_or(1),
        _ => return Err(NnError::BadSpec(format!("{head:?} is not a steering head"))),
    };
    layers.push(LayerSpec::Linear { inputs, outputs });
    if head == Head::Regression {
        layers.push(LayerSpec::Tanh);
    }
    Ok(())
}

/// Walks `layers` from `input` and returns the flattened output width.
fn flat_width(layers: &[LayerSpec], input: &[usize]) -> Result<usize, NnError> {
    let net = Network::<f32>::zeroed(layers, input)?;
    Ok(net.output_shape().iter().product())
}

fn conv(in_channels: usize, filters: usize, kernel: usize, stride: usize, padding: usize) -> LayerSpec {
    LayerSpec::Conv2d { in_channels, filters, kernel, stride, padding }
}

/// Three same-padded 3×3 conv blocks (16/32/64 filters, ReLU, 2×2 pool) and three
/// linear layers narrowing 256 → 64 → head.
pub fn build_simple_cnn(input_shape: &[usize], head: Head) -> Result<ModelSpec, NnError> {
    let (c, _, _) = chw(input_shape)?;
    let mut layers = Vec::new();
    for (i, &f) in [16, 32, 64].iter().enumerate() {
        let cin = if i == 0 { c } else { f / 2 };
        layers.extend([conv(cin, f, 3, 1, 1), LayerSpec::Relu, LayerSpec::MaxPool { size: 2 }]);
    }
    layers.push(LayerSpec::Flatten);
    let flat = flat_width(&layers, input_shape)?;
    layers.extend([
        LayerSpec::Linear { inputs: flat, outputs: 256 },
        LayerSpec::Relu,
        LayerSpec::Linear { inputs: 256, outputs: 64 },
        LayerSpec::Relu,
    ]);
    push_head(&mut layers, 64, head)?;
    let spec = ModelSpec { name: "simple_cnn".into(), layers, input_shape: input_shape.to_vec(), head };
    spec.validate()?;
    Ok(spec)
}

/// Per-channel input normalization, conv 24/36/48 (5×5, stride 2), conv
/// 64/64 (3×3), then fully connected 100 → 50 → head.
pub fn build_pilotnet(input_shape: &[usize], head: Head) -> Result<ModelSpec, NnError> {
    let (c, _, _) = chw(input_shape)?;
    let mut layers = vec![LayerSpec::Normalize];
    let convs = [(c, 24, 5, 2), (24, 36, 5, 2), (36, 48, 5, 2), (48, 64, 3, 1), (64, 64, 3, 1)];
    for (cin, f, k, s) in convs {
        layers.extend([conv(cin, f, k, s, 0), LayerSpec::Relu]);
    }
    layers.push(LayerSpec::Flatten);
    let flat = flat_width(&layers, input_shape)?;
    layers.extend([
        LayerSpec::Linear { inputs: flat, outputs: 100 },
        LayerSpec::Relu,
        LayerSpec::Linear { inputs: 100, outputs: 50 },
        LayerSpec::Relu,
    ]);
    push_head(&mut layers, 50, head)?;
    let spec = ModelSpec { name: "pilotnet".into(), layers, input_shape: input_shape.to_vec(), head };
    spec.validate()?;
    Ok(spec)
}

/// Convolutional encoder down to `embedding` values and a mirrored decoder
/// (linear, then upsample + conv twice, sigmoid output). Height and width
/// must be multiples of 4.
pub fn build_autoencoder(input_shape: &[usize], embedding: usize) -> Result<(ModelSpec, ModelSpec), NnError> {
    let (c, h, w) = chw(input_shape)?;
    if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
        return Err(NnError::BadSpec(format!("autoencoder input {h}x{w} must be a non-zero multiple of 4")));
    }
    let (qh, qw) = (h / 4, w / 4);
    let encoder = vec![
        conv(c, 8, 3, 1, 1),
        LayerSpec::Relu,
        LayerSpec::MaxPool { size: 2 },
        conv(8, 16, 3, 1, 1),
        LayerSpec::Relu,
        LayerSpec::MaxPool { size: 2 },
        LayerSpec::Flatten,
        LayerSpec::Linear { inputs: 16 * qh * qw, outputs: embedding },
    ];
    let decoder = vec![
        LayerSpec::Linear { inputs: embedding, outputs: 16 * qh * qw },
        LayerSpec::Relu,
        LayerSpec::Reshape { shape: vec![16, qh, qw] },
        LayerSpec::Upsample { factor: 2 },
        conv(16, 8, 3, 1, 1),
        LayerSpec::Relu,
        LayerSpec::Upsample { factor: 2 },
        conv(8, c, 3, 1, 1),
        LayerSpec::Sigmoid,
    ];
    let enc = ModelSpec {
        name: "ae_encoder".into(),
        layers: encoder,
        input_shape: input_shape.to_vec(),
        head: Head::Embedding(embedding),
    };
    let dec = ModelSpec {
        name: "ae_decoder".into(),
        layers: decoder,
        input_shape: vec![embedding],
        head: Head::Reconstruction,
    };
    Network::<f32>::zeroed(&enc.layers, &enc.input_shape)?;
    let out = Network::<f32>::zeroed(&dec.layers, &dec.input_shape)?.output_shape().to_vec();
    if out != input_shape {
        return Err(NnError::BadSpec(format!("decoder produces {out:?}, expected {input_shape:?}")));
    }
    Ok((enc, dec))
}

/// The encoder and decoder stacked into one trainable model.
pub fn autoencoder_stack(encoder: &ModelSpec, decoder: &ModelSpec) -> ModelSpec {
    let mut layers = encoder.layers.clone();
    layers.extend(decoder.layers.iter().cloned());
    ModelSpec { name: "autoencoder".into(), layers, input_shape: encoder.input_shape.clone(), head: Head::Reconstruction }
}

/// GRU over `seq_len` embeddings; the final hidden state feeds a linear head.
pub fn build_gru_head(embedding: usize, hidden: usize, seq_len: usize, head: Head) -> Result<ModelSpec, NnError> {
    if seq_len == 0 {
        return Err(NnError::BadSpec("sequence length must be positive".into()));
    }
    let mut layers = vec![LayerSpec::Gru { inputs: embedding, hidden }];
    push_head(&mut layers, hidden, head)?;
    let spec = ModelSpec { name: "gru_head".into(), layers, input_shape: vec![seq_len, embedding], head };
    spec.validate()?;
    Ok(spec)
}

/// Architectures selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SimpleCnn,
    Pilotnet,
    AeGru,
}

impl core::str::FromStr for Architecture {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple_cnn" => Ok(Self::SimpleCnn),
            "pilotnet" => Ok(Self::Pilotnet),
            "ae_gru" => Ok(Self::AeGru),
            _ => Err(NnError::BadSpec(format!("unknown model '{s}'"))),
        }
    }
}

impl Architecture {
    pub fn name(self) -> String {
        match self {
            Self::SimpleCnn => "simple_cnn",
            Self::Pilotnet => "pilotnet",
            Self::AeGru => "ae_gru",
        }
        .to_string()
    }
}
