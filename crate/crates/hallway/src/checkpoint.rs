//! Checkpoint files: the binary network blob plus a `<name>.json` sidecar
//! recording how the networks were built and what the pipeline fed them.

use std::fs;
use std::path::{Path, PathBuf};

use hallway_core::models::{Architecture, Head, ModelSpec};
use hallway_core::nn::{decode_checkpoint, encode_checkpoint, LossSpec, Network, NnError};
use hallway_core::pipeline::PipelineSpec;
use hallway_core::simworld::CameraConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub architecture: Architecture,
    pub head: Head,
    /// One entry per network in the blob, same order. `ae_gru` stores the
    /// frozen encoder first and the recurrent head second.
    pub models: Vec<ModelSpec>,
    pub pipeline: PipelineSpec,
    /// Seed for randomized image stages at inference time.
    #[serde(default)]
    pub pipeline_seed: u64,
    /// Camera the training frames came from.
    pub camera: CameraConfig,
    pub loss: LossSpec,
    #[serde(default = "one")]
    pub label_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub nets: Vec<Network<f32>>,
    pub sidecar: Sidecar,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

fn check_matches(nets: &[Network<f32>], sidecar: &Sidecar) -> Result<(), NnError> {
    if nets.len() != sidecar.models.len() {
        return Err(NnError::Checkpoint(format!(
            "sidecar describes {} models, checkpoint holds {}",
            sidecar.models.len(),
            nets.len()
        )));
    }
    for (net, spec) in nets.iter().zip(&sidecar.models) {
        if net.layers != spec.layers || net.input_shape != spec.input_shape {
            return Err(NnError::Checkpoint(format!("sidecar model '{}' does not match the checkpoint", spec.name)));
        }
    }
    Ok(())
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    check_matches(&ckpt.nets, &ckpt.sidecar)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let refs: Vec<&Network<f32>> = ckpt.nets.iter().collect();
    fs::write(path, encode_checkpoint(&refs)).map_err(Error::io(path))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&ckpt.sidecar).expect("sidecar serializes");
    fs::write(&side, json).map_err(Error::io(&side))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    let nets = decode_checkpoint(&bytes).map_err(|e| Error::format(path, e))?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(Error::io(&side))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(&side, e))?;
    check_matches(&nets, &sidecar).map_err(|e| Error::format(&side, e))?;
    Ok(Checkpoint { nets, sidecar })
}
