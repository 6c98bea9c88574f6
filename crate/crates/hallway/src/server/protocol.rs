use serde::{Deserialize, Serialize};

/// Server → client over `/stream`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMsg {
    Pose { t: f64, x: f64, y: f64, theta: f64, steer: f64 },
    /// Interleaved RGB, base64.
    Frame { w: usize, h: usize, rgb: String },
}

/// Client → server over `/stream`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMsg {
    /// Absolute steer in [−1, 1]; +1 is full left.
    Steer { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRequest {
    pub on: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmdRequest {
    pub cmd: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmdResponse {
    pub out: String,
}
