//! Versioned binary checkpoints for every predictor.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` header length, a JSON
//! header naming the model kind, catalog digest, hyper-parameters and tensor
//! shapes, then each tensor as row-major little-endian `f64`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baselines::{FremenModel, StaticPrior};
use crate::error::{Error, Result};
use crate::gnn::{ModelConfig, ModelParams, Weights, TENSOR_NAMES};

pub const MAGIC: &[u8; 8] = b"RDYNCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Gnn(ModelParams),
    Static(StaticPrior),
    Fremen(FremenModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Gnn(_) => "gnn",
            Model::Static(_) => "static",
            Model::Fremen(_) => "fremen",
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Model::Gnn(p) => p.n_nodes,
            Model::Static(s) => s.prior.nrows(),
            Model::Fremen(f) => f.n_nodes(),
        }
    }
}

/// A model together with the digest of the catalog it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub catalog_digest: String,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    catalog_digest: String,
    metadata: Value,
    tensors: Vec<TensorInfo>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!("{name} = {v} cannot be stored")))
    }
}

fn gnn_tensors(p: &ModelParams) -> Vec<(String, &Array2<f64>)> {
    let mut out = Vec::new();
    for (prefix, w) in [("", &p.weights), ("adam_m.", &p.adam_m), ("adam_v.", &p.adam_v)] {
        for (name, t) in w.named() {
            out.push((format!("{prefix}{name}"), t));
        }
    }
    out
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (metadata, tensors): (Value, Vec<(String, &Array2<f64>)>) = match &self.model {
            Model::Gnn(p) => (
                json!({ "config": p.config, "n_nodes": p.n_nodes, "adam_step": p.adam_step }),
                gnn_tensors(p),
            ),
            Model::Static(s) => (
                json!({ "p_change": finite("p_change", s.p_change)? }),
                vec![("prior".to_string(), &s.prior)],
            ),
            Model::Fremen(f) => (
                json!({ "decay_rate": finite("decay_rate", f.decay_rate)? }),
                vec![
                    ("mean".to_string(), &f.mean),
                    ("amplitude".to_string(), &f.amplitude),
                    ("frequency".to_string(), &f.frequency),
                    ("phase".to_string(), &f.phase),
                ],
            ),
        };
        let header = Header {
            kind: self.model.kind().to_string(),
            catalog_digest: self.catalog_digest.clone(),
            metadata,
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorInfo {
                    name: name.clone(),
                    shape: [t.nrows(), t.ncols()],
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(20 + header.len() + tensors.iter().map(|(_, t)| 8 * t.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in tensors {
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Reader { bytes, pos: 0 };
        if cursor.take(8)? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let len = u64::from_le_bytes(cursor.take(8)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(cursor.take(len)?).map_err(|e| bad(format!("header: {e}")))?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for info in &header.tensors {
            let [r, c] = info.shape;
            let raw = cursor.take(8 * r * c)?;
            let values = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
            tensors.push((info.name.as_str(), Array2::from_shape_vec((r, c), values).unwrap()));
        }
        if cursor.pos != bytes.len() {
            return Err(bad("trailing bytes after the last tensor"));
        }
        let mut tensors = Tensors(tensors);
        let meta = &header.metadata;
        let model = match header.kind.as_str() {
            "gnn" => {
                let config: ModelConfig = serde_json::from_value(meta["config"].clone())?;
                let n_nodes = meta["n_nodes"].as_u64().ok_or_else(|| bad("missing n_nodes"))? as usize;
                let adam_step = meta["adam_step"].as_u64().ok_or_else(|| bad("missing adam_step"))?;
                let shapes = Weights::shapes(n_nodes, &config);
                let mut group = |prefix: &str| -> Result<Weights> {
                    let mut ts = Vec::with_capacity(TENSOR_NAMES.len());
                    for (name, shape) in TENSOR_NAMES.iter().zip(shapes) {
                        ts.push(tensors.get(&format!("{prefix}{name}"), shape)?);
                    }
                    Ok(Weights::from_array(ts.try_into().unwrap()))
                };
                let weights = group("")?;
                let adam_m = group("adam_m.")?;
                let adam_v = group("adam_v.")?;
                Model::Gnn(ModelParams {
                    config,
                    n_nodes,
                    weights,
                    adam_m,
                    adam_v,
                    adam_step,
                })
            }
            "static" => {
                let p_change = meta["p_change"].as_f64().ok_or_else(|| bad("missing p_change"))?;
                let prior = tensors.take("prior")?;
                Model::Static(StaticPrior { prior, p_change })
            }
            "fremen" => {
                let decay_rate = meta["decay_rate"].as_f64().ok_or_else(|| bad("missing decay_rate"))?;
                Model::Fremen(FremenModel {
                    decay_rate,
                    mean: tensors.take("mean")?,
                    amplitude: tensors.take("amplitude")?,
                    frequency: tensors.take("frequency")?,
                    phase: tensors.take("phase")?,
                })
            }
            other => return Err(bad(format!("unknown model kind `{other}`"))),
        };
        Ok(Checkpoint {
            catalog_digest: header.catalog_digest,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(msg) => bad(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

struct Tensors<'a>(Vec<(&'a str, Array2<f64>)>);

impl Tensors<'_> {
    fn take(&mut self, name: &str) -> Result<Array2<f64>> {
        let idx = self
            .0
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| bad(format!("missing tensor `{name}`")))?;
        Ok(self.0.swap_remove(idx).1)
    }

    fn get(&mut self, name: &str, shape: (usize, usize)) -> Result<Array2<f64>> {
        let t = self.take(name)?;
        if t.dim() != shape {
            return Err(bad(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.dim())));
        }
        Ok(t)
    }
}
