//! Versioned JSON persistence for layer parameters.
//!
//! Weights serialize row-major. JSON floats are written with the shortest
//! round-tripping representation, so a save/load cycle is value-exact.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::activation::Activation;
use super::layer::{DenseLayer, MaskedDiagonalLayer};
use super::network::Layer;
use crate::error::{Error, Result};

/// Version stamp shared by every model document this crate writes.
pub const FORMAT_VERSION: u32 = 1;

/// Serialized form of a single layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        /// Row-major, `out_dim * in_dim` entries.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    MaskedDiagonal {
        dim: usize,
        bias: Vec<f64>,
    },
}

impl LayerSpec {
    pub fn from_layer(layer: &Layer) -> Self {
        match layer {
            Layer::Dense(d) => LayerSpec::Dense {
                in_dim: d.in_dim(),
                out_dim: d.out_dim(),
                activation: d.activation,
                weights: d.weights.clone(),
                bias: d.bias.clone(),
            },
            Layer::MaskedDiagonal(m) => LayerSpec::MaskedDiagonal {
                dim: m.dim(),
                bias: m.bias.clone(),
            },
        }
    }

    pub fn into_layer(self) -> Result<Layer> {
        match self {
            LayerSpec::Dense {
                in_dim,
                out_dim,
                activation,
                weights,
                bias,
            } => Ok(Layer::Dense(DenseLayer::from_parts(
                in_dim, out_dim, weights, bias, activation,
            )?)),
            LayerSpec::MaskedDiagonal { dim, bias } => {
                if bias.len() != dim {
                    return Err(Error::SchemaMismatch(format!(
                        "masked layer: {} bias entries for dim {dim}",
                        bias.len()
                    )));
                }
                Ok(Layer::MaskedDiagonal(MaskedDiagonalLayer { bias }))
            }
        }
    }
}

/// Dense-layer helpers for models that keep their heads outside a `Network`.
pub fn dense_spec(layer: &DenseLayer) -> LayerSpec {
    LayerSpec::from_layer(&Layer::Dense(layer.clone()))
}

pub fn dense_from_spec(spec: LayerSpec) -> Result<DenseLayer> {
    match spec.into_layer()? {
        Layer::Dense(d) => Ok(d),
        _ => Err(Error::SchemaMismatch("expected a dense layer spec".into())),
    }
}

/// Rejects documents written under a different format version.
pub fn check_format_version(found: u32, what: &str) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "{what}: format_version {found}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

/// Writes a serializable document as pretty JSON plus trailing newline.
pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::SchemaMismatch(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a JSON document, mapping a missing file to `MissingArtifact`.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    serde_json::from_str(&text)
        .map_err(|e| Error::SchemaMismatch(format!("parse {}: {e}", path.display())))
}
