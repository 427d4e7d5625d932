use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{format_error, read_text, write_bytes};
use crate::encoding::{SplineConfig, SplineEncoding};
use crate::error::{Error, Position, Result};
use crate::network::{Checkpoint, Mlp, MlpShape, CHECKPOINT_VERSION};
use crate::training::{ShapeSpace, ShapeSpaceConfig};

/// A spline encoding's configuration and flat trainable values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingRecord {
    pub config: SplineConfig,
    pub params: Vec<f64>,
}

impl EncodingRecord {
    fn from_encoding(e: &SplineEncoding) -> Self {
        EncodingRecord {
            config: e.config().clone(),
            params: e.params(),
        }
    }

    fn to_encoding(&self) -> Result<SplineEncoding> {
        let nw = self.config.projections * (self.config.segments + 1) * self.config.channels;
        if self.params.len() < nw {
            return Err(Error::invalid("encoding record has too few parameters"));
        }
        SplineEncoding::from_angles(
            self.config.clone(),
            self.params[..nw].to_vec(),
            self.params[nw..].to_vec(),
        )
    }
}

/// A single encoding fitted against a frozen shape-space MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingFile {
    pub format_version: u32,
    pub encoding: EncodingRecord,
    /// Free-form results such as the final loss and metrics.
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl EncodingFile {
    pub fn new(encoding: &SplineEncoding, meta: serde_json::Value) -> Self {
        EncodingFile {
            format_version: CHECKPOINT_VERSION,
            encoding: EncodingRecord::from_encoding(encoding),
            meta,
        }
    }

    pub fn to_encoding(&self) -> Result<SplineEncoding> {
        self.encoding.to_encoding()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpaceFile {
    pub format_version: u32,
    pub config: ShapeSpaceConfig,
    pub mlp: MlpShape,
    pub mlp_params: Vec<f64>,
    pub init_encoding: EncodingRecord,
    pub encodings: Vec<EncodingRecord>,
}

impl ShapeSpaceFile {
    pub fn from_space(space: &ShapeSpace) -> Self {
        ShapeSpaceFile {
            format_version: CHECKPOINT_VERSION,
            config: space.config.clone(),
            mlp: space.mlp.shape().clone(),
            mlp_params: space.mlp.params(),
            init_encoding: EncodingRecord::from_encoding(&space.init_encoding),
            encodings: space.encodings.iter().map(EncodingRecord::from_encoding).collect(),
        }
    }

    pub fn to_space(&self) -> Result<ShapeSpace> {
        let mut mlp = Mlp::zeros(self.mlp.clone())?;
        mlp.set_params(&self.mlp_params)?;
        Ok(ShapeSpace {
            mlp,
            encodings: self
                .encodings
                .iter()
                .map(EncodingRecord::to_encoding)
                .collect::<Result<_>>()?,
            init_encoding: self.init_encoding.to_encoding()?,
            config: self.config.clone(),
        })
    }
}

fn line_of(e: &serde_json::Error) -> Position {
    Position::Line(e.line().max(1))
}

/// Parses a versioned JSON document, rejecting unknown `format_version`s.
fn load_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format_error(path, line_of(&e), format!("invalid JSON: {e}")))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        Some(v) => {
            return Err(format_error(
                path,
                Position::Line(1),
                format!("unsupported format_version {v}, expected {CHECKPOINT_VERSION}"),
            ))
        }
        None => return Err(format_error(path, Position::Line(1), "missing format_version")),
    }
    serde_json::from_str(&text).map_err(|e| format_error(path, line_of(&e), e.to_string()))
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec(value).map_err(|e| Error::invalid(format!("cannot serialize: {e}")))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    if ck.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("refusing to save non-finite parameters"));
    }
    save_json(path.as_ref(), ck)
}

/// Loads and checks that the parameters match the stored model spec.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let ck: Checkpoint = load_versioned(path)?;
    ck.to_model()
        .map_err(|e| format_error(path, Position::Line(1), format!("inconsistent checkpoint: {e}")))?;
    Ok(ck)
}

pub fn save_shape_space(path: impl AsRef<Path>, space: &ShapeSpace) -> Result<()> {
    save_json(path.as_ref(), &ShapeSpaceFile::from_space(space))
}

pub fn load_shape_space(path: impl AsRef<Path>) -> Result<ShapeSpace> {
    let path = path.as_ref();
    let file: ShapeSpaceFile = load_versioned(path)?;
    file.to_space()
        .map_err(|e| format_error(path, Position::Line(1), format!("inconsistent shape space: {e}")))
}

pub fn save_encoding(path: impl AsRef<Path>, file: &EncodingFile) -> Result<()> {
    save_json(path.as_ref(), file)
}

pub fn load_encoding(path: impl AsRef<Path>) -> Result<EncodingFile> {
    let path = path.as_ref();
    let file: EncodingFile = load_versioned(path)?;
    file.to_encoding()
        .map_err(|e| format_error(path, Position::Line(1), format!("inconsistent encoding: {e}")))?;
    Ok(file)
}
