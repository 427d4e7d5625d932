//! Readers and writers for point clouds, meshes, images and model files.
//!
//! Every parse failure is a [`FileFormatError`](crate::FileFormatError)
//! carrying a line number (text formats) or byte offset (binary formats).

mod json;
mod obj;
mod ppm;
mod xyz;

pub use json::{
    load_checkpoint, load_encoding, load_shape_space, save_checkpoint, save_encoding, save_shape_space,
    EncodingFile, ShapeSpaceFile,
};
pub use obj::{parse_obj, read_obj, write_obj};
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
pub use xyz::{parse_xyz, read_xyz, write_xyz};

use std::path::Path;

use crate::error::{Error, FileFormatError, Position, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| {
        format_error(path, Position::Offset(e.utf8_error().valid_up_to()), "file is not valid UTF-8")
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_error(path: &Path, position: Position, message: impl Into<String>) -> Error {
    Error::Format(FileFormatError {
        path: path.to_path_buf(),
        position,
        message: message.into(),
    })
}
