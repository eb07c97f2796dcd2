//! Reading and writing image files.
//!
//! Color images are decoded as 8-bit RGB; an alpha channel, if present, is
//! dropped. Encoding always produces opaque 8-bit RGB PNG so identical rasters
//! encode to identical bytes.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use thiserror::Error;

use crate::imgcore::RasterImage;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("cannot encode image: {0}")]
    Encode(String),
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn decode_raster(bytes: &[u8]) -> Result<RasterImage, IoError> {
    let img = image::load_from_memory(bytes).map_err(|e| IoError::Decode(e.to_string()))?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    RasterImage::new(w, h, rgb.into_raw()).map_err(|e| IoError::Decode(e.to_string()))
}

/// Width and height from the image header, without decoding pixels.
pub fn probe_dimensions(bytes: &[u8]) -> Result<(usize, usize), IoError> {
    let (w, h) = image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| IoError::Decode(e.to_string()))?
        .into_dimensions()
        .map_err(|e| IoError::Decode(e.to_string()))?;
    Ok((w as usize, h as usize))
}

pub fn read_raster(path: &Path) -> Result<RasterImage, IoError> {
    decode_raster(&read_bytes(path)?)
}

/// Decodes a single-channel 8-bit image; returns width, height and samples.
pub fn decode_gray(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), IoError> {
    let img = image::load_from_memory(bytes).map_err(|e| IoError::Decode(e.to_string()))?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => other.to_luma8(),
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    Ok((w, h, gray.into_raw()))
}

pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, IoError> {
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
        .ok_or_else(|| IoError::Encode("buffer size".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| IoError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn encode_gray_png(width: usize, height: usize, samples: Vec<u8>) -> Result<Vec<u8>, IoError> {
    let buf = GrayImage::from_raw(width as u32, height as u32, samples)
        .ok_or_else(|| IoError::Encode("buffer size".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| IoError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a sibling temporary file and a rename, so a failed write
/// never leaves a truncated file at `path`.
pub fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    write_bytes(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|source| {
        let _ = std::fs::remove_file(&tmp);
        IoError::Write {
            path: path.to_path_buf(),
            source,
        }
    })
}

pub fn write_png(path: &Path, img: &RasterImage) -> Result<(), IoError> {
    write_bytes(path, &encode_png(img)?)
}
