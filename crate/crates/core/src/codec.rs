//! The JPEG stage between description generation and reconstruction.
//!
//! Descriptions are quantized to 8 bits with `round(v * 255)` and coded as
//! baseline grayscale JPEG. Rates count every transmitted byte, headers included.

use std::io::Cursor;

use image::codecs::jpeg::{JpegDecoder, JpegEncoder};
use image::{ColorType, ExtendedColorType, ImageDecoder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    qf: u8,
}

impl CodecConfig {
    pub fn new(qf: u32) -> Result<Self> {
        if !(1..=100).contains(&qf) {
            return Err(Error::Range(format!("quality factor {qf} outside [1, 100]")));
        }
        Ok(CodecConfig { qf: qf as u8 })
    }

    pub fn qf(&self) -> u32 {
        u32::from(self.qf)
    }
}

/// One coded description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
    height: usize,
    width: usize,
}

impl Bitstream {
    /// Wraps received bytes; dimensions are read from the frame header on decode.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::Codec("empty stream".into()));
        }
        let (height, width) = frame_dims(&bytes).unwrap_or((0, 0));
        Ok(Bitstream { bytes, height, width })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn byte_count(&self) -> usize {
        self.bytes.len()
    }

    pub fn bits(&self) -> u64 {
        8 * self.bytes.len() as u64
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Reads the dimensions from the first SOF0 marker.
fn frame_dims(bytes: &[u8]) -> Option<(usize, usize)> {
    let mut i = 2;
    while i + 9 < bytes.len() {
        if bytes[i] != 0xFF {
            return None;
        }
        let marker = bytes[i + 1];
        let len = usize::from(u16::from_be_bytes([bytes[i + 2], bytes[i + 3]]));
        if marker == 0xC0 {
            let h = u16::from_be_bytes([bytes[i + 5], bytes[i + 6]]);
            let w = u16::from_be_bytes([bytes[i + 7], bytes[i + 8]]);
            return Some((usize::from(h), usize::from(w)));
        }
        i += 2 + len;
    }
    None
}

pub fn encode(description: &ImageTensor, cfg: &CodecConfig) -> Result<Bitstream> {
    let (h, w) = description.dims();
    if h == 0 || w == 0 || h > usize::from(u16::MAX) || w > usize::from(u16::MAX) {
        return Err(Error::Codec(format!("cannot code a {h}x{w} image")));
    }
    let pixels = description.to_u8();
    let mut bytes = Vec::new();
    JpegEncoder::new_with_quality(&mut bytes, cfg.qf)
        .encode(&pixels, w as u32, h as u32, ExtendedColorType::L8)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(Bitstream {
        bytes,
        height: h,
        width: w,
    })
}

/// Decodes a stream; anything that is not a complete JPEG image is an error.
pub fn decode(stream: &Bitstream) -> Result<ImageTensor> {
    let b = &stream.bytes;
    if b.len() < 4 || b[..2] != [0xFF, 0xD8] {
        return Err(Error::Codec("missing start-of-image marker".into()));
    }
    if b[b.len() - 2..] != [0xFF, 0xD9] {
        return Err(Error::Codec("missing end-of-image marker (truncated stream)".into()));
    }
    let decoder = JpegDecoder::new(Cursor::new(b)).map_err(|e| Error::Codec(e.to_string()))?;
    let (w, h) = decoder.dimensions();
    let color = decoder.color_type();
    let mut buf = vec![0u8; decoder.total_bytes() as usize];
    decoder.read_image(&mut buf).map_err(|e| Error::Codec(e.to_string()))?;
    let luma = match color {
        ColorType::L8 => buf,
        ColorType::Rgb8 => buf
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect(),
        other => return Err(Error::Codec(format!("unsupported decoded color type {other:?}"))),
    };
    let img = ImageTensor::from_u8(h as usize, w as usize, &luma)?;
    if stream.height != 0 && img.dims() != stream.dims() {
        return Err(Error::Codec(format!(
            "decoded {:?} but stream declares {:?}",
            img.dims(),
            stream.dims()
        )));
    }
    Ok(img)
}

/// Total transmitted bits over the source pixel count.
pub fn bits_per_pixel(streams: &[&Bitstream], height: usize, width: usize) -> Result<f64> {
    if streams.is_empty() {
        return Err(Error::Config("bits per pixel needs at least one stream".into()));
    }
    if height * width == 0 {
        return Err(Error::Shape("bits per pixel needs a non-empty source".into()));
    }
    let bits: u64 = streams.iter().map(|s| s.bits()).sum();
    Ok(bits as f64 / (height * width) as f64)
}
