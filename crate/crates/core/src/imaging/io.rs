use std::path::Path;

use image::{GrayImage, ImageReader};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;

/// Reads an 8-bit raster (PNG, PGM, BMP, JPEG) and converts it to luma in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let luma = decoded.into_luma8();
    let (w, h) = luma.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Format(format!("{}: zero-sized image", path.display())));
    }
    ImageTensor::from_u8(h as usize, w as usize, luma.as_raw())
}

/// Writes an image as 8-bit grayscale; the format follows the file extension.
pub fn save_image(image: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raster = GrayImage::from_raw(image.width() as u32, image.height() as u32, image.to_u8())
        .ok_or_else(|| Error::Shape("raster size mismatch".into()))?;
    raster
        .save(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

const IMAGE_EXTENSIONS: [&str; 8] = ["png", "jpg", "jpeg", "bmp", "pgm", "ppm", "pnm", "pbm"];

/// Loads every image file of a directory (not recursive), sorted by file
/// name and labelled by file stem.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<(String, ImageTensor)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, load_image(p)?))
        })
        .collect()
}
