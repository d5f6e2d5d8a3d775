use std::ops::Deref;

use crate::error::{Error, Result};

/// A single-channel raster of `f64` samples in row-major order.
///
/// Unlike [`ImageTensor`], a plane places no constraint on its values, so it
/// carries raw network outputs and loss gradients as well as images.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} plane needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Plane { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Plane {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Plane { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.width + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Clamps every sample into `[0, 1]`, producing a valid image.
    pub fn clamped(&self) -> ImageTensor {
        ImageTensor(self.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    pub(crate) fn ensure_same_dims(&self, other: &Plane, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    pub(crate) fn add_assign(&mut self, other: &Plane) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// A grayscale image with every sample in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor(Plane);

impl ImageTensor {
    pub fn new(plane: Plane) -> Result<Self> {
        if let Some(v) = plane.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Range(format!("image sample {v} outside [0, 1]")));
        }
        Ok(ImageTensor(plane))
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Plane::new(height, width, data)?)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Plane::filled(height, width, value))
    }

    /// Maps 8-bit samples onto `[0, 1]` by `v / 255`.
    pub fn from_u8(height: usize, width: usize, pixels: &[u8]) -> Result<Self> {
        let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Ok(ImageTensor(Plane::new(height, width, data)?))
    }

    /// Quantizes to 8 bits with `round(v * 255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.0
            .data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }
}

impl Deref for ImageTensor {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

/// The two half-resolution descriptions of one source image.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptionPair {
    pub a: ImageTensor,
    pub b: ImageTensor,
}

impl DescriptionPair {
    pub fn new(a: ImageTensor, b: ImageTensor) -> Result<Self> {
        a.ensure_same_dims(&b, "description pair")?;
        Ok(DescriptionPair { a, b })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.a.dims()
    }

    /// Mean absolute difference between the two descriptions.
    pub fn mean_abs_difference(&self) -> f64 {
        let n = self.a.len().max(1) as f64;
        self.a
            .data()
            .iter()
            .zip(self.b.data())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(ImageTensor::from_vec(1, 2, vec![0.0, 1.5]).is_err());
        assert!(ImageTensor::from_vec(1, 2, vec![f64::NAN, 0.5]).is_err());
        assert!(ImageTensor::from_vec(1, 2, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn u8_mapping_endpoints() {
        let img = ImageTensor::from_u8(1, 3, &[0, 128, 255]).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(0, 2), 1.0);
        assert!((img.get(0, 1) - 0.50196).abs() < 1e-5);
        assert_eq!(img.get(0, 1), 128.0 / 255.0);
        assert_eq!(img.to_u8(), vec![0, 128, 255]);
    }

    #[test]
    fn pair_requires_equal_dims() {
        let a = ImageTensor::filled(2, 2, 0.0).unwrap();
        let b = ImageTensor::filled(2, 3, 0.0).unwrap();
        assert!(DescriptionPair::new(a, b).is_err());
    }

    #[test]
    fn clamping_maps_into_unit_range() {
        let p = Plane::new(1, 3, vec![-0.5, 0.25, 3.0]).unwrap();
        assert_eq!(p.clamped().data(), &[0.0, 0.25, 1.0]);
    }
}
