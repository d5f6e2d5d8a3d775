use crate::error::Result;
use crate::imaging::Plane;

/// PSNR on the 8-bit scale. Identical inputs yield `f64::INFINITY`.
pub fn psnr(x: &Plane, y: &Plane) -> Result<f64> {
    x.ensure_same_dims(y, "psnr")?;
    let mse = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| {
            let d = (a - b) * 255.0;
            d * d
        })
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::ImageTensor;

    fn shifted(base: f64, delta: f64) -> (ImageTensor, ImageTensor) {
        let x = ImageTensor::filled(8, 8, base).unwrap();
        let y = ImageTensor::filled(8, 8, base + delta).unwrap();
        (x, y)
    }

    #[test]
    fn identical_is_infinite() {
        let (x, _) = shifted(0.3, 0.0);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn closed_form_offsets() {
        let (x, y) = shifted(0.2, 16.0 / 255.0);
        let expected = 10.0 * (255.0f64.powi(2) / 256.0).log10();
        assert!((psnr(&x, &y).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 24.05).abs() < 0.01);

        let (x, y) = shifted(0.2, 1.0 / 255.0);
        assert!((psnr(&x, &y).unwrap() - 48.1308).abs() < 1e-3);
    }

    #[test]
    fn symmetric_and_rejects_mismatch() {
        let x = Plane::from_fn(4, 4, |i, j| (i + j) as f64 / 8.0);
        let y = Plane::from_fn(4, 4, |i, j| (i * j) as f64 / 9.0);
        assert_eq!(psnr(&x, &y).unwrap(), psnr(&y, &x).unwrap());
        assert!(psnr(&x, &Plane::zeros(4, 5)).is_err());
    }
}
