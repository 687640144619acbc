//! Additive Gaussian depth noise on foreground pixels.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::render::DepthImage;

/// Closest a noisy foreground value may come to the background depth, so
/// noise never changes the foreground mask.
pub const MASK_MARGIN: f32 = 0.5;

/// Add i.i.d. N(0, sigma^2) noise (mm) to every foreground pixel, clamped to
/// `[MASK_MARGIN, background - MASK_MARGIN]`. Background pixels are left
/// alone. `sigma = 0` returns the image unchanged without touching `rng`.
pub fn add_noise<R: Rng + ?Sized>(image: &DepthImage, sigma: f64, rng: &mut R) -> Result<DepthImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Data(format!("noise sigma must be finite and non-negative, got {sigma}")));
    }
    let mut out = image.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let hi = image.background - MASK_MARGIN;
    for d in out.values.iter_mut() {
        if *d < image.background {
            let noisy = (f64::from(*d) + normal.sample(rng)) as f32;
            *d = noisy.clamp(MASK_MARGIN, hi);
        }
    }
    Ok(out)
}
