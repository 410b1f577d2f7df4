//! Uniform samplers for balls and cubes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{invalid, Error, Result};

/// Uniform point in the ball `{x : |x - center| <= radius}`.
///
/// Direction from a normalised Gaussian vector, radius from `u^(1/n)`.
pub fn sample_uniform_ball<R: Rng + ?Sized>(
    n: usize,
    center: &[f64],
    radius: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n", "dimension must be >= 1"));
    }
    if center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: center.len(),
        });
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid("radius", format!("must be positive, got {radius}")));
    }
    let mut out = vec![0.0; n];
    fill_ball(&mut out, center, radius, rng);
    Ok(out)
}

pub(crate) fn fill_ball<R: Rng + ?Sized>(
    out: &mut [f64],
    center: &[f64],
    radius: f64,
    rng: &mut R,
) {
    let n = out.len();
    let norm = loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v = g;
            s += g * g;
        }
        if s > 0.0 {
            break s.sqrt();
        }
    };
    // u in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    let scale = radius * u.powf(1.0 / n as f64) / norm;
    for (v, c) in out.iter_mut().zip(center) {
        *v = c + scale * *v;
    }
}

/// Uniform point in `[-half_width, half_width]^n`.
pub fn sample_uniform_cube<R: Rng + ?Sized>(
    n: usize,
    half_width: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n", "dimension must be >= 1"));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(invalid(
            "half_width",
            format!("must be positive, got {half_width}"),
        ));
    }
    let mut out = vec![0.0; n];
    fill_cube(&mut out, half_width, rng);
    Ok(out)
}

pub(crate) fn fill_cube<R: Rng + ?Sized>(out: &mut [f64], half_width: f64, rng: &mut R) {
    let dist = Uniform::new_inclusive(-half_width, half_width).expect("validated half width");
    for v in out.iter_mut() {
        *v = dist.sample(rng);
    }
}
