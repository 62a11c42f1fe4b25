use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest shift, in pixels, along each axis.
pub const MAX_SHIFT: i64 = 2;
/// Largest rotation, in degrees, either way.
pub const MAX_ROTATION_DEGREES: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Hflip,
    Shift,
    Rotate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub transforms: Vec<Transform>,
    /// Chance that each enabled transform fires; 1 forces all of them.
    pub probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            transforms: vec![Transform::Hflip, Transform::Shift, Transform::Rotate],
            probability: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            transforms: Vec::new(),
            probability: 0.5,
        }
    }

    /// Every transform, always applied.
    pub fn forced() -> Self {
        Self {
            probability: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::Config(format!(
                "augmentation probability must be in [0, 1], got {}",
                self.probability
            )));
        }
        Ok(())
    }
}

/// Randomly transformed copy of a `[C, H, W]` image.
///
/// Transforms run in the order hflip, shift, rotate, each firing with the
/// configured probability. Shifts fill with zeros; rotation is about the
/// image center with nearest-neighbor sampling and zero fill, so output
/// values are input values or zero.
pub fn augment<R: Rng + ?Sized>(image: &Tensor<f32>, cfg: &AugmentConfig, rng: &mut R) -> Result<Tensor<f32>> {
    image.expect_rank(3, "augment input")?;
    let mut sorted = cfg.transforms.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = image.clone();
    for t in sorted {
        if cfg.probability < 1.0 && rng.random::<f64>() >= cfg.probability {
            continue;
        }
        out = match t {
            Transform::Hflip => hflip(&out),
            Transform::Shift => {
                let dy = rng.random_range(-MAX_SHIFT..=MAX_SHIFT);
                let dx = rng.random_range(-MAX_SHIFT..=MAX_SHIFT);
                shift(&out, dy, dx)
            }
            Transform::Rotate => {
                let deg = rng.random_range(-MAX_ROTATION_DEGREES..=MAX_ROTATION_DEGREES);
                rotate(&out, deg)
            }
        };
    }
    Ok(out)
}

fn dims(t: &Tensor<f32>) -> (usize, usize, usize) {
    (t.shape()[0], t.shape()[1], t.shape()[2])
}

/// Resamples every channel with `src(y, x) -> Option<(sy, sx)>`.
fn remap(t: &Tensor<f32>, src: impl Fn(usize, usize) -> Option<(usize, usize)>) -> Tensor<f32> {
    let (c, h, w) = dims(t);
    let d = t.data();
    let mut out = vec![0.0; d.len()];
    for y in 0..h {
        for x in 0..w {
            if let Some((sy, sx)) = src(y, x) {
                for ch in 0..c {
                    out[(ch * h + y) * w + x] = d[(ch * h + sy) * w + sx];
                }
            }
        }
    }
    Tensor::new(t.shape(), out).expect("same shape")
}

pub fn hflip(t: &Tensor<f32>) -> Tensor<f32> {
    let w = dims(t).2;
    remap(t, |y, x| Some((y, w - 1 - x)))
}

/// Content moves down by `dy` and right by `dx`.
pub fn shift(t: &Tensor<f32>, dy: i64, dx: i64) -> Tensor<f32> {
    let (_, h, w) = dims(t);
    remap(t, |y, x| {
        let sy = y as i64 - dy;
        let sx = x as i64 - dx;
        ((0..h as i64).contains(&sy) && (0..w as i64).contains(&sx)).then_some((sy as usize, sx as usize))
    })
}

/// Rotation about the image center by `degrees`, clockwise as displayed (y down).
pub fn rotate(t: &Tensor<f32>, degrees: f64) -> Tensor<f32> {
    let (_, h, w) = dims(t);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    remap(t, |y, x| {
        let (ry, rx) = (y as f64 - cy, x as f64 - cx);
        // Inverse map: rotate the output coordinate back by -θ.
        let sy = (cy + cos * ry - sin * rx).round();
        let sx = (cx + sin * ry + cos * rx).round();
        (sy >= 0.0 && sx >= 0.0 && sy < h as f64 && sx < w as f64).then_some((sy as usize, sx as usize))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp() -> Tensor<f32> {
        Tensor::new([2, 3, 4], (0..24).map(|v| v as f32 / 24.0).collect()).unwrap()
    }

    #[test]
    fn empty_set_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(augment(&ramp(), &AugmentConfig::none(), &mut rng).unwrap(), ramp());
    }

    #[test]
    fn forced_hflip_twice() {
        let cfg = AugmentConfig {
            transforms: vec![Transform::Hflip],
            probability: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let once = augment(&ramp(), &cfg, &mut rng).unwrap();
        assert_ne!(once, ramp());
        assert_eq!(once.data()[..4], [3.0 / 24.0, 2.0 / 24.0, 1.0 / 24.0, 0.0]);
        assert_eq!(augment(&once, &cfg, &mut rng).unwrap(), ramp());
    }

    #[test]
    fn shift_fills_zero() {
        let s = shift(&ramp(), 1, -1);
        // Row 0 is empty; row 1 holds row 0 moved left by one.
        assert_eq!(s.data()[..8], [0.0, 0.0, 0.0, 0.0, 1.0 / 24.0, 2.0 / 24.0, 3.0 / 24.0, 0.0]);
    }

    #[test]
    fn rotation_examples() {
        let img = ramp();
        assert_eq!(rotate(&img, 0.0), img);
        // 180° about the center maps (y, x) to (h-1-y, w-1-x).
        let r = rotate(&img, 180.0);
        assert_eq!(r.data()[0], img.data()[11]);
        let sq = Tensor::new([1, 3, 3], (0..9).map(|v| v as f32).collect()).unwrap();
        let q = rotate(&sq, 90.0);
        // Top row ends up as the right column.
        assert_eq!(q.data(), &[6.0, 3.0, 0.0, 7.0, 4.0, 1.0, 8.0, 5.0, 2.0]);
    }

    #[test]
    fn values_stay_in_range_and_seeded() {
        let img = ramp();
        let cfg = AugmentConfig::forced();
        let a = augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        for v in a.data() {
            assert!(*v == 0.0 || img.data().contains(v));
        }
    }
}
