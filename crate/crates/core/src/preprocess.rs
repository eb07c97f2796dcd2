//! Input beautification: three-band color balance (whitening) and bilateral
//! smoothing in CIELAB.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{quantize, srgb_to_lab_pixel, LabImage, RasterImage, ScalarField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("color balance offset {value} for {band} is outside [-1, 1]")]
    OffsetRange { band: &'static str, value: f64 },
    #[error("invalid bilateral parameters: {0}")]
    Bilateral(String),
    #[error("mask holds {actual} entries, expected {expected}")]
    MaskLength { expected: usize, actual: usize },
}

/// Signed per-channel offsets (red, green, blue) for each tonal band, as a
/// fraction of the full 8-bit range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColorBalanceParams {
    pub shadows: [f64; 3],
    pub midtones: [f64; 3],
    pub highlights: [f64; 3],
}

impl Default for ColorBalanceParams {
    fn default() -> Self {
        Self {
            shadows: [0.0; 3],
            midtones: [0.04, 0.03, 0.02],
            highlights: [0.0; 3],
        }
    }
}

impl ColorBalanceParams {
    pub const NEUTRAL: Self = Self {
        shadows: [0.0; 3],
        midtones: [0.0; 3],
        highlights: [0.0; 3],
    };

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bands = [
            ("shadows", &self.shadows),
            ("midtones", &self.midtones),
            ("highlights", &self.highlights),
        ];
        for (band, offsets) in bands {
            for &value in offsets {
                if !(-1.0..=1.0).contains(&value) {
                    return Err(PreprocessError::OffsetRange { band, value });
                }
            }
        }
        Ok(())
    }
}

/// Triangular tonal weights `[shadows, midtones, highlights]` centered at
/// lightness 0, 50 and 100. They sum to one for every lightness.
pub fn band_weights(lightness: f64) -> [f64; 3] {
    let l = lightness.clamp(0.0, 100.0);
    let shadows = (1.0 - l / 50.0).max(0.0);
    let highlights = (l / 50.0 - 1.0).max(0.0);
    [shadows, 1.0 - shadows - highlights, highlights]
}

pub fn color_balance(
    img: &RasterImage,
    params: &ColorBalanceParams,
) -> Result<RasterImage, PreprocessError> {
    params.validate()?;
    let (w, h) = img.dims();
    let mut pixels = Vec::with_capacity(w * h * 3);
    for px in img.iter_pixels() {
        let [ws, wm, wh] = band_weights(srgb_to_lab_pixel(px)[0]);
        for c in 0..3 {
            let shift = ws * params.shadows[c] + wm * params.midtones[c] + wh * params.highlights[c];
            pixels.push(quantize(f64::from(px[c]) + 255.0 * shift));
        }
    }
    Ok(RasterImage::new(w, h, pixels).expect("same dimensions as input"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilateralParams {
    pub sigma_spatial: f64,
    /// Gaussian width on CIELAB Euclidean distance.
    pub sigma_range: f64,
    pub radius: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self {
            sigma_spatial: 4.0,
            sigma_range: 8.0,
            radius: 8,
        }
    }
}

impl BilateralParams {
    pub fn new(sigma_spatial: f64, sigma_range: f64, radius: usize) -> Result<Self, PreprocessError> {
        let p = Self {
            sigma_spatial,
            sigma_range,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.sigma_spatial > 0.0 && self.sigma_spatial.is_finite()) {
            return Err(PreprocessError::Bilateral(format!(
                "sigma_spatial must be positive, got {}",
                self.sigma_spatial
            )));
        }
        if !(self.sigma_range > 0.0 && self.sigma_range.is_finite()) {
            return Err(PreprocessError::Bilateral(format!(
                "sigma_range must be positive, got {}",
                self.sigma_range
            )));
        }
        let min_radius = (2.0 * self.sigma_spatial).ceil() as usize;
        if self.radius < min_radius.max(1) {
            return Err(PreprocessError::Bilateral(format!(
                "radius {} is below ceil(2 * sigma_spatial) = {min_radius}",
                self.radius
            )));
        }
        Ok(())
    }
}

pub fn bilateral_filter(img: &LabImage, params: &BilateralParams) -> Result<LabImage, PreprocessError> {
    bilateral_filter_masked(img, params, None)
}

/// Bilateral filter restricted to `mask`: pixels outside it are copied and
/// never contribute to filtered neighbors. `None` filters the whole frame.
pub fn bilateral_filter_masked(
    img: &LabImage,
    params: &BilateralParams,
    mask: Option<&[bool]>,
) -> Result<LabImage, PreprocessError> {
    params.validate()?;
    let (w, h) = img.dims();
    if let Some(m) = mask {
        if m.len() != w * h {
            return Err(PreprocessError::MaskLength {
                expected: w * h,
                actual: m.len(),
            });
        }
    }
    let inside = |i: usize| mask.is_none_or(|m| m[i]);

    let r = params.radius as isize;
    let side = 2 * params.radius + 1;
    let spatial_coeff = -0.5 / (params.sigma_spatial * params.sigma_spatial);
    let mut spatial = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            spatial.push((spatial_coeff * (dx * dx + dy * dy) as f64).exp());
        }
    }
    let range_coeff = -0.5 / (params.sigma_range * params.sigma_range);

    let (l, a, b) = (img.l().values(), img.a().values(), img.b().values());
    let mut out = [l.to_vec(), a.to_vec(), b.to_vec()];
    for y in 0..h {
        for x in 0..w {
            let center = y * w + x;
            if !inside(center) {
                continue;
            }
            let c = [l[center], a[center], b[center]];
            let mut acc = [0.0; 3];
            let mut norm = 0.0;
            let mut tap = 0;
            for dy in -r..=r {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let q = yy * w + xx;
                    let ws = spatial[tap];
                    tap += 1;
                    if !inside(q) {
                        continue;
                    }
                    let d = [l[q] - c[0], a[q] - c[1], b[q] - c[2]];
                    let wgt = ws * (range_coeff * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2])).exp();
                    acc[0] += wgt * l[q];
                    acc[1] += wgt * a[q];
                    acc[2] += wgt * b[q];
                    norm += wgt;
                }
            }
            for ch in 0..3 {
                out[ch][center] = acc[ch] / norm;
            }
        }
    }
    let [lo, ao, bo] = out;
    Ok(crate::imgcore::merge_lab(
        ScalarField::from_raw(w, h, lo),
        ScalarField::from_raw(w, h, ao),
        ScalarField::from_raw(w, h, bo),
    )
    .expect("fields share dimensions"))
}
