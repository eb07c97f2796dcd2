//! Image containers and sRGB <-> CIELAB conversion.
//!
//! All rasters and fields are row-major with a top-left origin. CIELAB values
//! are kept as `f64` for the whole pipeline; quantization to 8 bits happens
//! only when converting back to [`RasterImage`].

use thiserror::Error;

/// Structural errors shared by every module that handles pixel buffers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("buffer holds {actual} samples, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
}

fn check_dims(width: usize, height: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyDimensions { width, height });
    }
    Ok(())
}

pub(crate) fn ensure_same(
    left: (usize, usize),
    right: (usize, usize),
) -> Result<(), ImageError> {
    if left != right {
        return Err(ImageError::DimensionMismatch { left, right });
    }
    Ok(())
}

/// A pixel position, column `x` and row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// 8-bit sRGB raster, three interleaved channels per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Uniformly filled image.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, at: PixelCoord) -> [u8; 3] {
        let i = (at.y * self.width + at.x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, at: PixelCoord, rgb: [u8; 3]) {
        let i = (at.y * self.width + at.x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Iterates pixels in row-major order.
    pub fn iter_pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Row-major scalar samples. Carrier for lightness, layers and mask weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    /// Builds a field without re-validating; callers guarantee the length and
    /// finiteness invariants.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn at(&self, p: PixelCoord) -> f64 {
        self.get(p.x, p.y)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean norm of all samples.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Horizontally mirrored copy.
    pub fn mirrored(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(self.width) {
            values.extend(row.iter().rev());
        }
        Self::from_raw(self.width, self.height, values)
    }
}

/// Floating-point CIELAB image (D65 white, 2 degree observer).
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    l: ScalarField,
    a: ScalarField,
    b: ScalarField,
}

impl LabImage {
    pub fn width(&self) -> usize {
        self.l.width
    }

    pub fn height(&self) -> usize {
        self.l.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.l.dims()
    }

    pub fn l(&self) -> &ScalarField {
        &self.l
    }

    pub fn a(&self) -> &ScalarField {
        &self.a
    }

    pub fn b(&self) -> &ScalarField {
        &self.b
    }

    pub fn pixel(&self, at: PixelCoord) -> [f64; 3] {
        [self.l.at(at), self.a.at(at), self.b.at(at)]
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let n = width * height;
        let (mut l, mut a, mut b) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for y in 0..height {
            for x in 0..width {
                let [pl, pa, pb] = f(x, y);
                l.push(pl);
                a.push(pa);
                b.push(pb);
            }
        }
        merge_lab(
            ScalarField::new(width, height, l)?,
            ScalarField::new(width, height, a)?,
            ScalarField::new(width, height, b)?,
        )
    }
}

// sRGB primaries to XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];

// Reference white as the image of sRGB white, so white maps to a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

/// Converts one 8-bit sRGB triple to CIELAB.
pub fn srgb_to_lab_pixel(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| srgb_to_linear(f64::from(c) / 255.0));
    let mut xyz = [0.0; 3];
    for (row, out) in RGB_TO_XYZ.iter().zip(xyz.iter_mut()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Converts one CIELAB sample to 8-bit sRGB, clamping out-of-gamut results.
pub fn lab_to_srgb_pixel(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE[0],
        lab_f_inv(fy) * WHITE[1],
        lab_f_inv(fz) * WHITE[2],
    ];
    let mut out = [0u8; 3];
    for (row, o) in XYZ_TO_RGB.iter().zip(out.iter_mut()) {
        let lin = (row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2]).clamp(0.0, 1.0);
        *o = quantize(linear_to_srgb(lin) * 255.0);
    }
    out
}

/// Rounds to the nearest 8-bit value, clamping to [0, 255]. NaN maps to 0.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

pub fn rgb_to_lab(img: &RasterImage) -> LabImage {
    let (w, h) = img.dims();
    let n = w * h;
    let (mut l, mut a, mut b) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for px in img.iter_pixels() {
        let [pl, pa, pb] = srgb_to_lab_pixel(px);
        l.push(pl);
        a.push(pa);
        b.push(pb);
    }
    LabImage {
        l: ScalarField::from_raw(w, h, l),
        a: ScalarField::from_raw(w, h, a),
        b: ScalarField::from_raw(w, h, b),
    }
}

pub fn lab_to_rgb(img: &LabImage) -> RasterImage {
    let (w, h) = img.dims();
    let mut pixels = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        pixels.extend_from_slice(&lab_to_srgb_pixel([
            img.l.values[i],
            img.a.values[i],
            img.b.values[i],
        ]));
    }
    RasterImage {
        width: w,
        height: h,
        pixels,
    }
}

/// Splits a Lab image into its lightness and two chroma fields.
pub fn split_luminance(img: &LabImage) -> (ScalarField, ScalarField, ScalarField) {
    (img.l.clone(), img.a.clone(), img.b.clone())
}

pub fn merge_lab(l: ScalarField, a: ScalarField, b: ScalarField) -> Result<LabImage, ImageError> {
    ensure_same(l.dims(), a.dims())?;
    ensure_same(l.dims(), b.dims())?;
    Ok(LabImage { l, a, b })
}

/// Averages `factor`×`factor` blocks; a partial last row or column of
/// blocks averages whatever pixels it covers.
pub fn box_downsample(img: &RasterImage, factor: usize) -> RasterImage {
    let factor = factor.max(1);
    let (w, h) = img.dims();
    let (ow, oh) = (w.div_ceil(factor), h.div_ceil(factor));
    RasterImage::from_fn(ow, oh, |ox, oy| {
        let mut sum = [0u32; 3];
        let mut n = 0;
        for y in oy * factor..((oy + 1) * factor).min(h) {
            for x in ox * factor..((ox + 1) * factor).min(w) {
                let p = img.pixel(PixelCoord::new(x, y));
                for c in 0..3 {
                    sum[c] += u32::from(p[c]);
                }
                n += 1;
            }
        }
        sum.map(|s| ((s + n / 2) / n) as u8)
    })
    .expect("non-empty source gives non-empty output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_averages_blocks() {
        let img = RasterImage::from_fn(5, 2, |x, _| [x as u8 * 10, 0, 255]).unwrap();
        let small = box_downsample(&img, 2);
        assert_eq!(small.dims(), (3, 1));
        assert_eq!(small.pixel(PixelCoord::new(0, 0)), [5, 0, 255]);
        assert_eq!(small.pixel(PixelCoord::new(2, 0)), [40, 0, 255]);
    }

    fn lab_of(rgb: [u8; 3]) -> [f64; 3] {
        let img = RasterImage::filled(1, 1, rgb).unwrap();
        rgb_to_lab(&img).pixel(PixelCoord::new(0, 0))
    }

    #[test]
    fn white_and_black() {
        let [l, a, b] = lab_of([255, 255, 255]);
        assert!((l - 100.0).abs() < 1e-9);
        assert!(a.abs() <= 0.01 && b.abs() <= 0.01);
        assert_eq!(lab_of([0, 0, 0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn pure_lightness_maps_to_white() {
        let lab = LabImage::from_fn(1, 1, |_, _| [100.0, 0.0, 0.0]).unwrap();
        assert_eq!(lab_to_rgb(&lab).pixel(PixelCoord::new(0, 0)), [255, 255, 255]);
    }

    #[test]
    fn out_of_gamut_is_clamped() {
        let lab = LabImage::from_fn(1, 1, |_, _| [50.0, 200.0, 0.0]).unwrap();
        let rgb = lab_to_rgb(&lab).pixel(PixelCoord::new(0, 0));
        // Strong +a saturates red and zeroes green.
        assert_eq!(rgb[1], 0);
        assert_eq!(rgb[0], 255);
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            RasterImage::new(0, 3, vec![]),
            Err(ImageError::EmptyDimensions { .. })
        ));
        assert!(matches!(
            RasterImage::new(2, 2, vec![0; 11]),
            Err(ImageError::BufferLength { expected: 12, actual: 11 })
        ));
        assert!(matches!(
            ScalarField::new(1, 1, vec![f64::NAN]),
            Err(ImageError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn split_merge_round_trip() {
        let img = RasterImage::from_fn(2, 1, |x, _| if x == 0 { [10, 200, 30] } else { [250, 5, 90] })
            .unwrap();
        let lab = rgb_to_lab(&img);
        let (l, a, b) = split_luminance(&lab);
        assert_eq!(l.get(0, 0), lab.pixel(PixelCoord::new(0, 0))[0]);
        assert_eq!(a.get(1, 0), lab.pixel(PixelCoord::new(1, 0))[1]);
        assert_eq!(merge_lab(l, a, b).unwrap(), lab);
    }

    #[test]
    fn constant_gray_has_zero_chroma() {
        let lab = rgb_to_lab(&RasterImage::filled(3, 2, [128, 128, 128]).unwrap());
        let (l, a, b) = split_luminance(&lab);
        assert!(l.values().iter().all(|&v| v == l.get(0, 0)));
        assert!(a.values().iter().chain(b.values()).all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn merge_rejects_mismatch() {
        let f = ScalarField::filled(2, 2, 0.0).unwrap();
        let g = ScalarField::filled(2, 3, 0.0).unwrap();
        assert!(matches!(
            merge_lab(f.clone(), f.clone(), g),
            Err(ImageError::DimensionMismatch { .. })
        ));
        let black = merge_lab(f.clone(), f.clone(), f).unwrap();
        assert!(lab_to_rgb(&black).pixels().iter().all(|&v| v == 0));
    }

    #[test]
    fn mirrored_reverses_rows() {
        let f = ScalarField::from_fn(3, 2, |x, y| (x + 10 * y) as f64).unwrap();
        assert_eq!(f.mirrored().values(), &[2.0, 1.0, 0.0, 12.0, 11.0, 10.0]);
    }
}
