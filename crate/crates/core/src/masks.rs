//! Facial parse labels, transfer regions, soft masks and soft-mask fusion.
//!
//! Label maps are 8-bit single-channel images whose pixel value is the class
//! index of [`FacialClass`]. Regions group classes by what the transfer does
//! with them: skin-like classes receive makeup, eyes and the mouth cavity are
//! protected, hair and background are ignored.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::imgcore::{ensure_same, quantize, ImageError, RasterImage, ScalarField};
use crate::io::{decode_gray, read_bytes, IoError};

pub const CLASS_COUNT: usize = 11;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("label map is {found:?}, expected {expected:?}")]
    SizeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("undefined label {value} at ({x}, {y})")]
    UndefinedLabel { value: u8, x: usize, y: usize },
    #[error("soften sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("retention policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// The eleven facial parse classes. Discriminants are the on-disk values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum FacialClass {
    Background = 0,
    Hair = 1,
    LeftEyebrow = 2,
    RightEyebrow = 3,
    LeftEye = 4,
    RightEye = 5,
    Nose = 6,
    UpperLip = 7,
    LowerLip = 8,
    MouthCavity = 9,
    Skin = 10,
}

impl FacialClass {
    pub const ALL: [FacialClass; CLASS_COUNT] = [
        FacialClass::Background,
        FacialClass::Hair,
        FacialClass::LeftEyebrow,
        FacialClass::RightEyebrow,
        FacialClass::LeftEye,
        FacialClass::RightEye,
        FacialClass::Nose,
        FacialClass::UpperLip,
        FacialClass::LowerLip,
        FacialClass::MouthCavity,
        FacialClass::Skin,
    ];

    pub fn from_index(value: u8) -> Option<Self> {
        Self::ALL.get(value as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FacialClass::Background => "background",
            FacialClass::Hair => "hair",
            FacialClass::LeftEyebrow => "left_eyebrow",
            FacialClass::RightEyebrow => "right_eyebrow",
            FacialClass::LeftEye => "left_eye",
            FacialClass::RightEye => "right_eye",
            FacialClass::Nose => "nose",
            FacialClass::UpperLip => "upper_lip",
            FacialClass::LowerLip => "lower_lip",
            FacialClass::MouthCavity => "mouth_cavity",
            FacialClass::Skin => "skin",
        }
    }

    pub fn region(self) -> Region {
        use FacialClass::*;
        match self {
            Skin | LeftEyebrow | RightEyebrow | Nose | UpperLip | LowerLip => Region::Transfer,
            LeftEye | RightEye | MouthCavity => Region::Protected,
            Hair | Background => Region::Ignored,
        }
    }
}

#[derive(Serialize)]
struct ClassEntry {
    value: u8,
    name: &'static str,
    region: Region,
}

/// Machine-readable class table: value, name and region of every class.
pub fn class_table_json() -> String {
    let entries: Vec<ClassEntry> = FacialClass::ALL
        .iter()
        .map(|&c| ClassEntry {
            value: c as u8,
            name: c.name(),
            region: c.region(),
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "classes": entries })).expect("serializable")
}

/// Per-pixel facial class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<FacialClass>,
}

impl LabelMap {
    /// Validates raw class indices.
    pub fn new(width: usize, height: usize, raw: &[u8]) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height }.into());
        }
        if raw.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                actual: raw.len(),
            }
            .into());
        }
        let labels = raw
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                FacialClass::from_index(value).ok_or(MaskError::UndefinedLabel {
                    value,
                    x: i % width,
                    y: i / width,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// # Panics
    /// If the label count is not `width * height` or a dimension is zero.
    pub fn from_classes(width: usize, height: usize, labels: Vec<FacialClass>) -> Self {
        assert!(width > 0 && height > 0 && labels.len() == width * height);
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn filled(width: usize, height: usize, class: FacialClass) -> Self {
        Self::from_classes(width, height, vec![class; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> FacialClass) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::from_classes(width, height, labels)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn label(&self, x: usize, y: usize) -> FacialClass {
        self.labels[y * self.width + x]
    }

    pub fn classes(&self) -> &[FacialClass] {
        &self.labels
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.labels.iter().map(|&c| c as u8).collect()
    }
}

pub fn parse_label_map(bytes: &[u8], expected: (usize, usize)) -> Result<LabelMap, MaskError> {
    let (w, h, raw) = decode_gray(bytes)?;
    if (w, h) != expected {
        return Err(MaskError::SizeMismatch {
            expected,
            found: (w, h),
        });
    }
    LabelMap::new(w, h, &raw)
}

pub fn load_label_map(path: &Path, expected: (usize, usize)) -> Result<LabelMap, MaskError> {
    parse_label_map(&read_bytes(path)?, expected)
}

/// What the transfer does with a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Skin-like classes that receive detail, color and illumination transfer.
    Transfer,
    /// Eyes and mouth cavity; copied from the input.
    Protected,
    /// Hair and background; copied from the input.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    width: usize,
    height: usize,
    regions: Vec<Region>,
}

impl RegionMap {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Region) -> Self {
        assert!(width > 0 && height > 0);
        let mut regions = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                regions.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            regions,
        }
    }

    pub fn filled(width: usize, height: usize, region: Region) -> Self {
        Self::from_fn(width, height, |_, _| region)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn region(&self, x: usize, y: usize) -> Region {
        self.regions[y * self.width + x]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn is_transfer(&self, index: usize) -> bool {
        self.regions[index] == Region::Transfer
    }

    /// Transfer only where both maps agree on [`Region::Transfer`]; elsewhere
    /// the input region stands, with transfer pixels demoted to ignored.
    pub fn intersect_transfer(&self, reference: &RegionMap) -> Result<RegionMap, ImageError> {
        ensure_same(self.dims(), reference.dims())?;
        let regions = self
            .regions
            .iter()
            .zip(&reference.regions)
            .map(|(&a, &b)| match (a, b) {
                (Region::Transfer, Region::Transfer) => Region::Transfer,
                (Region::Transfer, _) => Region::Ignored,
                (other, _) => other,
            })
            .collect();
        Ok(RegionMap {
            width: self.width,
            height: self.height,
            regions,
        })
    }
}

pub fn classify_regions(labels: &LabelMap) -> RegionMap {
    RegionMap {
        width: labels.width,
        height: labels.height,
        regions: labels.labels.iter().map(|c| c.region()).collect(),
    }
}

/// Per-class probability fields; per pixel they sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    width: usize,
    height: usize,
    probs: Vec<ScalarField>,
}

impl SoftMask {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn probability(&self, class: FacialClass) -> &ScalarField {
        &self.probs[class.index()]
    }

    /// Hard one-hot mask of a label map.
    pub fn one_hot(labels: &LabelMap) -> Self {
        let (w, h) = labels.dims();
        let probs = FacialClass::ALL
            .iter()
            .map(|&c| ScalarField::from_raw(w, h, labels.labels.iter().map(|&l| f64::from(u8::from(l == c))).collect()))
            .collect();
        Self {
            width: w,
            height: h,
            probs,
        }
    }

    /// Most probable class at a pixel; ties resolve to the lower index.
    pub fn argmax(&self, x: usize, y: usize) -> FacialClass {
        let mut best = FacialClass::Background;
        let mut best_p = f64::NEG_INFINITY;
        for &c in &FacialClass::ALL {
            let p = self.probs[c.index()].get(x, y);
            if p > best_p {
                best = c;
                best_p = p;
            }
        }
        best
    }

    /// Summed probability of `classes` at flat index `i`.
    pub fn weight(&self, classes: ClassSet, i: usize) -> f64 {
        FacialClass::ALL
            .iter()
            .filter(|&&c| classes.contains(c))
            .map(|&c| self.probs[c.index()].values()[i])
            .sum()
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

fn blur_separable(values: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let xx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, kv) in kernel.iter().enumerate() {
            let yy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
            let src = &tmp[yy * w..(yy + 1) * w];
            for (o, s) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

/// Gaussian-softened one-hot encoding with replicated borders, renormalized
/// per pixel.
pub fn soften(labels: &LabelMap, sigma: f64) -> Result<SoftMask, MaskError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MaskError::InvalidSigma(sigma));
    }
    let (w, h) = labels.dims();
    let kernel = gaussian_kernel(sigma);
    let mut blurred: Vec<Vec<f64>> = FacialClass::ALL
        .iter()
        .map(|&c| {
            if labels.labels.contains(&c) {
                let one_hot: Vec<f64> = labels.labels.iter().map(|&l| f64::from(u8::from(l == c))).collect();
                blur_separable(&one_hot, w, h, &kernel)
            } else {
                vec![0.0; w * h]
            }
        })
        .collect();
    for i in 0..w * h {
        let total: f64 = blurred.iter().map(|ch| ch[i]).sum();
        for ch in blurred.iter_mut() {
            ch[i] = (ch[i] / total).clamp(0.0, 1.0);
        }
    }
    Ok(SoftMask {
        width: w,
        height: h,
        probs: blurred.into_iter().map(|v| ScalarField::from_raw(w, h, v)).collect(),
    })
}

/// Bit set over [`FacialClass`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassSet(u16);

impl ClassSet {
    pub const EMPTY: Self = Self(0);
    pub const ALL: Self = Self((1 << CLASS_COUNT) - 1);

    pub fn of(classes: &[FacialClass]) -> Self {
        Self(classes.iter().fold(0, |acc, &c| acc | 1 << c.index()))
    }

    pub fn contains(self, class: FacialClass) -> bool {
        self.0 & (1 << class.index()) != 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Self(self.0 & other.0)
    }

    pub fn classes(self) -> impl Iterator<Item = FacialClass> {
        FacialClass::ALL.into_iter().filter(move |&c| self.contains(c))
    }
}

/// Which classes the fused result takes from the input and which from the
/// initial makeup result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetentionPolicy {
    input: ClassSet,
    makeup: ClassSet,
}

impl Default for RetentionPolicy {
    /// Eyes, mouth, hair (bangs) and background from the input; skin,
    /// eyebrows, nose and lips from the makeup result.
    fn default() -> Self {
        use FacialClass::*;
        Self {
            input: ClassSet::of(&[LeftEye, RightEye, MouthCavity, Hair, Background]),
            makeup: ClassSet::of(&[Skin, LeftEyebrow, RightEyebrow, Nose, UpperLip, LowerLip]),
        }
    }
}

impl RetentionPolicy {
    pub fn new(input: ClassSet, makeup: ClassSet) -> Result<Self, MaskError> {
        if input.intersection(makeup) != ClassSet::EMPTY {
            return Err(MaskError::Policy("input and makeup class sets overlap".into()));
        }
        if input.union(makeup) != ClassSet::ALL {
            return Err(MaskError::Policy("class sets do not cover all classes".into()));
        }
        Ok(Self { input, makeup })
    }

    pub fn input_classes(&self) -> ClassSet {
        self.input
    }

    pub fn makeup_classes(&self) -> ClassSet {
        self.makeup
    }
}

/// Per-pixel convex blend of `input` and `makeup` weighted by the soft mask
/// probability mass of each side's retained classes.
pub fn fuse(
    input: &RasterImage,
    makeup: &RasterImage,
    soft: &SoftMask,
    policy: &RetentionPolicy,
) -> Result<RasterImage, MaskError> {
    ensure_same(input.dims(), makeup.dims())?;
    ensure_same(input.dims(), soft.dims())?;
    let (w, h) = input.dims();
    let (a, b) = (input.pixels(), makeup.pixels());
    let mut pixels = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let w_in = soft.weight(policy.input, i);
        let w_mk = soft.weight(policy.makeup, i);
        for c in 0..3 {
            let v = w_in * f64::from(a[i * 3 + c]) + w_mk * f64::from(b[i * 3 + c]);
            pixels.push(quantize(v));
        }
    }
    Ok(RasterImage::new(w, h, pixels)?)
}
