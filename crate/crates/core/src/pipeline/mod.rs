//! End-to-end makeup transfer.
//!
//! Stages, in order: preprocess the input (whitening, skin smoothing), warp
//! the reference face and its labels onto the input geometry, decompose both
//! into layers, transfer layers, convert back to sRGB and, in air-bangs mode,
//! fuse input and result through soft masks.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{load_landmarks, AlignError, LandmarkSet, PiecewiseAffineWarp};
use crate::imgcore::{lab_to_rgb, quantize, rgb_to_lab, ImageError, LabImage, RasterImage, ScalarField};
use crate::io::{encode_gray_png, encode_png, read_raster, write_atomically, write_bytes, IoError};
use crate::layers::{decompose_with_stats, LayerSet, WlsError, WlsParams};
use crate::masks::{classify_regions, fuse, load_label_map, soften, FacialClass, LabelMap, MaskError, Region, RegionMap, RetentionPolicy, SoftMask};
use crate::preprocess::{bilateral_filter_masked, color_balance, BilateralParams, ColorBalanceParams, PreprocessError};
use crate::transfer::{apply_transfer, region_histogram, TransferError, TransferParams};

pub use config::{merge_tables, FacePaths, PipelineConfig};
pub use report::{PipelineReport, SolverReport, Stage, StageTiming};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0}")]
    Config(String),
    #[error("{what} file not found: {path}")]
    MissingFile { what: &'static str, path: PathBuf },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Wls(#[from] WlsError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

/// A failure tagged with the stage that raised it.
#[derive(Debug, Error)]
#[error("[{stage}] {error}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub error: StageError,
}

impl PipelineError {
    pub fn new(stage: Stage, error: impl Into<StageError>) -> Self {
        Self {
            stage,
            error: error.into(),
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

fn default_soften_sigma() -> f64 {
    6.0
}

/// Every tunable parameter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    #[serde(default)]
    pub transfer: TransferParams,
    #[serde(default)]
    pub wls: WlsParams,
    #[serde(default)]
    pub whitening: ColorBalanceParams,
    #[serde(default)]
    pub smoothing: BilateralParams,
    #[serde(default)]
    pub skip_preprocess: bool,
    #[serde(default)]
    pub airbangs: bool,
    #[serde(default = "default_soften_sigma")]
    pub soften_sigma: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            transfer: TransferParams::default(),
            wls: WlsParams::default(),
            whitening: ColorBalanceParams::default(),
            smoothing: BilateralParams::default(),
            skip_preprocess: false,
            airbangs: false,
            soften_sigma: default_soften_sigma(),
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.transfer.validate().at(Stage::Config)?;
        self.wls.validate().at(Stage::Config)?;
        self.whitening.validate().at(Stage::Config)?;
        self.smoothing.validate().at(Stage::Config)?;
        if !(self.soften_sigma > 0.0 && self.soften_sigma.is_finite()) {
            return Err(PipelineError::new(Stage::Config, MaskError::InvalidSigma(self.soften_sigma)));
        }
        Ok(())
    }
}

/// One face: photo, landmarks and parse labels, all in the same frame.
#[derive(Debug, Clone)]
pub struct FaceBundle {
    pub image: RasterImage,
    pub landmarks: LandmarkSet,
    pub labels: LabelMap,
}

impl FaceBundle {
    pub fn new(image: RasterImage, landmarks: LandmarkSet, labels: LabelMap) -> Result<Self, ImageError> {
        crate::imgcore::ensure_same(image.dims(), labels.dims())?;
        Ok(Self {
            image,
            landmarks,
            labels,
        })
    }

    pub fn load(paths: &FacePaths) -> Result<Self, PipelineError> {
        let image = read_raster(&paths.image).at(Stage::Load)?;
        let (w, h) = image.dims();
        let landmarks = load_landmarks(&paths.landmarks, w, h).at(Stage::Load)?;
        let labels = load_label_map(&paths.labels, (w, h)).at(Stage::Load)?;
        Ok(Self {
            image,
            landmarks,
            labels,
        })
    }
}

/// Intermediate products kept for inspection.
#[derive(Debug, Clone)]
pub struct DebugArtifacts {
    pub warped_reference: RasterImage,
    pub warped_reference_labels: LabelMap,
    pub input_layers: LayerSet,
    pub reference_layers: LayerSet,
    pub regions: RegionMap,
    pub soft_mask: Option<SoftMask>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub image: RasterImage,
    pub report: PipelineReport,
    pub debug: Option<DebugArtifacts>,
}

fn timed<T>(report: &mut PipelineReport, stage: Stage, f: impl FnOnce() -> Result<T, PipelineError>) -> Result<T, PipelineError> {
    let start = Instant::now();
    let out = f()?;
    report.stages.push(StageTiming {
        stage,
        duration: start.elapsed(),
    });
    Ok(out)
}

fn skin_mask(labels: &LabelMap) -> Vec<bool> {
    labels
        .classes()
        .iter()
        .map(|&c| matches!(c, FacialClass::Skin | FacialClass::Nose))
        .collect()
}

/// Input preprocessing: three-band whitening, then bilateral smoothing of
/// skin pixels in CIELAB.
pub fn preprocess_input(image: &RasterImage, labels: Option<&LabelMap>, settings: &Settings) -> Result<LabImage, PreprocessError> {
    let whitened = color_balance(image, &settings.whitening)?;
    let lab = rgb_to_lab(&whitened);
    let mask = labels.map(skin_mask);
    bilateral_filter_masked(&lab, &settings.smoothing, mask.as_deref())
}

/// Runs every stage on in-memory inputs. The result depends only on the
/// arguments, so identical inputs give identical pixels.
pub fn run_in_memory(
    input: &FaceBundle,
    reference: &FaceBundle,
    settings: &Settings,
    keep_debug: bool,
) -> Result<PipelineOutcome, PipelineError> {
    settings.validate()?;
    let mut report = PipelineReport::default();
    let dims = input.image.dims();

    let input_lab = if settings.skip_preprocess {
        rgb_to_lab(&input.image)
    } else {
        timed(&mut report, Stage::Preprocess, || {
            preprocess_input(&input.image, Some(&input.labels), settings).at(Stage::Preprocess)
        })?
    };

    let (warped_reference, warped_labels) = timed(&mut report, Stage::Align, || {
        let warp = PiecewiseAffineWarp::new(&reference.landmarks, reference.image.dims(), &input.landmarks, dims)
            .at(Stage::Align)?;
        Ok((warp.warp_image(&reference.image), warp.warp_labels(&reference.labels)))
    })?;

    let (input_layers, reference_layers, stats) = timed(&mut report, Stage::Decompose, || {
        let (i, si) = decompose_with_stats(&input_lab, &settings.wls).at(Stage::Decompose)?;
        let (r, sr) = decompose_with_stats(&rgb_to_lab(&warped_reference), &settings.wls).at(Stage::Decompose)?;
        Ok((i, r, [si, sr]))
    })?;
    let [si, sr] = stats;
    report.solver.push(SolverReport { image: "input", stats: si });
    report.solver.push(SolverReport { image: "reference", stats: sr });

    let (regions, transferred) = timed(&mut report, Stage::Transfer, || {
        let regions = classify_regions(&input.labels)
            .intersect_transfer(&classify_regions(&warped_labels))
            .at(Stage::Transfer)?;
        let lab = apply_transfer(&input_layers, &reference_layers, &regions, &settings.transfer).at(Stage::Transfer)?;
        Ok((regions, lab))
    })?;
    if region_histogram(&regions)[0] == 0 {
        report
            .warnings
            .push("no pixel is skin-like in both faces; output equals the preprocessed input".into());
    }

    let makeup = timed(&mut report, Stage::Recompose, || Ok(lab_to_rgb(&transferred)))?;

    let (image, soft_mask) = if settings.airbangs {
        timed(&mut report, Stage::Fuse, || {
            let soft = soften(&input.labels, settings.soften_sigma).at(Stage::Fuse)?;
            let base = lab_to_rgb(&input_lab);
            let fused = fuse(&base, &makeup, &soft, &RetentionPolicy::default()).at(Stage::Fuse)?;
            Ok((fused, Some(soft)))
        })?
    } else {
        (makeup, None)
    };

    let debug = keep_debug.then_some(DebugArtifacts {
        warped_reference,
        warped_reference_labels: warped_labels,
        input_layers,
        reference_layers,
        regions,
        soft_mask,
    });
    Ok(PipelineOutcome { image, report, debug })
}

fn gray_png(field: &ScalarField, encode: impl Fn(f64) -> f64) -> Result<Vec<u8>, IoError> {
    let samples = field.values().iter().map(|&v| quantize(encode(v))).collect();
    encode_gray_png(field.width(), field.height(), samples)
}

/// Writes debug images: the warped reference and its labels, each layer,
/// the region map and, in air-bangs mode, one soft mask per class.
/// Lightness maps to `2.55 * L`, detail to `128 + 4 d`, chroma to `128 + v`.
pub fn write_debug_artifacts(dir: &Path, debug: &DebugArtifacts) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    write_bytes(&dir.join("warped_reference.png"), &encode_png(&debug.warped_reference)?)?;
    let (w, h) = debug.warped_reference_labels.dims();
    let label_vis = debug.warped_reference_labels.classes().iter().map(|&c| c as u8 * 23).collect();
    write_bytes(&dir.join("warped_reference_labels.png"), &encode_gray_png(w, h, label_vis)?)?;
    for (name, layers) in [("input", &debug.input_layers), ("reference", &debug.reference_layers)] {
        write_bytes(&dir.join(format!("{name}_structure.png")), &gray_png(layers.structure(), |v| 2.55 * v)?)?;
        write_bytes(&dir.join(format!("{name}_detail.png")), &gray_png(layers.detail(), |v| 128.0 + 4.0 * v)?)?;
        write_bytes(&dir.join(format!("{name}_a.png")), &gray_png(layers.a(), |v| 128.0 + v)?)?;
        write_bytes(&dir.join(format!("{name}_b.png")), &gray_png(layers.b(), |v| 128.0 + v)?)?;
    }
    let (w, h) = debug.regions.dims();
    let region_vis = debug
        .regions
        .regions()
        .iter()
        .map(|r| match r {
            Region::Transfer => 255,
            Region::Protected => 128,
            Region::Ignored => 0,
        })
        .collect();
    write_bytes(&dir.join("regions.png"), &encode_gray_png(w, h, region_vis)?)?;
    if let Some(soft) = &debug.soft_mask {
        for class in FacialClass::ALL {
            let png = gray_png(soft.probability(class), |p| 255.0 * p)?;
            write_bytes(&dir.join(format!("soft_{}.png", class.name())), &png)?;
        }
    }
    Ok(())
}

/// Loads, runs and writes one configured transfer. The output file appears
/// only if every stage succeeds.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let input = FaceBundle::load(&config.input)?;
    let reference = FaceBundle::load(&config.reference)?;
    let outcome = run_in_memory(&input, &reference, &config.settings, config.dump_dir.is_some())?;

    let start = Instant::now();
    if let (Some(dir), Some(debug)) = (&config.dump_dir, &outcome.debug) {
        write_debug_artifacts(dir, debug).at(Stage::Write)?;
    }
    let bytes = encode_png(&outcome.image).at(Stage::Write)?;
    write_atomically(&config.output, &bytes).at(Stage::Write)?;
    let mut report = outcome.report;
    report.stages.push(StageTiming {
        stage: Stage::Write,
        duration: start.elapsed(),
    });
    report.output = Some(config.output.clone());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{FaceGeometry, MakeupStyle};

    fn bundle(geo: &FaceGeometry, style: MakeupStyle, seed: u64) -> FaceBundle {
        FaceBundle::new(geo.render(style, seed), geo.landmarks(), geo.labels(false)).unwrap()
    }

    #[test]
    fn stage_order_and_solver_stats() {
        let geo = FaceGeometry::centered(72, 80);
        let reference = FaceGeometry { half_width: 20.0, ..geo };
        let out = run_in_memory(
            &bundle(&geo, MakeupStyle::Bare, 1),
            &bundle(&reference, MakeupStyle::Rose, 2),
            &Settings { airbangs: true, ..Settings::default() },
            true,
        )
        .unwrap();
        let stages: Vec<Stage> = out.report.stages.iter().map(|s| s.stage).collect();
        assert_eq!(
            stages,
            [Stage::Preprocess, Stage::Align, Stage::Decompose, Stage::Transfer, Stage::Recompose, Stage::Fuse]
        );
        assert_eq!(out.report.solver.len(), 2);
        assert!(out.debug.unwrap().soft_mask.is_some());
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let geo = FaceGeometry::centered(40, 40);
        let b = bundle(&geo, MakeupStyle::Bare, 1);
        let settings = Settings { transfer: TransferParams { alpha: 2.0, ..Default::default() }, ..Default::default() };
        let err = run_in_memory(&b, &b, &settings, false).unwrap_err();
        assert_eq!(err.stage, Stage::Config);
        assert!(err.to_string().starts_with("[config] alpha"));
    }

    #[test]
    fn transfer_changes_only_skin_like_pixels_without_airbangs() {
        let geo = FaceGeometry::centered(64, 64);
        let input = bundle(&geo, MakeupStyle::Bare, 1);
        let reference = bundle(&geo, MakeupStyle::Plum, 9);
        let settings = Settings { skip_preprocess: true, ..Settings::default() };
        let out = run_in_memory(&input, &reference, &settings, false).unwrap();
        let regions = classify_regions(&input.labels);
        let mut changed = 0;
        for (i, (a, b)) in out.image.iter_pixels().zip(input.image.iter_pixels()).enumerate() {
            if regions.is_transfer(i) {
                changed += usize::from(a != b);
            } else {
                assert!(a.iter().zip(b).all(|(p, q)| p.abs_diff(q) <= 1));
            }
        }
        assert!(changed > 500);
    }
}
