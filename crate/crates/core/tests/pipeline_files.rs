use std::path::{Path, PathBuf};

use makeup_core::io::{read_bytes, read_raster};
use makeup_core::masks::FacialClass;
use makeup_core::pipeline::{FacePaths, StageError};
use makeup_core::{rgb_to_lab, run_in_memory, run_pipeline, FaceBundle, PipelineConfig, RasterImage, Settings, Stage};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/fixtures")
}

fn paths(name: &str) -> FacePaths {
    let dir = fixtures();
    FacePaths {
        image: dir.join(format!("{name}.png")),
        landmarks: dir.join(format!("{name}.landmarks.json")),
        labels: dir.join(format!("{name}.labels.png")),
    }
}

fn config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        input: paths("input"),
        reference: paths("reference"),
        output: out.to_path_buf(),
        dump_dir: None,
        settings: Settings::default(),
    }
}

fn max_diff(a: &RasterImage, b: &RasterImage) -> u8 {
    assert_eq!(a.dims(), b.dims());
    a.pixels().iter().zip(b.pixels()).map(|(p, q)| p.abs_diff(*q)).max().unwrap()
}

#[test]
fn golden_pair_matches_committed_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.png");
    let report = run_pipeline(&config(&out)).unwrap();
    assert_eq!(report.output.as_deref(), Some(out.as_path()));
    let golden = read_raster(&fixtures().join("golden.png")).unwrap();
    assert!(max_diff(&read_raster(&out).unwrap(), &golden) <= 2);
    let order: Vec<Stage> = report.stages.iter().map(|s| s.stage).collect();
    assert_eq!(
        order,
        [Stage::Preprocess, Stage::Align, Stage::Decompose, Stage::Transfer, Stage::Recompose, Stage::Write]
    );
    assert!(report.warnings.is_empty());
}

#[test]
fn missing_landmarks_fail_validation_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.png");
    let mut cfg = config(&out);
    cfg.input.landmarks = dir.path().join("absent.landmarks.json");
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert!(matches!(err.error, StageError::MissingFile { what: "input landmarks", .. }));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn late_stage_failure_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.png");
    let broken = dir.path().join("broken.landmarks.json");
    let text = std::fs::read_to_string(paths("input").landmarks).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["points"][1] = doc["points"][0].clone();
    std::fs::write(&broken, doc.to_string()).unwrap();
    let mut cfg = config(&out);
    cfg.input.landmarks = broken;
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Align);
    assert!(err.to_string().starts_with("[align]"));
    assert!(!out.exists());
}

#[test]
fn debug_dump_writes_every_intermediate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&dir.path().join("out.png"));
    cfg.input = paths("input_bangs");
    cfg.settings.airbangs = true;
    cfg.dump_dir = Some(dir.path().join("dump"));
    run_pipeline(&cfg).unwrap();
    let dump = dir.path().join("dump");
    for name in ["warped_reference.png", "regions.png", "input_detail.png", "reference_structure.png", "soft_hair.png"] {
        assert!(!read_bytes(&dump.join(name)).unwrap().is_empty(), "{name}");
    }
}

#[test]
fn airbangs_keeps_fringe_hair_from_the_input() {
    let input = FaceBundle::load(&paths("input_bangs")).unwrap();
    let reference = FaceBundle::load(&paths("reference")).unwrap();
    let plain = run_in_memory(&input, &reference, &Settings::default(), false).unwrap();
    let fused = run_in_memory(&input, &reference, &Settings { airbangs: true, ..Settings::default() }, false).unwrap();

    let base = makeup_core::lab_to_rgb(
        &makeup_core::pipeline::preprocess_input(&input.image, Some(&input.labels), &Settings::default()).unwrap(),
    );
    let (w, h) = input.image.dims();
    let mut hair_err = (0u64, 0u64);
    for y in 8..h - 8 {
        for x in 8..w - 8 {
            let interior = (y - 8..=y + 8).all(|yy| (x - 8..=x + 8).all(|xx| input.labels.label(xx, yy) == FacialClass::Hair));
            if interior {
                let i = (y * w + x) * 3;
                for c in 0..3 {
                    hair_err.0 += u64::from(fused.image.pixels()[i + c].abs_diff(base.pixels()[i + c]));
                    hair_err.1 += 1;
                }
            }
        }
    }
    assert!(hair_err.1 > 0);
    assert!((hair_err.0 as f64 / hair_err.1 as f64) < 1.0);
    assert_ne!(plain.image, fused.image);
    assert_eq!(rgb_to_lab(&fused.image).dims(), (w, h));
}
