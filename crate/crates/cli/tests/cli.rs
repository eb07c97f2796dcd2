use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/fixtures")
}

fn makeup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_makeup")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn face_flags() -> Vec<String> {
    [
        ("--input", "input.png"),
        ("--input-landmarks", "input.landmarks.json"),
        ("--input-labels", "input.labels.png"),
        ("--reference", "reference.png"),
        ("--reference-landmarks", "reference.landmarks.json"),
        ("--reference-labels", "reference.labels.png"),
    ]
    .iter()
    .flat_map(|(flag, file)| [flag.to_string(), fixture(file)])
    .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn transfer_reproduces_the_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.png");
    let mut args = vec!["transfer".to_string()];
    args.extend(face_flags());
    args.extend(["--alpha", "0.95", "--beta", "30", "--out"].map(String::from));
    args.push(out_path.to_string_lossy().into_owned());
    let out = makeup(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("total;dur="));
    assert_eq!(std::fs::read(&out_path).unwrap(), std::fs::read(fixtures().join("golden.png")).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let file_out = dir.path().join("from_file.png");
    let flag_out = dir.path().join("from_flag.png");
    let text = format!(
        "output = {:?}\n\n[input]\nimage = {:?}\nlandmarks = {:?}\nlabels = {:?}\n\n\
         [reference]\nimage = {:?}\nlandmarks = {:?}\nlabels = {:?}\n\n[transfer]\nalpha = 3.0\n",
        file_out.to_string_lossy(),
        fixture("input.png"),
        fixture("input.landmarks.json"),
        fixture("input.labels.png"),
        fixture("reference.png"),
        fixture("reference.landmarks.json"),
        fixture("reference.labels.png"),
    );
    std::fs::write(&config, text).unwrap();
    let cfg = config.to_string_lossy().into_owned();

    let rejected = makeup(&["transfer", "--config", &cfg]);
    assert!(!rejected.status.success());
    assert!(stderr(&rejected).contains("[config]"), "{}", stderr(&rejected));
    assert!(!file_out.exists());

    let ok = makeup(&["transfer", "--config", &cfg, "--alpha", "0.95", "--out", &flag_out.to_string_lossy()]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(!file_out.exists());
    assert_eq!(std::fs::read(&flag_out).unwrap(), std::fs::read(fixtures().join("golden.png")).unwrap());
}

#[test]
fn missing_landmark_file_is_a_config_error_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.png");
    let mut args = vec!["transfer".to_string()];
    args.extend(face_flags());
    args[4] = dir.path().join("nope.landmarks.json").to_string_lossy().into_owned();
    args.extend(["--out".to_string(), out_path.to_string_lossy().into_owned()]);
    let out = makeup(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(msg.contains("[config] input landmarks file not found"), "{msg}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn dump_layers_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("layers");
    let out_path = dir.path().join("out.png");
    let mut args = vec!["transfer".to_string()];
    args.extend(face_flags());
    args.extend(
        ["--structure-mode", "literal", "--airbangs", "--skip-preprocess", "--dump-layers"].map(String::from),
    );
    args.push(dump.to_string_lossy().into_owned());
    args.extend(["--out".to_string(), out_path.to_string_lossy().into_owned()]);
    let out = makeup(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dump.join("input_structure.png").is_file());
    assert!(dump.join("soft_skin.png").is_file());
    assert_ne!(std::fs::read(&out_path).unwrap(), std::fs::read(fixtures().join("golden.png")).unwrap());
}

#[test]
fn bad_structure_mode_is_a_usage_error() {
    let out = makeup(&["transfer", "--structure-mode", "sideways"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown structure mode"));
}

#[test]
fn synth_writes_a_loadable_face() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_string_lossy().into_owned();
    let out = makeup(&["synth", "--out-dir", &d, "--name", "face", "--width", "96", "--height", "112", "--style", "plum"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let paths = makeup_core::pipeline::FacePaths {
        image: dir.path().join("face.png"),
        landmarks: dir.path().join("face.landmarks.json"),
        labels: dir.path().join("face.labels.png"),
    };
    let face = makeup_core::FaceBundle::load(&paths).unwrap();
    assert_eq!(face.image.dims(), (96, 112));

    let out = makeup(&["synth", "--out-dir", &d, "--name", "entry", "--gallery", "--seed", "3"]);
    assert!(out.status.success());
    for file in ["image.png", "landmarks.json", "labels.png", "thumbnail.png"] {
        assert!(dir.path().join("entry").join(file).is_file(), "{file}");
    }
}

#[test]
fn classes_prints_the_label_table() {
    let out = makeup(&["classes"]);
    assert!(out.status.success());
    let table: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table, serde_json::from_str::<serde_json::Value>(&makeup_core::masks::class_table_json()).unwrap());
}
