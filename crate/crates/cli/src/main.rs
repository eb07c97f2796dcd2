use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use makeup_core::io::{encode_gray_png, write_bytes, write_png};
use makeup_core::imgcore::box_downsample;
use makeup_core::masks::class_table_json;
use makeup_core::synthetic::{FaceGeometry, MakeupStyle};
use makeup_core::transfer::StructureMode;
use makeup_core::{run_pipeline, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "makeup", version, about = "Transfer facial makeup from a reference photo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply the makeup of a reference face to an input face.
    Transfer(TransferArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory holding `gallery/`.
        #[arg(long, default_value = "assets")]
        assets: PathBuf,
    },
    /// Render a synthetic face with matching landmarks and labels.
    Synth(SynthArgs),
    /// Print the label class table as JSON.
    Classes,
}

/// Every flag may also come from `--config`; flags win.
#[derive(Debug, Args)]
struct TransferArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    input_landmarks: Option<PathBuf>,
    #[arg(long)]
    input_labels: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    reference_landmarks: Option<PathBuf>,
    #[arg(long)]
    reference_labels: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    structure_mode: Option<StructureMode>,
    /// Leave the structure layer untouched.
    #[arg(long)]
    no_illumination: bool,
    #[arg(long)]
    airbangs: bool,
    #[arg(long)]
    skip_preprocess: bool,
    #[arg(long)]
    soften_sigma: Option<f64>,
    /// Write intermediate layers and masks here.
    #[arg(long, value_name = "DIR")]
    dump_layers: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// File stem; with `--gallery`, the entry directory name.
    #[arg(long)]
    name: String,
    #[arg(long, default_value_t = 224)]
    width: usize,
    #[arg(long, default_value_t = 224)]
    height: usize,
    #[arg(long, default_value = "bare")]
    style: MakeupStyle,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplies the face half-axes.
    #[arg(long, default_value_t = 1.0)]
    face_scale: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    shift_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    shift_y: f64,
    /// Add hair across the forehead.
    #[arg(long)]
    airbangs: bool,
    /// Write `<out-dir>/<name>/{image.png,landmarks.json,labels.png,thumbnail.png}`.
    #[arg(long)]
    gallery: bool,
}

fn table(pairs: Vec<(&str, toml::Value)>) -> toml::Table {
    pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

fn path_value(p: &Path) -> toml::Value {
    toml::Value::String(p.to_string_lossy().into_owned())
}

impl TransferArgs {
    fn overrides(&self) -> toml::Table {
        let mut root = toml::Table::new();
        for (section, fields) in [
            ("input", [("image", &self.input), ("landmarks", &self.input_landmarks), ("labels", &self.input_labels)]),
            (
                "reference",
                [("image", &self.reference), ("landmarks", &self.reference_landmarks), ("labels", &self.reference_labels)],
            ),
        ] {
            let t = table(fields.iter().filter_map(|(k, v)| v.as_deref().map(|p| (*k, path_value(p)))).collect());
            if !t.is_empty() {
                root.insert(section.into(), toml::Value::Table(t));
            }
        }
        let mut transfer = Vec::new();
        if let Some(a) = self.alpha {
            transfer.push(("alpha", toml::Value::Float(a)));
        }
        if let Some(b) = self.beta {
            transfer.push(("beta", toml::Value::Float(b)));
        }
        if let Some(mode) = self.structure_mode {
            transfer.push(("structure_mode", toml::Value::try_from(mode).expect("mode serializes")));
        }
        if self.no_illumination {
            transfer.push(("illumination", toml::Value::Boolean(false)));
        }
        if !transfer.is_empty() {
            root.insert("transfer".into(), toml::Value::Table(table(transfer)));
        }
        if self.airbangs {
            root.insert("airbangs".into(), toml::Value::Boolean(true));
        }
        if self.skip_preprocess {
            root.insert("skip_preprocess".into(), toml::Value::Boolean(true));
        }
        if let Some(s) = self.soften_sigma {
            root.insert("soften_sigma".into(), toml::Value::Float(s));
        }
        if let Some(d) = &self.dump_layers {
            root.insert("dump_dir".into(), path_value(d));
        }
        if let Some(o) = &self.out {
            root.insert("output".into(), path_value(o));
        }
        root
    }
}

fn transfer(args: &TransferArgs) -> Result<(), String> {
    let config = match &args.config {
        Some(path) => PipelineConfig::load(path, args.overrides()),
        None => PipelineConfig::from_toml_with_overrides(None, args.overrides()),
    }
    .map_err(|e| e.to_string())?;
    let report = run_pipeline(&config).map_err(|e| e.to_string())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {} ({})", config.output.display(), report.timing_header());
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), String> {
    let base = FaceGeometry::centered(args.width, args.height);
    let geo = FaceGeometry {
        center: base.center.translated(args.shift_x, args.shift_y),
        half_width: base.half_width * args.face_scale,
        half_height: base.half_height * args.face_scale,
        ..base
    };
    let image = geo.render_scene(args.style, args.seed, args.airbangs);
    let labels = geo.labels(args.airbangs);
    let landmarks = geo.landmarks();
    let (dir, image_name, lm_name, labels_name) = if args.gallery {
        (args.out_dir.join(&args.name), "image.png".into(), "landmarks.json".into(), "labels.png".into())
    } else {
        let n = &args.name;
        (args.out_dir.clone(), format!("{n}.png"), format!("{n}.landmarks.json"), format!("{n}.labels.png"))
    };
    std::fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let err = |e: makeup_core::io::IoError| e.to_string();
    write_png(&dir.join(image_name), &image).map_err(err)?;
    write_bytes(&dir.join(lm_name), format!("{}\n", landmarks.to_json()).as_bytes()).map_err(err)?;
    let (w, h) = labels.dims();
    write_bytes(&dir.join(labels_name), &encode_gray_png(w, h, labels.to_bytes()).map_err(err)?).map_err(err)?;
    if args.gallery {
        write_png(&dir.join("thumbnail.png"), &box_downsample(&image, 4)).map_err(err)?;
    }
    Ok(())
}

fn serve(bind: SocketAddr, assets: &Path) -> Result<(), String> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    eprintln!("listening on http://{bind}");
    runtime.block_on(makeup_server::serve(bind, assets)).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Transfer(args) => transfer(args),
        Command::Serve { bind, assets } => serve(*bind, assets),
        Command::Synth(args) => synth(args),
        Command::Classes => {
            println!("{}", class_table_json());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
