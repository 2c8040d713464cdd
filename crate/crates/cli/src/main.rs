//! `condforge`: build conditioning datasets and exercise their verifiable parts.
//!
//! JSON results go to stdout; logs and the resolved configuration go to stderr.
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use condforge::conditioning::{parse_scene_spec, render_scene};
use condforge::flow_matching::{fit, planted_dataset, write_loss_csv, FlowDims, LinearVelocityModel};
use condforge::geometry::{analyze_segments, CameraModel, CanvasExtent, GeometryParams};
use condforge::model_clients::mock::{Fixtures, MockServer};
use condforge::pipeline::{resume, run, stats, PipelineConfig, PipelineKind};
use condforge::raster::GrayImage;
use condforge::segment_detection::{detect_segments, DetectionParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const ENDPOINT_ENV: [(&str, Route); 3] = [
    ("CONDFORGE_AESTHETIC_URL", Route::Aesthetic),
    ("CONDFORGE_CAPTION_URL", Route::Caption),
    ("CONDFORGE_GROUND_URL", Route::Ground),
];

#[derive(Clone, Copy)]
enum Route {
    Aesthetic,
    Caption,
    Ground,
}

#[derive(Debug, Parser)]
#[command(name = "condforge", version, about = "Proportion and perspective conditioning dataset factory")]
struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every randomized default.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Proportion,
    Perspective,
}

impl From<Kind> for PipelineKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Proportion => PipelineKind::Proportion,
            Kind::Perspective => PipelineKind::Perspective,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run (or resume) a dataset pipeline over a corpus directory.
    Build {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Continue an interrupted run from its checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Detect vanishing points in one image and print frame and class as JSON.
    DetectVp {
        #[arg(long, value_name = "FILE")]
        image: PathBuf,
        /// Focal length in normalized units.
        #[arg(long, value_name = "F")]
        focal: Option<f64>,
        /// Include the detected segments in the output.
        #[arg(long)]
        dump_segments: bool,
    },
    /// Render a conditioning image from a scene file.
    Render {
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Summarize a manifest.
    Stats {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
    },
    /// Fit the toy flow-matching model on planted data and write the loss curve.
    FmDemo {
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Serve scripted model responses for offline runs.
    MockServe {
        #[arg(long, value_name = "FILE")]
        fixtures: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    let mut last = text.clone();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            text = format!("{text}: {msg}");
        }
        last = msg;
    }
    text
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn show_config(value: &Value) {
    eprintln!("effective config: {value}");
}

fn read_config_table(path: Option<&Path>) -> Result<toml::Table> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn pipeline_config(table: toml::Table, kind: Kind, corpus: PathBuf, out: PathBuf) -> Result<PipelineConfig> {
    let mut table = table;
    let kind = PipelineKind::from(kind);
    table.insert("kind".into(), toml::Value::try_from(kind)?);
    table.insert("corpus_dir".into(), toml::Value::String(corpus.display().to_string()));
    table.insert("output_dir".into(), toml::Value::String(out.display().to_string()));
    let mut config: PipelineConfig = table.try_into().context("invalid configuration")?;
    for (var, route) in ENDPOINT_ENV {
        if let Ok(url) = std::env::var(var) {
            let endpoint = match route {
                Route::Aesthetic => &mut config.endpoints.aesthetic,
                Route::Caption => &mut config.endpoints.caption,
                Route::Ground => &mut config.endpoints.ground,
            };
            endpoint.base_url = url;
        }
    }
    Ok(config)
}

/// Geometry and detection settings from the optional `[geometry]` and `[detection]` tables.
fn analysis_params(table: &toml::Table, focal: Option<f64>) -> Result<(GeometryParams, DetectionParams)> {
    let section = |name: &str| table.get(name).cloned().unwrap_or(toml::Value::Table(toml::Table::new()));
    let mut geometry: GeometryParams = section("geometry").try_into().context("invalid [geometry]")?;
    let detection: DetectionParams = section("detection").try_into().context("invalid [detection]")?;
    if let Some(f) = focal {
        geometry.camera = CameraModel::with_focal(f)?;
    }
    geometry.validate()?;
    Ok((geometry, detection))
}

fn execute(cli: Cli) -> Result<()> {
    let table = read_config_table(cli.config.as_deref())?;
    match cli.command {
        Command::Build { kind, corpus, out, resume: resuming } => {
            let config = pipeline_config(table, kind, corpus, out)?;
            show_config(&json!({ "seed": cli.seed, "resume": resuming, "pipeline": config }));
            let report = if resuming { resume(&config)? } else { run(&config)? };
            print_json(&report)
        }
        Command::DetectVp { image, focal, dump_segments } => {
            let (geometry, detection) = analysis_params(&table, focal)?;
            show_config(&json!({ "seed": cli.seed, "geometry": geometry, "detection": detection }));
            let img = GrayImage::open(&image).with_context(|| format!("reading {}", image.display()))?;
            let segments = detect_segments(&img, &detection)?;
            let analysis = analyze_segments(&segments, &geometry, CanvasExtent::from_dims(img.width(), img.height()));
            let mut out = json!({
                "image": image,
                "class": analysis.verdict.class,
                "pass": analysis.verdict.pass,
                "analysis": analysis,
            });
            if dump_segments {
                out["segments"] = serde_json::to_value(&segments)?;
            }
            print_json(&out)
        }
        Command::Render { spec, out } => {
            show_config(&json!({ "seed": cli.seed, "spec": spec, "out": out }));
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let scene = parse_scene_spec(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let rendered = render_scene(&scene);
            rendered.image.save_png(&out).with_context(|| format!("writing {}", out.display()))?;
            print_json(&json!({
                "out": out,
                "width": rendered.image.width(),
                "height": rendered.image.height(),
                "warnings": rendered.warnings.len(),
            }))
        }
        Command::Stats { manifest } => {
            show_config(&json!({ "seed": cli.seed, "manifest": manifest }));
            print_json(&stats(&manifest)?)
        }
        Command::FmDemo { steps, lr, out } => {
            let dims = FlowDims::default();
            show_config(&json!({ "seed": cli.seed, "steps": steps, "lr": lr, "dims": [dims.data, dims.text, dims.cond] }));
            if !(lr > 0.0) {
                bail!("--lr must be positive, got {lr}");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let planted = LinearVelocityModel::random(&mut rng, dims, 0.3);
            let data = planted_dataset(&mut rng, &planted, dims, 256);
            let result = fit(&LinearVelocityModel::zeros(dims), &data, steps, lr)?;
            write_loss_csv(&out, &result.losses).with_context(|| format!("writing {}", out.display()))?;
            print_json(&json!({
                "out": out,
                "steps": steps,
                "initial_loss": result.losses.first(),
                "final_loss": result.losses.last(),
            }))
        }
        Command::MockServe { fixtures, port } => {
            show_config(&json!({ "seed": cli.seed, "fixtures": fixtures, "port": port }));
            let script = Fixtures::load(&fixtures)?;
            let server = MockServer::start(script, port)?;
            print_json(&json!({ "base_url": server.base_url() }))?;
            server.wait();
            Ok(())
        }
    }
}
