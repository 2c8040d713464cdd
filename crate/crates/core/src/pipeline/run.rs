use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, PipelineKind, Stage};
use super::ingest::{ingest, IngestItem};
use super::journal::{self, JournalEntry, JournalWriter};
use super::manifest::{self, ManifestEntry, ManifestWriter};
use super::record::{ImageRecord, RecordStatus};
use super::PipelineError;
use crate::conditioning::{annotation_to_scene, render_scene};
use crate::geometry::{analyze_segments, CanvasExtent};
use crate::model_clients::{ClientError, Clients};
use crate::raster::GrayImage;
use crate::segment_detection::detect_segments;

/// Files under the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputLayout {
    pub root: PathBuf,
    pub images: PathBuf,
    pub conditioning: PathBuf,
    pub manifest: PathBuf,
    pub journal: PathBuf,
    pub report: PathBuf,
}

impl OutputLayout {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            images: root.join("images"),
            conditioning: root.join("conditioning"),
            manifest: root.join("manifest.jsonl"),
            journal: root.join("checkpoint.journal"),
            report: root.join("report.json"),
        }
    }
}

/// Test and operations hooks that do not affect results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Stop as if killed once this many records were committed.
    pub interrupt_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub ingested: u64,
    pub post_aesthetic: u64,
    pub post_geometry: u64,
    pub emitted: u64,
}

impl Funnel {
    pub fn is_monotone(&self) -> bool {
        self.ingested >= self.post_aesthetic
            && self.post_aesthetic >= self.post_geometry
            && self.post_geometry >= self.emitted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: PipelineKind,
    pub ingested: usize,
    pub duplicates: usize,
    pub unreadable: usize,
    /// Records committed by this invocation.
    pub processed: usize,
    /// Records already terminal before this invocation.
    pub already_done: usize,
    /// Records left for a later resume because a service was unavailable.
    pub pending: usize,
    pub filtered_aesthetic: usize,
    pub filtered_geometry: usize,
    pub failed: usize,
    pub emitted: usize,
    pub funnel: Funnel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_histogram: Option<BTreeMap<String, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_histogram: Option<BTreeMap<usize, usize>>,
    pub wall_time_secs: f64,
}

enum Outcome {
    Done {
        record: Box<ImageRecord>,
        /// Status transitions in order, each tagged with the stage that caused it.
        transitions: Vec<(Stage, RecordStatus)>,
        manifest: Option<ManifestEntry>,
    },
    RemoteUnavailable {
        id: String,
        error: ClientError,
    },
    Fatal(PipelineError),
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

struct Worker<'a> {
    config: &'a PipelineConfig,
    clients: &'a Clients,
    layout: &'a OutputLayout,
}

/// Early exits of a single record.
enum Stop {
    Terminal(Stage, RecordStatus),
    Remote(ClientError),
    Fatal(PipelineError),
}

impl Worker<'_> {
    fn client_stop(stage: Stage, e: ClientError) -> Stop {
        match e {
            ClientError::RemoteUnavailable { .. } => Stop::Remote(e),
            other => Stop::Terminal(stage, RecordStatus::Failed(other.to_string())),
        }
    }

    fn process(&self, item: &IngestItem) -> Outcome {
        let bytes = match std::fs::read(&item.path) {
            Ok(b) => b,
            Err(e) => {
                let mut r = ImageRecord::new(&item.id, item.path.display().to_string(), 0, 0);
                let status = RecordStatus::Failed(format!("read: {e}"));
                r.status = status.clone();
                return Outcome::Done {
                    record: Box::new(r),
                    transitions: vec![(Stage::Decode, status)],
                    manifest: None,
                };
            }
        };
        let mut record = ImageRecord::new(&item.id, item.path.display().to_string(), 0, 0);
        match self.annotate(&mut record, item, &bytes) {
            Ok(manifest) => Outcome::Done {
                record: Box::new(record),
                transitions: vec![(Stage::Render, RecordStatus::Annotated)],
                manifest: Some(manifest),
            },
            Err(Stop::Terminal(stage, status)) => {
                record.status = status.clone();
                Outcome::Done {
                    record: Box::new(record),
                    transitions: vec![(stage, status)],
                    manifest: None,
                }
            }
            Err(Stop::Remote(error)) => Outcome::RemoteUnavailable {
                id: item.id.clone(),
                error,
            },
            Err(Stop::Fatal(e)) => Outcome::Fatal(e),
        }
    }

    fn annotate(&self, record: &mut ImageRecord, item: &IngestItem, bytes: &[u8]) -> Result<ManifestEntry, Stop> {
        let kind = self.config.kind;
        let gray = GrayImage::decode(bytes)
            .map_err(|e| Stop::Terminal(Stage::Decode, RecordStatus::Failed(format!("decode: {e}"))))?;
        record.width = gray.width();
        record.height = gray.height();

        let score = self
            .clients
            .aesthetic
            .score_aesthetic(bytes)
            .map_err(|e| Self::client_stop(Stage::Aesthetic, e))?;
        record.aesthetic = Some(score);
        // strict: a score equal to the threshold is dropped
        if !(score > self.config.aesthetic_threshold()) {
            return Err(Stop::Terminal(Stage::Aesthetic, RecordStatus::FilteredAesthetic));
        }

        let mut segments = Vec::new();
        match kind {
            PipelineKind::Proportion => {
                let captions = self
                    .clients
                    .caption
                    .caption(bytes)
                    .map_err(|e| Self::client_stop(Stage::Caption, e))?;
                let boxes = self
                    .clients
                    .ground
                    .ground(bytes, &captions.detailed, self.config.box_threshold)
                    .map_err(|e| Self::client_stop(Stage::Grounding, e))?;
                record.captions = Some(captions);
                let empty = boxes.is_empty();
                record.boxes = Some(boxes);
                if empty {
                    return Err(Stop::Terminal(Stage::Grounding, RecordStatus::FilteredGeometry));
                }
            }
            PipelineKind::Perspective => {
                // images too small to detect on simply fail the filter
                segments = detect_segments(&gray, &self.config.detection).unwrap_or_default();
                let extent = CanvasExtent::from_dims(gray.width(), gray.height());
                let analysis = analyze_segments(&segments, &self.config.geometry, extent);
                record.segments_count = Some(analysis.segments_count);
                record.perspective = Some(analysis.verdict.class);
                record.frame = analysis.frame;
                if !analysis.verdict.pass {
                    return Err(Stop::Terminal(Stage::VanishingPoints, RecordStatus::FilteredGeometry));
                }
                let captions = self
                    .clients
                    .caption
                    .caption(bytes)
                    .map_err(|e| Self::client_stop(Stage::Caption, e))?;
                record.captions = Some(captions);
            }
        }

        let scene = annotation_to_scene(record, &segments, &self.config.render)
            .map_err(|e| Stop::Terminal(Stage::Render, RecordStatus::Failed(e.to_string())))?;
        let rendered = render_scene(&scene);
        let png = rendered
            .image
            .encode_png_rgb()
            .map_err(|e| Stop::Terminal(Stage::Render, RecordStatus::Failed(e.to_string())))?;

        let ext = item
            .path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_else(|| "img".into());
        let image_rel = format!("images/{}.{ext}", item.id);
        let cond_rel = format!("conditioning/{}.png", item.id);
        for (rel, data) in [(&image_rel, bytes), (&cond_rel, png.as_slice())] {
            let path = self.layout.root.join(rel);
            std::fs::write(&path, data).map_err(|e| Stop::Fatal(io_err(&path, e)))?;
        }
        record.status = RecordStatus::Annotated;
        Ok(ManifestEntry {
            id: item.id.clone(),
            image_path: image_rel,
            conditioning_path: cond_rel,
            prompt: record.captions.as_ref().expect("captioned").short.clone(),
            perspective: (kind == PipelineKind::Perspective)
                .then(|| record.perspective.expect("classified")),
            boxes: record.boxes.as_ref().map(Vec::len),
        })
    }
}

/// Single writer of the manifest and journal.
struct Writer {
    journal: JournalWriter,
    manifest: ManifestWriter,
    last: HashMap<String, RecordStatus>,
}

impl Writer {
    fn record(&mut self, id: &str, stage: Stage, status: RecordStatus) -> Result<(), PipelineError> {
        if let Some(prev) = self.last.get(id) {
            if !prev.can_become(&status) {
                return Ok(());
            }
        }
        self.journal.append(&JournalEntry::now(id, stage, status.clone()))?;
        self.last.insert(id.to_string(), status);
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Fresh,
    Resume,
}

/// Processes a corpus into a fresh output directory.
pub fn run(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    execute(config, Mode::Fresh, RunOptions::default())
}

/// Continues an interrupted run from its checkpoint.
pub fn resume(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    execute(config, Mode::Resume, RunOptions::default())
}

pub fn run_with(config: &PipelineConfig, resume: bool, options: RunOptions) -> Result<RunReport, PipelineError> {
    execute(config, if resume { Mode::Resume } else { Mode::Fresh }, options)
}

fn open_writer(config: &PipelineConfig, layout: &OutputLayout, mode: Mode) -> Result<Writer, PipelineError> {
    let fingerprint = config.fingerprint();
    match mode {
        Mode::Fresh => {
            if layout.journal.exists() || layout.manifest.exists() {
                return Err(PipelineError::OutputExists(layout.root.clone()));
            }
            for dir in [&layout.root, &layout.images, &layout.conditioning] {
                std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            Ok(Writer {
                journal: JournalWriter::create(&layout.journal, &fingerprint)?,
                manifest: ManifestWriter::open(&layout.manifest, 0)?,
                last: HashMap::new(),
            })
        }
        Mode::Resume => {
            if !layout.journal.exists() {
                return Err(PipelineError::NoCheckpoint(layout.root.clone()));
            }
            let contents = journal::read_journal(&layout.journal)?;
            if contents.fingerprint != fingerprint {
                return Err(PipelineError::ConfigMismatch {
                    checkpoint: contents.fingerprint,
                    requested: fingerprint,
                });
            }
            for dir in [&layout.images, &layout.conditioning] {
                std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            let last: HashMap<String, RecordStatus> = contents
                .latest()
                .into_iter()
                .map(|(id, e)| (id.to_string(), e.status.clone()))
                .collect();
            let manifest_contents = if layout.manifest.exists() {
                manifest::read_manifest(&layout.manifest)?
            } else {
                Default::default()
            };
            let mut writer = Writer {
                journal: JournalWriter::append_to(&layout.journal, contents.valid_len)?,
                manifest: ManifestWriter::open(&layout.manifest, manifest_contents.complete_len)?,
                last,
            };
            // a crash between the manifest line and its journal entry
            for e in &manifest_contents.entries {
                writer.record(&e.id, Stage::Emit, RecordStatus::Emitted)?;
            }
            Ok(writer)
        }
    }
}

fn execute(config: &PipelineConfig, mode: Mode, options: RunOptions) -> Result<RunReport, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    let layout = OutputLayout::new(&config.output_dir);
    let mut writer = open_writer(config, &layout, mode)?;
    let ingested = ingest(&config.corpus_dir)?;
    let jobs: Vec<&IngestItem> = ingested
        .items
        .iter()
        .filter(|i| !writer.last.get(&i.id).is_some_and(RecordStatus::is_terminal))
        .collect();
    let already_done = ingested.items.len() - jobs.len();
    log::info!(
        "{} image(s) ingested, {} already done, {} to process",
        ingested.items.len(),
        already_done,
        jobs.len()
    );

    let clients = Clients::new(&config.endpoints);
    let worker = Worker {
        config,
        clients: &clients,
        layout: &layout,
    };
    let stop = AtomicBool::new(false);
    let (job_tx, job_rx) = crossbeam_channel::unbounded();
    for job in jobs.iter().copied().enumerate() {
        job_tx.send(job).expect("receiver alive");
    }
    drop(job_tx);
    let (res_tx, res_rx) = crossbeam_channel::unbounded::<(usize, Outcome)>();

    let mut committed = 0usize;
    let mut pending = 0usize;
    let result: Result<(), PipelineError> = std::thread::scope(|s| {
        for _ in 0..config.worker_count.min(jobs.len().max(1)) {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            let (worker, stop) = (&worker, &stop);
            s.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let Ok((seq, item)) = job_rx.recv() else { break };
                    if res_tx.send((seq, worker.process(item))).is_err() {
                        break;
                    }
                }
            });
        }
        drop(res_tx);

        let mut buffer = BTreeMap::new();
        let mut next = 0usize;
        let mut remote_failures = 0usize;
        let outcome = 'recv: {
            for (seq, out) in res_rx.iter() {
                buffer.insert(seq, out);
                while let Some(out) = buffer.remove(&next) {
                    next += 1;
                    match out {
                        Outcome::Done {
                            record,
                            transitions,
                            manifest,
                        } => {
                            for (stage, status) in transitions {
                                if let RecordStatus::Failed(reason) = &status {
                                    log::warn!("record {} failed at {stage:?}: {reason}", record.id);
                                }
                                if let Err(e) = writer.record(&record.id, stage, status) {
                                    break 'recv Err(e);
                                }
                            }
                            if let Some(entry) = manifest {
                                let written = writer
                                    .manifest
                                    .append(&entry)
                                    .and_then(|_| writer.record(&record.id, Stage::Emit, RecordStatus::Emitted));
                                if let Err(e) = written {
                                    break 'recv Err(e);
                                }
                            }
                            committed += 1;
                        }
                        Outcome::RemoteUnavailable { id, error } => {
                            log::warn!("record {id} left pending: {error}");
                            pending += 1;
                            remote_failures += 1;
                            if remote_failures > config.failure_budget {
                                break 'recv Err(PipelineError::EndpointDown {
                                    failures: remote_failures,
                                    last_error: error.to_string(),
                                });
                            }
                        }
                        Outcome::Fatal(e) => break 'recv Err(e),
                    }
                    if options.interrupt_after.is_some_and(|n| committed >= n) {
                        break 'recv Err(PipelineError::Interrupted { committed });
                    }
                }
            }
            Ok(())
        };
        stop.store(true, Ordering::Relaxed);
        drop(res_rx);
        outcome
    });
    result?;

    journal::compact(&layout.journal)?;
    manifest::canonicalize(&layout.manifest)?;
    let report = build_report(config, &layout, &ingested.items, ReportCounts {
        duplicates: ingested.duplicates.len(),
        unreadable: ingested.unreadable.len(),
        processed: committed,
        already_done,
        pending,
        started,
    })?;
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    std::fs::write(&layout.report, json).map_err(|e| io_err(&layout.report, e))?;
    Ok(report)
}

struct ReportCounts {
    duplicates: usize,
    unreadable: usize,
    processed: usize,
    already_done: usize,
    pending: usize,
    started: Instant,
}

fn build_report(
    config: &PipelineConfig,
    layout: &OutputLayout,
    items: &[IngestItem],
    counts: ReportCounts,
) -> Result<RunReport, PipelineError> {
    let kind = config.kind;
    let contents = journal::read_journal(&layout.journal)?;
    journal::audit(&contents.entries)?;
    let latest = contents.latest();
    let passed = |stage: Stage, e: &JournalEntry| kind.position(e.stage) > kind.position(stage);
    let mut funnel = Funnel {
        ingested: items.len() as u64,
        ..Funnel::default()
    };
    let (mut fa, mut fg, mut failed, mut emitted) = (0, 0, 0, 0);
    for item in items {
        let Some(e) = latest.get(item.id.as_str()) else {
            continue;
        };
        funnel.post_aesthetic += passed(Stage::Aesthetic, e) as u64;
        funnel.post_geometry += passed(kind.geometry_stage(), e) as u64;
        match e.status {
            RecordStatus::FilteredAesthetic => fa += 1,
            RecordStatus::FilteredGeometry => fg += 1,
            RecordStatus::Failed(_) => failed += 1,
            RecordStatus::Emitted => emitted += 1,
            RecordStatus::Pending | RecordStatus::Annotated => {}
        }
    }
    funnel.emitted = emitted as u64;
    let entries = manifest::read_manifest(&layout.manifest)?.entries;
    let class_histogram = (kind == PipelineKind::Perspective).then(|| {
        let mut h = BTreeMap::new();
        for e in &entries {
            if let Some(c) = e.perspective {
                *h.entry(c.short_name().to_string()).or_insert(0) += 1;
            }
        }
        h
    });
    let box_histogram = (kind == PipelineKind::Proportion).then(|| {
        let mut h = BTreeMap::new();
        for e in &entries {
            if let Some(n) = e.boxes {
                *h.entry(n).or_insert(0) += 1;
            }
        }
        h
    });
    Ok(RunReport {
        kind,
        ingested: items.len(),
        duplicates: counts.duplicates,
        unreadable: counts.unreadable,
        processed: counts.processed,
        already_done: counts.already_done,
        pending: counts.pending,
        filtered_aesthetic: fa,
        filtered_geometry: fg,
        failed,
        emitted,
        funnel,
        class_histogram,
        box_histogram,
        wall_time_secs: counts.started.elapsed().as_secs_f64(),
    })
}
