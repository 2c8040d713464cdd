use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::manifest::{read_manifest, MalformedLine};
use super::run::{Funnel, RunReport};
use super::PipelineError;
use crate::geometry::PerspectiveClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    /// Triplets in the manifest.
    pub total: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub malformed: Vec<MalformedLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perspective_histogram: Option<BTreeMap<String, Bin>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_histogram: Option<BTreeMap<usize, Bin>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub funnel: Option<Funnel>,
    /// `emitted / ingested`, when the funnel is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retention: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retention_percent: Option<String>,
}

fn histogram<K: Ord + Clone>(counts: BTreeMap<K, usize>) -> BTreeMap<K, Bin> {
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(k, count)| {
            let fraction = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            (k, Bin { count, fraction })
        })
        .collect()
}

impl StatsReport {
    /// Report over recorded funnel counts alone, with no manifest.
    pub fn from_funnel(funnel: Funnel) -> Self {
        let mut r = Self {
            total: funnel.emitted as usize,
            malformed: Vec::new(),
            perspective_histogram: None,
            box_histogram: None,
            funnel: None,
            retention: None,
            retention_percent: None,
        };
        r.set_funnel(funnel);
        r
    }

    fn set_funnel(&mut self, funnel: Funnel) {
        self.funnel = Some(funnel);
        if funnel.ingested > 0 {
            let retention = funnel.emitted as f64 / funnel.ingested as f64;
            self.retention = Some(retention);
            self.retention_percent = Some(format!("{:.2}%", 100.0 * retention));
        }
    }
}

/// Statistics for a manifest; the funnel comes from the `report.json` written
/// next to it, when present.
pub fn stats(manifest_path: &Path) -> Result<StatsReport, PipelineError> {
    let contents = read_manifest(manifest_path)?;
    for m in &contents.malformed {
        log::warn!("{}:{}: {}", manifest_path.display(), m.line, m.message);
    }
    let mut classes = BTreeMap::new();
    let mut boxes = BTreeMap::new();
    let (mut any_class, mut any_boxes) = (false, false);
    for e in &contents.entries {
        if let Some(c) = e.perspective {
            if !any_class {
                any_class = true;
                for k in [PerspectiveClass::OnePoint, PerspectiveClass::TwoPoint, PerspectiveClass::ThreePoint] {
                    classes.insert(k.short_name().to_string(), 0);
                }
            }
            *classes.entry(c.short_name().to_string()).or_insert(0) += 1;
        }
        if let Some(n) = e.boxes {
            any_boxes = true;
            *boxes.entry(n).or_insert(0) += 1;
        }
    }
    let mut report = StatsReport {
        total: contents.entries.len(),
        malformed: contents.malformed,
        perspective_histogram: any_class.then(|| histogram(classes)),
        box_histogram: any_boxes.then(|| histogram(boxes)),
        funnel: None,
        retention: None,
        retention_percent: None,
    };
    let report_path = manifest_path.with_file_name("report.json");
    if let Ok(text) = std::fs::read_to_string(&report_path) {
        match serde_json::from_str::<RunReport>(&text) {
            Ok(run) => report.set_funnel(run.funnel),
            Err(e) => log::warn!("ignoring {}: {e}", report_path.display()),
        }
    }
    Ok(report)
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "triplets: {}", self.total)?;
        if let Some(h) = &self.perspective_histogram {
            for (k, b) in h {
                writeln!(f, "  {k}: {} ({:.1}%)", b.count, 100.0 * b.fraction)?;
            }
        }
        if let Some(h) = &self.box_histogram {
            for (k, b) in h {
                writeln!(f, "  {k} box(es): {} ({:.1}%)", b.count, 100.0 * b.fraction)?;
            }
        }
        if let Some(fun) = &self.funnel {
            writeln!(
                f,
                "funnel: ingested {} -> post-aesthetic {} -> post-geometry {} -> emitted {}",
                fun.ingested, fun.post_aesthetic, fun.post_geometry, fun.emitted
            )?;
        }
        if let Some(p) = &self.retention_percent {
            writeln!(f, "retention: {p}")?;
        }
        for m in &self.malformed {
            writeln!(f, "malformed line {}: {}", m.line, m.message)?;
        }
        Ok(())
    }
}
