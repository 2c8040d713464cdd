mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use common::{fixtures, perspective_corpus, proportion_corpus};
use condforge::model_clients::mock::{Fixtures, MockServer, ScriptedResponse};
use condforge::model_clients::{Endpoints, ServiceEndpoint};
use condforge::pipeline::{
    journal, manifest, resume, run, run_with, stats, PipelineConfig, PipelineError, PipelineKind,
    RecordStatus, RunOptions,
};

fn endpoints(server: &MockServer) -> Endpoints {
    Endpoints::all(ServiceEndpoint {
        max_retries: 1,
        backoff_base: Duration::from_millis(1),
        ..ServiceEndpoint::new(server.base_url())
    })
}

fn config(kind: PipelineKind, corpus: &Path, out: &Path, server: &MockServer, workers: usize) -> PipelineConfig {
    let mut c = PipelineConfig::new(kind, corpus, out);
    c.endpoints = endpoints(server);
    c.worker_count = workers;
    c
}

fn manifest_text(out: &Path) -> String {
    std::fs::read_to_string(out.join("manifest.jsonl")).unwrap()
}

#[test]
fn proportion_run_keeps_scores_strictly_above_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let images = proportion_corpus(&corpus, 100, 1);
    let no_boxes: BTreeSet<String> = images.iter().filter(|i| i.score > 5.0).take(10).map(|i| i.id.clone()).collect();
    let server = MockServer::start(fixtures(&images, &no_boxes), 0).unwrap();
    let out = dir.path().join("out");
    let report = run(&config(PipelineKind::Proportion, &corpus, &out, &server, 4)).unwrap();

    let above = images.iter().filter(|i| i.score > 5.0).count();
    assert_eq!(report.ingested, 100);
    assert_eq!(report.filtered_aesthetic, 100 - above);
    assert_eq!(report.filtered_geometry, 10);
    assert_eq!(report.emitted, above - 10);
    assert_eq!(report.funnel.post_aesthetic as usize, above);
    assert!(report.funnel.is_monotone());
    assert!(report.class_histogram.is_none());
    assert_eq!(report.box_histogram.as_ref().unwrap()[&2], above - 10);

    let m = manifest::read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(m.entries.len(), above - 10);
    for e in &m.entries {
        assert!(!no_boxes.contains(&e.id));
        assert!(out.join(&e.image_path).is_file());
        assert!(out.join(&e.conditioning_path).is_file());
        assert_eq!(e.prompt, format!("short {}", &e.id[..8]));
        assert_eq!(e.boxes, Some(2));
    }
    let ids: Vec<_> = m.entries.iter().map(|e| e.id.clone()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(ids, sorted, "manifest is id-sorted and unique");
    // the conditioning image is RGB
    let cond = image::open(out.join(&m.entries[0].conditioning_path)).unwrap();
    assert_eq!(cond.color(), image::ColorType::Rgb8);

    let s = stats(&out.join("manifest.jsonl")).unwrap();
    assert!(s.perspective_histogram.is_none());
    assert_eq!(s.funnel.unwrap(), report.funnel);
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let images = proportion_corpus(&corpus, 40, 2);
    let server = MockServer::start(fixtures(&images, &BTreeSet::new()), 0).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&config(PipelineKind::Proportion, &corpus, &a, &server, 4)).unwrap();
    run(&config(PipelineKind::Proportion, &corpus, &b, &server, 1)).unwrap();
    assert_eq!(manifest_text(&a), manifest_text(&b));
    for e in manifest::read_manifest(&a.join("manifest.jsonl")).unwrap().entries {
        assert_eq!(
            std::fs::read(a.join(&e.conditioning_path)).unwrap(),
            std::fs::read(b.join(&e.conditioning_path)).unwrap()
        );
    }
}

#[test]
fn interrupted_run_resumes_to_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let images = proportion_corpus(&corpus, 100, 3);
    let no_boxes: BTreeSet<String> = images.iter().skip(5).step_by(10).map(|i| i.id.clone()).collect();
    let server = MockServer::start(fixtures(&images, &no_boxes), 0).unwrap();
    let base = dir.path().join("base");
    run(&config(PipelineKind::Proportion, &corpus, &base, &server, 3)).unwrap();

    let out = dir.path().join("out");
    let cfg = config(PipelineKind::Proportion, &corpus, &out, &server, 3);
    let err = run_with(&cfg, false, RunOptions { interrupt_after: Some(50) }).unwrap_err();
    assert!(matches!(err, PipelineError::Interrupted { committed: 50 }));
    assert!(!out.join("report.json").exists());
    // a crash can also leave half a manifest line behind
    let mut text = manifest_text(&out);
    text.push_str("{\"id\":\"trunc");
    std::fs::write(out.join("manifest.jsonl"), text).unwrap();

    let report = resume(&cfg).unwrap();
    assert_eq!(report.already_done, 50);
    assert_eq!(report.processed, 50);
    assert_eq!(manifest_text(&out), manifest_text(&base));
    journal::audit(&journal::read_journal(&out.join("checkpoint.journal")).unwrap().entries).unwrap();

    let again = resume(&cfg).unwrap();
    assert_eq!(again.processed, 0);
    assert_eq!(manifest_text(&out), manifest_text(&base));
}

#[test]
fn resume_refuses_changed_thresholds_and_fresh_run_refuses_existing_output() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let images = proportion_corpus(&corpus, 5, 4);
    let server = MockServer::start(fixtures(&images, &BTreeSet::new()), 0).unwrap();
    let out = dir.path().join("out");
    let mut cfg = config(PipelineKind::Proportion, &corpus, &out, &server, 2);
    run(&cfg).unwrap();
    assert!(matches!(run(&cfg), Err(PipelineError::OutputExists(_))));
    cfg.aesthetic_threshold = Some(3.5);
    assert!(matches!(resume(&cfg), Err(PipelineError::ConfigMismatch { .. })));
    let empty = dir.path().join("empty");
    assert!(matches!(resume(&config(PipelineKind::Proportion, &corpus, &empty, &server, 1)), Err(PipelineError::NoCheckpoint(_))));
}

#[test]
fn hard_down_endpoint_aborts_then_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let images = proportion_corpus(&corpus, 20, 5);
    let mut down = Fixtures::default();
    down.aesthetic.default = vec![ScriptedResponse::status(503)];
    let server = MockServer::start(down, 0).unwrap();
    let out = dir.path().join("out");
    let mut cfg = config(PipelineKind::Proportion, &corpus, &out, &server, 1);
    cfg.failure_budget = 3;
    let err = run(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::EndpointDown { failures: 4, .. }), "{err}");
    // two attempts per record; the single worker may have one more record in flight
    let requests = server.request_count("aesthetic");
    assert!((8..=10).contains(&requests), "{requests} requests");
    drop(server);

    let server = MockServer::start(fixtures(&images, &BTreeSet::new()), 0).unwrap();
    cfg.endpoints = endpoints(&server);
    let report = resume(&cfg).unwrap();
    assert_eq!(report.processed, 20);
    assert_eq!(report.emitted, images.iter().filter(|i| i.score > 5.0).count());
}

#[test]
fn undecodable_images_fail_without_stopping_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let mut images = proportion_corpus(&corpus, 6, 6);
    std::fs::write(corpus.join("broken.png"), b"\x89PNG but not really").unwrap();
    for i in &mut images {
        i.score = 9.0;
    }
    let server = MockServer::start(fixtures(&images, &BTreeSet::new()), 0).unwrap();
    let out = dir.path().join("out");
    let report = run(&config(PipelineKind::Proportion, &corpus, &out, &server, 2)).unwrap();
    assert_eq!(report.ingested, 7);
    assert_eq!(report.failed, 1);
    assert_eq!(report.emitted, 6);
    let latest = journal::read_journal(&out.join("checkpoint.journal")).unwrap();
    assert!(latest.entries.iter().any(|e| matches!(&e.status, RecordStatus::Failed(r) if r.starts_with("decode"))));
}

#[test]
fn perspective_run_recovers_planted_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let images = perspective_corpus(&corpus, [20, 8, 2], 20, 7);
    let server = MockServer::start(fixtures(&images, &BTreeSet::new()), 0).unwrap();
    let out = dir.path().join("out");
    let report = run(&config(PipelineKind::Perspective, &corpus, &out, &server, 4)).unwrap();
    let h = report.class_histogram.clone().unwrap();
    assert_eq!(h.get("1pt"), Some(&20), "{h:?}");
    assert_eq!(h.get("2pt"), Some(&8), "{h:?}");
    assert_eq!(h.get("3pt"), Some(&2), "{h:?}");
    assert_eq!(report.filtered_geometry, 20);
    assert!(report.box_histogram.is_none());
    // grounding is not a perspective stage
    assert_eq!(server.request_count("ground"), 0);
    assert_eq!(server.request_count("caption"), 30);

    let m = manifest::read_manifest(&out.join("manifest.jsonl")).unwrap();
    for e in &m.entries {
        let planted = images.iter().find(|i| i.id == e.id).unwrap();
        assert_eq!(e.perspective, planted.class);
        assert!(e.boxes.is_none());
    }
    let s = stats(&out.join("manifest.jsonl")).unwrap();
    let ph = s.perspective_histogram.unwrap();
    assert!((ph["1pt"].fraction - 20.0 / 30.0).abs() < 1e-12);
}

#[test]
fn worker_scaling_on_perspective_fixture() {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores < 4 {
        eprintln!("skipping: {cores} core(s) available, 4 needed to measure scaling");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let images = perspective_corpus(&corpus, [12, 6, 2], 12, 8);
    let server = MockServer::start(fixtures(&images, &BTreeSet::new()), 0).unwrap();
    let time = |workers: usize, name: &str| {
        let cfg = config(PipelineKind::Perspective, &corpus, &dir.path().join(name), &server, workers);
        let t = std::time::Instant::now();
        run(&cfg).unwrap();
        t.elapsed().as_secs_f64()
    };
    let serial = time(1, "serial");
    let parallel = time(4, "parallel");
    assert!(parallel <= 0.5 * serial, "4 workers {parallel:.2}s vs 1 worker {serial:.2}s");
}
