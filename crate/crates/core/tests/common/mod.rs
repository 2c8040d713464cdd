//! Corpus and mock-fixture builders shared by the integration tests.
#![allow(dead_code)]

pub mod flow;
pub mod render_ref;

use std::collections::BTreeSet;
use std::path::Path;

use condforge::geometry::PerspectiveClass;
use condforge::model_clients::mock::{Fixtures, ScriptedResponse};
use condforge::pipeline::content_id;
use condforge::synth::{planted_scene, random_texture, render_segments, SceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub struct CorpusImage {
    pub id: String,
    pub name: String,
    pub score: f64,
    pub class: Option<PerspectiveClass>,
}

fn write_png(dir: &Path, name: &str, img: &condforge::raster::GrayImage) -> String {
    let bytes = img.encode_png().unwrap();
    std::fs::write(dir.join(name), &bytes).unwrap();
    content_id(&bytes)
}

/// `n` distinct small textures with aesthetic scores uniform in [0, 10].
pub fn proportion_corpus(dir: &Path, n: usize, seed: u64) -> Vec<CorpusImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir).unwrap();
    (0..n)
        .map(|i| {
            let img = random_texture(&mut rng, 64, 64);
            let name = format!("img_{i:03}.png");
            let id = write_png(dir, &name, &img);
            CorpusImage {
                id,
                name,
                score: rng.random_range(0.0..10.0),
                class: None,
            }
        })
        .collect()
}

/// Planted perspective scenes followed by random textures, 512 x 512.
pub fn perspective_corpus(dir: &Path, counts: [usize; 3], textures: usize, seed: u64) -> Vec<CorpusImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir).unwrap();
    let cfg = SceneConfig::default();
    let mut out = Vec::new();
    let classes = [PerspectiveClass::OnePoint, PerspectiveClass::TwoPoint, PerspectiveClass::ThreePoint];
    for (class, &n) in classes.iter().zip(&counts) {
        for _ in 0..n {
            let scene = planted_scene(&mut rng, *class, &cfg);
            let img = render_segments(&scene.segments, 512, 512, 2, 255, 0);
            let name = format!("scene_{:03}.png", out.len());
            let id = write_png(dir, &name, &img);
            out.push(CorpusImage { id, name, score: 9.0, class: Some(*class) });
        }
    }
    for k in 0..textures {
        let img = random_texture(&mut rng, 512, 512);
        let name = format!("texture_{k:03}.png");
        let id = write_png(dir, &name, &img);
        out.push(CorpusImage { id, name, score: 9.0, class: None });
    }
    out
}

/// Per-image aesthetic scores, fixed captions, and two boxes per image except
/// for `no_boxes`, which get an empty detection list.
pub fn fixtures(images: &[CorpusImage], no_boxes: &BTreeSet<String>) -> Fixtures {
    let mut f = Fixtures::default();
    for img in images {
        f.aesthetic
            .by_image
            .insert(img.id.clone(), vec![ScriptedResponse::json(json!({ "score": img.score }))]);
        let caption = format!("short {}", &img.id[..8]);
        f.caption.by_image.insert(
            img.id.clone(),
            vec![ScriptedResponse::json(json!({ "short": caption, "detailed": format!("{caption}, in detail") }))],
        );
        let boxes = if no_boxes.contains(&img.id) {
            json!({ "boxes": [] })
        } else {
            json!({ "boxes": [
                {"x0": 0.1, "y0": 0.1, "x1": 0.4, "y1": 0.5, "phrase": "thing", "confidence": 0.9},
                {"x0": 0.5, "y0": 0.2, "x1": 1.2, "y1": 0.8, "phrase": "other", "confidence": 0.6},
                {"x0": 0.2, "y0": 0.6, "x1": 0.3, "y1": 0.9, "phrase": "faint", "confidence": 0.2}
            ]})
        };
        f.ground.by_image.insert(img.id.clone(), vec![ScriptedResponse::json(boxes)]);
    }
    f
}
