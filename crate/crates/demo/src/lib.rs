//! Browser bindings. Every export takes plain numbers or text and returns a
//! JSON string; failures come back as `{"error": "..."}`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use tweetcast::cluster::{elbow_scan, fit_kmeans, KmeansParams};
use tweetcast::linalg::Matrix;
use tweetcast::mlcore::{classification_metrics, roc_curve_auc};
use tweetcast::nlp::TextPipeline;
use tweetcast::rng::seeded;
use wasm_bindgen::prelude::*;

thread_local! {
    static PIPELINE: TextPipeline = TextPipeline::english();
}

const MAX_K: usize = 8;

fn respond(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Language scores, tokens and sentiment for one piece of text.
#[wasm_bindgen]
pub fn analyze_text(text: &str) -> String {
    PIPELINE.with(|p| {
        let a = p.analyze(text);
        let scores: Vec<Value> = p.detector.scores(text).into_iter().map(|(lang, score)| json!({ "lang": lang, "score": score })).collect();
        json!({
            "language": a.verdict.lang,
            "confidence": a.verdict.confidence,
            "accepted": a.verdict.is(&p.language),
            "scores": scores,
            "tokens": a.tokens,
            "sentiment": { "score": a.sentiment.score, "label": a.sentiment.label.as_str() },
        })
        .to_string()
    })
}

/// Gaussian blobs on a circle, standardized, then a k-means elbow scan over
/// k = 1..=8 and the clustering at the chosen knee.
#[wasm_bindgen]
pub fn kmeans_elbow(clusters: u32, per_cluster: u32, spread: f64, seed: u32) -> String {
    respond(elbow_inner(clusters as usize, per_cluster as usize, spread, u64::from(seed)))
}

fn elbow_inner(clusters: usize, per: usize, spread: f64, seed: u64) -> Result<Value, String> {
    if !(1..=MAX_K).contains(&clusters) || per == 0 || per > 500 || !(spread > 0.0) {
        return Err(format!("need 1..={MAX_K} clusters, 1..=500 points each and a positive spread"));
    }
    let mut rng = seeded(seed);
    let mut rows = Vec::with_capacity(clusters * per);
    for c in 0..clusters {
        let angle = std::f64::consts::TAU * c as f64 / clusters as f64;
        let (cx, cy) = if clusters == 1 { (0.0, 0.0) } else { (10.0 * angle.cos(), 10.0 * angle.sin()) };
        for _ in 0..per {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            rows.push([cx + spread * dx, cy + spread * dy]);
        }
    }
    let x = Matrix::from_rows(&rows).into_standardized();
    let params = KmeansParams { seed, ..KmeansParams::default() };
    let scan = elbow_scan(&x, 1, MAX_K.min(x.nrows()), &params).map_err(|e| e.to_string())?;
    let fit = fit_kmeans(&x, scan.knee, &params).map_err(|e| e.to_string())?;
    let points: Vec<[f64; 2]> = (0..x.nrows()).map(|i| [x.get(i, 0), x.get(i, 1)]).collect();
    Ok(json!({
        "points": points,
        "labels": fit.labels,
        "centroids": fit.centroids,
        "ks": scan.ks,
        "inertia": scan.inertia,
        "knee": scan.knee,
        "low_confidence": scan.low_confidence,
    }))
}

/// Scores drawn from two unit normals `separation` apart; returns the ROC
/// curve, its AUC and the confusion metrics at `threshold`.
#[wasm_bindgen]
pub fn roc_demo(separation: f64, per_class: u32, threshold: f64, seed: u32) -> String {
    respond(roc_inner(separation, per_class as usize, threshold, u64::from(seed)))
}

fn roc_inner(separation: f64, per: usize, threshold: f64, seed: u64) -> Result<Value, String> {
    if !separation.is_finite() || !threshold.is_finite() || per == 0 || per > 5000 {
        return Err("need finite separation and threshold and 1..=5000 points per class".into());
    }
    let mut rng = seeded(seed);
    let mut y = Vec::with_capacity(2 * per);
    let mut scores = Vec::with_capacity(2 * per);
    for class in [0.0, 1.0] {
        let mean = (class - 0.5) * separation;
        for _ in 0..per {
            let z: f64 = rng.sample(StandardNormal);
            y.push(class);
            scores.push(mean + z);
        }
    }
    let roc = roc_curve_auc(&y, &scores).map_err(|e| e.to_string())?;
    let pred: Vec<f64> = scores.iter().map(|&s| if s >= threshold { 1.0 } else { 0.0 }).collect();
    let m = classification_metrics(&y, &pred).map_err(|e| e.to_string())?;
    Ok(json!({
        "points": roc.points,
        "auc": roc.auc,
        "threshold": threshold,
        "metrics": m,
    }))
}
