//! Browser bindings: shape characteristics of a drawn polygon, the score of
//! a single split, and a small synthetic reasoning run.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use defect_reasoner::defchar::{build_matrix, minmax_scale, shape_complexity, shape_info};
use defect_reasoner::explain::{render_chart, validation_line, ChartSpec};
use defect_reasoner::geometry::{rasterize_own, Polygon};
use defect_reasoner::reasoner::{analyse_node, reason, NodeRecord, TreeParams};
use defect_reasoner::synth::{generate, DetectionRule, SynthConfig};
use defect_reasoner::targets::{dataset_targets, IouThreshold, TargetKind, Task};

/// `coords` is a JSON array of `[x, y]` pairs.
pub fn polygon_summary(coords: &str) -> Result<Value, String> {
    let pts: Vec<(f64, f64)> = serde_json::from_str::<Vec<[f64; 2]>>(coords)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|[x, y]| (x, y))
        .collect();
    let polygon = Polygon::from_coords(&pts).map_err(|e| e.to_string())?;
    let shape = shape_info(&polygon);
    let complexity = shape_complexity(&polygon);
    Ok(json!({
        "number_of_edges": shape.number_of_edges,
        "coverage": shape.coverage,
        "aspect_ratio": shape.aspect_ratio,
        "avg_turning_angle": shape.avg_turning_angle,
        "mode_turning_angle": shape.mode_turning_angle,
        "edge_ratio": complexity.edge_ratio,
        "followed_turns": complexity.followed_turns,
        "small_turns": complexity.small_turns,
        "reversed_turns": complexity.reversed_turns,
        "defect_size": rasterize_own(&polygon).count(),
        "area": polygon.area(),
    }))
}

pub fn split_scores(n1: usize, n0: usize, tc1: usize, tc0: usize, total: usize) -> Result<Value, String> {
    if tc1 > n1 || tc0 > n0 {
        return Err("a child cannot hold more samples than its parent".into());
    }
    let record = NodeRecord {
        tree_index: 0,
        node_index: 0,
        feature: 0,
        threshold: 0.5,
        depth: 0,
        root_samples: total,
        n1,
        n0,
        tc1,
        tc0,
        fc1: n1 - tc1,
        fc0: n0 - tc0,
    };
    let a = analyse_node(&record, total).map_err(|e| e.to_string())?;
    serde_json::to_value(&a).map_err(|e| e.to_string())
}

/// Detection misses every defect below `threshold` pixels; reasons over the
/// undetected target and charts the top characteristic.
pub fn size_reasoning(seed: u64, threshold: usize, n_trees: usize) -> Result<Value, String> {
    let synth = SynthConfig {
        n_images: 40,
        detection: DetectionRule::SizeBelow { threshold },
        seed,
        ..SynthConfig::default()
    };
    let dataset = generate(&synth)
        .and_then(|s| s.assemble())
        .map_err(|e| e.to_string())?;
    let targets = dataset_targets(&dataset, Task::Detection, IouThreshold::default()).map_err(|e| e.to_string())?;
    let d = targets.get(TargetKind::D).ok_or("no undetected target")?;
    let matrix = minmax_scale(&build_matrix(&dataset).map_err(|e| e.to_string())?);
    let params = TreeParams {
        n_trees,
        seed,
        ..TreeParams::default()
    };
    let r = reason(&matrix, d, &params).map_err(|e| e.to_string())?;
    let ranked = r.summary.ranked();
    let top = ranked[0];
    let values: Vec<f64> = matrix.raw.iter().map(|row| row[top.column]).collect();
    let chart = render_chart(&ChartSpec::new("D", top, &values, d));
    let ranking: Vec<Value> = ranked
        .iter()
        .take(8)
        .map(|f| json!({ "name": f.name, "dos": f.dos, "dis": f.dis, "duf": f.duf }))
        .collect();
    Ok(json!({
        "defects": matrix.n_rows(),
        "undetected": d.iter().filter(|&&x| x).count(),
        "validation": validation_line(r.validation.learning_score),
        "ranking": ranking,
        "chart": chart,
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn polygon_defchars(coords: &str) -> Result<String, JsValue> {
    to_js(polygon_summary(coords))
}

#[wasm_bindgen]
pub fn node_scores(n1: usize, n0: usize, tc1: usize, tc0: usize, total: usize) -> Result<String, JsValue> {
    to_js(split_scores(n1, n0, tc1, tc0, total))
}

#[wasm_bindgen]
pub fn synthetic_reasoning(seed: u32, threshold: usize, n_trees: usize) -> Result<String, JsValue> {
    to_js(size_reasoning(u64::from(seed), threshold, n_trees))
}
