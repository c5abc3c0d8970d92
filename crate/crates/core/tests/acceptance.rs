//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! any failure makes the process exit non-zero.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use defect_reasoner::defchar::{
    colour_stats, column_index, extract_defchars, Combination, interior_angles, rgb_to_hsv, total_variation,
    HsvHistogram, HsvPixel, HUE_LEVELS, SV_LEVELS,
};
use defect_reasoner::explain::{parse_export, validation_line};
use defect_reasoner::geometry::{Point, Polygon};
use defect_reasoner::ingest::{CategoryId, GroundTruthDefect, PredictedDefect, RasterImage};
use defect_reasoner::pipeline::{grid_scores, prepare, run_pipeline, GridRow, Prepared, RunConfig};
use defect_reasoner::reasoner::{
    analyse_forest, climb_forest, plant_forest, validate_forest, DecisionTree, Degree, Forest, Status, TreeParams,
};
use defect_reasoner::synth::{generate, DetectionRule, SynthConfig};
use defect_reasoner::targets::{match_defects, polygon_iou, IouThreshold, TargetKind};

const C1_TIME_LIMIT: Duration = Duration::from_secs(60);
const C7_TIME_LIMIT: Duration = Duration::from_secs(120);
const STUMP_BAND: (f64, f64) = (0.50, 0.65);
const TS_FORMS_TOLERANCE: f64 = 1e-12;
const GEOMETRY_TOLERANCE: f64 = 1e-9;
const SIZE_THRESHOLD: usize = 600;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, untrimmed_perfection),
        (2, parameter_monotonicity),
        (3, stump_floor),
        (4, node_score_oracle),
        (5, geometry_colour_oracles),
        (6, matching_properties),
        (7, signal_recovery),
        (8, output_contract),
        (9, determinism),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({detail}; {secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail}; {secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// shared synthetic data

fn synth_workspace(synth: &SynthConfig) -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    generate(synth).unwrap().write(dir.path()).unwrap();
    let config = RunConfig::from_toml("", dir.path()).unwrap();
    (dir, config)
}

fn default_synth() -> SynthConfig {
    SynthConfig {
        seed: 11,
        ..SynthConfig::default()
    }
}

fn has_label_conflict(rows: &[Vec<f64>], targets: &[bool]) -> bool {
    let mut seen: HashMap<Vec<u64>, bool> = HashMap::new();
    for (row, &t) in rows.iter().zip(targets) {
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        if let Some(&prev) = seen.get(&key) {
            if prev != t {
                return true;
            }
        }
        seen.insert(key, t);
    }
    false
}

// 1

fn untrimmed_perfection() -> Outcome {
    let start = Instant::now();
    let (_dir, config) = synth_workspace(&default_synth());
    let prepared = prepare(&config).map_err(|e| e.to_string())?;
    let m = &prepared.matrix;
    ensure!(m.n_rows() == 366, "expected 366 defects, got {}", m.n_rows());
    ensure!(m.n_cols() == 38, "expected 38 characteristics, got {}", m.n_cols());
    let params = TreeParams {
        max_depth: None,
        min_split: 2,
        min_leaf: 1,
        n_trees: 200,
        ..TreeParams::default()
    };
    let mut scores = Vec::new();
    for (kind, targets) in &prepared.targets {
        ensure!(!has_label_conflict(&m.scaled, targets), "duplicate rows with conflicting {kind} labels");
        let forest = plant_forest(&m.scaled, &m.column_names, targets, &params).map_err(|e| e.to_string())?;
        let score = validate_forest(&forest, &m.scaled, targets).map_err(|e| e.to_string())?.learning_score;
        ensure!(score == 1.0, "target {kind}: learning score {score}");
        scores.push(format!("{kind}=1.0"));
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < C1_TIME_LIMIT, "took {elapsed:?}");
    Ok(format!("366 defects, {}", scores.join(" ")))
}

// 2

fn parameter_monotonicity() -> Outcome {
    let (_dir, config) = synth_workspace(&default_synth());
    let prepared = prepare(&config).map_err(|e| e.to_string())?;
    let rows = [
        GridRow::new(Some(1), 2, 1),
        GridRow::new(Some(5), 2, 1),
        GridRow::new(Some(10), 2, 1),
        GridRow::new(None, 2, 1),
        GridRow::new(None, 2, 3),
        GridRow::new(None, 2, 5),
    ];
    let table = grid_scores(&config, &prepared, &rows, &[Combination::All]).map_err(|e| e.to_string())?;
    let s: Vec<f64> = table.scores.iter().map(|r| r[0]).collect();
    ensure!(s[0] <= s[1] && s[1] <= s[2] && s[2] <= s[3], "depth ordering broken: {s:?}");
    ensure!(s[3] >= s[4] && s[4] >= s[5], "min_leaf ordering broken: {s:?}");
    Ok(format!(
        "depth 1/5/10/none {:.4}/{:.4}/{:.4}/{:.4}, min_leaf 1/3/5 {:.4}/{:.4}/{:.4}",
        s[0], s[1], s[2], s[3], s[3], s[4], s[5]
    ))
}

// 3

fn stump_floor() -> Outcome {
    let (n, p) = (366, 38);
    let names: Vec<String> = (0..p).map(|c| format!("f{c}")).collect();
    let mut lowest = f64::INFINITY;
    let mut highest = f64::NEG_INFINITY;
    for rep in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let mut targets: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
        targets.shuffle(&mut rng);
        let params = TreeParams {
            max_depth: Some(1),
            seed: rep,
            ..TreeParams::default()
        };
        let forest = plant_forest(&rows, &names, &targets, &params).map_err(|e| e.to_string())?;
        let score = validate_forest(&forest, &rows, &targets).map_err(|e| e.to_string())?.learning_score;
        ensure!(
            (STUMP_BAND.0..=STUMP_BAND.1).contains(&score),
            "repetition {rep}: score {score} outside band"
        );
        lowest = lowest.min(score);
        highest = highest.max(score);
    }
    Ok(format!("50 repetitions in [{lowest:.4}, {highest:.4}]"))
}

// 4

/// Counts of target-1 / target-0 rows reaching each node, by routing.
fn route_counts(tree: &DecisionTree, rows: &[Vec<f64>], targets: &[bool]) -> Vec<(usize, usize)> {
    let mut counts = vec![(0, 0); tree.nodes.len()];
    for (row, &t) in rows.iter().zip(targets) {
        let mut id = 0;
        loop {
            if t {
                counts[id].0 += 1;
            } else {
                counts[id].1 += 1;
            }
            let node = &tree.nodes[id];
            match node.feature {
                None => break,
                Some(f) => {
                    id = if row[f] <= node.threshold {
                        node.true_child.unwrap()
                    } else {
                        node.false_child.unwrap()
                    };
                }
            }
        }
    }
    counts
}

fn degree_oracle(tc1: usize, tc0: usize, n1: usize, n0: usize) -> (Degree, f64) {
    // TS = |tc1 n0 - tc0 n1| / (n1 n0), compared against the quarter points
    let num = (tc1 * n0).abs_diff(tc0 * n1);
    let den = n1 * n0;
    let table = [
        (num == 0, Degree::Empty, 0.0),
        (num * 4 < den, Degree::Weak, 0.1),
        (num * 2 < den, Degree::Middle, 0.2),
        (num < den, Degree::Strong, 0.3),
        (true, Degree::Full, 0.5),
    ];
    let (_, d, b) = table.into_iter().find(|(hit, _, _)| *hit).unwrap();
    (d, b)
}

fn status_oracle(tc1: usize, tc0: usize, fc1: usize, fc0: usize) -> (Status, f64) {
    if tc1 == 0 || tc0 == 0 {
        (Status::Confirmation, 0.5)
    } else if tc1 == fc1 || tc0 == fc0 {
        (Status::HalfReduction, 0.2)
    } else {
        (Status::Reduction, 0.0)
    }
}

fn node_score_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, p) = (200, 12);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
    let targets: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    let names: Vec<String> = (0..p).map(|c| format!("f{c}")).collect();
    let forest: Forest = plant_forest(&rows, &names, &targets, &TreeParams::default()).map_err(|e| e.to_string())?;
    ensure!(forest.trees.len() == 200, "expected 200 trees");
    let records = climb_forest(&forest);
    let analyses = analyse_forest(&records).map_err(|e| e.to_string())?;

    let internal: usize = forest.trees.iter().map(|t| t.internal_count()).sum();
    ensure!(analyses.len() == internal, "{} analyses for {internal} internal nodes", analyses.len());
    let routed: Vec<Vec<(usize, usize)>> = forest.trees.iter().map(|t| route_counts(t, &rows, &targets)).collect();
    let total = n as f64;
    let mut max_form_gap: f64 = 0.0;
    for a in &analyses {
        let r = &a.record;
        let tree = &forest.trees[r.tree_index];
        let node = &tree.nodes[r.node_index];
        let counts = &routed[r.tree_index];
        let (n1, n0) = counts[r.node_index];
        let (tc1, tc0) = counts[node.true_child.unwrap()];
        let (fc1, fc0) = counts[node.false_child.unwrap()];
        ensure!(
            (r.n1, r.n0, r.tc1, r.tc0, r.fc1, r.fc0) == (n1, n0, tc1, tc0, fc1, fc0),
            "tree {} node {}: counts disagree with routing",
            r.tree_index,
            r.node_index
        );
        ensure!(r.root_samples == n, "root sample count {}", r.root_samples);

        let (n1f, n0f) = (n1 as f64, n0 as f64);
        let (tc1f, tc0f, fc1f, fc0f) = (tc1 as f64, tc0 as f64, fc1 as f64, fc0 as f64);
        let ds = 0.5 * (((tc1f - fc1f) / n1f).abs() + ((tc0f - fc0f) / n0f).abs());
        let ts = (tc1f / n1f - tc0f / n0f).abs();
        let ts_false = (fc1f / n1f - fc0f / n0f).abs();
        let u = (n1f + n0f) / total;
        let (deg, b_deg) = degree_oracle(tc1, tc0, n1, n0);
        let (sta, b_sta) = status_oracle(tc1, tc0, fc1, fc0);
        let idx = u * ((1.0 + ds) * ts + b_deg + b_sta);

        ensure!(a.ds == ds, "DS {} vs oracle {ds}", a.ds);
        ensure!(a.ts == ts, "TS {} vs oracle {ts}", a.ts);
        ensure!(a.u == u, "U {} vs oracle {u}", a.u);
        ensure!((a.deg, a.b_deg) == (deg, b_deg), "DEG {:?} vs oracle {deg:?}", a.deg);
        ensure!((a.sta, a.b_sta) == (sta, b_sta), "STA {:?} vs oracle {sta:?}", a.sta);
        ensure!(a.idx == idx, "IDX {} vs oracle {idx}", a.idx);
        ensure!(a.dir == (tc1 >= fc1), "DIR mismatch");
        max_form_gap = max_form_gap.max((ts - ts_false).abs());
    }
    ensure!(max_form_gap <= TS_FORMS_TOLERANCE, "TS forms differ by {max_form_gap}");
    Ok(format!("{} internal nodes exact, TS forms within {max_form_gap:e}", analyses.len()))
}

// 5

fn random_polygon(rng: &mut ChaCha8Rng, cx: f64, cy: f64, radius: f64) -> Polygon {
    let n = rng.random_range(3..=12);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let round = |v: f64| (v * 100.0).round() / 100.0;
    let pts: Vec<(f64, f64)> = angles
        .iter()
        .map(|a| {
            let r = radius * rng.random_range(0.3..1.0);
            (round(cx + r * a.cos()), round(cy + r * a.sin()))
        })
        .collect();
    Polygon::from_coords(&pts).unwrap_or_else(|_| {
        Polygon::from_coords(&[(cx - 5.0, cy - 5.0), (cx + 5.0, cy - 5.0), (cx, cy + 5.0)]).unwrap()
    })
}

/// Even-odd test of a point against raw polygon edges.
fn point_in_polygon(vs: &[Point], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = vs.len() - 1;
    for i in 0..vs.len() {
        let (a, b) = (vs[i], vs[j]);
        if (a.y > y) != (b.y > y) && x >= (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn shoelace(vs: &[Point]) -> f64 {
    let n = vs.len();
    (0..n)
        .map(|i| {
            let (a, b) = (vs[i], vs[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Angle between the two edges at each vertex from the change in heading.
fn angle_oracle(vs: &[Point]) -> Vec<f64> {
    let n = vs.len();
    (0..n)
        .map(|i| {
            let (p, c, q) = (vs[(i + n - 1) % n], vs[i], vs[(i + 1) % n]);
            let h_in = (c.y - p.y).atan2(c.x - p.x).to_degrees();
            let h_out = (q.y - c.y).atan2(q.x - c.x).to_degrees();
            let mut turn = (h_out - h_in).abs();
            if turn > 180.0 {
                turn = 360.0 - turn;
            }
            180.0 - turn
        })
        .collect()
}

fn round_half_up(num: u64, den: u64) -> u32 {
    let q = num as f64 / den as f64;
    (q + 0.5).floor() as u32
}

/// Nearest integer `k` to `num / den` by exhaustive search, ties upward.
fn nearest(num: i64, den: i64, max: i64) -> i64 {
    (0..=max)
        .min_by_key(|&k| ((2 * k * den - 2 * num).abs(), -k))
        .unwrap()
}

fn hsv_oracle(rgb: [u8; 3]) -> HsvPixel {
    let [r, g, b] = rgb.map(i64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let hue = if d == 0 {
        0
    } else {
        let sector = if max == r {
            60 * (g - b) + if g < b { 360 * d } else { 0 }
        } else if max == g {
            60 * (b - r) + 120 * d
        } else {
            60 * (r - g) + 240 * d
        };
        nearest(sector, d, 360) % 360
    };
    let sat = if max == 0 { 0 } else { nearest(254 * d, max, 254) };
    HsvPixel {
        hue: hue as u16,
        saturation: sat as u8,
        value: nearest(254 * max, 255, 254) as u8,
    }
}

struct ChannelOracle {
    avg: u32,
    mode: u32,
    unique: u32,
    linear_range: u32,
    circular_range: u32,
}

fn channel_oracle(values: &[u32], levels: u32) -> ChannelOracle {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap();
    let mode = *counts.iter().find(|(_, &c)| c == best).unwrap().0;
    let lo = *counts.keys().next().unwrap();
    let hi = *counts.keys().last().unwrap();
    let circular = (0..levels)
        .map(|cut| {
            let shifted: Vec<u32> = counts.keys().map(|&v| (v + levels - cut) % levels).collect();
            shifted.iter().max().unwrap() - shifted.iter().min().unwrap()
        })
        .min()
        .unwrap()
        .min(180);
    ChannelOracle {
        avg: round_half_up(values.iter().map(|&v| u64::from(v)).sum(), values.len() as u64),
        mode,
        unique: counts.len() as u32,
        linear_range: hi - lo,
        circular_range: circular,
    }
}

fn random_pixels(rng: &mut ChaCha8Rng) -> Vec<[u8; 3]> {
    let n = rng.random_range(1..400);
    let palette_size = rng.random_range(1..20);
    let palette: Vec<[u8; 3]> = (0..palette_size).map(|_| rng.random::<[u8; 3]>()).collect();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                rng.random::<[u8; 3]>()
            } else {
                palette[rng.random_range(0..palette.len())]
            }
        })
        .collect()
}

fn geometry_colour_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (w, h) = (96u32, 96u32);
    let size_col = column_index("defect_size").unwrap();
    let coverage_col = column_index("coverage").unwrap();
    for case in 0..100 {
        let radius = rng.random_range(6.0..40.0);
        let poly = random_polygon(&mut rng, 48.0, 48.0, radius);
        let pixels: Vec<[u8; 3]> = (0..w * h).map(|_| rng.random::<[u8; 3]>()).collect();
        let image = RasterImage::new(w, h, pixels).unwrap();
        let v = extract_defchars(&image, &poly, &[]).map_err(|e| e.to_string())?;

        let vs = poly.vertices();
        let mut brute = 0usize;
        for row in 0..h {
            for col in 0..w {
                if point_in_polygon(vs, f64::from(col) + 0.5, f64::from(row) + 0.5) {
                    brute += 1;
                }
            }
        }
        let expected = brute.max(1);
        ensure!(
            v.0[size_col] == expected as f64,
            "polygon {case}: defect_size {} vs brute force {expected}",
            v.0[size_col]
        );

        let b = poly.bbox();
        let coverage = shoelace(vs) / ((b.max_x - b.min_x) * (b.max_y - b.min_y));
        ensure!(
            (v.0[coverage_col] - coverage).abs() <= GEOMETRY_TOLERANCE,
            "polygon {case}: coverage {} vs oracle {coverage}",
            v.0[coverage_col]
        );
        for (i, (got, want)) in interior_angles(&poly).iter().zip(angle_oracle(vs)).enumerate() {
            ensure!(
                (got - want).abs() <= GEOMETRY_TOLERANCE,
                "polygon {case} vertex {i}: angle {got} vs oracle {want}"
            );
        }
    }

    let mut max_tv: f64 = 0.0;
    for case in 0..100 {
        let a_rgb = random_pixels(&mut rng);
        let b_rgb = random_pixels(&mut rng);
        let a: Vec<HsvPixel> = a_rgb.iter().map(|p| rgb_to_hsv(p[0], p[1], p[2])).collect();
        let b: Vec<HsvPixel> = b_rgb.iter().map(|p| rgb_to_hsv(p[0], p[1], p[2])).collect();
        for (rgb, hsv) in a_rgb.iter().zip(&a) {
            ensure!(hsv_oracle(*rgb) == *hsv, "region {case}: HSV of {rgb:?} is {hsv:?}");
        }

        let stats = colour_stats(&a).map_err(|e| e.to_string())?;
        let hue = channel_oracle(&a.iter().map(|p| u32::from(p.hue)).collect::<Vec<_>>(), HUE_LEVELS as u32);
        let sat = channel_oracle(&a.iter().map(|p| u32::from(p.saturation)).collect::<Vec<_>>(), SV_LEVELS as u32);
        let bri = channel_oracle(&a.iter().map(|p| u32::from(p.value)).collect::<Vec<_>>(), SV_LEVELS as u32);
        let got = [
            stats.avg_hue,
            stats.mode_hue,
            stats.unique_hue,
            stats.hue_range,
            stats.avg_sat,
            stats.mode_sat,
            stats.unique_sat,
            stats.sat_range,
            stats.avg_bri,
            stats.mode_bri,
            stats.unique_bri,
            stats.bri_range,
        ];
        let want = [
            hue.avg,
            hue.mode,
            hue.unique,
            hue.circular_range,
            sat.avg,
            sat.mode,
            sat.unique,
            sat.linear_range,
            bri.avg,
            bri.mode,
            bri.unique,
            bri.linear_range,
        ];
        ensure!(got == want, "region {case}: colour stats {got:?} vs oracle {want:?}");

        let (ha, hb) = (HsvHistogram::from_pixels(&a), HsvHistogram::from_pixels(&b));
        for (x, y) in [(&ha.hue, &hb.hue), (&ha.saturation, &hb.saturation), (&ha.value, &hb.value)] {
            let ab = total_variation(x, ha.total, y, hb.total);
            let ba = total_variation(y, hb.total, x, ha.total);
            ensure!(ab == ba, "region pair {case}: TV not symmetric ({ab} vs {ba})");
            ensure!((0.0..=1.0).contains(&ab), "region pair {case}: TV {ab} outside [0, 1]");
            max_tv = max_tv.max(ab);
        }
        let same = total_variation(&ha.hue, ha.total, &ha.hue, ha.total);
        ensure!(same == 0.0, "region {case}: TV with itself is {same}");
    }
    Ok(format!("100 polygons and 100 region pairs, largest TV {max_tv:.3}"))
}

// 6

fn scene_polygon(rng: &mut ChaCha8Rng) -> Polygon {
    let (x, y) = (rng.random_range(15.0..50.0), rng.random_range(15.0..50.0));
    random_polygon(rng, x, y, 14.0)
}

fn matching_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let thresholds = [0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 1.0];
    let mut total_pairs = 0;
    for scene in 0..100 {
        let n_truth = rng.random_range(0..6);
        let truths: Vec<GroundTruthDefect> = (0..n_truth)
            .map(|_| GroundTruthDefect {
                region: scene_polygon(&mut rng),
                label: CategoryId(0),
            })
            .collect();
        let n_pred = rng.random_range(0..7);
        let predictions: Vec<PredictedDefect> = (0..n_pred)
            .map(|j| {
                let region = if j < truths.len() && rng.random_bool(0.7) {
                    truths[j].region.translated(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0))
                } else {
                    scene_polygon(&mut rng)
                };
                PredictedDefect {
                    region,
                    label: CategoryId(0),
                    confidence: None,
                }
            })
            .collect();
        let mut previous = usize::MAX;
        for &t in &thresholds {
            let m = match_defects(&truths, &predictions, IouThreshold::new(t).unwrap());
            let truths_used: HashSet<usize> = m.pairs.iter().map(|p| p.truth).collect();
            let preds_used: HashSet<usize> = m.pairs.iter().map(|p| p.prediction).collect();
            ensure!(
                truths_used.len() == m.pairs.len() && preds_used.len() == m.pairs.len(),
                "scene {scene} threshold {t}: matching is not one-to-one"
            );
            for p in &m.pairs {
                let iou = polygon_iou(&truths[p.truth].region, &predictions[p.prediction].region);
                ensure!(iou >= t, "scene {scene}: pair with IoU {iou} accepted at {t}");
                ensure!(iou == p.iou, "scene {scene}: reported IoU {} vs {iou}", p.iou);
            }
            ensure!(
                m.pairs.len() + m.unmatched_true.len() == truths.len()
                    && m.pairs.len() + m.unmatched_pred.len() == predictions.len(),
                "scene {scene}: unmatched lists inconsistent"
            );
            ensure!(
                m.pairs.len() <= previous,
                "scene {scene}: raising the threshold to {t} increased pairs"
            );
            previous = m.pairs.len();
            if t == 0.5 {
                total_pairs += m.pairs.len();
            }
        }
    }
    Ok(format!("100 scenes, {total_pairs} pairs at 0.5"))
}

// 7

fn signal_recovery() -> Outcome {
    let start = Instant::now();
    let synth = SynthConfig {
        detection: DetectionRule::SizeBelow {
            threshold: SIZE_THRESHOLD,
        },
        seed: 7,
        ..SynthConfig::default()
    };
    let (dir, mut config) = synth_workspace(&synth);
    config.targets = vec![TargetKind::D];
    let outcome = run_pipeline(&config).map_err(|e| e.to_string())?;
    let d = &outcome.targets[0];
    ensure!(d.target == TargetKind::D, "unexpected target {}", d.target);
    ensure!(
        d.ranking[0] == "defect_size",
        "top feature is {} (defect_size at rank {:?})",
        d.ranking[0],
        d.ranking.iter().position(|r| r == "defect_size").map(|i| i + 1)
    );
    let text = fs::read_to_string(dir.path().join("out/summary_D.json")).map_err(|e| e.to_string())?;
    let export = parse_export(&text).map_err(|e| e.to_string())?;
    let size = export.features.iter().find(|f| f.name == "defect_size").unwrap();
    let der = size.der.ok_or("defect_size has no effective range")?;
    ensure!(
        der.contains(SIZE_THRESHOLD as f64),
        "DER [{}, {}] misses {SIZE_THRESHOLD}",
        der.lower,
        der.upper
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < C7_TIME_LIMIT, "took {elapsed:?}");
    Ok(format!(
        "defect_size first with DOS {:.3}, DER [{:.1}, {:.1}] {:?}",
        size.dos, der.lower, der.upper, der.direction
    ))
}

// 8

fn learning_score_oracle(forest: &Forest, rows: &[Vec<f64>], targets: &[bool]) -> f64 {
    let mut total = 0.0;
    for tree in &forest.trees {
        let (mut tp, mut fn_, mut tn, mut fp) = (0.0, 0.0, 0.0, 0.0);
        for (row, &t) in rows.iter().zip(targets) {
            let mut id = 0;
            while let Some(f) = tree.nodes[id].feature {
                let node = &tree.nodes[id];
                id = if row[f] <= node.threshold {
                    node.true_child.unwrap()
                } else {
                    node.false_child.unwrap()
                };
            }
            let leaf = &tree.nodes[id];
            let predicted = leaf.n1 > leaf.n0;
            match (t, predicted) {
                (true, true) => tp += 1.0,
                (true, false) => fn_ += 1.0,
                (false, false) => tn += 1.0,
                (false, true) => fp += 1.0,
            }
        }
        total += (tp / (tp + fn_) + tn / (tn + fp)) / 2.0;
    }
    total / forest.trees.len() as f64
}

fn output_contract() -> Outcome {
    let synth = SynthConfig {
        n_images: 40,
        seed: 8,
        ..SynthConfig::default()
    };
    let (dir, mut config) = synth_workspace(&synth);
    config.export_forest = true;
    let outcome = run_pipeline(&config).map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let prepared: Prepared = prepare(&config).map_err(|e| e.to_string())?;
    ensure!(outcome.targets.len() == 4, "{} targets reasoned", outcome.targets.len());
    for t in &outcome.targets {
        let slug = t.target.slug();
        let chart_dir = out.join("charts").join(slug);
        let svgs: Vec<PathBuf> = fs::read_dir(&chart_dir)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "svg"))
            .collect();
        ensure!(svgs.len() == 38, "target {slug}: {} charts", svgs.len());
        for p in &svgs {
            let text = fs::read_to_string(p).map_err(|e| e.to_string())?;
            let doc = roxmltree::Document::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?;
            ensure!(doc.root_element().tag_name().name() == "svg", "{}: root is not svg", p.display());
        }

        let forest_text = fs::read_to_string(out.join(format!("forest_{slug}.json"))).map_err(|e| e.to_string())?;
        let forest = Forest::from_json(&forest_text).map_err(|e| e.to_string())?;
        let targets = &prepared.targets.iter().find(|(k, _)| *k == t.target).unwrap().1;
        let validated = validate_forest(&forest, &prepared.matrix.scaled, targets).map_err(|e| e.to_string())?;
        let oracle = learning_score_oracle(&forest, &prepared.matrix.scaled, targets);
        ensure!(
            format!("{:.2}", oracle * 100.0) == format!("{:.2}", validated.learning_score * 100.0),
            "target {slug}: oracle score {oracle} vs validate_forest {}",
            validated.learning_score
        );
        let report = fs::read_to_string(out.join(format!("report_{slug}.md"))).map_err(|e| e.to_string())?;
        let expected = validation_line(validated.learning_score);
        ensure!(
            report.lines().any(|l| l.trim() == expected),
            "target {slug}: report lacks `{expected}`"
        );

        let json = fs::read_to_string(out.join(format!("summary_{slug}.json"))).map_err(|e| e.to_string())?;
        let parsed = parse_export(&json).map_err(|e| e.to_string())?;
        let again = serde_json::to_string_pretty(&parsed).map_err(|e| e.to_string())? + "\n";
        ensure!(again == json, "target {slug}: summary JSON does not round-trip");
        ensure!(parse_export(&again).map_err(|e| e.to_string())? == parsed, "target {slug}: reparse differs");
        ensure!(parsed.learning_score == validated.learning_score, "target {slug}: summary score differs");
    }
    Ok("4 targets x 38 SVG charts, report lines and JSON verified".into())
}

// 9

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let synth = SynthConfig {
        n_images: 40,
        seed: 9,
        ..SynthConfig::default()
    };
    let (dir, mut config) = synth_workspace(&synth);
    config.export_forest = true;
    config.seed = 42;
    let first = dir.path().join("first");
    let second = dir.path().join("second");

    config.output_dir = first.clone();
    run_pipeline(&config).map_err(|e| e.to_string())?;
    config.output_dir = second.clone();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    pool.install(|| run_pipeline(&config)).map_err(|e| e.to_string())?;

    let (a, b) = (collect_files(&first), collect_files(&second));
    ensure!(!a.is_empty(), "no artifacts written");
    ensure!(
        a.keys().collect::<Vec<_>>() == b.keys().collect::<Vec<_>>(),
        "runs wrote different file sets"
    );
    for (path, bytes) in &a {
        ensure!(b[path] == *bytes, "{} differs between runs", path.display());
    }
    let kinds: HashSet<String> = a
        .keys()
        .filter_map(|p| p.extension().map(|e| e.to_string_lossy().into_owned()))
        .collect();
    let mut kinds: Vec<String> = kinds.into_iter().collect();
    kinds.sort();
    Ok(format!("{} files byte-identical ({}), multi-thread vs one thread", a.len(), kinds.join(", ")))
}
