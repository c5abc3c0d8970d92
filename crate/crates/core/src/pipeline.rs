//! End-to-end runs: ingest, targets, characteristic extraction, reasoning
//! and explanation, with artifacts written under one output directory.
//!
//! Layout of the output directory:
//!
//! ```text
//! defchars_raw.csv, defchars_scaled.csv, targets.csv
//! charts/<target>/<feature>.svg
//! report_<target>.md
//! summary_<target>.json
//! grid.csv
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defchar::{build_matrix, minmax_scale, Combination, DefCharMatrix, RawMatrix};
use crate::error::{Error, Result};
use crate::explain::{compose_report_with, export_json, render_chart, ChartSpec};
use crate::ingest::load_dataset;
use crate::reasoner::{plant_forest, reason, validate_forest, TreeParams};
use crate::targets::{dataset_targets, IouThreshold, TargetKind, Task};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub images_dir: PathBuf,
    pub annotations: PathBuf,
    pub predictions: PathBuf,
    pub output_dir: PathBuf,
    pub iou_threshold: IouThreshold,
    pub task: Task,
    /// Empty selects every target the task defines.
    pub targets: Vec<TargetKind>,
    pub combination: Combination,
    /// Growth parameters; the top-level `seed` replaces `forest.seed`.
    pub forest: TreeParams,
    pub seed: u64,
    pub findings_top_k: usize,
    pub mitigations_top_k: usize,
    /// Also write `forest_<target>.json`.
    pub export_forest: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            images_dir: PathBuf::from("images"),
            annotations: PathBuf::from("annotations.json"),
            predictions: PathBuf::from("predictions.json"),
            output_dir: PathBuf::from("out"),
            iou_threshold: IouThreshold::default(),
            task: Task::Joint,
            targets: Vec::new(),
            combination: Combination::All,
            forest: TreeParams::default(),
            seed: 0,
            findings_top_k: 3,
            mitigations_top_k: 5,
            export_forest: false,
        }
    }
}

impl RunConfig {
    /// Parses TOML. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<RunConfig> {
        let mut c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [
            &mut c.images_dir,
            &mut c.annotations,
            &mut c.predictions,
            &mut c.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            seed: self.seed,
            ..self.forest.clone()
        }
    }

    pub fn selected_targets(&self) -> Result<Vec<TargetKind>> {
        let available = self.task.kinds();
        if self.targets.is_empty() {
            return Ok(available.to_vec());
        }
        for t in &self.targets {
            if !available.contains(t) {
                return Err(Error::Config(format!(
                    "target {t} is not defined for the {:?} task",
                    self.task
                )));
            }
        }
        let mut v = self.targets.clone();
        v.sort();
        v.dedup();
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        self.tree_params().validate()?;
        self.selected_targets()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Targets,
    DefChar,
    Reasoner,
    Explain,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Targets => "targets",
            Stage::DefChar => "defchar",
            Stage::Reasoner => "reasoner",
            Stage::Explain => "explain",
            Stage::Output => "output",
        })
    }
}

/// An error tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Characteristic matrix and target vectors for one dataset.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub matrix: DefCharMatrix,
    pub targets: Vec<(TargetKind, Vec<bool>)>,
}

impl Prepared {
    fn selected(&self, kinds: &[TargetKind]) -> Result<Vec<(TargetKind, &[bool])>> {
        kinds
            .iter()
            .map(|&k| {
                self.targets
                    .iter()
                    .find(|(t, _)| *t == k)
                    .map(|(t, v)| (*t, v.as_slice()))
                    .ok_or_else(|| Error::Config(format!("target {k} not available")))
            })
            .collect()
    }
}

/// Loads the dataset, derives targets and extracts all 38 characteristics.
pub fn prepare(config: &RunConfig) -> StageResult<Prepared> {
    config.validate().at(Stage::Config)?;
    let dataset = load_dataset(&config.images_dir, &config.annotations, &config.predictions).at(Stage::Ingest)?;
    let targets = dataset_targets(&dataset, config.task, config.iou_threshold).at(Stage::Targets)?;
    let raw = build_matrix(&dataset).at(Stage::DefChar)?;
    let targets = config
        .task
        .kinds()
        .iter()
        .map(|&k| (k, targets.get(k).expect("task defines target").to_vec()))
        .collect();
    Ok(Prepared {
        matrix: minmax_scale(&raw),
        targets,
    })
}

fn csv_error(e: impl fmt::Display) -> Error {
    Error::Csv(e.to_string())
}

fn targets_csv(ids: &[String], targets: &[(TargetKind, Vec<bool>)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["defect_id".to_string()];
    header.extend(targets.iter().map(|(k, _)| k.slug().to_string()));
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        record.extend(targets.iter().map(|(_, v)| if v[i] { "1" } else { "0" }.to_string()));
        w.write_record(&record)?;
    }
    w.into_inner().map_err(csv_error)
}

/// Reads a table written by [`extract_only`]: `defect_id` then one 0/1
/// column per target slug.
pub fn read_targets_csv(text: &str) -> Result<(Vec<String>, Vec<(TargetKind, Vec<bool>)>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("defect_id") {
        return Err(Error::Csv("first column must be `defect_id`".into()));
    }
    let kinds = headers
        .iter()
        .skip(1)
        .map(str::parse::<TargetKind>)
        .collect::<Result<Vec<_>>>()?;
    let mut ids = Vec::new();
    let mut columns: Vec<Vec<bool>> = vec![Vec::new(); kinds.len()];
    for record in r.records() {
        let record = record?;
        ids.push(record[0].to_string());
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(match &record[c + 1] {
                "1" => true,
                "0" => false,
                v => return Err(Error::Csv(format!("target value `{v}` is not 0 or 1"))),
            });
        }
    }
    Ok((ids, kinds.into_iter().zip(columns).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractOutcome {
    pub n_defects: usize,
    pub files: Vec<PathBuf>,
}

/// Writes `defchars_raw.csv`, `defchars_scaled.csv` and `targets.csv`.
pub fn extract_only(config: &RunConfig) -> StageResult<ExtractOutcome> {
    let prepared = prepare(config)?;
    write_extract(&prepared, &config.output_dir).at(Stage::Output)
}

fn write_extract(prepared: &Prepared, out: &Path) -> Result<ExtractOutcome> {
    let m = &prepared.matrix;
    let mut raw = Vec::new();
    m.write_raw_csv(&mut raw)?;
    let mut scaled = Vec::new();
    m.write_scaled_csv(&mut scaled)?;
    let files = vec![
        (out.join("defchars_raw.csv"), raw),
        (out.join("defchars_scaled.csv"), scaled),
        (out.join("targets.csv"), targets_csv(&m.defect_ids, &prepared.targets)?),
    ];
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    Ok(ExtractOutcome {
        n_defects: m.n_rows(),
        files: files.into_iter().map(|(p, _)| p).collect(),
    })
}

/// Rebuilds prepared data from the raw characteristic and target tables.
pub fn prepare_from_csv(raw_csv: &Path, targets_csv: &Path) -> StageResult<Prepared> {
    let raw_file = fs::File::open(raw_csv).map_err(|e| Error::io(raw_csv, e)).at(Stage::Ingest)?;
    let raw = RawMatrix::read_csv(raw_file).at(Stage::Ingest)?;
    let text = fs::read_to_string(targets_csv)
        .map_err(|e| Error::io(targets_csv, e))
        .at(Stage::Ingest)?;
    let (ids, targets) = read_targets_csv(&text).at(Stage::Ingest)?;
    if ids != raw.defect_ids {
        return Err(Error::Precondition("target and characteristic tables list different defects".into()))
            .at(Stage::Ingest);
    }
    Ok(Prepared {
        matrix: minmax_scale(&raw),
        targets,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetOutcome {
    pub target: TargetKind,
    pub learning_score: f64,
    pub validation_line: String,
    /// Feature names by DOS descending.
    pub ranking: Vec<String>,
}

/// Reasons over every selected target and writes charts, reports and
/// summaries. Outcomes are in target order.
pub fn reason_prepared(config: &RunConfig, prepared: &Prepared) -> StageResult<Vec<TargetOutcome>> {
    let kinds = config.selected_targets().at(Stage::Config)?;
    let selected = prepared.selected(&kinds).at(Stage::Config)?;
    let matrix = prepared.matrix.select_columns(&config.combination.columns());
    let params = config.tree_params();

    let run = |(kind, targets): &(TargetKind, &[bool])| -> StageResult<TargetOutcome> {
        reason_target(config, &matrix, &params, *kind, targets)
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<StageResult<TargetOutcome>> = selected.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<StageResult<TargetOutcome>> = selected.iter().map(run).collect();
    outcomes.into_iter().collect()
}

fn reason_target(
    config: &RunConfig,
    matrix: &DefCharMatrix,
    params: &TreeParams,
    kind: TargetKind,
    targets: &[bool],
) -> StageResult<TargetOutcome> {
    let reasoning = reason(matrix, targets, params)
        .map_err(|e| match e {
            Error::SingleClassTarget => Error::Precondition(format!("target {kind} contains a single class")),
            other => other,
        })
        .at(Stage::Reasoner)?;
    let report = compose_report_with(
        &reasoning.summary,
        &reasoning.validation,
        kind.symbol(),
        config.findings_top_k,
        config.mitigations_top_k,
    );
    let json = export_json(&reasoning.summary, &reasoning.validation, &report).at(Stage::Explain)?;

    let render = |c: usize| {
        let values: Vec<f64> = matrix.raw.iter().map(|r| r[c]).collect();
        let spec = ChartSpec::new(kind.symbol(), &reasoning.summary.features[c], &values, targets);
        (matrix.column_names[c].clone(), render_chart(&spec))
    };
    #[cfg(feature = "parallel")]
    let charts: Vec<(String, String)> = (0..matrix.n_cols()).into_par_iter().map(render).collect();
    #[cfg(not(feature = "parallel"))]
    let charts: Vec<(String, String)> = (0..matrix.n_cols()).map(render).collect();

    let out = &config.output_dir;
    let slug = kind.slug();
    let write = || -> Result<()> {
        for (name, svg) in &charts {
            write_atomic(&out.join("charts").join(slug).join(format!("{name}.svg")), svg.as_bytes())?;
        }
        write_atomic(&out.join(format!("report_{slug}.md")), report.to_markdown().as_bytes())?;
        write_atomic(&out.join(format!("summary_{slug}.json")), json.as_bytes())?;
        if config.export_forest {
            write_atomic(
                &out.join(format!("forest_{slug}.json")),
                reasoning.forest.to_json()?.as_bytes(),
            )?;
        }
        Ok(())
    };
    write().at(Stage::Output)?;
    Ok(TargetOutcome {
        target: kind,
        learning_score: reasoning.validation.learning_score,
        validation_line: report.validation_line,
        ranking: report.ranking.into_iter().map(|r| r.name).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    pub n_defects: usize,
    pub targets: Vec<TargetOutcome>,
}

/// Extraction tables plus charts, report and summary per selected target.
pub fn run_pipeline(config: &RunConfig) -> StageResult<PipelineOutcome> {
    let prepared = prepare(config)?;
    write_extract(&prepared, &config.output_dir).at(Stage::Output)?;
    let targets = reason_prepared(config, &prepared)?;
    Ok(PipelineOutcome {
        n_defects: prepared.matrix.n_rows(),
        targets,
    })
}

/// One parameter row of a grid: `(max_depth, min_split, min_leaf)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRow {
    pub max_depth: Option<usize>,
    pub min_split: usize,
    pub min_leaf: usize,
}

impl GridRow {
    pub const fn new(max_depth: Option<usize>, min_split: usize, min_leaf: usize) -> Self {
        GridRow {
            max_depth,
            min_split,
            min_leaf,
        }
    }

    fn depth_label(&self) -> String {
        self.max_depth.map_or("unlimited".to_string(), |d| d.to_string())
    }
}

/// The eight parameter rows compared by default.
pub const DEFAULT_GRID: [GridRow; 8] = [
    GridRow::new(Some(1), 2, 1),
    GridRow::new(Some(5), 2, 1),
    GridRow::new(Some(10), 2, 1),
    GridRow::new(None, 2, 1),
    GridRow::new(None, 2, 3),
    GridRow::new(None, 2, 5),
    GridRow::new(None, 5, 1),
    GridRow::new(None, 5, 3),
];

/// Mean learning score across targets for each parameter row and
/// combination.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    pub rows: Vec<GridRow>,
    pub combinations: Vec<Combination>,
    /// `scores[row][combination]`.
    pub scores: Vec<Vec<f64>>,
}

impl GridTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = vec!["max_depth".into(), "min_split".into(), "min_leaf".into()];
        header.extend(self.combinations.iter().map(|c| c.name().to_string()));
        w.write_record(&header)?;
        for (row, scores) in self.rows.iter().zip(&self.scores) {
            let mut rec = vec![row.depth_label(), row.min_split.to_string(), row.min_leaf.to_string()];
            rec.extend(scores.iter().map(|s| format!("{:.4}", s)));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(csv_error)
    }
}

impl fmt::Display for GridTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>10} {:>9} {:>8}", "max_depth", "min_split", "min_leaf")?;
        for c in &self.combinations {
            write!(f, " {:>12}", c.name())?;
        }
        writeln!(f)?;
        for (row, scores) in self.rows.iter().zip(&self.scores) {
            write!(f, "{:>10} {:>9} {:>8}", row.depth_label(), row.min_split, row.min_leaf)?;
            for s in scores {
                write!(f, " {:>11.2}%", s * 100.0)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Trains and validates one forest per (row, combination, target) on
/// prepared data.
pub fn grid_scores(
    config: &RunConfig,
    prepared: &Prepared,
    rows: &[GridRow],
    combinations: &[Combination],
) -> StageResult<GridTable> {
    if rows.is_empty() || combinations.is_empty() {
        return Err(Error::Config("grid needs at least one row and one combination".into())).at(Stage::Config);
    }
    let kinds = config.selected_targets().at(Stage::Config)?;
    let selected = prepared.selected(&kinds).at(Stage::Config)?;
    let base = config.tree_params();
    let cells: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|r| (0..combinations.len()).map(move |c| (r, c)))
        .collect();
    let score = |&(r, c): &(usize, usize)| -> Result<f64> {
        let row = rows[r];
        let params = TreeParams {
            max_depth: row.max_depth,
            min_split: row.min_split,
            min_leaf: row.min_leaf,
            ..base.clone()
        };
        let m = prepared.matrix.select_columns(&combinations[c].columns());
        let mut total = 0.0;
        for (_, targets) in &selected {
            let forest = plant_forest(&m.scaled, &m.column_names, targets, &params)?;
            total += validate_forest(&forest, &m.scaled, targets)?.learning_score;
        }
        Ok(total / selected.len() as f64)
    };
    #[cfg(feature = "parallel")]
    let flat: Vec<Result<f64>> = cells.par_iter().map(score).collect();
    #[cfg(not(feature = "parallel"))]
    let flat: Vec<Result<f64>> = cells.iter().map(score).collect();
    let flat = flat.into_iter().collect::<Result<Vec<f64>>>().at(Stage::Reasoner)?;
    Ok(GridTable {
        rows: rows.to_vec(),
        combinations: combinations.to_vec(),
        scores: flat.chunks(combinations.len()).map(<[f64]>::to_vec).collect(),
    })
}

/// Runs the grid and writes `grid.csv`.
pub fn run_grid(config: &RunConfig, rows: &[GridRow], combinations: &[Combination]) -> StageResult<GridTable> {
    let prepared = prepare(config)?;
    let table = grid_scores(config, &prepared, rows, combinations)?;
    let csv = table.to_csv().at(Stage::Output)?;
    write_atomic(&config.output_dir.join("grid.csv"), &csv).at(Stage::Output)?;
    Ok(table)
}
