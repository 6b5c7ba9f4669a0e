//! Log replay through the filter, per-correction metrics and run summaries.

use std::io::{Read, Write};

use nalgebra::Vector3;
use thiserror::Error;

use crate::config::RunConfig;
use crate::geom::{angle_diff, Pose6D};
use crate::log::LogRecord;
use crate::mcl::{Localizer, MclError};
use crate::worldmap::{ElevationGrid, OccupancyOctree};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Filter(#[from] MclError),
    #[error("no initial pose: set initial_pose in the config or include a TRUTH record")]
    NoInitialPose,
    #[error("metrics line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("metrics csv: {0}")]
    Csv(String),
}

/// One row per correction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    /// 3D distance between estimate and truth; `None` without ground truth.
    pub translation_error: Option<f64>,
    /// Absolute yaw difference, radians.
    pub yaw_error: Option<f64>,
    pub quality: f64,
    pub uncertainty_product: f64,
    pub uncertainty_sum: f64,
    pub particle_count: usize,
    pub estimate: Pose6D,
    pub predict_us: Option<f64>,
    pub correct_us: Option<f64>,
    pub reseed_us: Option<f64>,
}

pub const METRICS_HEADER: [&str; 17] = [
    "t",
    "translation_error",
    "yaw_error",
    "quality",
    "uncertainty_product",
    "uncertainty_sum",
    "particle_count",
    "est_x",
    "est_y",
    "est_z",
    "est_roll",
    "est_pitch",
    "est_yaw",
    "predict_us",
    "correct_us",
    "reseed_us",
    "generation",
];

/// Estimate-vs-checkpoint distance at a CHECKPOINT record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointResult {
    pub t: f64,
    pub checkpoint: Vector3<f64>,
    pub estimate: Vector3<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayOutput {
    pub rows: Vec<MetricsRow>,
    pub generations: Vec<u64>,
    pub checkpoints: Vec<CheckpointResult>,
}

/// Replays log records through the filter.
///
/// Records sharing a timestamp form one tick; after each tick the scheduler
/// decides which phases run. Errors are measured against the latest TRUTH
/// record at or before the correction. Phase timings are wall-clock and
/// only recorded when `record_timings` is set, so that output is otherwise
/// reproducible.
pub fn replay(
    records: &[LogRecord],
    oc: &OccupancyOctree,
    grid: &ElevationGrid,
    config: &RunConfig,
    seed: u64,
    record_timings: bool,
) -> Result<ReplayOutput, EvalError> {
    let initial = config
        .mcl
        .initial_pose
        .or_else(|| {
            records.iter().find_map(|r| match r {
                LogRecord::Truth { pose, .. } => Some(*pose),
                _ => None,
            })
        })
        .ok_or(EvalError::NoInitialPose)?;
    for r in records {
        if let LogRecord::Scan(s) = r {
            if !config.sensors.iter().any(|c| c.spec.id == s.sensor_id) {
                return Err(MclError::UnknownSensor(s.sensor_id.clone()).into());
            }
        }
    }
    let mut loc = Localizer::new(config.mcl.clone(), config.sensor_specs(), oc, grid, initial, seed)?;
    let mut out = ReplayOutput::default();
    let mut truth: Option<Pose6D> = None;
    let mut pending_checkpoints = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let t = records[i].timestamp();
        while i < records.len() && records[i].timestamp() == t {
            match &records[i] {
                LogRecord::Odom { pose, .. } => loc.push_odometry(pose.to_transform()),
                LogRecord::Scan(scan) => loc.push_scan(scan.clone())?,
                LogRecord::Truth { pose, .. } => truth = Some(*pose),
                LogRecord::Checkpoint { position, .. } => pending_checkpoints.push(*position),
            }
            i += 1;
        }
        let report = loc.step(t, None)?;
        if let Some(est) = report.estimate {
            let timing = |v: Option<f64>| if record_timings { v } else { None };
            out.rows.push(MetricsRow {
                t,
                translation_error: truth.map(|g| (est.mean.position() - g.position()).norm()),
                yaw_error: truth.map(|g| angle_diff(est.mean.yaw, g.yaw).abs()),
                quality: est.quality,
                uncertainty_product: est.uncertainty_scalar,
                uncertainty_sum: est.uncertainty_sum,
                particle_count: report.particle_count,
                estimate: est.mean,
                predict_us: timing(report.timings.predict_us),
                correct_us: timing(report.timings.correct_us),
                reseed_us: timing(report.timings.reseed_us),
            });
            out.generations.push(loc.particles().generation);
        }
        if !pending_checkpoints.is_empty() {
            let mean = loc.estimate()?.mean.position();
            for c in pending_checkpoints.drain(..) {
                out.checkpoints.push(CheckpointResult {
                    t,
                    checkpoint: c,
                    estimate: mean,
                    distance: (mean - c).norm(),
                });
            }
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes metrics as CSV with the columns of [`METRICS_HEADER`].
pub fn write_metrics_csv<W: Write>(w: W, out: &ReplayOutput) -> Result<(), EvalError> {
    let mut csv = csv::Writer::from_writer(w);
    let e = |e: csv::Error| EvalError::Csv(e.to_string());
    csv.write_record(METRICS_HEADER).map_err(e)?;
    for (row, generation) in out.rows.iter().zip(&out.generations) {
        let p = row.estimate;
        csv.write_record([
            row.t.to_string(),
            opt(row.translation_error),
            opt(row.yaw_error),
            row.quality.to_string(),
            format!("{:e}", row.uncertainty_product),
            row.uncertainty_sum.to_string(),
            row.particle_count.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.z.to_string(),
            p.roll.to_string(),
            p.pitch.to_string(),
            p.yaw.to_string(),
            opt(row.predict_us),
            opt(row.correct_us),
            opt(row.reseed_us),
            generation.to_string(),
        ])
        .map_err(e)?;
    }
    csv.flush().map_err(|err| EvalError::Csv(err.to_string()))
}

/// Reads metrics written by [`write_metrics_csv`]; errors name the line.
pub fn read_metrics_csv<R: Read>(r: R) -> Result<ReplayOutput, EvalError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut out = ReplayOutput::default();
    let mut saw_header = false;
    for (i, rec) in csv.records().enumerate() {
        let line = i + 1;
        let bad = |message: String| EvalError::Malformed { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if i == 0 {
            if rec.iter().ne(METRICS_HEADER) {
                return Err(bad("unexpected header".into()));
            }
            saw_header = true;
            continue;
        }
        if rec.len() != METRICS_HEADER.len() {
            return Err(bad(format!("expected {} fields, found {}", METRICS_HEADER.len(), rec.len())));
        }
        let num = |k: usize| -> Result<f64, EvalError> {
            rec[k]
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| bad(format!("column '{}': '{}' is not a number", METRICS_HEADER[k], &rec[k])))
        };
        let opt_num = |k: usize| -> Result<Option<f64>, EvalError> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let count = |k: usize| -> Result<u64, EvalError> {
            rec[k]
                .parse::<u64>()
                .map_err(|_| bad(format!("column '{}': '{}' is not a count", METRICS_HEADER[k], &rec[k])))
        };
        let row = MetricsRow {
            t: num(0)?,
            translation_error: opt_num(1)?,
            yaw_error: opt_num(2)?,
            quality: num(3)?,
            uncertainty_product: num(4)?,
            uncertainty_sum: num(5)?,
            particle_count: count(6)? as usize,
            estimate: Pose6D {
                x: num(7)?,
                y: num(8)?,
                z: num(9)?,
                roll: num(10)?,
                pitch: num(11)?,
                yaw: num(12)?,
            },
            predict_us: opt_num(13)?,
            correct_us: opt_num(14)?,
            reseed_us: opt_num(15)?,
        };
        if row.translation_error.is_some_and(|v| v < 0.0) || row.yaw_error.is_some_and(|v| v < 0.0) {
            return Err(bad("errors must be non-negative".into()));
        }
        out.generations.push(count(16)?);
        out.rows.push(row);
    }
    if !saw_header {
        return Err(EvalError::Malformed {
            line: 1,
            message: "empty metrics file".into(),
        });
    }
    Ok(out)
}

/// Aggregates over the rows of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub rows: usize,
    pub mean_translation: Option<f64>,
    pub max_translation: Option<f64>,
    pub mean_yaw: Option<f64>,
    pub max_yaw: Option<f64>,
    pub mean_quality: Option<f64>,
    pub mean_predict_us: Option<f64>,
    pub mean_correct_us: Option<f64>,
    pub mean_reseed_us: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

fn max(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
}

impl Summary {
    pub fn from_rows(rows: &[MetricsRow]) -> Self {
        Self {
            rows: rows.len(),
            mean_translation: mean(rows.iter().filter_map(|r| r.translation_error)),
            max_translation: max(rows.iter().filter_map(|r| r.translation_error)),
            mean_yaw: mean(rows.iter().filter_map(|r| r.yaw_error)),
            max_yaw: max(rows.iter().filter_map(|r| r.yaw_error)),
            mean_quality: mean(rows.iter().map(|r| r.quality)),
            mean_predict_us: mean(rows.iter().filter_map(|r| r.predict_us)),
            mean_correct_us: mean(rows.iter().filter_map(|r| r.correct_us)),
            mean_reseed_us: mean(rows.iter().filter_map(|r| r.reseed_us)),
        }
    }

    /// Cross-run aggregate: means of the per-run means, maxima of the
    /// per-run maxima.
    pub fn combine(runs: &[Summary]) -> Self {
        let m = |f: fn(&Summary) -> Option<f64>| mean(runs.iter().filter_map(f));
        let x = |f: fn(&Summary) -> Option<f64>| max(runs.iter().filter_map(f));
        Self {
            rows: runs.iter().map(|s| s.rows).sum(),
            mean_translation: m(|s| s.mean_translation),
            max_translation: x(|s| s.max_translation),
            mean_yaw: m(|s| s.mean_yaw),
            max_yaw: x(|s| s.max_yaw),
            mean_quality: m(|s| s.mean_quality),
            mean_predict_us: m(|s| s.mean_predict_us),
            mean_correct_us: m(|s| s.mean_correct_us),
            mean_reseed_us: m(|s| s.mean_reseed_us),
        }
    }

    pub fn fields(&self) -> [String; 9] {
        [
            self.rows.to_string(),
            opt(self.mean_translation),
            opt(self.max_translation),
            opt(self.mean_yaw),
            opt(self.max_yaw),
            opt(self.mean_quality),
            opt(self.mean_predict_us),
            opt(self.mean_correct_us),
            opt(self.mean_reseed_us),
        ]
    }
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "run",
    "rows",
    "mean_translation_error",
    "max_translation_error",
    "mean_yaw_error",
    "max_yaw_error",
    "mean_quality",
    "mean_predict_us",
    "mean_correct_us",
    "mean_reseed_us",
];

/// Human-readable summary block.
pub fn format_summary(s: &Summary) -> String {
    let show = |v: Option<f64>, unit: &str| v.map_or("n/a".to_string(), |v| format!("{v:.6} {unit}").trim_end().to_string());
    let mut out = String::new();
    out.push_str(&format!("correction steps : {}\n", s.rows));
    out.push_str(&format!("translation error: mean {} max {}\n", show(s.mean_translation, "m"), show(s.max_translation, "m")));
    out.push_str(&format!("yaw error        : mean {} max {}\n", show(s.mean_yaw, "rad"), show(s.max_yaw, "rad")));
    out.push_str(&format!("quality          : mean {}\n", show(s.mean_quality, "")));
    out.push_str(&format!(
        "phase time       : predict {} correct {} reseed {}\n",
        show(s.mean_predict_us, "us"),
        show(s.mean_correct_us, "us"),
        show(s.mean_reseed_us, "us")
    ));
    out
}
