//! Line-oriented sensor log.
//!
//! ```text
//! ODOM t x y z roll pitch yaw
//! SCAN t sensor_id n
//! x y z              (n lines; INF ux uy uz for beams without a return)
//! TRUTH t x y z roll pitch yaw
//! CHECKPOINT t x y z
//! ```
//!
//! Timestamps must not decrease. Numbers are written with six decimals.

use std::fmt::Write as _;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geom::Pose6D;
use crate::sensor::{RangeScan, Reading};
use crate::sim::GroundTruthLog;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("log line {line}: {message}")]
pub struct LogError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogRecord {
    Odom { t: f64, pose: Pose6D },
    Scan(RangeScan),
    Truth { t: f64, pose: Pose6D },
    Checkpoint { t: f64, position: Vector3<f64> },
}

impl LogRecord {
    pub fn timestamp(&self) -> f64 {
        match self {
            LogRecord::Odom { t, .. } | LogRecord::Truth { t, .. } | LogRecord::Checkpoint { t, .. } => *t,
            LogRecord::Scan(s) => s.timestamp,
        }
    }
}

/// Flattens a simulated run into log records: per tick one ODOM, one SCAN
/// per sensor, one TRUTH and, when flagged, a CHECKPOINT.
pub fn records_from_run(log: &GroundTruthLog) -> Vec<LogRecord> {
    let mut out = Vec::new();
    for tick in &log.ticks {
        out.push(LogRecord::Odom {
            t: tick.t,
            pose: tick.odom.to_pose(),
        });
        out.extend(tick.scans.iter().cloned().map(LogRecord::Scan));
        out.push(LogRecord::Truth { t: tick.t, pose: tick.truth });
        if tick.checkpoint {
            out.push(LogRecord::Checkpoint {
                t: tick.t,
                position: tick.truth.position(),
            });
        }
    }
    out
}

fn write_pose(out: &mut String, tag: &str, t: f64, p: &Pose6D) {
    let _ = writeln!(out, "{tag} {t:.6} {p}");
}

pub fn format_log(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        match r {
            LogRecord::Odom { t, pose } => write_pose(&mut out, "ODOM", *t, pose),
            LogRecord::Truth { t, pose } => write_pose(&mut out, "TRUTH", *t, pose),
            LogRecord::Checkpoint { t, position: p } => {
                let _ = writeln!(out, "CHECKPOINT {t:.6} {:.6} {:.6} {:.6}", p.x, p.y, p.z);
            }
            LogRecord::Scan(scan) => {
                let _ = writeln!(out, "SCAN {:.6} {} {}", scan.timestamp, scan.sensor_id, scan.readings.len());
                for reading in &scan.readings {
                    let _ = match reading {
                        Reading::Hit(p) => writeln!(out, "{:.6} {:.6} {:.6}", p.x, p.y, p.z),
                        Reading::Infinite(d) => writeln!(out, "INF {:.6} {:.6} {:.6}", d.x, d.y, d.z),
                    };
                }
            }
        }
    }
    out
}

fn numbers<const N: usize>(fields: &[&str]) -> Result<[f64; N], String> {
    if fields.len() != N {
        return Err(format!("expected {N} numbers, found {}", fields.len()));
    }
    let mut out = [0.0; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse::<f64>().map_err(|_| format!("'{f}' is not a number"))?;
        if !o.is_finite() {
            return Err(format!("'{f}' is not finite"));
        }
    }
    Ok(out)
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, LogError> {
    let mut records = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut last_t = f64::NEG_INFINITY;
    while let Some((line, raw)) = lines.next() {
        let err = |message: String| LogError { line, message };
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let Some((&tag, rest)) = fields.split_first() else {
            continue;
        };
        let record = match tag {
            "ODOM" | "TRUTH" => {
                let v = numbers::<7>(rest).map_err(err)?;
                let pose = Pose6D::new(v[1], v[2], v[3], v[4], v[5], v[6]);
                if tag == "ODOM" {
                    LogRecord::Odom { t: v[0], pose }
                } else {
                    LogRecord::Truth { t: v[0], pose }
                }
            }
            "CHECKPOINT" => {
                let v = numbers::<4>(rest).map_err(err)?;
                LogRecord::Checkpoint {
                    t: v[0],
                    position: Vector3::new(v[1], v[2], v[3]),
                }
            }
            "SCAN" => {
                let [t, id, n] = rest else {
                    return Err(err("SCAN needs 't sensor_id n'".into()));
                };
                let t = numbers::<1>(&[t]).map_err(err)?[0];
                let n: usize = n.parse().map_err(|_| err(format!("'{n}' is not a count")))?;
                let mut readings = Vec::with_capacity(n);
                for _ in 0..n {
                    let (bline, braw) = lines.next().ok_or_else(|| err(format!("SCAN promises {n} beams, log ends early")))?;
                    let berr = |message: String| LogError { line: bline, message };
                    let bf: Vec<&str> = braw.split_whitespace().collect();
                    let reading = match bf.split_first() {
                        Some((&"INF", d)) => {
                            let d = numbers::<3>(d).map_err(berr)?;
                            let v = Vector3::new(d[0], d[1], d[2]);
                            if v.norm() == 0.0 {
                                return Err(berr("INF direction must be non-zero".into()));
                            }
                            Reading::infinite(v)
                        }
                        _ => {
                            let p = numbers::<3>(&bf).map_err(berr)?;
                            Reading::Hit(Vector3::new(p[0], p[1], p[2]))
                        }
                    };
                    readings.push(reading);
                }
                LogRecord::Scan(RangeScan {
                    sensor_id: id.to_string(),
                    timestamp: t,
                    readings,
                })
            }
            other => return Err(err(format!("unknown record '{other}'"))),
        };
        let t = record.timestamp();
        if t < last_t {
            return Err(err(format!("timestamp {t} goes backwards")));
        }
        last_t = t;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "ODOM 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000\n\
SCAN 0.000000 front 2\n1.000000 0.000000 0.000000\nINF 0.000000 1.000000 0.000000\n\
TRUTH 0.000000 1.000000 2.000000 0.000000 0.000000 0.000000 0.500000\n\
CHECKPOINT 0.000000 1.000000 2.000000 0.000000\n";

    #[test]
    fn parse_and_reformat_is_identity() {
        let recs = parse_log(SAMPLE).unwrap();
        assert_eq!(recs.len(), 4);
        match &recs[1] {
            LogRecord::Scan(s) => {
                assert_eq!(s.sensor_id, "front");
                assert!(s.readings[1].is_infinite());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(format_log(&recs), SAMPLE);
    }

    #[test]
    fn malformed_input_names_the_line() {
        let bad = SAMPLE.replace("INF 0.000000 1.000000 0.000000", "INF x 1 0");
        assert_eq!(parse_log(&bad).unwrap_err().line, 4);
        assert_eq!(parse_log("ODOM 1 2 3").unwrap_err().line, 1);
        assert_eq!(parse_log("SCAN 0 a 3\n1 2 3\n").unwrap_err().line, 1);
        assert_eq!(parse_log("HELLO 0").unwrap_err().line, 1);
        let backwards = "CHECKPOINT 1 0 0 0\nCHECKPOINT 0.5 0 0 0\n";
        assert_eq!(parse_log(backwards).unwrap_err().line, 2);
    }
}
