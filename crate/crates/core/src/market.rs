//! Market price oracle as a deterministic per-step schedule.
//!
//! Schedules are written on the command line as `linear:<p0>:<p1>`,
//! `constant:<p>` or `file:<path>`. A series file holds one price per line;
//! blank lines and `#` comments are skipped.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Floor applied to every emitted price.
pub const DEFAULT_P_MIN: f64 = 0.01;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("step {t} is out of range for a run of {total} steps")]
    IndexOutOfRange { t: usize, total: usize },
    #[error(
        "invalid price schedule `{0}` (expected linear:<p0>:<p1>, constant:<p> or file:<path>)"
    )]
    BadSpec(String),
    #[error("line {line}: `{text}` is not a price")]
    BadSeriesLine { line: usize, text: String },
    #[error("price floor must be positive, got {0}")]
    BadFloor(f64),
    #[error("cannot read price series {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Constant { value: f64 },
    LinearRamp { p_start: f64, p_end: f64 },
    Series { points: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSchedule {
    pub kind: ScheduleKind,
    pub p_min: f64,
}

impl PriceSchedule {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant { value },
            p_min: DEFAULT_P_MIN,
        }
    }

    pub fn linear(p_start: f64, p_end: f64) -> Self {
        Self {
            kind: ScheduleKind::LinearRamp { p_start, p_end },
            p_min: DEFAULT_P_MIN,
        }
    }

    pub fn series(points: Vec<f64>) -> Self {
        Self {
            kind: ScheduleKind::Series { points },
            p_min: DEFAULT_P_MIN,
        }
    }

    pub fn with_floor(mut self, p_min: f64) -> Result<Self, MarketError> {
        if p_min <= 0.0 || !p_min.is_finite() {
            return Err(MarketError::BadFloor(p_min));
        }
        self.p_min = p_min;
        Ok(self)
    }

    pub fn from_series_file(path: impl AsRef<Path>) -> Result<Self, MarketError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| MarketError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::series(parse_series(&text)?))
    }

    /// Number of steps the schedule can serve; `None` when unbounded.
    pub fn len_limit(&self) -> Option<usize> {
        match &self.kind {
            ScheduleKind::Series { points } => Some(points.len()),
            _ => None,
        }
    }

    /// Market price at step `t` of a `total_steps` run.
    ///
    /// The ramp interpolates over `t / (total_steps − 1)` so the last step
    /// lands exactly on `p_end`.
    pub fn price_at(&self, t: usize, total_steps: usize) -> Result<f64, MarketError> {
        let out_of_range = MarketError::IndexOutOfRange {
            t,
            total: total_steps,
        };
        if t >= total_steps {
            return Err(out_of_range);
        }
        let raw = match &self.kind {
            ScheduleKind::Constant { value } => *value,
            ScheduleKind::LinearRamp { p_start, p_end } => {
                if total_steps == 1 {
                    *p_start
                } else {
                    p_start + (p_end - p_start) * t as f64 / (total_steps - 1) as f64
                }
            }
            ScheduleKind::Series { points } => *points.get(t).ok_or(out_of_range)?,
        };
        Ok(raw.max(self.p_min))
    }
}

fn parse_price(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|p| p.is_finite())
}

pub fn parse_series(text: &str) -> Result<Vec<f64>, MarketError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let p = parse_price(body).ok_or_else(|| MarketError::BadSeriesLine {
            line: i + 1,
            text: line.to_string(),
        })?;
        points.push(p);
    }
    Ok(points)
}

impl FromStr for PriceSchedule {
    type Err = MarketError;

    /// Parses `linear:<p0>:<p1>` and `constant:<p>`, and reads the file for
    /// `file:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MarketError::BadSpec(s.to_string());
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "linear" => {
                let (a, b) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Self::linear(
                    parse_price(a).ok_or_else(bad)?,
                    parse_price(b).ok_or_else(bad)?,
                ))
            }
            "constant" => Ok(Self::constant(parse_price(rest).ok_or_else(bad)?)),
            "file" if !rest.is_empty() => Self::from_series_file(rest),
            _ => Err(bad()),
        }
    }
}
