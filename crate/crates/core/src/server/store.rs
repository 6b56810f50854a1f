//! Embedded time-series store.
//!
//! One ordered raw series per `(batch, metric)` plus rollups at 1 min,
//! 15 min and 1 h. Rollups are maintained on append and cover valid points
//! only. Raw points older than the retention window (measured from the
//! newest point of the series) are pruned; rollups are kept indefinitely.
//! With a backing file every append is also written as one JSON line and
//! replayed on open.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metric::Metric;
use crate::domain::{codec, BatchId, WallMs};

pub const DEFAULT_RAW_RETENTION: Duration = Duration::from_secs(30 * 24 * 3600);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    #[serde(rename = "timestamp")]
    pub t: WallMs,
    pub value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "1m")]
    Minute,
    #[serde(rename = "15m")]
    QuarterHour,
    #[serde(rename = "1h")]
    Hour,
}

impl Resolution {
    pub const ROLLUPS: [Resolution; 3] = [Resolution::Minute, Resolution::QuarterHour, Resolution::Hour];

    pub fn bucket_ms(self) -> Option<i64> {
        match self {
            Resolution::Raw => None,
            Resolution::Minute => Some(60_000),
            Resolution::QuarterHour => Some(900_000),
            Resolution::Hour => Some(3_600_000),
        }
    }

    fn rollup_index(self) -> Option<usize> {
        match self {
            Resolution::Raw => None,
            Resolution::Minute => Some(0),
            Resolution::QuarterHour => Some(1),
            Resolution::Hour => Some(2),
        }
    }

    pub fn parse(s: &str) -> Option<Resolution> {
        match s {
            "raw" => Some(Resolution::Raw),
            "1m" => Some(Resolution::Minute),
            "15m" => Some(Resolution::QuarterHour),
            "1h" => Some(Resolution::Hour),
            _ => None,
        }
    }
}

/// One aggregate bucket, `[start, start + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rollup {
    pub start: WallMs,
    pub count: u64,
    pub sum: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Rollup {
    fn new(start: WallMs, v: f64) -> Self {
        Self {
            start,
            count: 1,
            sum: v,
            mean: v,
            min: v,
            max: v,
        }
    }

    fn add(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.mean = self.sum / self.count as f64;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "resolution", content = "points")]
pub enum SeriesData {
    #[serde(rename = "raw")]
    Raw(Vec<Point>),
    #[serde(rename = "rollup")]
    Rollup(Vec<Rollup>),
}

impl SeriesData {
    pub fn len(&self) -> usize {
        match self {
            SeriesData::Raw(v) => v.len(),
            SeriesData::Rollup(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown batch {0}")]
    UnknownBatch(BatchId),
    #[error("no series {metric} in batch {batch}")]
    UnknownMetric { batch: BatchId, metric: Metric },
    #[error("empty range: from {from} is not before to {to}")]
    EmptyRange { from: WallMs, to: WallMs },
    #[error("timestamp {t} not after last stored {last}")]
    NonMonotonic { last: WallMs, t: WallMs },
    #[error("store file: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default)]
struct Series {
    raw: VecDeque<Point>,
    rollups: [BTreeMap<WallMs, Rollup>; 3],
    last: Option<WallMs>,
    appended: u64,
}

impl Series {
    fn push(&mut self, p: Point, retention_ms: i64) {
        self.raw.push_back(p);
        self.last = Some(p.t);
        self.appended += 1;
        if p.valid {
            for res in Resolution::ROLLUPS {
                let w = res.bucket_ms().expect("rollup width");
                let start = p.t.div_euclid(w) * w;
                let idx = res.rollup_index().expect("rollup index");
                self.rollups[idx]
                    .entry(start)
                    .and_modify(|r| r.add(p.value))
                    .or_insert_with(|| Rollup::new(start, p.value));
            }
        }
        let horizon = p.t - retention_ms;
        while self.raw.front().is_some_and(|q| q.t < horizon) {
            self.raw.pop_front();
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub series: usize,
    pub raw_points: usize,
    pub appended: u64,
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    batch: BatchId,
    metric: Metric,
    #[serde(flatten)]
    point: Point,
}

pub struct TimeSeriesStore {
    series: BTreeMap<(BatchId, Metric), Series>,
    retention_ms: i64,
    log: Option<BufWriter<File>>,
}

impl std::fmt::Debug for TimeSeriesStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeSeriesStore")
            .field("series", &self.series.len())
            .field("retention_ms", &self.retention_ms)
            .field("persistent", &self.log.is_some())
            .finish()
    }
}

impl Default for TimeSeriesStore {
    fn default() -> Self {
        Self::new(DEFAULT_RAW_RETENTION)
    }
}

impl TimeSeriesStore {
    pub fn new(raw_retention: Duration) -> Self {
        Self {
            series: BTreeMap::new(),
            retention_ms: raw_retention.as_millis() as i64,
            log: None,
        }
    }

    /// Opens (or creates) a file-backed store, replaying existing lines.
    /// Lines that fail to parse are skipped with a warning.
    pub fn open(path: &Path, raw_retention: Duration) -> Result<Self, StoreError> {
        let mut store = Self::new(raw_retention);
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match codec::from_str::<LogLine>(&line) {
                    Ok(l) => {
                        if let Err(err) = store.append(&l.batch, l.metric, l.point) {
                            tracing::warn!(line = n + 1, %err, "skipping store line");
                        }
                    }
                    Err(err) => tracing::warn!(line = n + 1, %err, "unreadable store line"),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.log = Some(BufWriter::new(file));
        Ok(store)
    }

    pub fn flush(&mut self) -> Result<(), StoreError> {
        if let Some(log) = self.log.as_mut() {
            log.flush()?;
        }
        Ok(())
    }

    /// Appends a point. Timestamps must strictly increase per series.
    pub fn append(&mut self, batch: &BatchId, metric: Metric, point: Point) -> Result<(), StoreError> {
        let series = self.series.entry((batch.clone(), metric)).or_default();
        if let Some(last) = series.last {
            if point.t <= last {
                return Err(StoreError::NonMonotonic { last, t: point.t });
            }
        }
        series.push(point, self.retention_ms);
        if let Some(log) = self.log.as_mut() {
            let line = LogLine {
                batch: batch.clone(),
                metric,
                point,
            };
            codec::to_writer(&mut *log, &line).map_err(io::Error::other)?;
            log.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn last_timestamp(&self, batch: &BatchId, metric: Metric) -> Option<WallMs> {
        self.series.get(&(batch.clone(), metric)).and_then(|s| s.last)
    }

    pub fn has_batch(&self, batch: &BatchId) -> bool {
        self.series.keys().any(|(b, _)| b == batch)
    }

    pub fn metrics(&self, batch: &BatchId) -> Vec<Metric> {
        self.series.keys().filter(|(b, _)| b == batch).map(|(_, m)| *m).collect()
    }

    /// Points appended to a series, including any since pruned.
    pub fn appended(&self, batch: &BatchId, metric: Metric) -> u64 {
        self.series.get(&(batch.clone(), metric)).map_or(0, |s| s.appended)
    }

    /// Series over `[from, to)`. Raw points are returned as stored; rollup
    /// buckets are returned when their start falls in the range.
    pub fn query_range(
        &self,
        batch: &BatchId,
        metric: Metric,
        from: WallMs,
        to: WallMs,
        resolution: Resolution,
    ) -> Result<SeriesData, StoreError> {
        if from >= to {
            return Err(StoreError::EmptyRange { from, to });
        }
        let series = self.series.get(&(batch.clone(), metric)).ok_or_else(|| {
            if self.has_batch(batch) {
                StoreError::UnknownMetric {
                    batch: batch.clone(),
                    metric,
                }
            } else {
                StoreError::UnknownBatch(batch.clone())
            }
        })?;
        Ok(match resolution.rollup_index() {
            None => {
                let lo = series.raw.partition_point(|p| p.t < from);
                let hi = series.raw.partition_point(|p| p.t < to);
                SeriesData::Raw(series.raw.range(lo..hi).copied().collect())
            }
            Some(idx) => {
                let w = resolution.bucket_ms().expect("rollup width");
                let start = from.div_euclid(w) * w;
                SeriesData::Rollup(series.rollups[idx].range(start..to).map(|(_, r)| *r).collect())
            }
        })
    }

    /// Raw points of a whole series.
    pub fn raw(&self, batch: &BatchId, metric: Metric) -> Vec<Point> {
        self.series
            .get(&(batch.clone(), metric))
            .map(|s| s.raw.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats {
            series: self.series.len(),
            raw_points: self.series.values().map(|s| s.raw.len()).sum(),
            appended: self.series.values().map(|s| s.appended).sum(),
        }
    }

    /// Every stored series key.
    pub fn keys(&self) -> Vec<(BatchId, Metric)> {
        self.series.keys().cloned().collect()
    }
}
