//! Functional datasets: ingestion, validation and canonical CSV emission.
//!
//! A dataset is a list of subjects, each carrying its own irregular set of
//! `(time, value)` observations on the unit interval. Long CSV files with the
//! header `subject_id,time,value` are the on-disk format.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FsvdError, Result};

/// Subjects with fewer points than this cannot pin down a cubic smoothing
/// spline on their own.
pub const MIN_POINTS_FOR_SPLINE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationPoint {
    pub time: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectSeries {
    pub id: String,
    pub points: Vec<ObservationPoint>,
}

impl SubjectSeries {
    pub fn new(id: impl Into<String>, points: Vec<ObservationPoint>) -> Self {
        SubjectSeries {
            id: id.into(),
            points,
        }
    }

    pub fn from_pairs(id: impl Into<String>, times: &[f64], values: &[f64]) -> Self {
        let points = times
            .iter()
            .zip(values)
            .map(|(&time, &value)| ObservationPoint { time, value })
            .collect();
        SubjectSeries::new(id, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.time).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Validated collection of subject series.
///
/// Within a subject, times are strictly increasing. Construction sorts points
/// and averages exact duplicate times.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalDataset {
    subjects: Vec<SubjectSeries>,
}

impl FunctionalDataset {
    pub fn new(subjects: Vec<SubjectSeries>) -> Result<Self> {
        Self::new_counting_merges(subjects).map(|(ds, _)| ds)
    }

    /// Like [`FunctionalDataset::new`] but also reports how many duplicate
    /// `(subject, time)` observations were merged.
    pub fn new_counting_merges(subjects: Vec<SubjectSeries>) -> Result<(Self, usize)> {
        if subjects.is_empty() {
            return Err(FsvdError::EmptyDataset);
        }
        let mut merged = 0;
        let mut out = Vec::with_capacity(subjects.len());
        for mut s in subjects {
            if s.points.is_empty() {
                return Err(FsvdError::InvalidDataset(format!(
                    "subject `{}` has no observations",
                    s.id
                )));
            }
            for p in &s.points {
                if !p.time.is_finite() || !p.value.is_finite() {
                    return Err(FsvdError::InvalidDataset(format!(
                        "subject `{}` has a non-finite observation",
                        s.id
                    )));
                }
                if !(0.0..=1.0).contains(&p.time) {
                    return Err(FsvdError::TimeOutOfRange {
                        subject: s.id.clone(),
                        time: p.time,
                    });
                }
            }
            s.points.sort_by(|a, b| a.time.total_cmp(&b.time));
            let (points, m) = merge_duplicate_times(&s.points);
            merged += m;
            s.points = points;
            out.push(s);
        }
        Ok((FunctionalDataset { subjects: out }, merged))
    }

    /// The subjects named in `ids`, in that order. On a miss, returns the
    /// first id that is not present.
    pub fn select_subjects(&self, ids: &[String]) -> std::result::Result<Self, String> {
        let subjects = ids
            .iter()
            .map(|id| {
                self.subjects
                    .iter()
                    .find(|s| &s.id == id)
                    .cloned()
                    .ok_or_else(|| id.clone())
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(FunctionalDataset { subjects })
    }

    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    pub fn subjects(&self) -> &[SubjectSeries] {
        &self.subjects
    }

    pub fn subject(&self, i: usize) -> &SubjectSeries {
        &self.subjects[i]
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }

    pub fn total_points(&self) -> usize {
        self.subjects.iter().map(|s| s.len()).sum()
    }

    /// Sorted, deduplicated union of observation times.
    pub fn time_union(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .subjects
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.time))
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Same dataset with every value replaced through `f(subject, point)`.
    pub fn map_values<F>(&self, mut f: F) -> FunctionalDataset
    where
        F: FnMut(usize, &ObservationPoint) -> f64,
    {
        let subjects = self
            .subjects
            .iter()
            .enumerate()
            .map(|(i, s)| SubjectSeries {
                id: s.id.clone(),
                points: s
                    .points
                    .iter()
                    .map(|p| ObservationPoint {
                        time: p.time,
                        value: f(i, p),
                    })
                    .collect(),
            })
            .collect();
        FunctionalDataset { subjects }
    }
}

fn merge_duplicate_times(sorted: &[ObservationPoint]) -> (Vec<ObservationPoint>, usize) {
    let mut out: Vec<ObservationPoint> = Vec::with_capacity(sorted.len());
    let mut merged = 0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        let mut j = i;
        let mut sum = 0.0;
        while j < sorted.len() && sorted[j].time == t {
            sum += sorted[j].value;
            j += 1;
        }
        let count = j - i;
        merged += count - 1;
        out.push(ObservationPoint {
            time: t,
            value: if count == 1 { sorted[i].value } else { sum / count as f64 },
        });
        i = j;
    }
    (out, merged)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub min_j: usize,
    pub max_j: usize,
    pub time_range_raw: (f64, f64),
    pub n_duplicate_times_merged: usize,
    pub warnings: Vec<String>,
}

/// Affine time map and optional per-subject value standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingInfo {
    pub time_offset: f64,
    pub time_scale: f64,
    pub per_subject_center: Option<Vec<f64>>,
    pub per_subject_scale: Option<Vec<f64>>,
}

impl ScalingInfo {
    pub fn identity() -> Self {
        ScalingInfo {
            time_offset: 0.0,
            time_scale: 1.0,
            per_subject_center: None,
            per_subject_scale: None,
        }
    }

    pub fn to_unit_time(&self, raw: f64) -> f64 {
        ((raw - self.time_offset) / self.time_scale).clamp(0.0, 1.0)
    }

    pub fn to_raw_time(&self, unit: f64) -> f64 {
        self.time_offset + unit * self.time_scale
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ValueNormalization {
    #[default]
    None,
    PerSubjectZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IngestOptions {
    pub rescale_time: bool,
    pub normalize_values: ValueNormalization,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            rescale_time: true,
            normalize_values: ValueNormalization::None,
        }
    }
}

pub fn ingest_long_csv(
    path: impl AsRef<Path>,
    options: &IngestOptions,
) -> Result<(FunctionalDataset, ScalingInfo, ValidationReport)> {
    let file = std::fs::File::open(path)?;
    read_long_csv(file, options)
}

/// Parse a long CSV (`subject_id,time,value`) from any reader.
pub fn read_long_csv<R: Read>(
    reader: R,
    options: &IngestOptions,
) -> Result<(FunctionalDataset, ScalingInfo, ValidationReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FsvdError::MalformedRow {
                line: 1,
                reason: format!("missing column `{name}`"),
            })
    };
    let (c_id, c_time, c_value) = (col("subject_id")?, col("time")?, col("value")?);

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<ObservationPoint>> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            FsvdError::MalformedRow {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| record.get(c).unwrap_or("");
        let parse = |c: usize, name: &'static str| -> Result<f64> {
            let v: f64 = field(c).parse().map_err(|_| FsvdError::MalformedRow {
                line,
                reason: format!("cannot parse {name} `{}`", field(c)),
            })?;
            if !v.is_finite() {
                return Err(FsvdError::NonFiniteValue { line, field: name });
            }
            Ok(v)
        };
        let id = field(c_id).to_string();
        if id.is_empty() {
            return Err(FsvdError::MalformedRow {
                line,
                reason: "empty subject_id".into(),
            });
        }
        let time = parse(c_time, "time")?;
        let value = parse(c_value, "value")?;
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            })
            .push(ObservationPoint { time, value });
    }
    if order.is_empty() {
        return Err(FsvdError::EmptyDataset);
    }

    let (tmin, tmax) = rows
        .values()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.time), hi.max(p.time))
        });
    let mut scaling = ScalingInfo::identity();
    if options.rescale_time {
        if tmax <= tmin {
            return Err(FsvdError::DegenerateTimeRange);
        }
        scaling.time_offset = tmin;
        scaling.time_scale = tmax - tmin;
    }

    // Merge duplicates on raw times, then map to the unit interval.
    let mut subjects = Vec::with_capacity(order.len());
    let mut merged = 0;
    for id in &order {
        let mut pts = rows.remove(id).unwrap_or_default();
        pts.sort_by(|a, b| a.time.total_cmp(&b.time));
        let (mut pts, m) = merge_duplicate_times(&pts);
        merged += m;
        if options.rescale_time {
            for p in pts.iter_mut() {
                p.time = scaling.to_unit_time(p.time);
            }
        }
        subjects.push(SubjectSeries::new(id.clone(), pts));
    }

    if options.normalize_values == ValueNormalization::PerSubjectZ {
        let mut centers = Vec::with_capacity(subjects.len());
        let mut scales = Vec::with_capacity(subjects.len());
        for s in subjects.iter_mut() {
            let n = s.points.len() as f64;
            let mean = s.points.iter().map(|p| p.value).sum::<f64>() / n;
            let var = s.points.iter().map(|p| (p.value - mean).powi(2)).sum::<f64>() / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for p in s.points.iter_mut() {
                p.value = (p.value - mean) / sd;
            }
            centers.push(mean);
            scales.push(sd);
        }
        scaling.per_subject_center = Some(centers);
        scaling.per_subject_scale = Some(scales);
    }

    let ds = FunctionalDataset::new(subjects)?;
    let mut report = validate_dataset(&ds);
    report.time_range_raw = (tmin, tmax);
    report.n_duplicate_times_merged = merged;
    Ok((ds, scaling, report))
}

/// Count subjects and points; warn about subjects too short for a spline.
pub fn validate_dataset(ds: &FunctionalDataset) -> ValidationReport {
    let lens: Vec<usize> = ds.subjects().iter().map(|s| s.len()).collect();
    let min_j = lens.iter().copied().min().unwrap_or(0);
    let max_j = lens.iter().copied().max().unwrap_or(0);
    let (lo, hi) = ds
        .subjects()
        .iter()
        .flat_map(|s| s.points.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.time), hi.max(p.time))
        });
    let warnings = ds
        .subjects()
        .iter()
        .filter(|s| s.len() < MIN_POINTS_FOR_SPLINE)
        .map(|s| {
            format!(
                "subject `{}` has {} observation(s); fewer than {} cannot constrain a cubic smoother alone",
                s.id,
                s.len(),
                MIN_POINTS_FOR_SPLINE
            )
        })
        .collect();
    ValidationReport {
        n: ds.n(),
        min_j,
        max_j,
        time_range_raw: (lo, hi),
        n_duplicate_times_merged: 0,
        warnings,
    }
}

/// 17 significant digits; parses back to the identical f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Emit the canonical long CSV: subjects in stored order, times ascending.
pub fn write_long_csv<W: Write>(ds: &FunctionalDataset, mut w: W) -> Result<()> {
    writeln!(w, "subject_id,time,value")?;
    for s in ds.subjects() {
        for p in &s.points {
            writeln!(w, "{},{},{}", s.id, format_f64(p.time), format_f64(p.value))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_long_csv_file(ds: &FunctionalDataset, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_long_csv(ds, std::io::BufWriter::new(f))
}
