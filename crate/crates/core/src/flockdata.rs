//! Data model for daily egg-production records.
//!
//! A flock is a cohort of hens of identical age managed all-in all-out: hens
//! only die, they are never restocked, and one record is written per day.
//! This module owns CSV ingestion, structural validation, and the per-age
//! reference curve that featurization compares against.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Ratio of eggs to live hens above which a record is biologically
/// implausible. Leaves headroom for double-yolk days and collection backlog.
pub const MAX_LAY_RATE: f64 = 1.2;

/// Flock identifier. Ordering is lexicographic; generated corpora use
/// zero-padded ids so lexicographic order matches numeric order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlockId(pub String);

impl FlockId {
    pub fn new(id: impl Into<String>) -> Self {
        FlockId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One day of production for one flock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Days since hatch.
    pub age_days: u32,
    /// Live hens at the end-of-day count.
    pub hens_alive: u32,
    pub eggs_collected: u32,
    /// Problem label; `None` when the corpus is unlabeled.
    pub label: Option<bool>,
}

impl DailyRecord {
    /// Bird age in whole weeks.
    pub fn age_week(&self) -> u32 {
        self.age_days / 7
    }
}

/// Fraction of hens that laid on the day: eggs / live hens.
pub fn lay_rate(record: &DailyRecord) -> Result<f64> {
    if record.hens_alive == 0 {
        return Err(Error::Domain(format!(
            "lay_rate undefined on {}: no live hens",
            record.date
        )));
    }
    Ok(f64::from(record.eggs_collected) / f64::from(record.hens_alive))
}

/// Date-ordered daily records for one flock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductionSeries {
    pub flock_id: FlockId,
    pub records: Vec<DailyRecord>,
}

impl ProductionSeries {
    pub fn new(flock_id: FlockId, records: Vec<DailyRecord>) -> Self {
        ProductionSeries { flock_id, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True if any record carries a positive label.
    pub fn has_positive_label(&self) -> bool {
        self.records.iter().any(|r| r.label == Some(true))
    }

    pub fn positive_label_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.label == Some(true))
            .count()
    }

    /// Mean daily eggs divided by the initial housed count — the
    /// eggs-per-housed-bird-per-day indicator of production tables.
    pub fn eggs_per_housed_bird_day(&self) -> Result<f64> {
        let first = self
            .records
            .first()
            .ok_or_else(|| Error::Data("empty series".into()))?;
        if first.hens_alive == 0 {
            return Err(Error::Domain("flock housed zero birds".into()));
        }
        let total: u64 = self.records.iter().map(|r| u64::from(r.eggs_collected)).sum();
        Ok(total as f64 / self.records.len() as f64 / f64::from(first.hens_alive))
    }
}

/// Invariant violated by a record, reported by [`validate_series`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationRule {
    /// age_days did not increase by exactly 1 from the previous record.
    AgeGap,
    /// hens_alive increased; flocks are never restocked.
    HensIncreased,
    /// eggs_collected > MAX_LAY_RATE * hens_alive.
    EggsExceedBound,
}

impl fmt::Display for ValidationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationRule::AgeGap => write!(f, "age_days must increase by exactly 1"),
            ValidationRule::HensIncreased => write!(f, "hens_alive must be non-increasing"),
            ValidationRule::EggsExceedBound => {
                write!(f, "eggs_collected exceeds {MAX_LAY_RATE} x hens_alive")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// Index into `series.records`.
    pub index: usize,
    pub rule: ValidationRule,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    /// Suspicious but not invariant-breaking observations, free-form.
    pub warnings: Vec<(usize, String)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks every series invariant and reports violations by record index.
/// Validation never fails; an empty error list means the series is sound.
pub fn validate_series(series: &ProductionSeries) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, rec) in series.records.iter().enumerate() {
        if f64::from(rec.eggs_collected) > MAX_LAY_RATE * f64::from(rec.hens_alive) {
            report.errors.push(ValidationIssue {
                index: i,
                rule: ValidationRule::EggsExceedBound,
            });
        }
        if rec.hens_alive == 0 {
            report
                .warnings
                .push((i, "no live hens; lay rate undefined from here".into()));
        }
        if i == 0 {
            continue;
        }
        let prev = &series.records[i - 1];
        if rec.age_days != prev.age_days + 1 {
            report.errors.push(ValidationIssue {
                index: i,
                rule: ValidationRule::AgeGap,
            });
        }
        if rec.hens_alive > prev.hens_alive {
            report.errors.push(ValidationIssue {
                index: i,
                rule: ValidationRule::HensIncreased,
            });
        }
        if rec.date != prev.date + chrono::Days::new(1) {
            report
                .warnings
                .push((i, format!("calendar gap before {}", rec.date)));
        }
    }
    report
}

const CSV_HEADER: &str = "flock_id,date,age_days,hens,eggs,label";
const CSV_HEADER_UNLABELED: &str = "flock_id,date,age_days,hens,eggs";

/// Reads one flock from CSV. Records are stable-sorted by date; a missing
/// `label` column leaves every label unset.
pub fn parse_flock_csv(path: impl AsRef<Path>) -> Result<ProductionSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_flock_csv_str(&text, path)
}

fn parse_flock_csv_str(text: &str, path: &Path) -> Result<ProductionSeries> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let labeled = match header.trim_end() {
        CSV_HEADER => true,
        CSV_HEADER_UNLABELED => false,
        other => {
            return Err(Error::parse(
                path,
                1,
                format!("bad header {other:?}, expected {CSV_HEADER:?} (label optional)"),
            ))
        }
    };

    let mut flock_id: Option<FlockId> = None;
    let mut records: Vec<DailyRecord> = Vec::new();
    let mut seen_dates = std::collections::HashSet::new();

    for (lineno0, line) in lines {
        let lineno = lineno0 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if labeled { 6 } else { 5 };
        if fields.len() != expected {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let id = FlockId::new(fields[0]);
        match &flock_id {
            None => flock_id = Some(id),
            Some(existing) if *existing != id => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("mixed flock ids: {existing} and {id}"),
                ));
            }
            _ => {}
        }
        let date = NaiveDate::parse_from_str(fields[1], "%Y-%m-%d")
            .map_err(|e| Error::parse(path, lineno, format!("bad date {:?}: {e}", fields[1])))?;
        if !seen_dates.insert(date) {
            return Err(Error::parse(path, lineno, format!("duplicate date {date}")));
        }
        let num = |name: &str, raw: &str| -> Result<u32> {
            raw.parse::<u32>()
                .map_err(|_| Error::parse(path, lineno, format!("non-numeric {name}: {raw:?}")))
        };
        let label = if labeled {
            match fields[5] {
                "" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("label must be 0, 1 or empty, found {other:?}"),
                    ))
                }
            }
        } else {
            None
        };
        records.push(DailyRecord {
            date,
            age_days: num("age_days", fields[2])?,
            hens_alive: num("hens", fields[3])?,
            eggs_collected: num("eggs", fields[4])?,
            label,
        });
    }

    let flock_id = flock_id.ok_or_else(|| Error::parse(path, 1, "no data rows"))?;
    records.sort_by_key(|r| r.date);
    Ok(ProductionSeries::new(flock_id, records))
}

/// Canonical CSV rendering: full six-column header, empty label cell for
/// unset labels. `write_flock_csv(parse_flock_csv(f))` is byte-identical for
/// canonically formatted input.
pub fn flock_csv_string(series: &ProductionSeries) -> String {
    let mut out = String::with_capacity(series.records.len() * 40 + 40);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in &series.records {
        let label = match rec.label {
            None => "",
            Some(false) => "0",
            Some(true) => "1",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            series.flock_id, rec.date, rec.age_days, rec.hens_alive, rec.eggs_collected, label
        ));
    }
    out
}

pub fn write_flock_csv(series: &ProductionSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, flock_csv_string(series)).map_err(|e| Error::io(path, e))
}

/// Expected lay rate per age-week: the "what this flock should be doing at
/// this age" baseline that feature extraction subtracts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCurve {
    entries: BTreeMap<u32, f64>,
}

impl ReferenceCurve {
    pub fn new(entries: BTreeMap<u32, f64>) -> Result<Self> {
        for (&week, &rate) in &entries {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Data(format!(
                    "reference rate {rate} for week {week} outside [0, 1]"
                )));
            }
        }
        Ok(ReferenceCurve { entries })
    }

    /// Expected rate at `age_week`; an uncovered week is an error, never a
    /// silent extrapolation.
    pub fn rate_for_week(&self, age_week: u32) -> Result<f64> {
        self.entries.get(&age_week).copied().ok_or_else(|| {
            Error::Domain(format!("reference curve does not cover age week {age_week}"))
        })
    }

    pub fn weeks(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> &BTreeMap<u32, f64> {
        &self.entries
    }
}

/// Mean curve across flocks: within each flock, lay rates are averaged per
/// age-week; entry `w` is then the mean of those week-means over flocks, so
/// every flock weighs equally regardless of length. Summation runs in sorted
/// flock-id order, making the result independent of input order.
pub fn build_reference_curve(
    series_set: &[ProductionSeries],
    exclude: Option<&FlockId>,
) -> Result<ReferenceCurve> {
    let mut included: Vec<&ProductionSeries> = series_set
        .iter()
        .filter(|s| Some(&s.flock_id) != exclude)
        .collect();
    if included.is_empty() {
        return Err(Error::Data(
            "reference curve needs at least one non-excluded series".into(),
        ));
    }
    included.sort_by(|a, b| a.flock_id.cmp(&b.flock_id));

    let mut sums: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    for series in included {
        let mut week_acc: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
        for rec in &series.records {
            if rec.hens_alive == 0 {
                continue;
            }
            let entry = week_acc.entry(rec.age_week()).or_insert((0.0, 0));
            entry.0 += lay_rate(rec)?;
            entry.1 += 1;
        }
        for (week, (sum, n)) in week_acc {
            let mean = sum / f64::from(n);
            let entry = sums.entry(week).or_insert((0.0, 0));
            entry.0 += mean;
            entry.1 += 1;
        }
    }

    let entries = sums
        .into_iter()
        .map(|(week, (sum, n))| (week, (sum / f64::from(n)).clamp(0.0, 1.0)))
        .collect();
    ReferenceCurve::new(entries)
}

/// Reads a reference curve from CSV with header `age_week,rate`.
pub fn read_reference_csv(path: impl AsRef<Path>) -> Result<ReferenceCurve> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "age_week,rate")) => {}
        Some((_, other)) => {
            return Err(Error::parse(
                path,
                1,
                format!("bad header {other:?}, expected \"age_week,rate\""),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let mut entries = BTreeMap::new();
    for (lineno0, line) in lines {
        let lineno = lineno0 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (week, rate) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, lineno, "expected age_week,rate"))?;
        let week: u32 = week
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("non-numeric age_week: {week:?}")))?;
        let rate: f64 = rate
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("non-numeric rate: {rate:?}")))?;
        if entries.insert(week, rate).is_some() {
            return Err(Error::parse(path, lineno, format!("duplicate week {week}")));
        }
    }
    ReferenceCurve::new(entries)
}

pub fn reference_csv_string(curve: &ReferenceCurve) -> String {
    let mut out = String::from("age_week,rate\n");
    for (week, rate) in curve.entries() {
        out.push_str(&format!("{week},{rate:.6}\n"));
    }
    out
}

pub fn write_reference_csv(curve: &ReferenceCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, reference_csv_string(curve)).map_err(|e| Error::io(path, e))
}
