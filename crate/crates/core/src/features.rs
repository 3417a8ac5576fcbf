//! Sliding-window featurization.
//!
//! Each eligible day yields six features: deficit against the reference
//! curve (a), change across the window (b), change over one week (c),
//! coefficient of variation of the window's recent half (d), dispersion shift
//! between the window halves (e), and bird age in weeks (f). The target is
//! the problem label `forecast_interval` days ahead of the window's last day.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flockdata::{lay_rate, FlockId, ProductionSeries, ReferenceCurve};

pub const FEATURE_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    /// Days of history per pattern; a multiple of 7, at least 7.
    pub window_size: usize,
    /// Days between the window's last day and the predicted label, 0..=5.
    pub forecast_interval: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window_size: 14,
            forecast_interval: 0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 7 || !self.window_size.is_multiple_of(7) {
            return Err(Error::Config(format!(
                "window_size {} must be a positive multiple of 7",
                self.window_size
            )));
        }
        if self.forecast_interval > 5 {
            return Err(Error::Config(format!(
                "forecast_interval {} outside 0..=5",
                self.forecast_interval
            )));
        }
        Ok(())
    }

    /// First eligible day index: the full window must fit, and feature c
    /// needs the rate from seven days earlier even when the window is only
    /// seven days wide.
    pub fn first_eligible_day(&self) -> usize {
        (self.window_size - 1).max(7)
    }

    /// Eligible day indices for a series of `len` records.
    pub fn eligible_days(&self, len: usize) -> std::ops::Range<usize> {
        let first = self.first_eligible_day();
        let end = len.saturating_sub(self.forecast_interval);
        first.min(end)..end
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    /// Day rate minus the reference rate for the bird's age week.
    pub a: f64,
    /// Day rate minus the rate at the window start.
    pub b: f64,
    /// Day rate minus the rate seven days earlier.
    pub c: f64,
    /// Coefficient of variation of the window's second half, percent.
    pub d: f64,
    /// Sample std of the first half minus sample std of the second half.
    pub e: f64,
    /// Bird age in whole weeks.
    pub f: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; FEATURE_DIM] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn from_array(v: [f64; FEATURE_DIM]) -> Self {
        FeatureVector {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
            e: v[4],
            f: v[5],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pattern {
    pub features: FeatureVector,
    pub target: bool,
    pub flock_id: FlockId,
    /// Day index of the window's last day within the source series.
    pub day_index: usize,
}

/// Sample (n-1) standard deviation; zero for fewer than two points.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Extracts the six features for day `t`. The window covers days
/// `[t - W + 1, t]`; its first `⌊W/2⌋` days form the first half and the rest
/// the second, so for odd windows the middle day counts as recent.
pub fn extract_features(
    series: &ProductionSeries,
    reference: &ReferenceCurve,
    t: usize,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    cfg.validate()?;
    let w = cfg.window_size;
    if t >= series.len() || t + 1 < w || t < 7 {
        return Err(Error::Domain(format!(
            "day {t} has insufficient history for window {w} (need t >= {})",
            cfg.first_eligible_day()
        )));
    }

    let window_start = t + 1 - w;
    let mut rates = Vec::with_capacity(w);
    for rec in &series.records[window_start..=t] {
        rates.push(lay_rate(rec)?);
    }
    let rate_t = rates[w - 1];
    let rate_week_ago = lay_rate(&series.records[t - 7])?;

    let (first_half, second_half) = rates.split_at(w / 2);
    let second_mean = second_half.iter().sum::<f64>() / second_half.len() as f64;
    if second_mean <= 0.0 {
        return Err(Error::Domain(format!(
            "coefficient of variation undefined at day {t}: second-half mean is zero"
        )));
    }

    let record = &series.records[t];
    Ok(FeatureVector {
        a: rate_t - reference.rate_for_week(record.age_week())?,
        b: rate_t - rates[0],
        c: rate_t - rate_week_ago,
        d: 100.0 * sample_std(second_half) / second_mean,
        e: sample_std(first_half) - sample_std(second_half),
        f: f64::from(record.age_week()),
    })
}

/// Builds the patterns of one series against an explicit reference curve.
/// Every eligible day must carry a label at `t + forecast_interval`.
pub fn build_patterns_with_reference(
    series: &ProductionSeries,
    reference: &ReferenceCurve,
    cfg: &FeatureConfig,
) -> Result<Vec<Pattern>> {
    cfg.validate()?;
    let mut patterns = Vec::new();
    for t in cfg.eligible_days(series.len()) {
        let label_day = t + cfg.forecast_interval;
        let target = series.records[label_day].label.ok_or_else(|| {
            Error::Data(format!(
                "flock {} day {label_day} is unlabeled; cannot build targets",
                series.flock_id
            ))
        })?;
        patterns.push(Pattern {
            features: extract_features(series, reference, t, cfg)?,
            target,
            flock_id: series.flock_id.clone(),
            day_index: t,
        });
    }
    Ok(patterns)
}

/// Builds patterns for a whole corpus, featurizing each flock against the
/// leave-that-flock-out reference of the remaining ones. Output is ordered
/// by flock id, then day.
pub fn build_patterns(series_set: &[ProductionSeries], cfg: &FeatureConfig) -> Result<Vec<Pattern>> {
    cfg.validate()?;
    let mut ordered: Vec<&ProductionSeries> = series_set.iter().collect();
    ordered.sort_by(|a, b| a.flock_id.cmp(&b.flock_id));
    let per_flock: Vec<Result<Vec<Pattern>>> = ordered
        .par_iter()
        .map(|series| {
            let reference =
                crate::flockdata::build_reference_curve(series_set, Some(&series.flock_id))?;
            build_patterns_with_reference(series, &reference, cfg)
        })
        .collect();
    let mut out = Vec::new();
    for chunk in per_flock {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Per-feature affine standardization fitted on training patterns only.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Fits a z-score scaler. Features with no variance keep std 1 so scaling
/// stays invertible.
pub fn fit_scaler(train: &[Pattern]) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::Data("cannot fit a scaler on zero patterns".into()));
    }
    let n = train.len() as f64;
    let mut means = vec![0.0; FEATURE_DIM];
    for p in train {
        for (m, v) in means.iter_mut().zip(p.features.to_array()) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; FEATURE_DIM];
    if train.len() > 1 {
        for p in train {
            for (s, (v, m)) in stds.iter_mut().zip(p.features.to_array().iter().zip(&means)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / (n - 1.0)).sqrt();
        }
    }
    for s in &mut stds {
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    Ok(Scaler { means, stds })
}

impl Scaler {
    pub fn identity() -> Self {
        Scaler {
            means: vec![0.0; FEATURE_DIM],
            stds: vec![1.0; FEATURE_DIM],
        }
    }

    pub fn apply(&self, v: &FeatureVector) -> FeatureVector {
        let raw = v.to_array();
        let mut out = [0.0; FEATURE_DIM];
        for i in 0..FEATURE_DIM {
            out[i] = (raw[i] - self.means[i]) / self.stds[i];
        }
        FeatureVector::from_array(out)
    }

    pub fn invert(&self, v: &FeatureVector) -> FeatureVector {
        let scaled = v.to_array();
        let mut out = [0.0; FEATURE_DIM];
        for i in 0..FEATURE_DIM {
            out[i] = scaled[i] * self.stds[i] + self.means[i];
        }
        FeatureVector::from_array(out)
    }
}

pub fn apply_scaler(scaler: &Scaler, v: &FeatureVector) -> FeatureVector {
    scaler.apply(v)
}
