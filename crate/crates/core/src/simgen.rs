//! Deterministic synthetic-flock generator.
//!
//! Produces corpora shaped like a commercial layer farm's records: a logistic
//! rise to a ~97% lay-rate peak around week 28, a slow linear decline to the
//! end of lay, a stable day-of-week collection-routine pattern, multiplicative
//! daily noise, binomial mortality, and rare injected production problems.
//! Every flock's randomness derives from `(seed, flock_index)`, so corpora are
//! reproducible bit for bit and flocks can be generated in parallel.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flockdata::{
    lay_rate, DailyRecord, FlockId, ProductionSeries, ReferenceCurve,
};

/// Logistic growth rate of the onset-of-lay rise, per week.
const RISE_RATE: f64 = 0.9;
/// Week at which the rise is halfway up.
const RISE_MIDPOINT_WEEK: f64 = 22.5;
/// Week where the post-peak linear decline starts.
const PEAK_WEEK: u32 = 28;
/// Total decline from peak by the anchor week.
const DECLINE_TOTAL: f64 = 0.22;
/// Age week where the decline reaches `peak - DECLINE_TOTAL`.
const DECLINE_ANCHOR_WEEK: f64 = 79.0;

/// Zero-sum day-of-week deviations, unit peak amplitude. Each flock applies a
/// fixed random permutation of this pattern for its whole life.
const WEEK_PATTERN: [f64; 7] = [1.0, 0.4, -0.3, -1.0, 0.3, -0.6, 0.2];

/// Mean positive labels one injected event contributes under the default
/// label rule; calibrates event counts against `problem_rate`.
const LABELED_DAYS_PER_EVENT: f64 = 10.0;

/// Minimum spacing between injected events, days.
const EVENT_GAP_DAYS: usize = 15;

/// Per-flock deviation of the clean curve from the canonical shape. Real
/// flocks rise at slightly different speeds and persist differently, which
/// keeps the corpus-mean reference from matching any one flock exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveShape {
    pub rise_rate: f64,
    pub rise_midweek: f64,
    pub decline_total: f64,
}

impl Default for CurveShape {
    fn default() -> Self {
        CurveShape {
            rise_rate: RISE_RATE,
            rise_midweek: RISE_MIDPOINT_WEEK,
            decline_total: DECLINE_TOTAL,
        }
    }
}

fn shaped_mean_curve(age_week: u32, peak_rate: f64, shape: &CurveShape) -> f64 {
    let w = f64::from(age_week);
    let rise = peak_rate / (1.0 + (-shape.rise_rate * (w - shape.rise_midweek)).exp());
    let decline = peak_rate
        - shape.decline_total
            * ((w - f64::from(PEAK_WEEK)) / (DECLINE_ANCHOR_WEEK - f64::from(PEAK_WEEK))).max(0.0);
    rise.min(decline).clamp(0.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub n_flocks: usize,
    /// Inclusive range for the initial housed-bird count.
    pub housed_birds_range: (u32, u32),
    pub start_age_week: u32,
    pub end_age_week: u32,
    /// Inclusive range for the per-flock peak lay rate.
    pub peak_rate_range: (f64, f64),
    /// Peak deviation of the day-of-week routine pattern, as a fraction of
    /// the clean rate.
    pub weekly_cycle_amplitude: f64,
    /// Standard deviation of the multiplicative daily noise.
    pub daily_noise_sd: f64,
    pub mortality_daily_hazard: f64,
    /// Target fraction of days labeled positive across the corpus.
    pub problem_rate: f64,
    /// Fraction of flocks that receive no problem events at all.
    pub clean_flock_fraction: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_flocks: 24,
            housed_birds_range: (19_500, 20_500),
            start_age_week: 19,
            end_age_week: 79,
            peak_rate_range: (0.968, 0.978),
            weekly_cycle_amplitude: 0.045,
            daily_noise_sd: 0.010,
            mortality_daily_hazard: 2.0e-4,
            problem_rate: 0.0185,
            clean_flock_fraction: 0.5,
            seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.n_flocks == 0 {
            return err("n_flocks must be at least 1".into());
        }
        if self.housed_birds_range.0 == 0 || self.housed_birds_range.0 > self.housed_birds_range.1
        {
            return err(format!(
                "bad housed_birds_range {:?}",
                self.housed_birds_range
            ));
        }
        if self.start_age_week >= self.end_age_week {
            return err(format!(
                "start_age_week {} must be below end_age_week {}",
                self.start_age_week, self.end_age_week
            ));
        }
        if !(0.0 < self.peak_rate_range.0
            && self.peak_rate_range.0 <= self.peak_rate_range.1
            && self.peak_rate_range.1 <= 1.0)
        {
            return err(format!("bad peak_rate_range {:?}", self.peak_rate_range));
        }
        for (name, v) in [
            ("weekly_cycle_amplitude", self.weekly_cycle_amplitude),
            ("daily_noise_sd", self.daily_noise_sd),
            ("mortality_daily_hazard", self.mortality_daily_hazard),
            ("clean_flock_fraction", self.clean_flock_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(0.0..=0.1).contains(&self.problem_rate) {
            return err(format!("problem_rate = {} outside [0, 0.1]", self.problem_rate));
        }
        Ok(())
    }

    /// Production days per flock.
    pub fn days(&self) -> usize {
        ((self.end_age_week - self.start_age_week) * 7) as usize
    }
}

/// An injected production problem: a multiplicative rate deficit ramping in
/// over `ramp_days` and holding at `depth` until the event ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemEvent {
    pub onset_day: usize,
    pub duration_days: usize,
    /// Peak relative production deficit, in (0, 1].
    pub depth: f64,
    pub ramp_days: usize,
}

impl ProblemEvent {
    /// Deficit fraction on absolute day `day`, zero outside the event. The
    /// profile is a trapezoid: linear ramp in, plateau at `depth`, linear
    /// ramp back out, all inside `duration_days`.
    pub fn deficit_on(&self, day: usize) -> f64 {
        if day < self.onset_day || day >= self.onset_day + self.duration_days {
            return 0.0;
        }
        let rel = (day - self.onset_day) as f64;
        let remaining = (self.onset_day + self.duration_days - 1 - day) as f64;
        let ramp = self.ramp_days as f64 + 1.0;
        self.depth * (((rel + 1.0) / ramp).min((remaining + 1.0) / ramp)).min(1.0)
    }
}

/// Mechanical stand-in for the expert labeling panel: a day is a problem when
/// the smoothed lay rate runs below the reference by more than a threshold
/// for long enough.
#[derive(Debug, Clone)]
pub struct LabelRule {
    pub deficit_threshold: f64,
    pub min_consecutive_days: usize,
    /// Trailing-mean window applied to the lay rate before thresholding.
    pub smoothing_days: usize,
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule {
            deficit_threshold: 0.04,
            min_consecutive_days: 2,
            smoothing_days: 3,
        }
    }
}

impl LabelRule {
    pub fn validate(&self) -> Result<()> {
        if self.deficit_threshold <= 0.0 {
            return Err(Error::Config("deficit_threshold must be positive".into()));
        }
        if self.min_consecutive_days == 0 {
            return Err(Error::Config("min_consecutive_days must be >= 1".into()));
        }
        if self.smoothing_days == 0 {
            return Err(Error::Config("smoothing_days must be >= 1".into()));
        }
        Ok(())
    }
}

/// One generated flock with its ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedFlock {
    pub series: ProductionSeries,
    pub events: Vec<ProblemEvent>,
    /// Peak parameter of the clean curve this flock was drawn from.
    pub peak_rate: f64,
    /// Per-flock deviation from the canonical curve shape.
    pub shape: CurveShape,
    pub housed_birds: u32,
}

impl GeneratedFlock {
    /// The flock's own clean weekly curve, used as the labeling baseline.
    pub fn true_curve(&self, config: &GeneratorConfig) -> ReferenceCurve {
        let entries: BTreeMap<u32, f64> = (config.start_age_week..config.end_age_week)
            .map(|w| (w, shaped_mean_curve(w, self.peak_rate, &self.shape)))
            .collect();
        ReferenceCurve::new(entries).expect("shaped curve is clamped to [0, 1]")
    }
}

/// Canonical clean lay rate at an age week: logistic rise to the peak, then
/// a linear decline losing `DECLINE_TOTAL` by week 79. Constant within a
/// week. Generated flocks wobble around this shape; see [`CurveShape`].
pub fn mean_curve(age_week: u32, peak_rate: f64) -> f64 {
    shaped_mean_curve(age_week, peak_rate, &CurveShape::default())
}

/// Indices of flocks that receive zero events, chosen once per corpus seed.
fn clean_flock_set(config: &GeneratorConfig) -> Vec<bool> {
    let n_clean = ((config.n_flocks as f64) * config.clean_flock_fraction).round() as usize;
    let mut order: Vec<usize> = (0..config.n_flocks).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    order.shuffle(&mut rng);
    let mut clean = vec![false; config.n_flocks];
    for &idx in order.iter().take(n_clean.min(config.n_flocks)) {
        clean[idx] = true;
    }
    clean
}

fn sample_events(config: &GeneratorConfig, rng: &mut ChaCha12Rng) -> Vec<ProblemEvent> {
    let days = config.days();
    let n_clean = ((config.n_flocks as f64) * config.clean_flock_fraction).round() as usize;
    let n_problem = config.n_flocks.saturating_sub(n_clean.min(config.n_flocks));
    if n_problem == 0 || config.problem_rate == 0.0 {
        return Vec::new();
    }
    // Spread the corpus-wide labeled-day budget over the problem flocks.
    let lambda = config.problem_rate * days as f64 * config.n_flocks as f64
        / (n_problem as f64 * LABELED_DAYS_PER_EVENT);
    let n_events = if lambda > 1.0 {
        1 + Poisson::new(lambda - 1.0).expect("positive lambda").sample(rng) as usize
    } else {
        1
    };

    // Problems start after the rise; early-lay hiccups are not what the
    // label rule is hunting for.
    let earliest = (PEAK_WEEK.saturating_sub(config.start_age_week) as usize * 7).min(days / 4);
    let mut events: Vec<ProblemEvent> = Vec::new();
    for _ in 0..n_events {
        let mut placed = false;
        for _attempt in 0..30 {
            let duration = rng.gen_range(5..=14);
            if earliest + duration + 3 >= days {
                break;
            }
            let onset = rng.gen_range(earliest..days - duration - 3);
            // Two event severities: dramatic cliff-edge drops, and milder
            // slumps that sit much closer to the labeling threshold. Sharp
            // onsets keep labels aligned with the visible deficit.
            let (depth, ramp_days) = if rng.gen_bool(0.7) {
                (rng.gen_range(0.18..0.26), rng.gen_range(0..=1))
            } else {
                (rng.gen_range(0.08..0.13), rng.gen_range(1..=2))
            };
            let overlaps = events.iter().any(|e| {
                onset < e.onset_day + e.duration_days + EVENT_GAP_DAYS
                    && e.onset_day < onset + duration + EVENT_GAP_DAYS
            });
            if overlaps {
                continue;
            }
            events.push(ProblemEvent {
                onset_day: onset,
                duration_days: duration,
                depth,
                ramp_days,
            });
            placed = true;
            break;
        }
        if !placed {
            break;
        }
    }
    events.sort_by_key(|e| e.onset_day);
    events
}

/// Sustained dips too shallow for the label rule: the routine variation an
/// expert panel shrugs off. They give the classifier honest near-boundary
/// negatives without touching the ground-truth event list.
fn sample_sub_dips(
    config: &GeneratorConfig,
    events: &[ProblemEvent],
    rng: &mut ChaCha12Rng,
) -> Vec<ProblemEvent> {
    let days = config.days();
    let earliest = (PEAK_WEEK.saturating_sub(config.start_age_week) as usize * 7).min(days / 4);
    let count = Poisson::new(1.0)
        .expect("positive lambda")
        .sample(rng) as usize;
    let mut dips: Vec<ProblemEvent> = Vec::new();
    for _ in 0..count.min(3) {
        for _attempt in 0..20 {
            let duration = rng.gen_range(5..=10);
            if earliest + duration + 3 >= days {
                break;
            }
            let onset = rng.gen_range(earliest..days - duration - 3);
            let overlaps = events.iter().chain(dips.iter()).any(|e| {
                onset < e.onset_day + e.duration_days + 5
                    && e.onset_day < onset + duration + 5
            });
            if overlaps {
                continue;
            }
            dips.push(ProblemEvent {
                onset_day: onset,
                duration_days: duration,
                depth: rng.gen_range(0.015..0.025),
                ramp_days: rng.gen_range(1..=2),
            });
            break;
        }
    }
    dips
}

/// Generates one flock's unlabeled series plus its ground-truth events,
/// deterministically from `(config.seed, flock_index)`.
pub fn generate_flock(config: &GeneratorConfig, flock_index: usize) -> Result<GeneratedFlock> {
    config.validate()?;
    if flock_index >= config.n_flocks {
        return Err(Error::Config(format!(
            "flock_index {flock_index} out of range for {} flocks",
            config.n_flocks
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(1 + flock_index as u64);

    let housed = rng.gen_range(config.housed_birds_range.0..=config.housed_birds_range.1);
    let peak = rng.gen_range(config.peak_rate_range.0..=config.peak_rate_range.1);
    let shape = CurveShape {
        rise_rate: rng.gen_range(0.85..=1.00),
        rise_midweek: rng.gen_range(22.2..=22.8),
        decline_total: rng.gen_range(0.20..=0.24),
    };
    let mut pattern = WEEK_PATTERN;
    pattern.shuffle(&mut rng);
    let events = if clean_flock_set(config)[flock_index] {
        Vec::new()
    } else {
        sample_events(config, &mut rng)
    };
    let sub_dips = sample_sub_dips(config, &events, &mut rng);

    let noise = Normal::new(1.0, config.daily_noise_sd)
        .map_err(|e| Error::Config(format!("daily_noise_sd: {e}")))?;
    let days = config.days();
    let start_date = NaiveDate::from_ymd_opt(2008, 1, 15).unwrap()
        + chrono::Days::new(97 * flock_index as u64);

    let mut hens = housed;
    let mut records = Vec::with_capacity(days);
    for d in 0..days {
        let week = config.start_age_week + (d as u32) / 7;
        let clean = shaped_mean_curve(week, peak, &shape);
        let cycle = 1.0 + config.weekly_cycle_amplitude * pattern[d % 7];
        let eps: f64 = noise.sample(&mut rng).clamp(0.0, 2.0);
        let deficit: f64 = events
            .iter()
            .chain(sub_dips.iter())
            .map(|e| e.deficit_on(d))
            .sum();
        let rate = (clean * cycle * eps * (1.0 - deficit.min(1.0))).clamp(0.0, 1.0);

        let eggs = Binomial::new(u64::from(hens), rate)
            .expect("rate clamped to [0, 1]")
            .sample(&mut rng) as u32;
        let deaths = Binomial::new(u64::from(hens), config.mortality_daily_hazard)
            .expect("hazard validated")
            .sample(&mut rng) as u32;
        hens -= deaths.min(hens);

        let eggs = eggs.min((crate::flockdata::MAX_LAY_RATE * f64::from(hens)) as u32);
        records.push(DailyRecord {
            date: start_date + chrono::Days::new(d as u64),
            age_days: config.start_age_week * 7 + d as u32,
            hens_alive: hens,
            eggs_collected: eggs,
            label: None,
        });
    }

    let id = FlockId::new(format!("f{:02}", flock_index + 1));
    Ok(GeneratedFlock {
        series: ProductionSeries::new(id, records),
        events,
        peak_rate: peak,
        shape,
        housed_birds: housed,
    })
}

/// Labels each day by the deficit rule: positive when the trailing
/// `smoothing_days` mean of the lay rate sits more than `deficit_threshold`
/// below the equally smoothed reference, sustained for
/// `min_consecutive_days` or longer. Smoothing both sides keeps the steep
/// onset-of-lay rise from reading as a deficit wherever the trailing window
/// straddles an age-week boundary.
pub fn oracle_labels(
    series: &ProductionSeries,
    reference: &ReferenceCurve,
    rule: &LabelRule,
) -> Result<Vec<bool>> {
    rule.validate()?;
    let n = series.len();
    let mut deficits = Vec::with_capacity(n);
    for rec in &series.records {
        deficits.push(reference.rate_for_week(rec.age_week())? - lay_rate(rec)?);
    }

    let mut below = vec![false; n];
    for t in 0..n {
        let from = (t + 1).saturating_sub(rule.smoothing_days);
        let window = &deficits[from..=t];
        let smoothed = window.iter().sum::<f64>() / window.len() as f64;
        below[t] = smoothed > rule.deficit_threshold;
    }

    let mut labels = vec![false; n];
    let mut run_start = 0;
    #[allow(clippy::needless_range_loop)]
    for t in 0..=n {
        if t < n && below[t] {
            continue;
        }
        let run_len = t - run_start;
        if run_len >= rule.min_consecutive_days {
            for day in labels.iter_mut().take(t).skip(run_start) {
                *day = true;
            }
        }
        run_start = t + 1;
    }
    Ok(labels)
}

/// Generates and labels the full corpus. Flocks are independent; labels come
/// from each flock's own clean curve, standing in for the expert panel that
/// knows what the flock should have produced.
pub fn generate_dataset(config: &GeneratorConfig, rule: &LabelRule) -> Result<Vec<GeneratedFlock>> {
    config.validate()?;
    rule.validate()?;
    (0..config.n_flocks)
        .into_par_iter()
        .map(|idx| {
            let mut flock = generate_flock(config, idx)?;
            let curve = flock.true_curve(config);
            let labels = oracle_labels(&flock.series, &curve, rule)?;
            for (rec, label) in flock.series.records.iter_mut().zip(labels) {
                rec.label = Some(label);
            }
            Ok(flock)
        })
        .collect()
}

const GROUND_TRUTH_HEADER: &str = "flock_id,onset_day,duration,depth,ramp";

/// Sidecar ground-truth table of injected events, one row per event.
pub fn ground_truth_csv_string(flocks: &[GeneratedFlock]) -> String {
    let mut out = String::from(GROUND_TRUTH_HEADER);
    out.push('\n');
    for flock in flocks {
        for e in &flock.events {
            out.push_str(&format!(
                "{},{},{},{:.6},{}\n",
                flock.series.flock_id, e.onset_day, e.duration_days, e.depth, e.ramp_days
            ));
        }
    }
    out
}

pub fn write_ground_truth_csv(flocks: &[GeneratedFlock], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ground_truth_csv_string(flocks)).map_err(|e| Error::io(path, e))
}

/// Parses the sidecar back into per-flock events.
pub fn read_ground_truth_csv(path: impl AsRef<Path>) -> Result<Vec<(FlockId, ProblemEvent)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, GROUND_TRUTH_HEADER)) => {}
        Some((_, other)) => {
            return Err(Error::parse(path, 1, format!("bad header {other:?}")));
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let mut events = Vec::new();
    for (lineno0, line) in lines {
        let lineno = lineno0 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(path, lineno, "expected 5 fields"));
        }
        let parse_num = |raw: &str| -> Result<usize> {
            raw.parse()
                .map_err(|_| Error::parse(path, lineno, format!("non-numeric field {raw:?}")))
        };
        events.push((
            FlockId::new(fields[0]),
            ProblemEvent {
                onset_day: parse_num(fields[1])?,
                duration_days: parse_num(fields[2])?,
                depth: fields[3]
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "non-numeric depth"))?,
                ramp_days: parse_num(fields[4])?,
            },
        ));
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent re-statement of the labeling rule, kept deliberately
    /// naive: recompute every trailing mean from scratch and scan runs by
    /// re-checking membership day by day.
    fn naive_oracle(rates: &[f64], expected: &[f64], rule: &LabelRule) -> Vec<bool> {
        let n = rates.len();
        let deficit_day = |t: usize| -> bool {
            let lo = if t + 1 >= rule.smoothing_days {
                t + 1 - rule.smoothing_days
            } else {
                0
            };
            let mut sum = 0.0;
            let mut count = 0.0;
            for k in lo..=t {
                sum += expected[k] - rates[k];
                count += 1.0;
            }
            sum / count > rule.deficit_threshold
        };
        (0..n)
            .map(|t| {
                // t is positive when it sits inside any run of deficit days
                // of sufficient length.
                if !deficit_day(t) {
                    return false;
                }
                let mut lo = t;
                while lo > 0 && deficit_day(lo - 1) {
                    lo -= 1;
                }
                let mut hi = t;
                while hi + 1 < n && deficit_day(hi + 1) {
                    hi += 1;
                }
                hi - lo + 1 >= rule.min_consecutive_days
            })
            .collect()
    }

    fn flat_series(days: usize, hens: u32, rates: &[f64]) -> ProductionSeries {
        let records = (0..days)
            .map(|d| DailyRecord {
                date: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + chrono::Days::new(d as u64),
                age_days: 19 * 7 + d as u32,
                hens_alive: hens,
                eggs_collected: (rates[d] * f64::from(hens)).round() as u32,
                label: None,
            })
            .collect();
        ProductionSeries::new(FlockId::new("t01"), records)
    }

    fn constant_reference(weeks: std::ops::Range<u32>, rate: f64) -> ReferenceCurve {
        ReferenceCurve::new(weeks.map(|w| (w, rate)).collect()).unwrap()
    }

    #[test]
    fn curve_peak_window() {
        let v = mean_curve(28, 0.97);
        assert!((0.95..=0.97).contains(&v), "week 28 value {v}");
    }

    #[test]
    fn curve_starts_low() {
        for peak in [0.9, 0.97, 1.0] {
            assert!(mean_curve(19, peak) <= 0.10, "peak {peak}");
        }
    }

    #[test]
    fn curve_cycle_average_matches_production_indicator() {
        let mean: f64 = (19..79).map(|w| mean_curve(w, 0.97)).sum::<f64>() / 60.0;
        assert!((0.73..=0.86).contains(&mean), "cycle average {mean}");
    }

    #[test]
    fn curve_decline_anchor() {
        assert!((mean_curve(79, 0.97) - (0.97 - 0.22)).abs() < 1e-9);
    }

    #[test]
    fn flock_generation_is_deterministic() {
        let config = GeneratorConfig::default();
        let a = generate_flock(&config, 3).unwrap();
        let b = generate_flock(&config, 3).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn dataset_is_deterministic() {
        let config = GeneratorConfig {
            n_flocks: 6,
            ..GeneratorConfig::default()
        };
        let rule = LabelRule::default();
        let a = generate_dataset(&config, &rule).unwrap();
        let b = generate_dataset(&config, &rule).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.series, y.series);
            assert_eq!(x.events, y.events);
        }
    }

    #[test]
    fn zero_problem_rate_means_no_events_and_no_labels() {
        let config = GeneratorConfig {
            n_flocks: 4,
            problem_rate: 0.0,
            ..GeneratorConfig::default()
        };
        let flocks = generate_dataset(&config, &LabelRule::default()).unwrap();
        for flock in &flocks {
            assert!(flock.events.is_empty());
            assert_eq!(flock.series.positive_label_count(), 0);
        }
    }

    #[test]
    fn single_flock_no_problems_degenerate_config() {
        let config = GeneratorConfig {
            n_flocks: 1,
            problem_rate: 0.0,
            ..GeneratorConfig::default()
        };
        let flocks = generate_dataset(&config, &LabelRule::default()).unwrap();
        assert_eq!(flocks.len(), 1);
        assert!(!flocks[0].series.has_positive_label());
    }

    #[test]
    fn mortality_lands_in_observed_range() {
        let config = GeneratorConfig::default();
        for idx in 0..6 {
            let flock = generate_flock(&config, idx).unwrap();
            let dead = flock.housed_birds - flock.series.records.last().unwrap().hens_alive;
            assert!(
                (436..=3630).contains(&dead),
                "flock {idx} lost {dead} birds"
            );
        }
    }

    #[test]
    fn generated_series_pass_validation() {
        let config = GeneratorConfig::default();
        for idx in [0, 7, 23] {
            let flock = generate_flock(&config, idx).unwrap();
            let report = crate::flockdata::validate_series(&flock.series);
            assert!(report.is_clean(), "flock {idx}: {:?}", report.errors);
        }
    }

    #[test]
    fn oracle_all_negative_on_reference() {
        let series = flat_series(60, 20_000, &vec![0.9; 60]);
        let reference = constant_reference(19..28, 0.9);
        let labels = oracle_labels(&series, &reference, &LabelRule::default()).unwrap();
        assert!(labels.iter().all(|&l| !l));
    }

    #[test]
    fn oracle_labels_injected_event() {
        let mut rates = vec![0.9; 80];
        for r in rates.iter_mut().take(50).skip(40) {
            *r = 0.9 * (1.0 - 0.15);
        }
        let series = flat_series(80, 20_000, &rates);
        let reference = constant_reference(19..31, 0.9);
        let labels = oracle_labels(&series, &reference, &LabelRule::default()).unwrap();
        let in_event = labels[40..50].iter().filter(|&&l| l).count();
        assert!(in_event >= 8, "only {in_event} of 10 event days labeled");
        assert!(labels[..40].iter().all(|&l| !l));
    }

    #[test]
    fn oracle_matches_naive_reimplementation() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let rule = LabelRule::default();
        for _ in 0..50 {
            let n = rng.gen_range(10..120);
            let rates: Vec<f64> = (0..n)
                .map(|_| 0.9 + rng.gen_range(-0.08..0.02))
                .collect();
            let series = flat_series(n, 20_000, &rates);
            let reference = constant_reference(19..((19 * 7 + n as u32) / 7 + 1), 0.9);
            let expected: Vec<f64> = series
                .records
                .iter()
                .map(|r| reference.rate_for_week(r.age_week()).unwrap())
                .collect();
            // Recompute realized rates: integer egg counts quantize them.
            let realized: Vec<f64> = series.records.iter().map(|r| lay_rate(r).unwrap()).collect();
            let ours = oracle_labels(&series, &reference, &rule).unwrap();
            let naive = naive_oracle(&realized, &expected, &rule);
            assert_eq!(ours, naive);
        }
    }

    #[test]
    fn oracle_missing_week_errors() {
        let series = flat_series(60, 20_000, &vec![0.9; 60]);
        let reference = constant_reference(19..20, 0.9);
        assert!(oracle_labels(&series, &reference, &LabelRule::default()).is_err());
    }

    #[test]
    fn default_corpus_positive_fraction_in_paper_band() {
        let flocks = generate_dataset(&GeneratorConfig::default(), &LabelRule::default()).unwrap();
        let total: usize = flocks.iter().map(|f| f.series.len()).sum();
        let positives: usize = flocks.iter().map(|f| f.series.positive_label_count()).sum();
        let fraction = positives as f64 / total as f64;
        assert!(
            (0.012..=0.025).contains(&fraction),
            "positive fraction {fraction:.4} ({positives}/{total})"
        );
        let mean_per_flock = positives as f64 / flocks.len() as f64;
        assert!(
            (4.0..=12.0).contains(&mean_per_flock),
            "mean positives per flock {mean_per_flock}"
        );
        let zero_flocks = flocks
            .iter()
            .filter(|f| f.series.positive_label_count() == 0)
            .count();
        assert!(zero_flocks >= 8, "only {zero_flocks} flocks with zero positives");
    }

    #[test]
    fn deep_long_events_always_produce_labels() {
        let rule = LabelRule::default();
        for seed in 1..=5 {
            let config = GeneratorConfig {
                seed,
                ..GeneratorConfig::default()
            };
            let flocks = generate_dataset(&config, &rule).unwrap();
            for flock in &flocks {
                for event in &flock.events {
                    if event.depth < 2.0 * rule.deficit_threshold
                        || event.duration_days < rule.min_consecutive_days + rule.smoothing_days
                    {
                        continue;
                    }
                    let window: &[DailyRecord] = &flock.series.records
                        [event.onset_day..(event.onset_day + event.duration_days + 3).min(flock.series.len())];
                    let hit = window.iter().any(|r| r.label == Some(true));
                    assert!(
                        hit,
                        "seed {seed} flock {} event {:?} produced no labels",
                        flock.series.flock_id, event
                    );
                }
            }
        }
    }

    #[test]
    fn weekly_cycle_visible_but_unlabeled_below_threshold() {
        let config = GeneratorConfig {
            n_flocks: 1,
            weekly_cycle_amplitude: 0.03,
            daily_noise_sd: 0.0,
            problem_rate: 0.0,
            mortality_daily_hazard: 0.0,
            ..GeneratorConfig::default()
        };
        let flock = generate_flock(&config, 0).unwrap();
        // Day-of-week means of lay rate differ: the routine effect is real.
        let mut by_dow = vec![(0.0, 0u32); 7];
        for (d, rec) in flock.series.records.iter().enumerate().skip(70) {
            let rate = lay_rate(rec).unwrap();
            by_dow[d % 7].0 += rate;
            by_dow[d % 7].1 += 1;
        }
        let means: Vec<f64> = by_dow.iter().map(|(s, n)| s / f64::from(*n)).collect();
        let spread = means.iter().cloned().fold(f64::MIN, f64::max)
            - means.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.01, "day-of-week spread {spread}");

        // Yet the label oracle stays silent: amplitude < deficit threshold.
        let curve = flock.true_curve(&config);
        let labels = oracle_labels(&flock.series, &curve, &LabelRule::default()).unwrap();
        assert!(labels.iter().all(|&l| !l));
    }

    #[test]
    fn monte_carlo_total_eggs_matches_expectation() {
        let base = GeneratorConfig {
            n_flocks: 1,
            housed_birds_range: (20_000, 20_000),
            problem_rate: 0.0,
            ..GeneratorConfig::default()
        };
        let days = base.days();
        let seeds = 40u64;
        let mut total = 0.0;
        let mut analytic = 0.0;
        for seed in 0..seeds {
            let config = GeneratorConfig { seed, ..base.clone() };
            let flock = generate_flock(&config, 0).unwrap();
            total += flock
                .series
                .records
                .iter()
                .map(|r| f64::from(r.eggs_collected))
                .sum::<f64>();
            // Expected eggs for this seed's curve: the weekly pattern has
            // zero mean and the noise multiplier has mean one, so only the
            // clean curve and expected mortality survive in expectation.
            let curve = flock.true_curve(&config);
            analytic += (0..days)
                .map(|d| {
                    let week = base.start_age_week + (d as u32) / 7;
                    f64::from(flock.housed_birds)
                        * (1.0 - base.mortality_daily_hazard).powi(d as i32)
                        * curve.rate_for_week(week).unwrap()
                })
                .sum::<f64>();
        }
        let (mc, expected) = (total / seeds as f64, analytic / seeds as f64);
        let rel = (mc - expected).abs() / expected;
        assert!(rel < 0.01, "MC {mc:.0} vs analytic {expected:.0}, rel {rel:.4}");
    }

    #[test]
    fn ground_truth_sidecar_roundtrip() {
        let config = GeneratorConfig {
            n_flocks: 6,
            ..GeneratorConfig::default()
        };
        let flocks = generate_dataset(&config, &LabelRule::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ground_truth.csv");
        write_ground_truth_csv(&flocks, &path).unwrap();
        let events = read_ground_truth_csv(&path).unwrap();
        let expected: usize = flocks.iter().map(|f| f.events.len()).sum();
        assert_eq!(events.len(), expected);
        assert!(expected > 0, "want at least one event in 6 flocks");
        for (id, event) in &events {
            let flock = flocks.iter().find(|f| &f.series.flock_id == id).unwrap();
            assert!(flock
                .events
                .iter()
                .any(|e| e.onset_day == event.onset_day
                    && e.duration_days == event.duration_days
                    && e.ramp_days == event.ramp_days
                    && (e.depth - event.depth).abs() < 1e-5));
        }
    }

    #[test]
    fn peak_rates_land_in_table_range() {
        let config = GeneratorConfig::default();
        let flocks = generate_dataset(&config, &LabelRule::default()).unwrap();
        for flock in &flocks {
            // Realized peak: best weekly mean lay rate.
            let mut weeks: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
            for rec in &flock.series.records {
                let e = weeks.entry(rec.age_week()).or_insert((0.0, 0));
                e.0 += lay_rate(rec).unwrap();
                e.1 += 1;
            }
            let peak = weeks
                .values()
                .map(|(s, n)| s / f64::from(*n))
                .fold(f64::MIN, f64::max);
            assert!(
                (0.95..=0.99).contains(&peak),
                "flock {} realized peak {peak:.4}",
                flock.series.flock_id
            );
        }
    }
}
