//! Confusion-matrix metrics, stratified flock-level cross-validation and the
//! one-factor-at-a-time sweep engine.
//!
//! Folds split whole flocks, never individual days: sliding windows overlap,
//! so day-level splits would leak test information into training. Within a
//! fold, the reference curve and the feature scaler are fitted exclusively on
//! training flocks; each training flock is featurized against the
//! leave-that-flock-out reference of the remaining training flocks.

use rayon::prelude::*;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::features::{
    build_patterns_with_reference, fit_scaler, FeatureConfig, Pattern, Scaler,
};
use crate::flockdata::{build_reference_curve, FlockId, ProductionSeries, ReferenceCurve};
use crate::stats::{tukey_hsd, GroupSample, TukeyGrouping};
use crate::svm::{kkt_report, train_smo, KernelSpec, SvmModel, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    /// Counts the four cells; positive means "problem day".
    pub fn from_predictions(predictions: &[bool], truths: &[bool]) -> Result<Self> {
        if predictions.len() != truths.len() {
            return Err(Error::DimensionMismatch {
                left: predictions.len(),
                right: truths.len(),
            });
        }
        if predictions.is_empty() {
            return Err(Error::Data("confusion matrix of zero predictions".into()));
        }
        let mut cm = ConfusionMatrix::default();
        for (&p, &t) in predictions.iter().zip(truths) {
            match (p, t) {
                (true, true) => cm.true_pos += 1,
                (true, false) => cm.false_pos += 1,
                (false, false) => cm.true_neg += 1,
                (false, true) => cm.false_neg += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// The four headline metrics. A metric whose denominator is zero carries
/// `None` rather than a fabricated value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSet {
    pub accuracy: Option<f64>,
    pub specificity: Option<f64>,
    pub sensitivity: Option<f64>,
    pub ppv: Option<f64>,
}

pub const METRIC_NAMES: [&str; 4] = ["accuracy", "specificity", "sensitivity", "ppv"];

impl MetricSet {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => self.accuracy,
            "specificity" => self.specificity,
            "sensitivity" => self.sensitivity,
            "ppv" => self.ppv,
            _ => None,
        }
    }
}

/// Ratios from the confusion matrix. Always succeeds on a non-empty matrix;
/// individual metrics degrade to `None` on empty denominators.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    if cm.total() == 0 {
        return Err(Error::Data("metrics of an empty confusion matrix".into()));
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let set = MetricSet {
        accuracy: ratio(cm.true_pos + cm.true_neg, cm.total()),
        specificity: ratio(cm.true_neg, cm.true_neg + cm.false_pos),
        sensitivity: ratio(cm.true_pos, cm.true_pos + cm.false_neg),
        ppv: ratio(cm.true_pos, cm.true_pos + cm.false_pos),
    };
    // accuracy = (sensitivity*P + specificity*N) / (P + N) whenever both
    // class counts are nonzero.
    if let (Some(acc), Some(spec), Some(sens)) = (set.accuracy, set.specificity, set.sensitivity) {
        let p = (cm.true_pos + cm.false_neg) as f64;
        let n = (cm.true_neg + cm.false_pos) as f64;
        debug_assert!(
            (acc - (sens * p + spec * n) / (p + n)).abs() < 1e-12,
            "accuracy identity violated"
        );
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy)]
pub struct CvConfig {
    pub k: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            repetitions: 10,
            seed: 42,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config("cross-validation needs k >= 2".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Splits flocks into `k` disjoint groups, spreading problem flocks and
/// clean flocks evenly (per-fold stratum counts differ by at most one).
pub fn stratified_folds(
    flocks: &[ProductionSeries],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > flocks.len() {
        return Err(Error::Data(format!(
            "cannot split {} flocks into {k} folds",
            flocks.len()
        )));
    }
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut with_problems: Vec<usize> = Vec::new();
    let mut clean: Vec<usize> = Vec::new();
    for (i, flock) in flocks.iter().enumerate() {
        if flock.has_positive_label() {
            with_problems.push(i);
        } else {
            clean.push(i);
        }
    }
    with_problems.shuffle(&mut rng);
    clean.shuffle(&mut rng);

    let mut folds = vec![Vec::new(); k];
    for (pos, idx) in with_problems.into_iter().chain(clean).enumerate() {
        folds[pos % k].push(idx);
    }
    Ok(folds)
}

/// Per-fold details kept around so leakage and KKT checks can audit exactly
/// what each fold fitted.
#[derive(Debug, Clone)]
pub struct FoldDetail {
    pub repetition: usize,
    pub fold: usize,
    pub test_flocks: Vec<FlockId>,
    pub metrics: MetricSet,
    pub scaler: Scaler,
    pub reference: ReferenceCurve,
    pub kkt_max_violation: f64,
    pub converged: bool,
    pub n_train_patterns: usize,
    pub n_test_patterns: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CvResult {
    /// One metric set per repetition: the arithmetic mean over that
    /// repetition's folds, skipping folds where a metric is undefined.
    pub repetition_metrics: Vec<MetricSet>,
    pub fold_details: Vec<FoldDetail>,
    pub warnings: Vec<String>,
}

impl CvResult {
    pub fn metric_values(&self, name: &str) -> Vec<f64> {
        self.repetition_metrics
            .iter()
            .filter_map(|m| m.get(name))
            .collect()
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        let vals = self.metric_values(name);
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn sd(&self, name: &str) -> Option<f64> {
        let vals = self.metric_values(name);
        if vals.len() < 2 {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        Some((vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    }

    pub fn max_kkt_violation(&self) -> f64 {
        self.fold_details
            .iter()
            .map(|f| f.kkt_max_violation)
            .fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.fold_details.iter().all(|f| f.converged)
    }
}

struct FoldOutcome {
    detail: FoldDetail,
    warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    flocks: &[ProductionSeries],
    fold_indices: &[Vec<usize>],
    repetition: usize,
    fold: usize,
    feature_cfg: &FeatureConfig,
    kernel: &KernelSpec,
    train_cfg: &TrainConfig,
    rep_seed: u64,
) -> Result<FoldOutcome> {
    let test_set: &[usize] = &fold_indices[fold];
    let train_series: Vec<ProductionSeries> = fold_indices
        .iter()
        .enumerate()
        .filter(|(f, _)| *f != fold)
        .flat_map(|(_, idxs)| idxs.iter().map(|&i| flocks[i].clone()))
        .collect();

    let full_reference = build_reference_curve(&train_series, None)?;

    let mut train_patterns: Vec<Pattern> = Vec::new();
    let mut ordered: Vec<&ProductionSeries> = train_series.iter().collect();
    ordered.sort_by(|a, b| a.flock_id.cmp(&b.flock_id));
    for series in ordered {
        let loo = build_reference_curve(&train_series, Some(&series.flock_id))?;
        train_patterns.extend(build_patterns_with_reference(series, &loo, feature_cfg)?);
    }

    let mut test_patterns: Vec<Pattern> = Vec::new();
    let mut test_sorted: Vec<&ProductionSeries> = test_set.iter().map(|&i| &flocks[i]).collect();
    test_sorted.sort_by(|a, b| a.flock_id.cmp(&b.flock_id));
    for series in &test_sorted {
        test_patterns.extend(build_patterns_with_reference(
            series,
            &full_reference,
            feature_cfg,
        )?);
    }
    if test_patterns.is_empty() {
        return Err(Error::Data(format!(
            "repetition {repetition} fold {fold}: no test patterns"
        )));
    }

    let scaler = fit_scaler(&train_patterns)?;
    let scaled: Vec<Pattern> = train_patterns
        .iter()
        .map(|p| Pattern {
            features: scaler.apply(&p.features),
            ..p.clone()
        })
        .collect();
    let fold_train_cfg = TrainConfig {
        seed: derive_seed(rep_seed, 1000 + fold as u64),
        ..train_cfg.clone()
    };
    let model = train_smo(&scaled, kernel, &fold_train_cfg, scaler.clone())?;
    let kkt = kkt_report(&model, &scaled, fold_train_cfg.c);

    let predictions: Vec<bool> = test_patterns.iter().map(|p| model.predict(&p.features)).collect();
    let truths: Vec<bool> = test_patterns.iter().map(|p| p.target).collect();
    let cm = ConfusionMatrix::from_predictions(&predictions, &truths)?;
    let fold_metrics = metrics(&cm)?;

    let mut warnings = Vec::new();
    for name in METRIC_NAMES {
        if fold_metrics.get(name).is_none() {
            warnings.push(format!(
                "repetition {repetition} fold {fold}: {name} undefined, excluded from the fold mean"
            ));
        }
    }
    if !model.converged {
        warnings.push(format!(
            "repetition {repetition} fold {fold}: SMO did not converge within {} passes",
            fold_train_cfg.max_passes
        ));
    }

    Ok(FoldOutcome {
        detail: FoldDetail {
            repetition,
            fold,
            test_flocks: test_sorted.iter().map(|s| s.flock_id.clone()).collect(),
            metrics: fold_metrics,
            scaler,
            reference: full_reference,
            kkt_max_violation: kkt.max_violation(),
            converged: model.converged,
            n_train_patterns: train_patterns.len(),
            n_test_patterns: test_patterns.len(),
        },
        warnings,
    })
}

fn mean_of_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Repeated stratified k-fold cross-validation. Fresh folds per repetition,
/// reference curve and scaler fitted on training flocks only, one metric set
/// per repetition (fold mean). Deterministic given `cv.seed`; repetitions run
/// in parallel with per-repetition derived seeds.
pub fn cross_validate(
    flocks: &[ProductionSeries],
    feature_cfg: &FeatureConfig,
    kernel: &KernelSpec,
    train_cfg: &TrainConfig,
    cv: &CvConfig,
) -> Result<CvResult> {
    feature_cfg.validate()?;
    kernel.validate()?;
    train_cfg.validate()?;
    cv.validate()?;
    if cv.k > flocks.len() {
        return Err(Error::Data(format!(
            "k = {} exceeds the {} available flocks",
            cv.k,
            flocks.len()
        )));
    }

    let reps: Vec<Result<(usize, Vec<FoldOutcome>)>> = (0..cv.repetitions)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(cv.seed, rep as u64);
            let folds = stratified_folds(flocks, cv.k, rep_seed)?;
            let mut outcomes = Vec::with_capacity(cv.k);
            for fold in 0..cv.k {
                outcomes.push(run_fold(
                    flocks,
                    &folds,
                    rep,
                    fold,
                    feature_cfg,
                    kernel,
                    train_cfg,
                    rep_seed,
                )?);
            }
            Ok((rep, outcomes))
        })
        .collect();

    let mut result = CvResult::default();
    for rep in reps {
        let (_, outcomes) = rep?;
        let rep_metrics = MetricSet {
            accuracy: mean_of_defined(outcomes.iter().map(|o| o.detail.metrics.accuracy)),
            specificity: mean_of_defined(outcomes.iter().map(|o| o.detail.metrics.specificity)),
            sensitivity: mean_of_defined(outcomes.iter().map(|o| o.detail.metrics.sensitivity)),
            ppv: mean_of_defined(outcomes.iter().map(|o| o.detail.metrics.ppv)),
        };
        result.repetition_metrics.push(rep_metrics);
        for o in outcomes {
            result.warnings.extend(o.warnings);
            result.fold_details.push(o.detail);
        }
    }
    Ok(result)
}

/// The swept experimental factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Kernel,
    Sigma,
    BoxC,
    Window,
    Horizon,
}

impl Factor {
    pub fn parse(name: &str) -> Result<Factor> {
        match name {
            "kernel" => Ok(Factor::Kernel),
            "sigma" => Ok(Factor::Sigma),
            "c" => Ok(Factor::BoxC),
            "window" => Ok(Factor::Window),
            "horizon" => Ok(Factor::Horizon),
            other => Err(Error::Config(format!(
                "unknown factor {other:?}; valid factors: kernel, sigma, c, window, horizon"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Factor::Kernel => "kernel",
            Factor::Sigma => "sigma",
            Factor::BoxC => "c",
            Factor::Window => "window",
            Factor::Horizon => "horizon",
        }
    }
}

/// One level of a factor sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorLevel {
    Kernel(KernelSpec),
    Sigma(f64),
    BoxC(f64),
    Window(usize),
    Horizon(usize),
}

impl FactorLevel {
    pub fn label(&self) -> String {
        match self {
            FactorLevel::Kernel(spec) => match spec {
                KernelSpec::Linear => "linear".into(),
                KernelSpec::Polynomial { .. } => "polynomial".into(),
                KernelSpec::Quadratic { .. } => "quadratic".into(),
                KernelSpec::Rbf { .. } => "rbf".into(),
            },
            FactorLevel::Sigma(v) => format!("{v}"),
            FactorLevel::BoxC(v) => format!("{v}"),
            FactorLevel::Window(v) => format!("{v}"),
            FactorLevel::Horizon(v) => format!("{v}"),
        }
    }

    fn apply(
        &self,
        feature_cfg: &mut FeatureConfig,
        kernel: &mut KernelSpec,
        train_cfg: &mut TrainConfig,
    ) {
        match self {
            FactorLevel::Kernel(spec) => *kernel = spec.clone(),
            FactorLevel::Sigma(sigma) => *kernel = KernelSpec::Rbf { sigma: *sigma },
            FactorLevel::BoxC(c) => train_cfg.c = *c,
            FactorLevel::Window(w) => feature_cfg.window_size = *w,
            FactorLevel::Horizon(fi) => feature_cfg.forecast_interval = *fi,
        }
    }
}

/// Parses a comma-separated level list for a factor. The kernel sweep keeps
/// the base RBF sigma for its `rbf` level.
pub fn parse_levels(factor: Factor, spec: &str, base_sigma: f64) -> Result<Vec<FactorLevel>> {
    let mut levels = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let level = match factor {
            Factor::Kernel => FactorLevel::Kernel(match token {
                "linear" => KernelSpec::linear(),
                "polynomial" => KernelSpec::polynomial(),
                "quadratic" => KernelSpec::quadratic(),
                "rbf" => KernelSpec::rbf(base_sigma),
                other => {
                    return Err(Error::Config(format!(
                        "unknown kernel level {other:?}; expected linear, polynomial, quadratic or rbf"
                    )))
                }
            }),
            Factor::Sigma => FactorLevel::Sigma(
                token
                    .parse()
                    .map_err(|_| Error::Config(format!("bad sigma level {token:?}")))?,
            ),
            Factor::BoxC => FactorLevel::BoxC(
                token
                    .parse()
                    .map_err(|_| Error::Config(format!("bad C level {token:?}")))?,
            ),
            Factor::Window => FactorLevel::Window(
                token
                    .parse()
                    .map_err(|_| Error::Config(format!("bad window level {token:?}")))?,
            ),
            Factor::Horizon => FactorLevel::Horizon(
                token
                    .parse()
                    .map_err(|_| Error::Config(format!("bad horizon level {token:?}")))?,
            ),
        };
        levels.push(level);
    }
    if levels.is_empty() {
        return Err(Error::Config("no sweep levels given".into()));
    }
    Ok(levels)
}

/// The level grids of the published sweep protocol.
pub fn default_levels(factor: Factor, base_sigma: f64) -> Vec<FactorLevel> {
    match factor {
        Factor::Kernel => vec![
            FactorLevel::Kernel(KernelSpec::polynomial()),
            FactorLevel::Kernel(KernelSpec::rbf(base_sigma)),
            FactorLevel::Kernel(KernelSpec::quadratic()),
            FactorLevel::Kernel(KernelSpec::linear()),
        ],
        Factor::Sigma => (1..=6).map(|s| FactorLevel::Sigma(s as f64)).collect(),
        Factor::BoxC => [0.01, 0.1, 0.15, 0.2, 0.25]
            .into_iter()
            .map(FactorLevel::BoxC)
            .collect(),
        Factor::Window => [7, 14, 21, 28].into_iter().map(FactorLevel::Window).collect(),
        Factor::Horizon => (0..=5).map(FactorLevel::Horizon).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub factor: String,
    pub levels: Vec<String>,
    /// levels x repetitions.
    pub per_level: Vec<Vec<MetricSet>>,
    /// Tukey grouping per metric name, where at least two levels had two or
    /// more defined repetition values.
    pub tukey: Vec<(String, TukeyGrouping)>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn level_mean(&self, level: usize, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self.per_level[level]
            .iter()
            .filter_map(|m| m.get(metric))
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn level_sd(&self, level: usize, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self.per_level[level]
            .iter()
            .filter_map(|m| m.get(metric))
            .collect();
        if vals.len() < 2 {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        Some((vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    }

    pub fn tukey_for(&self, metric: &str) -> Option<&TukeyGrouping> {
        self.tukey
            .iter()
            .find(|(name, _)| name == metric)
            .map(|(_, g)| g)
    }
}

/// Runs `cross_validate` once per level, holding everything else at the base
/// configuration, then attaches Tukey groupings per metric at `alpha`.
/// Repetition fold seeds depend only on `(cv.seed, repetition)`, so every
/// level sees identical fold assignments: level comparisons are paired.
#[allow(clippy::too_many_arguments)]
pub fn sweep_factor(
    flocks: &[ProductionSeries],
    feature_cfg: &FeatureConfig,
    kernel: &KernelSpec,
    train_cfg: &TrainConfig,
    factor: Factor,
    levels: &[FactorLevel],
    cv: &CvConfig,
    alpha: f64,
) -> Result<SweepResult> {
    if levels.is_empty() {
        return Err(Error::Config("sweep needs at least one level".into()));
    }
    let mut per_level = Vec::with_capacity(levels.len());
    let mut warnings = Vec::new();
    for level in levels {
        let mut fc = *feature_cfg;
        let mut ks = kernel.clone();
        let mut tc = train_cfg.clone();
        level.apply(&mut fc, &mut ks, &mut tc);
        let outcome = cross_validate(flocks, &fc, &ks, &tc, cv)?;
        warnings.extend(
            outcome
                .warnings
                .iter()
                .map(|w| format!("level {}: {w}", level.label())),
        );
        per_level.push(outcome.repetition_metrics);
    }

    let labels: Vec<String> = levels.iter().map(|l| l.label()).collect();
    let mut tukey = Vec::new();
    for metric in METRIC_NAMES {
        if levels.len() == 1 {
            // A degenerate sweep has nothing to compare; the single level
            // forms group "a" by convention.
            let vals: Vec<f64> = per_level[0].iter().filter_map(|m| m.get(metric)).collect();
            if vals.is_empty() {
                continue;
            }
            tukey.push((
                metric.to_string(),
                TukeyGrouping {
                    labels: labels.clone(),
                    means: vec![vals.iter().sum::<f64>() / vals.len() as f64],
                    significant: vec![vec![false]],
                    letters: vec!["a".into()],
                    q_critical: f64::NAN,
                },
            ));
            continue;
        }
        let mut groups = Vec::new();
        for (level, label) in per_level.iter().zip(&labels) {
            let vals: Vec<f64> = level.iter().filter_map(|m| m.get(metric)).collect();
            if vals.len() >= 2 {
                groups.push(GroupSample::new(label.clone(), vals));
            } else {
                warnings.push(format!(
                    "level {label}: too few defined {metric} values for the multiple comparison"
                ));
            }
        }
        if groups.len() >= 2 {
            tukey.push((metric.to_string(), tukey_hsd(&groups, alpha)?));
        }
    }

    Ok(SweepResult {
        factor: factor.name().to_string(),
        levels: labels,
        per_level,
        tukey,
        warnings,
    })
}

/// Convenience wrapper for training one model on a full corpus the same way
/// a cross-validation fold would: leave-one-flock-out references, scaler on
/// everything, model on everything.
pub fn train_on_corpus(
    flocks: &[ProductionSeries],
    feature_cfg: &FeatureConfig,
    kernel: &KernelSpec,
    train_cfg: &TrainConfig,
) -> Result<(SvmModel, ReferenceCurve)> {
    let reference = build_reference_curve(flocks, None)?;
    let patterns = crate::features::build_patterns(flocks, feature_cfg)?;
    let scaler = fit_scaler(&patterns)?;
    let scaled: Vec<Pattern> = patterns
        .iter()
        .map(|p| Pattern {
            features: scaler.apply(&p.features),
            ..p.clone()
        })
        .collect();
    let model = train_smo(&scaled, kernel, train_cfg, scaler)?;
    Ok((model, reference))
}
