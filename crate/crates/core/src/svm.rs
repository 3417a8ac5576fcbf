//! Soft-margin binary SVM with an SMO solver.
//!
//! Kernels: linear, polynomial, quadratic and RBF, where the RBF length
//! scale follows exp(-||x-y||^2 / (2 sigma^2)). Training solves the dual
//! soft-margin problem by sequential minimal optimization with Platt's
//! working-pair heuristics; the fallback scans start at seeded-random
//! positions, so training is deterministic given the config seed.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Pattern, Scaler, FEATURE_DIM};

/// Kernel function selection. Degrees and offsets follow the common
/// conventions: cubic polynomial with offset 1, quadratic fixed at degree 2.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, offset: f64 },
    Quadratic { offset: f64 },
    Rbf { sigma: f64 },
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec::Linear
    }

    pub fn polynomial() -> Self {
        KernelSpec::Polynomial {
            degree: 3,
            offset: 1.0,
        }
    }

    pub fn quadratic() -> Self {
        KernelSpec::Quadratic { offset: 1.0 }
    }

    pub fn rbf(sigma: f64) -> Self {
        KernelSpec::Rbf { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    Err(Error::Config("polynomial degree must be >= 1".into()))
                } else if !offset.is_finite() {
                    Err(Error::Config("polynomial offset must be finite".into()))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Quadratic { offset } => {
                if offset.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("quadratic offset must be finite".into()))
                }
            }
            KernelSpec::Rbf { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("rbf sigma {sigma} must be positive")))
                }
            }
        }
    }

    fn eval_slice(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot = || x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        match *self {
            KernelSpec::Linear => dot(),
            KernelSpec::Polynomial { degree, offset } => (dot() + offset).powi(degree as i32),
            KernelSpec::Quadratic { offset } => {
                let v = dot() + offset;
                v * v
            }
            KernelSpec::Rbf { sigma } => {
                let dist2: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum();
                (-dist2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree, offset } => {
                write!(f, "polynomial(degree={degree}, offset={offset})")
            }
            KernelSpec::Quadratic { offset } => write!(f, "quadratic(offset={offset})"),
            KernelSpec::Rbf { sigma } => write!(f, "rbf(sigma={sigma})"),
        }
    }
}

/// Evaluates the kernel on two equal-length vectors.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(spec.eval_slice(x, y))
}

/// Full Gram matrix, exactly symmetric: the upper triangle is computed and
/// mirrored.
pub fn gram_matrix(spec: &KernelSpec, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if xs.is_empty() {
        return Err(Error::Data("gram matrix of an empty set".into()));
    }
    let dim = xs[0].len();
    for v in xs {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
    }
    let n = xs.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_slice(&xs[i], &xs[j]);
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Box constraint C. The sweep protocol keeps it at or below 0.25; larger
    /// values are legal but invite overfitting.
    pub c: f64,
    pub kkt_tolerance: f64,
    /// Upper bound on solver passes before giving up and returning the
    /// best-so-far model flagged as non-converged.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 0.15,
            kkt_tolerance: 1e-3,
            max_passes: 10_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "box constraint C = {} must be positive",
                self.c
            )));
        }
        if self.kkt_tolerance <= 0.0 || self.kkt_tolerance.is_nan() {
            return Err(Error::Config("kkt_tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::Config("max_passes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Solver byproducts kept for diagnostics and verification; not persisted.
#[derive(Debug, Clone, Default)]
pub struct TrainDiagnostics {
    pub passes: usize,
    /// Dual objective recomputed after every pass; non-decreasing.
    pub objective_trace: Vec<f64>,
    /// Final dual multipliers in training order.
    pub alpha: Vec<f64>,
    /// |sum alpha_i y_i| at the end of training.
    pub equality_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    /// Support vectors in scaled feature space.
    pub support_vectors: Vec<[f64; FEATURE_DIM]>,
    /// alpha_i * y_i per support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    /// Feature standardization fitted at training time; applied by
    /// `decision_value` and `predict` before touching the kernel.
    pub scaler: Scaler,
    pub converged: bool,
    pub diagnostics: TrainDiagnostics,
}

impl SvmModel {
    /// Decision function on an already-scaled vector.
    pub fn decision_value_scaled(&self, x: &[f64; FEATURE_DIM]) -> f64 {
        let mut sum = self.bias;
        for (sv, coeff) in self.support_vectors.iter().zip(&self.dual_coeffs) {
            sum += coeff * self.kernel.eval_slice(sv, x);
        }
        sum
    }

    /// Decision function on raw features; the stored scaler is applied first.
    pub fn decision_value(&self, x: &FeatureVector) -> f64 {
        self.decision_value_scaled(&self.scaler.apply(x).to_array())
    }

    pub fn predict(&self, x: &FeatureVector) -> bool {
        self.decision_value(x) > 0.0
    }
}

/// Trains a soft-margin SVM by SMO. `patterns` must already be scaled; the
/// fitted scaler is passed through so the model can standardize raw inputs at
/// prediction time. Non-convergence within `max_passes` yields a model with
/// `converged == false` rather than an error.
pub fn train_smo(
    patterns: &[Pattern],
    spec: &KernelSpec,
    cfg: &TrainConfig,
    scaler: Scaler,
) -> Result<SvmModel> {
    spec.validate()?;
    cfg.validate()?;
    if patterns.len() < 2 {
        return Err(Error::Data(format!(
            "training needs at least 2 patterns, got {}",
            patterns.len()
        )));
    }
    let x: Vec<[f64; FEATURE_DIM]> = patterns.iter().map(|p| p.features.to_array()).collect();
    let y: Vec<f64> = patterns
        .iter()
        .map(|p| if p.target { 1.0 } else { -1.0 })
        .collect();
    if y.iter().all(|&v| v > 0.0) || y.iter().all(|&v| v < 0.0) {
        return Err(Error::Data(
            "training set contains a single class; both classes are required".into(),
        ));
    }

    let mut solver = Smo::new(&x, &y, spec, cfg);
    let converged = solver.run(cfg.max_passes);
    solver.finalize_bias();

    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for i in 0..x.len() {
        if solver.alpha[i] > 0.0 {
            support_vectors.push(x[i]);
            dual_coeffs.push(solver.alpha[i] * y[i]);
        }
    }
    if support_vectors.is_empty() {
        return Err(Error::Data(
            "training produced no support vectors; KKT tolerance is too loose".into(),
        ));
    }

    let equality_residual = solver
        .alpha
        .iter()
        .zip(&y)
        .map(|(a, yi)| a * yi)
        .sum::<f64>()
        .abs();
    Ok(SvmModel {
        kernel: spec.clone(),
        support_vectors,
        dual_coeffs,
        bias: solver.bias,
        scaler,
        converged,
        diagnostics: TrainDiagnostics {
            passes: solver.passes,
            objective_trace: solver.objective_trace,
            alpha: solver.alpha,
            equality_residual,
        },
    })
}

/// Fits scaler and model in one step from raw patterns.
pub fn fit(patterns: &[Pattern], spec: &KernelSpec, cfg: &TrainConfig) -> Result<SvmModel> {
    let scaler = crate::features::fit_scaler(patterns)?;
    let scaled: Vec<Pattern> = patterns
        .iter()
        .map(|p| Pattern {
            features: scaler.apply(&p.features),
            ..p.clone()
        })
        .collect();
    train_smo(&scaled, spec, cfg, scaler)
}

/// Per-case KKT violation magnitudes of a trained model on its training set.
#[derive(Debug, Clone, Default)]
pub struct KktReport {
    /// max over alpha = 0 cases of (1 - margin), clamped at 0.
    pub zero_alpha: f64,
    /// max over 0 < alpha < C cases of |margin - 1|.
    pub free_alpha: f64,
    /// max over alpha = C cases of (margin - 1), clamped at 0.
    pub bound_alpha: f64,
    /// |sum alpha_i y_i|.
    pub equality: f64,
}

impl KktReport {
    pub fn max_violation(&self) -> f64 {
        self.zero_alpha
            .max(self.free_alpha)
            .max(self.bound_alpha)
            .max(self.equality)
    }
}

/// Recomputes the KKT conditions of `model` against its own training
/// patterns (scaled) using only the public decision function and the
/// training-order alphas from the diagnostics.
pub fn kkt_report(model: &SvmModel, patterns: &[Pattern], c: f64) -> KktReport {
    let mut report = KktReport {
        equality: model.diagnostics.equality_residual,
        ..KktReport::default()
    };
    for (p, &alpha) in patterns.iter().zip(&model.diagnostics.alpha) {
        let y = if p.target { 1.0 } else { -1.0 };
        let margin = y * model.decision_value_scaled(&p.features.to_array());
        if alpha <= 0.0 {
            report.zero_alpha = report.zero_alpha.max(1.0 - margin);
        } else if alpha >= c {
            report.bound_alpha = report.bound_alpha.max(margin - 1.0);
        } else {
            report.free_alpha = report.free_alpha.max((margin - 1.0).abs());
        }
    }
    report.zero_alpha = report.zero_alpha.max(0.0);
    report.bound_alpha = report.bound_alpha.max(0.0);
    report
}

/// SMO state: dual variables, cached errors E_i = f(x_i) - y_i, and lazily
/// computed kernel rows for every index that enters a working pair.
struct Smo<'a> {
    x: &'a [[f64; FEATURE_DIM]],
    y: &'a [f64],
    kernel: &'a KernelSpec,
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
    rows: Vec<Option<Box<[f64]>>>,
    rng: ChaCha12Rng,
    passes: usize,
    objective_trace: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn new(
        x: &'a [[f64; FEATURE_DIM]],
        y: &'a [f64],
        kernel: &'a KernelSpec,
        cfg: &TrainConfig,
    ) -> Self {
        let n = x.len();
        Smo {
            x,
            y,
            kernel,
            c: cfg.c,
            tol: cfg.kkt_tolerance,
            alpha: vec![0.0; n],
            // f = 0 everywhere at the start, so E_i = -y_i.
            errors: y.iter().map(|&v| -v).collect(),
            bias: 0.0,
            rows: vec![None; n],
            rng: ChaCha12Rng::seed_from_u64(cfg.seed),
            passes: 0,
            objective_trace: Vec::new(),
        }
    }

    fn ensure_row(&mut self, i: usize) {
        if self.rows[i].is_none() {
            let xi = &self.x[i];
            let row: Box<[f64]> = self
                .x
                .iter()
                .map(|xk| self.kernel.eval_slice(xi, xk))
                .collect();
            self.rows[i] = Some(row);
        }
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.errors[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    /// Runs alternating full and non-bound passes until a full pass changes
    /// nothing. Returns whether the solver converged within `max_passes`.
    fn run(&mut self, max_passes: usize) -> bool {
        let n = self.x.len();
        let mut examine_all = true;
        loop {
            if self.passes >= max_passes {
                return false;
            }
            self.passes += 1;
            let mut changed = 0usize;
            for i in 0..n {
                if !examine_all && !self.is_free(i) {
                    continue;
                }
                if self.examine(i) {
                    changed += 1;
                }
            }
            self.objective_trace.push(self.dual_objective());
            if examine_all {
                if changed == 0 {
                    return true;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
    }

    fn examine(&mut self, i: usize) -> bool {
        if !self.violates_kkt(i) {
            return false;
        }
        let n = self.x.len();

        // Platt's second-choice heuristic: the partner maximizing |E_i - E_j|
        // among free alphas.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if j != i && self.is_free(j) {
                let gap = (self.errors[i] - self.errors[j]).abs();
                if best.is_none_or(|(_, g)| gap > g) {
                    best = Some((j, gap));
                }
            }
        }
        if let Some((j, _)) = best {
            if self.take_step(i, j) {
                return true;
            }
        }

        // Fallbacks: scan free alphas, then everything, from random starts.
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let j = (start + k) % n;
            if j != i && self.is_free(j) && self.take_step(i, j) {
                return true;
            }
        }
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let j = (start + k) % n;
            if j != i && self.take_step(i, j) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        debug_assert_ne!(i, j);
        let (ai_old, aj_old) = (self.alpha[i], self.alpha[j]);
        let (yi, yj) = (self.y[i], self.y[j]);
        let s = yi * yj;
        let (lo, hi) = if s < 0.0 {
            (
                (aj_old - ai_old).max(0.0),
                (self.c + aj_old - ai_old).min(self.c),
            )
        } else {
            (
                (ai_old + aj_old - self.c).max(0.0),
                (ai_old + aj_old).min(self.c),
            )
        };
        if hi - lo < 1e-15 {
            return false;
        }

        self.ensure_row(i);
        self.ensure_row(j);
        let kii = self.rows[i].as_ref().unwrap()[i];
        let kjj = self.rows[j].as_ref().unwrap()[j];
        let kij = self.rows[i].as_ref().unwrap()[j];
        let eta = 2.0 * kij - kii - kjj;
        let (ei, ej) = (self.errors[i], self.errors[j]);

        // Dual objective change along the pair direction, as a function of
        // t = alpha_j_new - alpha_j_old.
        let obj_delta = |t: f64| yj * (ei - ej) * t + 0.5 * eta * t * t;

        let mut aj_new = if eta < 0.0 {
            (aj_old - yj * (ei - ej) / eta).clamp(lo, hi)
        } else {
            // Flat or convex direction: the maximum sits at an endpoint.
            let (d_lo, d_hi) = (obj_delta(lo - aj_old), obj_delta(hi - aj_old));
            if d_lo > d_hi + 1e-12 {
                lo
            } else if d_hi > d_lo + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        if aj_new < 1e-12 {
            aj_new = 0.0;
        } else if aj_new > self.c - 1e-12 {
            aj_new = self.c;
        }
        if (aj_new - aj_old).abs() < 1e-14 * (aj_new + aj_old + 1e-14) {
            return false;
        }

        let mut ai_new = ai_old + s * (aj_old - aj_new);
        if ai_new < 1e-12 {
            ai_new = 0.0;
        } else if ai_new > self.c - 1e-12 {
            ai_new = self.c;
        }

        debug_assert!(
            obj_delta(aj_new - aj_old) >= -1e-9 * (1.0 + obj_delta(aj_new - aj_old).abs()),
            "SMO step decreased the dual objective"
        );

        let (di, dj) = (ai_new - ai_old, aj_new - aj_old);
        let b1 = self.bias - ei - yi * di * kii - yj * dj * kij;
        let b2 = self.bias - ej - yi * di * kij - yj * dj * kjj;
        let new_bias = if ai_new > 0.0 && ai_new < self.c {
            b1
        } else if aj_new > 0.0 && aj_new < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_bias - self.bias;

        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        self.bias = new_bias;

        let row_i = self.rows[i].as_deref().unwrap();
        let row_j = self.rows[j].as_deref().unwrap();
        for ((e, ki), kj) in self.errors.iter_mut().zip(row_i).zip(row_j) {
            *e += yi * di * ki + yj * dj * kj + db;
        }
        true
    }

    /// Full dual objective: sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
    /// Every nonzero alpha has a cached kernel row, so this never evaluates
    /// the kernel.
    fn dual_objective(&self) -> f64 {
        let svs: Vec<usize> = (0..self.alpha.len())
            .filter(|&i| self.alpha[i] > 0.0)
            .collect();
        let linear: f64 = svs.iter().map(|&i| self.alpha[i]).sum();
        let mut quad = 0.0;
        for &i in &svs {
            let row = self.rows[i].as_deref().expect("updated alpha has a row");
            for &j in &svs {
                quad += self.alpha[i] * self.alpha[j] * self.y[i] * self.y[j] * row[j];
            }
        }
        linear - 0.5 * quad
    }

    /// With no free alphas the working bias is only loosely pinned; reset it
    /// to the midpoint of the KKT-feasible interval, mirroring the reference
    /// solver's convention so decision values are comparable.
    fn finalize_bias(&mut self) {
        if (0..self.alpha.len()).any(|i| self.is_free(i)) {
            return;
        }
        let mut b_lo = f64::NEG_INFINITY;
        let mut b_hi = f64::INFINITY;
        for i in 0..self.alpha.len() {
            let g = self.errors[i] + self.y[i] - self.bias;
            let at_zero = self.alpha[i] <= 0.0;
            // alpha = 0 wants y(g + b) >= 1, alpha = C wants y(g + b) <= 1.
            if self.y[i] > 0.0 {
                if at_zero {
                    b_lo = b_lo.max(1.0 - g);
                } else {
                    b_hi = b_hi.min(1.0 - g);
                }
            } else if at_zero {
                b_hi = b_hi.min(-1.0 - g);
            } else {
                b_lo = b_lo.max(-1.0 - g);
            }
        }
        if b_lo.is_finite() && b_hi.is_finite() {
            let new_bias = 0.5 * (b_lo + b_hi);
            let db = new_bias - self.bias;
            self.bias = new_bias;
            for e in self.errors.iter_mut() {
                *e += db;
            }
        }
    }
}

const MODEL_MAGIC: &str = "OVOWATCH-SVM v1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a model to the versioned text format. Byte-stable: two saves
/// of the same model are identical.
pub fn model_to_string(model: &SvmModel) -> String {
    let mut out = String::new();
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    match model.kernel {
        KernelSpec::Linear => out.push_str("kernel linear\n"),
        KernelSpec::Polynomial { degree, offset } => {
            out.push_str(&format!("kernel polynomial {degree} {}\n", fmt_f64(offset)))
        }
        KernelSpec::Quadratic { offset } => {
            out.push_str(&format!("kernel quadratic {}\n", fmt_f64(offset)))
        }
        KernelSpec::Rbf { sigma } => out.push_str(&format!("kernel rbf {}\n", fmt_f64(sigma))),
    }
    let join = |vals: &[f64]| {
        vals.iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(" ")
    };
    out.push_str(&format!("scaler_means {}\n", join(&model.scaler.means)));
    out.push_str(&format!("scaler_stds {}\n", join(&model.scaler.stds)));
    out.push_str(&format!("bias {}\n", fmt_f64(model.bias)));
    out.push_str(&format!(
        "support_vectors {}\n",
        model.support_vectors.len()
    ));
    for (sv, coeff) in model.support_vectors.iter().zip(&model.dual_coeffs) {
        out.push_str(&fmt_f64(*coeff));
        for v in sv {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn save_model(model: &SvmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text, path)
}

fn model_from_str(text: &str, path: &Path) -> Result<SvmModel> {
    let bad = |msg: String| Error::Model {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(MODEL_MAGIC) => {}
        Some(other) => {
            return Err(bad(format!(
                "unsupported header {other:?}, expected {MODEL_MAGIC:?}"
            )))
        }
        None => return Err(bad("empty file".into())),
    }

    let mut next_line = |what: &str| -> Result<String> {
        lines
            .next()
            .map(str::to_owned)
            .ok_or_else(|| bad(format!("truncated file: missing {what}")))
    };

    let kernel_line = next_line("kernel spec")?;
    let kparts: Vec<&str> = kernel_line.split_whitespace().collect();
    let parse_f = |raw: &str, what: &str| -> Result<f64> {
        raw.parse::<f64>()
            .map_err(|_| bad(format!("bad {what}: {raw:?}")))
    };
    let kernel = match kparts.as_slice() {
        ["kernel", "linear"] => KernelSpec::Linear,
        ["kernel", "polynomial", degree, offset] => KernelSpec::Polynomial {
            degree: degree
                .parse()
                .map_err(|_| bad(format!("bad degree {degree:?}")))?,
            offset: parse_f(offset, "polynomial offset")?,
        },
        ["kernel", "quadratic", offset] => KernelSpec::Quadratic {
            offset: parse_f(offset, "quadratic offset")?,
        },
        ["kernel", "rbf", sigma] => KernelSpec::Rbf {
            sigma: parse_f(sigma, "rbf sigma")?,
        },
        _ => return Err(bad(format!("bad kernel line {kernel_line:?}"))),
    };
    kernel.validate().map_err(|e| bad(e.to_string()))?;

    let parse_vec = |line: &str, prefix: &str| -> Result<Vec<f64>> {
        let rest = line
            .strip_prefix(prefix)
            .ok_or_else(|| bad(format!("expected {prefix:?} line, found {line:?}")))?;
        let vals: Vec<f64> = rest
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("non-numeric value in {prefix:?} line")))?;
        if vals.len() != FEATURE_DIM {
            return Err(bad(format!(
                "{prefix:?} has {} values, expected {FEATURE_DIM}",
                vals.len()
            )));
        }
        Ok(vals)
    };
    let means = parse_vec(&next_line("scaler means")?, "scaler_means ")?;
    let stds = parse_vec(&next_line("scaler stds")?, "scaler_stds ")?;

    let bias_line = next_line("bias")?;
    let bias = parse_f(
        bias_line
            .strip_prefix("bias ")
            .ok_or_else(|| bad(format!("expected bias line, found {bias_line:?}")))?,
        "bias",
    )?;

    let count_line = next_line("support vector count")?;
    let count: usize = count_line
        .strip_prefix("support_vectors ")
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(format!("bad support vector count line {count_line:?}")))?;

    let mut support_vectors = Vec::with_capacity(count);
    let mut dual_coeffs = Vec::with_capacity(count);
    for k in 0..count {
        let line = next_line(&format!("support vector {k}"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("non-numeric support vector line {k}")))?;
        if vals.len() != FEATURE_DIM + 1 {
            return Err(bad(format!(
                "support vector line {k} has {} values, expected {}",
                vals.len(),
                FEATURE_DIM + 1
            )));
        }
        dual_coeffs.push(vals[0]);
        let mut sv = [0.0; FEATURE_DIM];
        sv.copy_from_slice(&vals[1..]);
        support_vectors.push(sv);
    }
    if support_vectors.is_empty() {
        return Err(bad("model has no support vectors".into()));
    }

    Ok(SvmModel {
        kernel,
        support_vectors,
        dual_coeffs,
        bias,
        scaler: Scaler { means, stds },
        converged: true,
        diagnostics: TrainDiagnostics::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flockdata::FlockId;
    use crate::oracles;

    fn pattern(features: [f64; 6], target: bool) -> Pattern {
        Pattern {
            features: FeatureVector::from_array(features),
            target,
            flock_id: FlockId::new("t"),
            day_index: 0,
        }
    }

    fn embed2(x: f64, y: f64) -> [f64; 6] {
        [x, y, 0.0, 0.0, 0.0, 0.0]
    }

    fn random_patterns(rng: &mut ChaCha12Rng, n: usize) -> Vec<Pattern> {
        loop {
            let pats: Vec<Pattern> = (0..n)
                .map(|_| {
                    let f: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
                    pattern(f, rng.gen_bool(0.5))
                })
                .collect();
            if pats.iter().any(|p| p.target) && pats.iter().any(|p| !p.target) {
                return pats;
            }
        }
    }

    #[test]
    fn rbf_identity_and_closed_form() {
        let spec = KernelSpec::rbf(5.0);
        let x = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(kernel_eval(&spec, &x, &x).unwrap(), 1.0);
        let y = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let v = kernel_eval(&spec, &x, &y).unwrap();
        assert!((v - 0.96078943915232318).abs() < 1e-15, "{v}");
    }

    #[test]
    fn linear_zero_vector() {
        let spec = KernelSpec::linear();
        let v = kernel_eval(&spec, &[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let spec = KernelSpec::linear();
        assert!(matches!(
            kernel_eval(&spec, &[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kernels_are_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let specs = [
            KernelSpec::linear(),
            KernelSpec::polynomial(),
            KernelSpec::quadratic(),
            KernelSpec::rbf(2.5),
        ];
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for spec in &specs {
                let a = kernel_eval(spec, &x, &y).unwrap();
                let b = kernel_eval(spec, &y, &x).unwrap();
                assert_eq!(a, b, "{spec}");
            }
        }
    }

    #[test]
    fn rbf_monotone_in_sigma() {
        let x = [1.0, -0.5, 0.3, 0.0, 0.0, 0.0];
        let y = [0.2, 0.4, -1.0, 0.0, 0.0, 0.0];
        let mut prev = 0.0;
        for sigma in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
            let v = kernel_eval(&KernelSpec::rbf(sigma), &x, &y).unwrap();
            assert!(v > prev, "sigma {sigma}: {v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn gram_singleton_rbf() {
        let g = gram_matrix(&KernelSpec::rbf(5.0), &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(g, vec![vec![1.0]]);
    }

    #[test]
    fn gram_is_exactly_symmetric_and_near_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for spec in [
            KernelSpec::linear(),
            KernelSpec::polynomial(),
            KernelSpec::quadratic(),
            KernelSpec::rbf(3.0),
        ] {
            let xs: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let g = gram_matrix(&spec, &xs).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(g[i][j], g[j][i]);
                }
            }
            let eigenvalues = oracles::symmetric_eigenvalues(&g);
            let min = eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min >= -1e-8, "{spec}: min eigenvalue {min}");
        }
    }

    #[test]
    fn two_point_separable_linear() {
        let pats = vec![
            pattern(embed2(-1.0, 0.0), false),
            pattern(embed2(1.0, 0.0), true),
        ];
        let cfg = TrainConfig {
            c: 0.15,
            ..TrainConfig::default()
        };
        let model = fit(&pats, &KernelSpec::linear(), &cfg).unwrap();
        assert!(model.converged);
        for p in &pats {
            assert_eq!(model.predict(&p.features), p.target);
        }
    }

    #[test]
    fn smo_matches_bruteforce_on_toy_rbf() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let pats = random_patterns(&mut rng, 6);
        let spec = KernelSpec::rbf(5.0);
        let cfg = TrainConfig {
            c: 0.15,
            kkt_tolerance: 1e-8,
            max_passes: 50_000,
            seed: 9,
        };
        let model = train_smo(&pats, &spec, &cfg, Scaler::identity()).unwrap();
        assert!(model.converged);

        let x: Vec<[f64; 6]> = pats.iter().map(|p| p.features.to_array()).collect();
        let y: Vec<bool> = pats.iter().map(|p| p.target).collect();
        let brute = oracles::solve_dual_bruteforce(&x, &y, &spec, cfg.c).unwrap();
        let smo_objective = *model.diagnostics.objective_trace.last().unwrap();
        assert!(
            (smo_objective - brute.objective).abs() < 1e-6,
            "smo {smo_objective} vs brute {}",
            brute.objective
        );
    }

    #[test]
    fn xor_needs_a_nonlinear_kernel() {
        let pats = vec![
            pattern(embed2(0.0, 0.0), true),
            pattern(embed2(1.0, 1.0), true),
            pattern(embed2(0.0, 1.0), false),
            pattern(embed2(1.0, 0.0), false),
        ];
        let cfg = TrainConfig {
            c: 10.0,
            kkt_tolerance: 1e-6,
            max_passes: 50_000,
            seed: 1,
        };
        let rbf = train_smo(&pats, &KernelSpec::rbf(0.5), &cfg, Scaler::identity()).unwrap();
        let correct_rbf = pats
            .iter()
            .filter(|p| rbf.predict(&p.features) == p.target)
            .count();
        assert_eq!(correct_rbf, 4, "rbf must separate xor");

        // The brute-force dual optimum for the linear kernel cannot get all
        // four right; neither can SMO.
        let x: Vec<[f64; 6]> = pats.iter().map(|p| p.features.to_array()).collect();
        let y: Vec<bool> = pats.iter().map(|p| p.target).collect();
        let brute = oracles::solve_dual_bruteforce(&x, &y, &KernelSpec::linear(), cfg.c).unwrap();
        let brute_correct = (0..4)
            .filter(|&i| (brute.decision(&x, &y, &KernelSpec::linear(), &x[i]) > 0.0) == y[i])
            .count();
        assert!(brute_correct <= 3, "linear separated xor?");

        let linear = train_smo(&pats, &KernelSpec::linear(), &cfg, Scaler::identity()).unwrap();
        let correct_linear = pats
            .iter()
            .filter(|p| linear.predict(&p.features) == p.target)
            .count();
        assert!(correct_linear <= 3);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for n in [6usize, 12, 24] {
            let pats = random_patterns(&mut rng, n);
            let cfg = TrainConfig {
                c: 0.25,
                seed: n as u64,
                ..TrainConfig::default()
            };
            let model = train_smo(&pats, &KernelSpec::rbf(2.0), &cfg, Scaler::identity()).unwrap();
            let trace = &model.diagnostics.objective_trace;
            assert!(!trace.is_empty());
            for w in trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9,
                    "objective decreased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn duplicated_data_with_halved_c_gives_same_decision() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let pats = random_patterns(&mut rng, 8);
        let mut doubled = pats.clone();
        doubled.extend(pats.iter().cloned());
        let spec = KernelSpec::rbf(2.0);
        let tight = TrainConfig {
            c: 0.2,
            kkt_tolerance: 1e-9,
            max_passes: 100_000,
            seed: 3,
        };
        let halved = TrainConfig {
            c: 0.1,
            ..tight.clone()
        };
        let m1 = train_smo(&pats, &spec, &tight, Scaler::identity()).unwrap();
        let m2 = train_smo(&doubled, &spec, &halved, Scaler::identity()).unwrap();
        for _ in 0..20 {
            let probe =
                FeatureVector::from_array(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
            let (a, b) = (m1.decision_value(&probe), m2.decision_value(&probe));
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn decision_is_locally_lipschitz() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let pats = random_patterns(&mut rng, 10);
        let sigma = 2.0;
        let model = fit(&pats, &KernelSpec::rbf(sigma), &TrainConfig::default()).unwrap();
        // RBF gradient norm peaks at distance sigma: |coeff| * exp(-1/2)/sigma,
        // and prediction rescales each coordinate by the fitted stds.
        let coeff_mass: f64 = model.dual_coeffs.iter().map(|c| c.abs()).sum();
        let min_std = model.scaler.stds.iter().cloned().fold(f64::MAX, f64::min);
        let lipschitz = coeff_mass * (-0.5f64).exp() / sigma / min_std;
        for eps in [1e-3, 1e-5, 1e-7] {
            for _ in 0..10 {
                let x =
                    FeatureVector::from_array(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
                let mut shifted = x.to_array();
                let dim = rng.gen_range(0..6);
                shifted[dim] += eps;
                let delta = (model.decision_value(&FeatureVector::from_array(shifted))
                    - model.decision_value(&x))
                .abs();
                assert!(
                    delta <= lipschitz * eps * 1.001 + 1e-12,
                    "eps {eps}: delta {delta} > bound {}",
                    lipschitz * eps
                );
            }
        }
    }

    #[test]
    fn sign_invariance_of_predict() {
        let mut rng = ChaCha12Rng::seed_from_u64(88);
        let pats = random_patterns(&mut rng, 8);
        let model = fit(&pats, &KernelSpec::rbf(3.0), &TrainConfig::default()).unwrap();
        for _ in 0..30 {
            let x = FeatureVector::from_array(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
            assert_eq!(model.predict(&x), model.decision_value(&x) > 0.0);
        }
    }

    #[test]
    fn single_class_input_is_rejected() {
        let pats = vec![
            pattern(embed2(0.0, 0.0), true),
            pattern(embed2(1.0, 1.0), true),
        ];
        assert!(train_smo(
            &pats,
            &KernelSpec::linear(),
            &TrainConfig::default(),
            Scaler::identity()
        )
        .is_err());
    }

    #[test]
    fn model_roundtrip_preserves_decisions_bit_for_bit() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        let pats = random_patterns(&mut rng, 12);
        let model = fit(&pats, &KernelSpec::rbf(1.5), &TrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.svm");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for _ in 0..100 {
            let x = FeatureVector::from_array(std::array::from_fn(|_| rng.gen_range(-3.0..3.0)));
            let a = model.decision_value(&x);
            let b = loaded.decision_value(&x);
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn model_file_bytes_are_stable() {
        let mut rng = ChaCha12Rng::seed_from_u64(102);
        let pats = random_patterns(&mut rng, 8);
        let model = fit(&pats, &KernelSpec::quadratic(), &TrainConfig::default()).unwrap();
        assert_eq!(model_to_string(&model), model_to_string(&model));
    }

    #[test]
    fn wrong_magic_and_truncation_are_model_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.svm");
        std::fs::write(&path, "NOT-A-MODEL v9\n").unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, Error::Model { .. }), "{err}");
        assert!(err.to_string().contains("unsupported header"));

        let mut rng = ChaCha12Rng::seed_from_u64(103);
        let pats = random_patterns(&mut rng, 6);
        let model = fit(&pats, &KernelSpec::linear(), &TrainConfig::default()).unwrap();
        let full = model_to_string(&model);
        let truncated: String = full.lines().take(4).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, truncated).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn kkt_report_is_within_tolerance_after_convergence() {
        let mut rng = ChaCha12Rng::seed_from_u64(104);
        for _ in 0..10 {
            let pats = random_patterns(&mut rng, 20);
            let cfg = TrainConfig {
                c: 0.15,
                seed: rng.gen(),
                ..TrainConfig::default()
            };
            let model = train_smo(&pats, &KernelSpec::rbf(3.0), &cfg, Scaler::identity()).unwrap();
            assert!(model.converged);
            let report = kkt_report(&model, &pats, cfg.c);
            assert!(
                report.max_violation() <= cfg.kkt_tolerance + 1e-9,
                "violation {:?}",
                report
            );
        }
    }
}
