//! Independent reference computations backing the test and acceptance
//! suites. Nothing here shares code with the solvers it checks: the dual
//! problem is maximized by exhaustive active-set enumeration and eigenvalues
//! come from plain Jacobi rotations.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::svm::{kernel_eval, KernelSpec};

/// Exact maximizer of the soft-margin dual found by brute force.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

impl DualSolution {
    /// Decision value from the oracle's own coefficients.
    pub fn decision(&self, x: &[[f64; 6]], y: &[bool], kernel: &KernelSpec, probe: &[f64; 6]) -> f64 {
        let mut sum = self.bias;
        for i in 0..x.len() {
            let yi = if y[i] { 1.0 } else { -1.0 };
            sum += self.alpha[i] * yi * kernel_eval(kernel, &x[i], probe).unwrap();
        }
        sum
    }
}

/// Solves `max_a sum a - 1/2 a^T Q a` subject to `0 <= a <= c` and
/// `sum a_i y_i = 0` by enumerating every assignment of each variable to
/// {lower bound, upper bound, free} and solving the stationarity system of
/// the free block. Exponential in n; intended for n <= 8.
pub fn solve_dual_bruteforce(
    x: &[[f64; 6]],
    y: &[bool],
    kernel: &KernelSpec,
    c: f64,
) -> Result<DualSolution> {
    let n = x.len();
    if n == 0 || n > 8 {
        return Err(Error::Data(format!(
            "brute-force dual solver handles 1..=8 points, got {n}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let ys: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            q[i][j] = ys[i] * ys[j] * kernel_eval(kernel, &x[i], &x[j])?;
        }
    }
    let objective = |a: &[f64]| -> f64 {
        let linear: f64 = a.iter().sum();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q[i][j];
            }
        }
        linear - 0.5 * quad
    };

    let mut best: Option<(f64, Vec<f64>, Option<f64>)> = None;
    let mut consider = |obj: f64, a: Vec<f64>, mu: Option<f64>| {
        if best.as_ref().is_none_or(|(b, _, _)| obj > *b) {
            best = Some((obj, a, mu));
        }
    };

    // Ternary state per variable: 0 -> at zero, 1 -> at c, 2 -> free.
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut states = vec![0u8; n];
        let mut rest = code;
        for s in states.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| states[i] == 2).collect();
        let mut a = vec![0.0; n];
        for i in 0..n {
            if states[i] == 1 {
                a[i] = c;
            }
        }

        if free.is_empty() {
            let residual: f64 = (0..n).map(|i| a[i] * ys[i]).sum();
            if residual.abs() <= 1e-9 * c.max(1.0) {
                consider(objective(&a), a, None);
            }
            continue;
        }

        // Stationarity over the free block plus the equality constraint:
        // [Q_FF y_F; y_F^T 0] [a_F; mu] = [1 - Q_FB a_B; -y_B a_B].
        let m = free.len();
        let mut mat = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            for (cidx, &j) in free.iter().enumerate() {
                mat[r][cidx] = q[i][j];
            }
            mat[r][m] = ys[i];
            let bound_term: f64 = (0..n)
                .filter(|&j| states[j] == 1)
                .map(|j| q[i][j] * c)
                .sum();
            rhs[r] = 1.0 - bound_term;
        }
        for (cidx, &j) in free.iter().enumerate() {
            mat[m][cidx] = ys[j];
        }
        rhs[m] = -(0..n)
            .filter(|&j| states[j] == 1)
            .map(|j| ys[j] * c)
            .sum::<f64>();

        let Some(solution) = solve_linear(mat, rhs) else {
            continue;
        };
        let mu = solution[m];
        let mut feasible = true;
        for (r, &i) in free.iter().enumerate() {
            let v = solution[r];
            if !(-1e-9..=c + 1e-9).contains(&v) {
                feasible = false;
                break;
            }
            a[i] = v.clamp(0.0, c);
        }
        if feasible {
            consider(objective(&a), a, Some(mu));
        }
    }

    let (objective, alpha, mu) = best.ok_or_else(|| {
        Error::NonConvergence("brute-force dual enumeration found no feasible point".into())
    })?;

    // Stationarity of a free variable pins the bias at mu; otherwise take the
    // midpoint of the KKT-feasible bias interval.
    let bias = match mu {
        Some(mu) => mu,
        None => {
            let mut b_lo = f64::NEG_INFINITY;
            let mut b_hi = f64::INFINITY;
            for i in 0..n {
                let g: f64 = (0..n)
                    .map(|j| alpha[j] * ys[j] * kernel_eval(kernel, &x[j], &x[i]).unwrap())
                    .sum();
                let at_zero = alpha[i] <= 1e-12;
                if ys[i] > 0.0 {
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
                0.5 * (b_lo + b_hi)
            } else {
                0.0
            }
        }
    };

    Ok(DualSolution {
        alpha,
        bias,
        objective,
    })
}

/// Gaussian elimination with partial pivoting; `None` on (near-)singular
/// systems, which the enumeration simply skips.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in row + 1..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for qi in p + 1..n {
                if a[p][qi].abs() < 1e-18 {
                    continue;
                }
                let theta = (a[qi][qi] - a[p][p]) / (2.0 * a[p][qi]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][qi]);
                    a[k][p] = cos * akp - sin * akq;
                    a[k][qi] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[qi][k]);
                    a[p][k] = cos * apk - sin * aqk;
                    a[qi][k] = sin * apk + cos * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}
