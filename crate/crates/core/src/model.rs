//! Exponential decay model of unicity against dataset size,
//! `f(x) = a·exp(-b·x^p) + c` with `p = 1/2` by default, fitted by
//! Levenberg-Marquardt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized dataset size and measured unicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Starting `(a, b, c)`; derived from the data when `None`.
    pub init: Option<(f64, f64, f64)>,
    pub max_iter: usize,
    /// Convergence threshold on the Euclidean norm of a step.
    pub tol: f64,
    /// Power of `x` in the exponent.
    pub exponent: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { init: None, max_iter: 200, tol: 1e-10, exponent: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub exponent: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        model(self.a, self.b, self.c, self.exponent, x)
    }
}

fn model(a: f64, b: f64, c: f64, p: f64, x: f64) -> f64 {
    a * (-b * x.powf(p)).exp() + c
}

/// Divides sizes by `x_max`; unicity values pass through.
pub fn normalize_curve(points: &[(f64, f64)], x_max: f64) -> Result<Vec<CurvePoint>> {
    if !(x_max > 0.0) {
        return Err(Error::InvalidSpec(format!("x_max must be positive, got {x_max}")));
    }
    points
        .iter()
        .map(|&(size, y)| {
            if !(size > 0.0) {
                Err(Error::InvalidSpec(format!("size must be positive, got {size}")))
            } else if size > x_max {
                Err(Error::InvalidSpec(format!("size {size} exceeds x_max {x_max}")))
            } else {
                Ok(CurvePoint { x: size / x_max, y })
            }
        })
        .collect()
}

/// First `ceil(fraction·n)` points for training, the rest (largest sizes)
/// for testing. Points must be sorted by `x`.
pub fn split_at_fraction(points: &[CurvePoint], fraction: f64) -> Result<(Vec<CurvePoint>, Vec<CurvePoint>)> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 points, got {}", points.len())));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidSpec(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    if points.windows(2).any(|w| w[0].x > w[1].x) {
        return Err(Error::InvalidSpec("points must be sorted by x".into()));
    }
    // guard against 0.7·10 = 7.000000000000001
    let cut = ((fraction * points.len() as f64) - 1e-9).ceil() as usize;
    let cut = cut.clamp(1, points.len() - 1);
    Ok((points[..cut].to_vec(), points[cut..].to_vec()))
}

/// 70/30 split.
pub fn train_test_split(points: &[CurvePoint]) -> Result<(Vec<CurvePoint>, Vec<CurvePoint>)> {
    split_at_fraction(points, 0.7)
}

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e20;

fn sum_sq(points: &[CurvePoint], p: [f64; 3], e: f64) -> f64 {
    points
        .iter()
        .map(|pt| (pt.y - model(p[0], p[1], p[2], e, pt.x)).powi(2))
        .sum()
}

/// Solves the 3×3 system `m·v = rhs` by Gaussian elimination with partial
/// pivoting. `None` if singular.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if !(m[pivot][col].abs() > 1e-300) {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut v = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * v[k]).sum();
        v[row] = (rhs[row] - s) / m[row][row];
    }
    v.iter().all(|x| x.is_finite()).then_some(v)
}

/// Least-squares fit of `a·exp(-b·x^p) + c` to `train`.
pub fn fit_exponential(train: &[CurvePoint], opts: &FitOptions) -> Result<FitResult> {
    if train.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 points, got {}", train.len())));
    }
    let e = opts.exponent;
    let mut p = match opts.init {
        Some((a, b, c)) => [a, b, c],
        None => {
            let first = train.iter().min_by(|u, v| u.x.total_cmp(&v.x)).expect("non-empty");
            let last = train.iter().max_by(|u, v| u.x.total_cmp(&v.x)).expect("non-empty");
            [first.y - last.y, 1.0, last.y]
        }
    };
    let mut cost = sum_sq(train, p, e);
    let mut lambda = LAMBDA_START;
    let mut iterations = 0;
    let mut converged = false;
    let mut normal = normal_equations(train, p, e);
    while iterations < opts.max_iter {
        iterations += 1;
        let (jtj, jtr) = normal;
        let max_diag = jtj[0][0].max(jtj[1][1]).max(jtj[2][2]).max(1.0);
        let mut damped = jtj;
        for (j, row) in damped.iter_mut().enumerate() {
            row[j] += lambda * jtj[j][j].max(1e-12 * max_diag);
        }
        let Some(delta) = solve3(damped, jtr) else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                return Err(Error::FitFailed("singular normal equations".into()));
            }
            continue;
        };
        let step = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if step < opts.tol {
            converged = true;
            break;
        }
        let trial = [p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]];
        let trial_cost = sum_sq(train, trial, e);
        if trial_cost < cost {
            p = trial;
            cost = trial_cost;
            lambda = (lambda / 10.0).max(1e-15);
            normal = normal_equations(train, p, e);
        } else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                return Err(Error::FitFailed("damping exhausted without progress".into()));
            }
        }
    }
    if p[2] < 0.0 {
        log::warn!("fitted asymptote c = {} is negative", p[2]);
    }
    Ok(FitResult {
        a: p[0],
        b: p[1],
        c: p[2],
        exponent: e,
        iterations,
        residual_norm: cost.sqrt(),
        converged,
    })
}

/// `JᵀJ` and `Jᵀr` at `p` with `r = y - f(x)`.
fn normal_equations(points: &[CurvePoint], p: [f64; 3], e: f64) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for pt in points {
        let xp = pt.x.powf(e);
        let ex = (-p[1] * xp).exp();
        let j = [ex, -p[0] * xp * ex, 1.0];
        let r = pt.y - (p[0] * ex + p[2]);
        for u in 0..3 {
            jtr[u] += j[u] * r;
            for v in 0..3 {
                jtj[u][v] += j[u] * j[v];
            }
        }
    }
    (jtj, jtr)
}

/// Average absolute prediction error over `test`.
pub fn mean_abs_error(fit: &FitResult, test: &[CurvePoint]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    Ok(test.iter().map(|pt| (pt.y - fit.predict(pt.x)).abs()).sum::<f64>() / test.len() as f64)
}
