use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require, SourceError, SourceResult};

/// Stopping rules for [`levenberg_marquardt`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 1000,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// One-sigma errors from the residual-scaled inverse normal matrix.
    pub stderr: Vec<f64>,
    /// Half the residual sum of squares.
    pub cost: f64,
    pub iterations: usize,
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, p: &[f64], m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-7 * p[k].abs().max(1e-6);
        q[k] = p[k] + h;
        let up = f(&q);
        q[k] = p[k] - h;
        let down = f(&q);
        q[k] = p[k];
        for i in 0..m {
            j[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    j
}

/// Damped Gauss-Newton least squares on `residuals(p)`, numerical Jacobian.
pub fn levenberg_marquardt<F>(residuals: F, p0: &[f64], opts: FitOptions) -> SourceResult<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let m = r.len();
    require(m >= p.len(), || format!("{m} residuals for {} parameters", p.len()))?;
    require(r.iter().all(|x| x.is_finite()), || "residuals not finite at start".into())?;
    let mut cost = half_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian(&residuals, &p, m);
    while iterations < opts.max_iter {
        iterations += 1;
        if cost < 1e-300 {
            converged = true;
            break;
        }
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_vec(r.clone());
        let mut damped = a.clone();
        for k in 0..p.len() {
            damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
        }
        let Some(step) = damped.lu().solve(&(-g)) else {
            lambda *= 10.0;
            continue;
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let r_trial = residuals(&trial);
        let c_trial = half_sq(&r_trial);
        if c_trial.is_finite() && c_trial < cost {
            let gain = cost - c_trial;
            p = trial;
            r = r_trial;
            cost = c_trial;
            lambda = (lambda / 10.0).max(1e-15);
            jac = jacobian(&residuals, &p, m);
            if gain <= opts.rel_tol * cost {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(SourceError::NonConvergence { iterations });
    }
    let dof = (m as f64 - p.len() as f64).max(1.0);
    let s2 = 2.0 * cost / dof;
    let normal = jac.transpose() * &jac;
    let stderr = match normal.try_inverse() {
        Some(inv) => (0..p.len()).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; p.len()],
    };
    Ok(FitResult {
        params: p,
        stderr,
        cost,
        iterations,
    })
}

/// Lorentzian dip `baseline − depth / (1 + ((x − center)/(width/2))²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center: f64,
    /// Full width at half depth.
    pub width: f64,
    pub depth: f64,
    pub baseline: f64,
    pub stderr: [f64; 4],
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        lorentzian(&[self.center, self.width, self.depth, self.baseline], x)
    }
}

fn lorentzian(p: &[f64], x: f64) -> f64 {
    let u = (x - p[0]) / (0.5 * p[1]);
    p[3] - p[2] / (1.0 + u * u)
}

/// Fits a Lorentzian dip to `(x, y)` samples, e.g. power against tuning voltage.
pub fn lorentzian_fit(scan: &[(f64, f64)]) -> SourceResult<LorentzianFit> {
    require(scan.len() >= 5, || format!("{} points, need at least 5", scan.len()))?;
    require(scan.iter().all(|(x, y)| x.is_finite() && y.is_finite()), || {
        "scan contains non-finite values".into()
    })?;
    let (imin, &(x0, ymin)) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty");
    let ymax = scan.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let depth = ymax - ymin;
    require(depth > 0.0, || "scan has no dip".into())?;
    let level = ymax - depth / 2.0;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imin;
        for i in range {
            if scan[i].1 >= level {
                let (xa, ya) = scan[prev];
                let (xb, yb) = scan[i];
                return Some(xa + (level - ya) * (xb - xa) / (yb - ya));
            }
            prev = i;
        }
        None
    };
    let right = crossing(&mut (imin + 1..scan.len()));
    let left = crossing(&mut (0..imin).rev());
    let span = scan.iter().map(|p| p.0).fold(f64::MIN, f64::max)
        - scan.iter().map(|p| p.0).fold(f64::MAX, f64::min);
    let width0 = match (left, right) {
        (Some(l), Some(r)) => (r - l).abs(),
        (Some(e), None) | (None, Some(e)) => 2.0 * (e - x0).abs(),
        (None, None) => span / 10.0,
    }
    .max(span * 1e-6);
    let res = |p: &[f64]| scan.iter().map(|&(x, y)| lorentzian(p, x) - y).collect::<Vec<_>>();
    let fit = levenberg_marquardt(res, &[x0, width0, depth, ymax], FitOptions::default())?;
    let p = &fit.params;
    Ok(LorentzianFit {
        center: p[0],
        width: p[1].abs(),
        depth: p[2],
        baseline: p[3],
        stderr: [fit.stderr[0], fit.stderr[1], fit.stderr[2], fit.stderr[3]],
        iterations: fit.iterations,
    })
}
