//! Power-law fit `t = (r - r0)^alpha + c` of a pulse width near its onset.
//!
//! Damped least squares (Levenberg-Marquardt) over `(s, a, c)` with
//! `r0 = min(r) - e^s` and `alpha = e^a`, so every iterate stays in the domain
//! `r > r0`. Several starting values of `r0` are tried and the best kept.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 6;
const STARTS: usize = 8;
const MAX_ITERATIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub r0: f64,
    pub c: f64,
    /// Euclidean norm of the residuals over the fitted points.
    pub residual_norm: f64,
    /// Inclusive `r` range the points were taken from.
    pub window: (f64, f64),
    pub points: usize,
    pub converged: bool,
}

impl PowerLawFit {
    /// Model value; `None` outside the domain `r > r0`.
    pub fn eval(&self, r: f64) -> Option<f64> {
        (r > self.r0).then(|| (r - self.r0).powf(self.alpha) + self.c)
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    x_min: f64,
}

impl Problem<'_> {
    fn unpack(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        (self.x_min - p[0].exp(), p[1].exp(), p[2])
    }

    fn cost(&self, p: &Vector3<f64>) -> f64 {
        let (r0, alpha, c) = self.unpack(p);
        self.x.iter().zip(self.y).map(|(&x, &y)| ((x - r0).powf(alpha) + c - y).powi(2)).sum()
    }

    /// Normal equations `J^T J` and gradient `J^T r`.
    fn normal(&self, p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let (r0, alpha, c) = self.unpack(p);
        let gap = p[0].exp();
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&x, &y) in self.x.iter().zip(self.y) {
            let u = x - r0;
            let ua = u.powf(alpha);
            let res = ua + c - y;
            let row = Vector3::new(alpha * ua / u * gap, alpha * ua * u.ln(), 1.0);
            jtj += row * row.transpose();
            jtr += row * res;
        }
        (jtj, jtr)
    }

    fn solve(&self, mut p: Vector3<f64>) -> (Vector3<f64>, f64, bool) {
        let mut cost = self.cost(&p);
        let mut lambda = 1e-3;
        for _ in 0..MAX_ITERATIONS {
            let (jtj, jtr) = self.normal(&p);
            if jtr.amax() < 1e-14 * (1.0 + cost) {
                return (p, cost, true);
            }
            let mut improved = false;
            while lambda < 1e12 {
                let mut a = jtj;
                for k in 0..3 {
                    a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
                }
                let Some(step) = a.lu().solve(&(-jtr)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = p + step;
                let c = self.cost(&trial);
                if c.is_finite() && c < cost {
                    let done = (cost - c) <= 1e-13 * cost || step.amax() < 1e-12;
                    p = trial;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if done {
                        return (p, cost, true);
                    }
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                // No descent at any damping: a stationary point to machine precision.
                return (p, cost, true);
            }
        }
        (p, cost, false)
    }
}

/// Fits the points whose `r` lies in `window` (inclusive).
pub fn fit_bifurcation(points: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x >= window.0 && x <= window.1 && x.is_finite() && y.is_finite())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Fit {
            message: format!("{} points in window, at least {MIN_FIT_POINTS} needed", pts.len()),
            best: None,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (y_min, y_max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if y_max - y_min <= 1e-12 * y_max.abs().max(1.0) {
        return Err(Error::Fit { message: "data are constant; there is no onset to fit".into(), best: None });
    }
    let x_min = x[0];
    let span = (x[x.len() - 1] - x_min).max(f64::MIN_POSITIVE);
    let problem = Problem { x: &x, y: &y, x_min };

    let mut best: Option<(Vector3<f64>, f64, bool)> = None;
    for k in 0..STARTS {
        // Gaps from 1e-3 to 3 spans below the first point, geometrically spaced.
        let gap = span * 1e-3 * (3e3f64).powf(k as f64 / (STARTS - 1) as f64);
        let alpha0: f64 = 0.5;
        let c0 = y_min - gap.powf(alpha0);
        let (p, cost, converged) = problem.solve(Vector3::new(gap.ln(), alpha0.ln(), c0));
        if !cost.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, bc, bconv)) => (converged && !bconv) || (converged == *bconv && cost < *bc),
        };
        if better {
            best = Some((p, cost, converged));
        }
    }
    let Some((p, cost, converged)) = best else {
        return Err(Error::Fit { message: "every start diverged".into(), best: None });
    };
    let (r0, alpha, c) = problem.unpack(&p);
    let fit = PowerLawFit { alpha, r0, c, residual_norm: cost.sqrt(), window, points: x.len(), converged };
    if !converged {
        return Err(Error::Fit { message: "no start converged".into(), best: Some(Box::new(fit)) });
    }
    Ok(fit)
}
