//! Derived fermentation metrics and logistic trend fitting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{gravity_points, WallMs};

const MS_PER_HOUR: f64 = 3_600_000.0;
const MS_PER_DAY: f64 = 86_400_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    /// Completion is forecast for the time the fit reaches `fg + margin`.
    pub completion_margin: f64,
    pub anomaly_threshold: f64,
    #[serde(rename = "rate_window_ms")]
    pub rate_window_ms: i64,
    /// Fits with a larger RMS residual give no completion forecast.
    pub max_fit_rms: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            completion_margin: 0.002,
            anomaly_threshold: 0.005,
            rate_window_ms: 12 * 3_600_000,
            max_fit_rms: 0.003,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    pub current_gravity: f64,
    /// Percent.
    pub apparent_attenuation: f64,
    /// Percent by volume.
    pub abv_estimate: f64,
    /// Gravity points per day; negative while fermenting.
    pub fermentation_rate: f64,
    pub predicted_completion: Option<WallMs>,
}

/// `sg(t) = fg + (og - fg) / (1 + exp(rate_k * (t - t_mid)))`, with `t` in
/// hours since `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub og: f64,
    pub fg: f64,
    pub rate_k: f64,
    pub t_mid_h: f64,
    pub origin: WallMs,
    pub rms_residual: f64,
}

impl LogisticFit {
    pub fn sg_at(&self, t: WallMs) -> f64 {
        logistic([self.og, self.fg, self.rate_k, self.t_mid_h], (t - self.origin) as f64 / MS_PER_HOUR)
    }

    /// Earliest time the curve is within `margin` of its final gravity.
    pub fn time_to_within(&self, margin: f64) -> Option<WallMs> {
        let span = self.og - self.fg;
        if !(span > margin && self.rate_k > 0.0 && margin > 0.0) {
            return None;
        }
        let h = self.t_mid_h + (span / margin - 1.0).ln() / self.rate_k;
        h.is_finite().then(|| self.origin + (h * MS_PER_HOUR).round() as WallMs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub timestamp: WallMs,
    pub observed: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub metrics: DerivedMetrics,
    pub fit: Option<LogisticFit>,
    pub anomalies: Vec<Anomaly>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("need at least two gravity readings, have {0}")]
    InsufficientData(usize),
}

pub fn apparent_attenuation(og: f64, sg: f64) -> f64 {
    100.0 * (og - sg) / (og - 1.0)
}

pub fn abv_estimate(og: f64, sg: f64) -> f64 {
    (og - sg) * 131.25
}

/// Ordinary least-squares slope of `y` on `x`. `None` when all `x` coincide.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

fn logistic(p: [f64; 4], t: f64) -> f64 {
    let [og, fg, k, m] = p;
    fg + (og - fg) / (1.0 + (k * (t - m)).exp())
}

fn jacobian_row(p: [f64; 4], t: f64) -> [f64; 4] {
    let [og, fg, k, m] = p;
    let e = (k * (t - m)).exp();
    let s = 1.0 / (1.0 + e);
    let ds = -(og - fg) * s * s * e;
    [s, 1.0 - s, ds * (t - m), -ds * k]
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for c in col..4 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn sse(p: [f64; 4], data: &[(f64, f64)]) -> f64 {
    data.iter().map(|&(t, y)| (y - logistic(p, t)).powi(2)).sum()
}

/// Levenberg-Marquardt least-squares fit of the logistic curve. `data` is
/// `(hours, sg)`. Returns the parameters `[og, fg, rate_k, t_mid]`.
pub fn fit_logistic_hours(data: &[(f64, f64)], initial: [f64; 4]) -> Option<[f64; 4]> {
    if data.len() < 4 {
        return None;
    }
    let mut p = initial;
    let mut cost = sse(p, data);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for &(t, y) in data {
            let j = jacobian_row(p, t);
            let r = y - logistic(p, t);
            for a in 0..4 {
                jtr[a] += j[a] * r;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for (d, row) in damped.iter_mut().enumerate() {
                row[d] += lambda * jtj[d][d].max(1e-12);
            }
            let Some(delta) = solve4(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = p;
            for a in 0..4 {
                cand[a] += delta[a];
            }
            if cand[2] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let c = sse(cand, data);
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = cand;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    return Some(p);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    p.iter().all(|v| v.is_finite()).then_some(p)
}

/// Analysis of a gravity history `(timestamp, sg)`, sorted by time.
pub fn analyze(
    history: &[(WallMs, f64)],
    og: f64,
    expected_fg: f64,
    params: &AnalysisParams,
) -> Result<TrendReport, AnalysisError> {
    if history.len() < 2 {
        return Err(AnalysisError::InsufficientData(history.len()));
    }
    let &(t_last, sg) = history.last().expect("non-empty");

    let window_start = t_last - params.rate_window_ms;
    let lo = history.partition_point(|(t, _)| *t < window_start).min(history.len() - 2);
    let window: Vec<(f64, f64)> = history[lo..]
        .iter()
        .map(|&(t, v)| ((t - t_last) as f64 / MS_PER_DAY, gravity_points(v)))
        .collect();
    let fermentation_rate = least_squares_slope(&window).unwrap_or(0.0);

    let origin = history[0].0;
    let data: Vec<(f64, f64)> = history
        .iter()
        .map(|&(t, v)| ((t - origin) as f64 / MS_PER_HOUR, v))
        .collect();
    let initial = initial_guess(&data, og, expected_fg);
    let fit = fit_logistic_hours(&data, initial).map(|p| {
        let rms = (sse(p, &data) / data.len() as f64).sqrt();
        LogisticFit {
            og: p[0],
            fg: p[1],
            rate_k: p[2],
            t_mid_h: p[3],
            origin,
            rms_residual: rms,
        }
    });

    let usable = fit.filter(|f| f.rms_residual <= params.max_fit_rms && f.og > f.fg);
    let predicted_completion = usable.and_then(|f| f.time_to_within(params.completion_margin));

    let anomalies = match fit {
        Some(f) => history
            .iter()
            .filter_map(|&(t, v)| {
                let expected = f.sg_at(t);
                ((v - expected).abs() > params.anomaly_threshold).then_some(Anomaly {
                    timestamp: t,
                    observed: v,
                    expected,
                })
            })
            .collect(),
        None => Vec::new(),
    };

    Ok(TrendReport {
        metrics: DerivedMetrics {
            current_gravity: sg,
            apparent_attenuation: apparent_attenuation(og, sg),
            abv_estimate: abv_estimate(og, sg),
            fermentation_rate,
            predicted_completion,
        },
        fit,
        anomalies,
        points: history.len(),
    })
}

fn initial_guess(data: &[(f64, f64)], og: f64, fg: f64) -> [f64; 4] {
    let k = 0.08;
    // Invert the curve at the latest reading for a midpoint estimate.
    let &(t, y) = data.last().expect("non-empty");
    let s = ((y - fg) / (og - fg)).clamp(0.01, 0.99);
    let m = t - (1.0 / s - 1.0).ln() / k;
    [og, fg, k, m]
}
