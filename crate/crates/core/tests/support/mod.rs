//! Seeded generators and reference implementations shared by the
//! integration tests. Only [`checks`] calls into the crate.

#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const REL_TOL: f64 = 1e-9;
pub const INSTANCES: usize = 1_000;

pub fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xF3A7_0000 ^ stream)
}

/// `|a - b|` measured against the larger magnitude of the two and `scale`.
pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(scale)
}

// Student-t quantile.

/// `P(|T| <= t)` for `dof` degrees of freedom, by the finite trigonometric
/// series for integer `dof`.
pub fn t_central_prob(t: f64, dof: u32) -> f64 {
    let theta = (t / f64::from(dof).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    if dof % 2 == 1 {
        let mut sum = 0.0;
        let mut term = c;
        let mut k = 1;
        while k + 2 <= dof {
            sum += term;
            term *= c2 * f64::from(k + 1) / f64::from(k + 2);
            k += 2;
        }
        std::f64::consts::FRAC_2_PI * (theta + s * sum)
    } else {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 0;
        while k + 2 <= dof {
            sum += term;
            term *= c2 * f64::from(k + 1) / f64::from(k + 2);
            k += 2;
        }
        s * sum
    }
}

/// Two-sided 95% critical value by bisection on [`t_central_prob`].
pub fn t975(dof: u32) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 100.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t_central_prob(mid, dof) < 0.95 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean and CI half-width with the variance from pairwise differences,
/// `s^2 = sum_{i<j} (x_i - x_j)^2 / (n (n - 1))`.
pub fn ci_oracle(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = neumaier_sum(&sorted) / n as f64;
    let mut pair = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = xs[i] - xs[j];
            pair.push(d * d);
        }
    }
    let var = neumaier_sum(&pair) / (n * (n - 1)) as f64;
    (mean, t975((n - 1) as u32) * (var / n as f64).sqrt())
}

pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A sample resembling repeated sensor readings: an offset plus noise a few
/// decades smaller.
pub fn gen_sample(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = if rng.random_bool(0.8) { rng.random_range(2..=30) } else { rng.random_range(31..=200) };
    let offset: f64 = rng.random_range(-10.0..2_000.0);
    if rng.random_bool(0.03) {
        return vec![offset; n];
    }
    let spread = offset.abs().max(1.0) * 10f64.powf(rng.random_range(-5.0..-1.0));
    (0..n).map(|_| offset + spread * rng.random_range(-1.0..1.0)).collect()
}

// Calibration.

/// Lagrange form of the quadratic through three points. Each coefficient
/// comes with the sum of magnitudes of the terms that produced it.
pub fn lagrange_quadratic(points: [(f64, f64); 3]) -> ([f64; 3], [f64; 3]) {
    let mut coeffs = [0.0; 3];
    let mut mags = [0.0; 3];
    for i in 0..3 {
        let (pi, ci) = points[i];
        let (pj, pk) = (points[(i + 1) % 3].0, points[(i + 2) % 3].0);
        let w = ci / ((pi - pj) * (pi - pk));
        let terms = [w * pj * pk, -w * (pj + pk), w];
        for k in 0..3 {
            coeffs[k] += terms[k];
            mags[k] += terms[k].abs();
        }
    }
    (coeffs, mags)
}

pub fn gen_calibration_points(rng: &mut ChaCha8Rng) -> [(f64, f64); 3] {
    let base = [0.0, 3.5, 7.0];
    loop {
        let ps: [f64; 3] = if rng.random_bool(0.5) {
            base.map(|p| p + rng.random_range(-0.5..0.5))
        } else {
            [(); 3].map(|_| rng.random_range(0.0..10.0))
        };
        let min_gap = (0..3)
            .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
            .map(|(i, j)| (ps[i] - ps[j]).abs())
            .fold(f64::INFINITY, f64::min);
        if min_gap >= 0.1 {
            return ps.map(|p| (p, rng.random_range(-1.0..1.0)));
        }
    }
}

// Rollups.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub count: u64,
    pub sum: f64,
    pub abs_sum: f64,
    pub min: f64,
    pub max: f64,
}

/// Buckets keyed by start time, from valid points only.
pub fn brute_rollups(points: &[(i64, f64, bool)], width: i64) -> BTreeMap<i64, Bucket> {
    let mut raw: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &(t, v, valid) in points {
        if valid {
            raw.entry(t - t.rem_euclid(width)).or_default().push(v);
        }
    }
    raw.into_iter()
        .map(|(start, vs)| {
            let bucket = Bucket {
                count: vs.len() as u64,
                sum: neumaier_sum(&vs),
                abs_sum: vs.iter().map(|v| v.abs()).sum(),
                min: vs.iter().copied().fold(f64::INFINITY, f64::min),
                max: vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            (start, bucket)
        })
        .collect()
}

/// Strictly increasing timestamps with a mix of dense and sparse gaps.
pub fn gen_series(rng: &mut ChaCha8Rng) -> Vec<(i64, f64, bool)> {
    let n = rng.random_range(1..=1_500);
    let mut t: i64 = 1_700_000_000_000 + rng.random_range(0..3_600_000);
    let base: f64 = rng.random_range(-50.0..1_000.0);
    let spread: f64 = rng.random_range(0.01..20.0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        t += if rng.random_bool(0.9) { rng.random_range(1..30_000) } else { rng.random_range(30_000..7_200_000) };
        out.push((t, base + spread * rng.random_range(-1.0..1.0), rng.random_bool(0.9)));
    }
    out
}

// Derived metrics.

pub const MS_PER_HOUR: f64 = 3_600_000.0;
pub const MS_PER_DAY: f64 = 86_400_000.0;

pub fn points_of(sg: f64) -> f64 {
    (sg - 1.0) * 1000.0
}

pub fn attenuation_oracle(og: f64, sg: f64) -> f64 {
    let og_pts = points_of(og);
    100.0 * (og_pts - points_of(sg)) / og_pts
}

pub fn abv_oracle(og: f64, sg: f64) -> f64 {
    (points_of(og) - points_of(sg)) * 0.13125
}

/// Slope from pairwise differences, `sum (dx dy) / sum dx^2` over all
/// pairs. The scale returned with it is the larger of `sum |dx dy| / sum dx^2`
/// and the sensitivity of the slope to rounding in `y`.
pub fn pairwise_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut num = Vec::new();
    let mut den = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = points[i].0 - points[j].0;
            let dy = points[i].1 - points[j].1;
            num.push(dx * dy);
            den.push(dx * dx);
        }
    }
    let d = neumaier_sum(&den);
    if d <= 0.0 {
        return None;
    }
    let mag: f64 = num.iter().map(|v| v.abs()).sum();
    let n = points.len() as f64;
    let mx = neumaier_sum(&points.iter().map(|p| p.0).collect::<Vec<_>>()) / n;
    let y_max = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let dx_abs: f64 = points.iter().map(|p| (p.0 - mx).abs()).sum();
    let dx_sq: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((neumaier_sum(&num) / d, (mag / d).max(y_max * dx_abs / dx_sq)))
}

/// Points of the rate window: everything within `window_ms` of the last
/// reading, but never fewer than the last two.
pub fn rate_window(history: &[(i64, f64)], window_ms: i64) -> Vec<(f64, f64)> {
    let t_last = history[history.len() - 1].0;
    let mut picked: Vec<(i64, f64)> = history.iter().copied().filter(|&(t, _)| t_last - t <= window_ms).collect();
    if picked.len() < 2 {
        picked = history[history.len() - 2..].to_vec();
    }
    picked
        .into_iter()
        .map(|(t, sg)| ((t - t_last) as f64 / MS_PER_DAY, points_of(sg)))
        .collect()
}

pub fn logistic_sg(og: f64, fg: f64, k: f64, mid_h: f64, hours: f64) -> f64 {
    fg + (og - fg) / (1.0 + (k * (hours - mid_h)).exp())
}

pub fn rms_of(history: &[(i64, f64)], origin: i64, p: [f64; 4]) -> f64 {
    let sq: Vec<f64> = history
        .iter()
        .map(|&(t, sg)| {
            let h = (t - origin) as f64 / MS_PER_HOUR;
            (sg - logistic_sg(p[0], p[1], p[2], p[3], h)).powi(2)
        })
        .collect();
    (neumaier_sum(&sq) / history.len() as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct GravityCase {
    pub og: f64,
    pub fg: f64,
    pub history: Vec<(i64, f64)>,
}

/// A noisy logistic gravity history sampled at a random interval.
pub fn gen_gravity(rng: &mut ChaCha8Rng) -> GravityCase {
    let og = rng.random_range(1.040..1.090);
    let fg = rng.random_range(0.998..1.015);
    let k = rng.random_range(0.03..0.2);
    let mid_h = rng.random_range(12.0..120.0);
    let noise = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.002) };
    let interval_ms: i64 = match rng.random_range(0..4) {
        0 => rng.random_range(5_000..60_000),
        1 => rng.random_range(60_000..900_000),
        2 => rng.random_range(900_000..3_600_000),
        _ => rng.random_range(3_600_000..10 * 3_600_000),
    };
    let n = rng.random_range(2..=250);
    let start_h = rng.random_range(0.0..200.0);
    let origin = 1_700_000_000_000i64;
    let start = origin + (start_h * MS_PER_HOUR) as i64;
    let history = (0..n as i64)
        .map(|i| {
            let t = start + i * interval_ms + rng.random_range(0..1_000);
            let h = (t - origin) as f64 / MS_PER_HOUR;
            (t, logistic_sg(og, fg, k, mid_h, h) + noise * rng.random_range(-1.0..1.0))
        })
        .collect();
    GravityCase { og, fg, history }
}

/// Tally of worst errors for a family of checks.
#[derive(Debug, Default)]
pub struct Worst {
    pub max_err: f64,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl Worst {
    pub fn record(&mut self, err: f64, what: impl FnOnce() -> String) {
        self.record_within(err, REL_TOL, what);
    }

    pub fn record_within(&mut self, err: f64, tol: f64, what: impl FnOnce() -> String) {
        self.max_err = self.max_err.max(err);
        if !(err <= tol) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    pub fn fail(&mut self, what: impl FnOnce() -> String) {
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(what());
        }
    }

    pub fn ok(&self) -> bool {
        self.failures == 0
    }
}
