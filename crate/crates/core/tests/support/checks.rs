//! The oracle comparisons, shared by the oracle tests and the acceptance
//! report. Each returns the worst relative error over its instances.

use fermtwin_core::controller::{fit_calibration, mean_ci95, t_critical_975, CalibrationCurve};
use fermtwin_core::server::{analyze, AnalysisParams, Metric, Point, Resolution, SeriesData, TimeSeriesStore};
use fermtwin_core::{BatchId, SensorId};
use rand::Rng;

use super::*;

pub const INTERPOLATION_TOL: f64 = 1e-12;

pub fn t_quantiles() -> Worst {
    let mut w = Worst::default();
    for dof in 1..=400 {
        let (a, b) = (t_critical_975(dof), t975(dof));
        w.record(rel_err(a, b, 0.0), || format!("dof {dof}: {a} vs {b}"));
    }
    w
}

pub fn confidence_intervals() -> Worst {
    let mut rng = rng(1);
    let mut w = Worst::default();
    for i in 0..INSTANCES {
        let xs = gen_sample(&mut rng);
        let Some(ci) = mean_ci95(&xs) else {
            w.fail(|| format!("instance {i}: no interval for n={}", xs.len()));
            continue;
        };
        let (mean, half) = ci_oracle(&xs);
        w.record(rel_err(ci.mean, mean, 0.0), || format!("instance {i}: mean {} vs {mean}", ci.mean));
        w.record(rel_err(ci.half_width, half, 0.0), || {
            format!("instance {i}: half width {} vs {half}", ci.half_width)
        });
        if ci.n != xs.len() {
            w.fail(|| format!("instance {i}: n {} vs {}", ci.n, xs.len()));
        }
    }
    w
}

/// Coefficients against the Lagrange form, relative to the magnitude of the
/// Lagrange terms; interpolation at the three points relative to the largest
/// correction.
pub fn calibration() -> Worst {
    let mut rng = rng(2);
    let mut w = Worst::default();
    for i in 0..INSTANCES {
        let pts = gen_calibration_points(&mut rng);
        let Ok(q) = fit_calibration(pts) else {
            w.fail(|| format!("instance {i}: fit failed for {pts:?}"));
            continue;
        };
        let (expect, mags) = lagrange_quadratic(pts);
        for (k, got) in [q.a0, q.a1, q.a2].into_iter().enumerate() {
            w.record(rel_err(got, expect[k], mags[k]), || {
                format!("instance {i}: a{k} {got} vs {}", expect[k])
            });
        }
        let curve = CalibrationCurve::fit(SensorId::Pressure, pts).expect("fit succeeded above");
        let c_scale = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        for (p, c) in pts {
            let got = curve.correction(p);
            w.record_within(rel_err(got, c, c_scale), INTERPOLATION_TOL, || {
                format!("instance {i}: curve({p}) {got} vs {c}")
            });
        }
    }
    w
}

/// Counts, minima and maxima exactly; sums and means relative to the sum of
/// magnitudes in the bucket.
pub fn rollups() -> Worst {
    let mut rng = rng(3);
    let mut w = Worst::default();
    let batch = BatchId::new("oracle");
    for i in 0..INSTANCES {
        let series = gen_series(&mut rng);
        let mut store = TimeSeriesStore::default();
        for &(t, value, valid) in &series {
            store
                .append(&batch, Metric::Conductivity, Point { t, value, valid })
                .expect("increasing timestamps");
        }
        let first = series[0].0;
        let last = series[series.len() - 1].0;
        let ranges = [(i64::MIN / 2, i64::MAX / 2), (rng.random_range(first - 60_000..=last), last + 1)];
        for res in Resolution::ROLLUPS {
            let width = res.bucket_ms().expect("rollup width");
            let all = brute_rollups(&series, width);
            for (from, to) in ranges {
                let lo = from - from.rem_euclid(width);
                let expect: Vec<_> = all.range(lo..to).collect();
                let got = match store.query_range(&batch, Metric::Conductivity, from, to, res) {
                    Ok(SeriesData::Rollup(r)) => r,
                    other => {
                        w.fail(|| format!("instance {i}: {res:?} query gave {other:?}"));
                        continue;
                    }
                };
                if got.len() != expect.len() {
                    w.fail(|| format!("instance {i}: {res:?} {} buckets vs {}", got.len(), expect.len()));
                    continue;
                }
                for (g, (&start, e)) in got.iter().zip(expect) {
                    if g.start != start || g.count != e.count || g.min != e.min || g.max != e.max {
                        w.fail(|| format!("instance {i}: {res:?} bucket {g:?} vs {start} {e:?}"));
                    }
                    w.record(rel_err(g.sum, e.sum, e.abs_sum), || format!("instance {i}: sum {} vs {}", g.sum, e.sum));
                    let mean = e.sum / e.count as f64;
                    w.record(rel_err(g.mean, mean, e.abs_sum / e.count as f64), || {
                        format!("instance {i}: mean {} vs {mean}", g.mean)
                    });
                }
            }
        }
    }
    w
}

/// Attenuation and ABV relative to their operand magnitudes, the rate slope
/// relative to the pairwise magnitude scale, the fit residual and the
/// completion forecast recomputed from the returned fit parameters.
pub fn derived_metrics() -> Worst {
    let mut rng = rng(4);
    let mut w = Worst::default();
    let params = AnalysisParams::default();
    for i in 0..INSTANCES {
        let case = gen_gravity(&mut rng);
        let h = &case.history;
        let report = match analyze(h, case.og, case.fg, &params) {
            Ok(r) => r,
            Err(e) => {
                w.fail(|| format!("instance {i}: {e}"));
                continue;
            }
        };
        let m = report.metrics;
        let sg = h[h.len() - 1].1;
        if m.current_gravity != sg || report.points != h.len() {
            w.fail(|| format!("instance {i}: current gravity {} vs {sg}", m.current_gravity));
        }
        let (og_pts, sg_pts) = (points_of(case.og), points_of(sg).abs());
        let att = attenuation_oracle(case.og, sg);
        w.record(rel_err(m.apparent_attenuation, att, 100.0 * (og_pts + sg_pts) / og_pts), || {
            format!("instance {i}: attenuation {} vs {att}", m.apparent_attenuation)
        });
        let abv = abv_oracle(case.og, sg);
        w.record(rel_err(m.abv_estimate, abv, 0.13125 * (og_pts + sg_pts)), || {
            format!("instance {i}: abv {} vs {abv}", m.abv_estimate)
        });

        let window = rate_window(h, params.rate_window_ms);
        let (slope, scale) = pairwise_slope(&window).unwrap_or((0.0, 0.0));
        w.record(rel_err(m.fermentation_rate, slope, scale), || {
            format!("instance {i}: rate {} vs {slope} over {} points", m.fermentation_rate, window.len())
        });

        let Some(fit) = report.fit else {
            if m.predicted_completion.is_some() {
                w.fail(|| format!("instance {i}: completion without a fit"));
            }
            continue;
        };
        if fit.origin != h[0].0 {
            w.fail(|| format!("instance {i}: fit origin {} vs {}", fit.origin, h[0].0));
        }
        let p = [fit.og, fit.fg, fit.rate_k, fit.t_mid_h];
        let rms = rms_of(h, fit.origin, p);
        w.record(rel_err(fit.rms_residual, rms, 1e-12), || {
            format!("instance {i}: rms {} vs {rms}", fit.rms_residual)
        });
        let span = fit.og - fit.fg;
        let margin = params.completion_margin;
        let expect = (rms <= params.max_fit_rms && span > margin && fit.rate_k > 0.0).then(|| {
            let hours = fit.t_mid_h + (span / margin - 1.0).ln() / fit.rate_k;
            hours * MS_PER_HOUR
        });
        match (m.predicted_completion, expect) {
            (None, None) => {}
            (Some(got), Some(want)) => {
                let got = (got - fit.origin) as f64;
                w.record(rel_err(got, want.round(), 1.0), || format!("instance {i}: completion +{got} ms vs +{want} ms"));
            }
            (got, want) => w.fail(|| format!("instance {i}: completion {got:?} vs {want:?}")),
        }
    }
    w
}

#[derive(Debug, Default)]
pub struct AuthSweep {
    pub cases: usize,
    pub decisions: usize,
    pub remote_critical_dispatched: usize,
    pub estop_refused: usize,
}

/// Every kind, origin, confirmation set, declared level and controller
/// state, then every confirmation of whatever is left pending.
pub fn authorization_sweep() -> AuthSweep {
    use fermtwin_core::controller::SamplingState;
    use fermtwin_core::domain::{CommandEnvelope, CommandId, CommandKind, Confirmation, Origin, SafetyLevel};
    use fermtwin_core::server::{CommandStatus, ControlService, SafetyContext};
    use fermtwin_core::PressureBar;
    use std::collections::BTreeSet;

    let kinds = [
        CommandKind::SetSamplingInterval { interval_ms: 60_000 },
        CommandKind::SetSamplingInterval { interval_ms: 1_000 },
        CommandKind::RequestSampleCycle,
        CommandKind::PauseSampling,
        CommandKind::ResumeSampling,
        CommandKind::ManualDepressurize,
        CommandKind::OverridePressureLimit { limit: PressureBar(8.5) },
        CommandKind::OverridePressureLimit { limit: PressureBar(12.0) },
        CommandKind::EmergencyStop,
        CommandKind::ResetEmergencyShutdown,
    ];
    let origins = [Origin::Remote, Origin::Physical];
    let sets: Vec<BTreeSet<Confirmation>> = vec![
        BTreeSet::new(),
        [Confirmation::Digital].into(),
        [Confirmation::Physical].into(),
        [Confirmation::Digital, Confirmation::Physical].into(),
    ];
    let levels = [SafetyLevel::Standard, SafetyLevel::Limited, SafetyLevel::Critical];
    let states = std::iter::once(None).chain(SamplingState::ALL.into_iter().map(Some));

    let mut sweep = AuthSweep::default();
    for state in states {
        let ctx = SafetyContext {
            state,
            pressure_setpoint: PressureBar(7.0),
            relief_threshold: PressureBar(10.0),
        };
        for kind in &kinds {
            for origin in origins {
                for set in &sets {
                    for level in levels {
                        sweep.cases += 1;
                        let mut env = CommandEnvelope::new(CommandId(1), kind.clone(), origin, 1_000);
                        env.confirmations = set.clone();
                        env.level = level;
                        let mut svc = ControlService::default();
                        let first = svc.submit(env, &ctx, 1_000);
                        sweep.decisions += 1;
                        if *kind == CommandKind::EmergencyStop
                            && (first.record.status != CommandStatus::Dispatched || first.dispatch.is_none())
                        {
                            sweep.estop_refused += 1;
                        }
                        let mut dispatched: Vec<CommandEnvelope> = first.dispatch.into_iter().collect();
                        if matches!(first.record.status, CommandStatus::Pending { .. }) {
                            for by in origins {
                                for extra in &sets {
                                    let mut fork = svc.clone();
                                    if let Ok(d) = fork.confirm(CommandId(1), by, extra, &ctx, 2_000) {
                                        sweep.decisions += 1;
                                        dispatched.extend(d.dispatch);
                                    }
                                }
                            }
                        }
                        let critical = dispatched.iter().any(|e| e.kind.level() == SafetyLevel::Critical);
                        if critical && origin == Origin::Remote {
                            sweep.remote_critical_dispatched += 1;
                        }
                    }
                }
            }
        }
    }
    sweep
}
