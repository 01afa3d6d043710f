//! Modeled-versus-measured power comparison.
//!
//! Each aligned sample inside the profile span is checked against the
//! modeled power at the same trace time. A sample is out of tolerance when
//! `|measured − modeled| > max(rel_tol · modeled, abs_floor)`. Samples close
//! to an event are skipped, since the sampler cannot resolve instantaneous
//! steps. Runs of consecutive out-of-tolerance samples with the same sign
//! become [`Discrepancy`] intervals.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{Alignment, MeasurementSeries, Sample, Unit};
use crate::simulate::PowerProfile;

pub const DEFAULT_REL_TOL: f64 = 0.05;
pub const DEFAULT_ABS_FLOOR_W: f64 = 0.005;
pub const DEFAULT_GUARD_PERIODS: f64 = 2.0;
pub const DEFAULT_MIN_VIOLATION_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationConfig {
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Seconds excluded on each side of every event. `None` means two sample
    /// periods of the measured series.
    pub guard: Option<f64>,
    pub min_violation_run: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_floor: DEFAULT_ABS_FLOOR_W,
            guard: None,
            min_violation_run: DEFAULT_MIN_VIOLATION_RUN,
        }
    }
}

impl ValidationConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.abs_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "abs_floor must be non-negative, got {}",
                self.abs_floor
            )));
        }
        if let Some(g) = self.guard {
            if !(g >= 0.0) {
                return Err(Error::InvalidArgument(format!("guard must be non-negative, got {g}")));
            }
        }
        if self.min_violation_run == 0 {
            return Err(Error::InvalidArgument("min_violation_run must be at least 1".into()));
        }
        Ok(())
    }

    pub fn guard_for(&self, series: &MeasurementSeries) -> f64 {
        self.guard
            .unwrap_or(DEFAULT_GUARD_PERIODS * series.sample_period())
    }

    /// Whether a measured value is out of tolerance of the modeled one.
    pub fn violates(&self, modeled: f64, measured: f64) -> bool {
        (measured - modeled).abs() > (self.rel_tol * modeled).max(self.abs_floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscrepancyKind {
    /// Measured power above the model.
    Excess,
    Deficit,
}

impl fmt::Display for DiscrepancyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscrepancyKind::Excess => "excess",
            DiscrepancyKind::Deficit => "deficit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub t_start: f64,
    pub t_end: f64,
    pub kind: DiscrepancyKind,
    pub mean_modeled: f64,
    pub mean_measured: f64,
    pub samples: usize,
}

impl Discrepancy {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Length of the intersection with `[a, b]`.
    pub fn overlap(&self, a: f64, b: f64) -> f64 {
        (self.t_end.min(b) - self.t_start.max(a)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub discrepancies: Vec<Discrepancy>,
    pub samples_checked: usize,
    pub samples_excluded: usize,
    pub max_rel_error: f64,
    pub verdict: Verdict,
    pub offset: f64,
    pub config: ValidationConfig,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        };
        writeln!(
            f,
            "{verdict}: {} samples checked, {} excluded, max relative error {:.2}% (tolerance {:.2}%), clock offset {:.4} s",
            self.samples_checked,
            self.samples_excluded,
            100.0 * self.max_rel_error,
            100.0 * self.config.rel_tol,
            self.offset
        )?;
        for d in &self.discrepancies {
            writeln!(
                f,
                "  {} [{:.3}, {:.3}] s: modeled {:.4} W, measured {:.4} W ({} samples)",
                d.kind, d.t_start, d.t_end, d.mean_modeled, d.mean_measured, d.samples
            )?;
        }
        Ok(())
    }
}

struct Run {
    kind: DiscrepancyKind,
    t_start: f64,
    last_index: usize,
    count: usize,
    sum_modeled: f64,
    sum_measured: f64,
}

/// A measured sample mapped onto the trace clock with its modeled value.
struct Aligned {
    t: f64,
    modeled: f64,
    measured: f64,
}

fn aligned_samples(profile: &PowerProfile, series: &MeasurementSeries, alignment: &Alignment) -> Result<Vec<Aligned>> {
    if series.unit() != Unit::Watts {
        return Err(Error::InvalidArgument("comparison needs a power series".into()));
    }
    let out: Vec<Aligned> = series
        .samples()
        .iter()
        .filter_map(|s| {
            let t = alignment.to_trace_time(s.t);
            profile.power_at(t).ok().map(|modeled| Aligned {
                t,
                modeled,
                measured: s.value,
            })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(out)
}

pub fn compare(
    profile: &PowerProfile,
    series: &MeasurementSeries,
    alignment: &Alignment,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    cfg.check()?;
    let samples = aligned_samples(profile, series, alignment)?;
    let guard = cfg.guard_for(series);
    let mut event_times: Vec<f64> = profile.events().iter().map(|e| e.t).collect();
    event_times.sort_by(f64::total_cmp);
    let guarded = |t: f64| {
        let i = event_times.partition_point(|&e| e < t);
        let near = |j: usize| event_times.get(j).is_some_and(|&e| (e - t).abs() <= guard);
        near(i) || (i > 0 && near(i - 1))
    };

    let mut discrepancies = Vec::new();
    let mut checked = 0;
    let mut max_rel_error: f64 = 0.0;
    let mut run: Option<Run> = None;

    let close = |run: Option<Run>, discrepancies: &mut Vec<Discrepancy>| {
        let Some(r) = run else { return };
        if r.count < cfg.min_violation_run {
            return;
        }
        // The run covers its samples up to the next sample after the last one.
        let t_end = samples
            .get(r.last_index + 1)
            .map(|s| s.t)
            .unwrap_or(samples[r.last_index].t + series.sample_period())
            .min(profile.t1())
            .max(samples[r.last_index].t);
        let t_end = if t_end > r.t_start {
            t_end
        } else {
            samples[r.last_index].t + series.sample_period()
        };
        discrepancies.push(Discrepancy {
            t_start: r.t_start,
            t_end,
            kind: r.kind,
            mean_modeled: r.sum_modeled / r.count as f64,
            mean_measured: r.sum_measured / r.count as f64,
            samples: r.count,
        });
    };

    for (i, s) in samples.iter().enumerate() {
        if guarded(s.t) {
            continue;
        }
        checked += 1;
        if s.modeled > 0.0 {
            max_rel_error = max_rel_error.max((s.measured - s.modeled).abs() / s.modeled);
        }
        if !cfg.violates(s.modeled, s.measured) {
            close(run.take(), &mut discrepancies);
            continue;
        }
        let kind = if s.measured > s.modeled {
            DiscrepancyKind::Excess
        } else {
            DiscrepancyKind::Deficit
        };
        match run.as_mut() {
            Some(r) if r.kind == kind => {
                r.last_index = i;
                r.count += 1;
                r.sum_modeled += s.modeled;
                r.sum_measured += s.measured;
            }
            _ => {
                close(run.take(), &mut discrepancies);
                run = Some(Run {
                    kind,
                    t_start: s.t,
                    last_index: i,
                    count: 1,
                    sum_modeled: s.modeled,
                    sum_measured: s.measured,
                });
            }
        }
    }
    close(run.take(), &mut discrepancies);

    let verdict = if discrepancies.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ValidationReport {
        discrepancies,
        samples_checked: checked,
        samples_excluded: series.len() - checked,
        max_rel_error,
        verdict,
        offset: alignment.offset,
        config: *cfg,
    })
}

/// Measured minus modeled power at every aligned sample inside the profile,
/// timestamped on the trace clock. Guard windows are not applied.
pub fn residuals(profile: &PowerProfile, series: &MeasurementSeries, alignment: &Alignment) -> Result<MeasurementSeries> {
    let samples = aligned_samples(profile, series, alignment)?
        .into_iter()
        .map(|s| Sample::new(s.t, s.measured - s.modeled))
        .collect();
    MeasurementSeries::new(samples, Unit::Watts, series.voltage(), series.nominal_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PowerModel;
    use crate::simulate::replay;
    use crate::trace::{Event, EventTrace};

    fn constant_profile(mw: f64, t_end: f64) -> PowerProfile {
        let m = PowerModel::parse(&format!("region r {{ state On initial power {mw} }}")).unwrap();
        replay(&m, &EventTrace::default(), t_end).unwrap()
    }

    fn grid(t_end: f64, f: impl Fn(f64) -> f64) -> MeasurementSeries {
        let n = (t_end * 33.0).floor() as usize;
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 / 33.0;
                Sample::new(t, f(t))
            })
            .collect();
        MeasurementSeries::new(samples, Unit::Watts, None, 33.0).unwrap()
    }

    #[test]
    fn three_percent_passes() {
        let p = constant_profile(1000.0, 5.0);
        let r = compare(&p, &grid(5.0, |_| 1.03), &Alignment::identity(), &ValidationConfig::default()).unwrap();
        assert!(r.passed(), "{r}");
        assert!((r.max_rel_error - 0.03).abs() < 1e-9);
    }

    #[test]
    fn excess_window_is_one_discrepancy() {
        let p = constant_profile(1000.0, 5.0);
        let s = grid(5.0, |t| if (2.0..=3.0).contains(&t) { 1.2 } else { 1.0 });
        let r = compare(&p, &s, &Alignment::identity(), &ValidationConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.discrepancies.len(), 1);
        let d = &r.discrepancies[0];
        assert_eq!(d.kind, DiscrepancyKind::Excess);
        // Samples k = 66..=99 lie in [2, 3]; the interval runs from the
        // first of them up to sample 100.
        assert_eq!(d.samples, 34);
        assert_eq!(d.t_start, 66.0 / 33.0);
        assert_eq!(d.t_end, 100.0 / 33.0);
        assert!(d.overlap(2.0, 3.0) >= 0.9);
        assert!((d.mean_measured - 1.2).abs() < 1e-12);
    }

    #[test]
    fn absolute_floor_covers_idle() {
        let p = constant_profile(0.0, 5.0);
        let r = compare(&p, &grid(5.0, |_| 0.004), &Alignment::identity(), &ValidationConfig::default()).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn short_runs_are_ignored() {
        let p = constant_profile(1000.0, 5.0);
        let s = grid(5.0, |t| if (2.0..2.05).contains(&t) { 1.5 } else { 1.0 });
        let r = compare(&p, &s, &Alignment::identity(), &ValidationConfig::default()).unwrap();
        assert!(r.passed());
        let strict = ValidationConfig {
            min_violation_run: 1,
            ..Default::default()
        };
        assert_eq!(compare(&p, &s, &Alignment::identity(), &strict).unwrap().discrepancies.len(), 1);
    }

    #[test]
    fn sign_change_splits_runs() {
        let p = constant_profile(1000.0, 5.0);
        let s = grid(5.0, |t| {
            if (1.0..2.0).contains(&t) {
                1.2
            } else if (2.0..3.0).contains(&t) {
                0.8
            } else {
                1.0
            }
        });
        let r = compare(&p, &s, &Alignment::identity(), &ValidationConfig::default()).unwrap();
        let kinds: Vec<_> = r.discrepancies.iter().map(|d| d.kind).collect();
        assert_eq!(kinds, [DiscrepancyKind::Excess, DiscrepancyKind::Deficit]);
        assert!(r.discrepancies[0].t_end <= r.discrepancies[1].t_start);
    }

    #[test]
    fn guard_excludes_event_neighbourhood() {
        let m = PowerModel::parse("event up\nregion r { state Lo initial power 100\n state Hi power 500\n on up: Lo -> Hi }")
            .unwrap();
        let tr = EventTrace::new(vec![Event::new(2.0, "up")], None).unwrap();
        let p = replay(&m, &tr, 5.0).unwrap();
        // The measurement lags the step by one sample period.
        let s = grid(5.0, |t| if t < 2.0 + 1.5 / 33.0 { 0.1 } else { 0.5 });
        let cfg = ValidationConfig {
            min_violation_run: 1,
            ..Default::default()
        };
        let r = compare(&p, &s, &Alignment::identity(), &cfg).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.samples_excluded >= 3);
        let no_guard = ValidationConfig { guard: Some(0.0), ..cfg };
        assert!(!compare(&p, &s, &Alignment::identity(), &no_guard).unwrap().passed());
    }

    #[test]
    fn guarded_samples_do_not_split_a_run() {
        let m = PowerModel::parse("event up\nregion r { state Lo initial power 100\n state Hi power 500\n on up: Lo -> Hi }")
            .unwrap();
        let tr = EventTrace::new(vec![Event::new(2.0, "up")], None).unwrap();
        let p = replay(&m, &tr, 5.0).unwrap();
        let s = grid(5.0, |t| if (1.5..2.5).contains(&t) { 1.3 * p.power_at(t).unwrap() } else { p.power_at(t).unwrap() });
        let r = compare(&p, &s, &Alignment::identity(), &ValidationConfig::default()).unwrap();
        assert_eq!(r.discrepancies.len(), 1, "{r}");
    }

    #[test]
    fn no_overlap_is_an_error() {
        let p = constant_profile(100.0, 1.0);
        let s = grid(1.0, |_| 0.1);
        assert_eq!(
            compare(&p, &s, &Alignment::new(100.0), &ValidationConfig::default()).unwrap_err(),
            Error::NoOverlap
        );
    }

    #[test]
    fn config_checks() {
        let bad = ValidationConfig {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        let bad = ValidationConfig {
            min_violation_run: 0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        assert!(ValidationConfig {
            guard: Some(-1.0),
            ..Default::default()
        }
        .check()
        .is_err());
    }

    #[test]
    fn residual_series() {
        let p = constant_profile(1000.0, 2.0);
        let same = residuals(&p, &grid(2.0, |_| 1.0), &Alignment::identity()).unwrap();
        assert!(same.samples().iter().all(|s| s.value == 0.0));
        let shifted = residuals(&p, &grid(2.0, |_| 1.1), &Alignment::identity()).unwrap();
        assert!(shifted.samples().iter().all(|s| (s.value - 0.1).abs() < 1e-12));
        assert_eq!(shifted.len(), 67);
    }
}
