//! Trace replay and energy integration.
//!
//! Replaying a trace through a [`PowerModel`] yields a [`PowerProfile`]: a
//! piecewise-constant power curve whose segments are the maximal intervals of
//! unchanged configuration. Transitions are instantaneous, so simultaneous
//! events collapse into a single boundary.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{Alignment, MeasurementSeries, Unit};
use crate::model::{Configuration, Params, PowerModel};
use crate::trace::{Event, EventTrace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub power: f64,
    pub states: BTreeSet<String>,
    pub params: Params,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn overlap(&self, a: f64, b: f64) -> f64 {
        (self.t_end.min(b) - self.t_start.max(a)).max(0.0)
    }
}

/// Where the profile starts on the trace clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileStart {
    #[default]
    Zero,
    FirstEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerProfile {
    segments: Vec<Segment>,
    t0: f64,
    t1: f64,
    /// Every replayed trace event, including the sync marker.
    events: Vec<Event>,
}

impl PowerProfile {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1
    }

    /// Segment holding time `t`; at a boundary the later segment wins, and
    /// `t1` belongs to the last segment.
    pub fn segment_at(&self, t: f64) -> Result<&Segment> {
        if !self.contains(t) {
            return Err(Error::OutOfRange(format!(
                "time {t} (profile spans [{}, {}])",
                self.t0, self.t1
            )));
        }
        let i = self.segments.partition_point(|s| s.t_start <= t);
        Ok(&self.segments[i.saturating_sub(1)])
    }

    pub fn power_at(&self, t: f64) -> Result<f64> {
        self.segment_at(t).map(|s| s.power)
    }

    pub fn sample(&self, times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.power_at(t)).collect()
    }

    /// Energy in joules over `[a, b]`.
    pub fn energy(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("energy window [{a}, {b}] is empty")));
        }
        if a < self.t0 || b > self.t1 {
            return Err(Error::OutOfRange(format!(
                "energy window [{a}, {b}] (profile spans [{}, {}])",
                self.t0, self.t1
            )));
        }
        Ok(self
            .segments
            .iter()
            .filter(|s| s.t_end > a && s.t_start < b)
            .map(|s| s.power * s.overlap(a, b))
            .sum())
    }

    pub fn total_energy(&self) -> f64 {
        self.segments.iter().map(|s| s.power * s.duration()).sum()
    }

    /// Energy attributed to one state's own power function over `[a, b]`,
    /// using each segment's parameter values. Returns `None` if the state is
    /// never active inside the window.
    pub fn state_energy(&self, model: &PowerModel, state: &str, a: f64, b: f64) -> Result<Option<f64>> {
        let f = model
            .state_power(state)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown state `{state}`")))?;
        let mut seen = false;
        let mut total = 0.0;
        for s in &self.segments {
            let overlap = s.overlap(a, b);
            if overlap > 0.0 && s.states.contains(state) {
                seen = true;
                total += f.evaluate(&s.params) * overlap;
            }
        }
        Ok(seen.then_some(total))
    }

    /// CSV export: `t_start,t_end,power_w,states` with states `;`-joined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_start,t_end,power_w,states\n");
        for s in &self.segments {
            let states: Vec<_> = s.states.iter().map(String::as_str).collect();
            let _ = writeln!(out, "{},{},{},{}", s.t_start, s.t_end, s.power, states.join(";"));
        }
        out
    }
}

/// Replays `trace` from `t = 0` up to `t_end`.
pub fn replay(model: &PowerModel, trace: &EventTrace, t_end: f64) -> Result<PowerProfile> {
    replay_from(model, trace, t_end, ProfileStart::Zero)
}

/// Replays `trace` through `model`.
///
/// The trace's sync event is a measurement marker: unless the model declares
/// it, it is recorded in the profile's event list but not applied.
pub fn replay_from(model: &PowerModel, trace: &EventTrace, t_end: f64, start: ProfileStart) -> Result<PowerProfile> {
    let t0 = match start {
        ProfileStart::Zero => 0.0,
        ProfileStart::FirstEvent => trace.events().first().map_or(0.0, |e| e.t),
    };
    if let Some(last) = trace.last_time() {
        if t_end < last {
            return Err(Error::OutOfRange(format!(
                "profile end {t_end} precedes last event at {last}"
            )));
        }
    }
    if !(t_end > t0) {
        return Err(Error::OutOfRange(format!("profile end {t_end} must follow start {t0}")));
    }

    let mut segments: Vec<Segment> = Vec::new();
    let mut config = model.initial_configuration();
    let mut seg_start = t0;
    for e in trace.events() {
        let is_marker = trace.sync_name() == Some(e.name.as_str()) && !model.declares_event(&e.name);
        if is_marker {
            continue;
        }
        let next = model.apply_event(&config, e)?;
        if next == config {
            continue;
        }
        if e.t > seg_start {
            push_segment(&mut segments, model, &config, seg_start, e.t);
            seg_start = e.t;
        }
        config = next;
    }
    push_segment(&mut segments, model, &config, seg_start, t_end);

    Ok(PowerProfile {
        segments,
        t0,
        t1: t_end,
        events: trace.events().to_vec(),
    })
}

fn push_segment(segments: &mut Vec<Segment>, model: &PowerModel, config: &Configuration, t_start: f64, t_end: f64) {
    if !(t_end > t_start) {
        return;
    }
    if let Some(last) = segments.last_mut() {
        if last.states == config.active && last.params == config.params && last.t_end == t_start {
            last.t_end = t_end;
            return;
        }
    }
    segments.push(Segment {
        t_start,
        t_end,
        power: model.power_at(config),
        states: config.active.clone(),
        params: config.params.clone(),
    });
}

/// Trapezoidal energy in joules of the measured samples whose aligned
/// timestamps fall in `[a, b]`.
pub fn measured_energy(series: &MeasurementSeries, alignment: &Alignment, a: f64, b: f64) -> Result<f64> {
    if series.unit() != Unit::Watts {
        return Err(Error::InvalidArgument("measured energy needs a power series".into()));
    }
    let points: Vec<(f64, f64)> = series
        .samples()
        .iter()
        .map(|s| (alignment.to_trace_time(s.t), s.value))
        .filter(|&(t, _)| t >= a && t <= b)
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientSamples {
            a,
            b,
            found: points.len(),
        });
    }
    Ok(points
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::Sample;
    use crate::fixtures::AUDIO_MODEL as AUDIO;
    use approx::assert_relative_eq;

    fn trace(events: &[(f64, &str)]) -> EventTrace {
        EventTrace::new(
            events.iter().map(|&(t, n)| Event::new(t, n)).collect(),
            Some("sync".into()),
        )
        .unwrap()
    }

    #[test]
    fn audio_replay_segments() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let tr = trace(&[(0.0, "standby_on"), (2.0, "mic_on"), (5.0, "mic_off")]);
        let p = replay(&m, &tr, 6.0).unwrap();
        let spans: Vec<_> = p.segments().iter().map(|s| (s.t_start, s.t_end)).collect();
        assert_eq!(spans, [(0.0, 2.0), (2.0, 5.0), (5.0, 6.0)]);
        assert_relative_eq!(p.segments()[0].power, 0.010);
        assert_relative_eq!(p.segments()[1].power, 0.015);
        assert_relative_eq!(p.segments()[2].power, 0.010);
        assert!(p.segments()[1].states.contains("AudioStandby.mic.MicActive"));
    }

    #[test]
    fn empty_trace_single_segment() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let p = replay(&m, &trace(&[]), 10.0).unwrap();
        assert_eq!(p.segments().len(), 1);
        assert_eq!((p.t0(), p.t1()), (0.0, 10.0));
        assert_eq!(p.segments()[0].power, 0.0);
    }

    #[test]
    fn simultaneous_events_collapse() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let p = replay(&m, &trace(&[(1.0, "standby_on"), (1.0, "mic_on")]), 3.0).unwrap();
        assert_eq!(p.segments().len(), 2);
        assert_eq!(p.segments()[1].t_start, 1.0);
        assert_relative_eq!(p.segments()[1].power, 0.015);
    }

    #[test]
    fn round_trip_in_one_instant_is_merged() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let p = replay(&m, &trace(&[(1.0, "standby_on"), (1.0, "standby_off")]), 3.0).unwrap();
        assert_eq!(p.segments().len(), 1);
    }

    #[test]
    fn replay_errors() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let err = replay(&m, &trace(&[(1.0, "bogus")]), 3.0).unwrap_err();
        assert_eq!(err.to_string(), "undeclared event `bogus` at t=1");
        assert!(replay(&m, &trace(&[(4.0, "standby_on")]), 3.0).is_err());
    }

    #[test]
    fn sync_marker_is_not_applied() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let p = replay(&m, &trace(&[(0.5, "sync"), (1.0, "standby_on")]), 2.0).unwrap();
        assert_eq!(p.segments().len(), 2);
        assert_eq!(p.events().len(), 2);
    }

    #[test]
    fn first_event_start() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let p = replay_from(&m, &trace(&[(2.0, "standby_on")]), 4.0, ProfileStart::FirstEvent).unwrap();
        assert_eq!(p.t0(), 2.0);
        assert_eq!(p.segments().len(), 1);
    }

    #[test]
    fn energy_of_constant() {
        let m = PowerModel::parse("region r { state On initial power 100 }").unwrap();
        let p = replay(&m, &trace(&[]), 2.0).unwrap();
        assert_relative_eq!(p.energy(0.0, 2.0).unwrap(), 0.2, max_relative = 1e-15);
        assert!(p.energy(1.0, 1.0).is_err());
        assert!(p.energy(-1.0, 1.0).is_err());
        assert!(p.energy(0.0, 2.5).is_err());
    }

    #[test]
    fn sampling_is_right_continuous() {
        let m = PowerModel::parse("event up\nregion r { state Lo initial power 100\n state Hi power 300\n on up: Lo -> Hi }")
            .unwrap();
        let p = replay(&m, &trace(&[(1.0, "up")]), 2.0).unwrap();
        assert_relative_eq!(p.power_at(1.0).unwrap(), 0.3);
        assert_relative_eq!(p.power_at(0.5).unwrap(), 0.1);
        assert_relative_eq!(p.power_at(2.0).unwrap(), 0.3);
        assert_relative_eq!(p.power_at(0.0).unwrap(), 0.1);
        assert!(p.power_at(2.0001).is_err());
        assert_eq!(p.sample(&[0.0, 1.0]).unwrap().len(), 2);
    }

    #[test]
    fn profile_csv() {
        let m = PowerModel::parse(AUDIO).unwrap();
        let p = replay(&m, &trace(&[(1.0, "standby_on")]), 2.0).unwrap();
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t_start,t_end,power_w,states"));
        assert_eq!(lines.next(), Some("0,1,0,AudioIdle"));
        assert_eq!(
            lines.next(),
            Some("1,2,0.01,AudioStandby;AudioStandby.ear.EarIdle;AudioStandby.mic.MicIdle")
        );
    }

    fn watts(samples: Vec<Sample>) -> MeasurementSeries {
        MeasurementSeries::new(samples, Unit::Watts, None, 33.0).unwrap()
    }

    #[test]
    fn trapezoid_energy() {
        let two = watts(vec![Sample::new(0.0, 0.0), Sample::new(1.0, 2.0)]);
        assert_eq!(measured_energy(&two, &Alignment::identity(), 0.0, 1.0).unwrap(), 1.0);

        // Constant 1 W at 33 Hz over [0, 1]: closed form 1 J.
        let flat = watts((0..=33).map(|k| Sample::new(k as f64 / 33.0, 1.0)).collect());
        let e = measured_energy(&flat, &Alignment::identity(), 0.0, 1.0).unwrap();
        assert!((e - 1.0).abs() <= 2.0 / 33.0);

        // Ramp f(t) = t: analytic integral 1/2.
        let ramp = watts((0..=33).map(|k| Sample::new(k as f64 / 33.0, k as f64 / 33.0)).collect());
        let e = measured_energy(&ramp, &Alignment::identity(), 0.0, 1.0).unwrap();
        assert!((e - 0.5).abs() <= 1e-3);

        assert!(matches!(
            measured_energy(&two, &Alignment::identity(), 0.2, 0.8),
            Err(Error::InsufficientSamples { found: 0, .. })
        ));
        // Alignment moves the window on the measurement clock.
        let shifted = two.shifted(3.0);
        assert_eq!(measured_energy(&shifted, &Alignment::new(3.0), 0.0, 1.0).unwrap(), 1.0);
    }
}
