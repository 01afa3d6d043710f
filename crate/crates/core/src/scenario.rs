//! Timed test-case specifications.
//!
//! A scenario is a list of interval constraints between pairs of events, each
//! bounded below by a delay and above by a deadline, optionally naming the
//! state expected to be active over the interval. The expected scenario
//! energy is the sum, over constraints with a state, of that state's own
//! power integrated across its matched interval.
//!
//! File format, one item per line (`#` comments allowed):
//!
//! ```text
//! constraint <name>: <start_event> -> <end_event> delay <s> deadline <s> [state <Qualified.Name>]
//! order <event>, <event>, ...
//! ```

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexer::{is_ident, Cursor, Tok};
use crate::measurement::{Alignment, MeasurementSeries};
use crate::model::PowerModel;
use crate::simulate::{measured_energy, replay};
use crate::trace::EventTrace;

/// Guards the relative energy error when the expected energy is zero.
pub const ENERGY_EPSILON_J: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalConstraint {
    pub name: String,
    pub start_event: String,
    pub end_event: String,
    pub delay: f64,
    pub deadline: f64,
    pub state: Option<String>,
}

impl IntervalConstraint {
    pub fn new(name: &str, start_event: &str, end_event: &str, delay: f64, deadline: f64) -> Self {
        Self {
            name: name.into(),
            start_event: start_event.into(),
            end_event: end_event.into(),
            delay,
            deadline,
            state: None,
        }
    }

    pub fn with_state(mut self, state: &str) -> Self {
        self.state = Some(state.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ScenarioSpec {
    pub constraints: Vec<IntervalConstraint>,
    pub expected_order: Option<Vec<String>>,
}

impl ScenarioSpec {
    pub fn new(constraints: Vec<IntervalConstraint>, expected_order: Option<Vec<String>>) -> Result<Self> {
        let spec = Self {
            constraints,
            expected_order,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let mut names = HashSet::new();
        for c in &self.constraints {
            if !is_ident(&c.name) || !is_ident(&c.start_event) || !is_ident(&c.end_event) {
                return Err(Error::InvalidScenario(format!("invalid identifier in constraint `{}`", c.name)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidScenario(format!("duplicate constraint `{}`", c.name)));
            }
            if !(c.delay >= 0.0 && c.delay <= c.deadline) || !c.deadline.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "constraint `{}` needs 0 <= delay <= deadline, got delay {} deadline {}",
                    c.name, c.delay, c.deadline
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cur = Cursor::new(text)?;
        let mut constraints = Vec::new();
        let mut order = None;
        while !cur.at_end() {
            let (line, column) = cur.position();
            if cur.eat_keyword("constraint") {
                let name = cur.ident("constraint name")?;
                cur.expect(Tok::Colon)?;
                let start = cur.ident("start event")?;
                cur.expect(Tok::Arrow)?;
                let end = cur.ident("end event")?;
                if !cur.eat_keyword("delay") {
                    return Err(cur.error_here("expected `delay`"));
                }
                let delay = cur.number("delay in seconds")?;
                if !cur.eat_keyword("deadline") {
                    return Err(cur.error_here("expected `deadline`"));
                }
                let deadline = cur.number("deadline in seconds")?;
                let mut c = IntervalConstraint::new(&name, &start, &end, delay, deadline);
                if cur.eat_keyword("state") {
                    c.state = Some(cur.qualified_ident("qualified state name")?);
                }
                constraints.push(c);
            } else if cur.eat_keyword("order") {
                if order.is_some() {
                    return Err(Error::Parse {
                        line,
                        column,
                        message: "`order` given twice".into(),
                    });
                }
                let mut events = vec![cur.ident("event name")?];
                while cur.eat(&Tok::Comma) {
                    events.push(cur.ident("event name")?);
                }
                order = Some(events);
            } else {
                return Err(cur.error_here("expected `constraint` or `order`"));
            }
        }
        Self::new(constraints, order)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Checks that every event and state the scenario references exists in
    /// `model`. The trace's sync event is exempt from the event check.
    pub fn check_against(&self, model: &PowerModel, sync_name: Option<&str>) -> Result<()> {
        let known = |e: &str| model.declares_event(e) || Some(e) == sync_name;
        for c in &self.constraints {
            for e in [&c.start_event, &c.end_event] {
                if !known(e) {
                    return Err(Error::InvalidScenario(format!(
                        "constraint `{}` references undeclared event `{e}`",
                        c.name
                    )));
                }
            }
            if let Some(s) = &c.state {
                if model.state_power(s).is_none() {
                    return Err(Error::InvalidScenario(format!(
                        "constraint `{}` references unknown state `{s}`",
                        c.name
                    )));
                }
            }
        }
        for e in self.expected_order.iter().flatten() {
            if !known(e) {
                return Err(Error::InvalidScenario(format!("order references undeclared event `{e}`")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            write!(
                f,
                "constraint {}: {} -> {} delay {} deadline {}",
                c.name, c.start_event, c.end_event, c.delay, c.deadline
            )?;
            if let Some(s) = &c.state {
                write!(f, " state {s}")?;
            }
            writeln!(f)?;
        }
        if let Some(order) = &self.expected_order {
            writeln!(f, "order {}", order.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingStatus {
    Pass,
    DelayViolation,
    DeadlineViolation,
    Unmatched,
}

impl fmt::Display for TimingStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimingStatus::Pass => "pass",
            TimingStatus::DelayViolation => "delay_violation",
            TimingStatus::DeadlineViolation => "deadline_violation",
            TimingStatus::Unmatched => "unmatched",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintResult {
    pub name: String,
    /// Matched `[t_start, t_end]` on the trace clock.
    pub interval: Option<(f64, f64)>,
    pub status: TimingStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingResult {
    pub constraints: Vec<ConstraintResult>,
    /// Whether the first occurrences of the ordered events appear in the
    /// expected order; `None` without an `order` line.
    pub order_ok: Option<bool>,
}

impl TimingResult {
    pub fn all_pass(&self) -> bool {
        self.constraints.iter().all(|c| c.status == TimingStatus::Pass) && self.order_ok != Some(false)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintResult> {
        self.constraints.iter().find(|c| c.name == name)
    }
}

/// Matches each constraint to the first `start_event` and the first
/// `end_event` after it, and classifies the separation.
pub fn check_timing(spec: &ScenarioSpec, trace: &EventTrace) -> TimingResult {
    let events = trace.events();
    let constraints = spec
        .constraints
        .iter()
        .map(|c| {
            let matched = events.iter().position(|e| e.name == c.start_event).and_then(|i| {
                events[i + 1..]
                    .iter()
                    .find(|e| e.name == c.end_event)
                    .map(|end| (events[i].t, end.t))
            });
            let status = match matched {
                None => TimingStatus::Unmatched,
                Some((s, e)) if e - s < c.delay => TimingStatus::DelayViolation,
                Some((s, e)) if e - s > c.deadline => TimingStatus::DeadlineViolation,
                Some(_) => TimingStatus::Pass,
            };
            ConstraintResult {
                name: c.name.clone(),
                interval: matched,
                status,
            }
        })
        .collect();

    let order_ok = spec.expected_order.as_ref().map(|order| {
        let firsts: Option<Vec<usize>> = order
            .iter()
            .map(|name| events.iter().position(|e| &e.name == name))
            .collect();
        firsts.is_some_and(|idx| idx.windows(2).all(|w| w[0] < w[1]))
    });

    TimingResult {
        constraints,
        order_ok,
    }
}

/// Expected scenario energy in joules: the replayed trace's per-state energy
/// summed over every constraint that names a state.
pub fn scenario_energy(spec: &ScenarioSpec, model: &PowerModel, trace: &EventTrace) -> Result<f64> {
    let timing = check_timing(spec, trace);
    let Some(t_end) = trace.last_time().filter(|&t| t > 0.0) else {
        return Err(Error::InvalidScenario("trace has no events after t = 0".into()));
    };
    let profile = replay(model, trace, t_end)?;
    let mut total = 0.0;
    for (c, r) in spec.constraints.iter().zip(&timing.constraints) {
        let Some(state) = &c.state else { continue };
        let Some((a, b)) = r.interval else {
            return Err(Error::InvalidScenario(format!("constraint `{}` is unmatched", c.name)));
        };
        if b <= a {
            continue;
        }
        match profile.state_energy(model, state, a, b)? {
            Some(e) => total += e,
            None => {
                return Err(Error::InvalidScenario(format!(
                    "state `{state}` is never active during constraint `{}` [{a}, {b}]",
                    c.name
                )))
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyComparison {
    pub expected: f64,
    pub measured: f64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Compares expected scenario energy with the trapezoidal measured energy
/// over `window` on the trace clock.
pub fn compare_scenario_energy(
    expected: f64,
    series: &MeasurementSeries,
    alignment: &Alignment,
    window: (f64, f64),
    rel_tol: f64,
) -> Result<EnergyComparison> {
    let measured = measured_energy(series, alignment, window.0, window.1)?;
    Ok(energy_verdict(expected, measured, rel_tol))
}

pub fn energy_verdict(expected: f64, measured: f64, rel_tol: f64) -> EnergyComparison {
    let rel_error = (measured - expected).abs() / expected.max(ENERGY_EPSILON_J);
    EnergyComparison {
        expected,
        measured,
        rel_error,
        pass: rel_error <= rel_tol,
    }
}

/// Span covered by all matched constraints, if any matched.
pub fn matched_window(timing: &TimingResult) -> Option<(f64, f64)> {
    timing
        .constraints
        .iter()
        .filter_map(|c| c.interval)
        .fold(None, |acc: Option<(f64, f64)>, (s, e)| match acc {
            None => Some((s, e)),
            Some((a, b)) => Some((a.min(s), b.max(e))),
        })
}
