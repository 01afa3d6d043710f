//! Measured current/power series: CSV ingestion, per-trigger averaging,
//! current-to-power conversion and clock alignment against a trace.
//!
//! Measurement CSV: optional `#` preamble lines carrying `voltage=<V>` and
//! `rate=<Hz>`, then a header of `t,current_a` or `t,power_w`.

use std::fmt::Write as _;

use csv::{ReaderBuilder, Trim};
use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trace::EventTrace;

/// Readings averaged per trigger by the acquisition software.
pub const DEFAULT_READINGS_PER_TRIGGER: usize = 5;
/// Nominal sample rate of the averaged series.
pub const DEFAULT_RATE_HZ: f64 = 33.0;
/// Multiple of the interquartile range above the median that a sample must
/// reach to count as the sync spike.
pub const SPIKE_IQR_FACTOR: f64 = 5.0;
/// Lower bound on the spread used for the default spike threshold, so that
/// flat series do not trigger on their own baseline.
pub const SPIKE_MIN_SPREAD_W: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Amperes,
    Watts,
}

impl Unit {
    pub fn column(self) -> &'static str {
        match self {
            Unit::Amperes => "current_a",
            Unit::Watts => "power_w",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
}

impl Sample {
    pub fn new(t: f64, value: f64) -> Self {
        Self { t, value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    samples: Vec<Sample>,
    unit: Unit,
    voltage: Option<f64>,
    nominal_rate: f64,
}

impl MeasurementSeries {
    pub fn new(samples: Vec<Sample>, unit: Unit, voltage: Option<f64>, nominal_rate: f64) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || !s.value.is_finite() {
                return Err(Error::InvalidMeasurement {
                    line: i + 1,
                    message: "non-finite sample".into(),
                });
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::InvalidMeasurement {
                    line: i + 1,
                    message: format!("timestamp {} does not increase", s.t),
                });
            }
        }
        if let Some(v) = voltage {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("voltage must be positive, got {v}")));
            }
        } else if unit == Unit::Amperes {
            return Err(Error::InvalidArgument("current series requires a battery voltage".into()));
        }
        if !(nominal_rate > 0.0 && nominal_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("rate must be positive, got {nominal_rate}")));
        }
        Ok(Self {
            samples,
            unit,
            voltage,
            nominal_rate,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn voltage(&self) -> Option<f64> {
        self.voltage
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.nominal_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Reduces consecutive blocks of `n` readings to their mean value and mean
    /// timestamp. A trailing partial block is dropped.
    pub fn average_per_trigger(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("readings per trigger must be at least 1".into()));
        }
        if self.samples.len() < n {
            return Err(Error::InvalidArgument(format!(
                "series has {} samples, fewer than {n} readings per trigger",
                self.samples.len()
            )));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let tail = self.samples.len() % n;
        if tail != 0 {
            warn!("dropping {tail} trailing readings that do not fill a trigger block of {n}");
        }
        let k = n as f64;
        let samples = self
            .samples
            .chunks_exact(n)
            .map(|block| {
                let (st, sv) = block.iter().fold((0.0, 0.0), |(st, sv), s| (st + s.t, sv + s.value));
                Sample::new(st / k, sv / k)
            })
            .collect();
        Self::new(samples, self.unit, self.voltage, self.nominal_rate / k)
    }

    /// Converts a current series to power with `P = V·I`.
    pub fn to_power(&self) -> Result<Self> {
        if self.unit == Unit::Watts {
            return Err(Error::InvalidArgument("series is already in watts".into()));
        }
        let v = self.voltage.expect("current series always carries a voltage");
        let samples = self.samples.iter().map(|s| Sample::new(s.t, s.value * v)).collect();
        Ok(Self {
            samples,
            unit: Unit::Watts,
            voltage: self.voltage,
            nominal_rate: self.nominal_rate,
        })
    }

    /// Returns the series in watts, converting from current if necessary.
    pub fn into_power(self) -> Result<Self> {
        match self.unit {
            Unit::Watts => Ok(self),
            Unit::Amperes => self.to_power(),
        }
    }

    /// Median plus five interquartile ranges of the sample values.
    pub fn default_spike_threshold(&self) -> f64 {
        let mut values: Vec<f64> = self.samples.iter().map(|s| s.value).collect();
        values.sort_by(f64::total_cmp);
        let median = quantile(&values, 0.5);
        let iqr = quantile(&values, 0.75) - quantile(&values, 0.25);
        median + SPIKE_IQR_FACTOR * iqr.max(SPIKE_MIN_SPREAD_W)
    }

    /// Timestamp of the first sample at or above `threshold`.
    pub fn detect_spike(&self, threshold: f64) -> Result<f64> {
        if self.unit != Unit::Watts {
            return Err(Error::InvalidArgument("spike detection needs a power series".into()));
        }
        self.samples
            .iter()
            .find(|s| s.value >= threshold)
            .map(|s| s.t)
            .ok_or(Error::SpikeNotFound { threshold })
    }

    /// Returns a copy with every timestamp shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| Sample::new(s.t + dt, s.value)).collect(),
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(v) = self.voltage {
            let _ = writeln!(out, "# voltage={v}");
        }
        let _ = writeln!(out, "# rate={}", self.nominal_rate);
        let _ = writeln!(out, "t,{}", self.unit.column());
        for s in &self.samples {
            let _ = writeln!(out, "{},{}", s.t, s.value);
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Parses a measurement CSV. An explicit `voltage` overrides the preamble.
pub fn load_measurements(text: &str, voltage: Option<f64>) -> Result<MeasurementSeries> {
    let mut pre_voltage = None;
    let mut rate = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(meta) = line.strip_prefix('#') else {
            break;
        };
        let parse = |v: &str| {
            v.trim().parse::<f64>().map_err(|_| Error::InvalidMeasurement {
                line: i + 1,
                message: format!("malformed metadata `{line}`"),
            })
        };
        let meta = meta.trim();
        if let Some(v) = meta.strip_prefix("voltage=") {
            pre_voltage = Some(parse(v)?);
        } else if let Some(r) = meta.strip_prefix("rate=") {
            rate = Some(parse(r)?);
        }
    }

    let mut reader = ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidMeasurement {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let header_line = headers.position().map_or(1, |p| p.line() as usize);
    let unit = match headers.iter().collect::<Vec<_>>()[..] {
        ["t", "current_a"] => Unit::Amperes,
        ["t", "power_w"] => Unit::Watts,
        _ => {
            return Err(Error::InvalidMeasurement {
                line: header_line,
                message: format!(
                    "expected header `t,current_a` or `t,power_w`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            })
        }
    };

    let mut samples: Vec<Sample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidMeasurement {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            let v: f64 = record[i].parse().map_err(|_| Error::InvalidMeasurement {
                line,
                message: format!("malformed number `{}`", &record[i]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidMeasurement {
                    line,
                    message: "non-finite value".into(),
                })
            }
        };
        let (t, value) = (field(0)?, field(1)?);
        if let Some(prev) = samples.last() {
            if t <= prev.t {
                return Err(Error::InvalidMeasurement {
                    line,
                    message: format!("timestamp {t} does not increase (previous {})", prev.t),
                });
            }
        }
        samples.push(Sample::new(t, value));
    }
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }

    let voltage = voltage.or(pre_voltage);
    if unit == Unit::Amperes && voltage.is_none() {
        return Err(Error::InvalidMeasurement {
            line: header_line,
            message: "current series needs a voltage (preamble `# voltage=` or explicit)".into(),
        });
    }
    let rate = rate.unwrap_or_else(|| estimate_rate(&samples));
    MeasurementSeries::new(samples, unit, voltage, rate)
}

fn estimate_rate(samples: &[Sample]) -> f64 {
    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    if dts.is_empty() {
        return DEFAULT_RATE_HZ;
    }
    dts.sort_by(f64::total_cmp);
    1.0 / quantile(&dts, 0.5)
}

/// Clock offset between measurement and trace: `trace = measurement − offset`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Alignment {
    pub offset: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Self { offset: 0.0 }
    }

    pub fn new(offset: f64) -> Self {
        Self { offset }
    }

    pub fn to_trace_time(&self, measurement_t: f64) -> f64 {
        measurement_t - self.offset
    }

    pub fn to_measurement_time(&self, trace_t: f64) -> f64 {
        trace_t + self.offset
    }
}

/// Aligns `series` to `trace` by matching the first power spike to the
/// trace's sync event. `threshold` defaults to
/// [`MeasurementSeries::default_spike_threshold`].
pub fn align(series: &MeasurementSeries, trace: &EventTrace, threshold: Option<f64>) -> Result<Alignment> {
    let t_sync = trace.find_sync()?;
    let threshold = threshold.unwrap_or_else(|| series.default_spike_threshold());
    let t_spike = series.detect_spike(threshold)?;
    Ok(Alignment::new(t_spike - t_sync))
}
