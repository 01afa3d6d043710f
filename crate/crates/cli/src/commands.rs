use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use powerval::plot::{render_svg, PlotOptions};
use powerval::scenario::{compare_scenario_energy, matched_window, EnergyComparison, TimingResult};
use powerval::synth::{Anomaly, Excess, Spike};
use powerval::{
    align, check_timing, compare, generate, load_measurements, replay, scenario_energy, Alignment, EventTrace,
    MeasurementSeries, PowerModel, PowerProfile, ScenarioSpec, SynthConfig, ValidationReport,
};
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    /// Human-readable summary for the terminal.
    pub summary: String,
    pub written: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input<T>(path: &Path, r: powerval::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn load_model(m: &RunManifest) -> Result<PowerModel, CliError> {
    let path = m.require(&m.model, "model")?;
    input(path, PowerModel::parse(&read(path)?))
}

fn load_trace_file(m: &RunManifest, model: &PowerModel) -> Result<EventTrace, CliError> {
    let path = m.require(&m.trace, "trace")?;
    let trace = input(path, EventTrace::parse(&read(path)?))?;
    // Surface undeclared events up front, with the trace path attached.
    for e in trace.events() {
        if !model.declares_event(&e.name) && trace.sync_name() != Some(e.name.as_str()) {
            return Err(CliError::Input {
                path: path.to_path_buf(),
                source: powerval::Error::UndeclaredEvent {
                    name: e.name.clone(),
                    t: Some(e.t),
                },
            });
        }
    }
    Ok(trace)
}

/// Loads the measurement file as a power series, averaging per trigger first.
fn load_series(m: &RunManifest, path: &Path) -> Result<MeasurementSeries, CliError> {
    let mut series = input(path, load_measurements(&read(path)?, m.voltage))?;
    let n = m.readings_per_trigger.unwrap_or(1);
    if n > 1 {
        series = input(path, series.average_per_trigger(n))?;
    }
    input(path, series.into_power())
}

fn replay_end(m: &RunManifest, trace: &EventTrace, measured: Option<(&MeasurementSeries, &Alignment)>) -> Result<f64, CliError> {
    if let Some(u) = m.until {
        return Ok(u);
    }
    let last = trace.last_time().unwrap_or(0.0);
    let measured_end = measured
        .and_then(|(s, a)| s.samples().last().map(|x| a.to_trace_time(x.t)))
        .unwrap_or(0.0);
    let end = last.max(measured_end);
    if end <= 0.0 {
        return Err(CliError::usage("nothing to replay: the trace is empty, pass --until"));
    }
    Ok(end)
}

fn aligned(m: &RunManifest, series: &MeasurementSeries, trace: &EventTrace) -> Result<Alignment, CliError> {
    let path = m.measure.as_deref().unwrap_or(Path::new("measurement"));
    input(path, align(series, trace, m.spike_threshold))
}

pub fn cmd_replay(m: &RunManifest) -> Result<Outcome, CliError> {
    let model = load_model(m)?;
    let trace = load_trace_file(m, &model)?;
    let end = replay_end(m, &trace, None)?;
    let profile = replay(&model, &trace, end)?;
    let path = write_out(&m.out_dir(), "profile.csv", &profile.to_csv())?;
    Ok(Outcome {
        status: Status::Pass,
        summary: format!(
            "{} segments over [{}, {}] s, {:.6} J",
            profile.segments().len(),
            profile.t0(),
            profile.t1(),
            profile.total_energy()
        ),
        written: vec![path],
    })
}

#[derive(Debug, Serialize)]
pub struct ValidateOutput {
    pub model: PathBuf,
    pub trace: PathBuf,
    pub measure: PathBuf,
    pub until: f64,
    pub report: ValidationReport,
}

/// Loads, aligns, replays and compares; the shared core of validate and plot.
fn pipeline(m: &RunManifest) -> Result<(PowerProfile, MeasurementSeries, Alignment, ValidateOutput), CliError> {
    let model = load_model(m)?;
    let trace = load_trace_file(m, &model)?;
    let measure = m.require(&m.measure, "measure")?;
    let series = load_series(m, measure)?;
    let alignment = aligned(m, &series, &trace)?;
    let until = replay_end(m, &trace, Some((&series, &alignment)))?;
    let profile = replay(&model, &trace, until)?;
    let cfg = m.validation.resolve();
    let report = input(measure, compare(&profile, &series, &alignment, &cfg))?;
    let out = ValidateOutput {
        model: m.model.clone().unwrap_or_default(),
        trace: m.trace.clone().unwrap_or_default(),
        measure: measure.to_path_buf(),
        until,
        report,
    };
    Ok((profile, series, alignment, out))
}

pub fn cmd_validate(m: &RunManifest) -> Result<Outcome, CliError> {
    let (.., out) = pipeline(m)?;
    let path = write_out(&m.out_dir(), "report.json", &to_json(&out))?;
    Ok(Outcome {
        status: if out.report.passed() { Status::Pass } else { Status::Fail },
        summary: out.report.to_string().trim_end().to_string(),
        written: vec![path],
    })
}

#[derive(Debug, Serialize)]
pub struct ScenarioOutput {
    pub timing: TimingResult,
    pub expected_energy: Option<f64>,
    pub energy: Option<EnergyComparison>,
    pub pass: bool,
}

pub fn cmd_scenario(m: &RunManifest) -> Result<Outcome, CliError> {
    let model = load_model(m)?;
    let trace = load_trace_file(m, &model)?;
    let spec_path = m.require(&m.scenario, "scenario")?;
    let spec = input(spec_path, ScenarioSpec::parse(&read(spec_path)?))?;
    input(spec_path, spec.check_against(&model, trace.sync_name()))?;

    let timing = check_timing(&spec, &trace);
    let mut lines: Vec<String> = timing
        .constraints
        .iter()
        .map(|c| match c.interval {
            Some((a, b)) => format!("  {}: {} ({:.3} s, [{a}, {b}])", c.name, c.status, b - a),
            None => format!("  {}: {}", c.name, c.status),
        })
        .collect();
    if let Some(ok) = timing.order_ok {
        lines.push(format!("  order: {}", if ok { "pass" } else { "violated" }));
    }

    let expected_energy = if timing.constraints.iter().all(|c| c.interval.is_some()) {
        Some(scenario_energy(&spec, &model, &trace)?)
    } else {
        warn!("skipping scenario energy: some constraints are unmatched");
        None
    };
    if let Some(e) = expected_energy {
        lines.push(format!("  expected energy: {e:.6} J"));
    }

    let mut energy = None;
    if let (Some(expected), Some(measure)) = (expected_energy, m.measure.as_deref()) {
        let series = load_series(m, measure)?;
        let alignment = aligned(m, &series, &trace)?;
        let window = matched_window(&timing).expect("all constraints matched");
        let rel_tol = m.validation.resolve().rel_tol;
        let cmp = input(
            measure,
            compare_scenario_energy(expected, &series, &alignment, window, rel_tol),
        )?;
        lines.push(format!(
            "  measured energy: {:.6} J over [{}, {}] s, {:.2}% off ({})",
            cmp.measured,
            window.0,
            window.1,
            100.0 * cmp.rel_error,
            if cmp.pass { "pass" } else { "fail" }
        ));
        energy = Some(cmp);
    }

    let pass = timing.all_pass() && energy.is_none_or(|e| e.pass);
    let out = ScenarioOutput {
        timing,
        expected_energy,
        energy,
        pass,
    };
    let path = write_out(&m.out_dir(), "scenario.json", &to_json(&out))?;
    lines.insert(0, if pass { "PASS".into() } else { "FAIL".into() });
    Ok(Outcome {
        status: if pass { Status::Pass } else { Status::Fail },
        summary: lines.join("\n"),
        written: vec![path],
    })
}

pub fn cmd_plot(m: &RunManifest) -> Result<Outcome, CliError> {
    let opts = PlotOptions::default();
    let (svg, summary) = match m.measure.as_deref() {
        None => model_only(m, &opts)?,
        Some(path) => match load_measurements(&read(path)?, m.voltage) {
            Err(powerval::Error::NoSamples) => {
                warn!("{}: no samples, plotting the model only", path.display());
                model_only(m, &opts)?
            }
            _ => {
                let (profile, series, alignment, out) = pipeline(m)?;
                let d = &out.report.discrepancies;
                let svg = render_svg(&profile, Some((&series, &alignment)), d, &opts);
                let noun = if d.len() == 1 { "discrepancy" } else { "discrepancies" };
                (svg, format!("modeled and measured power, {} {noun}", d.len()))
            }
        },
    };
    let path = write_out(&m.out_dir(), "plot.svg", &svg)?;
    Ok(Outcome {
        status: Status::Pass,
        summary,
        written: vec![path],
    })
}

fn model_only(m: &RunManifest, opts: &PlotOptions) -> Result<(String, String), CliError> {
    let model = load_model(m)?;
    let trace = load_trace_file(m, &model)?;
    let profile = replay(&model, &trace, replay_end(m, &trace, None)?)?;
    Ok((render_svg(&profile, None, &[], opts), "modeled power only".into()))
}

/// Settings for [`cmd_synth`] beyond the manifest.
#[derive(Debug, Clone, Default)]
pub struct SynthOptions {
    pub offset: f64,
    pub noise: Option<f64>,
    pub anomalies: Vec<Anomaly>,
    pub no_spike: bool,
}

/// Parses `START:END:FRACTION`, e.g. `5.8:6.8:0.2` for +20 % over 1 s.
pub fn parse_anomaly(s: &str) -> Result<Anomaly, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, f] = parts[..] else {
        return Err(format!("expected START:END:FRACTION, got `{s}`"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("malformed number `{x}`"));
    let (start, end, fraction) = (num(a)?, num(b)?, num(f)?);
    if end <= start {
        return Err(format!("anomaly end {end} must be after start {start}"));
    }
    Ok(Anomaly {
        start,
        end,
        excess: Excess::Relative(fraction),
    })
}

/// Writes a synthetic measurement CSV for the manifest's model and trace.
pub fn cmd_synth(m: &RunManifest, opts: &SynthOptions) -> Result<Outcome, CliError> {
    let model = load_model(m)?;
    let trace = load_trace_file(m, &model)?;
    let profile = replay(&model, &trace, replay_end(m, &trace, None)?)?;
    let spike = match trace.find_sync() {
        Ok(t) if !opts.no_spike => Some(Spike::at(t)),
        Ok(_) => None,
        Err(_) => {
            warn!("trace has no sync event; generating without a spike");
            None
        }
    };
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        seed: m.seed.unwrap_or(0),
        noise_rel_sigma: opts.noise.unwrap_or(defaults.noise_rel_sigma),
        offset: opts.offset,
        spike,
        anomalies: opts.anomalies.clone(),
        ..defaults
    };
    let series = generate(&profile, &cfg)?;
    let path = write_out(&m.out_dir(), "synthetic.csv", &series.to_csv())?;
    Ok(Outcome {
        status: Status::Pass,
        summary: format!("{} samples at {} Hz, seed {}", series.len(), cfg.rate, cfg.seed),
        written: vec![path],
    })
}
