//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes file contents as text and returns a JSON
//! string; errors come back as a JS `Error` with the parser's message.

use powerval::fixtures;
use powerval::plot::{render_svg, PlotOptions};
use powerval::scenario::{check_timing, compare_scenario_energy, matched_window};
use powerval::synth::{Anomaly, Excess, Spike};
use powerval::{align, compare, generate, replay, scenario_energy, EventTrace, PowerModel, ScenarioSpec, SynthConfig, ValidationConfig};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn text_err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn load(model: &str, trace: &str) -> Result<(PowerModel, EventTrace), String> {
    let model = PowerModel::parse(model).map_err(|e| format!("model: {e}"))?;
    let trace = EventTrace::parse(trace).map_err(|e| format!("trace: {e}"))?;
    Ok((model, trace))
}

fn end_of(trace: &EventTrace, until: f64) -> f64 {
    if until > 0.0 {
        until
    } else {
        trace.last_time().unwrap_or(0.0) + 1.0
    }
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("serializable")
}

/// Replays the trace; returns the profile CSV, total energy and an SVG.
pub fn replay_json(model: &str, trace: &str, until: f64) -> Result<String, String> {
    let (model, trace) = load(model, trace)?;
    let profile = replay(&model, &trace, end_of(&trace, until)).map_err(text_err)?;
    let opts = PlotOptions {
        title: "Modeled power".into(),
        ..PlotOptions::default()
    };
    Ok(to_json(&json!({
        "csv": profile.to_csv(),
        "energy_j": profile.total_energy(),
        "segments": profile.segments().len(),
        "svg": render_svg(&profile, None, &[], &opts),
    })))
}

/// Synthesizes a measurement with an optional relative anomaly over
/// `[anomaly_start, anomaly_end]`, aligns it by the sync spike and validates.
#[allow(clippy::too_many_arguments)]
pub fn validate_json(
    model: &str,
    trace: &str,
    until: f64,
    seed: u64,
    noise: f64,
    offset: f64,
    anomaly_start: f64,
    anomaly_end: f64,
    anomaly_fraction: f64,
    rel_tol: f64,
) -> Result<String, String> {
    let (model, trace) = load(model, trace)?;
    let profile = replay(&model, &trace, end_of(&trace, until)).map_err(text_err)?;
    let sync = trace.find_sync().map_err(text_err)?;
    let anomalies = if anomaly_fraction != 0.0 && anomaly_end > anomaly_start {
        vec![Anomaly {
            start: anomaly_start,
            end: anomaly_end,
            excess: Excess::Relative(anomaly_fraction),
        }]
    } else {
        Vec::new()
    };
    let cfg = SynthConfig {
        seed,
        noise_rel_sigma: noise,
        offset,
        spike: Some(Spike::at(sync)),
        anomalies,
        ..SynthConfig::default()
    };
    let series = generate(&profile, &cfg).map_err(text_err)?;
    let alignment = align(&series, &trace, None).map_err(text_err)?;
    let vcfg = ValidationConfig {
        rel_tol,
        ..ValidationConfig::default()
    };
    let report = compare(&profile, &series, &alignment, &vcfg).map_err(text_err)?;
    let svg = render_svg(&profile, Some((&series, &alignment)), &report.discrepancies, &PlotOptions::default());
    Ok(to_json(&json!({
        "summary": report.to_string(),
        "report": report,
        "svg": svg,
    })))
}

/// Checks scenario timing and, with `measure_seed` set, the expected energy
/// against a synthetic measurement.
pub fn scenario_json(model: &str, trace: &str, scenario: &str, measure_seed: Option<u64>) -> Result<String, String> {
    let (model, trace) = load(model, trace)?;
    let spec = ScenarioSpec::parse(scenario).map_err(|e| format!("scenario: {e}"))?;
    spec.check_against(&model, trace.sync_name()).map_err(|e| format!("scenario: {e}"))?;
    let timing = check_timing(&spec, &trace);
    let expected = scenario_energy(&spec, &model, &trace).ok();
    let energy = match (expected, measure_seed, matched_window(&timing)) {
        (Some(e), Some(seed), Some(window)) => {
            let profile = replay(&model, &trace, trace.last_time().unwrap_or(0.0) + 1.0).map_err(text_err)?;
            let cfg = SynthConfig {
                seed,
                spike: trace.find_sync().ok().map(Spike::at),
                ..SynthConfig::default()
            };
            let series = generate(&profile, &cfg).map_err(text_err)?;
            let alignment = align(&series, &trace, None).map_err(text_err)?;
            Some(
                compare_scenario_energy(e, &series, &alignment, window, ValidationConfig::default().rel_tol)
                    .map_err(text_err)?,
            )
        }
        _ => None,
    };
    Ok(to_json(&json!({
        "pass": timing.all_pass() && energy.is_none_or(|e| e.pass),
        "timing": timing,
        "expected_energy_j": expected,
        "energy": energy,
    })))
}

/// Bundled example inputs by name, for prefilling the page.
pub fn fixture_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "handset_model" => fixtures::HANDSET_MODEL,
        "handset_trace" => fixtures::HANDSET_TRACE,
        "phone_model" => fixtures::PHONE_MODEL,
        "phone_trace" => fixtures::PHONE_TRACE,
        "phone_scenario" => fixtures::PHONE_SCENARIO,
        _ => return None,
    })
}

#[wasm_bindgen]
pub fn fixture(name: &str) -> Result<String, JsError> {
    fixture_text(name)
        .map(str::to_string)
        .ok_or_else(|| JsError::new(&format!("no fixture named `{name}`")))
}

#[wasm_bindgen(js_name = replayProfile)]
pub fn replay_profile(model: &str, trace: &str, until: f64) -> Result<String, JsError> {
    replay_json(model, trace, until).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = validateSynthetic)]
#[allow(clippy::too_many_arguments)]
pub fn validate_synthetic(
    model: &str,
    trace: &str,
    until: f64,
    seed: u32,
    noise: f64,
    offset: f64,
    anomaly_start: f64,
    anomaly_end: f64,
    anomaly_fraction: f64,
    rel_tol: f64,
) -> Result<String, JsError> {
    validate_json(
        model,
        trace,
        until,
        seed.into(),
        noise,
        offset,
        anomaly_start,
        anomaly_end,
        anomaly_fraction,
        rel_tol,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = checkScenario)]
pub fn check_scenario(model: &str, trace: &str, scenario: &str, measure_seed: Option<u32>) -> Result<String, JsError> {
    scenario_json(model, trace, scenario, measure_seed.map(u64::from)).map_err(|e| JsError::new(&e))
}
