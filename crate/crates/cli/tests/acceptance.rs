//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use powerval::fixtures::{
    HANDSET_DURATION_S, HANDSET_MODEL, HANDSET_TRACE, PHONE_MODEL, PHONE_SCENARIO, PHONE_SCENARIO_ENERGY_J, PHONE_TRACE,
};
use powerval::scenario::{IntervalConstraint, TimingStatus};
use powerval::synth::{Anomaly, Excess, Spike};
use powerval::testkit::{oracle, random_model, random_trace, rng, ModelShape, SILENT_EVENT};
use powerval::{
    align, check_timing, generate, load_measurements, replay, scenario_energy, Event, EventTrace, MeasurementSeries,
    PowerModel, Sample, ScenarioSpec, SynthConfig, Unit,
};
use powerval_cli::manifest::{RunManifest, ValidationOverrides};
use powerval_cli::{cmd_validate, Status};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SAMPLE_PERIOD: f64 = 1.0 / 33.0;
const ANOMALY: (f64, f64) = (5.8, 6.8);

fn handset() -> (PowerModel, EventTrace) {
    (
        PowerModel::parse(HANDSET_MODEL).unwrap(),
        EventTrace::parse(HANDSET_TRACE).unwrap(),
    )
}

/// Writes a synthetic handset measurement and runs the validate command on it.
fn validate_synthetic(dir: &Path, seed: u64, anomalies: Vec<Anomaly>) -> Result<(Status, serde_json::Value), String> {
    let (model, trace) = handset();
    let profile = replay(&model, &trace, HANDSET_DURATION_S).map_err(|e| e.to_string())?;
    let cfg = SynthConfig {
        seed,
        spike: Some(Spike::at(trace.find_sync().unwrap())),
        offset: 0.25 + (seed % 7) as f64 * 0.37,
        phase: (seed % 5) as f64 * 0.006,
        anomalies,
        ..SynthConfig::default()
    };
    let series = generate(&profile, &cfg).map_err(|e| e.to_string())?;
    let run = dir.join(format!("seed{seed}"));
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join("handset.model"), HANDSET_MODEL).unwrap();
    fs::write(run.join("handset.csv"), HANDSET_TRACE).unwrap();
    fs::write(run.join("meter.csv"), series.to_csv()).unwrap();
    let manifest = RunManifest {
        model: Some(run.join("handset.model")),
        trace: Some(run.join("handset.csv")),
        measure: Some(run.join("meter.csv")),
        out: Some(run.clone()),
        until: Some(HANDSET_DURATION_S),
        validation: ValidationOverrides {
            rel_tol: Some(0.05),
            ..Default::default()
        },
        ..Default::default()
    };
    let outcome = cmd_validate(&manifest).map_err(|e| e.to_string())?;
    let report = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    Ok((outcome.status, report))
}

fn timed(limit: Duration, started: Instant, detail: String) -> Outcome {
    let elapsed = started.elapsed();
    if elapsed < limit {
        Ok(format!("{detail}, {:.2} s", elapsed.as_secs_f64()))
    } else {
        Err(format!("{detail}, but took {:.2} s (limit {:.0} s)", elapsed.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn fidelity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let mut passed = 0;
    let mut failures = Vec::new();
    for seed in 0..50 {
        let (status, report) = validate_synthetic(dir.path(), seed, Vec::new())?;
        let n = report["report"]["discrepancies"].as_array().unwrap().len();
        if status == Status::Pass && n == 0 {
            passed += 1;
        } else {
            failures.push(seed);
        }
    }
    let detail = format!("{passed}/50 seeds pass at rel_tol 0.05 (failing seeds {failures:?})");
    if passed < 49 {
        return Err(detail);
    }
    timed(Duration::from_secs(5), started, detail)
}

fn anomaly_detection() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let anomaly = Anomaly {
        start: ANOMALY.0,
        end: ANOMALY.1,
        excess: Excess::Relative(0.2),
    };
    let mut worst: f64 = 1.0;
    for seed in 100..120 {
        let (status, report) = validate_synthetic(dir.path(), seed, vec![anomaly])?;
        let d = report["report"]["discrepancies"].as_array().unwrap();
        if status != Status::Fail || d.len() != 1 {
            return Err(format!("seed {seed}: {} discrepancies, status {status:?}", d.len()));
        }
        if d[0]["kind"] != "excess" {
            return Err(format!("seed {seed}: discrepancy kind {}", d[0]["kind"]));
        }
        let (a, b) = (d[0]["t_start"].as_f64().unwrap(), d[0]["t_end"].as_f64().unwrap());
        let overlap = (b.min(ANOMALY.1) - a.max(ANOMALY.0)).max(0.0) / (ANOMALY.1 - ANOMALY.0);
        if overlap < 0.9 {
            return Err(format!("seed {seed}: [{a:.3}, {b:.3}] overlaps {:.1}% of the window", 100.0 * overlap));
        }
        worst = worst.min(overlap);
    }
    timed(
        Duration::from_secs(5),
        started,
        format!("20/20 seeds give one excess discrepancy, minimum overlap {:.1}%", 100.0 * worst),
    )
}

fn scenario_closed_form() -> Outcome {
    let model = PowerModel::parse(PHONE_MODEL).unwrap();
    let trace = EventTrace::parse(PHONE_TRACE).unwrap();
    let spec = ScenarioSpec::parse(PHONE_SCENARIO).unwrap();
    let energy = scenario_energy(&spec, &model, &trace).map_err(|e| e.to_string())?;
    let closed = 0.1 * (4.0 - 1.0) + 0.02 * (5.0 - 2.0) + 0.01 * (4.0 - 2.0) + 0.015 * (5.0 - 3.0);

    // Rectangle sum of each constraint state's power while it is active,
    // with the configuration found by walking the events up to each instant.
    let config_at = |t: f64| {
        let mut c = model.initial_configuration();
        for e in trace.events().iter().take_while(|e| e.t <= t) {
            if model.declares_event(&e.name) {
                c = model.apply_event(&c, e).unwrap();
            }
        }
        c
    };
    let timing = check_timing(&spec, &trace);
    let mut rect = 0.0;
    for (c, r) in spec.constraints.iter().zip(&timing.constraints) {
        let state = c.state.as_deref().unwrap();
        let (a, b) = r.interval.unwrap();
        let power = model.state_power(state).unwrap();
        rect += oracle::rectangle_sum(
            |t| {
                let cfg = config_at(t);
                if cfg.active.contains(state) {
                    power.evaluate(model.params())
                } else {
                    0.0
                }
            },
            a,
            b,
            1e-4,
        );
    }
    let rel_closed = (energy - closed).abs() / closed;
    let rel_rect = (energy - rect).abs() / rect;
    let detail = format!(
        "E = {energy:.12} J, closed form {closed} (rel {rel_closed:.1e}), rectangle sum {rect:.12} (rel {rel_rect:.1e})"
    );
    if (closed - 0.41).abs() < 1e-15 && (PHONE_SCENARIO_ENERGY_J - closed).abs() < 1e-15 && rel_closed <= 1e-9 && rel_rect <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn replay_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..200u64 {
        let mut r = rng(seed);
        let model = random_model(&mut r, ModelShape::default());
        let trace = random_trace(&mut r, &model, 50);
        let end = trace.last_time().unwrap_or(0.0) + r.random_range(0.1..2.0);
        let profile = replay(&model, &trace, end).map_err(|e| format!("seed {seed}: {e}"))?;
        let expected = oracle::event_walk_energy(&model, &trace, end);
        let got = profile.total_energy();
        let rel = if expected == 0.0 { got.abs() } else { (got - expected).abs() / expected.abs() };
        if rel > 1e-12 {
            return Err(format!("seed {seed}: energy {got} vs oracle {expected} (rel {rel:.1e})"));
        }
        worst = worst.max(rel);

        let segs = profile.segments();
        let tiled = segs.first().is_some_and(|s| s.t_start == profile.t0())
            && segs.last().is_some_and(|s| s.t_end == profile.t1())
            && segs.windows(2).all(|w| w[0].t_end == w[1].t_start)
            && segs.iter().all(|s| s.t_start < s.t_end && s.power >= 0.0);
        if !tiled {
            return Err(format!("seed {seed}: profile does not tile [{}, {}]", profile.t0(), profile.t1()));
        }
    }
    Ok(format!("200 pairs, worst relative energy error {worst:.1e}, tiling holds"))
}

fn statechart() -> Outcome {
    const CASES: u64 = 1000;
    let mut steps = 0usize;
    for seed in 0..CASES {
        let mut r = rng(10_000 + seed);
        let model = random_model(&mut r, ModelShape::default());
        let trace = random_trace(&mut r, &model, 30);
        let fail = |what: &str, detail: String| Err(format!("{what}, seed {}: {detail}", 10_000 + seed));

        // Entry semantics.
        let mut c = model.initial_configuration();
        if c.active != oracle::initial_active(&model) {
            return fail("entry", format!("initial {:?}", c.active));
        }

        for e in trace.events() {
            // Broadcast no-op.
            let quiet = model.apply_event(&c, &Event::new(e.t, SILENT_EVENT)).unwrap();
            if quiet != c {
                return fail("broadcast no-op", format!("`{SILENT_EVENT}` changed {:?}", c.active));
            }
            let next = model.apply_event(&c, e).unwrap();
            if e.params.is_empty() && !oracle::has_enabled_transition(&model, &c, &e.name) && next != c {
                return fail("broadcast no-op", format!("`{}` with no enabled transition changed state", e.name));
            }
            // Determinism.
            if model.apply_event(&c, e).unwrap() != next {
                return fail("determinism", format!("`{}` applied twice differs", e.name));
            }
            // Validity.
            if let Err(msg) = oracle::is_valid(&model, &next) {
                return fail("validity", msg);
            }
            // Entry semantics, including re-entry on self-transitions.
            if next != oracle::step(&model, &c, e) {
                return fail("entry", format!("step on `{}` disagrees with the tree oracle", e.name));
            }
            c = next;
            steps += 1;
        }
        let end = trace.last_time().unwrap_or(0.0) + 1.0;
        if replay(&model, &trace, end).unwrap() != replay(&model, &trace, end).unwrap() {
            return fail("determinism", "replay differs between runs".into());
        }
    }
    Ok(format!("{CASES} cases per property, {steps} event steps, no counterexamples"))
}

fn alignment() -> Outcome {
    let (model, trace) = handset();
    let profile = replay(&model, &trace, HANDSET_DURATION_S).unwrap();
    let mut worst = 0.0_f64;
    for offset in [0.1, 0.8, 2.0, 5.0] {
        for seed in 0..10 {
            let cfg = SynthConfig {
                seed,
                offset,
                phase: seed as f64 * 0.003,
                spike: Some(Spike::at(trace.find_sync().unwrap())),
                ..SynthConfig::default()
            };
            let series = generate(&profile, &cfg).unwrap();
            let a = align(&series, &trace, None).map_err(|e| format!("offset {offset}: {e}"))?;
            let err = (a.offset - offset).abs();
            if err > SAMPLE_PERIOD {
                return Err(format!("offset {offset}, seed {seed}: recovered {} (error {err:.4} s)", a.offset));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("4 offsets x 10 seeds, worst error {worst:.4} s <= {SAMPLE_PERIOD:.4} s"))
}

fn conditioning() -> Outcome {
    // Block k holds k, k+0.25, ..., k+1 in some order: mean k + 0.5.
    let order = [0.5, 0.0, 1.0, 0.25, 0.75];
    let samples: Vec<Sample> = (0..100)
        .map(|i| Sample::new(i as f64 * 0.01, (i / 5) as f64 + order[i % 5]))
        .collect();
    let series = MeasurementSeries::new(samples, Unit::Amperes, Some(3.7), 33.0 * 5.0).unwrap();
    let avg = series.average_per_trigger(5).map_err(|e| e.to_string())?;
    if avg.len() != 20 {
        return Err(format!("{} block means, expected 20", avg.len()));
    }
    for (k, s) in avg.samples().iter().enumerate() {
        let expected = k as f64 + 0.5;
        if s.value != expected {
            return Err(format!("block {k}: mean {} expected {expected}", s.value));
        }
    }

    let current = load_measurements("# voltage=3.7\nt,current_a\n0.0,0.27\n0.03,1.5\n", None).unwrap();
    let power = current.to_power().map_err(|e| e.to_string())?;
    let p = power.samples()[0].value;
    if p != 0.27 * 3.7 || (p - 0.999).abs() > 1e-12 || power.samples()[1].value != 1.5 * 3.7 {
        return Err(format!("0.27 A x 3.7 V gave {p} W"));
    }
    Ok(format!("20 block means exact, 0.27 A x 3.7 V = {p} W"))
}

fn timing_table() -> Outcome {
    let spec = ScenarioSpec::parse(PHONE_SCENARIO).unwrap();
    // The earpiece constraint allows 1 to 3 s between ear_on and ear_off.
    let variants = [
        ("5,ear_off,", TimingStatus::Pass),
        ("3.5,ear_off,", TimingStatus::DelayViolation),
        ("6.5,ear_off,", TimingStatus::DeadlineViolation),
        ("", TimingStatus::Unmatched),
    ];
    let mut seen = Vec::new();
    for (line, expected) in variants {
        let mut rows: Vec<String> = PHONE_TRACE.lines().filter(|l| !l.contains("ear_off")).map(String::from).collect();
        if !line.is_empty() {
            rows.push(line.to_string());
        }
        let mut body: Vec<(f64, String)> = rows[1..]
            .iter()
            .map(|r| (r.split(',').next().unwrap().parse().unwrap(), r.clone()))
            .collect();
        body.sort_by(|a, b| a.0.total_cmp(&b.0));
        let text = std::iter::once(rows[0].clone())
            .chain(body.into_iter().map(|(_, r)| r))
            .collect::<Vec<_>>()
            .join("\n");
        let trace = EventTrace::parse(&text).map_err(|e| e.to_string())?;
        let got = check_timing(&spec, &trace).get("earpiece").unwrap().status;
        if got != expected {
            return Err(format!("ear_off `{line}`: {got}, expected {expected}"));
        }
        seen.push(got.to_string());
    }
    Ok(format!("observed {}", seen.join(", ")))
}

fn random_measurement(r: &mut impl Rng) -> MeasurementSeries {
    let n = r.random_range(1..200);
    let mut t = r.random_range(0.0..100.0);
    let samples = (0..n)
        .map(|_| {
            t += r.random_range(0.001..0.1);
            Sample::new(t, r.random_range(-0.5..5.0))
        })
        .collect();
    if r.random_bool(0.5) {
        MeasurementSeries::new(samples, Unit::Amperes, Some(r.random_range(1.0..12.0)), r.random_range(1.0..1000.0))
    } else {
        MeasurementSeries::new(samples, Unit::Watts, None, r.random_range(1.0..1000.0))
    }
    .unwrap()
}

fn random_scenario(r: &mut impl Rng) -> ScenarioSpec {
    let constraints = (0..r.random_range(0..6))
        .map(|i| {
            let delay = r.random_range(0.0..10.0);
            let c = IntervalConstraint::new(
                &format!("c{i}"),
                &format!("e{}", r.random_range(0..5)),
                &format!("e{}", r.random_range(0..5)),
                delay,
                delay + r.random_range(0.0..10.0),
            );
            if r.random_bool(0.5) {
                c.with_state(&format!("Top.r{}.S{}", r.random_range(0..3), r.random_range(0..3)))
            } else {
                c
            }
        })
        .collect();
    let order = r
        .random_bool(0.5)
        .then(|| (0..r.random_range(1..6)).map(|i| format!("e{i}")).collect());
    ScenarioSpec::new(constraints, order).unwrap()
}

fn round_trips() -> Outcome {
    for seed in 0..100u64 {
        let mut r = rng(50_000 + seed);
        let model = random_model(&mut r, ModelShape::default());
        let text = model.to_text();
        if PowerModel::parse(&text).map_err(|e| format!("model seed {seed}: {e}"))? != model {
            return Err(format!("model seed {seed} differs after round trip"));
        }
        let trace = random_trace(&mut r, &model, 50);
        if EventTrace::parse(&trace.to_csv()).map_err(|e| format!("trace seed {seed}: {e}"))? != trace {
            return Err(format!("trace seed {seed} differs after round trip"));
        }
        let series = random_measurement(&mut r);
        if load_measurements(&series.to_csv(), None).map_err(|e| format!("measurement seed {seed}: {e}"))? != series {
            return Err(format!("measurement seed {seed} differs after round trip"));
        }
        let spec = random_scenario(&mut r);
        if ScenarioSpec::parse(&spec.to_text()).map_err(|e| format!("scenario seed {seed}: {e}"))? != spec {
            return Err(format!("scenario seed {seed} differs after round trip"));
        }
    }
    Ok("100 instances each of model, trace, measurement and scenario survive load, save, load".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("fidelity: clean synthetic runs pass at 5%", fidelity),
        ("anomaly: +20% window gives one excess discrepancy", anomaly_detection),
        ("scenario energy: closed form 0.41 J", scenario_closed_form),
        ("replay: event-walk energy and tiling", replay_oracle),
        ("statechart: no-op, determinism, validity, entry", statechart),
        ("alignment: offset within one sample", alignment),
        ("conditioning: block means and P = V*I", conditioning),
        ("timing: all four classifications", timing_table),
        ("formats: load, save, load round trips", round_trips),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
