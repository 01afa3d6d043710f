use approx::assert_relative_eq;
use powerval::fixtures::{HANDSET_DURATION_S, HANDSET_MODEL, HANDSET_TRACE};
use powerval::synth::{generate, SynthConfig};
use powerval::testkit::{oracle, random_model, random_trace, rng, ModelShape};
use powerval::{compare, replay, Alignment, EventTrace, PowerModel, ValidationConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn energy_matches_event_walk(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r, ModelShape::default());
        let tr = random_trace(&mut r, &m, 50);
        let end = tr.last_time().unwrap_or(0.0) + 0.5;
        let p = replay(&m, &tr, end).unwrap();
        let expected = oracle::event_walk_energy(&m, &tr, end);
        prop_assert!((p.total_energy() - expected).abs() <= 1e-12 * expected.abs().max(1e-12));

        // Tiling: contiguous, non-empty, spanning [t0, t1].
        let segs = p.segments();
        prop_assert_eq!(segs[0].t_start, p.t0());
        prop_assert_eq!(segs.last().unwrap().t_end, p.t1());
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].t_end, w[1].t_start);
        }
        prop_assert!(segs.iter().all(|s| s.t_end > s.t_start));
    }

    #[test]
    fn energy_is_additive(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let mut r = rng(seed);
        let m = random_model(&mut r, ModelShape::default());
        let tr = random_trace(&mut r, &m, 20);
        let end = tr.last_time().unwrap_or(0.0) + 1.0;
        let p = replay(&m, &tr, end).unwrap();
        let (x, y) = if a < b { (a * end, b * end) } else { (b * end, a * end) };
        let whole = p.energy(0.0, end).unwrap();
        let split = p.energy(0.0, x).unwrap() + p.energy(x, y).unwrap() + p.energy(y, end).unwrap();
        prop_assert!((whole - split).abs() <= 1e-9 * whole.max(1.0));
    }
}

fn handset() -> powerval::PowerProfile {
    let m = PowerModel::parse(HANDSET_MODEL).unwrap();
    replay(&m, &EventTrace::parse(HANDSET_TRACE).unwrap(), HANDSET_DURATION_S).unwrap()
}

#[test]
fn exact_measurements_pass_at_tight_tolerance() {
    let p = handset();
    let s = generate(&p, &SynthConfig::exact()).unwrap();
    let cfg = ValidationConfig {
        rel_tol: 1e-12,
        abs_floor: 1e-12,
        guard: Some(0.0),
        ..ValidationConfig::default()
    };
    let r = compare(&p, &s, &Alignment::identity(), &cfg).unwrap();
    assert!(r.passed(), "{r}");
    assert_eq!(r.max_rel_error, 0.0);
}

#[test]
fn uniform_scaling_past_tolerance_fails_everywhere() {
    let p = handset();
    let s = generate(&p, &SynthConfig::exact()).unwrap();
    let scaled = powerval::MeasurementSeries::new(
        s.samples().iter().map(|x| powerval::Sample::new(x.t, x.value * 1.5)).collect(),
        s.unit(),
        None,
        s.nominal_rate(),
    )
    .unwrap();
    let r = compare(&p, &scaled, &Alignment::identity(), &ValidationConfig::default()).unwrap();
    assert!(!r.passed());
    assert_relative_eq!(r.max_rel_error, 0.5, epsilon = 1e-12);
    assert!(r.discrepancies.iter().all(|d| d.kind == powerval::validate::DiscrepancyKind::Excess));
}
