use powerval::{Event, PowerModel};

const DOC: &str = include_str!("../../../docs/model-format.md");

fn first_block() -> &'static str {
    let start = DOC.find("```text\n").unwrap() + "```text\n".len();
    &DOC[start..start + DOC[start..].find("```").unwrap()]
}

#[test]
fn documented_example_parses() {
    let m = PowerModel::parse(first_block()).unwrap();
    let c = m.initial_configuration();
    let c = m.apply_event(&c, &Event::new(1.0, "standby_on")).unwrap();
    let c = m.apply_event(&c, &Event::new(2.0, "mic_on")).unwrap();
    assert!(c.active.contains("AudioStandby.mic.MicActive"));
    // 10 mW standby + (5 + 0.2 * 40) mW microphone.
    assert!((m.power_at(&c) - 0.023).abs() < 1e-15);
}
