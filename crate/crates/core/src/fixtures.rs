//! Reference models, traces and scenarios used by tests, the CLI examples and
//! the browser demo.

/// Audio subsystem: idle, or standby with an independent microphone and
/// earpiece.
pub const AUDIO_MODEL: &str = r#"# Audio subsystem.
event standby_on, standby_off, mic_on, mic_off, ear_on, ear_off
param volume = 0

region audio {
  state AudioIdle initial power 0
  state AudioStandby power 10 {
    region mic {
      state MicIdle initial power 0
      state MicActive power 5
      on mic_on: MicIdle -> MicActive
      on mic_off: MicActive -> MicIdle
    }
    region ear {
      state EarIdle initial power 0
      state EarActive power 50 + 0.2 * volume
      on ear_on: EarIdle -> EarActive
      on ear_off: EarActive -> EarIdle
    }
  }
  on standby_on: AudioIdle -> AudioStandby
  on standby_off: AudioStandby -> AudioIdle
}
"#;

/// Processor plus audio subsystem with constant powers: processor 100 mW,
/// audio standby 20 mW, microphone 10 mW, earpiece 15 mW, zero idle power.
pub const PHONE_MODEL: &str = r#"# Processor and audio subsystem of a handset.
event proc_on, proc_off, standby_on, standby_off, mic_on, mic_off, ear_on, ear_off

region device {
  state Phone initial power 0 {
    region cpu {
      state ProcIdle initial power 0
      state ProcActive power 100
      on proc_on: ProcIdle -> ProcActive
      on proc_off: ProcActive -> ProcIdle
    }
    region audio {
      state AudioIdle initial power 0
      state AudioStandby power 20 {
        region mic {
          state MicIdle initial power 0
          state MicActive power 10
          on mic_on: MicIdle -> MicActive
          on mic_off: MicActive -> MicIdle
        }
        region ear {
          state EarIdle initial power 0
          state EarActive power 15
          on ear_on: EarIdle -> EarActive
          on ear_off: EarActive -> EarIdle
        }
      }
      on standby_on: AudioIdle -> AudioStandby
      on standby_off: AudioStandby -> AudioIdle
    }
  }
}
"#;

/// Processor active on [1, 4], audio standby on [2, 5], microphone on [2, 4],
/// earpiece on [3, 5].
pub const PHONE_TRACE: &str = "t,event,params
0,sync,
1,proc_on,
2,standby_on,
2,mic_on,
3,ear_on,
4,proc_off,
4,mic_off,
5,ear_off,
5,standby_off,
";

pub const PHONE_SCENARIO: &str = r#"# Processor wakes, puts audio into standby, microphone then earpiece active.
constraint processor: proc_on -> proc_off delay 2 deadline 4 state Phone.cpu.ProcActive
constraint standby: standby_on -> standby_off delay 2 deadline 4 state Phone.audio.AudioStandby
constraint microphone: mic_on -> mic_off delay 1 deadline 3 state Phone.audio.AudioStandby.mic.MicActive
constraint earpiece: ear_on -> ear_off delay 1 deadline 3 state Phone.audio.AudioStandby.ear.EarActive
order proc_on, standby_on, mic_on, ear_on, proc_off, mic_off, ear_off, standby_off
"#;

/// Closed-form expected energy of [`PHONE_TRACE`] under [`PHONE_SCENARIO`].
pub const PHONE_SCENARIO_ENERGY_J: f64 = 0.1 * 3.0 + 0.02 * 3.0 + 0.01 * 2.0 + 0.015 * 2.0;

/// Six-state handset: asleep, or awake with a display and a radio.
pub const HANDSET_MODEL: &str = r#"# Six-state handset model.
event wake, sleep, bright, dim, tx_start, tx_end

region device {
  state Sleep initial power 60
  state Awake power 120 {
    region display {
      state Dim initial power 40
      state Bright power 180
      on bright: Dim -> Bright
      on dim: Bright -> Dim
    }
    region radio {
      state RadioIdle initial power 10
      state RadioTx power 350
      on tx_start: RadioIdle -> RadioTx
      on tx_end: RadioTx -> RadioIdle
    }
  }
  on wake: Sleep -> Awake
  on sleep: Awake -> Sleep
}
"#;

/// Ten seconds of handset activity with the sync marker at 0.3 s.
pub const HANDSET_TRACE: &str = "t,event,params
0.3,sync,
1.0,wake,
2.0,bright,
3.1,tx_start,
4.6,tx_end,
5.5,dim,
6.2,tx_start,
7.0,tx_end,
8.4,sleep,
";

pub const HANDSET_DURATION_S: f64 = 10.0;
