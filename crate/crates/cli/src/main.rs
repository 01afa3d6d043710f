use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use powerval::synth::Anomaly;
use powerval_cli::manifest::{ValidationOverrides, OUT_DIR_ENV};
use powerval_cli::{commands, CliError, Outcome, RunManifest, SynthOptions, EXIT_USAGE};

/// Validate software energy behaviour against a device power model.
#[derive(Parser)]
#[command(name = "powerval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trace through the model and write the profile CSV.
    Replay(#[command(flatten)] RunArgs),
    /// Align measurements, replay and compare; exit 1 on discrepancies.
    Validate(#[command(flatten)] RunArgs),
    /// Check scenario timing constraints and expected energy.
    Scenario(#[command(flatten)] RunArgs),
    /// Write an SVG of modeled and measured power.
    Plot(#[command(flatten)] RunArgs),
    /// Generate a synthetic measurement CSV from the model and trace.
    Synth {
        #[command(flatten)]
        run: RunArgs,
        /// Measurement clock minus trace clock, in seconds.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        offset: f64,
        /// Relative Gaussian noise sigma.
        #[arg(long)]
        noise: Option<f64>,
        /// Extra relative power START:END:FRACTION on the trace clock (repeatable).
        #[arg(long, value_parser = commands::parse_anomaly)]
        anomaly: Vec<Anomaly>,
        /// Leave out the sync spike.
        #[arg(long)]
        no_spike: bool,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run manifests (TOML). Several are processed concurrently.
    manifests: Vec<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    measure: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Supply voltage for current measurements.
    #[arg(long)]
    voltage: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Absolute tolerance floor in watts.
    #[arg(long)]
    abs_floor: Option<f64>,
    /// Exclusion window around each event in seconds.
    #[arg(long)]
    guard: Option<f64>,
    #[arg(long)]
    min_run: Option<usize>,
    /// Sync spike threshold in watts.
    #[arg(long)]
    spike_threshold: Option<f64>,
    /// Average this many readings per trigger before comparing.
    #[arg(long)]
    readings_per_trigger: Option<usize>,
    /// End of the replayed profile on the trace clock.
    #[arg(long)]
    until: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn flags(&self) -> RunManifest {
        RunManifest {
            model: self.model.clone(),
            trace: self.trace.clone(),
            measure: self.measure.clone(),
            scenario: self.scenario.clone(),
            out: self.out.clone(),
            voltage: self.voltage,
            readings_per_trigger: self.readings_per_trigger,
            until: self.until,
            spike_threshold: self.spike_threshold,
            seed: self.seed,
            validation: ValidationOverrides {
                rel_tol: self.rel_tol,
                abs_floor: self.abs_floor,
                guard: self.guard,
                min_violation_run: self.min_run,
            },
        }
    }

    fn manifests(&self) -> Vec<Result<RunManifest, CliError>> {
        let flags = self.flags();
        if self.manifests.is_empty() {
            return vec![Ok(flags)];
        }
        self.manifests
            .iter()
            .map(|p| {
                let mut m = RunManifest::load(p)?;
                m.merge(&flags);
                Ok(m)
            })
            .collect()
    }
}

fn run_all<F>(args: &RunArgs, f: F) -> i32
where
    F: Fn(&RunManifest) -> Result<Outcome, CliError> + Sync,
{
    let manifests = args.manifests();
    let results: Vec<Result<Outcome, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = manifests
            .into_iter()
            .map(|m| s.spawn(|| m.and_then(|m| f(&m))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("command thread panicked")).collect()
    });
    let mut code = 0;
    for r in results {
        match r {
            Ok(o) => {
                println!("{}", o.summary);
                for p in &o.written {
                    println!("wrote {}", p.display());
                }
                code = code.max(o.status.code());
            }
            Err(e) => {
                eprintln!("error: {e}");
                code = EXIT_USAGE;
            }
        }
    }
    code
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let code = match &cli.command {
        Command::Replay(a) => run_all(a, commands::cmd_replay),
        Command::Validate(a) => run_all(a, commands::cmd_validate),
        Command::Scenario(a) => run_all(a, commands::cmd_scenario),
        Command::Plot(a) => run_all(a, commands::cmd_plot),
        Command::Synth {
            run,
            offset,
            noise,
            anomaly,
            no_spike,
        } => {
            let opts = SynthOptions {
                offset: *offset,
                noise: *noise,
                anomalies: anomaly.clone(),
                no_spike: *no_spike,
            };
            run_all(run, |m| commands::cmd_synth(m, &opts))
        }
    };
    ExitCode::from(code as u8)
}
