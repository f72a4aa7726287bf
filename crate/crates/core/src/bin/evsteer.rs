//! Command-line front end: simulate, build frames, train, evaluate, sweep, compare.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use evsteer_core::eval::{
    compare_inputs, evaluate_model, run_experiment, sweep_integration_time, write_rows_csv, EvalError,
    ExperimentConfig, ProtocolRow,
};
use evsteer_core::events::read_events_file;
use evsteer_core::frames::{accumulate_events, to_input, InputKind, InputSource};
use evsteer_core::image::{write_pgm, Image};
use evsteer_core::nn::{load_model_with_meta, save_model_with_meta, NnError};
use evsteer_core::sim::{generate_recording, read_gray_frames, read_recording, write_recording, SimConfig, FRAMES_DIR};

#[derive(Parser)]
#[command(name = "evsteer", version, about = "Steering-angle regression from event-camera data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labelled recording from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-window network inputs as PGM images.
    Frames {
        #[arg(long)]
        events: PathBuf,
        #[arg(long = "T-ms")]
        t_ms: u64,
        #[arg(long = "stride-ms")]
        stride_ms: u64,
        #[arg(long)]
        kind: InputKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the train split of a recording.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        input: InputKind,
        #[arg(long = "T-ms")]
        t_ms: u64,
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        base: BaseArgs,
    },
    /// Evaluate a trained model on the test split of a recording.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Train and evaluate one model per integration time.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "times-ms", value_delimiter = ',', default_value = "10,25,50,100,200")]
        times_ms: Vec<u64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        base: BaseArgs,
    },
    /// Train and evaluate one model per input kind.
    Compare {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "events,gray,graydiff")]
        kinds: Vec<InputKind>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long = "T-ms", default_value_t = 50)]
        t_ms: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        base: BaseArgs,
    },
}

#[derive(Args)]
struct BaseArgs {
    /// JSON experiment config used as the base (defaults otherwise).
    #[arg(long)]
    experiment: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Data(String),
    Diverged(String),
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Nn(NnError::Diverged { .. }) => CliError::Diverged(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_err {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_err!(
    std::io::Error,
    serde_json::Error,
    evsteer_core::sim::SimError,
    evsteer_core::events::EventError,
    evsteer_core::frames::FrameError,
    NnError
);

fn load_base(base: &BaseArgs) -> Result<ExperimentConfig, CliError> {
    match &base.experiment {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn with_seed(mut cfg: ExperimentConfig, seed: u64) -> ExperimentConfig {
    cfg.train.seed = seed;
    cfg.model.seed = seed;
    cfg.pipeline.seed = seed;
    cfg
}

fn write_rows(path: &Path, rows: &[ProtocolRow]) -> Result<(), CliError> {
    write_rows_csv(BufWriter::new(fs::File::create(path)?), rows)?;
    for r in rows {
        match &r.result {
            Ok(rep) => println!(
                "{} T={}ms: rmse={:.3} deg eva={}",
                r.input_kind,
                r.integration_time_ms,
                rep.rmse_deg,
                rep.eva.map_or("n/a".into(), |v| format!("{v:.4}"))
            ),
            Err(e) => println!("{} T={}ms: failed: {e}", r.input_kind, r.integration_time_ms),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = SimConfig::from_json(&fs::read_to_string(&config)?)?;
            let rec = generate_recording(&cfg)?;
            write_recording(&out, &rec, Some(&cfg))?;
            println!(
                "wrote {} events, {} frames, {} labels to {}",
                rec.events.len(),
                rec.gray_frames.len(),
                rec.labels.len(),
                out.display()
            );
        }
        Command::Frames { events, t_ms, stride_ms, kind, out } => {
            if t_ms == 0 || stride_ms == 0 {
                return Err(CliError::Data("--T-ms and --stride-ms must be positive".into()));
            }
            let stream = read_events_file(&events)?;
            let gray = match kind {
                InputKind::Events => Vec::new(),
                _ => {
                    let dir = events.parent().unwrap_or(Path::new(".")).join(FRAMES_DIR);
                    let frames = read_gray_frames(&dir)?;
                    if frames.is_empty() {
                        return Err(CliError::Data(format!("no grayscale frames in {}", dir.display())));
                    }
                    frames
                }
            };
            fs::create_dir_all(&out)?;
            let (w, h) = (stream.width() as usize, stream.height() as usize);
            let mut written = 0;
            for (i, (window, evs)) in stream.windows(t_ms * 1000, stride_ms * 1000).enumerate() {
                let comment = [format!("t_start_us={} duration_us={}", window.t_start, window.duration)];
                let idx = gray.partition_point(|f| f.t_us <= window.t_end()).checked_sub(1);
                match kind {
                    InputKind::Events => {
                        let frame = accumulate_events(evs, window, w, h)?;
                        let mut plus = BufWriter::new(fs::File::create(out.join(format!("{i:06}_plus.pgm")))?);
                        let mut minus = BufWriter::new(fs::File::create(out.join(format!("{i:06}_minus.pgm")))?);
                        frame.write_pgm_pair(&mut plus, &mut minus)?;
                    }
                    InputKind::Gray => {
                        let Some(j) = idx else { continue };
                        let img = gray[j].image.map(|v| v.round().clamp(0.0, 255.0) as u16);
                        write_pgm(&mut fs::File::create(out.join(format!("{i:06}.pgm")))?, &img, 255, &comment)?;
                    }
                    InputKind::Graydiff => {
                        let Some(j) = idx.filter(|&j| j > 0) else { continue };
                        let t = to_input(
                            InputSource::Graydiff { current: &gray[j].image, previous: &gray[j - 1].image },
                            Default::default(),
                        )?;
                        // [-1, 1] mapped to [0, 254] with 127 as zero change.
                        let data = t.values.iter().map(|&v| ((v + 1.0) * 127.0).round() as u16).collect();
                        let img = Image::from_vec(w, h, data);
                        write_pgm(&mut fs::File::create(out.join(format!("{i:06}.pgm")))?, &img, 255, &comment)?;
                    }
                }
                written += 1;
            }
            println!("wrote {written} {kind} frames to {}", out.display());
        }
        Command::Train { data, input, t_ms, epochs, seed, out, base } => {
            let mut cfg = with_seed(load_base(&base)?, seed);
            cfg.input_kind = input;
            cfg.integration_time_us = t_ms * 1000;
            cfg.train.epochs = epochs;
            let rec = read_recording(&data)?;
            let outcome = run_experiment(&rec, &cfg)?;
            let meta = json!({ "experiment": cfg, "label_stats": outcome.stats, "n_train": outcome.n_train });
            fs::write(&out, save_model_with_meta(&outcome.model, Some(&meta)))?;
            let rep = &outcome.report;
            println!(
                "trained on {} samples; test rmse={:.3} deg eva={}; model written to {}",
                outcome.n_train,
                rep.rmse_deg,
                rep.eva.map_or("n/a".into(), |v| format!("{v:.4}")),
                out.display()
            );
        }
        Command::Eval { model, data, report } => {
            let (model, meta) = load_model_with_meta::<f32>(&fs::read(&model)?)?;
            let meta = meta.ok_or_else(|| CliError::Data("model file carries no experiment metadata".into()))?;
            let cfg: ExperimentConfig = serde_json::from_value(meta["experiment"].clone())?;
            let rec = read_recording(&data)?;
            let rep = evaluate_model(&model, &rec, &cfg)?;
            fs::write(&report, serde_json::to_string_pretty(&rep)?)?;
            println!(
                "rmse={:.3} deg eva={} n={}",
                rep.rmse_deg,
                rep.eva.map_or("n/a".into(), |v| format!("{v:.4}")),
                rep.n_samples
            );
        }
        Command::Sweep { data, times_ms, seed, report, epochs, base } => {
            if times_ms.is_empty() || times_ms.contains(&0) {
                return Err(CliError::Data("--times-ms needs positive integration times".into()));
            }
            let mut cfg = with_seed(load_base(&base)?, seed);
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            // Same window ends for every T.
            let longest = times_ms.iter().max().copied().unwrap_or(0) * 1000;
            cfg.first_end_us = Some(cfg.first_end_us.unwrap_or(0).max(longest));
            let rec = read_recording(&data)?;
            write_rows(&report, &sweep_integration_time(&rec, &times_ms, &cfg))?;
        }
        Command::Compare { data, kinds, seed, report, t_ms, epochs, base } => {
            let mut cfg = with_seed(load_base(&base)?, seed);
            cfg.integration_time_us = t_ms * 1000;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let rec = read_recording(&data)?;
            write_rows(&report, &compare_inputs(&rec, &kinds, &cfg)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Diverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
