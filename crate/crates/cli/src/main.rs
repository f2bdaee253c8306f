//! `ringpair`: simulate, correlate and characterise microring pair sources.

use std::fs;
use std::ops::RangeInclusive;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ringpair::engine::{autocorrelate_split, coincidence_summary, cross_correlate, Histogram, SummaryOptions};
use ringpair::error::Category;
use ringpair::experiments::{self, fringe_phases};
use ringpair::fit::{fit_g2, PeakShape};
use ringpair::io::{self as rio, Axis, ExperimentConfig, Series};
use ringpair::{Execution, TagStream};

#[derive(Parser)]
#[command(
    name = "ringpair",
    version,
    about = "Photon-pair source simulator and time-tag analysis"
)]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a tag stream and write it to disk.
    Simulate(SimulateArgs),
    /// Cross-correlate two channels of a tag file.
    Correlate(CorrelateArgs),
    /// Unheralded g2 of one channel through a virtual 50:50 split.
    G2(G2Args),
    /// CW power sweep with the closed-form CAR overlay.
    PowerSweep(PowerSweepArgs),
    /// Time-bin interferometer phase sweep.
    TimebinSweep(TimebinSweepArgs),
    /// Comb lines against the DWDM grid.
    ChannelMap(ChannelMapArgs),
    /// Full characterisation: JSON summary plus CSV/SVG per figure.
    Report(ReportArgs),
    /// Convert tag files between the binary and CSV formats.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (TOML, or JSON by extension). Defaults to the bundled baseline.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> ringpair::Result<ExperimentConfig> {
        match &self.config {
            Some(p) => rio::load_config(p),
            None => Ok(ExperimentConfig::baseline()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Cw,
    Timebin,
}

#[derive(Args)]
struct SimulateArgs {
    mode: Mode,
    #[command(flatten)]
    config: ConfigArg,
    /// Output tag file; `.csv` writes the text format.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Acquisition time, s.
    #[arg(long, allow_negative_numbers = true)]
    duration: Option<f64>,
    /// Pump power, mW.
    #[arg(long, allow_negative_numbers = true)]
    power: Option<f64>,
}

#[derive(Args)]
struct InputArgs {
    /// Tag file; `.csv` is read as `timestamp_ps,channel`.
    #[arg(long = "in", short)]
    input: PathBuf,
    /// Tick size for CSV input, ps.
    #[arg(long, default_value_t = 1)]
    resolution: u32,
    /// Sort out-of-order CSV rows instead of failing.
    #[arg(long)]
    sort: bool,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Start channel.
    #[arg(long, default_value_t = 0)]
    a: u8,
    /// Stop channel.
    #[arg(long, default_value_t = 1)]
    b: u8,
    /// Bin width, ps.
    #[arg(long, default_value_t = 81)]
    bin: u64,
    /// Half range, ps; histogram covers [-range, range).
    #[arg(long, default_value_t = 405_000)]
    range: i64,
    /// Coincidence window, ps.
    #[arg(long, default_value_t = ringpair::engine::DEFAULT_WINDOW_PS)]
    window: u64,
    /// Half-width excluded from the sidebands, ps.
    #[arg(long, default_value_t = ringpair::engine::DEFAULT_GUARD_PS)]
    guard: u64,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Lorentzian,
    DoubleExponential,
}

impl From<Shape> for PeakShape {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Lorentzian => PeakShape::Lorentzian,
            Shape::DoubleExponential => PeakShape::DoubleExponential,
        }
    }
}

#[derive(Args)]
struct G2Args {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    ch: u8,
    #[arg(long, default_value_t = 81)]
    bin: u64,
    #[arg(long, default_value_t = 8100)]
    range: i64,
    #[arg(long, value_enum, default_value_t = Shape::DoubleExponential)]
    shape: Shape,
    /// Seed of the virtual beam splitter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PowerSweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Pump powers, mW, comma separated. Defaults to the config's report plan.
    #[arg(long, value_delimiter = ',')]
    powers: Vec<f64>,
    /// Acquisition per point, s: one value or one per power.
    #[arg(long, value_delimiter = ',')]
    durations: Vec<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TimebinSweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Interferometer phases, rad, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phases: Vec<f64>,
    /// Evenly spaced phases over [0, pi) when --phases is absent.
    #[arg(long)]
    points: Option<usize>,
    /// Acquisition per phase, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ChannelMapArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Comb orders as `A..B`, inclusive.
    #[arg(long, default_value = "-3..3", allow_hyphen_values = true)]
    k_range: String,
    /// Write JSON here instead of printing a table.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, short)]
    out: PathBuf,
    /// Scale every acquisition time by this factor.
    #[arg(long)]
    quick: Option<f64>,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file; format follows the extension.
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    panic::set_hook(Box::new(|info| eprintln!("internal error: {info}")));
    match panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            let category = e.downcast_ref::<ringpair::Error>().map(|e| e.category());
            let label = category.map_or("io", |c| c.as_str());
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.ends_with(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error ({label}): {msg}");
            match category {
                Some(Category::Numeric) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
        Err(_) => ExitCode::from(2),
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Simulate(a) => simulate(a, exec),
        Command::Correlate(a) => correlate(a, exec),
        Command::G2(a) => g2(a, exec),
        Command::PowerSweep(a) => power_sweep(a, exec),
        Command::TimebinSweep(a) => timebin_sweep(a, exec),
        Command::ChannelMap(a) => channel_map(a),
        Command::Report(a) => report(a, exec),
        Command::Convert(a) => convert(a),
    }
}

#[derive(Serialize)]
struct Provenance {
    tool: &'static str,
    config_hash: Option<String>,
    seeds: Vec<u64>,
}

impl Provenance {
    fn new(config_hash: Option<String>, seeds: Vec<u64>) -> Self {
        Provenance {
            tool: concat!("ringpair ", env!("CARGO_PKG_VERSION")),
            config_hash,
            seeds,
        }
    }

    fn of_config(cfg: &ExperimentConfig, seeds: Vec<u64>) -> Self {
        Self::new(Some(cfg.hash()), seeds)
    }

    fn of_stream(stream: &TagStream) -> Self {
        Self::new(
            stream.origin.config_hash.clone(),
            stream.origin.seed.into_iter().collect(),
        )
    }
}

/// Writes `body` with a `provenance` member.
fn emit_json(path: &Path, prov: &Provenance, body: Value) -> anyhow::Result<()> {
    let mut obj = match body {
        Value::Object(m) => m,
        other => {
            let mut m = serde_json::Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    obj.insert("provenance".into(), serde_json::to_value(prov)?);
    rio::write_json(path, &Value::Object(obj))?;
    Ok(())
}

/// CSV and SVG cannot carry metadata inline; they get a sidecar.
fn emit_sidecar(path: &Path, prov: &Provenance) -> anyhow::Result<()> {
    rio::write_json(&rio::sidecar_path(path), prov)?;
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_stream(input: &InputArgs) -> anyhow::Result<TagStream> {
    let path = &input.input;
    let mut stream = if is_csv(path) {
        rio::read_tags_csv(path, input.resolution, None, input.sort)?
    } else {
        rio::read_tags(path)?
    };
    if let Some(origin) = rio::read_origin(path)? {
        stream.origin = origin;
    }
    Ok(stream)
}

fn write_stream(path: &Path, stream: &TagStream) -> anyhow::Result<()> {
    if is_csv(path) {
        rio::write_tags_csv(path, stream)?;
    } else {
        rio::write_tags(path, stream)?;
    }
    rio::write_origin(path, &stream.origin)?;
    Ok(())
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| ringpair::Error::io(dir, e))?;
    Ok(())
}

fn simulate(a: &SimulateArgs, exec: Execution) -> anyhow::Result<()> {
    let mut cfg = a.config.load()?;
    let (seed, duration, power) = (a.seed, a.duration, a.power);
    let stream = match a.mode {
        Mode::Cw => {
            if let Some(s) = seed {
                cfg.source.rng_seed = s;
            }
            if let Some(d) = duration {
                cfg.source.duration_s = d;
            }
            if let Some(p) = power {
                cfg.source.pump_power_mw = p;
            }
            cfg.validate()?;
            experiments::cw_stream(&cfg, exec)?
        }
        Mode::Timebin => {
            let tb = cfg
                .timebin
                .as_mut()
                .ok_or_else(|| ringpair::Error::invalid("timebin", "section missing"))?;
            if let Some(s) = seed {
                tb.source.rng_seed = s;
            }
            if let Some(d) = duration {
                tb.source.duration_s = d;
            }
            if let Some(p) = power {
                tb.source.pump_power_mw = p;
            }
            cfg.validate()?;
            experiments::timebin_stream(&cfg, exec)?
        }
    };
    write_stream(&a.out, &stream)?;
    log::info!("{} tags written to {}", stream.len(), a.out.display());
    Ok(())
}

fn correlate(a: &CorrelateArgs, exec: Execution) -> anyhow::Result<()> {
    let stream = read_stream(&a.input)?;
    let hist = cross_correlate(&stream, a.a, a.b, a.bin, (-a.range, a.range), exec)?;
    out_dir(&a.out)?;
    let prov = Provenance::of_stream(&stream);
    let csv = a.out.join("histogram.csv");
    rio::write_histogram_csv(&csv, &hist)?;
    emit_sidecar(&csv, &prov)?;
    let summary = coincidence_summary(
        &hist,
        &SummaryOptions {
            window_ps: a.window,
            guard_ps: a.guard,
        },
    );
    let body = json!({
        "channels": [a.a, a.b],
        "bin_width_ps": a.bin,
        "range_ps": a.range,
        "total_coincidences": hist.total(),
        "total_starts": hist.total_starts,
        "total_stops": hist.total_stops,
        "acquisition_s": hist.acquisition_s,
        "summary": summary.as_ref().ok(),
        "summary_error": summary.as_ref().err().map(|e| e.to_string()),
    });
    emit_json(&a.out.join("summary.json"), &prov, body)
}

fn g2(a: &G2Args, exec: Execution) -> anyhow::Result<()> {
    let stream = read_stream(&a.input)?;
    let hist = autocorrelate_split(&stream, a.ch, a.seed, a.bin, (-a.range, a.range), exec)?;
    let fit = fit_g2(&hist, a.shape.into())?;
    out_dir(&a.out)?;
    let mut prov = Provenance::of_stream(&stream);
    prov.seeds.push(a.seed);
    let csv = a.out.join("histogram.csv");
    rio::write_histogram_csv(&csv, &hist)?;
    emit_sidecar(&csv, &prov)?;
    emit_json(&a.out.join("g2.json"), &prov, json!({ "channel": a.ch, "fit": fit }))
}

fn power_sweep(a: &PowerSweepArgs, exec: Execution) -> anyhow::Result<()> {
    let cfg = a.config.load()?;
    let powers = if a.powers.is_empty() {
        cfg.report.powers_mw.clone()
    } else {
        a.powers.clone()
    };
    let durations = if !a.durations.is_empty() {
        a.durations.clone()
    } else if a.powers.is_empty() {
        cfg.report.sweep_durations_s.clone()
    } else {
        vec![1.0]
    };
    let run = experiments::power_sweep(&cfg, &powers, &durations, exec)?;
    out_dir(&a.out)?;
    let prov = Provenance::of_config(&cfg, run.seeds.clone());
    write_sweep_outputs(&a.out, &cfg, &run, &prov)?;
    let figures = experiments::source_figures(&cfg.device, &run.analysis)?;
    emit_json(
        &a.out.join("power_sweep.json"),
        &prov,
        json!({ "analysis": run.analysis, "predicted_car": run.predicted_car, "figures": figures }),
    )
}

#[derive(Serialize)]
struct CurveRow {
    pump_power_mw: f64,
    car: f64,
    coincidence_rate: f64,
    accidental_rate: f64,
    singles_signal: f64,
    singles_idler: f64,
}

fn write_sweep_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    run: &experiments::SweepRun,
    prov: &Provenance,
) -> anyhow::Result<()> {
    let sweep_csv = dir.join("sweep.csv");
    rio::write_sweep_csv(&sweep_csv, &run.sweep)?;
    emit_sidecar(&sweep_csv, prov)?;

    let model = experiments::car_model(cfg)?;
    let pts = &run.sweep.points;
    let (lo, hi) = (pts[0].pump_power_mw, pts[pts.len() - 1].pump_power_mw);
    let curve: Vec<CurveRow> = (0..=100)
        .map(|i| lo * (hi / lo).powf(i as f64 / 100.0))
        .map(|p| {
            model.predict(p).map(|c| CurveRow {
                pump_power_mw: p,
                car: c.car,
                coincidence_rate: c.coincidence_rate,
                accidental_rate: c.accidental_rate,
                singles_signal: c.singles_signal,
                singles_idler: c.singles_idler,
            })
        })
        .collect::<ringpair::Result<_>>()?;
    let curve_csv = dir.join("car_prediction.csv");
    rio::write_rows_csv(&curve_csv, &curve)?;
    emit_sidecar(&curve_csv, prov)?;

    let power = Axis {
        label: "pump power (mW)".into(),
        log: true,
    };
    let car_svg = dir.join("car.svg");
    rio::write_svg_plot(
        &car_svg,
        "CAR and coincidence rate",
        &power,
        &Axis {
            label: "CAR, R_c (1/s)".into(),
            log: true,
        },
        &[
            Series {
                label: "CAR".into(),
                points: pts.iter().map(|p| (p.pump_power_mw, p.car)).collect(),
                scatter: true,
            },
            Series {
                label: "CAR model".into(),
                points: curve.iter().map(|c| (c.pump_power_mw, c.car)).collect(),
                scatter: false,
            },
            Series {
                label: "R_c".into(),
                points: pts.iter().map(|p| (p.pump_power_mw, p.coincidence_rate)).collect(),
                scatter: true,
            },
            Series {
                label: "R_c model".into(),
                points: curve.iter().map(|c| (c.pump_power_mw, c.coincidence_rate)).collect(),
                scatter: false,
            },
        ],
    )?;
    emit_sidecar(&car_svg, prov)?;

    let singles_svg = dir.join("singles.svg");
    let fit_curve = |fit: &ringpair::fit::PowerLawFit| {
        curve
            .iter()
            .map(|c| (c.pump_power_mw, fit.eval(c.pump_power_mw)))
            .collect()
    };
    rio::write_svg_plot(
        &singles_svg,
        "Singles",
        &power,
        &Axis {
            label: "singles (1/s)".into(),
            log: true,
        },
        &[
            Series {
                label: "signal".into(),
                points: pts.iter().map(|p| (p.pump_power_mw, p.singles_signal)).collect(),
                scatter: true,
            },
            Series {
                label: "idler".into(),
                points: pts.iter().map(|p| (p.pump_power_mw, p.singles_idler)).collect(),
                scatter: true,
            },
            Series {
                label: "signal aP+bP^2".into(),
                points: fit_curve(&run.analysis.signal),
                scatter: false,
            },
            Series {
                label: "idler aP+bP^2".into(),
                points: fit_curve(&run.analysis.idler),
                scatter: false,
            },
        ],
    )?;
    emit_sidecar(&singles_svg, prov)?;
    Ok(())
}

#[derive(Serialize)]
struct FringeRow {
    phase_rad: f64,
    left: f64,
    center: f64,
    right: f64,
    accidental: f64,
    satellite_tails: f64,
    seed: u64,
}

fn write_timebin_outputs(dir: &Path, run: &experiments::TimeBinRun, prov: &Provenance) -> anyhow::Result<()> {
    let rows: Vec<FringeRow> = run
        .points
        .iter()
        .map(|p| FringeRow {
            phase_rad: p.phase_rad,
            left: p.left,
            center: p.center,
            right: p.right,
            accidental: p.accidental,
            satellite_tails: p.satellite_tails,
            seed: p.seed,
        })
        .collect();
    let csv = dir.join("timebin_fringe.csv");
    rio::write_rows_csv(&csv, &rows)?;
    emit_sidecar(&csv, prov)?;
    let hist_csv = dir.join("timebin_histogram.csv");
    rio::write_histogram_csv(&hist_csv, &run.histogram)?;
    emit_sidecar(&hist_csv, prov)?;

    let fit = &run.fit;
    let lo = run.points.first().map_or(0.0, |p| p.phase_rad);
    let hi = run.points.last().map_or(1.0, |p| p.phase_rad);
    let model: Vec<(f64, f64)> = (0..=200)
        .map(|i| lo + (hi - lo) * i as f64 / 200.0)
        .map(|x| {
            (
                x,
                fit.mean_level
                    * (1.0 + fit.raw * (2.0 * std::f64::consts::PI * x / fit.period + fit.phase_offset).cos()),
            )
        })
        .collect();
    let svg = dir.join("timebin_fringe.svg");
    rio::write_svg_plot(
        &svg,
        "Time-bin two-photon fringe",
        &Axis {
            label: "interferometer phase (rad)".into(),
            log: false,
        },
        &Axis {
            label: "coincidences".into(),
            log: false,
        },
        &[
            Series {
                label: "central".into(),
                points: rows.iter().map(|r| (r.phase_rad, r.center)).collect(),
                scatter: true,
            },
            Series {
                label: "side peaks".into(),
                points: rows.iter().map(|r| (r.phase_rad, r.left + r.right)).collect(),
                scatter: true,
            },
            Series {
                label: "fit".into(),
                points: model,
                scatter: false,
            },
        ],
    )?;
    emit_sidecar(&svg, prov)?;
    let hist_svg = dir.join("timebin_histogram.svg");
    histogram_svg(&hist_svg, "Time-bin coincidences, all phases", &run.histogram)?;
    emit_sidecar(&hist_svg, prov)
}

fn histogram_svg(path: &Path, title: &str, hist: &Histogram) -> anyhow::Result<()> {
    let points = (0..hist.len())
        .map(|j| (hist.bin_center(j), hist.counts[j] as f64))
        .collect();
    rio::write_svg_plot(
        path,
        title,
        &Axis {
            label: "delay (ps)".into(),
            log: false,
        },
        &Axis {
            label: "counts".into(),
            log: false,
        },
        &[Series {
            label: "histogram".into(),
            points,
            scatter: false,
        }],
    )?;
    Ok(())
}

fn timebin_sweep(a: &TimebinSweepArgs, exec: Execution) -> anyhow::Result<()> {
    let cfg = a.config.load()?;
    let phases = if !a.phases.is_empty() {
        a.phases.clone()
    } else {
        fringe_phases(a.points.unwrap_or(cfg.report.timebin_phase_points))
    };
    let duration = a.duration.unwrap_or(cfg.report.timebin_duration_s);
    let run = experiments::timebin_sweep(&cfg, &phases, duration, exec)?;
    out_dir(&a.out)?;
    let prov = Provenance::of_config(&cfg, run.points.iter().map(|p| p.seed).collect());
    write_timebin_outputs(&a.out, &run, &prov)?;
    emit_json(
        &a.out.join("visibility.json"),
        &prov,
        json!({
            "fit": run.fit,
            "net_accidentals_only": run.net_accidentals_only,
            "side_slope": run.side_slope,
            "duration_s": duration,
        }),
    )
}

fn parse_k_range(s: &str) -> anyhow::Result<RangeInclusive<i32>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!(ringpair::Error::invalid("k-range", "expected A..B")))?;
    let parse = |t: &str| t.trim().trim_start_matches('=').parse::<i32>();
    match (parse(a), parse(b)) {
        (Ok(a), Ok(b)) if a <= b => Ok(a..=b),
        _ => Err(anyhow!(ringpair::Error::invalid(
            "k-range",
            format!("cannot read `{s}` as A..B with A <= B")
        ))),
    }
}

fn channel_map(a: &ChannelMapArgs) -> anyhow::Result<()> {
    let cfg = a.config.load()?;
    let map = experiments::channel_map(&cfg, parse_k_range(&a.k_range)?)?;
    let prov = Provenance::of_config(&cfg, Vec::new());
    if let Some(out) = &a.out {
        return emit_json(out, &prov, serde_json::to_value(&map)?);
    }
    println!("# config {}", cfg.hash());
    println!(
        "# T = {:.3} K, pump {:.3} nm",
        map.temperature_k, map.pump_wavelength_nm
    );
    println!(
        "{:>4} {:>8} {:>14} {:>14}",
        "k", "channel", "comb (THz)", "detuning (GHz)"
    );
    for l in &map.lines {
        println!(
            "{:>4} {:>8} {:>14.5} {:>14.3}",
            l.k, l.channel, l.comb_frequency_thz, l.detuning_ghz
        );
    }
    Ok(())
}

fn report(a: &ReportArgs, exec: Execution) -> anyhow::Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(f) = a.quick {
        if f.is_nan() || f <= 0.0 {
            return Err(ringpair::Error::invalid("quick", "must be positive").into());
        }
        cfg.report = cfg.report.scaled(f);
    }
    cfg.validate()?;
    let dir = &a.out;
    out_dir(dir)?;
    let hash = cfg.hash();
    let mut seeds = Vec::new();

    log::info!("channel map");
    let map = experiments::channel_map(&cfg, -3..=3)?;
    let map_csv = dir.join("channel_map.csv");
    rio::write_rows_csv(&map_csv, &map.lines)?;

    log::info!("power sweep");
    let plan = cfg.report.clone();
    let sweep = experiments::power_sweep(&cfg, &plan.powers_mw, &plan.sweep_durations_s, exec)?;
    seeds.extend(&sweep.seeds);
    let figures = experiments::source_figures(&cfg.device, &sweep.analysis)?;
    let model = experiments::car_model(&cfg)?;
    let predicted_max = model.predict(plan.powers_mw[0])?;

    log::info!("purity");
    let schmidt = cfg.source.schmidt_number;
    let purity = experiments::purity(&cfg, schmidt, exec).context("purity run")?;
    seeds.push(purity.seed);

    log::info!("coherence decay");
    let decay = experiments::coherence_decay(&cfg, exec).context("decay run")?;
    seeds.push(decay.seed);

    let timebin = match cfg.timebin {
        Some(_) => {
            log::info!("time-bin sweep");
            let run = experiments::timebin_sweep(
                &cfg,
                &fringe_phases(plan.timebin_phase_points),
                plan.timebin_duration_s,
                exec,
            )?;
            seeds.extend(run.points.iter().map(|p| p.seed));
            Some(run)
        }
        None => None,
    };

    let prov = Provenance::new(Some(hash), seeds);
    emit_sidecar(&map_csv, &prov)?;
    write_sweep_outputs(dir, &cfg, &sweep, &prov)?;
    for (name, hist, title) in [
        ("g2", &purity.histogram, "Unheralded g2, split signal arm"),
        ("cross_correlation", &decay.histogram, "Signal-idler cross-correlation"),
    ] {
        let csv = dir.join(format!("{name}_histogram.csv"));
        rio::write_histogram_csv(&csv, hist)?;
        emit_sidecar(&csv, &prov)?;
        let svg = dir.join(format!("{name}.svg"));
        histogram_svg(&svg, title, hist)?;
        emit_sidecar(&svg, &prov)?;
    }
    if let Some(run) = &timebin {
        write_timebin_outputs(dir, run, &prov)?;
    }

    let body = json!({
        "car_max": sweep.analysis.max_car,
        "car_max_power_mw": sweep.analysis.max_car_power_mw,
        "car_max_predicted": predicted_max.car,
        "coincidence_rate_at_max_car": sweep.sweep.points[0].coincidence_rate,
        "g2_zero": purity.g2.g2_zero,
        "g2_sigma": purity.g2.g2_sigma,
        "schmidt_number": purity.g2.schmidt,
        "coherence_time_ps": decay.coherence_time_ps,
        "coherence_time_sigma_ps": decay.coherence_time_sigma_ps,
        "bandwidth_mhz": decay.bandwidth_mhz,
        "pgr": figures.pgr_coefficient,
        "pgr_sigma": figures.pgr_sigma,
        "brightness": figures.brightness,
        "brightness_sigma": figures.brightness_sigma,
        "loss_signal_db": figures.loss_signal_db,
        "loss_idler_db": figures.loss_idler_db,
        "raw_visibility": timebin.as_ref().map(|r| r.fit.raw),
        "raw_visibility_sigma": timebin.as_ref().map(|r| r.fit.raw_sigma),
        "net_visibility": timebin.as_ref().map(|r| r.fit.net),
        "net_visibility_sigma": timebin.as_ref().map(|r| r.fit.net_sigma),
        "net_visibility_accidentals_only": timebin.as_ref().map(|r| r.net_accidentals_only),
        "side_peak_slope": timebin.as_ref().map(|r| r.side_slope),
        "sweep": sweep.analysis,
        "predicted_car": sweep.predicted_car,
        "channel_map": map,
        "plan": plan,
    });
    emit_json(&dir.join("report.json"), &prov, body)
}

fn convert(a: &ConvertArgs) -> anyhow::Result<()> {
    let stream = read_stream(&a.input)?;
    write_stream(&a.out, &stream)
}
