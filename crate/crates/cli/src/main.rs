//! `agglo`: generate synthetic particle pictures, measure how clumped
//! they are, and reproduce the full calibration grid from the terminal.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use agglo_core::store::{self, PbmFormat};
use agglo_core::{
    analyze_image_with, cade, clark_evans_points, configuration_minkowski, euler_number_with,
    euler_radius_curve, foreground_components, generate_configuration, hole_count, rasterize,
    run_experiment_with_progress, schedule_for_radius, thicken_trace_with, CalibrationSource,
    CalibrationTable, Connectivity, EdgeCorrection, Error, ExperimentSpec, ScheduleKind,
    DEFAULT_ALPHA,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "agglo", version, about, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Globals {
    /// Random seed for stochastic subcommands.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output file (or directory for `experiment`); stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for grid runs; defaults to the CPU count.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Dilation schedule.
    #[arg(long, global = true, value_enum, default_value_t = ScheduleArg::CountMatched)]
    schedule: ScheduleArg,
    /// Adjacency pairing for foreground/background pixels.
    #[arg(long, global = true, value_enum, default_value_t = ConnectivityArg::EightFour)]
    connectivity: ConnectivityArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    /// Square/cross steps arranged so a lone pixel grows like a disk.
    CountMatched,
    /// The fixed ten-step published cycle.
    Printed,
}

impl ScheduleArg {
    fn kind(self) -> ScheduleKind {
        match self {
            ScheduleArg::CountMatched => ScheduleKind::CountMatched,
            ScheduleArg::Printed => ScheduleKind::Printed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnectivityArg {
    /// Foreground connected through edges and corners, background through edges.
    #[value(name = "8-4")]
    EightFour,
    /// The dual pairing.
    #[value(name = "4-8")]
    FourEight,
}

impl ConnectivityArg {
    fn conn(self) -> Connectivity {
        match self {
            ConnectivityArg::EightFour => Connectivity::EightFour,
            ConnectivityArg::FourEight => Connectivity::FourEight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// ASCII bitmap, one digit per pixel.
    P1,
    /// Packed binary bitmap.
    P4,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrectionArg {
    /// Plain nearest-neighbor distances inside the box.
    None,
    /// Mirror points across the edges so border particles see neighbors outside.
    Reflective,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a particle configuration and write its center list.
    Generate(GenerateArgs),
    /// Render a saved configuration to a portable bitmap.
    Rasterize(RasterizeArgs),
    /// Euler number (components minus holes) of a bitmap.
    Euler(ImageOnlyArgs),
    /// Dilate an image through the schedule, logging chi and area per step.
    ThickenTrace(ThickenTraceArgs),
    /// Total absolute Euler-number change accumulated over the thickening.
    Cade(CadeArgs),
    /// Build a dispersed-pattern reference table over volume fractions.
    Calibrate(CalibrateArgs),
    /// Agglomeration index of an image against a dispersed reference.
    #[command(visible_alias = "analyze")]
    Delta(DeltaArgs),
    /// Clark-Evans nearest-neighbor index of a configuration's centers.
    ClarkEvans(ClarkEvansArgs),
    /// Euler number against disk radius, with normalized density columns.
    EulerCurve(EulerCurveArgs),
    /// Run the whole (p, gamma, seed) grid and write report CSVs.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Target volume fraction in (0, 0.5].
    #[arg(long)]
    p: f64,
    /// Agglomeration control in [0, 1]; 0 scatters uniformly.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Particle radius in pixels.
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    /// Square window side in pixels.
    #[arg(long = "box", default_value_t = 2400)]
    box_size: u32,
}

#[derive(Args)]
struct RasterizeArgs {
    /// Center list produced by `generate`.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Bitmap flavor; defaults to p4 into a file, p1 on stdout.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct ImageOnlyArgs {
    /// Bitmap to read (P1 or P4).
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
}

#[derive(Args)]
struct ThickenTraceArgs {
    /// Bitmap to thicken.
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// Particle radius the schedule is scaled for.
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    /// Also write every dilated step as a bitmap into this directory.
    #[arg(long, value_name = "DIR")]
    dump_steps: Option<PathBuf>,
}

#[derive(Args)]
struct CadeArgs {
    /// Bitmap to measure.
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// Particle radius the schedule is scaled for.
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Volume fractions to calibrate, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    /// Particle radius in pixels.
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    /// Square window side in pixels.
    #[arg(long = "box", default_value_t = 2400)]
    box_size: u32,
    /// Seeds averaged into the reference, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct DeltaArgs {
    /// Bitmap to analyze.
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// Particle radius in pixels the picture was produced at.
    #[arg(long)]
    rho: f64,
    /// Reference table CSV from `calibrate` or an experiment run;
    /// computed on the fly when omitted.
    #[arg(long, value_name = "FILE")]
    calibration: Option<PathBuf>,
    /// Scale factor applied to the normalized index.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args)]
struct ClarkEvansArgs {
    /// Center list produced by `generate`.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Edge handling for nearest-neighbor distances.
    #[arg(long, value_enum, default_value_t = CorrectionArg::None)]
    correction: CorrectionArg,
}

#[derive(Args)]
struct EulerCurveArgs {
    /// Center list produced by `generate`.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Largest disk radius swept; defaults to 2.5x the stored radius.
    #[arg(long)]
    max_radius: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Volume fractions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4")]
    p: Vec<f64>,
    /// Agglomeration levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.3,0.6,0.9")]
    gammas: Vec<f64>,
    /// Seeds per cell, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    seeds: Vec<u64>,
    /// Particle radius in pixels.
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    /// Square window side in pixels.
    #[arg(long = "box", default_value_t = 2400)]
    box_size: u32,
    /// Scale factor for the agglomeration index.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Skip the per-cell Euler-versus-radius sweeps.
    #[arg(long)]
    no_radius_curves: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let g = &cli.globals;
    match cli.command {
        Command::Generate(args) => generate_cmd(g, args),
        Command::Rasterize(args) => rasterize_cmd(g, args),
        Command::Euler(args) => euler_cmd(g, args),
        Command::ThickenTrace(args) => thicken_trace_cmd(g, args),
        Command::Cade(args) => cade_cmd(g, args),
        Command::Calibrate(args) => calibrate_cmd(g, args),
        Command::Delta(args) => delta_cmd(g, args),
        Command::ClarkEvans(args) => clark_evans_cmd(g, args),
        Command::EulerCurve(args) => euler_curve_cmd(g, args),
        Command::Experiment(args) => experiment_cmd(g, args),
    }
}

/// Writes `text` to the global --out file, or to stdout without one.
fn emit(g: &Globals, text: &str) -> Result<u8, Error> {
    match &g.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn generate_cmd(g: &Globals, args: GenerateArgs) -> Result<u8, Error> {
    let config = generate_configuration(args.gamma, args.p, args.rho, args.box_size, g.seed)?;
    match &g.out {
        Some(path) => store::save_configuration(path, &config)?,
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            store::write_configuration(&mut w, &config)?;
            w.flush()?;
        }
    }
    eprintln!(
        "placed {} particles, achieved p={}",
        config.n_particles(),
        config.achieved_p()
    );
    Ok(0)
}

fn rasterize_cmd(g: &Globals, args: RasterizeArgs) -> Result<u8, Error> {
    let config = store::load_configuration(&args.config)?;
    let image = rasterize(&config);
    match &g.out {
        Some(path) => {
            let format = match args.format {
                Some(FormatArg::P1) => PbmFormat::Plain,
                _ => PbmFormat::Raw,
            };
            store::save_image(path, &image, format)?;
        }
        None => {
            let format = match args.format {
                Some(FormatArg::P4) => PbmFormat::Raw,
                _ => PbmFormat::Plain,
            };
            let stdout = io::stdout();
            let mut w = stdout.lock();
            store::write_image(&mut w, &image, format)?;
            w.flush()?;
        }
    }
    Ok(0)
}

fn euler_cmd(g: &Globals, args: ImageOnlyArgs) -> Result<u8, Error> {
    let image = store::load_image(&args.image)?;
    let conn = g.connectivity.conn();
    let chi = euler_number_with(&image, conn);
    let components = foreground_components(&image, conn);
    let holes = hole_count(&image, conn);
    emit(g, &format!("chi={chi}\ncomponents={components}\nholes={holes}\n"))
}

fn thicken_trace_cmd(g: &Globals, args: ThickenTraceArgs) -> Result<u8, Error> {
    let image = store::load_image(&args.image)?;
    let schedule = schedule_for_radius(args.rho, image.pixel_size(), g.schedule.kind())?;
    if let Some(dir) = &args.dump_steps {
        fs::create_dir_all(dir)?;
        store::save_image(dir.join("step_00.pbm"), &image, PbmFormat::Raw)?;
    }
    let mut dump_err = None;
    let trace = thicken_trace_with(&image, &schedule, g.connectivity.conn(), |step, picture| {
        if dump_err.is_none() {
            if let Some(dir) = &args.dump_steps {
                let path = dir.join(format!("step_{step:02}.pbm"));
                if let Err(e) = store::save_image(path, picture, PbmFormat::Raw) {
                    dump_err = Some(e);
                }
            }
        }
    });
    if let Some(e) = dump_err {
        return Err(e);
    }
    match &g.out {
        Some(path) => store::save_trace(path, &trace)?,
        None => {
            let mut text = String::from("step,chi,area\n");
            for (i, (chi, area)) in trace.chis.iter().zip(&trace.areas).enumerate() {
                text.push_str(&format!("{i},{chi},{area}\n"));
            }
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(0)
}

fn cade_cmd(g: &Globals, args: CadeArgs) -> Result<u8, Error> {
    let image = store::load_image(&args.image)?;
    let schedule = schedule_for_radius(args.rho, image.pixel_size(), g.schedule.kind())?;
    let trace = thicken_trace_with(&image, &schedule, g.connectivity.conn(), |_, _| {});
    let value = cade(&trace, schedule.skipped_steps(), schedule.total_steps())?;
    emit(
        g,
        &format!(
            "cade={}\nn1={}\nn2={}\np={}\n",
            value.value,
            value.n1,
            value.n2,
            image.volume_fraction()
        ),
    )
}

fn calibrate_cmd(g: &Globals, args: CalibrateArgs) -> Result<u8, Error> {
    let table = CalibrationTable::build(
        &args.p,
        args.rho,
        args.box_size,
        &args.seeds,
        g.schedule.kind(),
        g.connectivity.conn(),
    )?;
    match &g.out {
        Some(path) => store::save_calibration(path, table.entries())?,
        None => {
            let mut text = String::new();
            for e in table.entries() {
                let std_dev = e
                    .std_dev
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "unavailable".into());
                text.push_str(&format!(
                    "p={} mean={} min={} max={} std_dev={}\n",
                    e.p, e.mean, e.min, e.max, std_dev
                ));
            }
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(0)
}

fn delta_cmd(g: &Globals, args: DeltaArgs) -> Result<u8, Error> {
    let image = store::load_image(&args.image)?;
    let table = match &args.calibration {
        Some(path) => Some(CalibrationTable::from_entries(store::load_calibration(
            path,
        )?)?),
        None => None,
    };
    let source = match &table {
        Some(table) => CalibrationSource::Table(table),
        None => CalibrationSource::Auto,
    };
    let analysis = analyze_image_with(
        &image,
        args.rho,
        source,
        g.schedule.kind(),
        g.connectivity.conn(),
        args.alpha,
    )?;
    for warning in &analysis.warnings {
        eprintln!("warning: {warning}");
    }
    emit(
        g,
        &format!(
            "delta={}\ncade={}\ne_hat_p={}\np={}\nalpha={}\n",
            analysis.index.delta,
            analysis.cade.value,
            analysis.index.e_hat_p,
            analysis.measured_p,
            analysis.index.alpha
        ),
    )
}

fn clark_evans_cmd(g: &Globals, args: ClarkEvansArgs) -> Result<u8, Error> {
    let config = store::load_configuration(&args.config)?;
    let correction = match args.correction {
        CorrectionArg::None => EdgeCorrection::None,
        CorrectionArg::Reflective => EdgeCorrection::Reflective,
    };
    let ce = clark_evans_points(config.centers(), config.box_size(), correction)?;
    emit(g, &format!("ce={}\nn={}\n", ce, config.n_particles()))
}

fn euler_curve_cmd(g: &Globals, args: EulerCurveArgs) -> Result<u8, Error> {
    let config = store::load_configuration(&args.config)?;
    let max_radius = args.max_radius.unwrap_or(2.5 * config.rho());
    if !(max_radius.is_finite() && max_radius >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "largest radius {max_radius} must be at least 1 pixel"
        )));
    }
    let radii: Vec<f64> = (1..=max_radius.ceil() as u32).map(f64::from).collect();
    let curve = euler_radius_curve(
        config.centers(),
        &radii,
        config.box_size(),
        g.connectivity.conn(),
    )?;
    let n = config.n_particles() as f64;
    let mut text = String::from("r,chi,e,a,l\n");
    for (&r, &chi) in curve.radii.iter().zip(&curve.chis) {
        let (_, measured) = configuration_minkowski(&config, r)?;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r,
            chi,
            chi as f64 / n,
            measured.area_ratio,
            measured.boundary_ratio
        ));
    }
    emit(g, &text)
}

fn experiment_cmd(g: &Globals, args: ExperimentArgs) -> Result<u8, Error> {
    let dir = g.out.clone().ok_or_else(|| {
        Error::InvalidParameter("experiment needs --out DIR for its report files".into())
    })?;
    let spec = ExperimentSpec {
        volume_fractions: args.p,
        gammas: args.gammas,
        seeds: args.seeds,
        rho: args.rho,
        box_size: args.box_size,
        schedule: g.schedule.kind(),
        connectivity: g.connectivity.conn(),
        alpha: args.alpha,
        workers: g.workers,
        radius_curves: !args.no_radius_curves,
    };
    let bundle = run_experiment_with_progress(&spec, |done, total| {
        eprintln!("cell {done}/{total} done");
    })?;
    let written = store::write_report(&dir, &bundle)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    if bundle.failures.is_empty() {
        Ok(0)
    } else {
        for f in &bundle.failures {
            eprintln!("failed cell p={} gamma={} seed={}: {}", f.p, f.gamma, f.seed, f.message);
        }
        eprintln!(
            "{} cell(s) failed; report holds the completed runs",
            bundle.failures.len()
        );
        Ok(2)
    }
}
