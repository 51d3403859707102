//! `cfsi` command-line harness.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 1 on runtime errors.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cfsi_core::bench::{diff_patterns, run_single, RunSpec, SweepSpec, RESULTS_HEADER};
use cfsi_core::patterns::write_schedule_csv;
use cfsi_core::{frequency_schedule, load_image, save_image, Error, Method, Mode};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cfsi", version, about = "Fourier single-pixel imaging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one acquisition + reconstruction and print its result row
    Simulate(SimulateArgs),
    /// Run a parameter sweep, writing results.csv and one PGM per cell
    Sweep(SweepArgs),
    /// Compare the complement of a dithered pattern with the dithered π-shift
    DiffPatterns(DiffArgs),
    /// Dump the frequency sampling schedule as CSV
    Schedule(ScheduleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Object image (PGM, maxval 255)
    #[arg(long)]
    object: PathBuf,
    #[arg(long, default_value = "cfsi")]
    method: Method,
    #[arg(long, default_value = "grayscale")]
    mode: Mode,
    /// Number of displayed patterns
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Constant flux added to every detector reading
    #[arg(long, default_value_t = 0.0)]
    background: f64,
    /// Where to write the reconstruction (PGM)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// key=value sweep file; flags below override its entries
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    object: Option<PathBuf>,
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long = "mode", value_delimiter = ',')]
    modes: Vec<Mode>,
    #[arg(long = "budget", value_delimiter = ',')]
    budgets: Vec<usize>,
    #[arg(long = "sigma", value_delimiter = ',')]
    sigmas: Vec<f64>,
    #[arg(long = "seed", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    background: Option<f64>,
}

#[derive(Args)]
struct DiffArgs {
    /// fx = fx_num / size
    #[arg(long)]
    fx_num: usize,
    /// fy = fy_num / size
    #[arg(long)]
    fy_num: usize,
    /// Phase in radians; accepts forms like `pi/2` or `3pi/2`
    #[arg(long, default_value = "pi/2", value_parser = parse_angle)]
    theta: f64,
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Directory for the five PGM panels
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Square grid side; shorthand for --width N --height N
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase().replace(['*', ' '], "");
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| format!("bad angle `{s}`"))?),
        None => (t.as_str(), 1.0),
    };
    let coeff = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some("-") => -1.0,
        Some(c) => c.parse::<f64>().map_err(|_| format!("bad angle `{s}`"))?,
        None => return Err(format!("bad angle `{s}`")),
    };
    Ok(coeff * std::f64::consts::PI / den)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::DiffPatterns(args) => {
            let (diff, paths) = diff_patterns(args.fx_num, args.fy_num, args.theta, args.size, &args.out)?;
            for p in &paths {
                eprintln!("wrote {}", p.display());
            }
            println!("differing_pixels={}", diff.differing_pixels);
            Ok(())
        }
        Command::Schedule(args) => schedule(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let object = load_image(&args.object)?;
    let spec = RunSpec::new(args.method, args.mode, args.budget)
        .with_noise(args.sigma, args.seed)
        .with_background(args.background);
    let (image, row) = run_single(&object, &spec)?;
    if let Some(out) = &args.out {
        save_image(&image, out)?;
    }
    println!("{RESULTS_HEADER}");
    println!("{}", row.to_csv_line());
    Ok(())
}

fn config_err(field: &str, message: &str) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            SweepSpec::parse_lenient(&text)?
        }
        None => SweepSpec::default(),
    };
    if let Some(o) = args.object {
        spec.object_path = o;
    }
    if let Some(o) = args.output_dir {
        spec.output_dir = o;
    }
    if !args.methods.is_empty() {
        spec.methods = args.methods;
    }
    if !args.modes.is_empty() {
        spec.modes = args.modes;
    }
    if !args.budgets.is_empty() {
        spec.budgets = args.budgets;
    }
    if !args.sigmas.is_empty() {
        spec.sigmas = args.sigmas;
    }
    if !args.seeds.is_empty() {
        spec.seeds = args.seeds;
    }
    if let Some(b) = args.background {
        spec.background_flux = b;
    }
    let summary = cfsi_core::bench::run_sweep(&spec)?;
    println!(
        "computed={} skipped={} results={}",
        summary.computed,
        summary.skipped,
        summary.csv_path.display()
    );
    Ok(())
}

fn schedule(args: ScheduleArgs) -> Result<(), Error> {
    let width = args
        .width
        .or(args.size)
        .ok_or_else(|| config_err("width", "give --size or --width/--height"))?;
    let height = args
        .height
        .or(args.size)
        .ok_or_else(|| config_err("height", "give --size or --width/--height"))?;
    let schedule = frequency_schedule(width, height)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            write_schedule_csv(BufWriter::new(file), &schedule).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_schedule_csv(&mut lock, &schedule)
                .and_then(|_| lock.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}
