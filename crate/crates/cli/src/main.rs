//! `evermap`: simulate tail-sensor surveys, map sources, plot profiles and
//! check whether a robot can get through a course.
//!
//! Exit codes: 0 success, 2 bad input (usage, parse or I/O), 3 route not
//! traversable, 4 nothing to map (sensor never entered the pipe).

use std::env;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use evermap::acquisition::{build_profile, Profile, ProfileError, ProfileOptions, Trace, PROFILE_HEADER};
use evermap::feasibility::{can_traverse, RobotConfig};
use evermap::mapping::{find_peaks, localize_detailed, FitError, LocalizeOptions, MapError};
use evermap::plot::render_svg;
use evermap::report;
use evermap::route::PipeRoute;
use evermap::sensor::{Scene, SourcesConfig};
use evermap::sim::{simulate, CrankSchedule, RunIds, SimParams, DEFAULT_CRANK_SPEED, DEFAULT_SAMPLE_RATE};

const CONFIG_DIR_VAR: &str = "EVERMAP_CONFIG_DIR";

#[derive(Parser)]
#[command(
    name = "evermap",
    version,
    about = "Eversion-robot pipe survey simulator and source mapper"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an encoder + sensor trace for a constant-crank run.
    Simulate(SimulateArgs),
    /// Locate sources in a recorded trace.
    Map(MapArgs),
    /// Draw a trace or profile as SVG with detected peaks marked.
    Plot(PlotArgs),
    /// Report whether the robot can traverse the route.
    Feasibility(FeasibilityArgs),
}

#[derive(Args)]
struct ConfigPaths {
    /// Route config (default: $EVERMAP_CONFIG_DIR/route.cfg)
    #[arg(long)]
    route: Option<PathBuf>,
    /// Robot config (default: $EVERMAP_CONFIG_DIR/robot.cfg)
    #[arg(long)]
    robot: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    paths: ConfigPaths,
    /// Sources config (default: $EVERMAP_CONFIG_DIR/sources.cfg)
    #[arg(long)]
    sources: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run every seed in `a..b` (end exclusive); `{seed}` in --out is replaced
    /// by the seed, otherwise it is appended to the file stem.
    #[arg(long, value_parser = parse_seed_range, conflicts_with = "seed")]
    seeds: Option<Range<u64>>,
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    sample_rate: f64,
    /// Tip speed, m/s.
    #[arg(long, default_value_t = DEFAULT_CRANK_SPEED)]
    crank_speed: f64,
    /// After full reach, retract back to this extension (m).
    #[arg(long)]
    retract_to: Option<f64>,
}

#[derive(Args)]
struct MapArgs {
    trace: PathBuf,
    #[command(flatten)]
    paths: ConfigPaths,
    /// Sources config; only its [sensor] section is used.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Output prefix: writes <out>.txt, <out>.kv and <out>.profile.csv.
    #[arg(long, default_value = "map")]
    out: PathBuf,
    #[arg(long, default_value_t = evermap::acquisition::DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    #[arg(long)]
    include_retract: bool,
    /// Largest number of sources considered.
    #[arg(long, default_value_t = 4)]
    kmax: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV or profile CSV.
    input: PathBuf,
    #[command(flatten)]
    paths: ConfigPaths,
    #[arg(long)]
    sources: Option<PathBuf>,
    #[arg(long, default_value = "profile.svg")]
    out: PathBuf,
    #[arg(long, default_value_t = evermap::acquisition::DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    #[arg(long)]
    include_retract: bool,
}

#[derive(Args)]
struct FeasibilityArgs {
    #[command(flatten)]
    paths: ConfigPaths,
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }

    fn infeasible(error: anyhow::Error) -> Self {
        Self { code: 3, error }
    }

    fn no_data(error: anyhow::Error) -> Self {
        Self { code: 4, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::input(error)
    }
}

type Outcome = Result<(), Failure>;

fn parse_seed_range(text: &str) -> Result<Range<u64>, String> {
    let (a, b) = text.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("end: {e}"))?;
    if b <= a {
        return Err("empty seed range".into());
    }
    Ok(a..b)
}

fn resolve(explicit: &Option<PathBuf>, default_name: &str, flag: &str) -> anyhow::Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    match env::var_os(CONFIG_DIR_VAR) {
        Some(dir) => Ok(Path::new(&dir).join(default_name)),
        None => Err(anyhow!("--{flag} not given and {CONFIG_DIR_VAR} is not set")),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_route(paths: &ConfigPaths) -> anyhow::Result<(PipeRoute, PathBuf)> {
    let path = resolve(&paths.route, "route.cfg", "route")?;
    let route = PipeRoute::from_config(&read(&path)?).with_context(|| format!("{}", path.display()))?;
    Ok((route, path))
}

fn load_robot(paths: &ConfigPaths) -> anyhow::Result<(RobotConfig, PathBuf)> {
    let path = resolve(&paths.robot, "robot.cfg", "robot")?;
    let robot = RobotConfig::from_config(&read(&path)?).with_context(|| format!("{}", path.display()))?;
    Ok((robot, path))
}

fn load_sources(explicit: &Option<PathBuf>) -> anyhow::Result<(SourcesConfig, PathBuf)> {
    let path = resolve(explicit, "sources.cfg", "sources")?;
    let cfg = SourcesConfig::from_config(&read(&path)?).with_context(|| format!("{}", path.display()))?;
    Ok((cfg, path))
}

fn load_trace(path: &Path) -> anyhow::Result<Trace> {
    Trace::parse_csv(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn seed_path(template: &Path, seed: u64) -> PathBuf {
    let text = template.to_string_lossy();
    if text.contains("{seed}") {
        return PathBuf::from(text.replace("{seed}", &seed.to_string()));
    }
    let mut name = format!("{}_{seed}", stem(template));
    if let Some(ext) = template.extension() {
        name.push('.');
        name.push_str(&ext.to_string_lossy());
    }
    template.with_file_name(name)
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome {
    let (route, route_path) = load_route(&args.paths)?;
    let (robot, robot_path) = load_robot(&args.paths)?;
    let (sources, sources_path) = load_sources(&args.sources)?;
    let scene = Scene::new(route, sources.sources, sources.sensor).context("invalid scene")?;
    let schedule = match args.retract_to {
        Some(back) => CrankSchedule::extend_retract(args.crank_speed, back),
        None => CrankSchedule::constant(args.crank_speed),
    };
    let ids = RunIds {
        robot: stem(&robot_path),
        drum: format!("{}.drum", stem(&robot_path)),
        route: stem(&route_path),
        sources: stem(&sources_path),
    };
    let runs: Vec<(u64, PathBuf)> = match &args.seeds {
        Some(range) => range.clone().map(|s| (s, seed_path(&args.out, s))).collect(),
        None => vec![(args.seed, args.out.clone())],
    };
    let results: Vec<Result<Option<String>, anyhow::Error>> = runs
        .par_iter()
        .map(|(seed, out)| {
            let params = SimParams {
                sample_rate_hz: args.sample_rate,
                schedule: schedule.clone(),
                seed: *seed,
            };
            let outcome = simulate(&scene, &robot.profile, &robot.drum, &robot.rules, &params, &ids)?;
            write(out, &outcome.trace.to_csv())?;
            Ok(outcome.blocker.map(|b| format!("{}: {b}", out.display())))
        })
        .collect();
    let mut blocked = Vec::new();
    for (r, (_, out)) in results.into_iter().zip(&runs) {
        match r {
            Ok(Some(msg)) => blocked.push(msg),
            Ok(None) => println!("wrote {}", out.display()),
            Err(e) => return Err(Failure::input(e)),
        }
    }
    if blocked.is_empty() {
        Ok(())
    } else {
        Err(Failure::infeasible(anyhow!(
            "route not traversable; trace written up to the blocker\n{}",
            blocked.join("\n")
        )))
    }
}

fn no_data_or_input(e: MapError) -> Failure {
    match e {
        MapError::Profile(ProfileError::NoInPipeSamples)
        | MapError::Fit(FitError::EmptyProfile)
        | MapError::Fit(FitError::IllPosed { .. }) => Failure::no_data(anyhow!(e)),
        other => Failure::input(anyhow!(other)),
    }
}

fn cmd_map(args: &MapArgs) -> Outcome {
    let trace = load_trace(&args.trace)?;
    let (route, _) = load_route(&args.paths)?;
    let (robot, _) = load_robot(&args.paths)?;
    let (sources, _) = load_sources(&args.sources)?;
    let opts = LocalizeOptions {
        bin_width: args.bin_width,
        include_retract: args.include_retract,
        kmax: args.kmax,
        ..LocalizeOptions::default()
    };
    let loc = localize_detailed(&trace, &robot.drum, &robot.profile, &route, &sources.sensor, &opts)
        .map_err(no_data_or_input)?;
    let text = report::text(&loc);
    let prefix = args.out.to_string_lossy();
    write(Path::new(&format!("{prefix}.txt")), &text)?;
    write(Path::new(&format!("{prefix}.kv")), &report::key_value(&loc))?;
    write(Path::new(&format!("{prefix}.profile.csv")), &loc.profile.to_csv())?;
    print!("{text}");
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Outcome {
    let text = read(&args.input)?;
    let is_profile = text.lines().any(|l| l == PROFILE_HEADER);
    let profile = if is_profile {
        Profile::parse_csv(&text).with_context(|| format!("{}", args.input.display()))?
    } else {
        let trace = Trace::parse_csv(&text).with_context(|| format!("{}", args.input.display()))?;
        let (robot, _) = load_robot(&args.paths)?;
        let raw = build_profile(
            &trace,
            &robot.drum,
            &robot.profile,
            &ProfileOptions {
                bin_width: args.bin_width,
                include_retract: args.include_retract,
            },
        )
        .map_err(|e| match e {
            ProfileError::NoInPipeSamples => Failure::no_data(anyhow!(e)),
            other => Failure::input(anyhow!(other)),
        })?;
        match &args.sources {
            Some(_) => raw.decoded(&load_sources(&args.sources)?.0.sensor),
            None => match env::var_os(CONFIG_DIR_VAR) {
                Some(_) => raw.decoded(&load_sources(&None)?.0.sensor),
                None => raw,
            },
        }
    };
    if profile.is_empty() {
        return Err(Failure::no_data(anyhow!("{}: profile is empty", args.input.display())));
    }
    let opts = LocalizeOptions {
        bin_width: profile.bin_width,
        ..LocalizeOptions::default()
    };
    let peaks = find_peaks(&profile, &opts).map_err(|e| Failure::input(anyhow!(e)))?;
    let title = args
        .input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let svg = render_svg(&profile, &peaks, &title).ok_or_else(|| Failure::no_data(anyhow!("profile is empty")))?;
    write(&args.out, &svg)?;
    println!("wrote {} ({} peaks)", args.out.display(), peaks.len());
    Ok(())
}

fn cmd_feasibility(args: &FeasibilityArgs) -> Outcome {
    let (route, _) = load_route(&args.paths)?;
    let (robot, _) = load_robot(&args.paths)?;
    let verdict = can_traverse(&robot.profile, &robot.rules, &route).context("cannot evaluate")?;
    match verdict.blocker {
        None => {
            println!(
                "feasible: {} robot can traverse the {:.3} m route",
                robot.profile.material,
                route.total_length()
            );
            Ok(())
        }
        Some(b) => {
            println!("infeasible: {b}");
            Err(Failure::infeasible(anyhow!(
                "{} robot cannot traverse the route",
                robot.profile.material
            )))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Map(a) => cmd_map(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Feasibility(a) => cmd_feasibility(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
