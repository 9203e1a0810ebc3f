//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad input (parse, version, generator or config
//! errors), 3 empty plant, 4 simulator failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detect::DetectionConfig;
use crate::error::{Error, Result};
use crate::geom::{PinholeCamera, RigidTransform};
use crate::inspect::{execute_plans, plan_plant, InspectionConfig, Mode, PlanFile, RolloutReport};
use crate::pipeline::twin_from_clusters;
use crate::ply::{read_ply, write_ply};
use crate::sim::{generate_plant, random_pose_error, GeneratorSpec, PlantFile, Simulator};
use crate::twin::{AnnotationKind, AnnotationRecord, DigitalTwin, Provenance};

#[derive(Debug, Parser)]
#[command(name = "phytotwin", version, about = "Plant digital twins and leaf inspection planning")]
pub struct Cli {
    /// Seed for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic plant, its ground truth and a labeled cloud.
    Synth {
        /// Leaf count range, `min..max` (inclusive) or a single number.
        #[arg(long)]
        leaves: Option<String>,
    },
    /// Build a twin and a metric report from a labeled PLY cloud.
    Twin {
        cloud: PathBuf,
        #[arg(long, default_value = "plant")]
        plant_id: String,
    },
    /// Plan an inspection for every leaf of a twin.
    Plan { twin: PathBuf, plant: PathBuf },
    /// Execute a plan file in the simulator.
    Simulate {
        plan: PathBuf,
        plant: PathBuf,
        /// Inject the default tool pose error (needs --seed).
        #[arg(long)]
        pose_error: bool,
    },
    /// Annotate a twin with rollout results and print the summary table.
    Report { twin: PathBuf, rollouts: PathBuf },
}

/// Everything a run can be configured with.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub inspection: InspectionConfig,
    pub generator: GeneratorSpec,
    pub turntable_step_deg: f64,
    pub pose_error_mm: f64,
    pub pose_error_deg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inspection: InspectionConfig::default(),
            generator: GeneratorSpec::default(),
            turntable_step_deg: 15.0,
            pose_error_mm: 5.0,
            pose_error_deg: 2.0,
        }
    }
}

/// Parses `a..b`, `a..=b` or a single count.
pub fn parse_range(text: &str) -> Result<[usize; 2]> {
    let bad = || Error::InvalidSpec(format!("bad range {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        Ok([num(a)?, num(b)?])
    } else {
        let n = num(text)?;
        Ok([n, n])
    }
}

/// Parses flat `key = value` lines. Blank lines and `#` comments are
/// skipped; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut cam = (0.75, 0.42, 800.0, 1600u32, 1200u32);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| Error::Parse { line: i + 1, message: m };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let f = || value.parse::<f64>().map_err(|_| err(format!("{key}: not a number: {value:?}")));
        let u = || value.parse::<u32>().map_err(|_| err(format!("{key}: not an integer: {value:?}")));
        let ic = &mut cfg.inspection;
        match key {
            "margin_deg" => ic.margin_deg = f()?,
            "tool_rotation_deg" => ic.tool_rotation_deg = f()?,
            "lift_fraction_min" => ic.lift_fraction[0] = f()?,
            "lift_fraction_max" => ic.lift_fraction[1] = f()?,
            "fraction_step" => ic.fraction_step = f()?,
            "min_leaf_length" => ic.min_leaf_length = f()?,
            "success_threshold" => ic.success_threshold = f()?,
            "ring_radius" => ic.ring_radius = f()?,
            "clearance" => ic.clearance = f()?,
            "waypoints" => ic.waypoints = u()? as usize,
            "push_pitch_deg" => ic.push_pitch_deg = f()?,
            "mode" => {
                ic.mode_override = match value {
                    "auto" => None,
                    "lift" => Some(Mode::Lift),
                    "push" => Some(Mode::Push),
                    _ => return Err(err(format!("mode must be auto, lift or push, got {value:?}"))),
                }
            }
            "blade_resolution" => ic.sim.blade_resolution = u()? as usize,
            "sample_subdivision" => ic.sim.sample_subdivision = u()? as usize,
            "camera_distance" => cam.0 = f()?,
            "camera_height" => cam.1 = f()?,
            "focal_px" => cam.2 = f()?,
            "image_width" => cam.3 = u()?,
            "image_height" => cam.4 = u()?,
            "turntable_step_deg" => cfg.turntable_step_deg = f()?,
            "pose_error_mm" => cfg.pose_error_mm = f()?,
            "pose_error_deg" => cfg.pose_error_deg = f()?,
            "leaves" => cfg.generator.leaf_count = parse_range(value)?,
            "leaf_length_min" => cfg.generator.leaf_length[0] = f()?,
            "leaf_length_max" => cfg.generator.leaf_length[1] = f()?,
            "sag_fraction_min" => cfg.generator.sag_fraction[0] = f()?,
            "sag_fraction_max" => cfg.generator.sag_fraction[1] = f()?,
            "points_per_leaf" => cfg.generator.points_per_leaf = u()? as usize,
            "pitch_deg_min" => cfg.generator.pitch_deg[0] = f()?,
            "pitch_deg_max" => cfg.generator.pitch_deg[1] = f()?,
            "upward_probability" => cfg.generator.upward_probability = f()?,
            _ => return Err(err(format!("unknown key {key:?}"))),
        }
    }
    cfg.inspection.camera = PinholeCamera::look_at(
        Point3::new(cam.0, 0.0, cam.1),
        Point3::new(0.0, 0.0, cam.1),
        Vector3::z(),
        cam.2,
        cam.3,
        cam.4,
    )
    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    cfg.inspection.validate()?;
    if !(cfg.turntable_step_deg > 0.0) {
        return Err(Error::InvalidConfig("turntable_step_deg must be positive".into()));
    }
    if !(cfg.pose_error_mm >= 0.0 && cfg.pose_error_deg >= 0.0) {
        return Err(Error::InvalidConfig("pose error magnitudes must be >= 0".into()));
    }
    Ok(cfg)
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(e: Error) -> Self {
        let code = match e {
            Error::EmptyPlant => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::input(e)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, text)?;
    Ok(p)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        Some(p) => parse_config(&read(p)?),
        None => Ok(RunConfig::default()),
    }
}

/// Runs one command; returns the lines to print on success.
pub fn run(cli: &Cli) -> std::result::Result<Vec<String>, CliError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth { leaves } => cmd_synth(cli, cfg, leaves.as_deref()),
        Command::Twin { cloud, plant_id } => cmd_twin(cli, cloud, plant_id),
        Command::Plan { twin, plant } => cmd_plan(cli, &cfg, twin, plant),
        Command::Simulate {
            plan,
            plant,
            pose_error,
        } => cmd_simulate(cli, &cfg, plan, plant, *pose_error),
        Command::Report { twin, rollouts } => cmd_report(cli, twin, rollouts),
    }
}

fn cmd_synth(cli: &Cli, mut cfg: RunConfig, leaves: Option<&str>) -> std::result::Result<Vec<String>, CliError> {
    let seed = cli
        .seed
        .ok_or_else(|| Error::InvalidConfig("synth requires --seed".into()))?;
    if let Some(r) = leaves {
        cfg.generator.leaf_count = parse_range(r)?;
    }
    let g = generate_plant(seed, &cfg.generator)?;
    let plant = write(&cli.out, "plant.json", &g.plant_file().to_json()?)?;
    let truth = write(&cli.out, "truth.json", &g.truth.to_json()?)?;
    let cloud = write(&cli.out, "cloud.ply", &write_ply(&g.clusters))?;
    Ok(vec![
        format!("generated {} leaves, {} clusters", g.plant.leaves.len(), g.clusters.len()),
        format!("wrote {}", plant.display()),
        format!("wrote {}", truth.display()),
        format!("wrote {}", cloud.display()),
    ])
}

fn cmd_twin(cli: &Cli, cloud: &Path, plant_id: &str) -> std::result::Result<Vec<String>, CliError> {
    let clusters = read_ply(&read(cloud)?)?;
    let provenance = Provenance {
        capture_manifest: None,
        source: Some(file_name(cloud)),
    };
    let build = twin_from_clusters(plant_id, &clusters, &DetectionConfig::default(), provenance)?;
    let twin = write(&cli.out, "twin.json", &build.twin.to_json()?)?;
    let report = write(&cli.out, "report.csv", &build.report.to_csv()?)?;
    Ok(vec![
        format!(
            "{} clusters, {} leaves, {} components",
            clusters.len(),
            build.twin.leaf_ids().len(),
            build.twin.len()
        ),
        format!("wrote {}", twin.display()),
        format!("wrote {}", report.display()),
    ])
}

fn load_sim(plant: &Path, cfg: &RunConfig) -> Result<Simulator> {
    let file = PlantFile::from_json(&read(plant)?)?;
    Simulator::new(file.plant, cfg.inspection.sim)
}

fn cmd_plan(cli: &Cli, cfg: &RunConfig, twin: &Path, plant: &Path) -> std::result::Result<Vec<String>, CliError> {
    let twin = DigitalTwin::from_json(&read(twin)?)?;
    let sim = load_sim(plant, cfg)?;
    let plans = plan_plant(&twin, &sim, &cfg.inspection).map_err(|e| CliError {
        code: 4,
        message: format!("planning failed: {e}"),
    })?;
    let skipped = plans.iter().filter(|p| p.is_skipped()).count();
    let file = PlanFile::new(plans, &cfg.inspection);
    let out = write(&cli.out, "plan.json", &file.to_json()?)?;
    Ok(vec![
        format!("planned {} leaves, {} skipped", file.plans.len() - skipped, skipped),
        format!("wrote {}", out.display()),
    ])
}

fn cmd_simulate(
    cli: &Cli,
    cfg: &RunConfig,
    plan: &Path,
    plant: &Path,
    pose_error: bool,
) -> std::result::Result<Vec<String>, CliError> {
    let file = PlanFile::from_json(&read(plan)?)?;
    let sim = load_sim(plant, cfg)?;
    let error = if pose_error {
        let seed = cli
            .seed
            .ok_or_else(|| Error::InvalidConfig("--pose-error requires --seed".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_pose_error(cfg.pose_error_mm * 1e-3, cfg.pose_error_deg.to_radians(), &mut rng)
    } else {
        RigidTransform::identity()
    };
    let report = execute_plans(&file, &sim, &error).map_err(|e| {
        let leaf = match e {
            Error::UnknownLeaf(i) => format!(" (leaf {i})"),
            _ => String::new(),
        };
        CliError {
            code: 4,
            message: format!("simulation failed{leaf}: {e}"),
        }
    })?;
    let out = write(&cli.out, "rollouts.json", &report.to_json()?)?;
    let mut lines: Vec<String> = report
        .records
        .iter()
        .map(|r| {
            format!(
                "leaf {:>3}  {:?}  {:?}  coverage {:.3}",
                r.leaf_id, r.mode, r.outcome, r.coverage
            )
        })
        .collect();
    lines.push(format!("wrote {}", out.display()));
    Ok(lines)
}

/// Summary counts in the layout of the lifted/pushed/observed table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Summary {
    pub lift_attempts: usize,
    pub lifted: usize,
    pub push_attempts: usize,
    pub pushed: usize,
    pub observed: usize,
    pub skipped: usize,
}

pub fn summarize(report: &RolloutReport) -> Summary {
    let mut s = Summary {
        skipped: report.skipped.len(),
        ..Summary::default()
    };
    for r in &report.records {
        let ok = r.outcome == crate::sim::Outcome::Manipulated;
        match r.mode {
            Mode::Lift => {
                s.lift_attempts += 1;
                s.lifted += ok as usize;
            }
            Mode::Push => {
                s.push_attempts += 1;
                s.pushed += ok as usize;
            }
        }
        s.observed += r.observed as usize;
    }
    s
}

pub fn summary_table(report: &RolloutReport) -> String {
    let s = summarize(report);
    let attempts = s.lift_attempts + s.push_attempts;
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:<8} {:<8} {:<8} {:<8}", "Leaves", "Skipped", "Lifted", "Pushed", "Observed");
    let _ = writeln!(
        out,
        "{:<8} {:<8} {:<8} {:<8} {:<8}",
        attempts + s.skipped,
        s.skipped,
        format!("{}/{}", s.lifted, s.lift_attempts),
        format!("{}/{}", s.pushed, s.push_attempts),
        format!("{}/{}", s.observed, attempts)
    );
    for (id, reason) in &report.skipped {
        let _ = writeln!(out, "leaf {id} skipped: {}", serde_json::to_string(reason).unwrap_or_default().trim_matches('"'));
    }
    out
}

fn cmd_report(cli: &Cli, twin: &Path, rollouts: &Path) -> std::result::Result<Vec<String>, CliError> {
    let mut twin = DigitalTwin::from_json(&read(twin)?)?;
    let report = RolloutReport::from_json(&read(rollouts)?)?;
    let mut clock = 0u64;
    let mut tick = || {
        clock += 1;
        clock
    };
    for id in twin.leaf_ids() {
        let c = twin.component(id).expect("leaf id").clone();
        let rec = AnnotationRecord::new(AnnotationKind::MetricReport, tick())
            .with_value("height_m", c.center.z)
            .with_value("area_m2", c.shape.area)
            .with_value("length_m", c.shape.length)
            .with_value("width_m", c.shape.width);
        twin = twin.attach_annotation(id, rec)?;
    }
    for r in &report.records {
        let rec = AnnotationRecord::new(AnnotationKind::PlanRecord, tick())
            .with_value("coverage", r.coverage)
            .with_label("mode", label(&r.mode))
            .with_label("outcome", label(&r.outcome))
            .with_label("observed", r.observed.to_string())
            .with_path(file_name(rollouts));
        twin = twin.attach_annotation(r.leaf_id, rec)?;
    }
    for (id, reason) in &report.skipped {
        let rec = AnnotationRecord::new(AnnotationKind::PlanRecord, tick())
            .with_label("skip_reason", label(reason))
            .with_path(file_name(rollouts));
        twin = twin.attach_annotation(*id, rec)?;
    }
    let rollout_dir = rollouts.parent().unwrap_or(Path::new("."));
    let twin_text = twin.export(rollout_dir)?;
    let out = write(&cli.out, "twin_annotated.json", &twin_text)?;
    let table = summary_table(&report);
    let summary = write(&cli.out, "summary.txt", &table)?;
    let mut lines: Vec<String> = table.lines().map(str::to_owned).collect();
    lines.push(format!("wrote {}", out.display()));
    lines.push(format!("wrote {}", summary.display()));
    Ok(lines)
}

fn label<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v)
        .unwrap_or_default()
        .trim_matches('"')
        .to_owned()
}

/// Parses arguments, runs, prints and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("8..12").unwrap(), [8, 12]);
        assert_eq!(parse_range("8..=12").unwrap(), [8, 12]);
        assert_eq!(parse_range("5").unwrap(), [5, 5]);
        assert!(parse_range("a..3").is_err());
    }

    #[test]
    fn config_keys() {
        let cfg = parse_config("# comment\nmargin_deg = 4\n\nmode=push\nleaves = 3..4\n").unwrap();
        assert_eq!(cfg.inspection.margin_deg, 4.0);
        assert_eq!(cfg.inspection.mode_override, Some(Mode::Push));
        assert_eq!(cfg.generator.leaf_count, [3, 4]);
        match parse_config("margin_deg = 4\nbogus = 1\n") {
            Err(Error::Parse { line: 2, message }) => assert!(message.contains("bogus")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("lift_fraction_min = 0\n"),
            Err(Error::InvalidConfig(_))
        ));
    }
}
