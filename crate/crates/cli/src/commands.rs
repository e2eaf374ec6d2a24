use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rcstab_core::csv::{fmt_f64, matrix_to_csv};
use rcstab_core::dynamics::CandidateKind;
use rcstab_core::reservoir::{train, TrainOutcome, TrainingReport};
use rcstab_core::stability::{self, BindingSide, Threshold};
use rcstab_core::sweep::{self, Level, Runtime, SweepConfig};
use rcstab_core::{network, Regime, SpectralSummary, StabilityReport, TimeKind};

use crate::config::{self, AnalyzeConfig, BasinConfig, SignalConfig, SweepFileConfig, TrainConfig};
use crate::error::CliError;
use crate::manifest::{now_unix, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Options shared by every command.
pub struct Context {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub format: Format,
}

struct Outputs<'a> {
    dir: &'a Path,
    manifest: RunManifest,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path, manifest: RunManifest) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Outputs { dir, manifest })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("output serializes");
        text.push('\n');
        self.write(name, &text)
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.manifest.finished_unix = now_unix();
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn candidate_name(kind: CandidateKind) -> &'static str {
    match kind {
        CandidateKind::PlusC => "+c",
        CandidateKind::MinusC => "-c",
        CandidateKind::Origin => "origin",
        CandidateKind::Interior => "interior",
    }
}

#[derive(Serialize)]
struct FixedPointSummary {
    q_star: Vec<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct AnalysisOutput<'a> {
    dynamics: &'a rcstab_core::NodalDynamics,
    time_kind: TimeKind,
    m: usize,
    report: &'a StabilityReport,
    alpha_max: f64,
    spectral: Option<&'a SpectralSummary>,
    fixed_point: Option<FixedPointSummary>,
    linearly_stable: bool,
}

fn print_report(report: &StabilityReport) {
    println!("regime: {}", report.regime.as_str());
    println!("c_max: {}", fmt_fixed(report.c_max));
    match report.threshold {
        Threshold::Continuous { neg_alpha_max } => {
            println!("threshold: -alpha_max = {}", fmt_fixed(neg_alpha_max));
            println!("K*(c_max): {}", fmt_fixed(report.kstar_at_cmax));
        }
        Threshold::Discrete { rho_minus, rho_plus } => {
            println!("threshold: rho- = {}, rho+ = {}", fmt_fixed(rho_minus), fmt_fixed(rho_plus));
            if let (Some(lo), Some(hi)) = (report.k_minus_at_cmax, report.k_plus_at_cmax) {
                println!("K-*(c_max): {}", fmt_fixed(lo));
                println!("K+*(c_max): {}", fmt_fixed(hi));
            }
            let side = match report.binding_side {
                BindingSide::Upper => "upper",
                BindingSide::Lower => "lower",
                BindingSide::NotApplicable => "none",
            };
            println!("binding side: {side}");
        }
    }
    if let Some(kind) = report.binding_candidate {
        println!("binding candidate: {}", candidate_name(kind));
    }
}

fn fmt_fixed(x: f64) -> String {
    // Adding zero folds -0.0 into 0.0.
    if x.is_finite() { format!("{:.6}", x + 0.0) } else { fmt_f64(x) }
}

pub fn analyze(ctx: &Context) -> Result<(), CliError> {
    let started = now_unix();
    let mut cfg: AnalyzeConfig = config::parse(&read_config(&ctx.config)?)?;
    cfg.topology.resolve(ctx.seed)?;
    let net = cfg.topology.build()?;
    let time_kind = cfg.runtime.time_kind;
    let analysis = stability::analyze(&net, &cfg.dynamics, time_kind)?;
    let linearly_stable = stability::linear_stability(&net, &cfg.dynamics, time_kind)?;
    let fixed_point = match &analysis.shifted {
        Some(s) => Some(FixedPointSummary { q_star: s.q_star.as_slice().to_vec(), residual: s.residual(&net)? }),
        None => None,
    };
    print_report(&analysis.report);

    let seeds = cfg.topology.seed().into_iter().collect();
    let mut out = Outputs::new(&ctx.out, RunManifest::new("analyze", &cfg, seeds, started))?;
    out.write_json(
        "analysis.json",
        &AnalysisOutput {
            dynamics: &cfg.dynamics,
            time_kind,
            m: net.m(),
            report: &analysis.report,
            alpha_max: analysis.alpha_max,
            spectral: analysis.spectral.as_ref(),
            fixed_point,
            linearly_stable,
        },
    )?;
    out.finish()
}

pub fn train_cmd(ctx: &Context, dump_omega: bool) -> Result<(), CliError> {
    let started = now_unix();
    let mut cfg: TrainConfig = config::parse(&read_config(&ctx.config)?)?;
    cfg.topology.resolve(ctx.seed)?;
    let net = cfg.topology.build()?;
    let rt = &cfg.runtime;
    let pair = cfg.signal.signal_pair(rt.transient + rt.n_keep)?;
    let outcome = train(&net, &cfg.dynamics, rt.time_kind, &pair, rt.transient, rt.n_keep)?;
    match &outcome {
        TrainOutcome::Trained(t) => println!("delta_rc: {}", fmt_fixed(t.delta_rc)),
        TrainOutcome::Diverged { step } => println!("status: diverged at step {step}"),
    }

    let seeds = cfg.topology.seed().into_iter().collect();
    let mut out = Outputs::new(&ctx.out, RunManifest::new("train", &cfg, seeds, started))?;
    out.write_json("training.json", &TrainingReport::new(&outcome, &net, &cfg.dynamics, rt.time_kind))?;
    if let (true, TrainOutcome::Trained(t)) = (dump_omega, &outcome) {
        out.write("omega.csv", &matrix_to_csv(&t.omega))?;
    }
    out.finish()
}

fn level_name(level: &Level) -> String {
    match level {
        Level::Global => "boundary_global".into(),
        Level::CValue(c) => format!("boundary_c{c}"),
    }
}

pub fn sweep_cmd(ctx: &Context) -> Result<(), CliError> {
    let started = now_unix();
    let mut cfg: SweepFileConfig = config::parse(&read_config(&ctx.config)?)?;
    if cfg.topology.adjacency.is_some() || cfg.topology.input.is_some() {
        return Err(CliError::Config("sweep: topology must be generative (`m`, `seed`), not an explicit matrix".into()));
    }
    cfg.topology.resolve(None)?;
    if let Some(s) = ctx.seed {
        cfg.sweep.base_seed = Some(s);
    }
    let base_seed = *cfg.sweep.base_seed.get_or_insert(cfg.topology.seed().unwrap_or(0));
    let core = SweepConfig {
        time_kind: cfg.runtime.time_kind,
        dynamics_template: cfg.dynamics.clone(),
        axis_x: cfg.sweep.axis_x,
        axis_y: cfg.sweep.axis_y,
        grid: cfg.sweep.grid.clone(),
        m: cfg.topology.m.unwrap_or(config::DEFAULT_M),
        n_realizations: cfg.sweep.n_realizations,
        base_seed,
        network: cfg.topology.options(),
        task: cfg.signal.clone(),
        runtime: Runtime { transient: cfg.runtime.transient, n_keep: cfg.runtime.n_keep },
        train: cfg.sweep.train,
    };
    let records = sweep::run_sweep(&core)?;
    let count = |r: Regime| records.iter().filter(|x| x.regime == Some(r)).count();
    println!(
        "cells: {} (globally_stable {}, finite_region {}, unstable {}, error {}), diverged: {}",
        records.len(),
        count(Regime::GloballyStable),
        count(Regime::FiniteRegion),
        count(Regime::Unstable),
        records.iter().filter(|r| r.error.is_some()).count(),
        records.iter().filter(|r| r.diverged).count()
    );

    let seeds = (0..core.n_realizations).map(|r| core.realization_seed(r)).collect();
    let mut out = Outputs::new(&ctx.out, RunManifest::new("sweep", &cfg, seeds, started))?;
    match ctx.format {
        Format::Csv => out.write("records.csv", &sweep::records_to_csv(&records))?,
        Format::Json => out.write_json("records.json", &records)?,
    }
    if !cfg.sweep.boundaries.is_empty() {
        let net = network::construct_adjacency(core.m, core.realization_seed(0), &core.network)?;
        for level in &cfg.sweep.boundaries {
            let curve = sweep::boundary_curve(&core, &net, *level)?;
            if !curve.multi_crossing.is_empty() {
                eprintln!("{}: multiple crossings at x = {:?}", level_name(level), curve.multi_crossing);
            }
            match ctx.format {
                Format::Csv => out.write(&format!("{}.csv", level_name(level)), &sweep::boundary_to_csv(&curve))?,
                Format::Json => out.write_json(&format!("{}.json", level_name(level)), &curve)?,
            }
        }
    }
    if let Some(axis) = cfg.sweep.group_by {
        let stats = sweep::realization_stats(&records, axis);
        match ctx.format {
            Format::Csv => out.write("stats.csv", &sweep::stats_to_csv(&stats))?,
            Format::Json => out.write_json("stats.json", &stats)?,
        }
    }
    out.finish()
}

#[derive(Serialize)]
struct VerifyOutput {
    radius: f64,
    samples: usize,
    seed: u64,
    converged_fraction: f64,
}

#[derive(Serialize)]
struct BasinSummary {
    resolution: usize,
    converged_fraction: f64,
    report: Option<StabilityReport>,
    verify: Option<VerifyOutput>,
}

pub fn basin_cmd(ctx: &Context) -> Result<(), CliError> {
    let started = now_unix();
    let mut cfg: BasinConfig = config::parse(&read_config(&ctx.config)?)?;
    cfg.topology.resolve(ctx.seed)?;
    if let (Some(s), Some(v)) = (ctx.seed, cfg.basin.verify.as_mut()) {
        v.seed = Some(s);
    }
    let net = cfg.topology.build()?;
    let cells = sweep::basin_map(&net, &cfg.dynamics, cfg.basin.window, cfg.basin.resolution)?;
    let fraction = cells.iter().filter(|c| c.converged).count() as f64 / cells.len() as f64;
    let report = stability::cmax_continuous(&cfg.dynamics, network::alpha_max(net.adjacency())?).ok();
    let verify = match &cfg.basin.verify {
        Some(v) => {
            let seed = v.seed.unwrap_or(0);
            let f = stability::basin_verify(&net, &cfg.dynamics, v.radius, v.samples, seed)?;
            Some(VerifyOutput { radius: v.radius, samples: v.samples, seed, converged_fraction: f })
        }
        None => None,
    };
    println!("converged fraction of window: {}", fmt_fixed(fraction));
    if let Some(r) = &report {
        println!("certified c_max: {}", fmt_fixed(r.c_max));
    }
    if let Some(v) = &verify {
        println!("ball of radius {}: converged fraction {}", fmt_fixed(v.radius), fmt_fixed(v.converged_fraction));
    }

    let mut seeds: Vec<u64> = cfg.topology.seed().into_iter().collect();
    seeds.extend(verify.as_ref().map(|v| v.seed));
    let mut out = Outputs::new(&ctx.out, RunManifest::new("basin", &cfg, seeds, started))?;
    match ctx.format {
        Format::Csv => out.write("basin.csv", &sweep::basin_to_csv(&cells))?,
        Format::Json => out.write_json("basin.json", &cells)?,
    }
    out.write_json(
        "basin_summary.json",
        &BasinSummary { resolution: cfg.basin.resolution, converged_fraction: fraction, report, verify },
    )?;
    out.finish()
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    dt: f64,
    components: &'a [String],
    samples: &'a [Vec<f64>],
}

pub fn signal_cmd(ctx: &Context) -> Result<(), CliError> {
    let started = now_unix();
    let cfg: SignalConfig = config::parse(&read_config(&ctx.config)?)?;
    let n = cfg.runtime.transient + cfg.runtime.n_keep;
    let traj = cfg.signal.trajectory(n)?;
    println!("samples: {n}");
    let mut out = Outputs::new(&ctx.out, RunManifest::new("signal", &cfg, Vec::new(), started))?;
    match ctx.format {
        Format::Csv => out.write("trajectory.csv", &traj.to_csv())?,
        Format::Json => out.write_json(
            "trajectory.json",
            &TrajectoryJson { dt: traj.dt(), components: traj.component_names(), samples: traj.samples() },
        )?,
    }
    out.finish()
}
