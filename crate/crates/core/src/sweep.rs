//! Parameter-grid experiments: per-cell stability classification and
//! training error over adjacency realizations, stability boundary curves,
//! box-plot statistics and 2-node basin maps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::fmt_f64;
use crate::dynamics::NodalDynamics;
use crate::error::{Error, Result};
use crate::network::{construct_adjacency, NetworkOptions, ReservoirNetwork};
use crate::reservoir::{self, DEFAULT_N_KEEP, DEFAULT_TRANSIENT};
use crate::signals::{SignalPair, SignalSource};
use crate::stability::{
    classify, kstar_continuous, kstar_discrete, kstar_nonhomogeneous, fixed_point, serialize_extended, Regime,
    Topology, UnforcedFlow,
};
use crate::TimeKind;

/// Axis grid; each axis is `steps` evenly spaced values including both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub x_steps: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub y_steps: usize,
}

fn axis_values(min: f64, max: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![min];
    }
    let span = max - min;
    (0..steps)
        .map(|i| if i + 1 == steps { max } else { min + span * i as f64 / (steps - 1) as f64 })
        .collect()
}

impl Grid {
    pub fn xs(&self) -> Vec<f64> {
        axis_values(self.x_min, self.x_max, self.x_steps)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis_values(self.y_min, self.y_max, self.y_steps)
    }

    fn validate(&self) -> Result<()> {
        for (name, lo, hi, steps) in [("x", self.x_min, self.x_max, self.x_steps), ("y", self.y_min, self.y_max, self.y_steps)] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] must be finite and ordered")));
            }
            // A single step pins the axis to a constant, which needs a degenerate range.
            let ok = steps >= 2 || (steps == 1 && lo == hi);
            if !ok {
                return Err(Error::Config(format!(
                    "{name} axis needs at least 2 steps (or 1 step with {name}_min = {name}_max), got {steps}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Runtime {
    #[serde(default = "default_transient")]
    pub transient: usize,
    #[serde(default = "default_n_keep")]
    pub n_keep: usize,
}

fn default_transient() -> usize {
    DEFAULT_TRANSIENT
}

fn default_n_keep() -> usize {
    DEFAULT_N_KEEP
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime { transient: DEFAULT_TRANSIENT, n_keep: DEFAULT_N_KEEP }
    }
}

/// A two-parameter grid experiment over an ensemble of random networks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub time_kind: TimeKind,
    pub dynamics_template: NodalDynamics,
    /// 1-based parameter index varied along x.
    pub axis_x: usize,
    /// 1-based parameter index varied along y.
    pub axis_y: usize,
    pub grid: Grid,
    pub m: usize,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub network: NetworkOptions,
    pub task: SignalSource,
    pub runtime: Runtime,
    /// When false only the stability classification is computed.
    pub train: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.axis_x == 0 || self.axis_y == 0 {
            return Err(Error::Config("parameter axes are 1-based".into()));
        }
        if self.axis_x == self.axis_y {
            return Err(Error::Config(format!("axis_x and axis_y both select p{}", self.axis_x)));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(Error::Config(format!("network size m must be at least 2, got {}", self.m)));
        }
        if self.train && self.runtime.n_keep == 0 {
            return Err(Error::Config("n_keep must be positive".into()));
        }
        self.grid.validate()
    }

    pub fn realization_seed(&self, realization: usize) -> u64 {
        self.base_seed.wrapping_add(realization as u64)
    }

    /// Template with both axis parameters set.
    pub fn dynamics_at(&self, x: f64, y: f64) -> Result<NodalDynamics> {
        self.dynamics_template.with_param(self.axis_x, x)?.with_param(self.axis_y, y)
    }
}

/// Result of one grid cell for one realization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub x: f64,
    pub y: f64,
    pub realization: usize,
    /// `None` when the cell failed; see `error`.
    pub regime: Option<Regime>,
    #[serde(serialize_with = "serialize_extended")]
    pub c_max: f64,
    /// `None` for diverged, failed or classification-only cells.
    pub delta_rc: Option<f64>,
    pub diverged: bool,
    pub seed: u64,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(x: f64, y: f64, realization: usize, seed: u64, e: &Error) -> Self {
        SweepRecord { x, y, realization, regime: None, c_max: f64::NAN, delta_rc: None, diverged: false, seed, error: Some(e.to_string()) }
    }
}

fn run_cell(
    config: &SweepConfig,
    network: &ReservoirNetwork,
    topology: &Topology,
    pair: Option<&SignalPair>,
    x: f64,
    y: f64,
) -> Result<(Regime, f64, Option<f64>, bool)> {
    let f = config.dynamics_at(x, y)?;
    let (report, _) = classify(network, &f, topology)?;
    let Some(pair) = pair else {
        return Ok((report.regime, report.c_max, None, false));
    };
    let outcome = reservoir::train(network, &f, config.time_kind, pair, config.runtime.transient, config.runtime.n_keep)?;
    Ok((report.regime, report.c_max, outcome.delta_rc(), outcome.diverged()))
}

/// Every grid cell × realization, ordered x-major, then y, then realization.
/// Per-cell failures are recorded in the cell and never abort the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let pair = if config.train {
        Some(config.task.signal_pair(config.runtime.transient + config.runtime.n_keep)?)
    } else {
        None
    };
    let ensembles: Vec<Result<(ReservoirNetwork, Topology)>> = (0..config.n_realizations)
        .into_par_iter()
        .map(|r| {
            let net = construct_adjacency(config.m, config.realization_seed(r), &config.network)?;
            let topo = Topology::of(&net, config.time_kind)?;
            Ok((net, topo))
        })
        .collect();
    let (xs, ys) = (config.grid.xs(), config.grid.ys());
    let items: Vec<(usize, usize, usize)> = (0..xs.len())
        .flat_map(|i| (0..ys.len()).flat_map(move |j| (0..config.n_realizations).map(move |r| (i, j, r))))
        .collect();
    let mut records: Vec<((usize, usize, usize), SweepRecord)> = items
        .into_par_iter()
        .map(|(i, j, r)| {
            let (x, y, seed) = (xs[i], ys[j], config.realization_seed(r));
            let record = match &ensembles[r] {
                Err(e) => SweepRecord::failed(x, y, r, seed, &e),
                Ok((net, topo)) => match run_cell(config, net, topo, pair.as_ref(), x, y) {
                    Ok((regime, c_max, delta_rc, diverged)) => {
                        SweepRecord { x, y, realization: r, regime: Some(regime), c_max, delta_rc, diverged, seed, error: None }
                    }
                    Err(e) => SweepRecord::failed(x, y, r, seed, &e),
                },
            };
            ((i, j, r), record)
        })
        .collect();
    records.sort_by_key(|(key, _)| *key);
    Ok(records.into_iter().map(|(_, rec)| rec).collect())
}

pub const SWEEP_CSV_HEADER: &str = "x,y,realization,regime,c_max,delta_rc,diverged,seed";

pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in records {
        let regime = r.regime.map_or("error", Regime::as_str);
        let delta = r.delta_rc.map_or_else(|| fmt_f64(f64::NAN), fmt_f64);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.x),
            fmt_f64(r.y),
            r.realization,
            regime,
            fmt_f64(r.c_max),
            delta,
            r.diverged,
            r.seed
        ));
    }
    out
}

/// Which threshold crossing a boundary curve traces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "level", content = "c")]
pub enum Level {
    /// Edge of the globally stable region.
    Global,
    /// Where `c_max` equals the given radius.
    CValue(f64),
}

/// Signed distance from certification: `≤ 0` means certified.
///
/// Continuous: `sup K* + α_max`, or `K*(c) + α_max` for a level curve.
/// Discrete: the larger violation of `K⁺* ≤ ρ⁺` and `K⁻* ≥ ρ⁻`.
pub fn stability_margin(network: &ReservoirNetwork, f: &NodalDynamics, topology: &Topology, level: Level) -> Result<f64> {
    match (topology, level) {
        (Topology::Continuous { alpha_max }, Level::Global) => {
            let sup = f.ratio_supremum()?.ok_or_else(|| Error::Unsupported(format!("sup K* of {}", f.kind_name())))?;
            Ok(sup + alpha_max)
        }
        (Topology::Continuous { alpha_max }, Level::CValue(c)) => Ok(kstar_continuous(f, c)? + alpha_max),
        (Topology::Discrete(s), level) => {
            let (lo, hi) = if f.fixes_origin() {
                match level {
                    Level::Global => (
                        f.ratio_infimum()?.unwrap_or(f64::NEG_INFINITY),
                        f.ratio_supremum()?.unwrap_or(f64::INFINITY),
                    ),
                    Level::CValue(c) => kstar_discrete(f, c)?,
                }
            } else {
                let shifted = fixed_point(network, f)?;
                match level {
                    Level::Global => shifted.ratio_limits()?,
                    Level::CValue(c) => kstar_nonhomogeneous(&shifted, c)?,
                }
            };
            Ok((hi - s.rho_plus).max(s.rho_minus - lo))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryCurve {
    pub points: Vec<(f64, f64)>,
    /// x values whose y scan changed sign more than once; the first crossing is kept.
    pub multi_crossing: Vec<f64>,
}

const BOUNDARY_TOL: f64 = 1e-10;

/// For each x grid value, the y where the margin first changes sign along the
/// y grid, refined by bisection. Columns without a crossing are omitted.
pub fn boundary_curve(config: &SweepConfig, network: &ReservoirNetwork, level: Level) -> Result<BoundaryCurve> {
    config.grid.validate()?;
    if let Level::CValue(c) = level {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("level radius must be positive and finite, got {c}")));
        }
    }
    let topology = Topology::of(network, config.time_kind)?;
    let ys = config.grid.ys();
    let columns: Vec<Option<((f64, f64), bool)>> = config
        .grid
        .xs()
        .into_par_iter()
        .map(|x| {
            let margin = |y: f64| -> Option<f64> {
                let f = config.dynamics_at(x, y).ok()?;
                stability_margin(network, &f, &topology, level).ok().filter(|v| !v.is_nan())
            };
            let stable = |v: f64| v <= 0.0;
            let samples: Vec<(f64, Option<f64>)> = ys.iter().map(|&y| (y, margin(y))).collect();
            let mut crossings = Vec::new();
            for pair in samples.windows(2) {
                if let ((ya, Some(va)), (yb, Some(vb))) = (pair[0], pair[1]) {
                    if stable(va) != stable(vb) {
                        crossings.push((ya, yb, stable(va)));
                    }
                }
            }
            let &(mut lo, mut hi, lo_stable) = crossings.first()?;
            while hi - lo > BOUNDARY_TOL * hi.abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                match margin(mid) {
                    Some(v) if stable(v) == lo_stable => lo = mid,
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            Some(((x, 0.5 * (lo + hi)), crossings.len() > 1))
        })
        .collect();
    let mut curve = BoundaryCurve { points: Vec::new(), multi_crossing: Vec::new() };
    for (point, multi) in columns.into_iter().flatten() {
        if multi {
            curve.multi_crossing.push(point.0);
        }
        curve.points.push(point);
    }
    Ok(curve)
}

pub fn boundary_to_csv(curve: &BoundaryCurve) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in &curve.points {
        out.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*y)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAxis {
    X,
    Y,
}

/// Five-number summary of `Δ_RC` at one axis value. Quantile fields are
/// `None` when every run in the group diverged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxStats {
    pub axis_value: f64,
    pub n: usize,
    pub n_diverged: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub whisker_low: Option<f64>,
    pub whisker_high: Option<f64>,
}

/// Linear-interpolation quantile of sorted data (`h = (n-1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-axis-value box statistics over realizations; whiskers reach the most
/// extreme values within 1.5 IQR of the quartiles. Failed cells are ignored.
pub fn realization_stats(records: &[SweepRecord], group_by: GroupAxis) -> Vec<BoxStats> {
    let mut groups: BTreeMap<u64, (f64, Vec<f64>, usize)> = BTreeMap::new();
    // Order-preserving key for finite floats.
    let key = |v: f64| {
        let b = v.to_bits();
        if v.is_sign_negative() { !b } else { b | (1 << 63) }
    };
    for r in records.iter().filter(|r| r.error.is_none()) {
        let v = match group_by {
            GroupAxis::X => r.x,
            GroupAxis::Y => r.y,
        };
        let entry = groups.entry(key(v)).or_insert((v, Vec::new(), 0));
        if r.diverged {
            entry.2 += 1;
        } else if let Some(d) = r.delta_rc.filter(|d| d.is_finite()) {
            entry.1.push(d);
        }
    }
    groups
        .into_values()
        .filter(|(_, vals, nd)| !vals.is_empty() || *nd > 0)
        .map(|(axis_value, mut vals, n_diverged)| {
            let n = vals.len() + n_diverged;
            if vals.is_empty() {
                return BoxStats { axis_value, n, n_diverged, median: None, q1: None, q3: None, whisker_low: None, whisker_high: None };
            }
            vals.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&vals, 0.25);
            let q3 = quantile_sorted(&vals, 0.75);
            let iqr = q3 - q1;
            let low = vals.iter().copied().find(|v| *v >= q1 - 1.5 * iqr).unwrap_or(q1);
            let high = vals.iter().rev().copied().find(|v| *v <= q3 + 1.5 * iqr).unwrap_or(q3);
            BoxStats {
                axis_value,
                n,
                n_diverged,
                median: Some(quantile_sorted(&vals, 0.5)),
                q1: Some(q1),
                q3: Some(q3),
                whisker_low: Some(low),
                whisker_high: Some(high),
            }
        })
        .collect()
}

pub fn stats_to_csv(stats: &[BoxStats]) -> String {
    let opt = |v: Option<f64>| fmt_f64(v.unwrap_or(f64::NAN));
    let mut out = String::from("axis_value,n,n_diverged,median,q1,q3,whisker_low,whisker_high\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(s.axis_value),
            s.n,
            s.n_diverged,
            opt(s.median),
            opt(s.q1),
            opt(s.q3),
            opt(s.whisker_low),
            opt(s.whisker_high)
        ));
    }
    out
}

/// Rectangle of initial conditions for a 2-node basin map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinWindow {
    pub r1_min: f64,
    pub r1_max: f64,
    pub r2_min: f64,
    pub r2_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BasinCell {
    pub r1: f64,
    pub r2: f64,
    pub converged: bool,
}

/// Convergence of the unforced continuous 2-node reservoir from each point of a
/// `resolution × resolution` grid, ordered r1-major.
pub fn basin_map(network: &ReservoirNetwork, f: &NodalDynamics, window: BasinWindow, resolution: usize) -> Result<Vec<BasinCell>> {
    if network.m() != 2 {
        return Err(Error::Dimension(format!("basin maps need a 2-node reservoir, got {} nodes", network.m())));
    }
    if resolution < 2 {
        return Err(Error::Config(format!("basin resolution must be at least 2, got {resolution}")));
    }
    let ranges = [(window.r1_min, window.r1_max), (window.r2_min, window.r2_max)];
    if ranges.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi) {
        return Err(Error::Config("basin window bounds must be finite and ordered".into()));
    }
    let flow = UnforcedFlow::new(network, f)?;
    let r1s = axis_values(window.r1_min, window.r1_max, resolution);
    let r2s = axis_values(window.r2_min, window.r2_max, resolution);
    Ok(r1s
        .par_iter()
        .flat_map_iter(|&r1| {
            let flow = &flow;
            r2s.iter().map(move |&r2| BasinCell { r1, r2, converged: flow.converges(&[r1, r2]) })
        })
        .collect())
}

pub fn basin_to_csv(cells: &[BasinCell]) -> String {
    let mut out = String::from("r1,r2,converged\n");
    for c in cells {
        out.push_str(&format!("{},{},{}\n", fmt_f64(c.r1), fmt_f64(c.r2), c.converged));
    }
    out
}
