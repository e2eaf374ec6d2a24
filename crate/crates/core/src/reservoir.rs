//! Driven reservoir simulation, the regression matrix Ω, the minimum-norm
//! linear readout and the training error `Δ_RC = ⟨Ωk - g⟩ / ⟨g⟩`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::NodalDynamics;
use crate::error::{Error, Result};
use crate::integrate::Rk4;
use crate::network::ReservoirNetwork;
use crate::signals::{mean_std, SignalPair};
use crate::TimeKind;

/// A state with `‖r‖∞` above this is treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
pub const DEFAULT_TRANSIENT: usize = 2000;
pub const DEFAULT_N_KEEP: usize = 10_000;
/// Singular values below this fraction of the largest are treated as zero.
pub const SVD_CUTOFF: f64 = 1e-12;

/// Node states over time. Row `n` is the state after consuming input sample
/// `n`; on divergence the rows stop before the offending step.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveResult {
    pub states: DMatrix<f64>,
    pub diverged: bool,
    pub divergence_step: Option<usize>,
}

/// Row-compressed coupling matrix; the ensemble adjacency is half zeros.
struct Coupling {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Coupling {
    fn new(a: &DMatrix<f64>) -> Self {
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    cols.push(j);
                    vals.push(a[(i, j)]);
                }
            }
            row_start.push(cols.len());
        }
        Coupling { row_start, cols, vals }
    }

    #[inline]
    fn row_dot(&self, i: usize, r: &[f64]) -> f64 {
        let (lo, hi) = (self.row_start[i], self.row_start[i + 1]);
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&j, a)| a * r[j]).sum()
    }
}

fn blown_up(r: &[f64]) -> bool {
    r.iter().any(|v| !(v.abs() <= DIVERGENCE_THRESHOLD))
}

fn check_initial(network: &ReservoirNetwork, initial: &[f64]) -> Result<()> {
    if initial.len() != network.m() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries for a {}-node reservoir",
            initial.len(),
            network.m()
        )));
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial state must be finite".into()));
    }
    Ok(())
}

fn finish(rows: Vec<f64>, m: usize, divergence_step: Option<usize>) -> DriveResult {
    let n = rows.len() / m.max(1);
    DriveResult {
        states: DMatrix::from_row_slice(n, m, &rows),
        diverged: divergence_step.is_some(),
        divergence_step,
    }
}

/// Iterates `r(n+1) = f(r(n)) + A r(n) + w s(n)` once per input sample.
pub fn drive_discrete(network: &ReservoirNetwork, f: &NodalDynamics, s: &[f64], initial: &[f64]) -> Result<DriveResult> {
    check_initial(network, initial)?;
    let m = network.m();
    let coupling = Coupling::new(network.adjacency());
    let w = network.input().as_slice();
    let mut r = initial.to_vec();
    let mut next = vec![0.0; m];
    let mut rows = Vec::with_capacity(s.len() * m);
    for (n, &sn) in s.iter().enumerate() {
        for i in 0..m {
            next[i] = f.eval_unchecked(r[i]) + coupling.row_dot(i, &r) + w[i] * sn;
        }
        std::mem::swap(&mut r, &mut next);
        if blown_up(&r) {
            return Ok(finish(rows, m, Some(n)));
        }
        rows.extend_from_slice(&r);
    }
    Ok(finish(rows, m, None))
}

/// Integrates `r' = f(r) + A r + w s(t)` with one RK4 step of length `dt`
/// per sample, holding `s` constant over each step.
pub fn drive_continuous(
    network: &ReservoirNetwork,
    f: &NodalDynamics,
    s: &[f64],
    dt: f64,
    initial: &[f64],
) -> Result<DriveResult> {
    check_initial(network, initial)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("time step must be positive and finite, got {dt}")));
    }
    let m = network.m();
    let coupling = Coupling::new(network.adjacency());
    let w = network.input().as_slice();
    let mut rk = Rk4::new(m);
    let mut r = initial.to_vec();
    let mut rows = Vec::with_capacity(s.len() * m);
    for (n, &sn) in s.iter().enumerate() {
        rk.step(&mut r, n as f64 * dt, dt, |_, x, dx| {
            for i in 0..m {
                dx[i] = f.eval_unchecked(x[i]) + coupling.row_dot(i, x) + w[i] * sn;
            }
        });
        if blown_up(&r) {
            return Ok(finish(rows, m, Some(n)));
        }
        rows.extend_from_slice(&r);
    }
    Ok(finish(rows, m, None))
}

pub fn drive(
    network: &ReservoirNetwork,
    f: &NodalDynamics,
    time_kind: TimeKind,
    s: &[f64],
    dt: f64,
    initial: &[f64],
) -> Result<DriveResult> {
    match time_kind {
        TimeKind::Continuous => drive_continuous(network, f, s, dt, initial),
        TimeKind::Discrete => drive_discrete(network, f, s, initial),
    }
}

/// Rows `transient..transient + n_keep` of the states with a ones column appended.
pub fn build_omega(result: &DriveResult, transient: usize, n_keep: usize) -> Result<DMatrix<f64>> {
    let needed = transient + n_keep;
    let available = result.states.nrows();
    if available < needed || n_keep == 0 {
        return Err(Error::TruncatedRun { needed, available });
    }
    let m = result.states.ncols();
    let mut omega = DMatrix::from_element(n_keep, m + 1, 1.0);
    omega.view_mut((0, 0), (n_keep, m)).copy_from(&result.states.view((transient, 0), (n_keep, m)));
    Ok(omega)
}

/// Minimum-norm least-squares readout.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingResult {
    #[serde(skip)]
    pub omega: DMatrix<f64>,
    pub k: Vec<f64>,
    pub delta_rc: f64,
    #[serde(skip)]
    pub fit: DVector<f64>,
}

/// Pseudo-inverse solution of `min ‖Ω k - g‖`.
pub fn min_norm_solve(omega: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    if omega.nrows() != g.len() {
        return Err(Error::Dimension(format!("Ω has {} rows but g has {} entries", omega.nrows(), g.len())));
    }
    if omega.iter().chain(g.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Analysis { message: "non-finite entry in least-squares data".into(), residual: f64::NAN });
    }
    let solve = |a: DMatrix<f64>, b: &DVector<f64>| -> Result<DVector<f64>> {
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        svd.solve(b, SVD_CUTOFF * smax)
            .map_err(|e| Error::Analysis { message: e.to_string(), residual: f64::NAN })
    };
    if omega.nrows() <= omega.ncols() {
        return solve(omega.clone(), g);
    }
    // Ω = QR with orthonormal Q gives Ω⁺ = R⁺ Qᵀ, so only the small
    // triangular factor needs an SVD.
    let n = omega.ncols();
    let qr = omega.clone().qr();
    let mut qtg = g.clone();
    qr.q_tr_mul(&mut qtg);
    solve(qr.r(), &qtg.rows(0, n).into_owned())
}

pub fn fit_readout(omega: &DMatrix<f64>, g: &[f64]) -> Result<TrainingResult> {
    let gv = DVector::from_column_slice(g);
    let k = min_norm_solve(omega, &gv)?;
    let fit = omega * &k;
    let delta_rc = relative_spread(fit.as_slice(), g)?;
    Ok(TrainingResult { omega: omega.clone(), k: k.as_slice().to_vec(), delta_rc, fit })
}

/// Population standard deviation about the sequence's own mean.
pub fn spread(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    mean_std(x).1
}

fn relative_spread(fit: &[f64], g: &[f64]) -> Result<f64> {
    let denom = spread(g);
    if !(denom > 0.0) {
        return Err(Error::DegenerateTarget);
    }
    let residual: Vec<f64> = fit.iter().zip(g).map(|(h, t)| h - t).collect();
    Ok(spread(&residual) / denom)
}

/// `Δ_RC = ⟨Ωk - g⟩ / ⟨g⟩` for the stored fit.
pub fn training_error(result: &TrainingResult, g: &[f64]) -> Result<f64> {
    if result.fit.len() != g.len() {
        return Err(Error::Dimension(format!("fit has {} entries but g has {}", result.fit.len(), g.len())));
    }
    relative_spread(result.fit.as_slice(), g)
}

/// Outcome of the end-to-end training pipeline.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainOutcome {
    Trained(TrainingResult),
    Diverged { step: usize },
}

impl TrainOutcome {
    pub fn delta_rc(&self) -> Option<f64> {
        match self {
            TrainOutcome::Trained(t) => Some(t.delta_rc),
            TrainOutcome::Diverged { .. } => None,
        }
    }

    pub fn diverged(&self) -> bool {
        matches!(self, TrainOutcome::Diverged { .. })
    }
}

/// Drives the reservoir from rest with `pair.input`, discards `transient`
/// samples and fits the next `n_keep` against `pair.target`.
pub fn train(
    network: &ReservoirNetwork,
    f: &NodalDynamics,
    time_kind: TimeKind,
    pair: &SignalPair,
    transient: usize,
    n_keep: usize,
) -> Result<TrainOutcome> {
    let needed = transient + n_keep;
    if pair.len() < needed {
        return Err(Error::TruncatedRun { needed, available: pair.len() });
    }
    let initial = vec![0.0; network.m()];
    let result = drive(network, f, time_kind, &pair.input()[..needed], pair.dt(), &initial)?;
    if let Some(step) = result.divergence_step {
        return Ok(TrainOutcome::Diverged { step });
    }
    let omega = build_omega(&result, transient, n_keep)?;
    fit_readout(&omega, &pair.target()[transient..needed]).map(TrainOutcome::Trained)
}

/// JSON export of one training run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingReport {
    pub status: &'static str,
    pub diverged: bool,
    pub divergence_step: Option<usize>,
    pub delta_rc: Option<f64>,
    pub k: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub parameters: NodalDynamics,
    pub time_kind: TimeKind,
    pub m: usize,
}

impl TrainingReport {
    pub fn new(outcome: &TrainOutcome, network: &ReservoirNetwork, f: &NodalDynamics, time_kind: TimeKind) -> Self {
        let (status, step, delta, k) = match outcome {
            TrainOutcome::Trained(t) => ("ok", None, Some(t.delta_rc), Some(t.k.clone())),
            TrainOutcome::Diverged { step } => ("diverged", Some(*step), None, None),
        };
        TrainingReport {
            status,
            diverged: outcome.diverged(),
            divergence_step: step,
            delta_rc: delta,
            k,
            seed: network.seed(),
            parameters: f.clone(),
            time_kind,
            m: network.m(),
        }
    }
}
