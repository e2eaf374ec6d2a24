//! Chaotic benchmark signals (Lorenz, Duffing) and their normalization into
//! input/target pairs.

use serde::{Deserialize, Serialize};

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::integrate::Rk4;

/// Sampled state trajectory of a low-dimensional system.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    samples: Vec<Vec<f64>>,
    dt: f64,
    component_names: Vec<String>,
}

impl Trajectory {
    pub fn new(samples: Vec<Vec<f64>>, dt: f64, component_names: Vec<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("trajectory has no samples".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Config(format!("sample interval must be positive, got {dt}")));
        }
        let dim = component_names.len();
        for (n, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::Dimension(format!(
                    "sample {n} has {} components, expected {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationDiverged { step: n });
            }
        }
        Ok(Trajectory { samples, dt, component_names })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn component_names(&self) -> &[String] {
        &self.component_names
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One component as a time series.
    pub fn component(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .component_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown component {name:?}; available: {}",
                    self.component_names.join(", ")
                ))
            })?;
        Ok(self.samples.iter().map(|s| s[idx]).collect())
    }

    /// CSV with header `t,<components>` and one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for name in &self.component_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (n, s) in self.samples.iter().enumerate() {
            out.push_str(&fmt_f64(n as f64 * self.dt));
            for v in s {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0 }
    }
}

/// `x'' + delta x' + alpha x + beta x^3 = gamma cos(omega t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
}

impl Default for DuffingParams {
    fn default() -> Self {
        DuffingParams { delta: 0.3, alpha: -1.0, beta: 1.0, gamma: 0.5, omega: 1.2 }
    }
}

fn check_run(dt: f64, n_steps: usize) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be positive".into()));
    }
    Ok(())
}

/// Integrates the Lorenz system with fixed-step RK4, discarding
/// `transient_steps` and then recording `n_steps` states (one per step).
pub fn integrate_lorenz(
    params: LorenzParams,
    dt: f64,
    n_steps: usize,
    initial: [f64; 3],
    transient_steps: usize,
) -> Result<Trajectory> {
    check_run(dt, n_steps)?;
    let LorenzParams { sigma, rho, beta } = params;
    let rhs = |_t: f64, s: &[f64], d: &mut [f64]| {
        d[0] = sigma * (s[1] - s[0]);
        d[1] = s[0] * (rho - s[2]) - s[1];
        d[2] = s[0] * s[1] - beta * s[2];
    };
    let mut rk = Rk4::new(3);
    let mut state = initial.to_vec();
    let mut samples = Vec::with_capacity(n_steps);
    for step in 0..transient_steps + n_steps {
        rk.step(&mut state, step as f64 * dt, dt, rhs);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step });
        }
        if step >= transient_steps {
            samples.push(state.clone());
        }
    }
    Trajectory::new(samples, dt, vec!["x".into(), "y".into(), "z".into()])
}

/// Integrates the forced Duffing oscillator; components are position `x` and
/// velocity `y`. The forcing phase continues through the transient.
pub fn integrate_duffing(
    params: DuffingParams,
    dt: f64,
    n_steps: usize,
    initial: [f64; 2],
    transient_steps: usize,
) -> Result<Trajectory> {
    check_run(dt, n_steps)?;
    let DuffingParams { delta, alpha, beta, gamma, omega } = params;
    let rhs = |t: f64, s: &[f64], d: &mut [f64]| {
        d[0] = s[1];
        d[1] = -delta * s[1] - alpha * s[0] - beta * s[0] * s[0] * s[0] + gamma * (omega * t).cos();
    };
    let mut rk = Rk4::new(2);
    let mut state = initial.to_vec();
    let mut samples = Vec::with_capacity(n_steps);
    for step in 0..transient_steps + n_steps {
        rk.step(&mut state, step as f64 * dt, dt, rhs);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step });
        }
        if step >= transient_steps {
            samples.push(state.clone());
        }
    }
    Trajectory::new(samples, dt, vec!["x".into(), "y".into()])
}

/// Population mean and standard deviation.
pub(crate) fn mean_std(seq: &[f64]) -> (f64, f64) {
    let n = seq.len() as f64;
    let mean = seq.iter().sum::<f64>() / n;
    let var = seq.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Affine map to zero mean and unit population standard deviation.
pub fn normalize(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.len() < 2 {
        return Err(Error::DegenerateSignal);
    }
    let (mean, std) = mean_std(seq);
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::DegenerateSignal);
    }
    let mut out: Vec<f64> = seq.iter().map(|v| (v - mean) / std).collect();
    // One refinement pass cancels the rounding left by the first.
    let (m2, s2) = mean_std(&out);
    for v in &mut out {
        *v = (*v - m2) / s2;
    }
    Ok(out)
}

/// Normalized drive `input` and training `target` series of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalPair {
    input: Vec<f64>,
    target: Vec<f64>,
    dt: f64,
}

impl SignalPair {
    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    /// Sampling interval of the underlying trajectory.
    pub fn dt(&self) -> f64 {
        self.dt
    }
}

pub fn make_signal_pair(
    traj: &Trajectory,
    input_component: &str,
    target_component: &str,
) -> Result<SignalPair> {
    let input = normalize(&traj.component(input_component)?)?;
    let target = normalize(&traj.component(target_component)?)?;
    Ok(SignalPair { input, target, dt: traj.dt() })
}

/// Which attractor produces the signals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum SignalSystem {
    Lorenz {
        #[serde(default, flatten)]
        params: LorenzDefaults,
    },
    Duffing {
        #[serde(default, flatten)]
        params: DuffingDefaults,
    },
}

/// [`LorenzParams`] plus initial state, with canonical defaults for any field
/// omitted in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LorenzDefaults {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub initial: [f64; 3],
}

impl Default for LorenzDefaults {
    fn default() -> Self {
        let p = LorenzParams::default();
        LorenzDefaults { sigma: p.sigma, rho: p.rho, beta: p.beta, initial: [1.0, 1.0, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DuffingDefaults {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub initial: [f64; 2],
}

impl Default for DuffingDefaults {
    fn default() -> Self {
        let p = DuffingParams::default();
        DuffingDefaults {
            delta: p.delta,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            omega: p.omega,
            initial: [0.1, 0.0],
        }
    }
}

fn default_dt() -> f64 {
    0.02
}

fn default_signal_transient() -> usize {
    5000
}

fn default_input() -> String {
    "x".into()
}

fn default_target() -> String {
    "z".into()
}

/// Full description of how to generate a [`SignalPair`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSource {
    #[serde(flatten)]
    pub system: SignalSystem,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_signal_transient")]
    pub transient_steps: usize,
    #[serde(default = "default_input")]
    pub input: String,
    #[serde(default = "default_target")]
    pub target: String,
}

impl SignalSource {
    /// Lorenz `x -> z` with the canonical parameters.
    pub fn lorenz_x_to_z() -> Self {
        SignalSource {
            system: SignalSystem::Lorenz { params: LorenzDefaults::default() },
            dt: default_dt(),
            transient_steps: default_signal_transient(),
            input: "x".into(),
            target: "z".into(),
        }
    }

    pub fn trajectory(&self, n_steps: usize) -> Result<Trajectory> {
        match &self.system {
            SignalSystem::Lorenz { params: p } => integrate_lorenz(
                LorenzParams { sigma: p.sigma, rho: p.rho, beta: p.beta },
                self.dt,
                n_steps,
                p.initial,
                self.transient_steps,
            ),
            SignalSystem::Duffing { params: p } => integrate_duffing(
                DuffingParams {
                    delta: p.delta,
                    alpha: p.alpha,
                    beta: p.beta,
                    gamma: p.gamma,
                    omega: p.omega,
                },
                self.dt,
                n_steps,
                p.initial,
                self.transient_steps,
            ),
        }
    }

    pub fn signal_pair(&self, n_steps: usize) -> Result<SignalPair> {
        make_signal_pair(&self.trajectory(n_steps)?, &self.input, &self.target)
    }
}
