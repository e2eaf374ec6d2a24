//! Certified stability radii of the unforced reservoir.
//!
//! Continuous time uses `V = ½‖r‖²`: the ball `‖r‖ ≤ c` is certified when
//! `K*(c) = max_{|r|≤c} f(r)/r ≤ -α_max`. Discrete time uses `V = ‖r‖`: the
//! ball is certified when `ρ⁻ ≤ K⁻*(c) ≤ K⁺*(c) ≤ ρ⁺`, with `K⁻*`/`K⁺*` the
//! min/max of the ratio and `ρ±` the critical spectral shifts. Both `K*` and
//! `K⁺*` are nondecreasing in `c` and `K⁻*` is nonincreasing, so the largest
//! certified radius is found by bracketing and bisection.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::dynamics::{candidates_for, ratio_candidates, CandidateKind, NodalDynamics, RatioMap};
use crate::error::{Error, Result};
use crate::integrate::Rk4;
use crate::network::{self, ReservoirNetwork, SpectralSummary};
use crate::TimeKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GloballyStable,
    FiniteRegion,
    Unstable,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::GloballyStable => "globally_stable",
            Regime::FiniteRegion => "finite_region",
            Regime::Unstable => "unstable",
        }
    }
}

/// Which one-sided discrete constraint determines `c_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingSide {
    Upper,
    Lower,
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "time_kind", rename_all = "snake_case")]
pub enum Threshold {
    /// `K* ≤ -α_max`
    Continuous { neg_alpha_max: f64 },
    /// `ρ⁻ ≤ K⁻* ≤ K⁺* ≤ ρ⁺`
    Discrete { rho_minus: f64, rho_plus: f64 },
}

pub(crate) fn serialize_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&crate::csv::fmt_f64(*x))
    }
}

fn serialize_extended_opt<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => serialize_extended(v, s),
        None => s.serialize_none(),
    }
}

/// Outcome of a stability analysis along with the bound values that justify it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub regime: Regime,
    /// Certified radius; `+∞` exactly when globally stable, `0` when unstable.
    #[serde(serialize_with = "serialize_extended")]
    pub c_max: f64,
    /// `K*(c_max)` (continuous) or the binding side's bound at `c_max`
    /// (discrete); the `c → ∞` limit when globally stable.
    #[serde(serialize_with = "serialize_extended")]
    pub kstar_at_cmax: f64,
    pub threshold: Threshold,
    pub binding_side: BindingSide,
    /// Candidate family attaining the binding bound.
    pub binding_candidate: Option<CandidateKind>,
    #[serde(serialize_with = "serialize_extended_opt")]
    pub k_minus_at_cmax: Option<f64>,
    #[serde(serialize_with = "serialize_extended_opt")]
    pub k_plus_at_cmax: Option<f64>,
}

/// `K*(c)`: tightest `K` with `r f(r) ≤ K r²` on `[-c, c]`.
pub fn kstar_continuous(f: &NodalDynamics, c: f64) -> Result<f64> {
    Ok(ratio_candidates(f, c)?.max())
}

/// `(K⁻*(c), K⁺*(c))`: tightest bracket of `f(r)/r` on `[-c, c]`.
pub fn kstar_discrete(f: &NodalDynamics, c: f64) -> Result<(f64, f64)> {
    let cand = ratio_candidates(f, c)?;
    Ok((cand.min(), cand.max()))
}

const SEARCH_START: f64 = 1e-3;
const SEARCH_CAP: f64 = 1e6;

enum Radius {
    Unbounded,
    Finite(f64),
}

/// Largest `c` with `admissible(c)`, assuming admissibility is monotone
/// (true near 0, possibly false beyond some radius).
fn largest_admissible_radius(admissible: impl Fn(f64) -> Result<bool>) -> Result<Radius> {
    let (mut lo, mut hi);
    if admissible(SEARCH_START)? {
        let mut c = SEARCH_START;
        loop {
            if c > SEARCH_CAP {
                return Ok(Radius::Unbounded);
            }
            if !admissible(2.0 * c)? {
                break;
            }
            c *= 2.0;
        }
        lo = c;
        hi = 2.0 * c;
    } else {
        lo = 0.0;
        hi = SEARCH_START;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if admissible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Radius::Finite(lo))
}

/// Three-way classification of the continuous-time reservoir with
/// threshold `-alpha_max`.
pub fn cmax_continuous(f: &NodalDynamics, alpha_max: f64) -> Result<StabilityReport> {
    if !f.fixes_origin() {
        return Err(Error::Unsupported(format!(
            "continuous-time analysis requires f(0) = 0; {} does not fix the origin",
            f.kind_name()
        )));
    }
    let threshold = -alpha_max;
    let report = |regime, c_max, kstar, cand| StabilityReport {
        regime,
        c_max,
        kstar_at_cmax: kstar,
        threshold: Threshold::Continuous { neg_alpha_max: threshold },
        binding_side: BindingSide::NotApplicable,
        binding_candidate: cand,
        k_minus_at_cmax: None,
        k_plus_at_cmax: Some(kstar),
    };
    let slope = f.eval_derivative(0.0)?;
    if slope > threshold {
        return Ok(report(Regime::Unstable, 0.0, slope, Some(CandidateKind::Origin)));
    }
    if let Some(sup) = f.ratio_supremum()? {
        if sup <= threshold {
            return Ok(report(Regime::GloballyStable, f64::INFINITY, sup, None));
        }
    }
    match largest_admissible_radius(|c| Ok(kstar_continuous(f, c)? <= threshold))? {
        Radius::Unbounded => {
            let k = kstar_continuous(f, SEARCH_CAP)?;
            Ok(report(Regime::GloballyStable, f64::INFINITY, k, None))
        }
        Radius::Finite(c) if c > 0.0 => {
            let (kind, k) = ratio_candidates(f, c)?.argmax();
            Ok(report(Regime::FiniteRegion, c, k, Some(kind)))
        }
        Radius::Finite(_) => Ok(report(Regime::Unstable, 0.0, slope, Some(CandidateKind::Origin))),
    }
}

/// Per-node bounds used by the discrete solver: the candidate sets, the
/// origin slopes and the `c → ∞` limits.
trait DiscreteBounds {
    /// `((argmin, K⁻*), (argmax, K⁺*))` at radius `c`.
    fn bounds(&self, c: f64) -> Result<((CandidateKind, f64), (CandidateKind, f64))>;
    /// `(min_i f_i'(0), max_i f_i'(0))`
    fn origin_slopes(&self) -> Result<(f64, f64)>;
    /// `(inf, sup)` of all ratios over ℝ, when known.
    fn limits(&self) -> Result<(Option<f64>, Option<f64>)>;
}

struct Homogeneous<'a>(&'a NodalDynamics);

impl DiscreteBounds for Homogeneous<'_> {
    fn bounds(&self, c: f64) -> Result<((CandidateKind, f64), (CandidateKind, f64))> {
        let cand = ratio_candidates(self.0, c)?;
        Ok((cand.argmin(), cand.argmax()))
    }

    fn origin_slopes(&self) -> Result<(f64, f64)> {
        let s = self.0.eval_derivative(0.0)?;
        Ok((s, s))
    }

    fn limits(&self) -> Result<(Option<f64>, Option<f64>)> {
        Ok((self.0.ratio_infimum()?, self.0.ratio_supremum()?))
    }
}

fn discrete_report(bounds: &impl DiscreteBounds, spectral: &SpectralSummary) -> Result<StabilityReport> {
    let (rho_minus, rho_plus) = (spectral.rho_minus, spectral.rho_plus);
    if rho_minus > rho_plus {
        return Err(Error::InfeasibleTopology { rho_minus, rho_plus });
    }
    let threshold = Threshold::Discrete { rho_minus, rho_plus };
    let (slope_min, slope_max) = bounds.origin_slopes()?;
    if slope_max > rho_plus || slope_min < rho_minus {
        let upper = slope_max > rho_plus;
        return Ok(StabilityReport {
            regime: Regime::Unstable,
            c_max: 0.0,
            kstar_at_cmax: if upper { slope_max } else { slope_min },
            threshold,
            binding_side: if upper { BindingSide::Upper } else { BindingSide::Lower },
            binding_candidate: Some(CandidateKind::Origin),
            k_minus_at_cmax: Some(slope_min),
            k_plus_at_cmax: Some(slope_max),
        });
    }
    let (inf, sup) = bounds.limits()?;

    let c_plus = match sup {
        Some(s) if s <= rho_plus => Radius::Unbounded,
        _ => largest_admissible_radius(|c| Ok(bounds.bounds(c)?.1 .1 <= rho_plus))?,
    };
    let c_minus = match inf {
        Some(s) if s >= rho_minus => Radius::Unbounded,
        _ => largest_admissible_radius(|c| Ok(bounds.bounds(c)?.0 .1 >= rho_minus))?,
    };

    let finite = |r: &Radius| match r {
        Radius::Unbounded => f64::INFINITY,
        Radius::Finite(c) => *c,
    };
    let (cp, cm) = (finite(&c_plus), finite(&c_minus));
    if cp.is_infinite() && cm.is_infinite() {
        let (lo, hi) = match (inf, sup) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => {
                let ((_, lo), (_, hi)) = bounds.bounds(SEARCH_CAP)?;
                (lo, hi)
            }
        };
        return Ok(StabilityReport {
            regime: Regime::GloballyStable,
            c_max: f64::INFINITY,
            kstar_at_cmax: hi,
            threshold,
            binding_side: BindingSide::NotApplicable,
            binding_candidate: None,
            k_minus_at_cmax: Some(lo),
            k_plus_at_cmax: Some(hi),
        });
    }
    let c_max = cp.min(cm);
    if c_max <= 0.0 {
        return Ok(StabilityReport {
            regime: Regime::Unstable,
            c_max: 0.0,
            kstar_at_cmax: slope_max,
            threshold,
            binding_side: if cp <= cm { BindingSide::Upper } else { BindingSide::Lower },
            binding_candidate: Some(CandidateKind::Origin),
            k_minus_at_cmax: Some(slope_min),
            k_plus_at_cmax: Some(slope_max),
        });
    }
    let ((kind_lo, lo), (kind_hi, hi)) = bounds.bounds(c_max)?;
    let upper = cp <= cm;
    Ok(StabilityReport {
        regime: Regime::FiniteRegion,
        c_max,
        kstar_at_cmax: if upper { hi } else { lo },
        threshold,
        binding_side: if upper { BindingSide::Upper } else { BindingSide::Lower },
        binding_candidate: Some(if upper { kind_hi } else { kind_lo }),
        k_minus_at_cmax: Some(lo),
        k_plus_at_cmax: Some(hi),
    })
}

/// Discrete-time classification for dynamics with `f(0) = 0`; `c_max` is the
/// smaller of the radii at which `K⁻*` reaches `ρ⁻` and `K⁺*` reaches `ρ⁺`.
pub fn cmax_discrete(f: &NodalDynamics, spectral: &SpectralSummary) -> Result<StabilityReport> {
    if !f.fixes_origin() {
        return Err(Error::Unsupported(format!(
            "{} does not fix the origin; use the shifted analysis",
            f.kind_name()
        )));
    }
    discrete_report(&Homogeneous(f), spectral)
}

/// Node `i` of the shifted system: `f̄_i(r) = f(r + q_i) + offset_i`, with
/// `offset_i = Σ_j A_ij q_j - q_i` so that `f̄_i(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedNode {
    base: NodalDynamics,
    shift: f64,
    offset: f64,
    /// Stationary points of `f̄_i(r)/r` over the whole line.
    roots: Vec<f64>,
    /// Beyond this radius `f̄_i` is constant to rounding, so the ratio is monotone.
    saturation_radius: f64,
}

const SATURATION_ARGUMENT: f64 = 40.0;

impl ShiftedNode {
    fn new(base: &NodalDynamics, shift: f64, offset: f64) -> Result<Self> {
        let (roots, saturation_radius) = match base {
            NodalDynamics::Polynomial { .. } => {
                let expanded = shifted_polynomial(base, shift)?;
                (expanded.stationary_points(f64::MAX)?, f64::INFINITY)
            }
            NodalDynamics::ScaledTanh { p2, .. } | NodalDynamics::Sigmoid { p2, .. } => {
                if *p2 == 0.0 {
                    (Vec::new(), 0.0)
                } else {
                    let radius = shift.abs() + SATURATION_ARGUMENT / p2.abs();
                    let probe = ShiftedNode {
                        base: base.clone(),
                        shift,
                        offset,
                        roots: Vec::new(),
                        saturation_radius: radius,
                    };
                    (crate::dynamics::scan_stationary_points(&probe, radius)?, radius)
                }
            }
        };
        Ok(ShiftedNode { base: base.clone(), shift, offset, roots, saturation_radius })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `(inf, sup)` of `f̄(r)/r` over `r ≠ 0`.
    fn limits(&self) -> Result<(f64, f64)> {
        match &self.base {
            NodalDynamics::Polynomial { .. } => {
                let p = shifted_polynomial(&self.base, self.shift)?;
                Ok((
                    p.ratio_infimum()?.unwrap_or(f64::NEG_INFINITY),
                    p.ratio_supremum()?.unwrap_or(f64::INFINITY),
                ))
            }
            _ if self.saturation_radius == 0.0 => Ok((0.0, 0.0)),
            _ => {
                // Past saturation f̄ ≈ a constant a±, whose ratio a±/r tends to 0
                // monotonically; so the limits are the bounds at the saturation
                // radius widened to include 0.
                let cand = candidates_for(self, self.saturation_radius)?;
                Ok((cand.min().min(0.0), cand.max().max(0.0)))
            }
        }
    }
}

impl RatioMap for ShiftedNode {
    fn value(&self, r: f64) -> Result<f64> {
        Ok(self.base.eval(r + self.shift)? + self.offset)
    }

    fn slope(&self, r: f64) -> Result<f64> {
        self.base.eval_derivative(r + self.shift)
    }

    fn ratio(&self, r: f64) -> Result<f64> {
        if self.shift == 0.0 && self.offset == 0.0 {
            self.base.ratio(r)
        } else {
            Ok(self.value(r)? / r)
        }
    }

    fn stationary_points(&self, c: f64) -> Result<Vec<f64>> {
        Ok(self.roots.iter().copied().filter(|r| r.abs() <= c).collect())
    }
}

/// Coefficients of `f(r + q) - f(q)` for polynomial `f`, with `p_1` first.
fn shifted_polynomial(f: &NodalDynamics, q: f64) -> Result<NodalDynamics> {
    let NodalDynamics::Polynomial { coefficients } = f else {
        return Err(Error::Unsupported("polynomial re-expansion of a non-polynomial".into()));
    };
    if q == 0.0 {
        return Ok(f.clone());
    }
    // Taylor coefficients: [r^k] f(r + q) = Σ_{i≥k} C(i,k) p_i q^{i-k}.
    let d = coefficients.len();
    let mut out = vec![0.0; d];
    for (k, slot) in out.iter_mut().enumerate().map(|(k, s)| (k + 1, s)) {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in k..=d {
            if i > k {
                binom = binom * i as f64 / (i - k) as f64;
            }
            acc += binom * coefficients[i - 1] * q.powi((i - k) as i32);
        }
        *slot = acc;
    }
    NodalDynamics::polynomial(out)
}

/// Unforced discrete reservoir in coordinates centred on its fixed point `q*`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedDynamics {
    pub base: NodalDynamics,
    pub q_star: DVector<f64>,
    pub per_node_offset: DVector<f64>,
    nodes: Vec<ShiftedNode>,
}

impl ShiftedDynamics {
    pub fn nodes(&self) -> &[ShiftedNode] {
        &self.nodes
    }

    /// One step of `r̄(n+1)_i = f̄_i(r̄_i(n)) + Σ_j A_ij r̄_j(n)`.
    pub fn step(&self, network: &ReservoirNetwork, r: &DVector<f64>) -> Result<DVector<f64>> {
        let mut next = network.adjacency() * r;
        for (i, node) in self.nodes.iter().enumerate() {
            next[i] += node.value(r[i])?;
        }
        Ok(next)
    }

    /// `(inf, sup)` of every shifted ratio over the whole line.
    pub fn ratio_limits(&self) -> Result<(f64, f64)> {
        let (lo, hi) = NonHomogeneous(self).limits()?;
        Ok((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
    }

    /// `‖F(q*) - q*‖∞` for the unforced map `F(r) = f(r) + A r`.
    pub fn residual(&self, network: &ReservoirNetwork) -> Result<f64> {
        fixed_point_residual(network, &self.base, &self.q_star).map(|g| g.amax())
    }
}

fn fixed_point_residual(network: &ReservoirNetwork, f: &NodalDynamics, q: &DVector<f64>) -> Result<DVector<f64>> {
    let mut g = network.adjacency() * q - q;
    for i in 0..q.len() {
        g[i] += f.eval(q[i])?;
    }
    Ok(g)
}

const FIXED_POINT_TOL: f64 = 1e-10;
const NEWTON_BUDGET: usize = 200;
const PICARD_BUDGET: usize = 100_000;

/// Fixed point of the unforced map `F(r) = f(r) + A r` by damped Newton from
/// the origin, falling back to plain iteration of `F`.
pub fn fixed_point(network: &ReservoirNetwork, f: &NodalDynamics) -> Result<ShiftedDynamics> {
    let m = network.m();
    let a = network.adjacency();
    let mut q = DVector::zeros(m);
    let mut g = fixed_point_residual(network, f, &q)?;
    let mut best = (g.amax(), q.clone());

    for _ in 0..NEWTON_BUDGET {
        let norm = g.amax();
        if norm <= 1e-14 * q.amax().max(1.0) {
            break;
        }
        let mut jac = a.clone();
        for i in 0..m {
            jac[(i, i)] += f.eval_derivative(q[i])? - 1.0;
        }
        let Some(delta) = jac.lu().solve(&g) else { break };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let trial = &q - &delta * t;
            if let Ok(gt) = fixed_point_residual(network, f, &trial) {
                if gt.amax() < norm * (1.0 - 1e-4 * t) || gt.amax() <= 1e-15 {
                    q = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if g.amax() < best.0 {
            best = (g.amax(), q.clone());
        }
        if !accepted {
            break;
        }
    }

    if best.0 > FIXED_POINT_TOL {
        let mut r = best.1.clone();
        for _ in 0..PICARD_BUDGET {
            let mut next = a * &r;
            for i in 0..m {
                next[i] += f.eval(r[i])?;
            }
            let res = (&next - &r).amax();
            r = next;
            if res < best.0 {
                best = (res, r.clone());
            }
            if res <= 1e-13 || !res.is_finite() {
                break;
            }
        }
        // Re-measure the residual at the returned point.
        best.0 = fixed_point_residual(network, f, &best.1)?.amax();
    }
    if !(best.0 <= FIXED_POINT_TOL) {
        return Err(Error::FixedPointNotFound { iterations: NEWTON_BUDGET + PICARD_BUDGET, residual: best.0 });
    }
    let q_star = best.1;
    let per_node_offset = a * &q_star - &q_star;
    let nodes = (0..m)
        .map(|i| ShiftedNode::new(f, q_star[i], per_node_offset[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftedDynamics { base: f.clone(), q_star, per_node_offset, nodes })
}

/// `(min_i K_i⁻*(c), max_i K_i⁺*(c))` over the shifted per-node functions.
pub fn kstar_nonhomogeneous(shifted: &ShiftedDynamics, c: f64) -> Result<(f64, f64)> {
    let ((_, lo), (_, hi)) = NonHomogeneous(shifted).bounds(c)?;
    Ok((lo, hi))
}

struct NonHomogeneous<'a>(&'a ShiftedDynamics);

impl DiscreteBounds for NonHomogeneous<'_> {
    fn bounds(&self, c: f64) -> Result<((CandidateKind, f64), (CandidateKind, f64))> {
        let mut lo = (CandidateKind::Origin, f64::INFINITY);
        let mut hi = (CandidateKind::Origin, f64::NEG_INFINITY);
        for node in &self.0.nodes {
            let cand = candidates_for(node, c)?;
            let (a, b) = (cand.argmin(), cand.argmax());
            if a.1 < lo.1 {
                lo = a;
            }
            if b.1 > hi.1 {
                hi = b;
            }
        }
        Ok((lo, hi))
    }

    fn origin_slopes(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for node in &self.0.nodes {
            let s = node.slope(0.0)?;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        Ok((lo, hi))
    }

    fn limits(&self) -> Result<(Option<f64>, Option<f64>)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for node in &self.0.nodes {
            let (a, b) = node.limits()?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((Some(lo), Some(hi)))
    }
}

/// Discrete-time classification of the shifted (possibly non-homogeneous) system.
pub fn cmax_nonhomogeneous(shifted: &ShiftedDynamics, spectral: &SpectralSummary) -> Result<StabilityReport> {
    discrete_report(&NonHomogeneous(shifted), spectral)
}

/// Full analysis of a network with the given dynamics and time domain.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: StabilityReport,
    pub spectral: Option<SpectralSummary>,
    pub alpha_max: f64,
    pub shifted: Option<ShiftedDynamics>,
}

/// Thresholds of a network for the given time domain.
#[derive(Clone, Debug)]
pub enum Topology {
    Continuous { alpha_max: f64 },
    Discrete(SpectralSummary),
}

impl Topology {
    pub fn of(network: &ReservoirNetwork, time_kind: TimeKind) -> Result<Self> {
        match time_kind {
            TimeKind::Continuous => Ok(Topology::Continuous { alpha_max: network::alpha_max(network.adjacency())? }),
            TimeKind::Discrete => Ok(Topology::Discrete(network::critical_shifts(network.adjacency())?)),
        }
    }
}

/// Classifies one parameter set against precomputed topology thresholds.
pub fn classify(network: &ReservoirNetwork, f: &NodalDynamics, topology: &Topology) -> Result<(StabilityReport, Option<ShiftedDynamics>)> {
    match topology {
        Topology::Continuous { alpha_max } => Ok((cmax_continuous(f, *alpha_max)?, None)),
        Topology::Discrete(spectral) if f.fixes_origin() => Ok((cmax_discrete(f, spectral)?, None)),
        Topology::Discrete(spectral) => {
            let shifted = fixed_point(network, f)?;
            Ok((cmax_nonhomogeneous(&shifted, spectral)?, Some(shifted)))
        }
    }
}

pub fn analyze(network: &ReservoirNetwork, f: &NodalDynamics, time_kind: TimeKind) -> Result<Analysis> {
    let alpha_max = network::alpha_max(network.adjacency())?;
    let topology = Topology::of(network, time_kind)?;
    let (report, shifted) = classify(network, f, &topology)?;
    let spectral = match topology {
        Topology::Discrete(s) => Some(s),
        Topology::Continuous { .. } => None,
    };
    Ok(Analysis { report, spectral, alpha_max, shifted })
}

/// Linear stability of the operating point: the origin, or `q*` for dynamics
/// that do not fix the origin (discrete time only).
pub fn linear_stability(network: &ReservoirNetwork, f: &NodalDynamics, time_kind: TimeKind) -> Result<bool> {
    let m = network.m();
    let mut jac = network.adjacency().clone();
    if f.fixes_origin() {
        let s = f.eval_derivative(0.0)?;
        for i in 0..m {
            jac[(i, i)] += s;
        }
    } else {
        if time_kind == TimeKind::Continuous {
            return Err(Error::Unsupported(format!(
                "continuous-time linearization of {} (no fixed point at the origin)",
                f.kind_name()
            )));
        }
        let shifted = fixed_point(network, f)?;
        for i in 0..m {
            jac[(i, i)] += f.eval_derivative(shifted.q_star[i])?;
        }
    }
    Ok(match time_kind {
        TimeKind::Continuous => network::spectral_abscissa(&jac)? < 0.0,
        TimeKind::Discrete => network::spectral_radius(&jac)? < 1.0,
    })
}

/// Integration horizon and step of the unforced convergence test.
pub const BASIN_HORIZON: f64 = 50.0;
pub const BASIN_DT: f64 = 0.01;
pub const BASIN_TOLERANCE: f64 = 1e-4;
const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Unforced continuous reservoir `r' = f(r) + A r`, integrated with RK4 at
/// step 0.01 up to `T = 50` to decide convergence to the origin.
pub struct UnforcedFlow<'a> {
    m: usize,
    a: Vec<f64>,
    f: &'a NodalDynamics,
    /// Radius of a ball certified invariant by `K* ≤ -α_max`; a trajectory
    /// entering it stays within the tolerance, so integration may stop.
    absorbing: f64,
}

impl<'a> UnforcedFlow<'a> {
    pub fn new(network: &ReservoirNetwork, f: &'a NodalDynamics) -> Result<Self> {
        if !f.fixes_origin() {
            return Err(Error::Unsupported("basin checks need a fixed point at the origin".into()));
        }
        let m = network.m();
        let adj = network.adjacency();
        let a = (0..m).flat_map(|i| (0..m).map(move |j| adj[(i, j)])).collect();
        let radius = 0.5 * BASIN_TOLERANCE;
        let certified = kstar_continuous(f, radius)? <= -network::alpha_max(adj)?;
        Ok(UnforcedFlow { m, a, f, absorbing: if certified { radius } else { 0.0 } })
    }

    /// Whether `‖r(50)‖ < 1e-4` from `r0`; blow-up counts as not converging.
    pub fn converges(&self, r0: &[f64]) -> bool {
        let m = self.m;
        let rhs = |_t: f64, r: &[f64], d: &mut [f64]| {
            for i in 0..m {
                let row = &self.a[i * m..(i + 1) * m];
                let coupling: f64 = row.iter().zip(r).map(|(x, y)| x * y).sum();
                d[i] = self.f.eval_unchecked(r[i]) + coupling;
            }
        };
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let steps = (BASIN_HORIZON / BASIN_DT).round() as usize;
        let mut rk = Rk4::new(m);
        let mut r = r0.to_vec();
        for n in 0..steps {
            rk.step(&mut r, n as f64 * BASIN_DT, BASIN_DT, rhs);
            if r.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD) {
                return false;
            }
            if norm(&r) < self.absorbing {
                return true;
            }
        }
        norm(&r) < BASIN_TOLERANCE
    }
}

/// Single-shot form of [`UnforcedFlow::converges`].
pub fn unforced_converges(network: &ReservoirNetwork, f: &NodalDynamics, r0: &[f64]) -> Result<bool> {
    Ok(UnforcedFlow::new(network, f)?.converges(r0))
}

/// Uniform samples from the closed ball of radius `c` in `ℝ^m`.
pub fn sample_ball(m: usize, c: f64, n_samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    (0..n_samples)
        .map(|_| {
            let mut dir: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
            let radius = c * unit.sample(&mut rng).powf(1.0 / m as f64);
            for v in &mut dir {
                *v *= radius / norm;
            }
            dir
        })
        .collect()
}

/// Fraction of `n_samples` uniform initial conditions in `‖r‖ ≤ c` from which
/// the unforced continuous reservoir converges to the origin.
pub fn basin_verify(network: &ReservoirNetwork, f: &NodalDynamics, c: f64, n_samples: usize, seed: u64) -> Result<f64> {
    let flow = UnforcedFlow::new(network, f)?;
    if !(c > 0.0) || n_samples == 0 {
        return Err(Error::Config("basin verification needs c > 0 and at least one sample".into()));
    }
    let samples = sample_ball(network.m(), c, n_samples, seed);
    let converged = samples.par_iter().filter(|r0| flow.converges(r0)).count();
    Ok(converged as f64 / n_samples as f64)
}

/// Dense `A + diag(d)`, handy for eigenvalue checks in tests and tools.
pub fn shifted_matrix(a: &DMatrix<f64>, diag: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    for i in 0..a.nrows() {
        out[(i, i)] += diag;
    }
    out
}
