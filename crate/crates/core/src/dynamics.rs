//! Nodal dynamics `f(r, θ)` and the extremal candidates of the ratio `f(r)/r`
//! over a symmetric interval `[-c, c]`.
//!
//! The extremes of `f(r)/r` on `[-c, c]` are attained at one of: the two
//! endpoints, the origin (where the ratio extends continuously to `f'(0)`),
//! or an interior stationary point solving `r f'(r) - f(r) = 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar self-dynamics of one reservoir node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDynamics", into = "RawDynamics")]
pub enum NodalDynamics {
    /// `Σ_{i=1..d} p_i r^i`; `coefficients[0]` is `p_1`. No constant term, so
    /// the origin is always a fixed point of the unforced node.
    Polynomial { coefficients: Vec<f64> },
    /// `p1 tanh(p2 r)` with `p2 > 0`.
    ScaledTanh { p1: f64, p2: f64 },
    /// `p1 / (1 + exp(-p2 r))`.
    Sigmoid { p1: f64, p2: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Polynomial,
    ScaledTanh,
    Sigmoid,
}

/// Wire form: a kind tag plus a coefficient array.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    kind: Kind,
    coefficients: Vec<f64>,
}

impl TryFrom<RawDynamics> for NodalDynamics {
    type Error = Error;

    fn try_from(raw: RawDynamics) -> Result<Self> {
        match raw.kind {
            Kind::Polynomial => NodalDynamics::polynomial(raw.coefficients),
            Kind::ScaledTanh | Kind::Sigmoid => {
                let [p1, p2] = raw.coefficients[..] else {
                    return Err(Error::Config(format!(
                        "{:?} takes exactly two coefficients [p1, p2], got {}",
                        raw.kind,
                        raw.coefficients.len()
                    )));
                };
                if raw.kind == Kind::ScaledTanh {
                    NodalDynamics::scaled_tanh(p1, p2)
                } else {
                    NodalDynamics::sigmoid(p1, p2)
                }
            }
        }
    }
}

impl From<NodalDynamics> for RawDynamics {
    fn from(f: NodalDynamics) -> Self {
        match f {
            NodalDynamics::Polynomial { coefficients } => {
                RawDynamics { kind: Kind::Polynomial, coefficients }
            }
            NodalDynamics::ScaledTanh { p1, p2 } => {
                RawDynamics { kind: Kind::ScaledTanh, coefficients: vec![p1, p2] }
            }
            NodalDynamics::Sigmoid { p1, p2 } => {
                RawDynamics { kind: Kind::Sigmoid, coefficients: vec![p1, p2] }
            }
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config("nodal dynamics coefficients must be finite".into()))
    }
}

/// Numerically stable logistic function.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ(x)(1 - σ(x))` without cancellation.
fn logistic_slope(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

impl NodalDynamics {
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Config("polynomial needs at least the linear coefficient p1".into()));
        }
        check_finite(&coefficients)?;
        Ok(NodalDynamics::Polynomial { coefficients })
    }

    pub fn scaled_tanh(p1: f64, p2: f64) -> Result<Self> {
        check_finite(&[p1, p2])?;
        if !(p2 > 0.0) {
            return Err(Error::Config(format!("scaled tanh requires p2 > 0, got {p2}")));
        }
        Ok(NodalDynamics::ScaledTanh { p1, p2 })
    }

    pub fn sigmoid(p1: f64, p2: f64) -> Result<Self> {
        check_finite(&[p1, p2])?;
        Ok(NodalDynamics::Sigmoid { p1, p2 })
    }

    /// Whether `f(0) = 0` holds identically for this kind.
    pub fn fixes_origin(&self) -> bool {
        !matches!(self, NodalDynamics::Sigmoid { .. })
    }

    /// Parameter `p_index` (1-based). Polynomial coefficients past the degree read as zero.
    pub fn param(&self, index: usize) -> Result<f64> {
        match (self, index) {
            (NodalDynamics::Polynomial { coefficients }, i) if i >= 1 => {
                Ok(coefficients.get(i - 1).copied().unwrap_or(0.0))
            }
            (NodalDynamics::ScaledTanh { p1, .. } | NodalDynamics::Sigmoid { p1, .. }, 1) => Ok(*p1),
            (NodalDynamics::ScaledTanh { p2, .. } | NodalDynamics::Sigmoid { p2, .. }, 2) => Ok(*p2),
            _ => Err(Error::Config(format!("no parameter p{index} for {}", self.kind_name()))),
        }
    }

    /// Copy with parameter `p_index` replaced, revalidated.
    pub fn with_param(&self, index: usize, value: f64) -> Result<Self> {
        match self {
            NodalDynamics::Polynomial { coefficients } if index >= 1 => {
                let mut c = coefficients.clone();
                if c.len() < index {
                    c.resize(index, 0.0);
                }
                c[index - 1] = value;
                NodalDynamics::polynomial(c)
            }
            NodalDynamics::ScaledTanh { p1, p2 } => match index {
                1 => NodalDynamics::scaled_tanh(value, *p2),
                2 => NodalDynamics::scaled_tanh(*p1, value),
                _ => Err(Error::Config(format!("no parameter p{index} for scaled_tanh"))),
            },
            NodalDynamics::Sigmoid { p1, p2 } => match index {
                1 => NodalDynamics::sigmoid(value, *p2),
                2 => NodalDynamics::sigmoid(*p1, value),
                _ => Err(Error::Config(format!("no parameter p{index} for sigmoid"))),
            },
            _ => Err(Error::Config(format!("no parameter p{index}"))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NodalDynamics::Polynomial { .. } => "polynomial",
            NodalDynamics::ScaledTanh { .. } => "scaled_tanh",
            NodalDynamics::Sigmoid { .. } => "sigmoid",
        }
    }

    /// `f(r)`. Errors if the polynomial overflows.
    pub fn eval(&self, r: f64) -> Result<f64> {
        let v = self.eval_unchecked(r);
        if v.is_finite() { Ok(v) } else { Err(Error::Overflow { r }) }
    }

    /// `f(r)` without the finiteness check, for hot simulation loops that
    /// detect divergence themselves.
    #[inline]
    pub fn eval_unchecked(&self, r: f64) -> f64 {
        match self {
            NodalDynamics::Polynomial { coefficients } => r * horner(coefficients, r),
            NodalDynamics::ScaledTanh { p1, p2 } => p1 * (p2 * r).tanh(),
            NodalDynamics::Sigmoid { p1, p2 } => p1 * logistic(p2 * r),
        }
    }

    /// Analytic `f'(r)`.
    pub fn eval_derivative(&self, r: f64) -> Result<f64> {
        let v = match self {
            NodalDynamics::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for (i, p) in coefficients.iter().enumerate().rev() {
                    acc = acc * r + (i + 1) as f64 * p;
                }
                acc
            }
            NodalDynamics::ScaledTanh { p1, p2 } => {
                let sech = 1.0 / (p2 * r).cosh();
                p1 * p2 * sech * sech
            }
            NodalDynamics::Sigmoid { p1, p2 } => p1 * p2 * logistic_slope(p2 * r),
        };
        if v.is_finite() { Ok(v) } else { Err(Error::Overflow { r }) }
    }

    /// Supremum of `f(r)/r` over all `r ≠ 0`, i.e. `lim_{c→∞} K*(c)`.
    /// `None` for kinds that do not fix the origin.
    pub fn ratio_supremum(&self) -> Result<Option<f64>> {
        self.ratio_limit(true)
    }

    /// Infimum of `f(r)/r` over all `r ≠ 0`, i.e. `lim_{c→∞} K⁻*(c)`.
    pub fn ratio_infimum(&self) -> Result<Option<f64>> {
        self.ratio_limit(false)
    }

    fn ratio_limit(&self, upper: bool) -> Result<Option<f64>> {
        match self {
            NodalDynamics::Polynomial { coefficients } => {
                let ratio = trim_trailing_zeros(coefficients);
                let Some(&lead) = ratio.last() else {
                    return Ok(Some(0.0));
                };
                let degree = ratio.len() - 1;
                if degree == 0 {
                    return Ok(Some(lead));
                }
                // An odd-degree ratio polynomial is unbounded both ways; an even one
                // is bounded only on the side opposite its leading coefficient.
                let bounded = degree % 2 == 0 && ((upper && lead < 0.0) || (!upper && lead > 0.0));
                if !bounded {
                    return Ok(Some(if upper { f64::INFINITY } else { f64::NEG_INFINITY }));
                }
                let mut best = coefficients[0];
                for r in polynomial_stationary_points(coefficients)? {
                    let v = horner(coefficients, r);
                    best = if upper { best.max(v) } else { best.min(v) };
                }
                Ok(Some(best))
            }
            NodalDynamics::ScaledTanh { p1, p2 } => {
                // The ratio is even and monotone in |r|: p1 p2 at the origin, 0 at infinity.
                let at_origin = p1 * p2;
                Ok(Some(if upper { at_origin.max(0.0) } else { at_origin.min(0.0) }))
            }
            NodalDynamics::Sigmoid { .. } => Ok(None),
        }
    }
}

/// `Σ p_{i+1} r^i`, i.e. the polynomial `f(r)/r`.
#[inline]
fn horner(coefficients: &[f64], r: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, p| acc * r + p)
}

fn trim_trailing_zeros(c: &[f64]) -> &[f64] {
    let end = c.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
    &c[..end]
}

/// A scalar map whose ratio `value(r)/r` is to be bounded on `[-c, c]`.
/// Implementors must satisfy `value(0) = 0`.
pub trait RatioMap {
    fn value(&self, r: f64) -> Result<f64>;

    fn slope(&self, r: f64) -> Result<f64>;

    /// `value(r)/r` for `r ≠ 0`.
    fn ratio(&self, r: f64) -> Result<f64> {
        Ok(self.value(r)? / r)
    }

    /// All `r` in `[-c, c] \ {0}` with `r·slope(r) - value(r) = 0`.
    fn stationary_points(&self, c: f64) -> Result<Vec<f64>> {
        scan_stationary_points(self, c)
    }
}

impl RatioMap for NodalDynamics {
    fn value(&self, r: f64) -> Result<f64> {
        self.eval(r)
    }

    fn slope(&self, r: f64) -> Result<f64> {
        self.eval_derivative(r)
    }

    fn ratio(&self, r: f64) -> Result<f64> {
        match self {
            NodalDynamics::Polynomial { coefficients } => {
                let v = horner(coefficients, r);
                if v.is_finite() { Ok(v) } else { Err(Error::Overflow { r }) }
            }
            _ => Ok(self.eval(r)? / r),
        }
    }

    fn stationary_points(&self, c: f64) -> Result<Vec<f64>> {
        match self {
            NodalDynamics::Polynomial { coefficients } => Ok(polynomial_stationary_points(coefficients)?
                .into_iter()
                .filter(|r| r.abs() <= c)
                .collect()),
            _ => scan_stationary_points(self, c),
        }
    }
}

/// Interior stationary point of the ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InteriorCandidate {
    pub r: f64,
    pub value: f64,
}

/// The candidate values whose max (min) is `K*` (`K⁻*`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioCandidates {
    /// `f(c)/c`
    pub at_plus_c: f64,
    /// `f(-c)/(-c)`
    pub at_minus_c: f64,
    /// `f'(0)`
    pub at_zero: f64,
    pub interior: Vec<InteriorCandidate>,
}

/// Which family attains an extreme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    PlusC,
    MinusC,
    Origin,
    Interior,
}

impl RatioCandidates {
    fn all(&self) -> impl Iterator<Item = (CandidateKind, f64)> + '_ {
        [
            (CandidateKind::PlusC, self.at_plus_c),
            (CandidateKind::MinusC, self.at_minus_c),
            (CandidateKind::Origin, self.at_zero),
        ]
        .into_iter()
        .chain(self.interior.iter().map(|c| (CandidateKind::Interior, c.value)))
    }

    pub fn max(&self) -> f64 {
        self.argmax().1
    }

    pub fn min(&self) -> f64 {
        self.argmin().1
    }

    pub fn argmax(&self) -> (CandidateKind, f64) {
        self.all().fold((CandidateKind::Origin, f64::NEG_INFINITY), |best, x| {
            if x.1 > best.1 { x } else { best }
        })
    }

    pub fn argmin(&self) -> (CandidateKind, f64) {
        self.all().fold((CandidateKind::Origin, f64::INFINITY), |best, x| {
            if x.1 < best.1 { x } else { best }
        })
    }
}

fn check_radius(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("interval half-width c must be positive and finite, got {c}")))
    }
}

/// Candidate set for a generic map that fixes the origin.
pub fn candidates_for<F: RatioMap + ?Sized>(f: &F, c: f64) -> Result<RatioCandidates> {
    check_radius(c)?;
    let interior = f
        .stationary_points(c)?
        .into_iter()
        .map(|r| Ok(InteriorCandidate { r, value: f.ratio(r)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioCandidates {
        at_plus_c: f.ratio(c)?,
        at_minus_c: f.ratio(-c)?,
        at_zero: f.slope(0.0)?,
        interior,
    })
}

/// The four candidate families of `f(r)/r` on `[-c, c]`.
pub fn ratio_candidates(f: &NodalDynamics, c: f64) -> Result<RatioCandidates> {
    if !f.fixes_origin() {
        return Err(Error::Unsupported(format!(
            "{} does not fix the origin; shift to its fixed point first",
            f.kind_name()
        )));
    }
    candidates_for(f, c)
}

/// Roots of `r f'(r) - f(r)` in `[-c, c] \ {0}`.
pub fn stationarity_roots(f: &NodalDynamics, c: f64) -> Result<Vec<f64>> {
    check_radius(c)?;
    f.stationary_points(c)
}

/// For `f = Σ p_i r^i`, `r f' - f = r² Σ_{i≥2} (i-1) p_i r^{i-2}`; returns the
/// nonzero real roots of the second factor (all of ℝ), sorted.
pub fn polynomial_stationary_points(coefficients: &[f64]) -> Result<Vec<f64>> {
    let reduced: Vec<f64> = coefficients
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, p)| i as f64 * p)
        .collect();
    let roots = real_polynomial_roots(&reduced)?;
    Ok(roots.into_iter().filter(|r| *r != 0.0).collect())
}

/// Real roots of `Σ a_i x^i` (ascending coefficients), via the eigenvalues of
/// the companion matrix followed by Newton polishing. Zero roots are dropped
/// from the factorization; the identically-zero polynomial has no roots.
pub fn real_polynomial_roots(ascending: &[f64]) -> Result<Vec<f64>> {
    let trimmed = trim_trailing_zeros(ascending);
    let low = trimmed.iter().position(|v| *v != 0.0).unwrap_or(trimmed.len());
    let a = &trimmed[low..];
    if a.len() <= 1 {
        return Ok(Vec::new());
    }
    let degree = a.len() - 1;
    if degree == 1 {
        return Ok(vec![-a[0] / a[1]]);
    }
    let lead = a[degree];
    let companion = DMatrix::from_fn(degree, degree, |i, j| {
        if j == degree - 1 {
            -a[i] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = companion.complex_eigenvalues();
    let mut roots = Vec::new();
    for z in eig.iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Analysis {
                message: "companion eigenvalue solver produced a non-finite root".into(),
                residual: f64::NAN,
            });
        }
        if z.im.abs() > 1e-6 * z.norm().max(1.0) {
            continue;
        }
        let (r, converged) = newton_polish(a, z.re);
        if converged {
            roots.push(r);
        }
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-7 * x.abs().max(1.0));
    Ok(roots)
}

/// Newton iteration on `Σ a_i x^i`. Reports convergence when the residual is
/// at rounding level relative to the magnitude of the terms.
fn newton_polish(a: &[f64], x0: f64) -> (f64, bool) {
    let eval = |x: f64| {
        let mut p = 0.0;
        let mut dp = 0.0;
        let mut scale = 0.0;
        for c in a.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
            scale = scale * x.abs() + c.abs();
        }
        (p, dp, scale)
    };
    let mut x = x0;
    for _ in 0..60 {
        let (p, dp, _) = eval(x);
        if p == 0.0 || dp == 0.0 {
            break;
        }
        let step = p / dp;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1e-300) {
            break;
        }
    }
    let (p, _, scale) = eval(x);
    (x, x.is_finite() && p.abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE))
}

const SCAN_POINTS: usize = 10_000;

/// Sign-change scan of `r·slope(r) - value(r)` on each half of `[-c, c]`,
/// refined by bisection. The grid is the union of a uniform and a geometric
/// grid so that both wide intervals and the neighbourhood of the origin are
/// resolved.
pub fn scan_stationary_points<F: RatioMap + ?Sized>(f: &F, c: f64) -> Result<Vec<f64>> {
    check_radius(c)?;
    let mut grid: Vec<f64> = (1..=SCAN_POINTS).map(|k| c * k as f64 / SCAN_POINTS as f64).collect();
    let decades = 9.0;
    grid.extend((0..SCAN_POINTS).map(|k| c * 10f64.powf(-decades * k as f64 / SCAN_POINTS as f64)));
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();

    let h = |r: f64| -> Result<f64> { Ok(r * f.slope(r)? - f.value(r)?) };
    let mut roots = Vec::new();
    for sign in [-1.0, 1.0] {
        let mut prev: Option<(f64, f64)> = None;
        for &g in &grid {
            let r = sign * g;
            let (rs, v) = (r * f.slope(r)?, f.value(r)?);
            // Near the origin the two terms cancel to rounding noise; such
            // points carry no sign information.
            let diff = rs - v;
            if diff.abs() <= 1e-12 * (rs.abs() + v.abs()) {
                continue;
            }
            if let Some((pr, pv)) = prev {
                if pv.signum() != diff.signum() {
                    roots.push(bisect_root(&h, pr, pv, r)?);
                }
            }
            prev = Some((r, diff));
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

fn bisect_root(h: &impl Fn(f64) -> Result<f64>, mut a: f64, mut fa: f64, mut b: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= 1e-12 * mid.abs().max(1.0) || mid == a || mid == b {
            break;
        }
        let fm = h(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cubic(p1: f64, p2: f64, p3: f64) -> NodalDynamics {
        NodalDynamics::polynomial(vec![p1, p2, p3]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(cubic(-3.0, 4.0, -1.0).eval(1.0).unwrap(), 0.0);
        assert_eq!(NodalDynamics::scaled_tanh(-2.0, 0.5).unwrap().eval(0.0).unwrap(), 0.0);
        let s = NodalDynamics::sigmoid(1.0, 0.0).unwrap();
        for r in [-50.0, 0.0, 3.0] {
            assert_eq!(s.eval(r).unwrap(), 0.5);
        }
    }

    #[test]
    fn polynomial_overflow_is_reported() {
        let f = cubic(0.0, 0.0, 1.0);
        assert!(matches!(f.eval(1e200), Err(Error::Overflow { .. })));
    }

    #[test]
    fn tanh_and_sigmoid_saturate_without_overflow() {
        let t = NodalDynamics::scaled_tanh(2.0, 3.0).unwrap();
        let s = NodalDynamics::sigmoid(2.0, 3.0).unwrap();
        for r in [-1e300, 1e300] {
            assert!(t.eval(r).unwrap().is_finite());
            assert!(s.eval(r).unwrap().is_finite());
            assert_eq!(t.eval_derivative(r).unwrap(), 0.0);
            assert_eq!(s.eval_derivative(r).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_at_origin() {
        assert_eq!(cubic(-3.0, 4.0, -1.0).eval_derivative(0.0).unwrap(), -3.0);
        let (p1, p2) = (-2.0, 0.5);
        assert_eq!(NodalDynamics::scaled_tanh(p1, p2).unwrap().eval_derivative(0.0).unwrap(), p1 * p2);
        let s = NodalDynamics::sigmoid(1.7, 0.9).unwrap();
        let analytic = s.eval_derivative(0.0).unwrap();
        assert!((analytic - 1.7 * 0.9 / 4.0).abs() < 1e-15);
        let h = 1e-6;
        let fd = (s.eval(h).unwrap() - s.eval(-h).unwrap()) / (2.0 * h);
        assert!((fd - analytic).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let family = [
            cubic(-3.0, 4.0, -1.0),
            NodalDynamics::polynomial(vec![-1.0, 0.3, 0.2, -0.05, 0.01]).unwrap(),
            NodalDynamics::scaled_tanh(-2.0, 0.5).unwrap(),
            NodalDynamics::sigmoid(3.0, 0.7).unwrap(),
        ];
        let h = 1e-6;
        for f in &family {
            for _ in 0..100 {
                let r: f64 = rng.random_range(-10.0..10.0);
                let fd = (f.eval(r + h).unwrap() - f.eval(r - h).unwrap()) / (2.0 * h);
                let d = f.eval_derivative(r).unwrap();
                // Relative error with an absolute floor where f' vanishes.
                assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "{f:?} at {r}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn cubic_candidates_interior_outside_interval() {
        let c = ratio_candidates(&cubic(-3.0, 4.0, -1.0), 1.0).unwrap();
        assert_eq!(c.at_plus_c, 0.0);
        assert_eq!(c.at_minus_c, -8.0);
        assert_eq!(c.at_zero, -3.0);
        assert!(c.interior.is_empty());
    }

    #[test]
    fn cubic_candidates_interior_inside_interval() {
        let c = ratio_candidates(&cubic(-3.0, 4.0, -1.0), 3.0).unwrap();
        assert_eq!(c.interior.len(), 1);
        assert!((c.interior[0].r - 2.0).abs() < 1e-12);
        // p1 - p2^2 / (4 p3)
        assert!((c.interior[0].value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_candidates() {
        let c = ratio_candidates(&NodalDynamics::scaled_tanh(-2.0, 0.5).unwrap(), 1.0).unwrap();
        let expected = -2.0 * 0.5f64.tanh();
        assert!((c.at_plus_c - expected).abs() < 1e-15);
        assert!((c.at_minus_c - expected).abs() < 1e-15);
        assert!((c.at_plus_c + 0.92423).abs() < 1e-5);
        assert_eq!(c.at_zero, -1.0);
        assert!(c.interior.is_empty());
    }

    #[test]
    fn sigmoid_needs_a_shift() {
        let s = NodalDynamics::sigmoid(1.0, 1.0).unwrap();
        assert!(matches!(ratio_candidates(&s, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn stationarity_examples() {
        let roots = stationarity_roots(&cubic(-3.0, 4.0, -1.0), 3.0).unwrap();
        assert_eq!(roots.len(), 1);
        let f = cubic(-3.0, 4.0, -1.0);
        let r = roots[0];
        let residual = r * f.eval_derivative(r).unwrap() - f.eval(r).unwrap();
        assert!(residual.abs() < 1e-10);
        assert!((r - 2.0).abs() < 1e-10);

        let linear = NodalDynamics::polynomial(vec![-3.0]).unwrap();
        assert!(stationarity_roots(&linear, 5.0).unwrap().is_empty());
        let tanh = NodalDynamics::scaled_tanh(1.5, 2.0).unwrap();
        assert!(stationarity_roots(&tanh, 7.0).unwrap().is_empty());
    }

    #[test]
    fn tanh_brute_force_scan_has_no_sign_change() {
        // Independent dense scan, r f'(r) - f(r) keeps the sign of -p1 on each half.
        for (p1, p2) in [(-2.0, 0.5), (1.0, 3.0), (4.0, 0.1)] {
            let f = NodalDynamics::scaled_tanh(p1, p2).unwrap();
            let c = 5.0;
            let n = 100_000;
            let mut prev_sign = 0.0;
            for k in 1..=n {
                let r = c * k as f64 / n as f64;
                let v = r * f.eval_derivative(r).unwrap() - f.eval(r).unwrap();
                if v != 0.0 {
                    if prev_sign != 0.0 {
                        assert_eq!(v.signum(), prev_sign);
                    }
                    prev_sign = v.signum();
                }
            }
        }
    }

    #[test]
    fn quintic_roots_match_known_factorization() {
        // stationarity factor 2 p2 ... built from roots {-1.5, 0.5, 2}: (r+1.5)(r-0.5)(r-2)
        // = r^3 - r^2 - 2.75 r + 1.5, ascending [1.5, -2.75, -1, 1] = [p2, 2p3, 3p4, 4p5].
        let f = NodalDynamics::polynomial(vec![-1.0, 1.5, -2.75 / 2.0, -1.0 / 3.0, 0.25]).unwrap();
        let roots = polynomial_stationary_points(match &f {
            NodalDynamics::Polynomial { coefficients } => coefficients,
            _ => unreachable!(),
        })
        .unwrap();
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([-1.5, 0.5, 2.0]) {
            assert!((r - e).abs() < 1e-12, "{r} vs {e}");
        }
        let inside = stationarity_roots(&f, 1.0).unwrap();
        assert_eq!(inside.len(), 1);
    }

    #[test]
    fn double_root_is_reported_once() {
        // (r - 1)^2 = 1 - 2r + r^2 as the stationarity factor.
        let roots = real_polynomial_roots(&[1.0, -2.0, 1.0]).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn complex_pairs_are_not_real_roots() {
        assert!(real_polynomial_roots(&[1.0, 0.0, 1.0]).unwrap().is_empty());
    }

    #[test]
    fn supremum_closed_forms() {
        assert_eq!(cubic(-3.0, 1.0, -1.0).ratio_supremum().unwrap(), Some(-2.75));
        assert_eq!(cubic(-3.0, 4.0, -1.0).ratio_supremum().unwrap(), Some(1.0));
        assert_eq!(cubic(-3.0, 0.0, -1.0).ratio_supremum().unwrap(), Some(-3.0));
        assert_eq!(cubic(-3.0, 1.0, 1.0).ratio_supremum().unwrap(), Some(f64::INFINITY));
        assert_eq!(cubic(-3.0, 1.0, 0.0).ratio_supremum().unwrap(), Some(f64::INFINITY));
        assert_eq!(cubic(-3.0, 1.0, 1.0).ratio_infimum().unwrap(), Some(-3.25));
        let t = NodalDynamics::scaled_tanh(-2.0, 0.5).unwrap();
        assert_eq!(t.ratio_supremum().unwrap(), Some(0.0));
        assert_eq!(t.ratio_infimum().unwrap(), Some(-1.0));
    }

    #[test]
    fn params_round_trip_through_serde() {
        let f: NodalDynamics =
            serde_json::from_str(r#"{"kind":"polynomial","coefficients":[-3,4,-1]}"#).unwrap();
        assert_eq!(f, cubic(-3.0, 4.0, -1.0));
        let t: NodalDynamics =
            serde_json::from_str(r#"{"kind":"scaled_tanh","coefficients":[-2,0.5]}"#).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"{"kind":"scaled_tanh","coefficients":[-2.0,0.5]}"#);
        assert!(serde_json::from_str::<NodalDynamics>(r#"{"kind":"scaled_tanh","coefficients":[1,-1]}"#).is_err());
        assert!(serde_json::from_str::<NodalDynamics>(r#"{"kind":"sigmoid","coefficients":[1]}"#).is_err());
    }

    #[test]
    fn with_param_extends_polynomials() {
        let f = cubic(-3.0, 0.0, 0.0).with_param(5, 2.0).unwrap();
        assert_eq!(f, NodalDynamics::polynomial(vec![-3.0, 0.0, 0.0, 0.0, 2.0]).unwrap());
        assert_eq!(f.param(7).unwrap(), 0.0);
        assert!(NodalDynamics::scaled_tanh(1.0, 1.0).unwrap().with_param(2, 0.0).is_err());
        assert!(NodalDynamics::sigmoid(1.0, 1.0).unwrap().with_param(3, 0.0).is_err());
    }

    fn grid_bound_holds(f: &NodalDynamics, c: f64) {
        let cand = ratio_candidates(f, c).unwrap();
        let (lo, hi) = (cand.min(), cand.max());
        for inv in &cand.interior {
            let residual = inv.r * f.eval_derivative(inv.r).unwrap() - f.eval(inv.r).unwrap();
            assert!(residual.abs() <= 1e-9 * f.eval(inv.r).unwrap().abs().max(1.0));
            assert!(inv.r.abs() <= c && inv.r != 0.0);
        }
        let n = 10_000;
        for k in 0..=n {
            let r = -c + 2.0 * c * k as f64 / n as f64;
            if r == 0.0 {
                continue;
            }
            let q = f.ratio(r).unwrap();
            let tol = 1e-9 * q.abs().max(1.0);
            assert!(q <= hi + tol && q >= lo - tol, "{f:?} c={c} r={r}: {q} not in [{lo}, {hi}]");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn candidates_bound_polynomial_ratio(
            coeffs in proptest::collection::vec(-5.0f64..5.0, 1..6),
            c in 0.05f64..4.0,
        ) {
            grid_bound_holds(&NodalDynamics::polynomial(coeffs).unwrap(), c);
        }

        #[test]
        fn candidates_bound_tanh_ratio(p1 in -5.0f64..5.0, p2 in 0.05f64..5.0, c in 0.05f64..10.0) {
            grid_bound_holds(&NodalDynamics::scaled_tanh(p1, p2).unwrap(), c);
        }

        #[test]
        fn odd_polynomials_have_symmetric_endpoints(
            p1 in -5.0f64..5.0, p3 in -5.0f64..5.0, p5 in -5.0f64..5.0, c in 0.01f64..10.0,
        ) {
            let f = NodalDynamics::polynomial(vec![p1, 0.0, p3, 0.0, p5]).unwrap();
            let cand = ratio_candidates(&f, c).unwrap();
            prop_assert_eq!(cand.at_plus_c, cand.at_minus_c);
        }
    }
}
