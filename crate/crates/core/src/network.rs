//! Random reservoir adjacency matrices and the spectral thresholds used by
//! the stability criteria.
//!
//! For the discrete-time criterion a scalar shift `K·I + A` must keep every
//! eigenvalue inside the unit disk, i.e. `|K + γ_i| ≤ 1`. This is exact for
//! the eigenvalues but bounds `‖(K·I + A) r‖` only when `K·I + A` is normal;
//! the eigenvalue form is what is implemented here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adjacency `A` (`A_ij` couples node `j` into node `i`) and input coupling `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirNetwork {
    adjacency: DMatrix<f64>,
    input: DVector<f64>,
    seed: Option<u64>,
}

impl ReservoirNetwork {
    /// Network from explicit matrices, as used for small worked examples.
    pub fn explicit(adjacency: DMatrix<f64>, input: DVector<f64>) -> Result<Self> {
        if !adjacency.is_square() || adjacency.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "adjacency must be square and nonempty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if input.len() != adjacency.nrows() {
            return Err(Error::Dimension(format!(
                "input coupling has length {}, expected {}",
                input.len(),
                adjacency.nrows()
            )));
        }
        if adjacency.iter().chain(input.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("network entries must be finite".into()));
        }
        Ok(ReservoirNetwork { adjacency, input, seed: None })
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn input(&self) -> &DVector<f64> {
        &self.input
    }

    pub fn m(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// Distribution of the input coupling weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum InputCoupling {
    /// i.i.d. uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// Every node receives the same weight.
    Constant { value: f64 },
}

impl Default for InputCoupling {
    fn default() -> Self {
        InputCoupling::Uniform { low: -1.0, high: 1.0 }
    }
}

fn default_spectral_target() -> f64 {
    0.5
}

/// Parameters of the random construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkOptions {
    #[serde(default = "default_spectral_target")]
    pub spectral_target: f64,
    #[serde(default)]
    pub input_coupling: InputCoupling,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions { spectral_target: default_spectral_target(), input_coupling: InputCoupling::default() }
    }
}

/// Builds a random reservoir:
/// 1. start from `A_ij = 1 - δ_ij`;
/// 2. zero exactly half of the off-diagonal entries, chosen uniformly;
/// 3. negate half (rounded up) of the surviving entries, chosen uniformly;
/// 4. rescale so the largest real part of the spectrum has magnitude `spectral_target`.
///
/// The random stream is consumed in the fixed order zero mask, sign mask, `w`.
pub fn construct_adjacency(m: usize, seed: u64, options: &NetworkOptions) -> Result<ReservoirNetwork> {
    if m < 2 {
        return Err(Error::Config(format!("a reservoir needs at least 2 nodes, got {m}")));
    }
    if !(options.spectral_target > 0.0) || !options.spectral_target.is_finite() {
        return Err(Error::Config("spectral target must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut off_diagonal: Vec<(usize, usize)> =
        (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let mut a = DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 1.0 });

    off_diagonal.shuffle(&mut rng);
    let n_zero = off_diagonal.len().div_ceil(2);
    for &(i, j) in &off_diagonal[..n_zero] {
        a[(i, j)] = 0.0;
    }
    let mut survivors = off_diagonal[n_zero..].to_vec();
    // Canonical order before the second shuffle so the sign mask depends only
    // on the stream, not on the first shuffle's permutation of survivors.
    survivors.sort_unstable();
    survivors.shuffle(&mut rng);
    let n_neg = survivors.len().div_ceil(2);
    for &(i, j) in &survivors[..n_neg] {
        a[(i, j)] = -1.0;
    }

    let input = match options.input_coupling {
        InputCoupling::Uniform { low, high } => {
            if !(low <= high) || !low.is_finite() || !high.is_finite() {
                return Err(Error::Config(format!("invalid input coupling range [{low}, {high}]")));
            }
            DVector::from_fn(m, |_, _| if low == high { low } else { rng.random_range(low..=high) })
        }
        InputCoupling::Constant { value } => DVector::from_element(m, value),
    };

    let adjacency = spectral_normalize(&a, options.spectral_target).map_err(|e| match e {
        Error::Construction(msg) => Error::Construction(format!("{msg} (seed {seed}); try another seed")),
        other => other,
    })?;
    Ok(ReservoirNetwork { adjacency, input, seed: Some(seed) })
}

/// Eigenvalues of a dense real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::Dimension("eigenvalues need a square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("matrix entries must be finite".into()));
    }
    let eig: Vec<Complex64> = a.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Analysis { message: "eigenvalue solver did not converge".into(), residual: f64::NAN });
    }
    Ok(eig)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Largest eigenvalue of the symmetric part `(A + Aᵀ)/2`.
pub fn alpha_max(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("alpha_max needs a square matrix".into()));
    }
    let sym = (a + a.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Returns `a · target / |max Re eig(a)|`.
pub fn spectral_normalize(a: &DMatrix<f64>, target: f64) -> Result<DMatrix<f64>> {
    let abscissa = spectral_abscissa(a)?;
    let scale_ref = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if abscissa.abs() <= 1e-12 * scale_ref {
        return Err(Error::Construction(
            "largest real part of the spectrum is zero; cannot normalize".into(),
        ));
    }
    Ok(a * (target / abscissa.abs()))
}

/// Eigenvalue data for both time domains.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub alpha_max: f64,
    #[serde(skip)]
    pub eigenvalues: Vec<Complex64>,
    /// `min_i [√(1 - Im γ_i²) - Re γ_i]`
    pub rho_plus: f64,
    /// `max_i [-(√(1 - Im γ_i²) + Re γ_i)]`
    pub rho_minus: f64,
    pub critical_plus: usize,
    pub critical_minus: usize,
}

/// Largest rightward and leftward real shifts of the spectrum that keep every
/// eigenvalue in the closed unit disk.
pub fn critical_shifts(a: &DMatrix<f64>) -> Result<SpectralSummary> {
    let eigenvalues = eigenvalues(a)?;
    shifts_from_eigenvalues(eigenvalues, alpha_max(a)?)
}

pub(crate) fn shifts_from_eigenvalues(eigenvalues: Vec<Complex64>, alpha_max: f64) -> Result<SpectralSummary> {
    let radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if radius >= 1.0 {
        return Err(Error::SpectralRadius { radius });
    }
    let mut rho_plus = f64::INFINITY;
    let mut rho_minus = f64::NEG_INFINITY;
    let (mut critical_plus, mut critical_minus) = (0, 0);
    for (i, z) in eigenvalues.iter().enumerate() {
        let half_chord = (1.0 - z.im * z.im).sqrt();
        let plus = half_chord - z.re;
        let minus = -(half_chord + z.re);
        if plus < rho_plus {
            rho_plus = plus;
            critical_plus = i;
        }
        if minus > rho_minus {
            rho_minus = minus;
            critical_minus = i;
        }
    }
    Ok(SpectralSummary { alpha_max, eigenvalues, rho_plus, rho_minus, critical_plus, critical_minus })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble_options() -> NetworkOptions {
        NetworkOptions::default()
    }

    #[test]
    fn construction_counts_at_m100() {
        let net = construct_adjacency(100, 42, &ensemble_options()).unwrap();
        let a = net.adjacency();
        let mut zeros = 0;
        let mut negatives = 0;
        for i in 0..100 {
            assert_eq!(a[(i, i)], 0.0);
            for j in 0..100 {
                if i != j {
                    if a[(i, j)] == 0.0 {
                        zeros += 1;
                    } else if a[(i, j)] < 0.0 {
                        negatives += 1;
                    }
                }
            }
        }
        assert_eq!(zeros, 4950);
        assert_eq!(negatives, 2475);
        let abscissa = spectral_abscissa(a).unwrap();
        assert!((abscissa.abs() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn construction_is_deterministic() {
        let a = construct_adjacency(30, 7, &ensemble_options()).unwrap();
        let b = construct_adjacency(30, 7, &ensemble_options()).unwrap();
        assert_eq!(a, b);
        let c = construct_adjacency(30, 8, &ensemble_options()).unwrap();
        assert_ne!(a.adjacency(), c.adjacency());
    }

    #[test]
    fn two_node_construction_cannot_be_normalized() {
        // Half of the two off-diagonals is zeroed and the survivor negated,
        // leaving a nilpotent matrix whose spectrum is {0, 0}.
        for seed in 0..8 {
            assert!(matches!(construct_adjacency(2, seed, &ensemble_options()), Err(Error::Construction(_))));
        }
    }

    #[test]
    fn input_coupling_stays_in_range() {
        let net = construct_adjacency(50, 3, &ensemble_options()).unwrap();
        assert!(net.input().iter().all(|w| (-1.0..=1.0).contains(w)));
        let opts = NetworkOptions { input_coupling: InputCoupling::Constant { value: 0.3 }, ..ensemble_options() };
        let net = construct_adjacency(5, 3, &opts).unwrap();
        assert!(net.input().iter().all(|w| *w == 0.3));
    }

    #[test]
    fn alpha_max_examples() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(alpha_max(&rot).unwrap(), 0.0);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((alpha_max(&swap).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn critical_shift_hand_example() {
        let eig = vec![Complex64::new(0.2, 0.5), Complex64::new(0.2, -0.5), Complex64::new(-0.4, 0.0)];
        let s = shifts_from_eigenvalues(eig, 0.0).unwrap();
        assert!((s.rho_plus - (0.75f64.sqrt() - 0.2)).abs() < 1e-15);
        assert!((s.rho_plus - 0.66603).abs() < 1e-5);
        assert!(s.critical_plus <= 1);
        assert!((s.rho_minus + 0.6).abs() < 1e-15);
        assert_eq!(s.critical_minus, 2);
    }

    #[test]
    fn critical_shift_from_matrix() {
        // Block diag([[0.2, 0.5], [-0.5, 0.2]], -0.4) has spectrum {0.2 ± 0.5i, -0.4}.
        let a = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.0, -0.5, 0.2, 0.0, 0.0, 0.0, -0.4]);
        let s = critical_shifts(&a).unwrap();
        assert!((s.rho_plus - (0.75f64.sqrt() - 0.2)).abs() < 1e-12);
        assert!((s.rho_minus + 0.6).abs() < 1e-12);
        assert!((s.eigenvalues[s.critical_minus].re + 0.4).abs() < 1e-12);
    }

    #[test]
    fn zero_spectrum_shifts() {
        let s = critical_shifts(&DMatrix::zeros(1, 1)).unwrap();
        assert_eq!((s.rho_plus, s.rho_minus), (1.0, -1.0));
    }

    #[test]
    fn unit_eigenvalue_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.3]);
        assert!(matches!(critical_shifts(&a), Err(Error::SpectralRadius { .. })));
    }

    #[test]
    fn spectral_normalize_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, -1.0]);
        let scaled = spectral_normalize(&a, 0.5).unwrap();
        assert_eq!(scaled, &a / 4.0);
        let again = spectral_normalize(&scaled, 0.5).unwrap();
        assert!((again - &scaled).abs().max() < 1e-12);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(spectral_normalize(&rot, 0.5), Err(Error::Construction(_))));
    }

    #[test]
    fn explicit_network_validates_shapes() {
        let a = DMatrix::zeros(2, 2);
        assert!(ReservoirNetwork::explicit(a.clone(), DVector::zeros(3)).is_err());
        assert!(ReservoirNetwork::explicit(DMatrix::zeros(2, 3), DVector::zeros(2)).is_err());
        assert_eq!(ReservoirNetwork::explicit(a, DVector::zeros(2)).unwrap().m(), 2);
    }
}
