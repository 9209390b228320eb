//! Pure and mixed states, named states and random state samplers.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{config, data, Result};
use crate::linalg::{complex_gaussian, ginibre, hermitian_deviation, hermitian_eigenvalues, kron_vec, trace, CMatrix, CVector, ONE, ZERO};

/// Tolerance on norms, traces and Hermiticity of constructed states.
pub const STATE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted in a density matrix.
pub const EIGEN_TOL: f64 = 1e-10;
/// γ for the maximally CGLMP-violating qutrit state, as commonly quoted.
pub const PSI3_MV_GAMMA: f64 = 0.617;

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return config(format!("subsystem dimensions must all be >= 2, got {dims:?}"));
    }
    Ok(dims.iter().product())
}

/// A normalized state vector on a tensor product of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
    dims: Vec<usize>,
}

impl PureState {
    /// Wraps an amplitude vector that must already be unit norm.
    pub fn new(amps: CVector, dims: Vec<usize>) -> Result<Self> {
        let total = check_dims(&dims)?;
        if amps.len() != total {
            return config(format!("{} amplitudes for dimensions {dims:?}", amps.len()));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return data(format!("state norm is {norm}, expected 1"));
        }
        Ok(PureState { amps, dims })
    }

    /// Normalizes `amps`; fails on a (near) zero vector.
    pub fn normalized(amps: CVector, dims: Vec<usize>) -> Result<Self> {
        let norm = amps.norm();
        if !(norm > 1e-300) || !norm.is_finite() {
            return data("cannot normalize a zero vector");
        }
        PureState::new(amps / Complex64::from(norm), dims)
    }

    /// Computational basis state |index⟩.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let total = check_dims(&dims)?;
        if index >= total {
            return config(format!("basis index {index} out of range for {dims:?}"));
        }
        let mut amps = CVector::zeros(total);
        amps[index] = ONE;
        PureState::new(amps, dims)
    }

    pub fn amps(&self) -> &CVector {
        &self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            mat: &self.amps * self.amps.adjoint(),
            dims: self.dims.clone(),
        }
    }

    /// Amplitudes reshaped to (first subsystem × rest).
    pub fn amplitude_matrix(&self) -> CMatrix {
        let rows = self.dims[0];
        let cols = self.dim() / rows;
        CMatrix::from_fn(rows, cols, |i, j| self.amps[i * cols + j])
    }

    /// Applies one unitary per subsystem.
    pub fn apply_local(&self, unitaries: &[CMatrix]) -> Result<PureState> {
        let u = local_operator(&self.dims, unitaries)?;
        Ok(PureState {
            amps: u * &self.amps,
            dims: self.dims.clone(),
        })
    }
}

/// A Hermitian, positive semidefinite, unit-trace matrix with its subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let total = check_dims(&dims)?;
        if mat.nrows() != total || mat.ncols() != total {
            return config(format!(
                "{}x{} matrix for dimensions {dims:?}",
                mat.nrows(),
                mat.ncols()
            ));
        }
        let rho = DensityMatrix { mat, dims };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts(mat: CMatrix, dims: Vec<usize>) -> Self {
        DensityMatrix { mat, dims }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let total = check_dims(&dims)?;
        let mat = CMatrix::identity(total, total) / Complex64::from(total as f64);
        Ok(DensityMatrix { mat, dims })
    }

    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.mat);
        if dev > STATE_TOL {
            return data(format!("matrix is not Hermitian (deviation {dev:e})"));
        }
        let tr = trace(&self.mat);
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return data(format!("trace is {tr}, expected 1"));
        }
        let min = self.eigenvalues()[0];
        if min < -EIGEN_TOL {
            return data(format!("matrix is not positive semidefinite (eigenvalue {min:e})"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat)
    }

    pub fn trace(&self) -> f64 {
        trace(&self.mat).re
    }

    /// Tr(ρ²)
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// (U₁⊗…⊗Uₙ) ρ (U₁⊗…⊗Uₙ)†
    pub fn conjugate_local(&self, unitaries: &[CMatrix]) -> Result<DensityMatrix> {
        let u = local_operator(&self.dims, unitaries)?;
        Ok(DensityMatrix {
            mat: &u * &self.mat * u.adjoint(),
            dims: self.dims.clone(),
        })
    }

    /// Convex combination Σ wᵢ ρᵢ of states with equal dimensions.
    pub fn mix(terms: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let Some((_, first)) = terms.first() else {
            return config("empty mixture");
        };
        let mut mat = CMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in terms {
            if rho.dims != first.dims {
                return config(format!("mixing {:?} with {:?}", first.dims, rho.dims));
            }
            mat += &rho.mat * Complex64::from(*w);
        }
        Ok(DensityMatrix {
            mat,
            dims: first.dims.clone(),
        })
    }
}

fn local_operator(dims: &[usize], unitaries: &[CMatrix]) -> Result<CMatrix> {
    if unitaries.len() != dims.len()
        || unitaries
            .iter()
            .zip(dims)
            .any(|(u, &d)| u.nrows() != d || u.ncols() != d)
    {
        return config(format!("local operators do not match dimensions {dims:?}"));
    }
    Ok(crate::linalg::kron_all(unitaries))
}

/// States with closed-form amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedState {
    /// Σᵢ|ii⟩/√d
    MaxEntangled(usize),
    /// γ(|00⟩+|22⟩) + √(1−2γ²)|11⟩
    Psi3Mv { gamma: f64 },
    /// (|000⟩+|111⟩)/√2
    Ghz,
    /// (|001⟩+|010⟩+|100⟩)/√3
    W,
    /// (|110⟩+|101⟩+|011⟩)/√3
    WBar,
    /// √p|W⟩ + √(1−p)|W̄⟩
    Varphi(f64),
    /// √p|GHZ⟩ + √((1−p)/2)(|W⟩+|W̄⟩)
    VarphiPrime(f64),
    /// γ(|00⟩+|11⟩) + √(1−2γ²)|22⟩, γ ∈ [0.6, √2/2]
    PhiGamma(f64),
}

impl NamedState {
    pub fn psi3_mv() -> Self {
        NamedState::Psi3Mv {
            gamma: PSI3_MV_GAMMA,
        }
    }
}

fn from_real(dims: Vec<usize>, entries: &[(usize, f64)]) -> Result<PureState> {
    let total: usize = dims.iter().product();
    let mut amps = CVector::zeros(total);
    for &(i, a) in entries {
        amps[i] += Complex64::from(a);
    }
    PureState::new(amps, dims)
}

fn unit_interval(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return config(format!("{name}: p must be in [0, 1], got {p}"));
    }
    Ok(())
}

pub fn named_state(state: NamedState) -> Result<PureState> {
    let s3 = 1.0 / 3f64.sqrt();
    let qubits = || vec![2, 2, 2];
    match state {
        NamedState::MaxEntangled(d) => {
            if d < 2 {
                return config(format!("maximally entangled state needs d >= 2, got {d}"));
            }
            let a = 1.0 / (d as f64).sqrt();
            let entries: Vec<_> = (0..d).map(|i| (i * d + i, a)).collect();
            from_real(vec![d, d], &entries)
        }
        NamedState::Psi3Mv { gamma } => {
            if !(gamma > 0.0 && 2.0 * gamma * gamma <= 1.0 + STATE_TOL) {
                return config(format!("psi3_mv: gamma must be in (0, 1/sqrt2], got {gamma}"));
            }
            let mid = (1.0 - 2.0 * gamma * gamma).max(0.0).sqrt();
            from_real(vec![3, 3], &[(0, gamma), (4, mid), (8, gamma)])
        }
        NamedState::PhiGamma(gamma) => {
            if !(0.6..=FRAC_1_SQRT_2 + STATE_TOL).contains(&gamma) {
                return config(format!("phi_gamma: gamma must be in [0.6, sqrt2/2], got {gamma}"));
            }
            let last = (1.0 - 2.0 * gamma * gamma).max(0.0).sqrt();
            from_real(vec![3, 3], &[(0, gamma), (4, gamma), (8, last)])
        }
        NamedState::Ghz => from_real(qubits(), &[(0, FRAC_1_SQRT_2), (7, FRAC_1_SQRT_2)]),
        NamedState::W => from_real(qubits(), &[(1, s3), (2, s3), (4, s3)]),
        NamedState::WBar => from_real(qubits(), &[(6, s3), (5, s3), (3, s3)]),
        NamedState::Varphi(p) => {
            unit_interval("varphi", p)?;
            let (a, b) = (p.sqrt() * s3, (1.0 - p).sqrt() * s3);
            from_real(qubits(), &[(1, a), (2, a), (4, a), (6, b), (5, b), (3, b)])
        }
        NamedState::VarphiPrime(p) => {
            unit_interval("varphi_prime", p)?;
            let g = p.sqrt() * FRAC_1_SQRT_2;
            let w = ((1.0 - p) / 2.0).sqrt() * s3;
            let mut entries = vec![(0, g), (7, g)];
            entries.extend([1, 2, 4, 6, 5, 3].map(|i| (i, w)));
            from_real(qubits(), &entries)
        }
    }
}

/// Haar-random pure state: a normalized standard complex Gaussian vector.
pub fn haar_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<PureState> {
    let total = check_dims(dims)?;
    let amps = CVector::from_fn(total, |_, _| complex_gaussian(rng));
    PureState::normalized(amps, dims.to_vec())
}

/// Product of independent Haar-random single-party states.
pub fn separable_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<PureState> {
    check_dims(dims)?;
    let mut amps = CVector::from_element(1, ONE);
    for &d in dims {
        let local = haar_pure(&[d], rng)?;
        amps = kron_vec(&amps, local.amps());
    }
    PureState::normalized(amps, dims.to_vec())
}

/// Hilbert–Schmidt-induced random state of the given rank: G·G†/Tr(G·G†)
/// with G a D×rank matrix of i.i.d. standard complex Gaussians.
pub fn hs_mixed<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    let total = check_dims(dims)?;
    if rank == 0 || rank > total {
        return config(format!("rank must be in 1..={total}, got {rank}"));
    }
    let g = ginibre(total, rank, rng);
    let mut mat = &g * g.adjoint();
    let tr = trace(&mat).re;
    mat /= Complex64::from(tr);
    symmetrize(&mut mat);
    Ok(DensityMatrix::from_parts(mat, dims.to_vec()))
}

fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// (1−ε)·I/D + ε·ρ₀
pub fn nmr_mixture(eps: f64, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eps) {
        return config(format!("epsilon must be in [0, 1], got {eps}"));
    }
    let white = DensityMatrix::maximally_mixed(rho0.dims().to_vec())?;
    DensityMatrix::mix(&[(1.0 - eps, &white), (eps, rho0)])
}

/// α·ρ₀ + β·I/d² + γ·|ψ_me⟩⟨ψ_me| on d×d.
pub fn three_way_mixture(alpha: f64, beta: f64, gamma: f64, rho0: &DensityMatrix, d: usize) -> Result<DensityMatrix> {
    if alpha < 0.0 || beta < 0.0 || gamma < 0.0 || (alpha + beta + gamma - 1.0).abs() > STATE_TOL {
        return config(format!(
            "coefficients must be nonnegative and sum to 1, got ({alpha}, {beta}, {gamma})"
        ));
    }
    if rho0.dims() != [d, d] {
        return config(format!("rho0 has dimensions {:?}, expected [{d}, {d}]", rho0.dims()));
    }
    let white = DensityMatrix::maximally_mixed(vec![d, d])?;
    let me = named_state(NamedState::MaxEntangled(d))?.projector();
    DensityMatrix::mix(&[(alpha, rho0), (beta, &white), (gamma, &me)])
}

/// normalize(α·ψ + (1−α)·ψ_sep). If the combination (nearly) vanishes,
/// `psi_sep` is replaced by a fresh random separable state.
pub fn pure_interpolation<R: Rng + ?Sized>(
    alpha: f64,
    psi: &PureState,
    psi_sep: &PureState,
    rng: &mut R,
) -> Result<PureState> {
    if !(0.0..=1.0).contains(&alpha) {
        return config(format!("alpha must be in [0, 1], got {alpha}"));
    }
    if psi.dims() != psi_sep.dims() {
        return config(format!("dimension mismatch: {:?} vs {:?}", psi.dims(), psi_sep.dims()));
    }
    let mut sep = psi_sep.clone();
    loop {
        let v = psi.amps() * Complex64::from(alpha) + sep.amps() * Complex64::from(1.0 - alpha);
        if v.norm() >= 1e-8 {
            return PureState::normalized(v, psi.dims().to_vec());
        }
        sep = separable_pure(psi.dims(), rng)?;
    }
}

/// Reduced state on the subsystems listed in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    let n = dims.len();
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.is_empty() || keep_sorted.len() >= n || keep_sorted.iter().any(|&k| k >= n) {
        return config(format!("keep must be a nonempty strict subset of 0..{n}, got {keep:?}"));
    }
    let kept: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..n).filter(|i| !keep_sorted.contains(i)).collect();
    let dk: usize = kept.iter().product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();

    // full[k * dt + t] is the flat index with kept digits k and traced digits t
    let mut full = vec![0usize; dk * dt];
    let mut digits = vec![0usize; n];
    for idx in 0..rho.dim() {
        let mut rem = idx;
        for s in (0..n).rev() {
            digits[s] = rem % dims[s];
            rem /= dims[s];
        }
        let k = keep_sorted.iter().fold(0, |acc, &s| acc * dims[s] + digits[s]);
        let t = traced.iter().fold(0, |acc, &s| acc * dims[s] + digits[s]);
        full[k * dt + t] = idx;
    }
    let m = rho.matrix();
    let reduced = CMatrix::from_fn(dk, dk, |a, b| {
        (0..dt).fold(ZERO, |acc, t| acc + m[(full[a * dt + t], full[b * dt + t])])
    });
    Ok(DensityMatrix::from_parts(reduced, kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;
    use crate::rng::stream;

    #[test]
    fn haar_pure_is_normalized_and_deterministic() {
        let a = haar_pure(&[3, 3], &mut stream(5, 0)).unwrap();
        assert!((a.amps().norm() - 1.0).abs() < 1e-12);
        let b = haar_pure(&[2, 2, 2], &mut stream(5, 1)).unwrap();
        let c = haar_pure(&[2, 2, 2], &mut stream(5, 1)).unwrap();
        assert_eq!(b, c);
        assert!(b.amps().iter().zip(c.amps().iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
    }

    #[test]
    fn invalid_dims_are_config_errors() {
        assert!(matches!(haar_pure(&[3, 1], &mut stream(0, 0)), Err(crate::Error::Config(_))));
        assert!(matches!(hs_mixed(&[3, 3], 10, &mut stream(0, 0)), Err(crate::Error::Config(_))));
        assert!(matches!(hs_mixed(&[3, 3], 0, &mut stream(0, 0)), Err(crate::Error::Config(_))));
    }

    #[test]
    fn hs_mixed_is_valid_and_rank_one_is_pure() {
        let rho = hs_mixed(&[3, 3], 9, &mut stream(2, 0)).unwrap();
        rho.validate().unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        let pure = hs_mixed(&[3, 3], 1, &mut stream(2, 1)).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn named_states() {
        let me = named_state(NamedState::MaxEntangled(3)).unwrap();
        let s = 1.0 / 3f64.sqrt();
        for (i, a) in me.amps().iter().enumerate() {
            let expect = if i % 4 == 0 { s } else { 0.0 };
            assert!((a.re - expect).abs() < 1e-15 && a.im == 0.0);
        }
        let ghz = named_state(NamedState::Ghz).unwrap();
        assert_eq!(named_state(NamedState::VarphiPrime(1.0)).unwrap(), ghz);
        let phi = named_state(NamedState::PhiGamma(FRAC_1_SQRT_2)).unwrap();
        assert_eq!(phi.amps()[8], ZERO);
        assert!((phi.amps()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(named_state(NamedState::PhiGamma(0.5)).is_err());
        assert!(named_state(NamedState::Varphi(1.2)).is_err());
    }

    #[test]
    fn ghz_w_wbar_are_orthogonal_and_families_normalized() {
        let g = named_state(NamedState::Ghz).unwrap();
        let w = named_state(NamedState::W).unwrap();
        let wb = named_state(NamedState::WBar).unwrap();
        assert_eq!(g.inner(&w), ZERO);
        assert_eq!(g.inner(&wb), ZERO);
        assert_eq!(w.inner(&wb), ZERO);
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            for st in [NamedState::Varphi(p), NamedState::VarphiPrime(p)] {
                let psi = named_state(st).unwrap();
                assert!((psi.amps().norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nmr_mixture_endpoints() {
        let rho0 = hs_mixed(&[3, 3], 9, &mut stream(1, 0)).unwrap();
        let white = DensityMatrix::maximally_mixed(vec![3, 3]).unwrap();
        assert_eq!(nmr_mixture(0.0, &rho0).unwrap().matrix(), white.matrix());
        assert_eq!(nmr_mixture(1.0, &rho0).unwrap().matrix(), rho0.matrix());
        let zero = PureState::basis(vec![3, 3], 0).unwrap().projector();
        let half = nmr_mixture(0.5, &zero).unwrap();
        assert!((half.matrix()[(0, 0)].re - (1.0 / 18.0 + 0.5)).abs() < 1e-15);
        assert!(nmr_mixture(1.5, &rho0).is_err());
    }

    #[test]
    fn nmr_mixture_spectrum_is_affine() {
        let rho0 = hs_mixed(&[3, 3], 4, &mut stream(3, 0)).unwrap();
        let base = rho0.eigenvalues();
        for k in 0..=10 {
            let eps = k as f64 / 10.0;
            let ev = nmr_mixture(eps, &rho0).unwrap().eigenvalues();
            for (e, b) in ev.iter().zip(&base) {
                assert!((e - ((1.0 - eps) / 9.0 + eps * b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn three_way_mixture_corners() {
        let d = 3;
        let rho0 = hs_mixed(&[d, d], 9, &mut stream(4, 0)).unwrap();
        assert_eq!(three_way_mixture(1.0, 0.0, 0.0, &rho0, d).unwrap().matrix(), rho0.matrix());
        let me = three_way_mixture(0.0, 0.0, 1.0, &rho0, d).unwrap();
        assert!((me.purity() - 1.0).abs() < 1e-10);
        let rho5 = hs_mixed(&[5, 5], 25, &mut stream(4, 1)).unwrap();
        let white = three_way_mixture(0.0, 1.0, 0.0, &rho5, 5).unwrap();
        let ev = white.eigenvalues();
        assert_eq!(ev.len(), 25);
        assert!(ev.iter().all(|e| (e - 1.0 / 25.0).abs() < 1e-12));
        assert!((white.trace() - 1.0).abs() < 1e-12);
        assert!(three_way_mixture(0.5, 0.5, 0.5, &rho0, d).is_err());
        assert!(three_way_mixture(1.2, -0.2, 0.0, &rho0, d).is_err());
        // affine in the weights
        let (a, b, g) = (0.3, 0.5, 0.2);
        let mixed = three_way_mixture(a, b, g, &rho0, d).unwrap();
        let meproj = named_state(NamedState::MaxEntangled(d)).unwrap().projector();
        let direct = rho0.matrix() * Complex64::from(a)
            + CMatrix::identity(9, 9) * Complex64::from(b / 9.0)
            + meproj.matrix() * Complex64::from(g);
        assert!((mixed.matrix() - direct).camax() < 1e-12);
    }

    #[test]
    fn pure_interpolation_cases() {
        let mut rng = stream(9, 0);
        let psi = PureState::basis(vec![3, 3], 0).unwrap();
        let sep = PureState::basis(vec![3, 3], 4).unwrap();
        assert_eq!(pure_interpolation(1.0, &psi, &sep, &mut rng).unwrap(), psi);
        assert_eq!(pure_interpolation(0.0, &psi, &sep, &mut rng).unwrap(), sep);
        let half = pure_interpolation(0.5, &psi, &sep, &mut rng).unwrap();
        assert!((half.amps()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((half.amps()[4].re - FRAC_1_SQRT_2).abs() < 1e-15);
        // antipodal inputs cancel at alpha = 1/2; a fresh separable state is drawn
        let neg = PureState::new(-psi.amps().clone(), vec![3, 3]).unwrap();
        let fixed = pure_interpolation(0.5, &psi, &neg, &mut rng).unwrap();
        assert!((fixed.amps().norm() - 1.0).abs() < 1e-12);
        let other = PureState::basis(vec![2, 2, 2], 0).unwrap();
        assert!(pure_interpolation(0.5, &psi, &other, &mut rng).is_err());
    }

    #[test]
    fn partial_trace_cases() {
        let mut rng = stream(6, 0);
        let a = hs_mixed(&[3], 3, &mut rng).unwrap();
        let b = hs_mixed(&[2], 2, &mut rng).unwrap();
        let prod = DensityMatrix::from_parts(a.matrix().kronecker(b.matrix()), vec![3, 2]);
        let ra = partial_trace(&prod, &[0]).unwrap();
        assert!((ra.matrix() - a.matrix()).camax() < 1e-12);
        let rb = partial_trace(&prod, &[1]).unwrap();
        assert!((rb.matrix() - b.matrix()).camax() < 1e-12);

        for d in 2..=5 {
            let me = named_state(NamedState::MaxEntangled(d)).unwrap().projector();
            let r = partial_trace(&me, &[0]).unwrap();
            let expect = CMatrix::identity(d, d) / Complex64::from(d as f64);
            assert!((r.matrix() - expect).camax() < 1e-12);
        }

        let rho = hs_mixed(&[2, 3, 2], 12, &mut rng).unwrap();
        for keep in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2]] {
            let r = partial_trace(&rho, &keep).unwrap();
            assert!((r.trace() - 1.0).abs() < 1e-12);
            r.validate().unwrap();
        }
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &[0, 1, 2]).is_err());
    }

    #[test]
    fn local_conjugation_preserves_spectrum() {
        let mut rng = stream(8, 0);
        let rho = hs_mixed(&[3, 3], 9, &mut rng).unwrap();
        let u = [haar_unitary(3, &mut rng), haar_unitary(3, &mut rng)];
        let out = rho.conjugate_local(&u).unwrap();
        for (x, y) in out.eigenvalues().iter().zip(rho.eigenvalues()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
