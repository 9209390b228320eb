//! Entanglement labels: von Neumann entropy, coherent information and the
//! geometric measure of entanglement of pure states.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{config, data, Result};
use crate::linalg::{hermitian_deviation, hermitian_eigenvalues, CVector, ZERO};
use crate::rng::stream;
use crate::states::{haar_pure, partial_trace, DensityMatrix, PureState};

/// Eigenvalues at or below this contribute nothing to an entropy.
pub const ENTROPY_CUTOFF: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;

/// −Σ λ log₂ λ, skipping λ ≤ 1e-12.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    -eigenvalues
        .iter()
        .filter(|&&l| l > ENTROPY_CUTOFF)
        .map(|&l| l * l.log2())
        .sum::<f64>()
}

/// S(ρ) in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let dev = hermitian_deviation(rho.matrix());
    if dev > HERMITIAN_TOL {
        return data(format!("entropy of a non-Hermitian matrix (deviation {dev:e})"));
    }
    Ok(entropy_of_spectrum(&rho.eigenvalues()))
}

/// I_C(ρ) = S(ρ_A) − S(ρ) in bits.
pub fn coherent_information(rho: &DensityMatrix) -> Result<f64> {
    if rho.dims().len() != 2 {
        return config(format!("coherent information needs two parties, got {:?}", rho.dims()));
    }
    let reduced = partial_trace(rho, &[0])?;
    Ok(von_neumann_entropy(&reduced)? - von_neumann_entropy(rho)?)
}

/// Coherent information of a pure bipartite state, S(ρ_A).
pub fn coherent_information_pure(psi: &PureState) -> Result<f64> {
    if psi.dims().len() != 2 {
        return config(format!("coherent information needs two parties, got {:?}", psi.dims()));
    }
    let m = psi.amplitude_matrix();
    Ok(entropy_of_spectrum(&hermitian_eigenvalues(&(&m * m.adjoint()))))
}

/// Largest Schmidt coefficient of a two-party pure state, from an SVD.
pub fn max_schmidt_coefficient(psi: &PureState) -> Result<f64> {
    if psi.dims().len() != 2 {
        return config(format!("Schmidt decomposition needs two parties, got {:?}", psi.dims()));
    }
    let sv = psi.amplitude_matrix().singular_values();
    Ok(sv.iter().copied().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmeOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for GmeOptions {
    fn default() -> Self {
        GmeOptions {
            restarts: 20,
            max_iters: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmeResult {
    /// 1 − overlap²
    pub gme: f64,
    /// Best max |⟨ψ|φ₁⊗…⊗φₙ⟩| found.
    pub overlap: f64,
    pub restarts_used: usize,
    /// Whether at least one restart met the tolerance.
    pub converged: bool,
    /// Largest overlap among the random starting points.
    pub best_initial_overlap: f64,
    /// Overlap after each single-party update of the winning restart,
    /// starting with its initial overlap.
    pub history: Vec<f64>,
}

struct Contractor {
    dims: Vec<usize>,
    /// digits[idx][party] of every flat index
    digits: Vec<Vec<usize>>,
}

impl Contractor {
    fn new(dims: &[usize]) -> Self {
        let total: usize = dims.iter().product();
        let digits = (0..total)
            .map(|mut idx| {
                let mut ds = vec![0; dims.len()];
                for p in (0..dims.len()).rev() {
                    ds[p] = idx % dims[p];
                    idx /= dims[p];
                }
                ds
            })
            .collect();
        Contractor {
            dims: dims.to_vec(),
            digits,
        }
    }

    /// v[k] = Σ ψ[…k…] Πⱼ≠party conj(φⱼ)
    fn partial(&self, psi: &CVector, factors: &[CVector], party: usize) -> CVector {
        let mut v = CVector::zeros(self.dims[party]);
        for (idx, ds) in self.digits.iter().enumerate() {
            let mut w = psi[idx];
            for (j, f) in factors.iter().enumerate() {
                if j != party {
                    w *= f[ds[j]].conj();
                }
            }
            v[ds[party]] += w;
        }
        v
    }

    fn overlap(&self, psi: &CVector, factors: &[CVector]) -> f64 {
        let v = self.partial(psi, factors, 0);
        v.iter().zip(factors[0].iter()).fold(ZERO, |acc, (a, f)| acc + a * f.conj()).norm()
    }
}

/// Alternating maximization of the product-state overlap from one start.
/// Returns (history, converged).
fn climb(c: &Contractor, psi: &CVector, mut factors: Vec<CVector>, opts: &GmeOptions) -> (Vec<f64>, bool) {
    let mut history = vec![c.overlap(psi, &factors)];
    let mut sweep_start = history[0];
    for _ in 0..opts.max_iters {
        for party in 0..factors.len() {
            let v = c.partial(psi, &factors, party);
            let norm = v.norm();
            if norm > 0.0 {
                factors[party] = v / Complex64::from(norm);
            }
            // an exact argmax never lowers the overlap; guard against rounding
            let last = *history.last().unwrap();
            history.push(norm.max(last));
        }
        let now = *history.last().unwrap();
        if now - sweep_start < opts.tol {
            return (history, true);
        }
        sweep_start = now;
    }
    (history, false)
}

/// Geometric measure 1 − max|⟨ψ|product⟩|² by multistart alternating
/// maximization. Restart r uses the stream `(seed drawn from rng, r)`.
pub fn gme_pure<R: Rng + ?Sized>(psi: &PureState, opts: &GmeOptions, rng: &mut R) -> Result<GmeResult> {
    if psi.dims().len() < 2 {
        return config("GME needs at least two parties");
    }
    if opts.restarts == 0 || opts.max_iters == 0 || !(opts.tol >= 0.0) {
        return config(format!("invalid GME options {opts:?}"));
    }
    let c = Contractor::new(psi.dims());
    let seed: u64 = rng.random();
    let mut best: Option<(Vec<f64>, bool)> = None;
    let mut best_initial = 0.0f64;
    let mut any_converged = false;
    for r in 0..opts.restarts {
        let mut srng = stream(seed, r as u64);
        let factors = psi
            .dims()
            .iter()
            .map(|&d| haar_pure(&[d], &mut srng).map(|s| s.amps().clone()))
            .collect::<Result<Vec<_>>>()?;
        let (history, converged) = climb(&c, psi.amps(), factors, opts);
        any_converged |= converged;
        best_initial = best_initial.max(history[0]);
        let better = match &best {
            None => true,
            Some((h, _)) => history.last() > h.last(),
        };
        if better {
            best = Some((history, converged));
        }
    }
    let (history, _) = best.expect("at least one restart");
    let overlap = history.last().copied().unwrap().min(1.0);
    Ok(GmeResult {
        gme: 1.0 - overlap * overlap,
        overlap,
        restarts_used: opts.restarts,
        converged: any_converged,
        best_initial_overlap: best_initial,
        history,
    })
}
