//! Local projective measurements, joint outcome statistics and the CGLMP
//! Bell functional.
//!
//! Settings and outcomes are 0-based throughout. Party 0 is Alice.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{config, data, Result};
use crate::linalg::{kron_all, CMatrix, CVector};
use crate::states::{named_state, DensityMatrix, NamedState, PureState};

/// Phases α for Alice's two CGLMP settings.
pub const CGLMP_ALPHA: [f64; 2] = [0.0, 0.5];
/// Phases β for Bob's two CGLMP settings.
pub const CGLMP_BETA: [f64; 2] = [0.25, -0.25];

/// One orthonormal basis; vector i is the state for outcome i.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasBasis {
    pub vectors: Vec<CVector>,
    pub party: usize,
    pub setting: usize,
}

impl MeasBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Largest |⟨i|j⟩ − δᵢⱼ|.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, u) in self.vectors.iter().enumerate() {
            for (j, v) in self.vectors.iter().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((u.dotc(v) - delta).norm());
            }
        }
        worst
    }

    /// Rows are the bra vectors ⟨i|.
    fn bra_matrix(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |i, k| self.vectors[i][k].conj())
    }
}

/// CGLMP basis for `party` (0 = Alice, 1 = Bob) and `setting` (0 or 1).
///
/// Alice: ⟨k|i⟩ = exp(i2πk(i+α)/d)/√d. Bob: ⟨l|j⟩ = exp(i2πl(−j+β)/d)/√d.
pub fn cglmp_basis(d: usize, party: usize, setting: usize) -> Result<MeasBasis> {
    if d < 2 || party > 1 || setting > 1 {
        return config(format!(
            "cglmp basis needs d >= 2, party in 0..2, setting in 0..2; got d={d}, party={party}, setting={setting}"
        ));
    }
    let norm = 1.0 / (d as f64).sqrt();
    let df = d as f64;
    let vectors = (0..d)
        .map(|i| {
            let i = i as f64;
            CVector::from_fn(d, |k, _| {
                let k = k as f64;
                let phase = if party == 0 {
                    k * (i + CGLMP_ALPHA[setting])
                } else {
                    k * (-i + CGLMP_BETA[setting])
                };
                Complex64::from_polar(norm, 2.0 * PI * phase / df)
            })
        })
        .collect();
    Ok(MeasBasis {
        vectors,
        party,
        setting,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
}

/// Eigenbasis of σ_x or σ_y; outcome 0 is eigenvalue +1.
pub fn pauli_basis(axis: PauliAxis) -> MeasBasis {
    let s = Complex64::from(FRAC_1_SQRT_2);
    let i = Complex64::i() * FRAC_1_SQRT_2;
    let (plus, minus) = match axis {
        PauliAxis::X => ([s, s], [s, -s]),
        PauliAxis::Y => ([s, i], [s, -i]),
    };
    MeasBasis {
        vectors: vec![CVector::from_row_slice(&plus), CVector::from_row_slice(&minus)],
        party: 0,
        setting: match axis {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
        },
    }
}

/// Alice's and Bob's two CGLMP settings each.
pub fn cglmp_settings(d: usize) -> Result<Vec<Vec<MeasBasis>>> {
    (0..2)
        .map(|party| (0..2).map(|s| cglmp_basis(d, party, s)).collect())
        .collect()
}

/// σ_x and σ_y on each of `n` qubits.
pub fn pauli_settings(n: usize) -> Vec<Vec<MeasBasis>> {
    (0..n)
        .map(|party| {
            [PauliAxis::X, PauliAxis::Y]
                .into_iter()
                .map(|axis| MeasBasis {
                    party,
                    ..pauli_basis(axis)
                })
                .collect()
        })
        .collect()
}

/// Joint outcome probabilities p(a₁…aₙ | x₁…xₙ).
///
/// Stored flat: the settings tuple and the outcome tuple are each read as
/// mixed-radix numbers (first party most significant), and the entry sits
/// at `settings_index · outcomes_total + outcome_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    probs: Vec<f64>,
    settings: Vec<usize>,
    outcomes: Vec<usize>,
}

impl ProbTable {
    pub fn new(probs: Vec<f64>, settings: Vec<usize>, outcomes: Vec<usize>) -> Result<Self> {
        if settings.len() != outcomes.len() || settings.is_empty() {
            return config("settings and outcomes must list the same nonzero number of parties");
        }
        let expected = settings.iter().product::<usize>() * outcomes.iter().product::<usize>();
        if probs.len() != expected {
            return config(format!("table has {} entries, expected {expected}", probs.len()));
        }
        let table = ProbTable {
            probs,
            settings,
            outcomes,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.probs.iter().find(|p| !(-1e-12..=1.0 + 1e-12).contains(*p)) {
            return data(format!("probability {p} outside [0, 1]"));
        }
        for (x, block) in self.blocks().enumerate() {
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > 1e-10 {
                return data(format!("settings block {x} sums to {sum}"));
            }
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    /// Settings per party.
    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    /// Outcomes per party.
    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn block_len(&self) -> usize {
        self.outcomes.iter().product()
    }

    /// One slice per settings tuple, in settings order.
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.block_len())
    }

    pub fn get(&self, settings: &[usize], outcomes: &[usize]) -> f64 {
        let x = settings.iter().zip(&self.settings).fold(0, |acc, (&s, &n)| acc * n + s);
        let a = outcomes.iter().zip(&self.outcomes).fold(0, |acc, (&o, &n)| acc * n + o);
        self.probs[x * self.block_len() + a]
    }

    fn is_bipartite_two_setting(&self, d: usize) -> bool {
        self.settings == [2, 2] && self.outcomes == [d, d]
    }
}

fn settings_tuples(settings: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = settings.iter().product();
    (0..total)
        .map(|mut x| {
            let mut tuple = vec![0; settings.len()];
            for p in (0..settings.len()).rev() {
                tuple[p] = x % settings[p];
                x /= settings[p];
            }
            tuple
        })
        .collect()
}

fn check_bases(dims: &[usize], bases: &[Vec<MeasBasis>]) -> Result<()> {
    if bases.len() != dims.len() {
        return config(format!("{} parties measured, state has {}", bases.len(), dims.len()));
    }
    for (p, (party, &d)) in bases.iter().zip(dims).enumerate() {
        if party.is_empty() {
            return config(format!("party {p} has no measurement basis"));
        }
        if party.iter().any(|b| b.dim() != d || b.vectors.iter().any(|v| v.len() != d)) {
            return config(format!("party {p}: basis dimension does not match subsystem dimension {d}"));
        }
    }
    Ok(())
}

fn measure_with(dims: &[usize], bases: &[Vec<MeasBasis>], block: impl Fn(&CMatrix) -> Vec<f64>) -> Result<ProbTable> {
    check_bases(dims, bases)?;
    let settings: Vec<usize> = bases.iter().map(Vec::len).collect();
    let mut probs = Vec::new();
    for tuple in settings_tuples(&settings) {
        let bras: Vec<CMatrix> = tuple
            .iter()
            .zip(bases)
            .map(|(&x, party)| party[x].bra_matrix())
            .collect();
        probs.extend(block(&kron_all(&bras)));
    }
    ProbTable::new(probs, settings, dims.to_vec())
}

/// Exact Born-rule statistics Tr((⊗Π)ρ) for every settings tuple.
pub fn outcome_distribution(rho: &DensityMatrix, bases: &[Vec<MeasBasis>]) -> Result<ProbTable> {
    measure_with(rho.dims(), bases, |m| {
        let rotated = m * rho.matrix() * m.adjoint();
        rotated.diagonal().iter().map(|z| z.re).collect()
    })
}

/// Same as [`outcome_distribution`] on |ψ⟩⟨ψ| without forming the projector.
pub fn outcome_distribution_pure(psi: &PureState, bases: &[Vec<MeasBasis>]) -> Result<ProbTable> {
    measure_with(psi.dims(), bases, |m| (m * psi.amps()).iter().map(|z| z.norm_sqr()).collect())
}

/// Replaces each settings block with the empirical frequencies of `shots`
/// multinomial draws.
pub fn sample_shots<R: Rng + ?Sized>(table: &ProbTable, shots: usize, rng: &mut R) -> Result<ProbTable> {
    if shots == 0 {
        return config("shot count must be positive");
    }
    let mut probs = Vec::with_capacity(table.probs.len());
    for block in table.blocks() {
        let weights: Vec<f64> = block.iter().map(|p| p.max(0.0)).collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| crate::Error::Data(e.to_string()))?;
        let mut counts = vec![0usize; block.len()];
        for _ in 0..shots {
            counts[dist.sample(rng)] += 1;
        }
        probs.extend(counts.iter().map(|&c| c as f64 / shots as f64));
    }
    ProbTable::new(probs, table.settings.clone(), table.outcomes.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// 4d² vector ordered (x, y, a, b).
    Flat,
    /// 2d × 2d matrix, row-major; row x·d + a, column y·d + b.
    Grid,
}

fn bipartite_d(table: &ProbTable) -> Result<usize> {
    let d = table.outcomes()[0];
    if !table.is_bipartite_two_setting(d) {
        return config(format!(
            "expected a two-party, two-setting table with equal outcome counts; got settings {:?}, outcomes {:?}",
            table.settings(),
            table.outcomes()
        ));
    }
    Ok(d)
}

fn grid_position(d: usize, flat: usize) -> usize {
    let (xy, ab) = (flat / (d * d), flat % (d * d));
    let (x, y, a, b) = (xy / 2, xy % 2, ab / d, ab % d);
    (x * d + a) * 2 * d + y * d + b
}

pub fn features_bipartite(table: &ProbTable, layout: Layout) -> Result<Vec<f64>> {
    let d = bipartite_d(table)?;
    Ok(match layout {
        Layout::Flat => table.probs.clone(),
        Layout::Grid => {
            let mut grid = vec![0.0; table.probs.len()];
            for (i, &p) in table.probs.iter().enumerate() {
                grid[grid_position(d, i)] = p;
            }
            grid
        }
    })
}

/// Inverse of [`features_bipartite`].
pub fn table_from_bipartite(features: &[f64], d: usize, layout: Layout) -> Result<ProbTable> {
    if features.len() != 4 * d * d {
        return config(format!("{} features, expected {} for d={d}", features.len(), 4 * d * d));
    }
    let probs = match layout {
        Layout::Flat => features.to_vec(),
        Layout::Grid => (0..features.len()).map(|i| features[grid_position(d, i)]).collect(),
    };
    ProbTable::new(probs, vec![2, 2], vec![d, d])
}

/// 64-vector indexed 8·(4x₁+2x₂+x₃) + (4a₁+2a₂+a₃).
pub fn features_threequbit(table: &ProbTable) -> Result<Vec<f64>> {
    if table.settings() != [2, 2, 2] || table.outcomes() != [2, 2, 2] {
        return config(format!(
            "expected three qubits with two settings each; got settings {:?}, outcomes {:?}",
            table.settings(),
            table.outcomes()
        ));
    }
    Ok(table.probs.clone())
}

pub fn table_from_threequbit(features: &[f64]) -> Result<ProbTable> {
    if features.len() != 64 {
        return config(format!("{} features, expected 64", features.len()));
    }
    ProbTable::new(features.to_vec(), vec![2, 2, 2], vec![2, 2, 2])
}

/// The CGLMP expression I_d; local-realistic models satisfy I_d ≤ 2.
///
/// P(A_a = B_b + k) sums p(a = j+k mod d, b = j | a, b) over j, and
/// P(B_b = A_a + k) = P(A_a = B_b − k).
pub fn cglmp_value(table: &ProbTable, d: usize) -> Result<f64> {
    if !table.is_bipartite_two_setting(d) {
        return config(format!(
            "cglmp_value needs a two-setting d={d} bipartite table; got settings {:?}, outcomes {:?}",
            table.settings(),
            table.outcomes()
        ));
    }
    let di = d as i64;
    let p_ab = |a: usize, b: usize, k: i64| -> f64 {
        (0..d)
            .map(|j| {
                let alice = (j as i64 + k).rem_euclid(di) as usize;
                table.probs[(a * 2 + b) * d * d + alice * d + j]
            })
            .sum()
    };
    let p_ba = |b: usize, a: usize, k: i64| p_ab(a, b, -k);
    let mut total = 0.0;
    for k in 0..(d / 2) as i64 {
        let w = 1.0 - 2.0 * k as f64 / (d as f64 - 1.0);
        let plus = p_ab(0, 0, k) + p_ba(0, 1, k + 1) + p_ab(1, 1, k) + p_ba(1, 0, k);
        let minus = p_ab(0, 0, -k - 1) + p_ba(0, 1, -k) + p_ab(1, 1, -k - 1) + p_ba(1, 0, -k - 1);
        total += w * (plus - minus);
    }
    Ok(total)
}

/// CGLMP value of a pure d×d state under the standard settings.
pub fn cglmp_of_pure(psi: &PureState) -> Result<f64> {
    let d = psi.dims()[0];
    let table = outcome_distribution_pure(psi, &cglmp_settings(d)?)?;
    cglmp_value(&table, d)
}

/// γ maximizing the CGLMP value of γ(|00⟩+|22⟩)+√(1−2γ²)|11⟩, by
/// golden-section search on [0.5, 1/√2].
pub fn optimal_psi3_gamma() -> f64 {
    let value = |g: f64| {
        named_state(NamedState::Psi3Mv { gamma: g })
            .and_then(|psi| cglmp_of_pure(&psi))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.5, FRAC_1_SQRT_2);
    let mut c = hi - ratio * (hi - lo);
    let mut e = lo + ratio * (hi - lo);
    let (mut fc, mut fe) = (value(c), value(e));
    while hi - lo > 1e-12 {
        if fc > fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - ratio * (hi - lo);
            fc = value(c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + ratio * (hi - lo);
            fe = value(e);
        }
    }
    (lo + hi) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_bases() {
        let x = pauli_basis(PauliAxis::X);
        assert_eq!(x.vectors[0][1], Complex64::from(FRAC_1_SQRT_2));
        let y = pauli_basis(PauliAxis::Y);
        assert_eq!(y.vectors[0][1], Complex64::new(0.0, FRAC_1_SQRT_2));
        assert!(x.orthonormality_error() < 1e-15);
        assert!(y.orthonormality_error() < 1e-15);
    }

    #[test]
    fn bad_arguments() {
        assert!(cglmp_basis(1, 0, 0).is_err());
        assert!(cglmp_basis(3, 2, 0).is_err());
        assert!(cglmp_basis(3, 0, 2).is_err());
        let rho = DensityMatrix::maximally_mixed(vec![3, 3]).unwrap();
        assert!(outcome_distribution(&rho, &cglmp_settings(4).unwrap()).is_err());
        assert!(outcome_distribution(&rho, &pauli_settings(3)).is_err());
        let qubits = outcome_distribution(&DensityMatrix::maximally_mixed(vec![2, 2, 2]).unwrap(), &pauli_settings(3)).unwrap();
        assert!(features_bipartite(&qubits, Layout::Flat).is_err());
        assert!(cglmp_value(&qubits, 2).is_err());
        let two = outcome_distribution(&rho, &cglmp_settings(3).unwrap()).unwrap();
        assert!(features_threequbit(&two).is_err());
    }

    #[test]
    fn grid_layout_positions() {
        let d = 3;
        let probs: Vec<f64> = (0..36).map(|i| i as f64).collect();
        let table = ProbTable { probs, settings: vec![2, 2], outcomes: vec![d, d] };
        let grid = features_bipartite(&table, Layout::Grid).unwrap();
        // x=1, y=0, a=2, b=1 → flat (1·2+0)·9 + 2·3 + 1 = 25; row 5, col 1
        assert_eq!(grid[5 * 6 + 1], 25.0);
        assert_eq!(table.get(&[1, 0], &[2, 1]), 25.0);
    }

    #[test]
    fn shot_noise_preserves_normalization() {
        let psi = named_state(NamedState::psi3_mv()).unwrap();
        let exact = outcome_distribution_pure(&psi, &cglmp_settings(3).unwrap()).unwrap();
        let mut rng = crate::rng::stream(1, 0);
        let noisy = sample_shots(&exact, 100_000, &mut rng).unwrap();
        noisy.validate().unwrap();
        let worst = exact.probs().iter().zip(noisy.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
        assert!(sample_shots(&exact, 0, &mut rng).is_err());
    }
}
