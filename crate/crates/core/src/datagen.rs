//! Labeled dataset generation and persistence.
//!
//! Sample `i` of a generation call draws everything from `stream(seed, i)`,
//! and its meta records `(family, rank mode, seed, stream, parameters)`, so
//! [`regenerate`] can rebuild any sample bit for bit.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{config, data, Error, Result};
use crate::measurement::{cglmp_settings, features_bipartite, outcome_distribution, outcome_distribution_pure, pauli_settings, Layout, ProbTable};
use crate::measures::{coherent_information, coherent_information_pure, gme_pure, GmeOptions};
use crate::rng::{stream, StreamRng};
use crate::states::{haar_pure, hs_mixed, nmr_mixture, pure_interpolation, separable_pure, three_way_mixture, DensityMatrix, PureState};

/// Draws evaluated in parallel per acceptance pass.
const BINNED_CHUNK: usize = 4096;
const FORMAT_HEADER: &str = "# qent-dataset 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// (1−ε)I/D + ε|ψ⟩⟨ψ|, ψ Haar
    NmrPure,
    /// (1−ε)I/D + ερ₀, ρ₀ Hilbert–Schmidt
    NmrMixed,
    GeneralPure,
    GeneralMixed,
    /// αρ₀ + βI/d² + γ|ψ_me⟩⟨ψ_me|
    ThreeWay,
    /// normalize(a·ψ + (1−a)·ψ_sep) with a ~ U[0,1]
    InterpolatedPure,
    /// The three-qubit analogue of `InterpolatedPure`.
    ThreeQubitPure,
    ThreeQubitSeparable,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::NmrPure,
        Family::NmrMixed,
        Family::GeneralPure,
        Family::GeneralMixed,
        Family::ThreeWay,
        Family::InterpolatedPure,
        Family::ThreeQubitPure,
        Family::ThreeQubitSeparable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::NmrPure => "nmr_pure",
            Family::NmrMixed => "nmr_mixed",
            Family::GeneralPure => "general_pure",
            Family::GeneralMixed => "general_mixed",
            Family::ThreeWay => "three_way",
            Family::InterpolatedPure => "interpolated_pure",
            Family::ThreeQubitPure => "three_qubit_pure",
            Family::ThreeQubitSeparable => "three_qubit_separable",
        }
    }

    pub fn is_three_qubit(self) -> bool {
        matches!(self, Family::ThreeQubitPure | Family::ThreeQubitSeparable)
    }

    fn label_kind(self) -> LabelKind {
        if self.is_three_qubit() {
            LabelKind::Gme
        } else {
            LabelKind::CoherentInformation
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown family {s:?}")))
    }
}

/// Rank of the random ρ₀ in mixed families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Full,
    Fixed(usize),
    /// Uniform over 1..=D, drawn per sample.
    Uniform,
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Full => f.write_str("full"),
            Rank::Fixed(r) => write!(f, "{r}"),
            Rank::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for Rank {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Rank::Full),
            "uniform" => Ok(Rank::Uniform),
            _ => s
                .parse()
                .ok()
                .filter(|&r| r > 0)
                .map(Rank::Fixed)
                .ok_or_else(|| Error::Config(format!("rank must be full, uniform or a positive integer, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    /// Bits.
    CoherentInformation,
    Gme,
}

impl LabelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::CoherentInformation => "coherent_information",
            LabelKind::Gme => "gme",
        }
    }
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent_information" => Ok(LabelKind::CoherentInformation),
            "gme" => Ok(LabelKind::Gme),
            _ => config(format!("unknown label kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    /// Two CGLMP settings per party on d×d.
    Cglmp,
    /// σ_x and σ_y on each of three qubits.
    Pauli,
}

impl Measurement {
    pub fn as_str(self) -> &'static str {
        match self {
            Measurement::Cglmp => "cglmp",
            Measurement::Pauli => "pauli_xy",
        }
    }
}

impl FromStr for Measurement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cglmp" => Ok(Measurement::Cglmp),
            "pauli_xy" => Ok(Measurement::Pauli),
            _ => config(format!("unknown measurement {s:?}")),
        }
    }
}

/// What every sample of a dataset shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    /// Local dimension (2 for qubits).
    pub d: usize,
    pub measurement: Measurement,
    pub label: LabelKind,
}

impl Schema {
    pub fn bipartite(d: usize) -> Self {
        Schema {
            d,
            measurement: Measurement::Cglmp,
            label: LabelKind::CoherentInformation,
        }
    }

    pub fn three_qubit() -> Self {
        Schema {
            d: 2,
            measurement: Measurement::Pauli,
            label: LabelKind::Gme,
        }
    }

    pub fn for_family(family: Family, d: usize) -> Self {
        if family.is_three_qubit() {
            Schema::three_qubit()
        } else {
            Schema::bipartite(d)
        }
    }

    pub fn parties(&self) -> usize {
        match self.measurement {
            Measurement::Cglmp => 2,
            Measurement::Pauli => 3,
        }
    }

    pub fn feature_len(&self) -> usize {
        match self.measurement {
            Measurement::Cglmp => 4 * self.d * self.d,
            Measurement::Pauli => 64,
        }
    }

    /// Side of the 2d×2d grid layout of bipartite features.
    pub fn grid_side(&self) -> Option<usize> {
        (self.measurement == Measurement::Cglmp).then_some(2 * self.d)
    }
}

/// How a sample was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub family: Family,
    pub rank: Rank,
    pub seed: u64,
    pub stream: u64,
    /// Fixed inputs (eps, alpha, beta, gamma) followed by values drawn
    /// during sampling (rank_drawn, interp).
    pub params: Vec<(String, f64)>,
}

impl Meta {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: f64,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(schema: Schema) -> Self {
        Dataset {
            schema,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Appends `other`; schemas must agree.
    pub fn extend(&mut self, other: Dataset) -> Result<()> {
        if other.schema != self.schema {
            return data(format!("schema mismatch: {:?} vs {:?}", self.schema, other.schema));
        }
        self.samples.extend(other.samples);
        Ok(())
    }

    /// Row-major feature matrix in the requested layout.
    pub fn feature_rows(&self, layout: Layout) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len() * self.schema.feature_len());
        for s in &self.samples {
            out.extend(layout_features(&self.schema, &s.features, layout)?);
        }
        Ok(out)
    }
}

/// Reorders stored (flat) features into `layout`.
pub fn layout_features(schema: &Schema, flat: &[f64], layout: Layout) -> Result<Vec<f64>> {
    match (layout, schema.measurement) {
        (Layout::Flat, _) => Ok(flat.to_vec()),
        (Layout::Grid, Measurement::Cglmp) => {
            let d = schema.d;
            let table = ProbTable::new(flat.to_vec(), vec![2, 2], vec![d, d])?;
            features_bipartite(&table, Layout::Grid)
        }
        (Layout::Grid, Measurement::Pauli) => config("three-qubit features have no grid layout"),
    }
}

/// A state drawn by a family sampler.
#[derive(Debug, Clone)]
pub enum Drawn {
    Pure(PureState),
    Mixed(DensityMatrix),
}

/// Family, local dimension and ρ₀ rank mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampler {
    pub family: Family,
    pub d: usize,
    pub rank: Rank,
}

impl Sampler {
    pub fn new(family: Family, d: usize) -> Self {
        Sampler {
            family,
            d,
            rank: Rank::Full,
        }
    }

    pub fn with_rank(self, rank: Rank) -> Self {
        Sampler { rank, ..self }
    }

    pub fn schema(&self) -> Schema {
        Schema::for_family(self.family, self.d)
    }

    fn dims(&self) -> Vec<usize> {
        if self.family.is_three_qubit() {
            vec![2, 2, 2]
        } else {
            vec![self.d, self.d]
        }
    }

    fn mixed_rho0(&self, rng: &mut StreamRng, params: &mut Vec<(String, f64)>) -> Result<DensityMatrix> {
        let dims = self.dims();
        let total: usize = dims.iter().product();
        let rank = match self.rank {
            Rank::Full => total,
            Rank::Fixed(r) => r,
            Rank::Uniform => rng.random_range(1..=total),
        };
        params.push(("rank_drawn".into(), rank as f64));
        hs_mixed(&dims, rank, rng)
    }

    fn interpolated(&self, rng: &mut StreamRng, params: &mut Vec<(String, f64)>) -> Result<PureState> {
        let dims = self.dims();
        let a: f64 = rng.random();
        params.push(("interp".into(), a));
        let psi = haar_pure(&dims, rng)?;
        let sep = separable_pure(&dims, rng)?;
        pure_interpolation(a, &psi, &sep, rng)
    }

    /// Draws one state. `fixed` carries the family's grid parameters:
    /// `eps` for the NMR families, `alpha`/`beta`/`gamma` for three_way.
    pub fn draw(&self, fixed: &[(String, f64)], rng: &mut StreamRng) -> Result<(Drawn, Vec<(String, f64)>)> {
        let dims = self.dims();
        let get = |key: &str| {
            fixed
                .iter()
                .find(|(k, _)| k == key)
                .map(|&(_, v)| v)
                .ok_or_else(|| Error::Config(format!("{} needs parameter {key}", self.family)))
        };
        let mut params = fixed.to_vec();
        let state = match self.family {
            Family::NmrPure => {
                let psi = haar_pure(&dims, rng)?;
                Drawn::Mixed(nmr_mixture(get("eps")?, &psi.projector())?)
            }
            Family::NmrMixed => {
                let rho0 = self.mixed_rho0(rng, &mut params)?;
                Drawn::Mixed(nmr_mixture(get("eps")?, &rho0)?)
            }
            Family::GeneralPure => Drawn::Pure(haar_pure(&dims, rng)?),
            Family::GeneralMixed => Drawn::Mixed(self.mixed_rho0(rng, &mut params)?),
            Family::ThreeWay => {
                let (a, b, g) = (get("alpha")?, get("beta")?, get("gamma")?);
                let rho0 = self.mixed_rho0(rng, &mut params)?;
                Drawn::Mixed(three_way_mixture(a, b, g, &rho0, self.d)?)
            }
            Family::InterpolatedPure | Family::ThreeQubitPure => Drawn::Pure(self.interpolated(rng, &mut params)?),
            Family::ThreeQubitSeparable => Drawn::Pure(separable_pure(&dims, rng)?),
        };
        Ok((state, params))
    }

    fn label(&self, state: &Drawn, rng: &mut StreamRng) -> Result<f64> {
        match (self.family, state) {
            (Family::ThreeQubitSeparable, _) => Ok(0.0),
            (Family::ThreeQubitPure, Drawn::Pure(psi)) => Ok(gme_pure(psi, &GmeOptions::default(), rng)?.gme),
            (_, Drawn::Pure(psi)) => coherent_information_pure(psi),
            (_, Drawn::Mixed(rho)) => coherent_information(rho),
        }
    }

    fn features(&self, state: &Drawn) -> Result<Vec<f64>> {
        let bases = if self.family.is_three_qubit() {
            pauli_settings(3)
        } else {
            cglmp_settings(self.d)?
        };
        let table = match state {
            Drawn::Pure(psi) => outcome_distribution_pure(psi, &bases)?,
            Drawn::Mixed(rho) => outcome_distribution(rho, &bases)?,
        };
        Ok(table.probs().to_vec())
    }

    fn validate(&self) -> Result<()> {
        if !self.family.is_three_qubit() && self.d < 2 {
            return config(format!("local dimension must be >= 2, got {}", self.d));
        }
        if let Rank::Fixed(r) = self.rank {
            let total: usize = self.dims().iter().product();
            if r == 0 || r > total {
                return config(format!("rank {r} out of range 1..={total}"));
            }
        }
        Ok(())
    }

    /// State and label of stream `index`, without features.
    fn draw_labeled(&self, fixed: &[(String, f64)], seed: u64, index: u64) -> Result<(Drawn, f64, Meta)> {
        let mut rng = stream(seed, index);
        let (state, params) = self.draw(fixed, &mut rng)?;
        let label = self.label(&state, &mut rng)?;
        let meta = Meta {
            family: self.family,
            rank: self.rank,
            seed,
            stream: index,
            params,
        };
        Ok((state, label, meta))
    }

    /// Complete sample from stream `index`.
    pub fn sample(&self, fixed: &[(String, f64)], seed: u64, index: u64) -> Result<LabeledSample> {
        let (state, label, meta) = self.draw_labeled(fixed, seed, index)?;
        Ok(LabeledSample {
            features: self.features(&state)?,
            label,
            meta,
        })
    }
}

/// Names of the fixed parameters a family consumes.
fn fixed_keys(family: Family) -> &'static [&'static str] {
    match family {
        Family::NmrPure | Family::NmrMixed => &["eps"],
        Family::ThreeWay => &["alpha", "beta", "gamma"],
        _ => &[],
    }
}

/// Rebuilds a sample from its meta alone.
pub fn regenerate(schema: &Schema, meta: &Meta) -> Result<LabeledSample> {
    let sampler = Sampler {
        family: meta.family,
        d: schema.d,
        rank: meta.rank,
    };
    let fixed: Vec<(String, f64)> = fixed_keys(meta.family)
        .iter()
        .map(|&k| {
            meta.param(k)
                .map(|v| (k.to_string(), v))
                .ok_or_else(|| Error::Data(format!("meta lacks parameter {k}")))
        })
        .collect::<Result<_>>()?;
    sampler.sample(&fixed, meta.seed, meta.stream)
}

/// Regenerates every `stride`-th sample and returns the largest label
/// discrepancy; features must match exactly.
pub fn audit(dataset: &Dataset, stride: usize) -> Result<f64> {
    let picks: Vec<&LabeledSample> = dataset.samples.iter().step_by(stride.max(1)).collect();
    picks
        .par_iter()
        .map(|s| {
            let again = regenerate(&dataset.schema, &s.meta)?;
            if again.features != s.features {
                return data(format!("features of stream {} do not regenerate", s.meta.stream));
            }
            Ok((again.label - s.label).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// For each `(eps, count)`, `count` NMR states with that ε. Streams are
/// numbered consecutively across the whole list.
pub fn gen_epsilon_grid(sampler: Sampler, eps_counts: &[(f64, usize)], seed: u64) -> Result<Dataset> {
    sampler.validate()?;
    if !matches!(sampler.family, Family::NmrPure | Family::NmrMixed) {
        return config(format!("epsilon grids need an NMR family, got {}", sampler.family));
    }
    if let Some((e, _)) = eps_counts.iter().find(|(e, _)| !(0.0..=1.0).contains(e)) {
        return config(format!("epsilon {e} outside [0, 1]"));
    }
    let jobs: Vec<f64> = eps_counts
        .iter()
        .flat_map(|&(e, n)| std::iter::repeat_n(e, n))
        .collect();
    let samples = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| sampler.sample(&[("eps".into(), eps)], seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        schema: sampler.schema(),
        samples,
    })
}

/// Label bins for rejection sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSpec {
    /// Strictly increasing; bin i is [edges[i], edges[i+1]), the last bin closed.
    pub edges: Vec<f64>,
    pub per_bin: usize,
    /// Labels at or above this are kept without quota.
    pub uncapped_above: Option<f64>,
    /// Total draws allowed; defaults to 200 × per_bin × number of bins.
    pub max_attempts: Option<usize>,
}

impl BinSpec {
    /// Bins of `width` from `lo` up to `hi` (the last bin may be narrower).
    pub fn uniform(lo: f64, hi: f64, width: f64, per_bin: usize) -> Self {
        let mut edges = vec![lo];
        let mut k = 1;
        loop {
            let e = lo + k as f64 * width;
            if e >= hi - 1e-12 {
                edges.push(hi);
                break;
            }
            edges.push(e);
            k += 1;
        }
        BinSpec {
            edges,
            per_bin,
            uncapped_above: None,
            max_attempts: None,
        }
    }

    pub fn bins(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }

    fn bin_of(&self, label: f64) -> Option<usize> {
        let n = self.bins();
        let last = *self.edges.last()?;
        if label == last {
            return Some(n - 1);
        }
        self.edges.windows(2).position(|w| w[0] <= label && label < w[1])
    }

    fn validate(&self) -> Result<()> {
        if self.bins() == 0 || self.edges.windows(2).any(|w| !(w[0] < w[1])) {
            return config(format!("bin edges must be strictly increasing, got {:?}", self.edges));
        }
        if self.per_bin == 0 {
            return config("per-bin count must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinReport {
    pub edges: Vec<f64>,
    pub requested: usize,
    pub filled: Vec<usize>,
    pub uncapped: usize,
    pub attempts: usize,
}

impl BinReport {
    /// (bin index, missing count) for every under-filled bin.
    pub fn shortfalls(&self) -> Vec<(usize, usize)> {
        self.filled
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f < self.requested)
            .map(|(i, &f)| (i, self.requested - f))
            .collect()
    }
}

/// Rejection sampling until every bin holds `per_bin` labels or the attempt
/// budget is spent. Draws are evaluated in parallel chunks and accepted in
/// stream order, so the result does not depend on the thread count.
pub fn gen_binned(sampler: Sampler, bins: &BinSpec, seed: u64) -> Result<(Dataset, BinReport)> {
    sampler.validate()?;
    bins.validate()?;
    if matches!(sampler.family, Family::NmrPure | Family::NmrMixed | Family::ThreeWay) {
        return config(format!("{} needs grid parameters; use the grid generators", sampler.family));
    }
    let max_attempts = bins.max_attempts.unwrap_or(200 * bins.per_bin * bins.bins());
    let mut filled = vec![0usize; bins.bins()];
    let mut accepted: Vec<(Drawn, f64, Meta)> = Vec::new();
    let mut uncapped = 0;
    let mut attempts = 0;
    while attempts < max_attempts && filled.iter().any(|&f| f < bins.per_bin) {
        let end = (attempts + BINNED_CHUNK).min(max_attempts);
        let chunk = (attempts..end)
            .into_par_iter()
            .map(|i| sampler.draw_labeled(&[], seed, i as u64))
            .collect::<Result<Vec<_>>>()?;
        for (state, label, meta) in chunk {
            attempts += 1;
            if bins.uncapped_above.is_some_and(|u| label >= u) {
                uncapped += 1;
                accepted.push((state, label, meta));
            } else if let Some(b) = bins.bin_of(label) {
                if filled[b] < bins.per_bin {
                    filled[b] += 1;
                    accepted.push((state, label, meta));
                    if filled.iter().all(|&f| f >= bins.per_bin) {
                        break;
                    }
                }
            }
        }
    }
    if accepted.is_empty() {
        return data(format!("no sample fell into any bin after {attempts} attempts"));
    }
    let samples = accepted
        .par_iter()
        .map(|(state, label, meta)| {
            Ok(LabeledSample {
                features: sampler.features(state)?,
                label: *label,
                meta: meta.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = BinReport {
        edges: bins.edges.clone(),
        requested: bins.per_bin,
        filled,
        uncapped,
        attempts,
    };
    Ok((
        Dataset {
            schema: sampler.schema(),
            samples,
        },
        report,
    ))
}

/// One region of the (α, β) simplex grid: α = i·step over `alpha_range`,
/// β = j·step with α + β ≤ 1, γ = 1 − α − β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRegion {
    pub step: f64,
    /// [lo, hi) on α; hi ≥ 1 includes α = 1.
    pub alpha_range: (f64, f64),
    pub per_point: usize,
}

/// Grid points (α, β, γ) of a region, computed from integer indices.
pub fn grid_points(region: &GridRegion) -> Vec<(f64, f64, f64)> {
    let n = (1.0 / region.step).round() as usize;
    let mut out = Vec::new();
    for i in 0..=n {
        let alpha = i as f64 / n as f64;
        let inside = alpha >= region.alpha_range.0 - 1e-12
            && (alpha < region.alpha_range.1 - 1e-12 || (region.alpha_range.1 >= 1.0 && i == n));
        if !inside {
            continue;
        }
        for j in 0..=(n - i) {
            let beta = j as f64 / n as f64;
            let gamma = (n - i - j) as f64 / n as f64;
            out.push((alpha, beta, gamma));
        }
    }
    out
}

/// three_way samples on every grid point of every region.
pub fn gen_coefficient_grid(sampler: Sampler, regions: &[GridRegion], seed: u64) -> Result<Dataset> {
    sampler.validate()?;
    if sampler.family != Family::ThreeWay {
        return config(format!("coefficient grids need three_way, got {}", sampler.family));
    }
    for r in regions {
        let n = 1.0 / r.step;
        if !(r.step > 0.0 && r.step <= 1.0) || (n - n.round()).abs() > 1e-9 {
            return config(format!("grid step must divide 1, got {}", r.step));
        }
    }
    let jobs: Vec<(f64, f64, f64)> = regions
        .iter()
        .flat_map(|r| {
            grid_points(r)
                .into_iter()
                .flat_map(move |p| std::iter::repeat_n(p, r.per_point))
        })
        .collect();
    let samples = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(a, b, g))| {
            let fixed = [("alpha".into(), a), ("beta".into(), b), ("gamma".into(), g)];
            sampler.sample(&fixed, seed, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        schema: sampler.schema(),
        samples,
    })
}

/// Writes the text format: `#` header lines with the schema, then one
/// comma-separated record per sample:
/// `family,rank,seed,stream,params,label,f0,…` with params as
/// `key=value;…` and floats in 17-significant-digit scientific notation.
pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let s = &dataset.schema;
    writeln!(w, "{FORMAT_HEADER}")?;
    writeln!(w, "# d={}", s.d)?;
    writeln!(w, "# parties={}", s.parties())?;
    writeln!(w, "# measurement={}", s.measurement.as_str())?;
    writeln!(w, "# label={}", s.label.as_str())?;
    writeln!(w, "# features={}", s.feature_len())?;
    writeln!(w, "# samples={}", dataset.len())?;
    writeln!(w, "# columns=family,rank,seed,stream,params,label,f0..f{}", s.feature_len() - 1)?;
    for sample in &dataset.samples {
        let m = &sample.meta;
        let params: Vec<String> = m.params.iter().map(|(k, v)| format!("{k}={v:.16e}")).collect();
        write!(w, "{},{},{},{},{},{:.16e}", m.family, m.rank, m.seed, m.stream, params.join(";"), sample.label)?;
        for f in &sample.features {
            write!(w, ",{f:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    write_dataset(dataset, File::create(path)?)
}

fn header_value<'a>(lines: &'a [(usize, String)], key: &str) -> Result<(usize, &'a str)> {
    let prefix = format!("# {key}=");
    lines
        .iter()
        .find_map(|(n, l)| l.strip_prefix(&prefix).map(|v| (*n, v)))
        .ok_or_else(|| Error::Data(format!("dataset header lacks {key}")))
}

fn header_parse<T: FromStr>(lines: &[(usize, String)], key: &str) -> Result<T> {
    let (line, v) = header_value(lines, key)?;
    v.trim().parse().map_err(|_| Error::Record {
        line,
        record: 0,
        msg: format!("bad header value {key}={v}"),
    })
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut header = Vec::new();
    let mut first_record = None;
    for (n, line) in lines.by_ref() {
        let line = line?;
        if line.starts_with('#') {
            header.push((n, line));
        } else if !line.trim().is_empty() {
            first_record = Some((n, line));
            break;
        }
    }
    match header.first() {
        Some((_, h)) if h == FORMAT_HEADER => {}
        Some((_, h)) if h.starts_with("# qent-dataset") => {
            return data(format!("unsupported dataset version: {h}"));
        }
        _ => return data("not a qent dataset (missing format header)"),
    }
    let d: usize = header_parse(&header, "d")?;
    let measurement: Measurement = header_value(&header, "measurement")?.1.parse()?;
    let label: LabelKind = header_value(&header, "label")?.1.parse()?;
    let schema = Schema { d, measurement, label };
    let features: usize = header_parse(&header, "features")?;
    let parties: usize = header_parse(&header, "parties")?;
    if features != schema.feature_len() || parties != schema.parties() {
        return data(format!(
            "header declares {features} features / {parties} parties; schema implies {} / {}",
            schema.feature_len(),
            schema.parties()
        ));
    }
    let count: usize = header_parse(&header, "samples")?;

    let mut samples = Vec::with_capacity(count);
    let records = first_record.into_iter().map(Ok).chain(lines.map(|(n, l)| l.map(|l| (n, l))));
    for item in records {
        let (line, text) = item?;
        if text.trim().is_empty() {
            continue;
        }
        let record = samples.len();
        let bad = |msg: String| Error::Record { line, record, msg };
        if record >= count {
            return Err(bad(format!("more records than the declared {count}")));
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 6 + features {
            return Err(bad(format!("{} fields, expected {}", fields.len(), 6 + features)));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| bad(format!("bad {what} {s:?}")))
        };
        let family: Family = fields[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        if family.label_kind() != schema.label {
            return Err(bad(format!("{family} samples do not match label kind {}", schema.label.as_str())));
        }
        let rank: Rank = fields[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let seed = fields[2].parse().map_err(|_| bad(format!("bad seed {:?}", fields[2])))?;
        let stream = fields[3].parse().map_err(|_| bad(format!("bad stream {:?}", fields[3])))?;
        let mut params = Vec::new();
        for kv in fields[4].split(';').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad parameter {kv:?}")))?;
            params.push((k.to_string(), num(v, "parameter")?));
        }
        let label = num(fields[5], "label")?;
        let feats = fields[6..].iter().map(|f| num(f, "feature")).collect::<Result<Vec<_>>>()?;
        samples.push(LabeledSample {
            features: feats,
            label,
            meta: Meta {
                family,
                rank,
                seed,
                stream,
                params,
            },
        });
    }
    if samples.len() < count {
        return Err(Error::Record {
            line: 0,
            record: samples.len(),
            msg: format!("file truncated: {} of {count} records present", samples.len()),
        });
    }
    Ok(Dataset { schema, samples })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_dataset(BufReader::new(file))
}
