//! Named experiment recipes: training datasets, test grids and network
//! architectures, with helpers to train and evaluate on them.

use std::fmt;
use std::str::FromStr;

use log::info;
use qent_nnet::ndarray::{Array1, Array2};
use qent_nnet::{build_cnn, build_mlp, train, History, Model, PaddingPolicy, Shape, TrainConfig};
use rand::Rng;
use rayon::prelude::*;

use crate::datagen::{gen_binned, gen_coefficient_grid, gen_epsilon_grid, layout_features, BinReport, BinSpec, Dataset, Family, GridRegion, Rank, Sampler, Schema};
use crate::error::{config, data, Error, Result};
use crate::measurement::{cglmp_settings, features_threequbit, outcome_distribution, outcome_distribution_pure, pauli_settings, Layout};
use crate::measures::{coherent_information, gme_pure, GmeOptions};
use crate::rng::stream;
use crate::states::{named_state, nmr_mixture, NamedState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetPreset {
    /// NMR mixtures of a random qutrit-pair state over an ε grid; 43,000 at scale 1.
    QutritWarmup,
    /// Three-qubit pure states binned by GME plus separable states.
    ThreeQubitGme,
    /// Qutrit NMR pure/mixed grids plus CI-binned general pure and mixed states.
    QutritGeneral,
    /// Three-way mixture grid plus the NMR and general families at dimension d.
    QuditMixture,
    /// Interpolated pure states binned by CI at dimension d.
    GeneralPure,
    /// Random mixed states binned by CI at dimension d.
    GeneralMixed,
}

impl DatasetPreset {
    pub const ALL: [DatasetPreset; 6] = [
        DatasetPreset::QutritWarmup,
        DatasetPreset::ThreeQubitGme,
        DatasetPreset::QutritGeneral,
        DatasetPreset::QuditMixture,
        DatasetPreset::GeneralPure,
        DatasetPreset::GeneralMixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetPreset::QutritWarmup => "qutrit-warmup",
            DatasetPreset::ThreeQubitGme => "three-qubit-gme",
            DatasetPreset::QutritGeneral => "qutrit-general",
            DatasetPreset::QuditMixture => "qudit-mixture",
            DatasetPreset::GeneralPure => "general-pure",
            DatasetPreset::GeneralMixed => "general-mixed",
        }
    }
}

impl fmt::Display for DatasetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown dataset preset {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetOptions {
    /// Multiplies every sample count.
    pub scale: f64,
    /// Local dimension for the qudit presets.
    pub d: usize,
    pub seed: u64,
    /// ρ₀ rank mode for mixed families.
    pub rank: Rank,
    /// Attempt budget per binned part, as a multiple of its requested total.
    pub attempt_factor: usize,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions {
            scale: 1.0,
            d: 3,
            seed: 0,
            rank: Rank::Full,
            attempt_factor: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    /// One report per binned part.
    pub reports: Vec<(String, BinReport)>,
}

fn scaled(n: usize, scale: f64) -> usize {
    ((n as f64 * scale).round() as usize).max(1)
}

/// Independent seed for part `part` of a preset.
fn part_seed(seed: u64, part: u64) -> u64 {
    stream(seed, part).random()
}

/// ε from `from` to `to` (inclusive) in steps of 1/40, as exact multiples.
fn eps_counts(from: usize, to: usize, split: usize, low: usize, high: usize, scale: f64) -> Vec<(f64, usize)> {
    (from..=to)
        .map(|i| (i as f64 / 40.0, scaled(if i <= split { low } else { high }, scale)))
        .collect()
}

struct Builder {
    opts: PresetOptions,
    parts: u64,
    out: Option<Dataset>,
    reports: Vec<(String, BinReport)>,
}

impl Builder {
    fn new(opts: PresetOptions) -> Self {
        Builder {
            opts,
            parts: 0,
            out: None,
            reports: Vec::new(),
        }
    }

    fn next_seed(&mut self) -> u64 {
        self.parts += 1;
        part_seed(self.opts.seed, self.parts - 1)
    }

    fn push(&mut self, ds: Dataset) -> Result<()> {
        match &mut self.out {
            Some(all) => all.extend(ds),
            None => {
                self.out = Some(ds);
                Ok(())
            }
        }
    }

    fn eps_grid(&mut self, family: Family, counts: &[(f64, usize)]) -> Result<()> {
        let seed = self.next_seed();
        let sampler = Sampler::new(family, self.opts.d).with_rank(self.opts.rank);
        self.push(gen_epsilon_grid(sampler, counts, seed)?)
    }

    fn binned(&mut self, family: Family, mut bins: BinSpec) -> Result<()> {
        let seed = self.next_seed();
        bins.max_attempts = Some(self.opts.attempt_factor * bins.per_bin * bins.bins());
        let sampler = Sampler::new(family, self.opts.d).with_rank(self.opts.rank);
        let (ds, report) = gen_binned(sampler, &bins, seed)?;
        for (b, missing) in report.shortfalls() {
            log::warn!(
                "{family}: bin [{:.3}, {:.3}) short by {missing} of {}",
                report.edges[b],
                report.edges[b + 1],
                report.requested
            );
        }
        info!("{family}: {} samples from {} attempts", ds.len(), report.attempts);
        self.reports.push((family.to_string(), report));
        self.push(ds)
    }

    fn finish(self) -> Result<Generated> {
        let dataset = self.out.ok_or_else(|| Error::Data("preset produced no samples".into()))?;
        Ok(Generated {
            dataset,
            reports: self.reports,
        })
    }
}

/// Builds a preset training dataset.
pub fn generate(preset: DatasetPreset, opts: &PresetOptions) -> Result<Generated> {
    if !(opts.scale > 0.0 && opts.scale.is_finite()) {
        return config(format!("scale must be positive, got {}", opts.scale));
    }
    if opts.attempt_factor == 0 {
        return config("attempt factor must be positive");
    }
    let s = opts.scale;
    let d = opts.d;
    let log_d = (d as f64).log2();
    let mut b = Builder::new(*opts);
    match preset {
        DatasetPreset::QutritWarmup => {
            b.opts.d = 3;
            b.eps_grid(Family::NmrMixed, &eps_counts(8, 40, 30, 1000, 2000, s))?;
        }
        DatasetPreset::ThreeQubitGme => {
            let mut bins = BinSpec::uniform(0.0, 0.7, 0.1, scaled(5000, s));
            bins.uncapped_above = Some(0.7);
            b.binned(Family::ThreeQubitPure, bins)?;
            b.binned(Family::ThreeQubitSeparable, BinSpec::uniform(0.0, 0.1, 0.1, scaled(5000, s)))?;
        }
        DatasetPreset::QutritGeneral => {
            b.opts.d = 3;
            let counts = eps_counts(8, 39, 30, 2000, 4000, s);
            b.eps_grid(Family::NmrPure, &counts)?;
            b.eps_grid(Family::NmrMixed, &counts)?;
            b.binned(Family::GeneralPure, BinSpec::uniform(0.0, 3f64.log2(), 0.1, scaled(4000, s)))?;
            let mut mixed = BinSpec::uniform(-(3f64.log2()), 1.5, 0.1, scaled(4000, s));
            mixed.uncapped_above = Some(1.5);
            b.binned(Family::GeneralMixed, mixed)?;
        }
        DatasetPreset::QuditMixture => {
            let seed = b.next_seed();
            let sampler = Sampler::new(Family::ThreeWay, d).with_rank(opts.rank);
            let regions = [
                GridRegion {
                    step: 0.02,
                    alpha_range: (0.4, 1.0),
                    per_point: scaled(200, s),
                },
                GridRegion {
                    step: 0.04,
                    alpha_range: (0.0, 0.4),
                    per_point: scaled(100, s),
                },
            ];
            b.push(gen_coefficient_grid(sampler, &regions, seed)?)?;
            b.eps_grid(Family::NmrPure, &eps_counts(8, 39, 30, 2000, 4000, s))?;
            b.eps_grid(Family::NmrMixed, &eps_counts(8, 39, 30, 3000, 6500, s))?;
            let pure = BinSpec::uniform(0.0, log_d, 0.1, 1);
            let per = scaled(40_000, s).div_ceil(pure.bins());
            b.binned(Family::InterpolatedPure, BinSpec { per_bin: per, ..pure })?;
            let mixed = BinSpec::uniform(-log_d, 1.5, 0.1, 1);
            let per = scaled(84_000, s).div_ceil(mixed.bins());
            b.binned(
                Family::GeneralMixed,
                BinSpec {
                    per_bin: per,
                    uncapped_above: Some(1.5),
                    ..mixed
                },
            )?;
        }
        DatasetPreset::GeneralPure => {
            let bins = BinSpec::uniform(0.0, log_d, 0.1, 1);
            let per = scaled(40_000, s).div_ceil(bins.bins());
            b.binned(Family::InterpolatedPure, BinSpec { per_bin: per, ..bins })?;
        }
        DatasetPreset::GeneralMixed => {
            let bins = BinSpec::uniform(-log_d, 1.5, 0.1, 1);
            let per = scaled(84_000, s).div_ceil(bins.bins());
            b.binned(
                Family::GeneralMixed,
                BinSpec {
                    per_bin: per,
                    uncapped_above: Some(1.5),
                    ..bins
                },
            )?;
        }
    }
    b.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestPreset {
    /// ρ = (1−ε)I/9 + ε|ψ_mv⟩⟨ψ_mv| for ε = 0, 0.005, …, 1; CI labels.
    CglmpEpsGrid,
    /// √p|W⟩ + √(1−p)|W̄⟩ for p = 0, 0.005, …, 1; GME labels.
    GmeWWbar,
    /// √p|GHZ⟩ + √((1−p)/2)(|W⟩+|W̄⟩) for p = 0, 0.005, …, 1; GME labels.
    GmeGhzW,
}

impl TestPreset {
    pub const ALL: [TestPreset; 3] = [TestPreset::CglmpEpsGrid, TestPreset::GmeWWbar, TestPreset::GmeGhzW];

    pub fn as_str(self) -> &'static str {
        match self {
            TestPreset::CglmpEpsGrid => "cglmp-eps-grid",
            TestPreset::GmeWWbar => "gme-w-wbar",
            TestPreset::GmeGhzW => "gme-ghz-w",
        }
    }

    pub fn param_name(self) -> &'static str {
        match self {
            TestPreset::CglmpEpsGrid => "eps",
            _ => "p",
        }
    }

    pub fn schema(self) -> Schema {
        match self {
            TestPreset::CglmpEpsGrid => Schema::bipartite(3),
            _ => Schema::three_qubit(),
        }
    }
}

impl fmt::Display for TestPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown test preset {s:?}")))
    }
}

/// Test states along a one-parameter curve, features in flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub schema: Schema,
    pub param_name: String,
    pub params: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl TestSet {
    pub fn from_dataset(ds: &Dataset) -> Self {
        TestSet {
            schema: ds.schema,
            param_name: "index".into(),
            params: (0..ds.len()).map(|i| i as f64).collect(),
            features: ds.samples.iter().map(|s| s.features.clone()).collect(),
            labels: ds.labels(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// 0, 0.005, …, 1 as exact multiples.
pub fn half_percent_grid() -> Vec<f64> {
    (0..=200).map(|i| i as f64 / 200.0).collect()
}

pub fn test_set(preset: TestPreset) -> Result<TestSet> {
    let params = half_percent_grid();
    let rows = params
        .par_iter()
        .enumerate()
        .map(|(i, &t)| -> Result<(Vec<f64>, f64)> {
            match preset {
                TestPreset::CglmpEpsGrid => {
                    let mv = named_state(NamedState::psi3_mv())?.projector();
                    let rho = nmr_mixture(t, &mv)?;
                    let table = outcome_distribution(&rho, &cglmp_settings(3)?)?;
                    Ok((table.probs().to_vec(), coherent_information(&rho)?))
                }
                TestPreset::GmeWWbar | TestPreset::GmeGhzW => {
                    let state = if preset == TestPreset::GmeWWbar {
                        NamedState::Varphi(t)
                    } else {
                        NamedState::VarphiPrime(t)
                    };
                    let psi = named_state(state)?;
                    let table = outcome_distribution_pure(&psi, &pauli_settings(3))?;
                    let gme = gme_pure(&psi, &GmeOptions::default(), &mut stream(0, i as u64))?.gme;
                    Ok((features_threequbit(&table)?, gme))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (features, labels) = rows.into_iter().unzip();
    Ok(TestSet {
        schema: preset.schema(),
        param_name: preset.param_name().into(),
        params,
        features,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    /// Dense 400-200-100-50.
    Mlp400,
    /// Dense 50-20-10-5.
    Mlp50,
    /// Three 2×2 convolutions and 2×2 pools on the 2d×2d grid.
    CnnK2P2,
    /// The same with 3×3 windows; padding falls back to "same" when a
    /// valid window no longer fits.
    CnnK3P3,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Mlp400, Arch::Mlp50, Arch::CnnK2P2, Arch::CnnK3P3];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Mlp400 => "mlp-400-200-100-50",
            Arch::Mlp50 => "mlp-50-20-10-5",
            Arch::CnnK2P2 => "cnn-k2p2",
            Arch::CnnK3P3 => "cnn-k3p3",
        }
    }

    pub fn layout(self) -> Layout {
        match self {
            Arch::Mlp400 | Arch::Mlp50 => Layout::Flat,
            Arch::CnnK2P2 | Arch::CnnK3P3 => Layout::Grid,
        }
    }

    pub fn build(self, schema: &Schema, seed: u64) -> Result<Model> {
        let n = schema.feature_len();
        let model = match self {
            Arch::Mlp400 => build_mlp(n, &[400, 200, 100, 50], seed)?,
            Arch::Mlp50 => build_mlp(n, &[50, 20, 10, 5], seed)?,
            Arch::CnnK2P2 | Arch::CnnK3P3 => {
                let side = schema
                    .grid_side()
                    .ok_or_else(|| Error::Config(format!("{} needs bipartite grid features", self.as_str())))?;
                let k = if self == Arch::CnnK2P2 { 2 } else { 3 };
                build_cnn(side, k, k, PaddingPolicy::SameFallback, seed)?
            }
        };
        Ok(model)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

/// Layout a model expects: grid for image inputs, flat otherwise.
pub fn model_layout(model: &Model) -> Layout {
    match model.input_shape() {
        Shape::Image { .. } => Layout::Grid,
        Shape::Flat(_) => Layout::Flat,
    }
}

fn matrix(schema: &Schema, rows: &[Vec<f64>], layout: Layout) -> Result<Array2<f64>> {
    let n = schema.feature_len();
    let mut flat = Vec::with_capacity(rows.len() * n);
    for r in rows {
        if r.len() != n {
            return data(format!("feature row of length {}, schema expects {n}", r.len()));
        }
        flat.extend(layout_features(schema, r, layout)?);
    }
    Ok(Array2::from_shape_vec((rows.len(), n), flat).expect("rows checked"))
}

/// Trains a fresh `arch` network on the dataset.
pub fn fit(arch: Arch, dataset: &Dataset, cfg: &TrainConfig, model_seed: u64) -> Result<(Model, History)> {
    if dataset.is_empty() {
        return data("cannot train on an empty dataset");
    }
    let model = arch.build(&dataset.schema, model_seed)?;
    let rows: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.features.clone()).collect();
    let x = matrix(&dataset.schema, &rows, arch.layout())?;
    let y = Array1::from(dataset.labels());
    Ok(train(model, x.view(), y.view(), cfg)?)
}

/// Predictions of `model` on flat-ordered feature rows.
pub fn predict(model: &Model, schema: &Schema, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if model.input_len() != schema.feature_len() {
        return data(format!(
            "model takes {} inputs but the data has {} features",
            model.input_len(),
            schema.feature_len()
        ));
    }
    if rows.is_empty() {
        return data("no samples to predict");
    }
    let x = matrix(schema, rows, model_layout(model))?;
    Ok(model.predict(x.view())?.to_vec())
}
