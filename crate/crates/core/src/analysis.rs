//! Evaluation metrics and the nonlocality/prediction-quality study.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use qent_nnet::ndarray::Array2;
use qent_nnet::{Model, Shape};
use rayon::prelude::*;

use crate::error::{config, data, Result};
use crate::measurement::{cglmp_settings, cglmp_value, features_bipartite, outcome_distribution, Layout};
use crate::measures::coherent_information;
use crate::states::{named_state, nmr_mixture, NamedState};

/// (1/N) Σ (yᵢ − ŷᵢ)²
pub fn mse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return data(format!(
            "mse needs equal nonempty inputs, got {} predictions and {} labels",
            predictions.len(),
            labels.len()
        ));
    }
    Ok(squared_errors(predictions, labels).iter().sum::<f64>() / labels.len() as f64)
}

pub fn squared_errors(predictions: &[f64], labels: &[f64]) -> Vec<f64> {
    predictions.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Boxplot statistics. Quartiles are medians of the lower and upper halves
/// (the overall median excluded when N is odd); min and max ignore points
/// beyond 1.5·IQR from the quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: usize,
}

pub fn five_number(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return data("five-number summary of an empty set");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = median(&v);
    let (q1, q3) = if n == 1 {
        (v[0], v[0])
    } else {
        (median(&v[..n / 2]), median(&v[n.div_ceil(2)..]))
    };
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    Ok(FiveNumber {
        min: inside[0],
        q1,
        median: med,
        q3,
        max: inside[inside.len() - 1],
        outliers: n - inside.len(),
    })
}

/// Pearson correlation coefficient.
pub fn pcc(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return data(format!("pcc needs two equal inputs of length >= 2, got {} and {}", xs.len(), ys.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return data("pcc undefined: an input has zero variance");
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean relative error |ŷ − y|/|y| over samples with |y| above a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeError {
    pub threshold: f64,
    pub mean: Option<f64>,
    pub count: usize,
}

pub const RELATIVE_THRESHOLDS: [f64; 2] = [0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub mse: f64,
    /// Of the squared errors.
    pub five_number: FiveNumber,
    pub relative: Vec<RelativeError>,
}

impl EvalReport {
    pub fn new(predictions: &[f64], labels: &[f64]) -> Result<Self> {
        let mse = mse(predictions, labels)?;
        let five_number = five_number(&squared_errors(predictions, labels))?;
        let relative = RELATIVE_THRESHOLDS
            .iter()
            .map(|&t| {
                let rel: Vec<f64> = predictions
                    .iter()
                    .zip(labels)
                    .filter(|(_, y)| y.abs() > t)
                    .map(|(p, y)| (p - y).abs() / y.abs())
                    .collect();
                RelativeError {
                    threshold: t,
                    mean: (!rel.is_empty()).then(|| rel.iter().sum::<f64>() / rel.len() as f64),
                    count: rel.len(),
                }
            })
            .collect();
        Ok(EvalReport {
            n: labels.len(),
            mse,
            five_number,
            relative,
        })
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.five_number;
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "mse={:.6e}", self.mse)?;
        writeln!(
            f,
            "sqerr_five_number={:.6e},{:.6e},{:.6e},{:.6e},{:.6e} (outliers {})",
            s.min, s.q1, s.median, s.q3, s.max, s.outliers
        )?;
        for r in &self.relative {
            match r.mean {
                Some(m) => writeln!(f, "relative_error(|label|>{})={m:.6e} over {}", r.threshold, r.count)?,
                None => writeln!(f, "relative_error(|label|>{})=none", r.threshold)?,
            }
        }
        Ok(())
    }
}

/// One (p, γ) point of the study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlocalityRecord {
    pub p: f64,
    pub gamma: f64,
    pub coherent_info: f64,
    pub violation: f64,
    pub prediction: f64,
    pub squared_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalityStudy {
    pub records: Vec<NonlocalityRecord>,
    pub pcc_error_ci: f64,
    pub pcc_error_violation: f64,
}

/// γ from 0.600 to 0.705 in steps of 0.005, then √2/2.
pub fn default_gamma_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=21).map(|i| (600 + 5 * i) as f64 / 1000.0).collect();
    g.push(FRAC_1_SQRT_2);
    g
}

/// p from 0 to 1 in steps of 0.01; points with nonpositive coherent
/// information are dropped by the study.
pub fn default_p_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Runs a d = 3 CGLMP model on p·|φ_γ⟩⟨φ_γ| + (1−p)·I/9 over the grid,
/// keeping points with positive coherent information.
pub fn nonlocality_study(model: &Model, p_grid: &[f64], gamma_grid: &[f64]) -> Result<NonlocalityStudy> {
    if model.input_len() != 36 {
        return config(format!("the study needs a d=3 model with 36 inputs, got {}", model.input_len()));
    }
    let layout = match model.input_shape() {
        Shape::Image { .. } => Layout::Grid,
        Shape::Flat(_) => Layout::Flat,
    };
    let settings = cglmp_settings(3)?;
    let points: Vec<(f64, f64)> = gamma_grid
        .iter()
        .flat_map(|&g| p_grid.iter().map(move |&p| (p, g)))
        .collect();
    let evaluated = points
        .par_iter()
        .map(|&(p, gamma)| {
            let phi = named_state(NamedState::PhiGamma(gamma))?.projector();
            let rho = nmr_mixture(p, &phi)?;
            let ci = coherent_information(&rho)?;
            if ci <= 0.0 {
                return Ok(None);
            }
            let table = outcome_distribution(&rho, &settings)?;
            let violation = cglmp_value(&table, 3)?;
            let features = features_bipartite(&table, layout)?;
            Ok(Some((p, gamma, ci, violation, features)))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<_> = evaluated.into_iter().flatten().collect();
    if kept.is_empty() {
        return data("no grid point has positive coherent information");
    }
    let rows: Vec<f64> = kept.iter().flat_map(|k| k.4.iter().copied()).collect();
    let x = Array2::from_shape_vec((kept.len(), 36), rows).expect("36 features per row");
    let predictions = model.predict(x.view())?;
    let records: Vec<NonlocalityRecord> = kept
        .iter()
        .zip(predictions.iter())
        .map(|(&(p, gamma, ci, violation, _), &pred)| NonlocalityRecord {
            p,
            gamma,
            coherent_info: ci,
            violation,
            prediction: pred,
            squared_error: (pred - ci).powi(2),
        })
        .collect();
    let err: Vec<f64> = records.iter().map(|r| r.squared_error).collect();
    let ci: Vec<f64> = records.iter().map(|r| r.coherent_info).collect();
    let viol: Vec<f64> = records.iter().map(|r| r.violation).collect();
    Ok(NonlocalityStudy {
        pcc_error_ci: pcc(&err, &ci)?,
        pcc_error_violation: pcc(&err, &viol)?,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_number_examples() {
        let s = five_number(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 1.5, 3.0, 4.5, 5.0));
        let e = five_number(&[2.5; 7]).unwrap();
        assert_eq!((e.min, e.q1, e.median, e.q3, e.max), (2.5, 2.5, 2.5, 2.5, 2.5));
        let o = five_number(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 100.0]).unwrap();
        assert_eq!(o.max, 6.0);
        assert_eq!(o.outliers, 1);
        let even = five_number(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((even.q1, even.median, even.q3), (1.5, 2.5, 3.5));
        assert!(five_number(&[]).is_err());
        assert_eq!(five_number(&[7.0]).unwrap().median, 7.0);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn pcc_examples() {
        let x = [1.0, 2.0, 3.0, 4.5];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pcc(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pcc(&x, &z).unwrap() + 1.0).abs() < 1e-12);
        assert!(pcc(&x, &[1.0; 4]).is_err());
        assert!(pcc(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn report_thresholds() {
        let r = EvalReport::new(&[0.6, 1.1, 0.0], &[0.8, 2.0, 0.1]).unwrap();
        assert_eq!(r.relative[0].count, 2);
        assert_eq!(r.relative[1].count, 1);
        assert!((r.relative[1].mean.unwrap() - 0.45).abs() < 1e-12);
        assert!(r.to_string().contains("mse="));
    }

    #[test]
    fn grids() {
        let g = default_gamma_grid();
        assert_eq!(g.len(), 23);
        assert_eq!(g[0], 0.6);
        assert_eq!(g[21], 0.705);
        assert_eq!(default_p_grid().len(), 101);
    }
}
