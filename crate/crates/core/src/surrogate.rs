//! Regression surrogates for calibrated thresholds as functions of (λ, n).
//!
//! Two model families are supported. `HD_LOG` regresses `ln h` on a
//! 12-term basis with an indicator for λ < 0.95; `HG_RECIP` regresses
//! `1/h` on a 20-term polynomial and logarithmic basis. Both are fitted by
//! ordinary least squares through an SVD of the column-scaled design.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateKind {
    #[serde(rename = "HD_LOG", alias = "hd")]
    HdLog,
    #[serde(rename = "HG_RECIP", alias = "hg")]
    HgRecip,
}

const HD_TERMS: [&str; 12] = [
    "1", "n", "n^2", "n^3", "lambda", "lambda^2", "1[lambda<0.95]", "1[lambda<0.95]*lambda",
    "ln(lambda)", "n*ln(lambda)", "n*lambda", "n*lambda^2",
];

const HG_TERMS: [&str; 20] = [
    "1", "ln(lambda)", "n", "n^2", "n^3", "lambda", "lambda^2", "lambda^3", "ln(n)",
    "n*ln(lambda)", "n^2*ln(lambda)", "n^3*ln(lambda)", "n*lambda", "n^2*lambda", "n^3*lambda",
    "lambda^4", "lambda*ln(n)", "lambda^5", "lambda^2*ln(n)", "lambda^3*ln(n)",
];

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::HdLog => "HD_LOG",
            SurrogateKind::HgRecip => "HG_RECIP",
        }
    }

    pub fn basis_size(self) -> usize {
        self.term_names().len()
    }

    /// Human-readable names of the basis terms, in coefficient order.
    pub fn term_names(self) -> &'static [&'static str] {
        match self {
            SurrogateKind::HdLog => &HD_TERMS,
            SurrogateKind::HgRecip => &HG_TERMS,
        }
    }

    /// Evaluates the basis at (λ, n) into `out`.
    pub fn basis_into(self, lambda: f64, n: f64, out: &mut Vec<f64>) {
        out.clear();
        let l = lambda;
        let ll = lambda.ln();
        match self {
            SurrogateKind::HdLog => {
                let ind = if l < 0.95 { 1.0 } else { 0.0 };
                out.extend_from_slice(&[
                    1.0,
                    n,
                    n * n,
                    n * n * n,
                    l,
                    l * l,
                    ind,
                    ind * l,
                    ll,
                    n * ll,
                    n * l,
                    n * l * l,
                ]);
            }
            SurrogateKind::HgRecip => {
                let ln_n = n.ln();
                out.extend_from_slice(&[
                    1.0,
                    ll,
                    n,
                    n * n,
                    n * n * n,
                    l,
                    l * l,
                    l.powi(3),
                    ln_n,
                    n * ll,
                    n * n * ll,
                    n * n * n * ll,
                    n * l,
                    n * n * l,
                    n * n * n * l,
                    l.powi(4),
                    l * ln_n,
                    l.powi(5),
                    l * l * ln_n,
                    l.powi(3) * ln_n,
                ]);
            }
        }
    }

    pub fn basis(self, lambda: f64, n: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.basis_size());
        self.basis_into(lambda, n, &mut out);
        out
    }

    /// Regression response for a threshold value.
    fn response(self, h: f64) -> f64 {
        match self {
            SurrogateKind::HdLog => h.ln(),
            SurrogateKind::HgRecip => 1.0 / h,
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hd" | "hd_log" => Ok(SurrogateKind::HdLog),
            "hg" | "hg_recip" => Ok(SurrogateKind::HgRecip),
            _ => Err(Error::InvalidConfig(format!("unknown surrogate kind {s:?}"))),
        }
    }
}

/// One calibrated threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSample {
    pub n: usize,
    pub lambda: f64,
    pub h: f64,
}

/// Fit quality and the range of the fitting data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// √(RSS / (samples − basis)) on the regression scale; 0 for a
    /// saturated fit.
    pub residual_se: f64,
    /// Pearson correlation between fitted and observed thresholds.
    pub correlation: f64,
    pub samples: usize,
    pub n_range: (f64, f64),
    pub lambda_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub kind: SurrogateKind,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub diagnostics: FitDiagnostics,
}

impl SurrogateModel {
    /// True when (λ, n) lies inside the rectangle spanned by the fit data.
    /// Models without recorded ranges contain everything.
    pub fn contains(&self, lambda: f64, n: usize) -> bool {
        let d = &self.diagnostics;
        if d.samples == 0 {
            return true;
        }
        let n = n as f64;
        let eps = 1e-12;
        n >= d.n_range.0 - eps
            && n <= d.n_range.1 + eps
            && lambda >= d.lambda_range.0 - eps
            && lambda <= d.lambda_range.1 + eps
    }

    fn linear_predictor(&self, lambda: f64, n: usize) -> f64 {
        self.kind
            .basis(lambda, n as f64)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, b)| x * b)
            .sum()
    }
}

/// Predicted threshold at (λ, n).
///
/// Queries outside the fitted range are answered by extrapolation; callers
/// that care should check [`SurrogateModel::contains`].
pub fn predict_threshold(model: &SurrogateModel, lambda: f64, n: usize) -> Result<f64> {
    if model.coefficients.len() != model.kind.basis_size() {
        return Err(Error::InvalidConfig(format!(
            "{} needs {} coefficients, got {}",
            model.kind,
            model.kind.basis_size(),
            model.coefficients.len()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositivePrediction { lambda, n });
    }
    let eta = model.linear_predictor(lambda, n);
    let h = match model.kind {
        SurrogateKind::HdLog => eta.exp(),
        SurrogateKind::HgRecip => {
            if !(eta > 0.0) {
                return Err(Error::NonPositivePrediction { lambda, n });
            }
            1.0 / eta
        }
    };
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::NonPositivePrediction { lambda, n })
    }
}

/// Least-squares solution of `x·β ≈ y` with its rank.
///
/// Columns are scaled to unit norm before the SVD so that the wide range of
/// magnitudes in a polynomial basis does not masquerade as rank loss.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, p) = x.shape();
    if m < p {
        return Err(Error::TooFewSamples { samples: m, basis: p });
    }
    let mut scaled = x.clone();
    let mut scale = vec![1.0; p];
    for (c, s) in scale.iter_mut().enumerate() {
        let norm = scaled.column(c).norm();
        if norm > 0.0 {
            *s = norm;
            scaled.column_mut(c).unscale_mut(norm);
        }
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * m.max(p) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p {
        return Err(Error::RankDeficient { rank, basis: p });
    }
    let beta = svd
        .solve(y, tol)
        .map_err(|e| Error::InvalidConfig(format!("least squares failed: {e}")))?;
    Ok(DVector::from_iterator(p, beta.iter().zip(&scale).map(|(b, s)| b / s)))
}

fn design(kind: SurrogateKind, samples: &[ThresholdSample]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = kind.basis_size();
    if samples.len() < p {
        return Err(Error::TooFewSamples {
            samples: samples.len(),
            basis: p,
        });
    }
    let mut row = Vec::with_capacity(p);
    let mut x = DMatrix::zeros(samples.len(), p);
    let mut y = DVector::zeros(samples.len());
    for (r, s) in samples.iter().enumerate() {
        if !(s.h > 0.0) || !(s.lambda > 0.0) || s.n == 0 {
            return Err(Error::InvalidConfig(format!(
                "threshold samples need positive n, lambda and h, got n={}, lambda={}, h={}",
                s.n, s.lambda, s.h
            )));
        }
        kind.basis_into(s.lambda, s.n as f64, &mut row);
        for (c, v) in row.iter().enumerate() {
            x[(r, c)] = *v;
        }
        y[r] = kind.response(s.h);
    }
    Ok((x, y))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        // Constant thresholds fitted exactly are perfectly explained.
        if saa == sbb {
            1.0
        } else {
            0.0
        }
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Fits a surrogate of the given family to calibrated thresholds.
pub fn fit_surrogate(kind: SurrogateKind, samples: &[ThresholdSample]) -> Result<SurrogateModel> {
    let (x, y) = design(kind, samples)?;
    let beta = least_squares(&x, &y)?;
    let fitted = &x * &beta;
    let rss: f64 = (&y - &fitted).iter().map(|r| r * r).sum();
    let dof = samples.len() - kind.basis_size();
    let residual_se = if dof == 0 { 0.0 } else { (rss / dof as f64).sqrt() };

    let mut model = SurrogateModel {
        kind,
        coefficients: beta.iter().copied().collect(),
        diagnostics: FitDiagnostics::default(),
    };
    let observed: Vec<f64> = samples.iter().map(|s| s.h).collect();
    let predicted: Vec<f64> = fitted
        .iter()
        .map(|&eta| match kind {
            SurrogateKind::HdLog => eta.exp(),
            SurrogateKind::HgRecip => 1.0 / eta,
        })
        .collect();
    let range = |f: &dyn Fn(&ThresholdSample) -> f64| {
        samples
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    model.diagnostics = FitDiagnostics {
        residual_se,
        correlation: pearson(&predicted, &observed),
        samples: samples.len(),
        n_range: range(&|s| s.n as f64),
        lambda_range: range(&|s| s.lambda),
    };
    Ok(model)
}

/// `ln h_D` regressed on the 12-term leader basis.
pub fn fit_hd_surrogate(samples: &[ThresholdSample]) -> Result<SurrogateModel> {
    fit_surrogate(SurrogateKind::HdLog, samples)
}

/// `1/h_G` regressed on the 20-term collaborative basis.
pub fn fit_hg_surrogate(samples: &[ThresholdSample]) -> Result<SurrogateModel> {
    fit_surrogate(SurrogateKind::HgRecip, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ns: &[usize], lambdas: &[f64], h: impl Fn(usize, f64) -> f64) -> Vec<ThresholdSample> {
        let mut out = Vec::new();
        for &n in ns {
            for &lambda in lambdas {
                out.push(ThresholdSample { n, lambda, h: h(n, lambda) });
            }
        }
        out
    }

    const LAMBDAS: [f64; 12] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.97, 1.0];

    #[test]
    fn recovers_noiseless_hd_coefficients() {
        let truth = [-1.2, 2e-3, -3e-6, 1e-9, 0.3, -0.1, 0.05, 0.02, 0.04, 1e-4, -2e-4, 1e-4];
        let model = SurrogateModel {
            kind: SurrogateKind::HdLog,
            coefficients: truth.to_vec(),
            diagnostics: FitDiagnostics::default(),
        };
        let samples = grid(&[100, 125, 150, 175, 200, 250], &LAMBDAS, |n, l| {
            predict_threshold(&model, l, n).unwrap()
        });
        let fit = fit_hd_surrogate(&samples).unwrap();
        for (b, t) in fit.coefficients.iter().zip(truth) {
            assert!((b - t).abs() <= 1e-8 * t.abs().max(1e-3), "{b} vs {t}");
        }
        assert!(fit.diagnostics.residual_se < 1e-9);
        assert!(fit.diagnostics.correlation > 0.999_999);
    }

    #[test]
    fn recovers_noiseless_hg_fit() {
        let mut truth = vec![0.0; 20];
        truth[0] = 2.0;
        truth[1] = 0.1;
        truth[2] = 1e-3;
        truth[5] = -0.2;
        truth[8] = 0.05;
        let model = SurrogateModel {
            kind: SurrogateKind::HgRecip,
            coefficients: truth.clone(),
            diagnostics: FitDiagnostics::default(),
        };
        let samples = grid(&[20, 30, 45, 60, 80, 100, 150], &LAMBDAS, |n, l| {
            predict_threshold(&model, l, n).unwrap()
        });
        let fit = fit_hg_surrogate(&samples).unwrap();
        for (s, _) in samples.iter().zip(0..) {
            let p = predict_threshold(&fit, s.lambda, s.n).unwrap();
            assert!((p - s.h).abs() < 1e-9 * s.h);
        }
        assert!(fit.diagnostics.residual_se < 1e-9);
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design() {
        let samples = grid(&[50, 60, 75, 90, 100], &LAMBDAS, |n, l| {
            0.2 + 0.1 * l.sqrt() + 1e-3 * n as f64 + 0.01 * ((n as f64 * l).sin())
        });
        let (x, y) = design(SurrogateKind::HdLog, &samples).unwrap();
        let beta = least_squares(&x, &y).unwrap();
        let resid = &y - &x * &beta;
        let xtr = x.transpose() * resid;
        for (c, v) in xtr.iter().enumerate() {
            let scale = x.column(c).norm() * y.norm();
            assert!(v.abs() <= 1e-8 * scale, "column {c}: {v}");
        }
    }

    #[test]
    fn too_few_and_rank_deficient() {
        let few = grid(&[100], &[0.1, 0.5, 0.9], |_, _| 0.3);
        assert_eq!(
            fit_hd_surrogate(&few),
            Err(Error::TooFewSamples { samples: 3, basis: 12 })
        );
        // A single network size cannot identify the n terms.
        let flat = grid(&[100], &[0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.97, 1.0, 0.99, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85], |_, l| 0.3 + l);
        assert!(matches!(fit_hg_surrogate(&flat), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn reciprocal_prediction_must_be_positive() {
        let mut coefficients = vec![0.0; 20];
        coefficients[0] = -1.0;
        let model = SurrogateModel {
            kind: SurrogateKind::HgRecip,
            coefficients,
            diagnostics: FitDiagnostics::default(),
        };
        assert!(matches!(
            predict_threshold(&model, 0.5, 50),
            Err(Error::NonPositivePrediction { .. })
        ));
    }

    #[test]
    fn hull_membership() {
        let samples = grid(&[50, 60, 75, 90, 100], &LAMBDAS, |n, l| 0.3 + 0.1 * l + 1e-3 * n as f64);
        let fit = fit_hd_surrogate(&samples).unwrap();
        assert!(fit.contains(0.5, 75));
        assert!(!fit.contains(0.05, 75));
        assert!(!fit.contains(0.5, 120));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [SurrogateKind::HdLog, SurrogateKind::HgRecip] {
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(serde_json::from_str::<SurrogateKind>(&json).unwrap(), kind);
            assert_eq!(kind.name().parse::<SurrogateKind>().unwrap(), kind);
        }
        assert_eq!(SurrogateKind::HdLog.basis_size(), 12);
        assert_eq!(SurrogateKind::HgRecip.basis_size(), 20);
    }
}
