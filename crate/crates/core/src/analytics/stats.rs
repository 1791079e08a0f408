//! Dispersion and shape statistics over trait samples and distances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::AnalyticsError;

/// Minimum rows for a covariance estimate.
pub const MIN_COVARIANCE_ROWS: usize = 10;
/// Chi-square quantile used to drop outliers.
pub const OUTLIER_QUANTILE: f64 = 0.995;
pub const KDE_GRID_POINTS: usize = 512;

/// Rows of `samples` as an n×d matrix. All rows must share a length.
pub fn to_matrix(samples: &[Vec<f64>]) -> Result<DMatrix<f64>, AnalyticsError> {
    let n = samples.len();
    if n == 0 {
        return Err(AnalyticsError::TooFewSamples { needed: 1, got: 0 });
    }
    let d = samples[0].len();
    if samples.iter().any(|r| r.len() != d) {
        return Err(AnalyticsError::LengthMismatch);
    }
    Ok(DMatrix::from_fn(n, d, |i, j| samples[i][j]))
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n)
}

/// Sample covariance with divisor n-1, exactly symmetric.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>, AnalyticsError> {
    let n = x.nrows();
    if n < 2 {
        return Err(AnalyticsError::TooFewSamples { needed: 2, got: n });
    }
    let mu = column_means(x);
    let d = x.ncols();
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for i in 0..n {
                s += (x[(i, a)] - mu[a]) * (x[(i, b)] - mu[b]);
            }
            let v = s / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Ridge added by [`covariance`]: `1e-6 * mean(diag)`, at least `1e-12`.
pub fn ridge(cov: &DMatrix<f64>) -> f64 {
    let d = cov.nrows() as f64;
    (1e-6 * cov.diagonal().sum() / d).max(1e-12)
}

/// Regularized covariance: sample covariance plus `ridge * I`. Needs at least
/// ten rows.
pub fn covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>, AnalyticsError> {
    if x.nrows() < MIN_COVARIANCE_ROWS {
        return Err(AnalyticsError::TooFewSamples { needed: MIN_COVARIANCE_ROWS, got: x.nrows() });
    }
    let mut cov = sample_covariance(x)?;
    let lambda = ridge(&cov);
    for i in 0..cov.nrows() {
        cov[(i, i)] += lambda;
    }
    Ok(cov)
}

/// Cholesky-backed distance evaluator for a fixed center and covariance.
pub struct Mahalanobis {
    mean: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Mahalanobis {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Mahalanobis, AnalyticsError> {
        if cov.nrows() != cov.ncols() || cov.nrows() != mean.len() {
            return Err(AnalyticsError::LengthMismatch);
        }
        let chol = cov.clone().cholesky().ok_or(AnalyticsError::NotPositiveDefinite)?;
        Ok(Mahalanobis { mean, chol })
    }

    /// `sqrt((x-μ)ᵀ Σ⁻¹ (x-μ))` via a triangular solve against the factor.
    pub fn distance(&self, x: &[f64]) -> Result<f64, AnalyticsError> {
        if x.len() != self.mean.len() {
            return Err(AnalyticsError::LengthMismatch);
        }
        let diff = DVector::from_column_slice(x) - &self.mean;
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .ok_or(AnalyticsError::NotPositiveDefinite)?;
        Ok(y.norm())
    }
}

pub fn mahalanobis(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> Result<f64, AnalyticsError> {
    Mahalanobis::new(DVector::from_column_slice(mean), cov)?.distance(x)
}

/// Distance of every row from the sample's own mean under its regularized
/// covariance.
pub fn self_distances(x: &DMatrix<f64>) -> Result<Vec<f64>, AnalyticsError> {
    let m = Mahalanobis::new(column_means(x), &covariance(x)?)?;
    (0..x.nrows())
        .map(|i| m.distance(x.row(i).transpose().as_slice()))
        .collect()
}

/// Squared-distance cutoff for `df` dimensions.
pub fn outlier_cutoff(df: usize) -> f64 {
    ChiSquared::new(df as f64).expect("df > 0").inverse_cdf(OUTLIER_QUANTILE)
}

/// Indices of points whose squared distance is within the chi-square(df)
/// 0.995 quantile. Single pass.
pub fn filter_outliers(distances: &[f64], df: usize) -> Result<Vec<usize>, AnalyticsError> {
    if distances.len() < MIN_COVARIANCE_ROWS {
        return Err(AnalyticsError::TooFewSamples { needed: MIN_COVARIANCE_ROWS, got: distances.len() });
    }
    let cut = outlier_cutoff(df);
    Ok((0..distances.len()).filter(|&i| distances[i] * distances[i] <= cut).collect())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample SD, divisor n-1.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Sample SD over mean.
pub fn coefficient_of_variation(xs: &[f64]) -> Result<f64, AnalyticsError> {
    if xs.len() < 2 {
        return Err(AnalyticsError::TooFewSamples { needed: 2, got: xs.len() });
    }
    let m = mean(xs);
    if m == 0.0 {
        return Err(AnalyticsError::ZeroMean);
    }
    Ok(sample_sd(xs) / m)
}

/// Fisher excess kurtosis `m4 / m2² - 3` with uncorrected moments.
pub fn excess_kurtosis(xs: &[f64]) -> Result<f64, AnalyticsError> {
    if xs.len() < 4 {
        return Err(AnalyticsError::TooFewSamples { needed: 4, got: xs.len() });
    }
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Silverman's rule `1.06 * sd * n^(-1/5)`.
pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64, AnalyticsError> {
    if xs.len() < 2 {
        return Err(AnalyticsError::TooFewSamples { needed: 2, got: xs.len() });
    }
    let sd = sample_sd(xs);
    if !(sd > 0.0) {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok(1.06 * sd * (xs.len() as f64).powf(-0.2))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
}

/// Gaussian-kernel density of `xs` with bandwidth `h` evaluated on `grid`.
pub fn kde_on_grid(xs: &[f64], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| xs.iter().map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect()
}

/// Density over a 512-point grid spanning `[min - 3h, max + 3h]`.
pub fn kde(xs: &[f64]) -> Result<Kde, AnalyticsError> {
    let h = silverman_bandwidth(xs)?;
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let grid = linspace(lo, hi, KDE_GRID_POINTS);
    let density = kde_on_grid(xs, h, &grid);
    Ok(Kde { bandwidth: h, grid, density })
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| (xw[1] - xw[0]) * (yw[0] + yw[1]) / 2.0).sum()
}

/// Explained-variance ratios of the principal components, descending.
pub fn pca_explained(x: &DMatrix<f64>) -> Result<Vec<f64>, AnalyticsError> {
    if x.nrows() < 3 {
        return Err(AnalyticsError::TooFewSamples { needed: 3, got: x.nrows() });
    }
    let cov = sample_covariance(x)?;
    let eig = SymmetricEigen::new(cov);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    if !(total > 0.0) {
        return Err(AnalyticsError::ZeroVariance);
    }
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals.into_iter().map(|v| v / total).collect())
}
