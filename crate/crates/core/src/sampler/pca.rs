//! Z-scored PCA with a cumulative-variance cutoff.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};

use super::features::FeatureVector;

const ZERO_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PcaModel {
    /// Input dimensions with non-zero variance.
    pub kept_dims: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// One row per retained component, over `kept_dims`.
    pub components: Array2<f64>,
    pub explained_ratio: Vec<f64>,
    pub retained_variance: f64,
    pub score_means: Vec<f64>,
    pub score_stds: Vec<f64>,
}

impl PcaModel {
    pub fn num_components(&self) -> usize {
        self.components.nrows()
    }

    /// Projects raw feature vectors into re-scaled component scores.
    pub fn transform(&self, features: &[FeatureVector]) -> Result<Array2<f64>> {
        let m = self.num_components();
        let mut out = Array2::zeros((features.len(), m));
        for (i, f) in features.iter().enumerate() {
            let z: Vec<f64> = self
                .kept_dims
                .iter()
                .enumerate()
                .map(|(j, &d)| {
                    f.values
                        .get(d)
                        .map(|v| (v - self.means[j]) / self.stds[j])
                        .ok_or_else(|| Error::DimensionMismatch {
                            expected: format!("> {d} features"),
                            found: f.values.len().to_string(),
                        })
                })
                .collect::<Result<_>>()?;
            for c in 0..m {
                let s: f64 = self.components.row(c).iter().zip(&z).map(|(a, b)| a * b).sum();
                out[[i, c]] = (s - self.score_means[c]) / self.score_stds[c];
            }
        }
        Ok(out)
    }
}

fn mean_std(col: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = col.clone().sum::<f64>() / n;
    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits PCA on z-scored features and returns the model with the re-scaled
/// training scores (records x components).
pub fn fit_pca(features: &[FeatureVector], variance_target: f64) -> Result<(PcaModel, Array2<f64>)> {
    if features.len() < 2 {
        return Err(Error::EmptyInput("PCA needs at least 2 records"));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variance target {variance_target} outside (0, 1]"
        )));
    }
    let d = features[0].values.len();
    for f in features {
        if f.values.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d.to_string(),
                found: f.values.len().to_string(),
            });
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature in record {}",
                f.record_index
            )));
        }
    }
    let n = features.len();
    let nf = n as f64;

    let (mut kept_dims, mut means, mut stds) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..d {
        let (mean, std) = mean_std(features.iter().map(|f| f.values[j]), nf);
        if std > ZERO_VARIANCE * mean.abs().max(1.0) {
            kept_dims.push(j);
            means.push(mean);
            stds.push(std);
        }
    }
    let p = kept_dims.len();
    if p == 0 {
        let model = PcaModel {
            kept_dims,
            means,
            stds,
            components: Array2::zeros((0, 0)),
            explained_ratio: Vec::new(),
            retained_variance: 1.0,
            score_means: Vec::new(),
            score_stds: Vec::new(),
        };
        return Ok((model, Array2::zeros((n, 0))));
    }

    let z = DMatrix::from_fn(n, p, |i, j| {
        (features[i].values[kept_dims[j]] - means[j]) / stds[j]
    });
    let cov = (z.transpose() * &z) / nf;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let explained_ratio: Vec<f64> = values.iter().map(|v| v / total).collect();

    let mut m = 0;
    let mut retained = 0.0;
    while m < p && retained < variance_target - 1e-12 {
        retained += explained_ratio[m];
        m += 1;
    }
    let retained_variance = retained.min(1.0);

    let mut components = Array2::zeros((m, p));
    for (c, &src) in order.iter().take(m).enumerate() {
        let v = eig.eigenvectors.column(src);
        // Sign convention: largest-magnitude loading positive.
        let pivot = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            components[[c, j]] = sign * v[j];
        }
    }

    let mut scores = Array2::zeros((n, m));
    for i in 0..n {
        for c in 0..m {
            scores[[i, c]] = (0..p).map(|j| z[(i, j)] * components[[c, j]]).sum::<f64>();
        }
    }
    let (mut score_means, mut score_stds) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for c in 0..m {
        let (mean, std) = mean_std(scores.column(c).iter().copied(), nf);
        let std = if std > ZERO_VARIANCE { std } else { 1.0 };
        scores.column_mut(c).mapv_inplace(|v| (v - mean) / std);
        score_means.push(mean);
        score_stds.push(std);
    }

    let model = PcaModel {
        kept_dims,
        means,
        stds,
        components,
        explained_ratio,
        retained_variance,
        score_means,
        score_stds,
    };
    Ok((model, scores))
}
