//! Representative subset selection: morphological features, PCA, cluster
//! count selection, k-means with a DBSCAN fallback and proportional
//! stratified sampling.

pub mod dbscan;
pub mod features;
pub mod kmeans;
pub mod pca;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dbscan::NOISE;
pub use features::{extract_features, FeatureVector, FEATURES_PER_LEAD};
pub use kmeans::{kmeans, silhouette_score, KMeansFit};
pub use pca::{fit_pca, PcaModel};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.95;
pub const DEFAULT_K_MAX: usize = 10;
/// Mean silhouette below which k-means is considered to have failed.
pub const MIN_SILHOUETTE: f64 = 0.1;
/// Returned by [`select_k`] for degenerate data.
pub const SENTINEL_K: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    Kmeans,
    Dbscan,
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub method: ClusterMethod,
    /// Number of clusters, noise excluded.
    pub k: usize,
    /// One label per point; [`NOISE`] marks DBSCAN noise.
    pub assignments: Vec<i32>,
    pub silhouette: Option<f64>,
}

impl Clustering {
    pub fn cluster_sizes(&self) -> BTreeMap<i32, usize> {
        let mut sizes = BTreeMap::new();
        for &l in &self.assignments {
            *sizes.entry(l).or_insert(0) += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub pca: PcaModel,
    pub clustering: Clustering,
}

impl ClusterModel {
    pub fn method(&self) -> ClusterMethod {
        self.clustering.method
    }

    pub fn k(&self) -> usize {
        self.clustering.k
    }

    pub fn assignments(&self) -> &[i32] {
        &self.clustering.assignments
    }

    pub fn pca_components(&self) -> &Array2<f64> {
        &self.pca.components
    }

    pub fn retained_variance(&self) -> f64 {
        self.pca.retained_variance
    }

    pub fn summary(&self) -> SampleSummary {
        SampleSummary {
            k: self.k(),
            method: self.method(),
            cluster_sizes: self.clustering.cluster_sizes(),
            retained_variance: self.retained_variance(),
        }
    }
}

/// JSON summary written next to a sample manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub k: usize,
    pub method: ClusterMethod,
    pub cluster_sizes: BTreeMap<i32, usize>,
    pub retained_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub variance_target: f64,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            variance_target: DEFAULT_VARIANCE_TARGET,
            k_max: DEFAULT_K_MAX,
            seed: 0,
        }
    }
}

fn all_identical(x: ArrayView2<f64>) -> bool {
    let first = x.row(0);
    x.rows()
        .into_iter()
        .all(|r| r.iter().zip(first.iter()).all(|(a, b)| (a - b).abs() <= 1e-12))
}

/// Smaller of the elbow estimate (largest second difference of inertia)
/// and the silhouette maximizer over `2..=k_max`. Ties go to the smaller k.
/// Returns [`SENTINEL_K`] when all points coincide or there are too few
/// points to compare two cluster counts.
pub fn select_k(scores: ArrayView2<f64>, k_max: usize, seed: u64) -> Result<usize> {
    if k_max < 2 {
        return Err(Error::InvalidParameter(format!("k_max {k_max} < 2")));
    }
    let n = scores.nrows();
    let k_max = k_max.min(n.saturating_sub(1));
    if n == 0 || k_max < 2 || all_identical(scores) {
        return Ok(SENTINEL_K);
    }
    let fits: Vec<KMeansFit> = (1..=k_max + 1).map(|k| kmeans(scores, k, seed)).collect();
    let inertia = |k: usize| fits[k - 1].inertia;

    let mut elbow = (2, f64::NEG_INFINITY);
    let mut silhouette = (2, f64::NEG_INFINITY);
    for k in 2..=k_max {
        let d2 = inertia(k - 1) - 2.0 * inertia(k) + inertia(k + 1);
        if d2 > elbow.1 {
            elbow = (k, d2);
        }
        let s = silhouette_score(scores, &fits[k - 1].labels).unwrap_or(-1.0);
        if s > silhouette.1 {
            silhouette = (k, s);
        }
    }
    log::debug!("elbow k={} silhouette k={}", elbow.0, silhouette.0);
    Ok(elbow.0.min(silhouette.0))
}

fn dbscan_clustering(scores: ArrayView2<f64>) -> Clustering {
    let (assignments, eps) = dbscan::dbscan_auto(scores);
    let k = assignments.iter().filter(|&&l| l >= 0).max().map_or(0, |&m| m as usize + 1);
    log::info!("dbscan eps={eps:.4} clusters={k}");
    Clustering {
        method: ClusterMethod::Dbscan,
        k,
        silhouette: silhouette_score(scores, &assignments),
        assignments,
    }
}

/// Seeded k-means, falling back to DBSCAN on an empty cluster, a mean
/// silhouette below [`MIN_SILHOUETTE`] or the sentinel k.
pub fn cluster(scores: ArrayView2<f64>, k: usize, seed: u64) -> Clustering {
    if k < 2 || k > scores.nrows() {
        return dbscan_clustering(scores);
    }
    let fit = kmeans(scores, k, seed);
    let labels: Vec<i32> = fit.labels.iter().map(|&l| l as i32).collect();
    let s = silhouette_score(scores, &labels);
    match s {
        Some(s) if !fit.has_empty_cluster && s >= MIN_SILHOUETTE => Clustering {
            method: ClusterMethod::Kmeans,
            k,
            assignments: labels,
            silhouette: Some(s),
        },
        _ => {
            log::info!(
                "k-means rejected (empty={}, silhouette={s:?}); using dbscan",
                fit.has_empty_cluster
            );
            dbscan_clustering(scores)
        }
    }
}

/// Features to PCA scores to clusters.
pub fn fit_cluster_model(features: &[FeatureVector], cfg: &SamplerConfig) -> Result<ClusterModel> {
    let (pca, scores) = fit_pca(features, cfg.variance_target)?;
    let k = select_k(scores.view(), cfg.k_max, cfg.seed)?;
    let clustering = cluster(scores.view(), k, cfg.seed);
    Ok(ClusterModel { pca, clustering })
}

/// Largest-remainder apportionment of `total` over strata `sizes`; equal
/// remainders favor the earlier stratum.
pub fn quotas(sizes: &[usize], total: usize) -> Result<Vec<usize>> {
    let n: usize = sizes.iter().sum();
    if total > n {
        return Err(Error::InvalidParameter(format!(
            "requested {total} samples from {n} records"
        )));
    }
    if n == 0 {
        return Ok(vec![0; sizes.len()]);
    }
    let exact: Vec<(usize, usize)> = sizes
        .iter()
        .map(|&s| ((total * s) / n, (total * s) % n))
        .collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.0).collect();
    let short = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| exact[b].1.cmp(&exact[a].1).then(a.cmp(&b)));
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    Ok(out)
}

/// Draws `total` record indices, each cluster (noise included) contributing
/// in proportion to its size. Output is sorted ascending.
pub fn stratified_sample(assignments: &[i32], total: usize, seed: u64) -> Result<Vec<usize>> {
    let mut strata: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in assignments.iter().enumerate() {
        strata.entry(l).or_default().push(i);
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let q = quotas(&sizes, total)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(total);
    for (members, &quota) in strata.values().zip(&q) {
        let chosen = rand::seq::index::sample(&mut rng, members.len(), quota);
        picked.extend(chosen.iter().map(|j| members[j]));
    }
    picked.sort_unstable();
    Ok(picked)
}

/// One record identifier per line.
pub fn write_manifest(ids: &[String], path: &Path) -> Result<()> {
    let mut text = String::with_capacity(ids.iter().map(|s| s.len() + 1).sum());
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::kmeans::tests::blobs;
    use super::*;
    use rand::Rng;

    const TRIANGLE: [[f64; 2]; 3] = [[0.0, 0.0], [20.0, 0.0], [10.0, 17.0]];

    #[test]
    fn three_blobs_give_three() {
        let (x, _) = blobs(&TRIANGLE, 50, 1);
        assert_eq!(select_k(x.view(), 10, 0).unwrap(), 3);
    }

    #[test]
    fn two_blobs_give_two() {
        let (x, _) = blobs(&[[0.0, 0.0], [15.0, 0.0]], 50, 2);
        assert_eq!(select_k(x.view(), 10, 0).unwrap(), 2);
    }

    #[test]
    fn identical_points_give_sentinel() {
        let x = Array2::from_elem((30, 4), 0.25);
        assert_eq!(select_k(x.view(), 10, 0).unwrap(), SENTINEL_K);
        let c = cluster(x.view(), SENTINEL_K, 0);
        assert_eq!(c.method, ClusterMethod::Dbscan);
        assert_eq!(c.k, 1);
        assert!(c.assignments.iter().all(|&l| l == 0));
    }

    #[test]
    fn blobs_cluster_with_kmeans() {
        let (x, _) = blobs(&TRIANGLE, 50, 4);
        let c = cluster(x.view(), 3, 0);
        assert_eq!(c.method, ClusterMethod::Kmeans);
        assert!(c.silhouette.unwrap() > 0.5);
    }

    #[test]
    fn uniform_noise_falls_back_to_dbscan() {
        // sklearn KMeans(8) on 400 uniform points in 20-D scores about 0.04.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_fn((400, 20), |_| rng.gen::<f64>());
        let fit = kmeans(x.view(), 8, 0);
        let labels: Vec<i32> = fit.labels.iter().map(|&l| l as i32).collect();
        assert!(silhouette_score(x.view(), &labels).unwrap() < MIN_SILHOUETTE);
        assert_eq!(cluster(x.view(), 8, 0).method, ClusterMethod::Dbscan);
    }

    #[test]
    fn quota_examples() {
        assert_eq!(quotas(&[60, 30, 10], 10).unwrap(), vec![6, 3, 1]);
        assert_eq!(quotas(&[50, 50], 3).unwrap(), vec![2, 1]);
        assert_eq!(quotas(&[7], 7).unwrap(), vec![7]);
        assert!(quotas(&[3, 3], 7).is_err());
    }

    #[test]
    fn single_cluster_full_draw_returns_everything() {
        let labels = vec![0; 25];
        assert_eq!(stratified_sample(&labels, 25, 9).unwrap(), (0..25).collect::<Vec<_>>());
    }

    #[test]
    fn noise_is_its_own_stratum() {
        let mut labels = vec![0; 90];
        labels.extend([NOISE; 10]);
        let picked = stratified_sample(&labels, 10, 0).unwrap();
        assert_eq!(picked.iter().filter(|&&i| i >= 90).count(), 1);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let ids = vec!["rec_001".to_string(), "rec_010".to_string()];
        write_manifest(&ids, &p).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), ids);
    }

    #[test]
    fn summary_json_shape() {
        let s = SampleSummary {
            k: 2,
            method: ClusterMethod::Kmeans,
            cluster_sizes: [(0, 3), (1, 4)].into_iter().collect(),
            retained_variance: 0.97,
        };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(
            j,
            r#"{"k":2,"method":"kmeans","cluster_sizes":{"0":3,"1":4},"retained_variance":0.97}"#
        );
    }

    proptest::proptest! {
        #[test]
        fn quotas_sum_and_no_duplicates(
            labels in proptest::collection::vec(-1i32..5, 1..200),
            frac in 0.0f64..=1.0,
            seed in 0u64..1000,
        ) {
            let total = (frac * labels.len() as f64).floor() as usize;
            let picked = stratified_sample(&labels, total, seed).unwrap();
            proptest::prop_assert_eq!(picked.len(), total);
            let mut d = picked.clone();
            d.dedup();
            proptest::prop_assert_eq!(d.len(), total);
            proptest::prop_assert_eq!(&picked, &stratified_sample(&labels, total, seed).unwrap());
        }
    }
}
