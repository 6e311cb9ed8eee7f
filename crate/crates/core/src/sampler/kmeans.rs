//! Seeded k-means with k-means++ seeding, and the silhouette score.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const MAX_ITER: usize = 300;
pub const TOLERANCE: f64 = 1e-4;
pub const N_INIT: usize = 4;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Some cluster ended with no members.
    pub has_empty_cluster: bool,
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<f64>, centers: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(x: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centers = Array2::zeros((k, x.ncols()));
    centers.row_mut(0).assign(&x.row(rng.gen_range(0..n)));
    let mut d2: Vec<f64> = x.rows().into_iter().map(|r| sq_dist(r, centers.row(0))).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            Err(_) => rng.gen_range(0..n),
        };
        centers.row_mut(c).assign(&x.row(pick));
        for (i, r) in x.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centers.row(c)));
        }
    }
    centers
}

fn lloyd(x: ArrayView2<f64>, mut centers: Array2<f64>, tol: f64) -> KMeansFit {
    let (n, dim) = x.dim();
    let k = centers.nrows();
    let mut labels = vec![0usize; n];
    let mut iterations = 0;
    let mut has_empty_cluster = false;
    for it in 1..=MAX_ITER {
        iterations = it;
        for (i, r) in x.rows().into_iter().enumerate() {
            labels[i] = nearest(r, &centers).0;
        }
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, r) in x.rows().into_iter().enumerate() {
            sums.row_mut(labels[i]).scaled_add(1.0, &r);
            counts[labels[i]] += 1;
        }
        has_empty_cluster = counts.contains(&0);
        let mut shift = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let new = sums.row(c).mapv(|v| v / counts[c] as f64);
            shift += sq_dist(new.view(), centers.row(c));
            centers.row_mut(c).assign(&new);
        }
        if shift <= tol {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, r) in x.rows().into_iter().enumerate() {
        let (c, d) = nearest(r, &centers);
        labels[i] = c;
        inertia += d;
    }
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    has_empty_cluster |= counts.contains(&0);
    KMeansFit {
        centers,
        labels,
        inertia,
        iterations,
        has_empty_cluster,
    }
}

/// Best of [`N_INIT`] seeded runs by inertia. The convergence tolerance is
/// relative to the mean per-dimension variance of `x`.
pub fn kmeans(x: ArrayView2<f64>, k: usize, seed: u64) -> KMeansFit {
    assert!(k >= 1 && k <= x.nrows(), "k must be in 1..=n");
    let n = x.nrows() as f64;
    let mean_var = if x.ncols() == 0 {
        0.0
    } else {
        x.columns()
            .into_iter()
            .map(|c| {
                let m = c.sum() / n;
                c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
            })
            .sum::<f64>()
            / x.ncols() as f64
    };
    let tol = TOLERANCE * mean_var;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..N_INIT {
        let fit = lloyd(x, plus_plus_init(x, k, &mut rng), tol);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    best.expect("N_INIT > 0")
}

/// Mean silhouette over all points; `None` with fewer than 2 labels present.
/// Points alone in their cluster score 0. Label values are arbitrary.
pub fn silhouette_score<L: Copy + Ord + Sync>(x: ArrayView2<f64>, labels: &[L]) -> Option<f64> {
    let n = x.nrows();
    let mut ids: Vec<L> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 || ids.len() >= n {
        return None;
    }
    let idx: Vec<usize> = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    let mut sizes = vec![0usize; ids.len()];
    for &c in &idx {
        sizes[c] += 1;
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sums = vec![0.0; ids.len()];
            for j in 0..n {
                if i != j {
                    sums[idx[j]] += sq_dist(x.row(i), x.row(j)).sqrt();
                }
            }
            let own = idx[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..ids.len())
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Some(total / n as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::StandardNormal;

    /// Gaussian blobs (sigma 1) on the given centers, `per` points each.
    pub(crate) fn blobs(centers: &[[f64; 2]], per: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((centers.len() * per, 2));
        let mut truth = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for p in 0..per {
                for d in 0..2 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x[[c * per + p, d]] = center[d] + z;
                }
                truth.push(c);
            }
        }
        (x, truth)
    }

    #[test]
    fn silhouette_matches_reference() {
        // sklearn.metrics.silhouette_score on the same points.
        let x = array![[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0], [10.0, 10.0], [1.0, 0.5]];
        let s = silhouette_score(x.view(), &[0, 0, 1, 1, 1, 0]).unwrap();
        assert!((s - 0.32066227623892485).abs() < 1e-12, "{s}");
    }

    #[test]
    fn silhouette_needs_two_clusters() {
        let x = array![[0.0], [1.0], [2.0]];
        assert!(silhouette_score(x.view(), &[0, 0, 0]).is_none());
        assert!(silhouette_score(x.view(), &[0, 1, 2]).is_none());
    }

    #[test]
    fn recovers_separated_blobs() {
        let (x, _) = blobs(&[[0.0, 0.0], [20.0, 0.0], [10.0, 17.0]], 60, 3);
        let fit = kmeans(x.view(), 3, 0);
        assert!(!fit.has_empty_cluster);
        for c in 0..3 {
            let l = fit.labels[c * 60];
            assert!((0..60).all(|p| fit.labels[c * 60 + p] == l));
        }
        let s = silhouette_score(x.view(), &fit.labels).unwrap();
        assert!(s > 0.5, "{s}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (x, _) = blobs(&[[0.0, 0.0], [5.0, 5.0]], 40, 9);
        let a = kmeans(x.view(), 4, 11);
        let b = kmeans(x.view(), 4, 11);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }

    #[test]
    fn single_cluster_inertia_is_total_sum_of_squares() {
        let x = array![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]];
        assert!((kmeans(x.view(), 1, 0).inertia - 8.0).abs() < 1e-12);
    }

    #[test]
    fn identical_points_leave_clusters_empty() {
        let x = Array2::from_elem((10, 2), 1.5);
        assert!(kmeans(x.view(), 3, 0).has_empty_cluster);
    }
}
