//! Density clustering used when k-means does not separate the data.

use std::collections::VecDeque;

use ndarray::ArrayView2;

use super::kmeans::sq_dist;

pub const NOISE: i32 = -1;
pub const MIN_SAMPLES: usize = 5;
pub const EPS_NEIGHBOR: usize = 5;

fn distance_matrix(x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(x.row(i), x.row(j)).sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Median over points of the distance to their k-th nearest other point
/// (k capped at n - 1).
pub fn median_knn_distance(x: ArrayView2<f64>, k: usize) -> f64 {
    knn_eps(&distance_matrix(x), k)
}

fn knn_eps(d: &[Vec<f64>], k: usize) -> f64 {
    let n = d.len();
    if n < 2 {
        return 0.0;
    }
    let k = k.min(n - 1);
    let mut kth: Vec<f64> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i][j]).collect();
            row.select_nth_unstable_by(k - 1, f64::total_cmp);
            row[k - 1]
        })
        .collect();
    crate::preprocess::wavelet::median(&mut kth)
}

/// Labels 0.. in discovery order, [`NOISE`] for points reachable from no
/// core point. Neighborhoods include the point itself and use `<= eps`.
pub fn dbscan(x: ArrayView2<f64>, eps: f64, min_samples: usize) -> Vec<i32> {
    dbscan_with(&distance_matrix(x), eps, min_samples)
}

fn dbscan_with(d: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<i32> {
    let n = d.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| d[i][j] <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut labels = vec![NOISE; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for start in 0..n {
        if visited[start] || !core[start] {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(p) = queue.pop_front() {
            labels[p] = next;
            if !core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if !visited[q] {
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    labels
}

/// DBSCAN with `eps` from [`median_knn_distance`] and [`MIN_SAMPLES`].
pub fn dbscan_auto(x: ArrayView2<f64>) -> (Vec<i32>, f64) {
    let d = distance_matrix(x);
    let eps = knn_eps(&d, EPS_NEIGHBOR);
    (dbscan_with(&d, eps, MIN_SAMPLES), eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn identical_points_form_one_cluster() {
        let x = Array2::from_elem((12, 3), 2.0);
        let (labels, eps) = dbscan_auto(x.view());
        assert_eq!(eps, 0.0);
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn separates_groups_and_marks_outlier() {
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push([i as f64 * 0.1, 0.0]);
            rows.push([100.0 + i as f64 * 0.1, 0.0]);
        }
        rows.push([50.0, 50.0]);
        let x = Array2::from_shape_vec((rows.len(), 2), rows.concat()).unwrap();
        let labels = dbscan(x.view(), 0.5, 5);
        assert_eq!(labels[0], 0);
        assert_eq!(labels[1], 1);
        assert!((0..6).all(|i| labels[2 * i] == 0 && labels[2 * i + 1] == 1));
        assert_eq!(labels[12], NOISE);
    }

    #[test]
    fn knn_distance_on_a_line() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0], [6.0]];
        // 5th-nearest distances: 5,4,3,3,3,4,5 -> median 4
        assert_eq!(median_knn_distance(x.view(), 5), 4.0);
    }
}
