use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use std::collections::HashMap;

use super::SynthesisError;
use crate::geometry::PointCloud;

/// Default neighborhood size for plane fits.
pub const DEFAULT_K: usize = 16;

/// Per-point normals from local plane fits. Points whose neighborhood has
/// rank below two get `valid[i] == false` and a placeholder normal.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    pub valid: Vec<bool>,
    /// Smallest covariance eigenvalue over the eigenvalue sum: 0 on a
    /// plane, up to 1/3 on isotropic clutter. High on edges and corners.
    pub variation: Vec<f64>,
}

impl NormalEstimate {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Fits a plane to each point's `k` nearest neighbors (the point included)
/// and orients the normal toward the camera origin. `k` is clamped to the
/// number of other points.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalEstimate, SynthesisError> {
    if k < 3 {
        return Err(SynthesisError::InvalidInput(format!("k = {k}, need at least 3")));
    }
    if cloud.len() < 3 {
        return Err(SynthesisError::InvalidInput(format!("{} points, need at least 3", cloud.len())));
    }
    let k = k.min(cloud.len() - 1);
    let grid = Grid::new(&cloud.points);
    let mut normals = Vec::with_capacity(cloud.len());
    let mut valid = Vec::with_capacity(cloud.len());
    let mut variation = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points.iter().enumerate() {
        let neighbors = grid.nearest(&cloud.points, p, k + 1);
        match fit_normal(&cloud.points, &neighbors) {
            Some((mut n, v)) => {
                if n.dot(&(-p)) < 0.0 {
                    n = -n;
                }
                normals.push(n);
                valid.push(true);
                variation.push(v);
            }
            None => {
                let toward = -p.try_normalize(1e-12).unwrap_or(Vector3::z());
                normals.push(toward);
                valid.push(false);
                variation.push(1.0 / 3.0);
            }
        }
        debug_assert_eq!(normals.len(), i + 1);
    }
    Ok(NormalEstimate { cloud: PointCloud { points: cloud.points.clone(), normals: Some(normals) }, valid, variation })
}

fn fit_normal(points: &[Vector3<f64>], idx: &[usize]) -> Option<(Vector3<f64>, f64)> {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| points[i]).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    if largest <= 0.0 || eig.eigenvalues[order[1]] <= largest * 1e-9 {
        return None;
    }
    let variation = eig.eigenvalues[order[0]].max(0.0) / eig.eigenvalues.iter().map(|e| e.max(0.0)).sum::<f64>();
    Some((eig.eigenvectors.column(order[0]).into_owned().try_normalize(1e-12)?, variation))
}

/// Uniform hash grid for exact k-nearest-neighbor queries.
struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    max_ring: i64,
}

impl Grid {
    fn new(points: &[Vector3<f64>]) -> Self {
        let (lo, hi) = points
            .iter()
            .fold((Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        let extent = (hi - lo).max().max(1e-9);
        // about two surface samples per cell edge
        let cell = 2.0 * extent / (points.len() as f64).sqrt().max(1.0);
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key_of(cell, p)).or_default().push(i);
        }
        let max_ring = (extent / cell).ceil() as i64 + 1;
        Self { cell, cells, max_ring }
    }

    fn key_of(cell: f64, p: &Vector3<f64>) -> (i64, i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
    }

    /// Indices of the `k` points nearest to `q`, ties by index.
    fn nearest(&self, points: &[Vector3<f64>], q: &Vector3<f64>, k: usize) -> Vec<usize> {
        let c = Self::key_of(self.cell, q);
        let mut found: Vec<(f64, usize)> = Vec::new();
        for r in 0..=self.max_ring {
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        if let Some(ids) = self.cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                            found.extend(ids.iter().map(|&i| ((points[i] - q).norm_squared(), i)));
                        }
                    }
                }
            }
            // every point within r cells of distance has now been seen
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let reach = r as f64 * self.cell;
                if found[k - 1].0 <= reach * reach {
                    break;
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.into_iter().take(k).map(|(_, i)| i).collect()
    }
}
