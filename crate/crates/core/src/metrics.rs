//! Geometry distortion metrics: D1 (point-to-point) and D2
//! (point-to-plane) PSNR, and Chamfer distance.
//!
//! Conventions:
//! * `mse(A → B)` averages, over `a ∈ A`, the squared error between `a` and
//!   its nearest neighbor in `B` (ties: lowest index in `B`).
//! * The symmetric MSE is `max(mse(A → B), mse(B → A))`.
//! * `PSNR = 10 log10(3 peak² / MSE)`, `+∞` when the MSE is zero; the peak
//!   defaults to `2^N - 1`.
//! * D2 projects each displacement onto the normal of the matched point,
//!   estimated as the least-variance direction of its 9 nearest neighbors
//!   (itself included) within its own cloud.
//! * Chamfer distance is `mean_A min_B |a-b|² + mean_B min_A |b-a|²`, in
//!   squared grid units.

use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::context::KdTree;
use crate::pcio::PointCloud;
use crate::{Error, Result};

/// Neighborhood size for normal estimation, the point itself included.
pub const NORMAL_NEIGHBORS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub n: [f64; 3],
    /// The neighborhood was rank deficient; `n` is the z axis.
    pub degenerate: bool,
}

fn check(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "distortion metrics need non-empty clouds".into(),
        ));
    }
    Ok(())
}

#[inline]
fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn norm2(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Least-variance direction of a neighborhood.
pub fn plane_normal(neighborhood: &[[f64; 3]]) -> Normal {
    let n = neighborhood.len() as f64;
    let mut mean = [0.0; 3];
    for p in neighborhood {
        for a in 0..3 {
            mean[a] += p[a];
        }
    }
    let mean = mean.map(|m| m / n);
    let mut cov = Matrix3::<f64>::zeros();
    for p in neighborhood {
        let d = Vector3::from(sub(p, &mean));
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (mid, top) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if top <= 0.0 || mid <= 1e-12 * top {
        return Normal {
            n: [0.0, 0.0, 1.0],
            degenerate: true,
        };
    }
    let v = eig.eigenvectors.column(order[0]);
    let len = v.norm();
    Normal {
        n: [v[0] / len, v[1] / len, v[2] / len],
        degenerate: false,
    }
}

/// Normals of every point of a cloud.
pub fn estimate_normals(points: &[[f64; 3]], tree: &KdTree) -> Vec<Normal> {
    let mut idx = Vec::with_capacity(NORMAL_NEIGHBORS);
    let mut hood = Vec::with_capacity(NORMAL_NEIGHBORS);
    points
        .iter()
        .map(|p| {
            tree.nearest_into(p, NORMAL_NEIGHBORS, &mut idx);
            hood.clear();
            hood.extend(idx.iter().map(|&i| points[i]));
            plane_normal(&hood)
        })
        .collect()
}

fn nearest_sq(a: &[[f64; 3]], tree: &KdTree) -> Vec<(usize, f64)> {
    let b = tree.points();
    let mut idx = Vec::with_capacity(1);
    a.iter()
        .map(|p| {
            tree.nearest_into(p, 1, &mut idx);
            (idx[0], norm2(&sub(p, &b[idx[0]])))
        })
        .collect()
}

/// One-directional point-to-point MSE.
pub fn d1_mse_one_way(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    check(a, b)?;
    let tree = KdTree::new(b.to_vec());
    let sum: f64 = nearest_sq(a, &tree).iter().map(|x| x.1).sum();
    Ok(sum / a.len() as f64)
}

/// Symmetric point-to-point MSE.
pub fn d1_mse(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    Ok(d1_mse_one_way(a, b)?.max(d1_mse_one_way(b, a)?))
}

fn d2_one_way(a: &[[f64; 3]], b_tree: &KdTree, b_normals: &[Normal]) -> f64 {
    let b = b_tree.points();
    let mut idx = Vec::with_capacity(1);
    let sum: f64 = a
        .iter()
        .map(|p| {
            b_tree.nearest_into(p, 1, &mut idx);
            let e = dot(&sub(p, &b[idx[0]]), &b_normals[idx[0]].n);
            e * e
        })
        .sum();
    sum / a.len() as f64
}

/// Symmetric point-to-plane MSE. When either cloud has fewer than three
/// points no normals can be fitted; the D1 MSE is returned with `true`.
pub fn d2_mse(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<(f64, bool)> {
    check(a, b)?;
    if a.len() < 3 || b.len() < 3 {
        return Ok((d1_mse(a, b)?, true));
    }
    let ta = KdTree::new(a.to_vec());
    let tb = KdTree::new(b.to_vec());
    let na = estimate_normals(a, &ta);
    let nb = estimate_normals(b, &tb);
    Ok((d2_one_way(a, &tb, &nb).max(d2_one_way(b, &ta, &na)), false))
}

pub fn psnr(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (3.0 * peak * peak / mse).log10()
    }
}

pub fn chamfer_points(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    Ok(d1_mse_one_way(a, b)? + d1_mse_one_way(b, a)?)
}

fn default_peak(a: &PointCloud) -> f64 {
    ((1u64 << a.precision()) - 1) as f64
}

/// D1 PSNR on the grid; `peak` defaults to `2^N - 1`.
pub fn d1_psnr(a: &PointCloud, b: &PointCloud, peak: Option<f64>) -> Result<f64> {
    let mse = d1_mse(&a.grid_points_f64(), &b.grid_points_f64())?;
    Ok(psnr(mse, peak.unwrap_or_else(|| default_peak(a))))
}

/// D2 PSNR on the grid; `peak` defaults to `2^N - 1`.
pub fn d2_psnr(a: &PointCloud, b: &PointCloud, peak: Option<f64>) -> Result<f64> {
    let (mse, _) = d2_mse(&a.grid_points_f64(), &b.grid_points_f64())?;
    Ok(psnr(mse, peak.unwrap_or_else(|| default_peak(a))))
}

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    chamfer_points(&a.grid_points_f64(), &b.grid_points_f64())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub d1_mse: f64,
    pub d1_psnr: f64,
    pub d2_mse: f64,
    pub d2_psnr: f64,
    /// D2 fell back to D1 because a cloud had fewer than three points.
    pub d2_fallback: bool,
    pub chamfer: f64,
    pub peak: f64,
}

impl DistortionReport {
    /// All metrics between two point sets given in grid units.
    pub fn compute(a: &[[f64; 3]], b: &[[f64; 3]], peak: f64) -> Result<Self> {
        let fwd = d1_mse_one_way(a, b)?;
        let bwd = d1_mse_one_way(b, a)?;
        let d1 = fwd.max(bwd);
        let (d2, d2_fallback) = d2_mse(a, b)?;
        Ok(DistortionReport {
            d1_mse: d1,
            d1_psnr: psnr(d1, peak),
            d2_mse: d2,
            d2_psnr: psnr(d2, peak),
            d2_fallback,
            chamfer: fwd + bwd,
            peak,
        })
    }

    pub fn between(a: &PointCloud, b: &PointCloud, peak: Option<f64>) -> Result<Self> {
        Self::compute(
            &a.grid_points_f64(),
            &b.grid_points_f64(),
            peak.unwrap_or_else(|| default_peak(a)),
        )
    }

    /// `metric=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "d1_mse={}\nd1_psnr={}\nd2_mse={}\nd2_psnr={}\nd2_fallback={}\nchamfer={}\npeak={}\n",
            self.d1_mse,
            self.d1_psnr,
            self.d2_mse,
            self.d2_psnr,
            self.d2_fallback,
            self.chamfer,
            self.peak
        )
    }
}

impl fmt::Display for DistortionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "D1 PSNR   {:>10.4} dB  (mse {:.6})",
            self.d1_psnr, self.d1_mse
        )?;
        write!(
            f,
            "D2 PSNR   {:>10.4} dB  (mse {:.6})",
            self.d2_psnr, self.d2_mse
        )?;
        if self.d2_fallback {
            write!(f, "  [fallback to D1: too few points for normals]")?;
        }
        writeln!(f)?;
        writeln!(f, "Chamfer   {:>10.6}", self.chamfer)?;
        write!(f, "peak      {}", self.peak)
    }
}
