#![allow(dead_code)]

use std::path::PathBuf;

use pvc_core::model::{ModelWeights, NeuralModel};
use pvc_core::pcio::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn compact_model() -> NeuralModel {
    NeuralModel::load(&fixture("compact_weights.pvw")).expect("compact weights load")
}

pub fn parity_fixtures() -> ModelWeights {
    let bytes = std::fs::read(fixture("compact_fixtures.pvw")).unwrap();
    ModelWeights::from_bytes(&bytes).unwrap()
}

/// Random cloud for fuzzing: `N` uniform in `1..=max_precision`, point count
/// log-uniform in `[1, min(max_points, 8^N)]`; half of the clouds are
/// uniform over the grid, half are clustered around a few centers.
pub fn fuzz_cloud(seed: u64, max_precision: u8, max_points: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_precision);
    let side = 1u64 << n;
    let cap = (max_points as u64).min(side * side * side);
    let count = ((cap as f64).ln() * rng.gen::<f64>())
        .exp()
        .round()
        .clamp(1.0, cap as f64) as usize;
    let clustered = rng.gen_bool(0.5);
    let centers: Vec<[f64; 3]> = (0..rng.gen_range(1..=4))
        .map(|_| [(); 3].map(|_| rng.gen_range(0.0..side as f64)))
        .collect();
    let spread = (side as f64 / 8.0).max(1.0);
    let mut cells = std::collections::BTreeSet::new();
    let mut attempts = 0;
    while cells.len() < count && attempts < 20 * count + 100 {
        attempts += 1;
        let c = if clustered {
            let ctr = centers[rng.gen_range(0..centers.len())];
            ctr.map(|v| {
                (v + rng.gen_range(-spread..spread))
                    .clamp(0.0, (side - 1) as f64)
                    .round() as u32
            })
        } else {
            [(); 3].map(|_| rng.gen_range(0..side) as u32)
        };
        cells.insert(c);
    }
    PointCloud::from_grid(cells.into_iter().collect(), n).unwrap()
}

// Exhaustive reference implementations used as oracles.

fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Index of the nearest point, lowest index on ties.
pub fn brute_nearest(q: &[f64; 3], pts: &[[f64; 3]]) -> usize {
    let mut best = 0;
    for i in 1..pts.len() {
        if d2(q, &pts[i]) < d2(q, &pts[best]) {
            best = i;
        }
    }
    best
}

/// The `k` nearest indices ordered by (distance, index).
pub fn brute_knn(q: &[f64; 3], pts: &[[f64; 3]], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&i, &j| d2(q, &pts[i]).total_cmp(&d2(q, &pts[j])).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi
/// rotations; returns eigenvalues and the matching eigenvectors (columns).
pub fn jacobi_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut r = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            r[p][p] = c;
            r[q][q] = c;
            r[p][q] = s;
            r[q][p] = -s;
            // a = rᵀ a r, v = v r
            let mut ar = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    ar[i][j] = (0..3).map(|m| a[i][m] * r[m][j]).sum();
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] = (0..3).map(|m| r[m][i] * ar[m][j]).sum();
                }
            }
            let mut vr = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    vr[i][j] = (0..3).map(|m| v[i][m] * r[m][j]).sum();
                }
            }
            v = vr;
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Least-variance direction of a neighborhood, z axis when the spread has
/// rank below two.
pub fn oracle_normal(hood: &[[f64; 3]]) -> [f64; 3] {
    let n = hood.len() as f64;
    let mean: Vec<f64> = (0..3)
        .map(|a| hood.iter().map(|p| p[a]).sum::<f64>() / n)
        .collect();
    let mut cov = [[0.0; 3]; 3];
    for p in hood {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    if vals[order[2]] <= 0.0 || vals[order[1]] <= 1e-12 * vals[order[2]] {
        return [0.0, 0.0, 1.0];
    }
    let c = order[0];
    let v = [vecs[0][c], vecs[1][c], vecs[2][c]];
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / len)
}

pub fn oracle_mse_one_way(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .map(|p| d2(p, &b[brute_nearest(p, b)]))
        .sum::<f64>()
        / a.len() as f64
}

pub fn oracle_d1_mse(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    oracle_mse_one_way(a, b).max(oracle_mse_one_way(b, a))
}

fn oracle_d2_one_way(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let sum: f64 = a
        .iter()
        .map(|p| {
            let j = brute_nearest(p, b);
            let hood: Vec<[f64; 3]> = brute_knn(&b[j], b, 9).into_iter().map(|i| b[i]).collect();
            let n = oracle_normal(&hood);
            let e: f64 = (0..3).map(|i| (p[i] - b[j][i]) * n[i]).sum();
            e * e
        })
        .sum();
    sum / a.len() as f64
}

pub fn oracle_d2_mse(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    if a.len() < 3 || b.len() < 3 {
        return oracle_d1_mse(a, b);
    }
    oracle_d2_one_way(a, b).max(oracle_d2_one_way(b, a))
}

pub fn oracle_chamfer(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    oracle_mse_one_way(a, b) + oracle_mse_one_way(b, a)
}

pub fn oracle_psnr(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (3.0 * peak * peak / mse).log10()
    }
}

/// A pair of random grid clouds, each with at most `max_points` points.
pub fn random_pair(seed: u64, max_points: usize) -> (PointCloud, PointCloud) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=10u8);
    let side = 1u32 << n;
    let make = |rng: &mut ChaCha8Rng| {
        let count = rng.gen_range(1..=max_points);
        let cells = (0..count)
            .map(|_| [(); 3].map(|_| rng.gen_range(0..side)))
            .collect();
        PointCloud::from_grid(cells, n).unwrap()
    };
    let a = make(&mut rng);
    let b = make(&mut rng);
    (a, b)
}
