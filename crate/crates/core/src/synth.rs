//! Seeded synthetic point clouds.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pcio::{quantize, PointCloud, RawPointCloud};
use crate::Result;

/// Points on a unit sphere with Gaussian-ish radial noise of relative
/// amplitude `noise`.
pub fn noisy_sphere(points: usize, noise: f64, seed: u64) -> RawPointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(points);
    while out.len() < points {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if !(1e-6..=1.0).contains(&n2) {
            continue;
        }
        // Sum of uniforms, roughly normal with unit variance.
        let g: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
        let r = (1.0 + noise * g) / n2.sqrt();
        out.push(v.map(|c| c * r));
    }
    RawPointCloud { points: out }
}

/// A noisy sphere quantized to `precision` bits, retrying with more raw
/// points until at least `min_points` distinct voxels are occupied.
pub fn sphere_cloud(min_points: usize, precision: u8, noise: f64, seed: u64) -> Result<PointCloud> {
    let mut raw_count = min_points + min_points / 4;
    loop {
        let pc = quantize(&noisy_sphere(raw_count, noise, seed), precision)?;
        if pc.len() >= min_points {
            return Ok(pc);
        }
        raw_count = raw_count * 3 / 2 + 1;
    }
}

/// A noisy sphere quantized to `precision` bits with about one raw sample
/// per surface voxel, so most of the shell is occupied.
pub fn dense_sphere(precision: u8, noise: f64, seed: u64) -> Result<PointCloud> {
    let r = (1u64 << precision) as f64 / 2.0;
    let samples = (4.0 * std::f64::consts::PI * r * r).ceil() as usize;
    quantize(&noisy_sphere(samples, noise, seed), precision)
}

/// Uniformly random distinct voxels on an `n`-bit grid.
pub fn random_grid_cloud(count: usize, precision: u8, seed: u64) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 1u64 << precision;
    let count = (count as u64).min(side * side * side) as usize;
    let mut cells = std::collections::BTreeSet::new();
    while cells.len() < count {
        let c = [(); 3].map(|_| rng.gen_range(0..side) as u32);
        cells.insert(c);
    }
    PointCloud::from_grid(cells.into_iter().collect(), precision)
}
