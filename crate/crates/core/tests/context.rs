mod common;

use std::collections::HashMap;

use common::{brute_knn, fuzz_cloud};
use proptest::prelude::*;
use pvc_core::context::{
    extract_point_context, extract_voxel_context, knn, AncestorPoints, KdTree, LevelProgress,
    NodeCoordinate, VoxelContext, EMPTY, OCCUPIED, UNKNOWN, WINDOW_CELLS,
};
use pvc_core::octree::{build_levels, cell_center, LevelOccupancy, NodeKey};
use pvc_core::pcio::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Window recomputed from the set of symbols coded so far at this level.
fn oracle_window(
    key: &NodeKey,
    parents: &LevelOccupancy,
    coded: &HashMap<[u32; 3], bool>,
) -> [i8; WINDOW_CELLS] {
    let side = 1i64 << key.level;
    let mut out = [EMPTY; WINDOW_CELLS];
    for x in 0..4i64 {
        for y in 0..4i64 {
            for z in 0..4i64 {
                let c = [
                    key.cell[0] as i64 + x - 1,
                    key.cell[1] as i64 + y - 1,
                    key.cell[2] as i64 + z - 1,
                ];
                let i = (x * 16 + y * 4 + z) as usize;
                if c.iter().any(|&v| v < 0 || v >= side) {
                    continue;
                }
                let c = c.map(|v| v as u32);
                if !parents.contains(&c.map(|v| v >> 1)) {
                    continue;
                }
                out[i] = match coded.get(&c) {
                    Some(true) => OCCUPIED,
                    Some(false) => EMPTY,
                    None => UNKNOWN,
                };
            }
        }
    }
    out
}

fn replay_matches_oracle(pc: &PointCloud) {
    let levels = build_levels(pc, pc.precision()).unwrap();
    for pair in levels.windows(2) {
        let (parents, children) = (&pair[0], &pair[1]);
        let mut progress = LevelProgress::new(parents);
        let mut coded = HashMap::new();
        for key in parents.children() {
            let expected = oracle_window(&key, parents, &coded);
            assert_eq!(
                extract_voxel_context(&key, &progress).cells(),
                &expected,
                "{key:?}"
            );
            assert_eq!(progress.voxel_context(&key).cells(), &expected, "{key:?}");
            let bit = children.contains(&key.cell);
            progress.push(bit);
            coded.insert(key.cell, bit);
        }
    }
}

#[test]
fn prefix_replay_on_fuzzed_clouds() {
    for seed in 0..120 {
        replay_matches_oracle(&fuzz_cloud(seed, 6, 400));
    }
}

#[test]
fn lone_cell_window() {
    let parents = LevelOccupancy::new(3, vec![[4, 4, 4]]);
    let progress = LevelProgress::new(&parents);
    let key = NodeKey::new(4, [8, 8, 8]);
    let vox = extract_voxel_context(&key, &progress);
    let unknown: Vec<usize> = (0..WINDOW_CELLS)
        .filter(|&i| vox.cells()[i] == UNKNOWN)
        .collect();
    assert_eq!(unknown.len(), 8);
    assert!(vox.cells().iter().all(|&c| c == EMPTY || c == UNKNOWN));
    assert_eq!(vox.anchor(), UNKNOWN);
    assert_eq!(VoxelContext::index(1, 1, 1), 21);
}

#[test]
fn point_context_pads_with_nearest() {
    let anc = AncestorPoints::from_centers(vec![[4, 4, 4]], 1, 3);
    let pc = extract_point_context(&NodeKey::new(2, [0, 0, 0]), &anc, 4);
    assert_eq!(pc.valid_count(), 1);
    assert_eq!(pc.rows().len(), 4);
    assert!(pc.rows().iter().all(|r| *r == pc.rows()[0]));
    assert_eq!(pc.rows()[0], [0.75, 0.75, 0.75]);
}

#[test]
fn self_aligned_node_has_zero_first_row() {
    let anc = AncestorPoints::from_centers(vec![[0, 0, 0], [2, 2, 2], [6, 6, 6]], 2, 3);
    let pc = extract_point_context(&NodeKey::new(3, [2, 2, 2]), &anc, 2);
    assert_eq!(pc.rows()[0], [0.0, 0.0, 0.0]);
    assert_eq!(pc.valid_count(), 2);
}

#[test]
fn point_context_matches_exhaustive_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 8u8;
    let d = 6u8;
    let mut cells: Vec<[u32; 3]> = (0..200)
        .map(|_| [(); 3].map(|_| rng.gen_range(0..1u32 << (d - 1))))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let level = LevelOccupancy::new(d - 1, cells);
    let anc = AncestorPoints::from_level(&level, n);
    let centers: Vec<[f64; 3]> = level
        .cells()
        .iter()
        .map(|&c| cell_center(c, d - 1, n).map(|v| v as f64))
        .collect();
    let size = (1u32 << (n - d + 1)) as f64;
    for _ in 0..300 {
        let key = NodeKey::new(d, [(); 3].map(|_| rng.gen_range(0..1u32 << d)));
        let q = cell_center(key.cell, d, n).map(|v| v as f64);
        let pc = extract_point_context(&key, &anc, 16);
        let expected = brute_knn(&q, &centers, 16);
        assert_eq!(pc.valid_count(), 16);
        for (row, &i) in pc.rows().iter().zip(&expected) {
            let want = [0, 1, 2].map(|a| ((centers[i][a] - q[a]) / size) as f32);
            assert_eq!(*row, want);
        }
    }
}

#[test]
fn point_context_ignores_same_level_occupancy() {
    let a = PointCloud::from_grid(vec![[0, 0, 0], [9, 9, 9], [30, 2, 7]], 5).unwrap();
    let b = PointCloud::from_grid(vec![[2, 2, 2], [9, 9, 9], [30, 2, 7]], 5).unwrap();
    let la = build_levels(&a, 5).unwrap();
    let lb = build_levels(&b, 5).unwrap();
    assert_eq!(la[3], lb[3]);
    assert_ne!(la[4], lb[4]);
    let pa = AncestorPoints::from_level(&la[3], 5);
    let pb = AncestorPoints::from_level(&lb[3], 5);
    for key in la[3].children() {
        assert_eq!(
            extract_point_context(&key, &pa, 8),
            extract_point_context(&key, &pb, 8)
        );
    }
}

#[test]
fn node_coordinate_is_normalized() {
    let c = NodeCoordinate::new(&NodeKey::new(2, [1, 2, 3]), 8);
    assert_eq!(c.0, [0.25, 0.5, 0.75, 0.25]);
}

#[test]
fn knn_collinear() {
    let pts: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 0.0, 0.0]).collect();
    assert_eq!(knn([4.4, 0.0, 0.0], &pts, 3).unwrap(), vec![4, 5, 3]);
    assert_eq!(knn([7.0, 0.0, 0.0], &pts, 1).unwrap(), vec![7]);
    assert!(knn([0.0; 3], &pts, 0).is_err());
}

#[test]
fn knn_large_cloud_matches_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pts: Vec<[f64; 3]> = (0..10_000)
        .map(|_| [(); 3].map(|_| rng.gen_range(0.0..100.0)))
        .collect();
    let tree = KdTree::new(pts.clone());
    for _ in 0..100 {
        let q = [(); 3].map(|_| rng.gen_range(-10.0..110.0));
        assert_eq!(tree.nearest(&q, 32), brute_knn(&q, &pts, 32));
    }
}

proptest! {
    #[test]
    fn knn_on_integer_grids_matches_exhaustive(
        pts in prop::collection::vec(prop::array::uniform3(0u8..8), 1..300),
        q in prop::array::uniform3(0u8..8),
        k in 1usize..40,
    ) {
        let pts: Vec<[f64; 3]> = pts.iter().map(|p| p.map(f64::from)).collect();
        let q = q.map(f64::from);
        prop_assert_eq!(KdTree::new(pts.clone()).nearest(&q, k), brute_knn(&q, &pts, k));
    }
}
