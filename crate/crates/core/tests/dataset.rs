mod common;

use common::fuzz_cloud;
use pvc_core::codec::encode;
use pvc_core::context::{OCCUPIED, UNKNOWN, WINDOW_CELLS};
use pvc_core::dataset::{
    collect_samples, read_samples, samples_from_bytes, samples_to_bytes, write_samples,
};
use pvc_core::model::UniformModel;
use pvc_core::octree::{build_levels, serialize};
use pvc_core::pcio::PointCloud;

#[test]
fn single_point_dump() {
    let pc = PointCloud::from_grid(vec![[0, 0, 0]], 1).unwrap();
    let samples = collect_samples(&pc, 1, 4).unwrap();
    assert_eq!(samples.len(), 8);
    assert!(samples[0]
        .vox
        .cells()
        .iter()
        .all(|&c| c == UNKNOWN || c == 0));
    for s in &samples[1..] {
        let occupied = s.vox.cells().iter().filter(|&&c| c == OCCUPIED).count();
        assert_eq!(occupied, 1);
    }
    assert!(samples.iter().all(|s| s.pc.valid_count() == 1));
    assert_eq!(
        samples[0]
            .vox
            .cells()
            .iter()
            .filter(|&&c| c == UNKNOWN)
            .count(),
        8
    );
    assert!(samples[0].label);
    assert!(samples[1..].iter().all(|s| !s.label));
}

#[test]
fn one_sample_per_symbol() {
    for seed in 0..20 {
        let pc = fuzz_cloud(seed, 6, 500);
        let depth = pc.precision();
        let samples = collect_samples(&pc, depth, 6).unwrap();
        let (_, report) = encode(&pc, depth, &mut UniformModel).unwrap();
        assert_eq!(samples.len() as u64, report.symbols());
        let stream = serialize(&build_levels(&pc, depth).unwrap());
        let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
        assert_eq!(labels, stream.bits().collect::<Vec<_>>());
        assert!(samples
            .iter()
            .all(|s| s.vox.cells().len() == WINDOW_CELLS && s.pc.k() == 6));
    }
}

#[test]
fn dump_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.pvs");
    let pc = fuzz_cloud(3, 6, 400);
    let samples = collect_samples(&pc, pc.precision(), 5).unwrap();
    write_samples(&path, &samples, 5).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes, samples_to_bytes(&samples, 5).unwrap());
    let (k, back) = read_samples(&path).unwrap();
    assert_eq!(k, 5);
    assert_eq!(back, samples);
    assert!(samples_from_bytes(&bytes[..bytes.len() - 1]).is_err());
}
