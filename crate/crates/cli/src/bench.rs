use std::path::{Path, PathBuf};

use pvc_core::codec;
use pvc_core::metrics;
use pvc_core::model::{AblationMode, ModelId};
use pvc_core::pcio::{quantize, read_point_cloud, Format, PointCloud};
use pvc_core::{with_path, Error, Result};
use rayon::prelude::*;

use crate::commands::{ModelSpec, DEFAULT_PRECISION};
use crate::config::{parse_list, ConfigFile};

pub struct BenchOptions {
    pub models: Vec<ModelSpec>,
    pub depths: Vec<u8>,
    pub precision: u8,
    pub jobs: usize,
}

impl BenchOptions {
    pub fn resolve(
        cfg: &ConfigFile,
        models: Option<String>,
        depths: Option<String>,
        precision: Option<u8>,
        jobs: Option<usize>,
        weights: Option<PathBuf>,
        ablation: Option<AblationMode>,
    ) -> Result<Self> {
        let precision = cfg.pick(precision, "precision", DEFAULT_PRECISION)?;
        let models = cfg.pick(models, "models", "uniform,adaptive".to_string())?;
        let ids: Vec<ModelId> = parse_list(&models, "model")?;
        let models = ids
            .into_iter()
            .map(|id| {
                let ablation = if id == ModelId::Neural {
                    ablation
                } else {
                    None
                };
                ModelSpec::resolve(cfg, id, weights.clone(), ablation)
            })
            .collect::<Result<_>>()?;
        let depths: Vec<u8> = match cfg.pick(depths, "depths", String::new())? {
            s if s.is_empty() => vec![precision],
            s => parse_list(&s, "depth")?,
        };
        if let Some(d) = depths.iter().find(|&&d| d == 0 || d > precision) {
            return Err(Error::Config(format!("depth {d} outside 1..={precision}")));
        }
        let jobs = cfg.pick(jobs, "jobs", 0)?;
        Ok(BenchOptions {
            models,
            depths,
            precision,
            jobs,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub file: String,
    pub model: String,
    pub depth: u8,
    pub points: usize,
    pub file_bytes: u64,
    pub bpp: f64,
    pub payload_bpp: f64,
    pub d1_psnr: f64,
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| with_path(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && Format::from_path(p).is_some())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no .ply or .xyz point clouds in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn measure(name: &str, pc: &PointCloud, spec: &ModelSpec, depth: u8) -> Result<Row> {
    let (bs, report) = codec::encode(pc, depth, &mut *spec.instantiate())?;
    let rec = codec::decode(&bs, &mut *spec.instantiate())?;
    if depth == pc.precision() && rec != *pc {
        return Err(Error::Corrupt(format!(
            "{name}: lossless round trip failed with {}",
            spec.label()
        )));
    }
    Ok(Row {
        file: name.to_string(),
        model: spec.label(),
        depth,
        points: pc.len(),
        file_bytes: report.file_bytes,
        bpp: report.bpp,
        payload_bpp: report.payload_bpp,
        d1_psnr: metrics::d1_psnr(pc, &rec, None)?,
    })
}

pub fn rows(dir: &Path, opts: &BenchOptions) -> Result<Vec<Row>> {
    let clouds: Vec<(String, PointCloud)> = corpus_files(dir)?
        .iter()
        .map(|p| {
            let name = p
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Ok((name, quantize(&read_point_cloud(p, None)?, opts.precision)?))
        })
        .collect::<Result<_>>()?;
    let mut tasks = Vec::new();
    for (name, pc) in &clouds {
        for spec in &opts.models {
            for &depth in &opts.depths {
                tasks.push((name.as_str(), pc, spec, depth));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(name, pc, spec, depth)| measure(name, pc, spec, depth))
            .collect()
    })
}

pub fn format_table(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.file.len()).max().unwrap_or(4).max(4);
    let mwidth = rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:<mwidth$}  {:>5}  {:>9}  {:>11}  {:>9}  {:>11}  {:>9}\n",
        "file", "model", "depth", "points", "file_bytes", "bpp", "payload_bpp", "d1_psnr"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:<mwidth$}  {:>5}  {:>9}  {:>11}  {:>9.4}  {:>11.4}  {:>9.3}\n",
            r.file, r.model, r.depth, r.points, r.file_bytes, r.bpp, r.payload_bpp, r.d1_psnr
        ));
    }
    out
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let to_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record([
        "file",
        "model",
        "depth",
        "points",
        "file_bytes",
        "bpp",
        "payload_bpp",
        "d1_psnr",
    ])
    .map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.file.clone(),
            r.model.clone(),
            r.depth.to_string(),
            r.points.to_string(),
            r.file_bytes.to_string(),
            r.bpp.to_string(),
            r.payload_bpp.to_string(),
            r.d1_psnr.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(dir: &Path, opts: &BenchOptions, csv_path: Option<&Path>) -> Result<()> {
    let rows = rows(dir, opts)?;
    print!("{}", format_table(&rows));
    if let Some(path) = csv_path {
        write_csv(path, &rows)?;
    }
    Ok(())
}
