use std::fs;
use std::path::Path;

use pvc_core::codec::{self, Bitstream, EncodeReport, Header, CONTAINER_MAGIC, HEADER_LEN};
use pvc_core::dataset::{collect_samples, write_samples};
use pvc_core::metrics::DistortionReport;
use pvc_core::model::{
    ablation_variant, AblationMode, AdaptiveModel, EntropyModel, ModelId, NeuralModel, UniformModel,
};
use pvc_core::pcio::{
    dequantize, quantize, read_point_cloud, write_point_cloud, PlyEncoding, PointCloud,
    RawPointCloud,
};
use pvc_core::synth::{noisy_sphere, random_grid_cloud};
use pvc_core::{read_file, with_path, write_file, Error, Result};

use crate::config::ConfigFile;
use crate::{GridArgs, ModelArgs, Shape};

pub const DEFAULT_PRECISION: u8 = 10;
pub const DEFAULT_K: usize = 1024;

/// A ready-to-use model description; neural weights are loaded once.
pub enum ModelSpec {
    Uniform,
    Adaptive,
    Neural(NeuralModel),
}

impl ModelSpec {
    pub fn resolve(
        cfg: &ConfigFile,
        id: ModelId,
        weights: Option<std::path::PathBuf>,
        ablation: Option<AblationMode>,
    ) -> Result<Self> {
        let ablation = cfg.pick(ablation, "ablation", AblationMode::Hybrid)?;
        if id != ModelId::Neural && ablation != AblationMode::Hybrid {
            return Err(Error::Config(format!(
                "--ablation {} needs the neural model",
                ablation.as_str()
            )));
        }
        Ok(match id {
            ModelId::Uniform => ModelSpec::Uniform,
            ModelId::Adaptive => ModelSpec::Adaptive,
            ModelId::Neural => {
                let path = cfg.weights(weights)?.ok_or_else(|| {
                    Error::Config("the neural model needs --weights or PVC_WEIGHTS".into())
                })?;
                let model = NeuralModel::load(&path)?;
                ModelSpec::Neural(if ablation == AblationMode::Hybrid {
                    model
                } else {
                    ablation_variant(&model, ablation)
                })
            }
        })
    }

    /// A fresh model with empty adaptive state.
    pub fn instantiate(&self) -> Box<dyn EntropyModel + Send> {
        match self {
            ModelSpec::Uniform => Box::new(UniformModel),
            ModelSpec::Adaptive => Box::new(AdaptiveModel::new()),
            ModelSpec::Neural(m) => Box::new(m.share()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Uniform => "uniform".into(),
            ModelSpec::Adaptive => "adaptive".into(),
            ModelSpec::Neural(m) if m.mode() == AblationMode::Hybrid => "neural".into(),
            ModelSpec::Neural(m) => format!("neural/{}", m.mode().as_str()),
        }
    }
}

fn grid(cfg: &ConfigFile, args: &GridArgs) -> Result<(u8, u8)> {
    let precision = cfg.pick(args.precision, "precision", DEFAULT_PRECISION)?;
    let depth = cfg.pick(args.depth, "depth", precision)?;
    if depth == 0 || depth > precision {
        return Err(Error::Config(format!(
            "depth must be in 1..={precision} for {precision}-bit precision, got {depth}"
        )));
    }
    Ok((precision, depth))
}

fn print_encode_report(input_points: usize, header: &Header, model: &str, report: &EncodeReport) {
    println!("input_points={input_points}");
    println!("points={}", report.points);
    println!("precision={}", header.precision);
    println!("depth={}", header.depth);
    println!("model={model}");
    println!("symbols={}", report.symbols());
    println!("file_bytes={}", report.file_bytes);
    println!("payload_bytes={}", report.payload_bytes);
    println!("bpp={:.6}", report.bpp);
    println!("payload_bpp={:.6}", report.payload_bpp);
    println!("cross_entropy_bits={:.3}", report.cross_entropy());
    println!("elapsed_s={:.3}", report.elapsed.as_secs_f64());
    for l in &report.levels {
        println!(
            "level={} symbols={} ones={} bits={:.3}",
            l.level, l.symbols, l.ones, l.cross_entropy
        );
    }
}

pub fn encode(
    cfg: &ConfigFile,
    input: &Path,
    output: &Path,
    grid_args: &GridArgs,
    args: &ModelArgs,
) -> Result<()> {
    let (precision, depth) = grid(cfg, grid_args)?;
    let id = cfg.pick(args.model, "model", ModelId::Adaptive)?;
    let spec = ModelSpec::resolve(cfg, id, args.weights.clone(), args.ablation)?;
    let raw = read_point_cloud(input, None)?;
    let pc = quantize(&raw, precision)?;
    let mut model = spec.instantiate();
    let (bs, report) = codec::encode(&pc, depth, &mut *model)?;
    write_file(output, &bs.to_bytes())?;
    print_encode_report(raw.len(), &bs.header, &spec.label(), &report);
    Ok(())
}

fn read_stream(path: &Path) -> Result<Bitstream> {
    Bitstream::from_bytes(&read_file(path)?)
}

/// Decodes with the model named in the header; an explicit `--model` must agree.
fn decode_stream(cfg: &ConfigFile, bs: &Bitstream, args: &ModelArgs) -> Result<PointCloud> {
    let id = bs.header.model_id;
    if let Some(requested) = args.model {
        if requested != id {
            return Err(Error::WrongModel(format!(
                "stream was coded with the {} model, --model asks for {}",
                id.as_str(),
                requested.as_str()
            )));
        }
    }
    let spec = ModelSpec::resolve(cfg, id, args.weights.clone(), args.ablation)?;
    codec::decode(bs, &mut *spec.instantiate())
}

fn ply_encoding(ascii: bool) -> PlyEncoding {
    if ascii {
        PlyEncoding::Ascii
    } else {
        PlyEncoding::BinaryLittleEndian
    }
}

pub fn decode(
    cfg: &ConfigFile,
    input: &Path,
    output: &Path,
    args: &ModelArgs,
    ascii: bool,
) -> Result<()> {
    let bs = read_stream(input)?;
    let pc = decode_stream(cfg, &bs, args)?;
    write_point_cloud(output, &dequantize(&pc), None, ply_encoding(ascii))?;
    println!("points={}", pc.len());
    println!("precision={}", bs.header.precision);
    println!("depth={}", bs.header.depth);
    println!("model={}", bs.header.model_id.as_str());
    Ok(())
}

fn is_container(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 4];
    let mut f = fs::File::open(path).map_err(|e| with_path(path, e))?;
    Ok(std::io::Read::read_exact(&mut f, &mut magic).is_ok() && magic == CONTAINER_MAGIC)
}

/// Rounds values within float noise of a grid integer.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-6 {
        r
    } else {
        v
    }
}

fn warn(message: &str) {
    eprintln!("pvc: warning: {message}");
}

pub fn eval(
    cfg: &ConfigFile,
    original: &Path,
    reconstructed: &Path,
    precision: Option<u8>,
    peak: Option<f64>,
    args: &ModelArgs,
) -> Result<()> {
    let raw = read_point_cloud(original, None)?;
    let recon_grid: Vec<[f64; 3]>;
    let reference: PointCloud;
    if is_container(reconstructed)? {
        let bs = read_stream(reconstructed)?;
        let n = bs.header.precision;
        if let Some(p) = precision.filter(|&p| p != n) {
            warn(&format!(
                "--precision {p} ignored, the stream uses {n}-bit precision"
            ));
        }
        reference = quantize(&raw, n)?;
        let rec = decode_stream(cfg, &bs, args)?;
        recon_grid = if rec.frame() == reference.frame() {
            rec.grid_points_f64()
        } else {
            warn("the stream's grid frame does not match the original; comparing in the original's frame");
            let f = reference.frame();
            dequantize(&rec)
                .points
                .iter()
                .map(|p| f.to_grid(*p).map(snap))
                .collect()
        };
    } else {
        let n = cfg.pick(precision, "precision", DEFAULT_PRECISION)?;
        reference = quantize(&raw, n)?;
        let f = reference.frame();
        let rec = read_point_cloud(reconstructed, None)?;
        if rec.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} has no points",
                reconstructed.display()
            )));
        }
        recon_grid = rec.points.iter().map(|p| f.to_grid(*p).map(snap)).collect();
    }
    let peak = peak.unwrap_or(reference.frame().max_coord() as f64);
    let report = DistortionReport::compute(&reference.grid_points_f64(), &recon_grid, peak)?;
    if report.d2_fallback {
        warn("fewer than 3 points; D2 falls back to D1");
    }
    println!("original_points={}", reference.len());
    println!("reconstructed_points={}", recon_grid.len());
    println!("precision={}", reference.precision());
    print!("{}", report.to_key_values());
    Ok(())
}

pub fn inspect(input: &Path) -> Result<()> {
    let bytes = read_file(input)?;
    let h = Header::read(&bytes)?;
    println!("format=PVC1");
    println!("version={}", h.version);
    println!("precision={}", h.precision);
    println!("depth={}", h.depth);
    println!("origin_x={}", h.origin[0]);
    println!("origin_y={}", h.origin[1]);
    println!("origin_z={}", h.origin[2]);
    println!("scale={}", h.scale);
    println!("model={}", h.model_id.as_str());
    println!("model_hash={:016x}", h.model_hash);
    println!("k={}", h.k);
    println!("symbols={}", h.symbol_count);
    println!("points={}", h.point_count);
    println!("header_bytes={HEADER_LEN}");
    println!("payload_bytes={}", bytes.len() - HEADER_LEN);
    println!("file_bytes={}", bytes.len());
    Ok(())
}

pub fn dump_contexts(
    cfg: &ConfigFile,
    input: &Path,
    output: &Path,
    grid_args: &GridArgs,
    k: Option<usize>,
) -> Result<()> {
    let (precision, depth) = grid(cfg, grid_args)?;
    let k = cfg.pick(k, "k", DEFAULT_K)?;
    let pc = quantize(&read_point_cloud(input, None)?, precision)?;
    let samples = collect_samples(&pc, depth, k)?;
    write_samples(output, &samples, k)?;
    println!("samples={}", samples.len());
    println!("ones={}", samples.iter().filter(|s| s.label).count());
    println!("k={k}");
    println!("precision={precision}");
    println!("depth={depth}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    cfg: &ConfigFile,
    output: &Path,
    shape: Shape,
    points: usize,
    noise: f64,
    precision: u8,
    seed: Option<u64>,
    ascii: bool,
) -> Result<()> {
    let seed = cfg.pick(seed, "seed", 0)?;
    if points == 0 {
        return Err(Error::Config("--points must be positive".into()));
    }
    let raw: RawPointCloud = match shape {
        Shape::Sphere => noisy_sphere(points, noise, seed),
        Shape::Grid => dequantize(&random_grid_cloud(points, precision, seed)?),
    };
    write_point_cloud(output, &raw, None, ply_encoding(ascii))?;
    println!("points={}", raw.len());
    println!("seed={seed}");
    Ok(())
}
