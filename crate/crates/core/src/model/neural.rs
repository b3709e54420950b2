//! Hybrid occupancy network, inference only.
//!
//! * Point encoder: a shared per-neighbor MLP `3 → w0 → w1 → w2 → w3`, each
//!   layer followed by batch norm and ReLU. Every layer's output is
//!   max-pooled over the neighbors; the pooled vectors are concatenated and
//!   mapped by one FC + BN + ReLU to the point feature.
//! * Voxel encoder: four 3×3×3 convolutions (stride 1, zero padding 1) with
//!   BN + ReLU over the 4×4×4 window, global max pool, FC + BN + ReLU.
//! * Decoder: coordinate embedding FC + ReLU, concatenation
//!   `[point | voxel | coord]`, residual blocks
//!   `CBN → ReLU → FC → CBN → ReLU → FC (+ skip)` whose normalization scale
//!   and shift are offset by linear maps of the coordinate embedding, and a
//!   final FC + sigmoid.
//!
//! Batch norm runs in inference mode with stored running statistics and
//! `eps = 1e-5`; plain BN layers are folded into the preceding FC/conv at
//! load time.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use super::weights::{file_fingerprint, ModelWeights, Tensor};
use super::{EntropyModel, ModelId, Probability};
use crate::context::{
    HybridContext, NodeCoordinate, PointContext, VoxelContext, WINDOW, WINDOW_CELLS,
};
use crate::{Error, Result};

pub const BN_EPS: f32 = 1e-5;

/// Layer widths of one network variant; the id is stored in PVW files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub id: u32,
    pub point_widths: [usize; 4],
    pub point_out: usize,
    pub voxel_channels: [usize; 4],
    pub voxel_out: usize,
    pub coord_out: usize,
    pub blocks: usize,
}

impl Architecture {
    /// Full-size network: 1024-d point feature, 512-d voxel feature,
    /// 512-d coordinate embedding, five blocks of width 2048.
    pub const FULL: Architecture = Architecture {
        id: 1,
        point_widths: [64, 64, 128, 256],
        point_out: 1024,
        voxel_channels: [32, 64, 128, 256],
        voxel_out: 512,
        coord_out: 512,
        blocks: 5,
    };

    /// Same topology at toy widths, for tests and fast experiments.
    pub const COMPACT: Architecture = Architecture {
        id: 2,
        point_widths: [4, 4, 8, 8],
        point_out: 8,
        voxel_channels: [1, 2, 2, 4],
        voxel_out: 4,
        coord_out: 4,
        blocks: 5,
    };

    pub fn from_id(id: u32) -> Option<Architecture> {
        match id {
            1 => Some(Self::FULL),
            2 => Some(Self::COMPACT),
            _ => None,
        }
    }

    /// Width of the decoder trunk.
    pub fn width(&self) -> usize {
        self.point_out + self.voxel_out + self.coord_out
    }

    fn pooled_width(&self) -> usize {
        self.point_widths.iter().sum()
    }

    /// Every array the architecture requires, with its shape.
    pub fn expected_arrays(&self) -> Vec<(String, Vec<u32>)> {
        let mut v = Vec::new();
        let dense = |v: &mut Vec<(String, Vec<u32>)>, name: &str, out: usize, inp: usize| {
            v.push((format!("{name}.weight"), vec![out as u32, inp as u32]));
            v.push((format!("{name}.bias"), vec![out as u32]));
        };
        let bn = |v: &mut Vec<(String, Vec<u32>)>, name: &str, n: usize| {
            for p in ["weight", "bias", "running_mean", "running_var"] {
                v.push((format!("{name}.{p}"), vec![n as u32]));
            }
        };
        let mut prev = 3;
        for (i, &w) in self.point_widths.iter().enumerate() {
            dense(&mut v, &format!("point.fc{i}"), w, prev);
            bn(&mut v, &format!("point.bn{i}"), w);
            prev = w;
        }
        dense(&mut v, "point.fuse", self.point_out, self.pooled_width());
        bn(&mut v, "point.fuse_bn", self.point_out);

        let mut prev = 1;
        for (i, &c) in self.voxel_channels.iter().enumerate() {
            v.push((
                format!("voxel.conv{i}.weight"),
                vec![c as u32, prev as u32, 3, 3, 3],
            ));
            v.push((format!("voxel.conv{i}.bias"), vec![c as u32]));
            bn(&mut v, &format!("voxel.bn{i}"), c);
            prev = c;
        }
        dense(&mut v, "voxel.fc", self.voxel_out, prev);
        bn(&mut v, "voxel.fc_bn", self.voxel_out);

        dense(&mut v, "decoder.coord", self.coord_out, 4);
        let width = self.width();
        for b in 0..self.blocks {
            for j in 1..=2 {
                let cbn = format!("decoder.block{b}.cbn{j}");
                bn(&mut v, &cbn, width);
                dense(&mut v, &format!("{cbn}.gamma"), width, self.coord_out);
                dense(&mut v, &format!("{cbn}.beta"), width, self.coord_out);
                dense(&mut v, &format!("decoder.block{b}.fc{j}"), width, width);
            }
        }
        dense(&mut v, "decoder.head", 1, width);
        v
    }

    /// Randomly initialized weights (He-uniform layers, perturbed norm
    /// statistics), deterministic in `seed`.
    pub fn random_weights(&self, k: u32, seed: u64) -> ModelWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = ModelWeights::new(self.id, k);
        for (name, shape) in self.expected_arrays() {
            let n: usize = shape.iter().map(|&d| d as usize).product();
            let fan_in: usize = shape[1..]
                .iter()
                .map(|&d| d as usize)
                .product::<usize>()
                .max(1);
            let leaf = name.rsplit('.').next().unwrap();
            let is_norm =
                name.contains("bn") && !name.contains(".gamma.") && !name.contains(".beta.");
            let data: Vec<f32> = if is_norm {
                let (lo, hi) = match leaf {
                    "weight" => (0.8, 1.2),
                    "bias" | "running_mean" => (-0.1, 0.1),
                    _ => (0.5, 1.5),
                };
                (0..n).map(|_| rng.gen_range(lo..hi)).collect()
            } else {
                let mut a = (6.0 / fan_in as f64).sqrt() as f32;
                if name.contains(".gamma.") || name.contains(".beta.") {
                    a *= 0.1;
                } else if name.contains(".fc2.") {
                    a *= 0.5;
                }
                if leaf == "bias" {
                    a = 0.05;
                }
                (0..n).map(|_| rng.gen_range(-a..a)).collect()
            };
            w.insert(name, Tensor::new(shape, data));
        }
        w
    }
}

#[inline]
fn relu(x: &mut [f32]) {
    for v in x {
        *v = v.max(0.0);
    }
}

/// Inference-mode batch norm as a per-channel affine map.
struct Norm {
    scale: Vec<f32>,
    shift: Vec<f32>,
}

impl Norm {
    fn load(w: &ModelWeights, name: &str) -> Result<Norm> {
        let g = &w.require(&format!("{name}.weight"))?.data;
        let b = &w.require(&format!("{name}.bias"))?.data;
        let m = &w.require(&format!("{name}.running_mean"))?.data;
        let v = &w.require(&format!("{name}.running_var"))?.data;
        let mut scale = Vec::with_capacity(g.len());
        let mut shift = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let s = g[i] as f64 / (v[i] as f64 + BN_EPS as f64).sqrt();
            scale.push(s as f32);
            shift.push((b[i] as f64 - m[i] as f64 * s) as f32);
        }
        Ok(Norm { scale, shift })
    }
}

/// Fully connected layer, weights stored input-major (`[in][out]`).
struct Dense {
    inp: usize,
    out: usize,
    w: Vec<f32>,
    b: Vec<f32>,
}

impl Dense {
    fn load(w: &ModelWeights, name: &str) -> Result<Dense> {
        Self::from_parts(w, name, None)
    }

    /// Dense layer followed by batch norm, folded into one affine map.
    fn load_folded(w: &ModelWeights, name: &str, norm: &str) -> Result<Dense> {
        Self::from_parts(w, name, Some(Norm::load(w, norm)?))
    }

    fn from_parts(w: &ModelWeights, name: &str, norm: Option<Norm>) -> Result<Dense> {
        let wt = w.require(&format!("{name}.weight"))?;
        let mut b = w.require(&format!("{name}.bias"))?.data.clone();
        let (out, inp) = (wt.shape[0] as usize, wt.shape[1] as usize);
        let mut t = vec![0.0f32; out * inp];
        for o in 0..out {
            let s = norm.as_ref().map_or(1.0, |n| n.scale[o]);
            for i in 0..inp {
                t[i * out + o] = wt.data[o * inp + i] * s;
            }
            if let Some(n) = &norm {
                b[o] = b[o] * s + n.shift[o];
            }
        }
        Ok(Dense { inp, out, w: t, b })
    }

    /// Layers with a common input, concatenated along the output.
    fn stack(layers: &[Dense]) -> Dense {
        let inp = layers[0].inp;
        let out: usize = layers.iter().map(|l| l.out).sum();
        let mut w = Vec::with_capacity(inp * out);
        for i in 0..inp {
            for l in layers {
                w.extend_from_slice(&l.w[i * l.out..(i + 1) * l.out]);
            }
        }
        let b = layers.iter().flat_map(|l| l.b.iter().copied()).collect();
        Dense { inp, out, w, b }
    }

    fn forward(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.inp);
        let y = &mut y[..self.out];
        y.copy_from_slice(&self.b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yo, &wv) in y.iter_mut().zip(&self.w[i * self.out..(i + 1) * self.out]) {
                *yo += xi * wv;
            }
        }
    }
}

/// Side of the zero-padded window seen by the convolutions.
const PADDED_SIDE: usize = WINDOW + 2;
const PADDED_CELLS: usize = PADDED_SIDE * PADDED_SIDE * PADDED_SIDE;

#[inline]
fn padded_index(x: usize, y: usize, z: usize) -> usize {
    ((x + 1) * PADDED_SIDE + (y + 1)) * PADDED_SIDE + (z + 1)
}

/// 3×3×3 convolution with zero padding over the 4×4×4 window, BN folded.
/// Input channels are stored as zero-bordered 6×6×6 grids, outputs as 4×4×4
/// grids.
struct Conv {
    cin: usize,
    cout: usize,
    w: Vec<f32>,
    b: Vec<f32>,
}

impl Conv {
    fn load(w: &ModelWeights, name: &str, norm: &str) -> Result<Conv> {
        let wt = w.require(&format!("{name}.weight"))?;
        let b = w.require(&format!("{name}.bias"))?;
        let n = Norm::load(w, norm)?;
        let (cout, cin) = (wt.shape[0] as usize, wt.shape[1] as usize);
        let mut weights = wt.data.clone();
        for o in 0..cout {
            for v in &mut weights[o * cin * 27..(o + 1) * cin * 27] {
                *v *= n.scale[o];
            }
        }
        let bias = (0..cout)
            .map(|o| b.data[o] * n.scale[o] + n.shift[o])
            .collect();
        Ok(Conv {
            cin,
            cout,
            w: weights,
            b: bias,
        })
    }

    fn forward(&self, x: &[f32], y: &mut [f32]) {
        const S: usize = PADDED_SIDE;
        for o in 0..self.cout {
            // One 4-wide z row per (x, y) output column.
            let mut acc = [[self.b[o]; WINDOW]; WINDOW * WINDOW];
            for i in 0..self.cin {
                let xi = &x[i * PADDED_CELLS..(i + 1) * PADDED_CELLS];
                let kern = &self.w[(o * self.cin + i) * 27..(o * self.cin + i + 1) * 27];
                for kx in 0..3 {
                    for ky in 0..3 {
                        for kz in 0..3 {
                            let k = kern[(kx * 3 + ky) * 3 + kz];
                            for px in 0..WINDOW {
                                for py in 0..WINDOW {
                                    let base = ((px + kx) * S + py + ky) * S + kz;
                                    let row: &[f32; WINDOW] =
                                        xi[base..base + WINDOW].try_into().unwrap();
                                    let a = &mut acc[px * WINDOW + py];
                                    for l in 0..WINDOW {
                                        a[l] += k * row[l];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            for (dst, src) in y[o * WINDOW_CELLS..(o + 1) * WINDOW_CELLS]
                .chunks_exact_mut(WINDOW)
                .zip(&acc)
            {
                dst.copy_from_slice(src);
            }
        }
    }
}

/// Conditional batch norm: running-statistics normalization whose affine
/// scale and shift are offset by linear maps of the conditioning vector.
/// The maps of all blocks are evaluated together by the decoder.
struct CondNorm {
    inv_std: Vec<f32>,
    mean: Vec<f32>,
    gamma: Vec<f32>,
    beta: Vec<f32>,
}

impl CondNorm {
    fn load(w: &ModelWeights, name: &str) -> Result<CondNorm> {
        let var = &w.require(&format!("{name}.running_var"))?.data;
        Ok(CondNorm {
            inv_std: var
                .iter()
                .map(|&v| (1.0 / (v as f64 + BN_EPS as f64).sqrt()) as f32)
                .collect(),
            mean: w.require(&format!("{name}.running_mean"))?.data.clone(),
            gamma: w.require(&format!("{name}.weight"))?.data.clone(),
            beta: w.require(&format!("{name}.bias"))?.data.clone(),
        })
    }

    /// Normalizes `x` into `y` with scale offsets `dg` and shift offsets `db`.
    fn forward(&self, x: &[f32], dg: &[f32], db: &[f32], y: &mut [f32]) {
        for j in 0..x.len() {
            let xhat = (x[j] - self.mean[j]) * self.inv_std[j];
            y[j] = (self.gamma[j] + dg[j]) * xhat + (self.beta[j] + db[j]);
        }
    }
}

struct Block {
    norm1: CondNorm,
    fc1: Dense,
    norm2: CondNorm,
    fc2: Dense,
}

/// Loaded network; immutable and shareable.
pub struct NeuralNet {
    arch: Architecture,
    k: usize,
    point_layers: Vec<Dense>,
    point_fuse: Dense,
    convs: Vec<Conv>,
    voxel_fc: Dense,
    coord: Dense,
    blocks: Vec<Block>,
    /// Every `cbn*.gamma` and `cbn*.beta` map stacked into one layer, in
    /// block order: gamma1, beta1, gamma2, beta2.
    cond_maps: Dense,
    head: Dense,
}

impl std::fmt::Debug for NeuralNet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeuralNet")
            .field("arch", &self.arch)
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

impl NeuralNet {
    pub fn from_weights(w: &ModelWeights) -> Result<NeuralNet> {
        let arch = Architecture::from_id(w.architecture).ok_or_else(|| {
            Error::Weights(format!(
                "architecture id {} is not a network",
                w.architecture
            ))
        })?;
        w.validate()?;
        let point_layers = (0..4)
            .map(|i| Dense::load_folded(w, &format!("point.fc{i}"), &format!("point.bn{i}")))
            .collect::<Result<_>>()?;
        let convs = (0..4)
            .map(|i| Conv::load(w, &format!("voxel.conv{i}"), &format!("voxel.bn{i}")))
            .collect::<Result<_>>()?;
        let blocks = (0..arch.blocks)
            .map(|b| {
                Ok(Block {
                    norm1: CondNorm::load(w, &format!("decoder.block{b}.cbn1"))?,
                    fc1: Dense::load(w, &format!("decoder.block{b}.fc1"))?,
                    norm2: CondNorm::load(w, &format!("decoder.block{b}.cbn2"))?,
                    fc2: Dense::load(w, &format!("decoder.block{b}.fc2"))?,
                })
            })
            .collect::<Result<_>>()?;
        let mut map_names = Vec::new();
        for b in 0..arch.blocks {
            for j in 1..=2 {
                for m in ["gamma", "beta"] {
                    map_names.push(format!("decoder.block{b}.cbn{j}.{m}"));
                }
            }
        }
        let cond_maps = Dense::stack(
            &map_names
                .iter()
                .map(|n| Dense::load(w, n))
                .collect::<Result<Vec<_>>>()?,
        );
        Ok(NeuralNet {
            arch,
            k: w.k as usize,
            cond_maps,
            point_layers,
            point_fuse: Dense::load_folded(w, "point.fuse", "point.fuse_bn")?,
            convs,
            voxel_fc: Dense::load_folded(w, "voxel.fc", "voxel.fc_bn")?,
            coord: Dense::load(w, "decoder.coord")?,
            blocks,
            head: Dense::load(w, "decoder.head")?,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    /// Number of point neighbors the network expects.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Point feature of `K` neighbor rows.
    pub fn point_encoder(&self, pc: &PointContext) -> Result<Vec<f32>> {
        if pc.k() != self.k {
            return Err(Error::Weights(format!(
                "point context has {} rows, network expects {}",
                pc.k(),
                self.k
            )));
        }
        Ok(self.point_features(pc.rows()))
    }

    /// Outputs of the four shared per-neighbor layers for one row,
    /// concatenated.
    fn row_features(&self, row: &[f32; 3]) -> Box<[f32]> {
        let mut feats = vec![0.0f32; self.arch.pooled_width()];
        let mut prev = 0..0;
        for (layer, &w) in self.point_layers.iter().zip(&self.arch.point_widths) {
            let (done, rest) = feats.split_at_mut(prev.end);
            let out = &mut rest[..w];
            if prev.is_empty() {
                layer.forward(row, out);
            } else {
                layer.forward(&done[prev.clone()], out);
            }
            relu(out);
            prev = prev.end..prev.end + w;
        }
        feats.into_boxed_slice()
    }

    /// Max pools per-row features over the neighbors and applies the fusion
    /// layer.
    fn fuse_rows<'a>(&self, rows: impl Iterator<Item = &'a [f32]>) -> Vec<f32> {
        let mut pooled = vec![0.0f32; self.arch.pooled_width()];
        for feats in rows {
            for (p, &v) in pooled.iter_mut().zip(feats) {
                *p = p.max(v);
            }
        }
        let mut out = vec![0.0f32; self.arch.point_out];
        self.point_fuse.forward(&pooled, &mut out);
        relu(&mut out);
        out
    }

    fn point_features(&self, rows: &[[f32; 3]]) -> Vec<f32> {
        let feats: Vec<_> = rows.iter().map(|r| self.row_features(r)).collect();
        self.fuse_rows(feats.iter().map(|f| &f[..]))
    }

    /// Voxel feature of a ternary window.
    pub fn voxel_encoder(&self, vox: &VoxelContext) -> Vec<f32> {
        let max_c = *self.arch.voxel_channels.iter().max().unwrap();
        let mut x = vec![0.0f32; max_c * PADDED_CELLS];
        for px in 0..WINDOW {
            for py in 0..WINDOW {
                for pz in 0..WINDOW {
                    x[padded_index(px, py, pz)] = vox.get(px, py, pz) as f32;
                }
            }
        }
        let mut y = vec![0.0f32; max_c * WINDOW_CELLS];
        for conv in &self.convs {
            conv.forward(&x, &mut y);
            for c in 0..conv.cout {
                let (src, dst) = (&y[c * WINDOW_CELLS..], &mut x[c * PADDED_CELLS..]);
                for (p, &v) in src[..WINDOW_CELLS].iter().enumerate() {
                    dst[padded_index(p / 16, p / 4 % 4, p % 4)] = v.max(0.0);
                }
            }
        }
        let c_last = self.arch.voxel_channels[3];
        let pooled: Vec<f32> = (0..c_last)
            .map(|c| {
                y[c * WINDOW_CELLS..(c + 1) * WINDOW_CELLS]
                    .iter()
                    .fold(0.0f32, |m, &v| m.max(v))
            })
            .collect();
        let mut out = vec![0.0f32; self.arch.voxel_out];
        self.voxel_fc.forward(&pooled, &mut out);
        relu(&mut out);
        out
    }

    /// Occupancy probability from the two features and the node coordinate,
    /// before quantization.
    pub fn decoder_head(&self, e_pc: &[f32], e_vox: &[f32], coord: &NodeCoordinate) -> Result<f64> {
        if e_pc.len() != self.arch.point_out || e_vox.len() != self.arch.voxel_out {
            return Err(Error::Weights(format!(
                "decoder expects features of length {}/{}, got {}/{}",
                self.arch.point_out,
                self.arch.voxel_out,
                e_pc.len(),
                e_vox.len()
            )));
        }
        Ok(self.decode(e_pc, e_vox, coord))
    }

    fn decode(&self, e_pc: &[f32], e_vox: &[f32], coord: &NodeCoordinate) -> f64 {
        let width = self.arch.width();
        let mut buf = vec![0.0f32; 3 * width];
        let (h, rest) = buf.split_at_mut(width);
        let (t, u) = rest.split_at_mut(width);
        let (pc_part, rest) = h.split_at_mut(e_pc.len());
        let (vox_part, e_coor) = rest.split_at_mut(e_vox.len());
        pc_part.copy_from_slice(e_pc);
        vox_part.copy_from_slice(e_vox);
        self.coord.forward(&coord.0, e_coor);
        relu(e_coor);
        let mut cond = vec![0.0f32; self.cond_maps.out];
        self.cond_maps.forward(e_coor, &mut cond);

        for (block, maps) in self.blocks.iter().zip(cond.chunks_exact(4 * width)) {
            let (g1, rest) = maps.split_at(width);
            let (b1, rest) = rest.split_at(width);
            let (g2, b2) = rest.split_at(width);
            block.norm1.forward(h, g1, b1, t);
            relu(t);
            block.fc1.forward(t, u);
            block.norm2.forward(u, g2, b2, t);
            relu(t);
            block.fc2.forward(t, u);
            for (hv, uv) in h.iter_mut().zip(u.iter()) {
                *hv += uv;
            }
        }
        let mut logit = [0.0f32];
        self.head.forward(h, &mut logit);
        1.0 / (1.0 + (-(logit[0] as f64)).exp())
    }
}

/// Which encoder branches feed the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AblationMode {
    #[default]
    Hybrid,
    VoxelOnly,
    PointOnly,
}

impl AblationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Hybrid => "hybrid",
            AblationMode::VoxelOnly => "voxel-only",
            AblationMode::PointOnly => "point-only",
        }
    }

    fn uses_points(self) -> bool {
        self != AblationMode::VoxelOnly
    }

    fn uses_voxels(self) -> bool {
        self != AblationMode::PointOnly
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(AblationMode::Hybrid),
            "voxel-only" => Ok(AblationMode::VoxelOnly),
            "point-only" => Ok(AblationMode::PointOnly),
            other => Err(Error::Config(format!(
                "unknown ablation mode '{other}' (expected hybrid, voxel-only or point-only)"
            ))),
        }
    }
}

/// Memory budget of each feature cache, in bytes.
const CACHE_BYTES: usize = 64 << 20;

/// Entropy model backed by a [`NeuralNet`].
///
/// Voxel features are memoized per window and per-neighbor point features
/// per row (neighbor offsets take few distinct values). The caches hold
/// exact copies of computed features, so predictions do not depend on their
/// contents.
pub struct NeuralModel {
    net: Arc<NeuralNet>,
    mode: AblationMode,
    file_hash: u64,
    voxel_cache: FxHashMap<VoxelContext, Box<[f32]>>,
    row_cache: FxHashMap<[u32; 3], Box<[f32]>>,
}

impl NeuralModel {
    /// `file_hash` is the fingerprint of the PVW file the net was loaded from.
    pub fn new(net: Arc<NeuralNet>, file_hash: u64) -> Self {
        NeuralModel {
            net,
            mode: AblationMode::Hybrid,
            file_hash,
            voxel_cache: FxHashMap::default(),
            row_cache: FxHashMap::default(),
        }
    }

    pub fn from_weights(w: &ModelWeights) -> Result<Self> {
        Ok(Self::new(
            Arc::new(NeuralNet::from_weights(w)?),
            w.fingerprint(),
        ))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = crate::read_file(path)?;
        let w = ModelWeights::from_bytes(&bytes)?;
        Ok(Self::new(
            Arc::new(NeuralNet::from_weights(&w)?),
            file_fingerprint(&bytes),
        ))
    }

    pub fn net(&self) -> &Arc<NeuralNet> {
        &self.net
    }

    pub fn mode(&self) -> AblationMode {
        self.mode
    }

    /// Fresh model sharing the same network (empty feature caches).
    pub fn share(&self) -> Self {
        NeuralModel {
            net: Arc::clone(&self.net),
            mode: self.mode,
            file_hash: self.file_hash,
            voxel_cache: FxHashMap::default(),
            row_cache: FxHashMap::default(),
        }
    }

    /// Occupancy probability before quantization.
    pub fn probability(&mut self, ctx: &HybridContext) -> f64 {
        let net = &self.net;
        let e_pc = if self.mode.uses_points() {
            let pc = ctx
                .pc
                .as_ref()
                .expect("neural model requires a point context");
            assert_eq!(pc.k(), net.k, "point context size mismatch");
            let entry_bytes = 12 + 64 + 4 * net.arch.pooled_width();
            if self.row_cache.len() + pc.k() > CACHE_BYTES / entry_bytes {
                self.row_cache.clear();
            }
            for row in pc.rows() {
                self.row_cache
                    .entry(row.map(f32::to_bits))
                    .or_insert_with(|| net.row_features(row));
            }
            let cache = &self.row_cache;
            net.fuse_rows(pc.rows().iter().map(|r| &*cache[&r.map(f32::to_bits)]))
        } else {
            vec![0.0; net.arch.point_out]
        };
        let zeros;
        let e_vox: &[f32] = if self.mode.uses_voxels() {
            let entry_bytes = WINDOW_CELLS + 64 + 4 * net.arch.voxel_out;
            if self.voxel_cache.len() >= CACHE_BYTES / entry_bytes {
                self.voxel_cache.clear();
            }
            self.voxel_cache
                .entry(ctx.vox)
                .or_insert_with(|| net.voxel_encoder(&ctx.vox).into_boxed_slice())
        } else {
            zeros = vec![0.0; net.arch.voxel_out];
            &zeros
        };
        net.decode(&e_pc, e_vox, &ctx.coord)
    }
}

impl EntropyModel for NeuralModel {
    fn id(&self) -> ModelId {
        ModelId::Neural
    }

    /// The weight-file hash; ablated variants hash the file hash together
    /// with the mode name so their streams cannot be confused.
    fn fingerprint(&self) -> u64 {
        match self.mode {
            AblationMode::Hybrid => self.file_hash,
            mode => {
                let mut bytes = self.file_hash.to_le_bytes().to_vec();
                bytes.extend_from_slice(mode.as_str().as_bytes());
                file_fingerprint(&bytes)
            }
        }
    }

    fn point_context_size(&self) -> Option<usize> {
        self.mode.uses_points().then_some(self.net.k)
    }

    fn predict(&mut self, ctx: &HybridContext) -> Probability {
        Probability::from_p1(self.probability(ctx))
    }
}

/// A model whose disabled branch feeds zeros to the decoder. `Hybrid`
/// reproduces the unmodified model.
pub fn ablation_variant(model: &NeuralModel, mode: AblationMode) -> NeuralModel {
    let mut m = model.share();
    m.mode = mode;
    m
}
