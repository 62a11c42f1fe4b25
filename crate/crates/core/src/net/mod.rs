//! The multi-scale embedding network.
//!
//! Each branch downsamples the input by its own factor, runs a conv/ReLU
//! stack (optionally max-pooled), flattens, projects to its branch
//! embedding and L2-normalizes it. Branch embeddings are concatenated,
//! passed through dropout (training only), projected to the final
//! embedding and normalized again. Branches share no weights.

mod checkpoint;

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ops::{self, conv_output_size, DropoutMask};
use crate::tensor::{Scalar, Tensor};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};

/// Norm floor used by every L2 normalization in the network.
pub const NORM_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub pool_after: bool,
}

impl ConvLayerSpec {
    pub const fn new(filters: usize, kernel: usize, stride: usize, padding: usize, pool_after: bool) -> Self {
        Self {
            filters,
            kernel,
            stride,
            padding,
            pool_after,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    /// 1 means full resolution.
    pub input_downsample_factor: usize,
    pub conv_layers: Vec<ConvLayerSpec>,
    pub branch_embed_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiScaleNetConfig {
    pub branches: Vec<BranchSpec>,
    pub final_embed_dim: usize,
    /// `(C, H, W)`
    pub input_shape: [usize; 3],
    pub dropout_rate: f64,
}

impl Default for MultiScaleNetConfig {
    fn default() -> Self {
        Self::desk_scale([1, 28, 28])
    }
}

impl MultiScaleNetConfig {
    pub const DEFAULT_DROPOUT: f64 = 0.25;

    /// Small three-branch network: a 4-layer deep branch at full resolution
    /// and shallow branches at 1/2 and 1/4 scale, with embedding widths
    /// 64, 16 and 8 and a 64-wide final embedding.
    pub fn desk_scale(input_shape: [usize; 3]) -> Self {
        Self::with_dims(input_shape, [64, 16, 8], 64, [8, 16, 16, 16], [8, 8])
    }

    /// Full-size widths: 4096 / 1024 / 512 and a 4096-wide final embedding.
    pub fn canonical(input_shape: [usize; 3]) -> Self {
        Self::with_dims(input_shape, [4096, 1024, 512], 4096, [64, 128, 256, 512], [64, 128])
    }

    fn with_dims(
        input_shape: [usize; 3],
        branch_dims: [usize; 3],
        final_dim: usize,
        deep: [usize; 4],
        shallow: [usize; 2],
    ) -> Self {
        let deep_branch = BranchSpec {
            input_downsample_factor: 1,
            conv_layers: vec![
                ConvLayerSpec::new(deep[0], 3, 1, 1, true),
                ConvLayerSpec::new(deep[1], 3, 1, 1, true),
                ConvLayerSpec::new(deep[2], 3, 1, 1, false),
                ConvLayerSpec::new(deep[3], 3, 2, 1, false),
            ],
            branch_embed_dim: branch_dims[0],
        };
        let half = BranchSpec {
            input_downsample_factor: 2,
            conv_layers: vec![
                ConvLayerSpec::new(shallow[0], 3, 1, 1, true),
                ConvLayerSpec::new(shallow[1], 3, 2, 1, false),
            ],
            branch_embed_dim: branch_dims[1],
        };
        let quarter = BranchSpec {
            input_downsample_factor: 4,
            conv_layers: vec![ConvLayerSpec::new(shallow[0], 3, 2, 1, false)],
            branch_embed_dim: branch_dims[2],
        };
        Self {
            branches: vec![deep_branch, half, quarter],
            final_embed_dim: final_dim,
            input_shape,
            dropout_rate: Self::DEFAULT_DROPOUT,
        }
    }

    /// Checks structural invariants and propagates shapes through every branch.
    pub fn validate(&self) -> Result<()> {
        self.branch_layouts().map(|_| ())
    }

    pub fn concat_dim(&self) -> usize {
        self.branches.iter().map(|b| b.branch_embed_dim).sum()
    }

    fn branch_layouts(&self) -> Result<Vec<BranchLayout>> {
        fn cfg<T>(m: String) -> Result<T> {
            Err(Error::Config(m))
        }
        if self.branches.is_empty() {
            return cfg("network needs at least one branch".into());
        }
        if self.final_embed_dim == 0 {
            return cfg("final_embed_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return cfg(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        let full_res = self.branches.iter().filter(|b| b.input_downsample_factor == 1).count();
        if full_res != 1 {
            return cfg(format!("exactly one branch must have downsample factor 1, found {full_res}"));
        }
        let [c, h, w] = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return cfg(format!("input shape {:?} has a zero dimension", self.input_shape));
        }
        self.branches
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let f = b.input_downsample_factor;
                if f == 0 || h % f != 0 || w % f != 0 {
                    return cfg(format!("branch {bi}: factor {f} does not divide input {h}x{w}"));
                }
                if b.conv_layers.is_empty() || b.branch_embed_dim == 0 {
                    return cfg(format!("branch {bi}: needs conv layers and a positive embed dim"));
                }
                let (mut ch, mut hh, mut ww) = (c, h / f, w / f);
                let mut layers = Vec::new();
                for (li, l) in b.conv_layers.iter().enumerate() {
                    if l.filters == 0 || l.kernel == 0 || l.stride == 0 {
                        return cfg(format!("branch {bi} layer {li}: filters, kernel and stride must be positive"));
                    }
                    let (Some(oh), Some(ow)) = (
                        conv_output_size(hh, l.kernel, l.stride, l.padding),
                        conv_output_size(ww, l.kernel, l.stride, l.padding),
                    ) else {
                        return cfg(format!(
                            "branch {bi} layer {li}: kernel {} does not fit {hh}x{ww} input (padding {})",
                            l.kernel, l.padding
                        ));
                    };
                    layers.push(LayerLayout {
                        in_channels: ch,
                        spec: *l,
                    });
                    ch = l.filters;
                    hh = oh;
                    ww = ow;
                    if l.pool_after {
                        if hh % 2 != 0 || ww % 2 != 0 {
                            return cfg(format!("branch {bi} layer {li}: cannot 2x2-pool odd size {hh}x{ww}"));
                        }
                        hh /= 2;
                        ww /= 2;
                    }
                }
                Ok(BranchLayout {
                    layers,
                    flat_dim: ch * hh * ww,
                })
            })
            .collect()
    }

    /// Parameter names and shapes in initialization order.
    pub fn parameter_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let layouts = self.branch_layouts()?;
        let mut out = Vec::new();
        for (bi, (b, lay)) in self.branches.iter().zip(&layouts).enumerate() {
            for (li, l) in lay.layers.iter().enumerate() {
                out.push((
                    conv_weight(bi, li),
                    vec![l.spec.filters, l.in_channels, l.spec.kernel, l.spec.kernel],
                ));
                out.push((conv_bias(bi, li), vec![l.spec.filters]));
            }
            out.push((embed_weight(bi), vec![lay.flat_dim, b.branch_embed_dim]));
            out.push((embed_bias(bi), vec![b.branch_embed_dim]));
        }
        out.push((HEAD_WEIGHT.into(), vec![self.concat_dim(), self.final_embed_dim]));
        out.push((HEAD_BIAS.into(), vec![self.final_embed_dim]));
        Ok(out)
    }
}

struct LayerLayout {
    in_channels: usize,
    spec: ConvLayerSpec,
}

struct BranchLayout {
    layers: Vec<LayerLayout>,
    flat_dim: usize,
}

const HEAD_WEIGHT: &str = "head.weight";
const HEAD_BIAS: &str = "head.bias";

fn conv_weight(b: usize, l: usize) -> String {
    format!("branch{b}.conv{l}.weight")
}
fn conv_bias(b: usize, l: usize) -> String {
    format!("branch{b}.conv{l}.bias")
}
fn embed_weight(b: usize) -> String {
    format!("branch{b}.embed.weight")
}
fn embed_bias(b: usize) -> String {
    format!("branch{b}.embed.bias")
}

/// Named parameter tensors (all `W_y` and `B_y`).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T = f32> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new(tensors: BTreeMap<String, Tensor<T>>) -> Self {
        Self { tensors }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.tensors.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Elementwise accumulate `other` into `self`; names must match.
    pub fn accumulate(&mut self, other: &ParamSet<T>) -> Result<()> {
        for (k, v) in &other.tensors {
            self.tensors
                .get_mut(k)
                .ok_or_else(|| Error::Lookup(format!("parameter {k}")))?
                .add_assign(v)?;
        }
        Ok(())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Verifies names and shapes match those generated from `config`.
    pub fn check_against(&self, config: &MultiScaleNetConfig) -> Result<()> {
        let want = config.parameter_shapes()?;
        if want.len() != self.tensors.len() {
            return Err(Error::Data(format!(
                "config expects {} parameter tensors, found {}",
                want.len(),
                self.tensors.len()
            )));
        }
        for (name, shape) in want {
            let t = self.get(&name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Data(format!(
                    "parameter {name} has shape {:?}, config expects {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Architecture plus learned parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: MultiScaleNetConfig,
    pub params: ParamSet<f32>,
    pub rng_seed: u64,
    pub epoch: u32,
}

/// Builds a network with He-normal weights and zero biases, deterministic in `seed`.
pub fn build_network(config: &MultiScaleNetConfig, seed: u64) -> Result<Checkpoint> {
    let shapes = config.parameter_shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for (name, shape) in shapes {
        let t = if name.ends_with(".bias") {
            Tensor::zeros(shape)
        } else {
            let fan_in: usize = if shape.len() == 4 {
                shape[1] * shape[2] * shape[3]
            } else {
                shape[0]
            };
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .map_err(|e| Error::Config(format!("init: {e}")))?;
            let n = shape.iter().product();
            Tensor::new(shape, (0..n).map(|_| normal.sample(&mut rng) as f32).collect())?
        };
        tensors.insert(name, t);
    }
    Ok(Checkpoint {
        config: config.clone(),
        params: ParamSet::new(tensors),
        rng_seed: seed,
        epoch: 0,
    })
}

struct LayerCache<T> {
    input: Tensor<T>,
    pre_relu: Tensor<T>,
    post_relu: Tensor<T>,
}

struct BranchCache<T> {
    input_shape: Vec<usize>,
    layers: Vec<LayerCache<T>>,
    conv_out_shape: Vec<usize>,
    flat: Tensor<T>,
    embed_pre: Tensor<T>,
}

/// Intermediate values kept from [`forward`] for [`backward`].
pub struct ForwardCache<T> {
    branches: Vec<BranchCache<T>>,
    widths: Vec<usize>,
    mask: DropoutMask<T>,
    head_in: Tensor<T>,
    head_pre: Tensor<T>,
}

/// Full forward pass. Dropout is applied only when `dropout_rng` is given.
pub fn forward<T: Scalar>(
    config: &MultiScaleNetConfig,
    params: &ParamSet<T>,
    images: &Tensor<T>,
    dropout_rng: Option<&mut dyn RngCore>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    images.expect_rank(4, "images")?;
    if images.shape()[1..] != config.input_shape {
        return Err(Error::Dimension(format!(
            "images have shape {:?}, network expects [N, {}, {}, {}]",
            images.shape(),
            config.input_shape[0],
            config.input_shape[1],
            config.input_shape[2]
        )));
    }
    let n = images.rows();
    let mut caches = Vec::with_capacity(config.branches.len());
    let mut branch_out = Vec::with_capacity(config.branches.len());
    for (bi, b) in config.branches.iter().enumerate() {
        let mut x = ops::downsample_avg(images, b.input_downsample_factor)?;
        let input_shape = x.shape().to_vec();
        let mut layers = Vec::with_capacity(b.conv_layers.len());
        for (li, l) in b.conv_layers.iter().enumerate() {
            let pre = ops::conv2d(&x, params.get(&conv_weight(bi, li))?, params.get(&conv_bias(bi, li))?, l.stride, l.padding)?;
            let post = ops::relu(&pre);
            let next = if l.pool_after { ops::maxpool2x2(&post)? } else { post.clone() };
            layers.push(LayerCache {
                input: x,
                pre_relu: pre,
                post_relu: post,
            });
            x = next;
        }
        let conv_out_shape = x.shape().to_vec();
        let flat_dim = x.row_len();
        let flat = x.reshape([n, flat_dim])?;
        let pre = ops::affine(&flat, params.get(&embed_weight(bi))?, params.get(&embed_bias(bi))?)?;
        branch_out.push(ops::l2_normalize(&pre, NORM_EPSILON)?);
        caches.push(BranchCache {
            input_shape,
            layers,
            conv_out_shape,
            flat,
            embed_pre: pre,
        });
    }
    let widths: Vec<usize> = branch_out.iter().map(|t| t.shape()[1]).collect();
    let joined = ops::concat(&branch_out.iter().collect::<Vec<_>>())?;
    let (head_in, mask) = match dropout_rng {
        Some(rng) => ops::dropout(&joined, config.dropout_rate, rng, true)?,
        None => (joined.clone(), DropoutMask::identity(joined.len())),
    };
    let head_pre = ops::affine(&head_in, params.get(HEAD_WEIGHT)?, params.get(HEAD_BIAS)?)?;
    let out = ops::l2_normalize(&head_pre, NORM_EPSILON)?;
    out.check_finite("embedding")?;
    Ok((
        out,
        ForwardCache {
            branches: caches,
            widths,
            mask,
            head_in,
            head_pre,
        },
    ))
}

/// Parameter gradients of `⟨upstream, forward(...)⟩`.
pub fn backward<T: Scalar>(
    config: &MultiScaleNetConfig,
    params: &ParamSet<T>,
    cache: &ForwardCache<T>,
    upstream: &Tensor<T>,
) -> Result<ParamSet<T>> {
    let mut grads = BTreeMap::new();
    let g_head_pre = ops::l2_normalize_backward(&cache.head_pre, NORM_EPSILON, upstream)?;
    let (g_head_in, gw, gb) = ops::affine_backward(&cache.head_in, params.get(HEAD_WEIGHT)?, &g_head_pre)?;
    grads.insert(HEAD_WEIGHT.to_string(), gw);
    grads.insert(HEAD_BIAS.to_string(), gb);
    let g_joined = ops::dropout_backward(&cache.mask, &g_head_in)?;
    let g_branches = ops::concat_backward(&cache.widths, &g_joined)?;

    for (bi, (b, (bc, g_out))) in config.branches.iter().zip(cache.branches.iter().zip(&g_branches)).enumerate() {
        let g_pre = ops::l2_normalize_backward(&bc.embed_pre, NORM_EPSILON, g_out)?;
        let (g_flat, gw, gb) = ops::affine_backward(&bc.flat, params.get(&embed_weight(bi))?, &g_pre)?;
        grads.insert(embed_weight(bi), gw);
        grads.insert(embed_bias(bi), gb);
        let mut g = g_flat.reshape(bc.conv_out_shape.clone())?;
        for (li, (l, lc)) in b.conv_layers.iter().zip(&bc.layers).enumerate().rev() {
            if l.pool_after {
                g = ops::maxpool2x2_backward(&lc.post_relu, &g)?;
            }
            let g_pre = ops::relu_backward(&lc.pre_relu, &g)?;
            let (g_in, gw, gb) =
                ops::conv2d_backward(&lc.input, params.get(&conv_weight(bi, li))?, l.stride, l.padding, &g_pre)?;
            grads.insert(conv_weight(bi, li), gw);
            grads.insert(conv_bias(bi, li), gb);
            g = g_in;
        }
        debug_assert_eq!(g.shape(), bc.input_shape.as_slice());
    }
    Ok(ParamSet::new(grads))
}

/// Images per chunk in batched inference.
const EMBED_CHUNK: usize = 64;

impl Checkpoint {
    /// Inference-mode embeddings of `[N, C, H, W]` images; rows have unit norm.
    ///
    /// Chunks run in parallel; each row depends only on its own image, so the
    /// result does not depend on the thread count.
    pub fn embed(&self, images: &Tensor<f32>) -> Result<Tensor<f32>> {
        images.expect_rank(4, "images")?;
        let n = images.rows();
        let chunks: Vec<Vec<usize>> = (0..n)
            .collect::<Vec<_>>()
            .chunks(EMBED_CHUNK)
            .map(<[usize]>::to_vec)
            .collect();
        let parts = chunks
            .par_iter()
            .map(|idx| {
                let batch = images.select_rows(idx)?;
                forward(&self.config, &self.params, &batch, None).map(|(out, _)| out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(n * self.config.final_embed_dim);
        for p in parts {
            data.extend(p.into_data());
        }
        Tensor::new([n, self.config.final_embed_dim], data)
    }

    /// Embeds with dropout active, drawing masks from `rng`.
    pub fn embed_training(&self, images: &Tensor<f32>, rng: &mut dyn RngCore) -> Result<Tensor<f32>> {
        forward(&self.config, &self.params, images, Some(rng)).map(|(out, _)| out)
    }
}
