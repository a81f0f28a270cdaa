use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shiftfield_core::{DisplacementField, GridSpec, Volume};

use crate::layers::{
    leaky_relu, leaky_relu_backward, Conv3d, InormCtx, InstanceNorm, MaxPool3d, ScSe, ScSeCtx,
    TransposedConv3d,
};
pub use crate::layers::{GradPool, ParamPool};
use crate::tensor::Tensor4;
use crate::{RefinerError, Result};

/// Architecture and training hyperparameters.
///
/// The default is the desk-scale network (3 levels, 8 base channels capped
/// at 32); the full-scale configuration from the reference setting
/// (4 levels, 32→256 channels) remains valid but is reached only by config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerConfig {
    pub levels: usize,
    pub base_channels: usize,
    pub max_channels: usize,
    pub leaky_slope: f64,
    pub use_scse: bool,
    pub scse_reduction: usize,
    pub lambda_reg: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        RefinerConfig {
            levels: 3,
            base_channels: 8,
            max_channels: 32,
            leaky_slope: 1e-2,
            use_scse: true,
            scse_reduction: 2,
            lambda_reg: 50.0,
            lr: 5e-4,
            epochs: 10,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(RefinerError::BadConfig(format!(
                "levels must be >= 2, got {}",
                self.levels
            )));
        }
        if self.base_channels == 0 || self.max_channels < self.base_channels {
            return Err(RefinerError::BadConfig(
                "need 0 < base_channels <= max_channels".into(),
            ));
        }
        if self.batch_size != 1 {
            return Err(RefinerError::BadConfig(
                "only batch size 1 is supported".into(),
            ));
        }
        Ok(())
    }

    pub fn divisor(&self) -> usize {
        1 << (self.levels - 1)
    }

    fn channels_at(&self, level: usize) -> usize {
        (self.base_channels << level).min(self.max_channels)
    }
}

/// One residual block: two 3×3×3 convolutions with instance norm, LeakyReLU
/// after the first norm and after the residual summation, an identity (or
/// 1×1×1 projection) skip, and a squeeze-and-excitation recalibration at the
/// end.
#[derive(Debug, Clone)]
struct ResBlock {
    conv1: Conv3d,
    norm1: InstanceNorm,
    conv2: Conv3d,
    norm2: InstanceNorm,
    proj: Option<Conv3d>,
    scse: Option<ScSe>,
    slope: f64,
}

struct ResBlockCtx {
    x: Tensor4,
    n1: InormCtx,
    r1_in: Tensor4, // norm1 output (lrelu input)
    r1: Tensor4,
    n2: InormCtx,
    sum_in: Tensor4, // norm2 output + skip (input of the post-sum lrelu)
    act: Tensor4,    // post-sum activation (scse input)
    scse: Option<ScSeCtx>,
}

impl ResBlock {
    #[allow(clippy::too_many_arguments)]
    fn new<R: Rng + ?Sized>(
        pool: &mut ParamPool,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        cfg: &RefinerConfig,
        rng: &mut R,
    ) -> Self {
        let conv1 = Conv3d::new(pool, &format!("{name}.conv1"), in_ch, out_ch, 3, rng, false);
        let norm1 = InstanceNorm::new(pool, &format!("{name}.norm1"), out_ch);
        let conv2 = Conv3d::new(pool, &format!("{name}.conv2"), out_ch, out_ch, 3, rng, false);
        let norm2 = InstanceNorm::new(pool, &format!("{name}.norm2"), out_ch);
        let proj = if in_ch != out_ch {
            Some(Conv3d::new(
                pool,
                &format!("{name}.proj"),
                in_ch,
                out_ch,
                1,
                rng,
                false,
            ))
        } else {
            None
        };
        let scse = cfg.use_scse.then(|| {
            ScSe::new(
                pool,
                &format!("{name}.scse"),
                out_ch,
                cfg.scse_reduction,
                rng,
            )
        });
        ResBlock {
            conv1,
            norm1,
            conv2,
            norm2,
            proj,
            scse,
            slope: cfg.leaky_slope,
        }
    }

    fn forward(&self, pool: &ParamPool, x: &Tensor4) -> (Tensor4, ResBlockCtx) {
        let a1 = self.conv1.forward(pool, x);
        let (r1_in, n1) = self.norm1.forward(pool, &a1);
        let r1 = leaky_relu(&r1_in, self.slope);
        let a2 = self.conv2.forward(pool, &r1);
        let (n2_out, n2) = self.norm2.forward(pool, &a2);
        drop(a1);
        drop(a2);
        let skip = match &self.proj {
            Some(p) => p.forward(pool, x),
            None => x.clone(),
        };
        let mut sum_in = n2_out;
        for (s, k) in sum_in.data_mut().iter_mut().zip(skip.data()) {
            *s += k;
        }
        let act = leaky_relu(&sum_in, self.slope);
        let (out, scse_ctx) = match &self.scse {
            Some(s) => {
                let (y, c) = s.forward(pool, &act);
                (y, Some(c))
            }
            None => (act.clone(), None),
        };
        (
            out,
            ResBlockCtx {
                x: x.clone(),
                n1,
                r1_in,
                r1,
                n2,
                sum_in,
                act,
                scse: scse_ctx,
            },
        )
    }

    fn backward(
        &self,
        pool: &ParamPool,
        ctx: &ResBlockCtx,
        dy: &Tensor4,
        grads: &mut GradPool,
    ) -> Tensor4 {
        let d_act = match (&self.scse, &ctx.scse) {
            (Some(s), Some(c)) => s.backward(pool, &ctx.act, c, dy, grads),
            _ => dy.clone(),
        };
        let d_sum = leaky_relu_backward(&ctx.sum_in, &d_act, self.slope);
        // residual summation fans out to the norm path and the skip path
        let d_n2out = d_sum.clone();
        let mut dx = match &self.proj {
            Some(p) => p.backward(pool, &ctx.x, &d_sum, grads),
            None => d_sum.clone(),
        };
        let d_a2 = self.norm2.backward(pool, &ctx.n2, &d_n2out, grads);
        let d_r1 = self.conv2.backward(pool, &ctx.r1, &d_a2, grads);
        let d_r1in = leaky_relu_backward(&ctx.r1_in, &d_r1, self.slope);
        let d_a1 = self.norm1.backward(pool, &ctx.n1, &d_r1in, grads);
        let d_x_main = self.conv1.backward(pool, &ctx.x, &d_a1, grads);
        for (a, b) in dx.data_mut().iter_mut().zip(d_x_main.data()) {
            *a += b;
        }
        dx
    }
}

/// The residual refiner `f(image, φ_init) = φ_init + ε`.
///
/// The final 1×1×1 convolution is zero-initialized, so a freshly built model
/// is the identity on `φ_init`.
#[derive(Debug, Clone)]
pub struct RefinerModel {
    pub config: RefinerConfig,
    pool: ParamPool,
    encoders: Vec<ResBlock>,
    decoders: Vec<(TransposedConv3d, ResBlock)>,
    head: Conv3d,
    pub seed: u64,
    pub epoch: usize,
}

pub struct ForwardTrace {
    input: Tensor4,
    enc_ctx: Vec<ResBlockCtx>,
    pool_argmax: Vec<Vec<u32>>,
    pool_in_shapes: Vec<[usize; 4]>,
    dec_tconv_in: Vec<Tensor4>,
    dec_ctx: Vec<ResBlockCtx>,
    head_in: Tensor4,
}

impl RefinerModel {
    pub fn new(config: RefinerConfig) -> Result<Self> {
        config.validate()?;
        let mut pool = ParamPool::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut encoders = Vec::new();
        let mut in_ch = 4usize;
        for level in 0..config.levels {
            let out_ch = config.channels_at(level);
            encoders.push(ResBlock::new(
                &mut pool,
                &format!("enc{level}"),
                in_ch,
                out_ch,
                &config,
                &mut rng,
            ));
            in_ch = out_ch;
        }
        let mut decoders = Vec::new();
        for level in (0..config.levels - 1).rev() {
            let deep_ch = config.channels_at(level + 1);
            let out_ch = config.channels_at(level);
            let up = TransposedConv3d::new(
                &mut pool,
                &format!("dec{level}.up"),
                deep_ch,
                out_ch,
                &mut rng,
            );
            let block = ResBlock::new(
                &mut pool,
                &format!("dec{level}.block"),
                out_ch,
                out_ch,
                &config,
                &mut rng,
            );
            decoders.push((up, block));
        }
        let head = Conv3d::new(
            &mut pool,
            "head",
            config.base_channels,
            3,
            1,
            &mut rng,
            true, // zero-initialized: the untrained model is the identity
        );
        Ok(RefinerModel {
            seed: config.seed,
            config,
            pool,
            encoders,
            decoders,
            head,
            epoch: 0,
        })
    }

    pub fn params(&self) -> &ParamPool {
        &self.pool
    }

    pub fn params_mut(&mut self) -> &mut ParamPool {
        &mut self.pool
    }

    pub fn grad_pool(&self) -> GradPool {
        GradPool::zeros_like(&self.pool)
    }

    fn check_dims(&self, grid: &GridSpec) -> Result<()> {
        let dims = grid.dims();
        let div = self.config.divisor();
        if dims.iter().any(|&d| d % div != 0) {
            return Err(RefinerError::IndivisibleDims { dims, divisor: div });
        }
        Ok(())
    }

    /// Builds the 4-channel input tensor: image (normalized by the caller)
    /// then the three displacement components in mm.
    pub fn pack_input(image: &Volume, field: &DisplacementField) -> Tensor4 {
        let [d, w, h] = image.grid().dims();
        let n = d * w * h;
        let mut t = Tensor4::zeros([4, d, w, h]);
        t.channel_mut(0).copy_from_slice(image.data());
        for (i, v) in field.vectors().iter().enumerate() {
            t.channel_mut(1)[i] = v[0];
            t.channel_mut(2)[i] = v[1];
            t.channel_mut(3)[i] = v[2];
        }
        debug_assert_eq!(n, field.vectors().len());
        t
    }

    /// Runs the network; the output field is `φ_init + ε`.
    pub fn forward(
        &self,
        image: &Volume,
        phi_init: &DisplacementField,
    ) -> Result<(DisplacementField, ForwardTrace)> {
        image.grid().expect_matches(phi_init.grid(), "refiner input")?;
        self.check_dims(image.grid())?;
        let input = Self::pack_input(image, phi_init);

        let mut enc_ctx = Vec::with_capacity(self.config.levels);
        let mut enc_out: Vec<Tensor4> = Vec::with_capacity(self.config.levels);
        let mut pool_argmax = Vec::new();
        let mut pool_in_shapes = Vec::new();
        let mut cur = input.clone();
        for (level, block) in self.encoders.iter().enumerate() {
            if level > 0 {
                pool_in_shapes.push(cur.shape());
                let (pooled, argmax) = MaxPool3d.forward(&cur);
                pool_argmax.push(argmax);
                cur = pooled;
            }
            let (out, ctx) = block.forward(&self.pool, &cur);
            enc_ctx.push(ctx);
            enc_out.push(out.clone());
            cur = out;
        }

        let mut dec_tconv_in = Vec::new();
        let mut dec_ctx = Vec::new();
        for (i, (up, block)) in self.decoders.iter().enumerate() {
            dec_tconv_in.push(cur.clone());
            let mut upsampled = up.forward(&self.pool, &cur);
            // summation skip from the matching encoder level
            let skip = &enc_out[self.config.levels - 2 - i];
            for (a, b) in upsampled.data_mut().iter_mut().zip(skip.data()) {
                *a += b;
            }
            let (out, ctx) = block.forward(&self.pool, &upsampled);
            dec_ctx.push(ctx);
            cur = out;
        }

        let head_in = cur;
        let eps = self.head.forward(&self.pool, &head_in);

        let grid = phi_init.grid().clone();
        let mut vectors = Vec::with_capacity(grid.voxel_count());
        let e0 = eps.channel(0);
        let e1 = eps.channel(1);
        let e2 = eps.channel(2);
        for (i, v) in phi_init.vectors().iter().enumerate() {
            vectors.push([v[0] + e0[i], v[1] + e1[i], v[2] + e2[i]]);
        }
        let refined = DisplacementField::new(grid, vectors)?;
        Ok((
            refined,
            ForwardTrace {
                input,
                enc_ctx,
                pool_argmax,
                pool_in_shapes,
                dec_tconv_in,
                dec_ctx,
                head_in,
            },
        ))
    }

    /// Reverse pass: `d_out` is the loss gradient w.r.t. the refined field
    /// (per voxel, per component). Returns gradients for every parameter;
    /// the gradient w.r.t. `φ_init` itself is `d_out` plus the network path,
    /// but φ_init is an input, not a parameter, so it is not returned.
    pub fn backward(&self, trace: &ForwardTrace, d_out: &[[f64; 3]], grads: &mut GradPool) {
        let [_, d, w, h] = trace.input.shape();
        let n = d * w * h;
        assert_eq!(d_out.len(), n);
        // ε = head(head_in); output = φ_init + ε, so dε = d_out
        let mut d_eps = Tensor4::zeros([3, d, w, h]);
        for (i, g) in d_out.iter().enumerate() {
            d_eps.channel_mut(0)[i] = g[0];
            d_eps.channel_mut(1)[i] = g[1];
            d_eps.channel_mut(2)[i] = g[2];
        }
        let mut cur = self.head.backward(&self.pool, &trace.head_in, &d_eps, grads);

        // decoders in reverse; the summation skip routes each decoder's
        // upsampled gradient to the matching encoder output as well
        let mut skip_grads: Vec<Option<Tensor4>> = vec![None; self.config.levels];
        for (i, (up, block)) in self.decoders.iter().enumerate().rev() {
            let ctx = &trace.dec_ctx[i];
            let d_upsampled = block.backward(&self.pool, ctx, &cur, grads);
            let enc_level = self.config.levels - 2 - i;
            let d_deep = up.backward(&self.pool, &trace.dec_tconv_in[i], &d_upsampled, grads);
            skip_grads[enc_level] = Some(d_upsampled);
            cur = d_deep;
        }

        // encoders in reverse; entering each iteration, `cur` holds the
        // gradient w.r.t. this encoder's output through the downstream path
        // (decoder chain for the bottleneck, pooling chain otherwise)
        for (level, block) in self.encoders.iter().enumerate().rev() {
            let mut d_block_out = cur.clone();
            if let Some(skip) = skip_grads[level].take() {
                for (a, b) in d_block_out.data_mut().iter_mut().zip(skip.data()) {
                    *a += b;
                }
            }
            let d_block_in = block.backward(&self.pool, &trace.enc_ctx[level], &d_block_out, grads);
            if level > 0 {
                cur = MaxPool3d.backward(
                    trace.pool_in_shapes[level - 1],
                    &trace.pool_argmax[level - 1],
                    &d_block_in,
                );
            } else {
                cur = d_block_in;
            }
        }
    }
}

/// Saves a model checkpoint: JSON header with the config and named parameter
/// shapes, then `f64` little-endian blobs in header order.
pub fn save_checkpoint(model: &RefinerModel, path: impl AsRef<Path>) -> Result<()> {
    let header = shiftfield_io::CheckpointHeader {
        config: serde_json::to_value(&model.config).expect("config serializes"),
        params: model
            .params()
            .entries()
            .iter()
            .map(|e| shiftfield_io::ParamSpec {
                name: e.name.clone(),
                shape: e.shape.clone(),
            })
            .collect(),
        seed: model.seed,
        epoch: model.epoch,
    };
    let blobs: Vec<Vec<f64>> = model
        .params()
        .entries()
        .iter()
        .map(|e| e.data.clone())
        .collect();
    shiftfield_io::write_checkpoint(path, &header, &blobs)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<RefinerModel> {
    let (header, blobs) = shiftfield_io::read_checkpoint(path)?;
    let config: RefinerConfig = serde_json::from_value(header.config)
        .map_err(|e| RefinerError::BadConfig(format!("checkpoint config: {e}")))?;
    let mut model = RefinerModel::new(config)?;
    if header.params.len() != model.params().len() {
        return Err(RefinerError::ShapeMismatch(format!(
            "checkpoint has {} params, model expects {}",
            header.params.len(),
            model.params().len()
        )));
    }
    for (i, (spec, blob)) in header.params.iter().zip(blobs).enumerate() {
        let entry = &mut model.params_mut().entries_mut()[i];
        if entry.name != spec.name || entry.shape != spec.shape {
            return Err(RefinerError::ShapeMismatch(format!(
                "param {i}: checkpoint has {}{:?}, model expects {}{:?}",
                spec.name, spec.shape, entry.name, entry.shape
            )));
        }
        entry.data = blob;
    }
    model.seed = header.seed;
    model.epoch = header.epoch;
    Ok(model)
}
