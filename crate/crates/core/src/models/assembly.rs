use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ArchConfig, LengthscaleInit, ModelKind};
use super::gp::GpHead;
use crate::error::{Error, Result};
use crate::linalg::{distances_for_pairs, sample_pairs, truncated_svd, Matrix, SvdBasis};
use crate::nn::{
    BlockCache, BlockDropout, Dense, FrozenProjection, Linear, Mode, Param, ResidualBlock, RffCache, RffLayer,
    SpectralDense, QUANTILES,
};
use crate::rng::{rng_for, stream};
use crate::signal::ScalerStats;
use crate::simgen::{Dataset, Split};
use crate::LABELS;

/// Oversampling used for the SVD feature extractor.
pub const SVD_OVERSAMPLE: usize = 8;

/// Point in the network at which latent codes are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Output of the feature-extraction layer.
    Extractor,
    /// Output of the residual stack (the RFF input).
    Latent,
}

/// A complete model: feature extractor, residual stack, RFF layer, output
/// head, and the GP head or dropout logit where the kind has one.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAssembly {
    pub kind: ModelKind,
    pub arch: ArchConfig,
    pub seed: u64,
    pub scaler: ScalerStats,
    pub extractor: Linear,
    pub blocks: Vec<ResidualBlock>,
    pub rff: RffLayer,
    pub head: Dense,
    pub gp: Option<GpHead>,
    /// Shared concrete-dropout logit (BNN only).
    pub dropout_logit: Option<Param>,
}

/// Intermediate values of one pass through the blocks, RFF layer and head.
#[derive(Debug, Clone, PartialEq)]
pub struct TrunkCache {
    blocks: Vec<BlockCache>,
    rff: RffCache,
    pub phi: Matrix,
}

/// Named flat tensor used by checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Non-tensor description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub arch: ArchConfig,
    pub seed: u64,
    pub input_dim: usize,
    pub scaler: ScalerStats,
}

fn output_width(kind: ModelKind) -> usize {
    if kind == ModelKind::Dqr {
        QUANTILES.len() * LABELS
    } else {
        LABELS
    }
}

fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// Layers in their initial state; the extractor is supplied by the caller.
fn skeleton(
    kind: ModelKind,
    arch: &ArchConfig,
    seed: u64,
    scaler: ScalerStats,
    extractor: impl FnOnce(&mut crate::rng::Rng) -> Linear,
) -> Result<ModelAssembly> {
    arch.validate()?;
    let mut rng = rng_for(seed, stream::INIT);
    let extractor = extractor(&mut rng);
    if extractor.out_dim() != arch.latent_dim {
        return Err(Error::DimensionMismatch {
            op: "build_model",
            left: (extractor.in_dim(), extractor.out_dim()),
            right: (extractor.in_dim(), arch.latent_dim),
        });
    }
    let w = arch.latent_dim;
    let blocks = (0..arch.residual_blocks)
        .map(|_| {
            let dense = Dense::he(w, w, true, &mut rng);
            let linear = if kind.is_gp() {
                Linear::Spectral(SpectralDense::new(dense, arch.resnet_sn, &mut rng))
            } else {
                Linear::Plain(dense)
            };
            let dropout = if kind == ModelKind::Bnn {
                BlockDropout::Concrete
            } else {
                BlockDropout::Fixed(arch.dropout_rate)
            };
            ResidualBlock::new(linear, dropout)
        })
        .collect::<Result<Vec<_>>>()?;
    let initial = match arch.lengthscale_init {
        LengthscaleInit::Fixed(l) => l,
        LengthscaleInit::Median(_) => 1.0,
    };
    let rff = RffLayer::new(w, arch.rff_features, initial, &mut rng);
    let head = Dense::glorot(arch.rff_features, output_width(kind), !kind.is_gp(), &mut rng);
    let gp = if kind.is_gp() {
        Some(GpHead::new(arch.rff_features, arch.noise_init)?)
    } else {
        None
    };
    let dropout_logit = (kind == ModelKind::Bnn).then(|| Param::scalar(logit(arch.dropout_rate.max(1e-6))));
    Ok(ModelAssembly {
        kind,
        arch: arch.clone(),
        seed,
        scaler,
        extractor,
        blocks,
        rff,
        head,
        gp,
        dropout_logit,
    })
}

/// Builds an initialised model for `dataset`. For SVD-DNGPA `basis` must be
/// the rank-`latent_dim` SVD of the standardised training features; when
/// `None` it is computed here.
pub fn build_model(
    kind: ModelKind,
    arch: &ArchConfig,
    dataset: &Dataset,
    seed: u64,
    basis: Option<&SvdBasis>,
) -> Result<ModelAssembly> {
    let x = dataset.features(Split::Train);
    build_model_for(kind, arch, dataset.scaler.clone(), &x, seed, basis)
}

/// [`build_model`] on an explicit standardised training matrix.
pub fn build_model_for(
    kind: ModelKind,
    arch: &ArchConfig,
    scaler: ScalerStats,
    x_train: &Matrix,
    seed: u64,
    basis: Option<&SvdBasis>,
) -> Result<ModelAssembly> {
    let d = x_train.cols();
    if d != scaler.width() {
        return Err(Error::DimensionMismatch {
            op: "build_model",
            left: x_train.shape(),
            right: (scaler.width(), 0),
        });
    }
    let owned;
    let basis = match (kind, basis) {
        (ModelKind::SvdDngpa, Some(b)) => Some(b),
        (ModelKind::SvdDngpa, None) => {
            owned = truncated_svd(x_train, arch.latent_dim, SVD_OVERSAMPLE)?;
            Some(&owned)
        }
        _ => None,
    };
    let latent = arch.latent_dim;
    let input_sn = arch.input_sn;
    let mut model = skeleton(kind, arch, seed, scaler, |rng| match kind {
        ModelKind::SvdDngpa => Linear::Frozen(FrozenProjection {
            w: basis.expect("basis for svd kind").weights.clone(),
        }),
        ModelKind::Dngpa => Linear::Spectral(SpectralDense::new(Dense::glorot(d, latent, true, rng), input_sn, rng)),
        ModelKind::Bnn | ModelKind::Dqr => Linear::Plain(Dense::glorot(d, latent, true, rng)),
    })?;
    if model.extractor.in_dim() != d {
        return Err(Error::DimensionMismatch {
            op: "build_model",
            left: (model.extractor.in_dim(), latent),
            right: (d, latent),
        });
    }
    if let LengthscaleInit::Median(scale) = arch.lengthscale_init {
        let rows: Vec<usize> = (0..x_train.rows().min(arch.median_rows)).collect();
        let h = model.latent(&x_train.select_rows(&rows), Stage::Latent)?;
        model.rff.set_lengthscale(scale * median_distance(&h));
    }
    if model.gp.is_some() {
        model.refresh_gp(x_train)?;
    }
    Ok(model)
}

/// Median pairwise Euclidean distance between rows (1 if degenerate).
pub fn median_distance(h: &Matrix) -> f64 {
    if h.rows() < 2 {
        return 1.0;
    }
    let pairs = sample_pairs(h.rows(), 1.0, 0).expect("full pair set");
    let mut d = distances_for_pairs(h, &pairs);
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if med > 0.0 && med.is_finite() {
        med
    } else {
        1.0
    }
}

impl ModelAssembly {
    pub fn input_dim(&self) -> usize {
        self.extractor.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head.out_dim()
    }

    pub fn dropout_rate(&self) -> Option<f64> {
        self.dropout_logit.as_ref().map(|l| crate::nn::sigmoid(l.get()))
    }

    pub fn extractor_is_frozen(&self) -> bool {
        matches!(self.extractor, Linear::Frozen(_))
    }

    /// Feature-extraction layer output.
    pub fn extract(&self, x: &Matrix) -> Result<Matrix> {
        self.extractor.forward(x)
    }

    /// Blocks, RFF layer and head on extractor output `z`.
    pub fn trunk_forward<R: Rng + ?Sized>(&self, z: &Matrix, mode: Mode, rng: &mut R) -> Result<(Matrix, TrunkCache)> {
        let logit = self.dropout_logit.as_ref().map_or(0.0, Param::get);
        let mut h = z.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (next, c) = b.forward(&h, mode, logit, rng)?;
            caches.push(c);
            h = next;
        }
        let (phi, rff) = self.rff.forward(&h)?;
        let out = self.head.forward(&phi)?;
        Ok((out, TrunkCache { blocks: caches, rff, phi }))
    }

    /// Back-propagates `dout` (and an optional extra gradient on the RFF
    /// features) to the extractor output, accumulating parameter gradients.
    pub fn trunk_backward(&mut self, cache: &TrunkCache, dout: &Matrix, dphi_extra: Option<&Matrix>) -> Matrix {
        let mut dphi = self.head.backward(&cache.phi, dout, true).expect("dx requested");
        if let Some(extra) = dphi_extra {
            dphi.as_mut_slice().iter_mut().zip(extra.as_slice()).for_each(|(a, b)| *a += b);
        }
        let mut dh = self.rff.backward(&cache.rff, &dphi);
        let mut dlogit = 0.0;
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            dh = b.backward(c, &dh, &mut dlogit);
        }
        if let Some(l) = &mut self.dropout_logit {
            l.grad.as_mut_slice()[0] += dlogit;
        }
        dh
    }

    /// Deterministic latent codes at `stage`.
    pub fn latent(&self, x: &Matrix, stage: Stage) -> Result<Matrix> {
        let mut h = self.extract(x)?;
        if stage == Stage::Latent {
            let mut unused = rng_for(self.seed, stream::PREDICT);
            for b in &self.blocks {
                h = b.forward(&h, Mode::Eval, 0.0, &mut unused)?.0;
            }
        }
        Ok(h)
    }

    /// Deterministic RFF features.
    pub fn rff_features(&self, x: &Matrix) -> Result<Matrix> {
        let h = self.latent(x, Stage::Latent)?;
        Ok(self.rff.forward(&h)?.0)
    }

    /// Rebuilds the GP precision from the training set under current weights.
    pub fn refresh_gp(&mut self, x_train: &Matrix) -> Result<()> {
        let z = self.extract(x_train)?;
        self.refresh_gp_from_extracted(&z)
    }

    /// As [`ModelAssembly::refresh_gp`] on precomputed extractor output.
    pub fn refresh_gp_from_extracted(&mut self, z: &Matrix) -> Result<()> {
        if self.gp.is_none() {
            return Ok(());
        }
        let mut unused = rng_for(self.seed, stream::PREDICT);
        let (_, cache) = self.trunk_forward(z, Mode::Eval, &mut unused)?;
        self.gp.as_mut().expect("gp head").refresh(&cache.phi)
    }

    /// Every trainable parameter in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.extractor.params_mut();
        for b in &mut self.blocks {
            out.extend(b.linear.params_mut());
        }
        out.push(&mut self.rff.rho);
        out.extend(self.head.params_mut());
        if let Some(gp) = &mut self.gp {
            out.push(&mut gp.noise_raw);
        }
        if let Some(l) = &mut self.dropout_logit {
            out.push(l);
        }
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    /// Advances every spectral layer's power iteration.
    pub fn power_step(&mut self, iters: usize) {
        self.extractor.power_step(iters);
        for b in &mut self.blocks {
            b.linear.power_step(iters);
        }
    }

    pub fn meta(&self) -> ModelMeta {
        ModelMeta {
            kind: self.kind,
            arch: self.arch.clone(),
            seed: self.seed,
            input_dim: self.input_dim(),
            scaler: self.scaler.clone(),
        }
    }

    /// Every numeric array of the model, in a fixed order.
    pub fn export_tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        let mut push = |name: &str, rows: usize, cols: usize, data: &[f64]| {
            out.push(Tensor { name: name.to_string(), rows, cols, data: data.to_vec() })
        };
        let linear = |prefix: &str, l: &Linear, push: &mut TensorSink<'_>| match l {
            Linear::Frozen(f) => push(&alloc::format!("{prefix}.projection"), f.w.rows(), f.w.cols(), f.w.as_slice()),
            Linear::Plain(d) => dense(prefix, d, push),
            Linear::Spectral(s) => {
                dense(prefix, &s.dense, push);
                let (u, v) = (&s.power.u, &s.power.v);
                push(&alloc::format!("{prefix}.power_u"), 1, u.len(), u);
                push(&alloc::format!("{prefix}.power_v"), 1, v.len(), v);
            }
        };
        linear("extractor", &self.extractor, &mut push);
        for (i, b) in self.blocks.iter().enumerate() {
            linear(&alloc::format!("block{i}"), &b.linear, &mut push);
        }
        let r = &self.rff;
        push("rff.w", r.w.rows(), r.w.cols(), r.w.as_slice());
        push("rff.b", 1, r.b.len(), &r.b);
        push("rff.rho", 1, 1, r.rho.value.as_slice());
        dense("head", &self.head, &mut push);
        if let Some(gp) = &self.gp {
            push("gp.noise_raw", 1, 1, gp.noise_raw.value.as_slice());
            let p = gp.precision();
            push("gp.precision", p.rows(), p.cols(), p.as_slice());
        }
        if let Some(l) = &self.dropout_logit {
            push("dropout.logit", 1, 1, l.value.as_slice());
        }
        out
    }

    /// Rebuilds a model from [`ModelAssembly::meta`] and
    /// [`ModelAssembly::export_tensors`] output. Names, order and shapes must
    /// match exactly.
    pub fn import(meta: &ModelMeta, tensors: &[Tensor]) -> Result<Self> {
        let d = meta.input_dim;
        let (latent, sn) = (meta.arch.latent_dim, meta.arch.input_sn);
        let mut model = skeleton(meta.kind, &meta.arch, meta.seed, meta.scaler.clone(), |rng| match meta.kind {
            ModelKind::SvdDngpa => Linear::Frozen(FrozenProjection { w: Matrix::zeros(d, latent) }),
            ModelKind::Dngpa => Linear::Spectral(SpectralDense::new(Dense::new(Matrix::zeros(d, latent), true), sn, rng)),
            _ => Linear::Plain(Dense::new(Matrix::zeros(d, latent), true)),
        })?;
        let expected = model.export_tensors();
        if expected.len() != tensors.len() {
            return Err(Error::StateMismatch(alloc::format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (e, t) in expected.iter().zip(tensors) {
            if e.name != t.name || e.rows != t.rows || e.cols != t.cols || t.data.len() != t.rows * t.cols {
                return Err(Error::StateMismatch(alloc::format!(
                    "tensor {} {}x{} does not match expected {} {}x{}",
                    t.name,
                    t.rows,
                    t.cols,
                    e.name,
                    e.rows,
                    e.cols
                )));
            }
        }
        let mut data = tensors.iter().map(|t| t.data.clone());
        let mut take = || data.next().expect("count checked");
        let load_linear = |l: &mut Linear, take: &mut dyn FnMut() -> Vec<f64>| match l {
            Linear::Frozen(f) => f.w.as_mut_slice().copy_from_slice(&take()),
            Linear::Plain(d) => load_dense(d, take),
            Linear::Spectral(s) => {
                load_dense(&mut s.dense, take);
                s.power.u = take();
                s.power.v = take();
            }
        };
        load_linear(&mut model.extractor, &mut take);
        for b in &mut model.blocks {
            load_linear(&mut b.linear, &mut take);
        }
        model.rff.w.as_mut_slice().copy_from_slice(&take());
        model.rff.b = take();
        model.rff.rho.value.as_mut_slice().copy_from_slice(&take());
        load_dense(&mut model.head, &mut take);
        if model.gp.is_some() {
            let noise_raw = take()[0];
            let f = model.arch.rff_features;
            let precision = Matrix::from_vec(f, f, take())?;
            model.gp = Some(GpHead::from_precision(noise_raw, precision)?);
        }
        if let Some(l) = &mut model.dropout_logit {
            l.value.as_mut_slice().copy_from_slice(&take());
        }
        Ok(model)
    }
}

/// Receives `(name, rows, cols, values)` for each exported tensor.
type TensorSink<'a> = dyn FnMut(&str, usize, usize, &[f64]) + 'a;

fn dense(prefix: &str, d: &Dense, push: &mut TensorSink<'_>) {
    push(&alloc::format!("{prefix}.w"), d.w.value.rows(), d.w.value.cols(), d.w.value.as_slice());
    if let Some(b) = &d.b {
        push(&alloc::format!("{prefix}.b"), 1, b.value.cols(), b.value.as_slice());
    }
}

fn load_dense(d: &mut Dense, take: &mut dyn FnMut() -> Vec<f64>) {
    d.w.value.as_mut_slice().copy_from_slice(&take());
    if let Some(b) = &mut d.b {
        b.value.as_mut_slice().copy_from_slice(&take());
    }
}
