//! Layered wavelet propagation model.
//!
//! Node embeddings are stacked users first, then items. Layer `ℓ` maps them
//! to `σ(A Φ diag(s ⊙ h) Φᵀ B Z W)` with `h = σ(g_t ⊙ θ)`. The fused path
//! uses `A = B = I` and `s = g_t ⊙ λ̃ ⊙ g_{−t}`; the materialized path uses
//! the sparsified `A = Ψ_t`, `B = Ψ_{−t}` and `s = λ̃`. Both are the same
//! operator up to the drop threshold.

mod checkpoint;

pub use checkpoint::{
    read_checkpoint, read_checkpoint_file, write_checkpoint, write_checkpoint_file, write_config, Checkpoint, CHECKPOINT_TAG,
};
pub(crate) use checkpoint::{read_params, write_params};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::stream;
use crate::scalar::{sigmoid, Scalar};
use crate::spectral::{
    boxcox_fit, build_wavelet_pair, AdaptiveFilter, BoxCoxResult, FilterOptions, SpectralDecomposition, WaveletPair,
};

/// Standard deviation of the initial embeddings.
pub const INIT_STD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Number of propagation layers `L`.
    pub layers: usize,
    /// Embedding width `P` of every layer.
    pub width: usize,
    /// Wavelet scale.
    pub t: f64,
    /// Regularization weight.
    pub eta: f64,
    pub seed: u64,
    pub materialize_wavelets: bool,
    pub drop_threshold: f64,
    pub filter: FilterOptions,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            width: 64,
            t: 1.0,
            eta: 1e-4,
            seed: 0,
            materialize_wavelets: false,
            drop_threshold: crate::spectral::DEFAULT_DROP_THRESHOLD,
            filter: FilterOptions::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self, num_users: usize, num_items: usize) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("layers must be at least 1".into()));
        }
        if self.width == 0 {
            return Err(Error::Config("width must be at least 1".into()));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::Config(format!("t must be finite and >= 0, got {}", self.t)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Config(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if !(self.drop_threshold.is_finite() && self.drop_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "drop_threshold must be finite and >= 0, got {}",
                self.drop_threshold
            )));
        }
        let limit = num_users.min(num_items) / 2;
        if self.width > limit {
            log::warn!(
                "width {} exceeds half the smaller side of the graph ({limit}); embeddings are over-parameterized",
                self.width
            );
        }
        Ok(())
    }

    /// Width of the concatenated embeddings, `(1 + L) P`.
    pub fn embedding_width(&self) -> usize {
        (1 + self.layers) * self.width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// `M × P` initial user embeddings.
    pub x0: Matrix<T>,
    /// `K × P` initial item embeddings.
    pub y0: Matrix<T>,
    /// One `P × P` weight per layer.
    pub w: Vec<Matrix<T>>,
    /// One length-`Q` attenuation vector per layer.
    pub theta: Vec<Vec<T>>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn layers(&self) -> usize {
        self.w.len()
    }

    pub fn width(&self) -> usize {
        self.x0.cols()
    }

    pub fn num_users(&self) -> usize {
        self.x0.rows()
    }

    pub fn num_items(&self) -> usize {
        self.y0.rows()
    }

    /// Zeros with the same shapes.
    pub fn zeros_like(&self) -> Self {
        Self {
            x0: Matrix::zeros(self.x0.rows(), self.x0.cols()),
            y0: Matrix::zeros(self.y0.rows(), self.y0.cols()),
            w: self.w.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            theta: self.theta.iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }

    /// Tensor names in [`Self::tensors`] order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["x0".to_string(), "y0".to_string()];
        names.extend((0..self.layers()).map(|l| format!("w{l}")));
        names.extend((0..self.layers()).map(|l| format!("theta{l}")));
        names
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = vec![self.x0.as_slice(), self.y0.as_slice()];
        out.extend(self.w.iter().map(Matrix::as_slice));
        out.extend(self.theta.iter().map(Vec::as_slice));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.x0.as_mut_slice(), self.y0.as_mut_slice()];
        out.extend(self.w.iter_mut().map(Matrix::as_mut_slice));
        out.extend(self.theta.iter_mut().map(Vec::as_mut_slice));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Checks every shape against the graph and spectrum sizes.
    pub fn check_shapes(&self, num_users: usize, num_items: usize, q: usize) -> Result<()> {
        let p = self.width();
        if self.x0.rows() != num_users || self.y0.rows() != num_items || self.y0.cols() != p {
            return Err(Error::Shape(format!(
                "embeddings are {:?} and {:?}, graph has {num_users} users and {num_items} items",
                self.x0.shape(),
                self.y0.shape()
            )));
        }
        if self.theta.len() != self.w.len() {
            return Err(Error::Shape(format!(
                "{} weights but {} theta vectors",
                self.w.len(),
                self.theta.len()
            )));
        }
        if let Some(w) = self.w.iter().find(|w| w.shape() != (p, p)) {
            return Err(Error::Shape(format!("layer weight is {:?}, expected {p}x{p}", w.shape())));
        }
        if let Some(t) = self.theta.iter().find(|t| t.len() != q) {
            return Err(Error::Shape(format!("theta has {} entries for {q} frequencies", t.len())));
        }
        Ok(())
    }
}

/// Gaussian `N(0, 0.01²)` embeddings, Glorot-uniform weights and unit `θ`.
/// Each tensor draws from its own stream derived from `config.seed`.
pub fn init_params<T: Scalar>(config: &ModelConfig, num_users: usize, num_items: usize, q: usize) -> ModelParams<T> {
    let p = config.width;
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let gaussian = |label: &str, rows: usize| {
        let mut rng = stream(config.seed, label);
        Matrix::from_fn(rows, p, |_, _| T::of(normal.sample(&mut rng)))
    };
    let bound = (6.0 / (p + p) as f64).sqrt();
    let w = (0..config.layers)
        .map(|l| {
            let mut rng = stream(config.seed, &format!("init/w/{l}"));
            Matrix::from_fn(p, p, |_, _| T::of(rng.random_range(-bound..bound)))
        })
        .collect();
    ModelParams {
        x0: gaussian("init/x0", num_users),
        y0: gaussian("init/y0", num_items),
        w,
        theta: vec![vec![T::one(); q]; config.layers],
    }
}

/// Which wavelet a spectral round trip passes through when materialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    /// `Ψ_t`, applied after the spectral diagonal.
    Left,
    /// `Ψ_{−t}`, applied before it.
    Right,
}

/// Spectral quantities shared by every layer for one scale `t`.
#[derive(Clone, Debug)]
pub struct SpectralContext<T> {
    pub decomp: SpectralDecomposition<T>,
    pub boxcox: BoxCoxResult<T>,
    pub filter: AdaptiveFilter<T>,
    /// Present when the model runs on materialized wavelets.
    pub wavelets: Option<WaveletPair<T>>,
    /// Digest of the spectral cache key, recorded in checkpoints.
    pub key_digest: String,
    scale: Vec<T>,
    phi_t: Matrix<T>,
}

impl<T: Scalar> SpectralContext<T> {
    pub fn new(decomp: SpectralDecomposition<T>, key_digest: impl Into<String>, config: &ModelConfig) -> Result<Self> {
        let boxcox = boxcox_fit(&decomp.shifted)?;
        let filter = AdaptiveFilter::new(&decomp, &boxcox, T::of(config.t), config.filter)?;
        let (wavelets, scale) = if config.materialize_wavelets {
            let pair = build_wavelet_pair(&decomp, &filter, T::of(config.drop_threshold))?;
            (Some(pair), decomp.shifted.clone())
        } else {
            let scale = filter
                .response
                .iter()
                .zip(&decomp.shifted)
                .zip(&filter.inverse_response)
                .map(|((&g, &l), &gi)| g * l * gi)
                .collect();
            (None, scale)
        };
        let phi_t = decomp.phi.transpose();
        Ok(Self {
            decomp,
            boxcox,
            filter,
            wavelets,
            key_digest: key_digest.into(),
            scale,
            phi_t,
        })
    }

    /// Same decomposition under another model configuration (scale, filter
    /// options or materialization).
    pub fn reconfigured(&self, config: &ModelConfig) -> Result<Self> {
        Self::new(self.decomp.clone(), self.key_digest.clone(), config)
    }

    pub fn n(&self) -> usize {
        self.decomp.n()
    }

    pub fn q(&self) -> usize {
        self.decomp.q()
    }

    /// Per-frequency factor multiplying `h`.
    pub fn scale(&self) -> &[T] {
        &self.scale
    }

    /// `h = σ(g_t ⊙ θ)`.
    pub fn attenuation(&self, theta: &[T]) -> Vec<T> {
        self.filter
            .response
            .iter()
            .zip(theta)
            .map(|(&g, &th)| sigmoid(g * th))
            .collect()
    }

    /// `Φᵀ x`, preceded by the side's wavelet when materialized.
    pub(crate) fn analyze(&self, x: &Matrix<T>, side: Side) -> Result<Matrix<T>> {
        match &self.wavelets {
            Some(pair) => self.phi_t.matmul(&self.wavelet(pair, side).mul_dense(x)?),
            None => self.phi_t.matmul(x),
        }
    }

    /// `Φ c`, followed by the side's wavelet when materialized.
    pub(crate) fn synthesize(&self, c: &Matrix<T>, side: Side) -> Result<Matrix<T>> {
        let x = self.decomp.phi.matmul(c)?;
        match &self.wavelets {
            Some(pair) => self.wavelet(pair, side).mul_dense(&x),
            None => Ok(x),
        }
    }

    fn wavelet<'a>(&self, pair: &'a WaveletPair<T>, side: Side) -> &'a crate::graph::SparseSymMatrix<T> {
        match side {
            Side::Left => &pair.psi,
            Side::Right => &pair.psi_inv,
        }
    }
}

/// Intermediates of one layer kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace<T> {
    /// `Z W`.
    pub zw: Matrix<T>,
    /// Spectral coefficients `Φᵀ B Z W` (`Q × P`).
    pub coeff: Matrix<T>,
    /// `σ(g_t ⊙ θ)`.
    pub h: Vec<T>,
    pub pre: Matrix<T>,
    /// `σ(pre)`, the next layer's input.
    pub output: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<T> {
    /// Stacked `[X0; Y0]`.
    pub input: Matrix<T>,
    pub layers: Vec<LayerTrace<T>>,
    /// `M × (1+L)P` concatenated user embeddings.
    pub users: Matrix<T>,
    /// `K × (1+L)P` concatenated item embeddings.
    pub items: Matrix<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Predicted preference `x_u · y_i`.
    pub fn score(&self, u: usize, i: usize) -> T {
        dot(self.users.row(u), self.items.row(i))
    }

    /// Scores of user `u` for every item.
    pub fn score_user(&self, u: usize) -> Vec<T> {
        let x = self.users.row(u);
        (0..self.items.rows()).map(|i| dot(x, self.items.row(i))).collect()
    }

    /// Activations of layer `l` (0 is the input).
    pub fn activation(&self, l: usize) -> &Matrix<T> {
        if l == 0 {
            &self.input
        } else {
            &self.layers[l - 1].output
        }
    }
}

/// One propagation step from `z` through layer `layer`.
pub fn propagate_layer<T: Scalar>(
    z: &Matrix<T>,
    layer: usize,
    params: &ModelParams<T>,
    ctx: &SpectralContext<T>,
) -> Result<LayerTrace<T>> {
    let w = params
        .w
        .get(layer)
        .ok_or_else(|| Error::Shape(format!("layer {layer} of {}", params.layers())))?;
    if z.rows() != ctx.n() || z.cols() != w.rows() {
        return Err(Error::Shape(format!(
            "layer input {:?} for {} nodes and width {}",
            z.shape(),
            ctx.n(),
            w.rows()
        )));
    }
    let theta = &params.theta[layer];
    if theta.len() != ctx.q() {
        return Err(Error::Shape(format!(
            "theta has {} entries for {} frequencies",
            theta.len(),
            ctx.q()
        )));
    }
    let h = ctx.attenuation(theta);
    let zw = z.matmul(w)?;
    let coeff = ctx.analyze(&zw, Side::Right)?;
    let diag: Vec<T> = ctx.scale().iter().zip(&h).map(|(&s, &h)| s * h).collect();
    let mut scaled = coeff.clone();
    scaled.scale_rows(&diag);
    let pre = ctx.synthesize(&scaled, Side::Left)?;
    let output = pre.map(sigmoid);
    Ok(LayerTrace {
        zw,
        coeff,
        h,
        pre,
        output,
    })
}

/// Runs every layer from `[X0; Y0]` and concatenates all activations.
pub fn forward<T: Scalar>(params: &ModelParams<T>, ctx: &SpectralContext<T>) -> Result<ForwardTrace<T>> {
    params.check_shapes(params.num_users(), ctx.n() - params.num_users(), ctx.q())?;
    let input = Matrix::vstack(&params.x0, &params.y0)?;
    let mut layers: Vec<LayerTrace<T>> = Vec::with_capacity(params.layers());
    for l in 0..params.layers() {
        let z = layers.last().map_or(&input, |t| &t.output);
        let next = propagate_layer(z, l, params, ctx)?;
        layers.push(next);
    }
    let blocks: Vec<&Matrix<T>> = std::iter::once(&input).chain(layers.iter().map(|t| &t.output)).collect();
    let all = Matrix::hconcat(&blocks)?;
    let m = params.num_users();
    Ok(ForwardTrace {
        users: all.row_block(0, m),
        items: all.row_block(m, all.rows()),
        input,
        layers,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::{laplacian_of, IsolatedNodes};
    use crate::ingest::InteractionSet;
    use crate::spectral::{eigensolve, spectral_operator, LanczosOptions};

    pub(crate) fn small_context(materialize: bool) -> (ModelConfig, SpectralContext<f64>) {
        let data = InteractionSet::from_index_pairs(
            4,
            5,
            vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 3), (2, 0), (3, 4), (3, 2), (0, 4)],
        )
        .unwrap();
        let lap = laplacian_of::<f64>(&data, IsolatedNodes::Error).unwrap();
        let decomp = eigensolve(&lap, 9, &LanczosOptions::default()).unwrap();
        let config = ModelConfig {
            layers: 2,
            width: 3,
            t: 0.6,
            materialize_wavelets: materialize,
            drop_threshold: 0.0,
            ..ModelConfig::default()
        };
        let ctx = SpectralContext::new(decomp, "k", &config).unwrap();
        (config, ctx)
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = ModelConfig {
            width: 8,
            ..ModelConfig::default()
        };
        let a = init_params::<f64>(&cfg, 10, 12, 5);
        assert_eq!(a, init_params::<f64>(&cfg, 10, 12, 5));
        let bound = (6.0f64 / 16.0).sqrt();
        assert!(a.w.iter().all(|w| w.max_abs() <= bound));
        assert!(a.theta.iter().all(|t| t.iter().all(|&v| v == 1.0)));
        assert_eq!(a.w.len(), 3);
        assert_ne!(a.x0.as_slice(), a.y0.row_block(0, 10).as_slice());
    }

    #[test]
    fn init_mean_within_standard_error() {
        let cfg = ModelConfig {
            width: 64,
            layers: 1,
            ..ModelConfig::default()
        };
        let p = init_params::<f64>(&cfg, 15_625, 1, 1);
        let n = p.x0.as_slice().len() as f64;
        let mean = p.x0.as_slice().iter().sum::<f64>() / n;
        assert!(mean.abs() <= 3.0 * 0.01 / 1e3, "{mean}");
        let var = p.x0.as_slice().iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var.sqrt() - INIT_STD).abs() < 1e-4);
    }

    #[test]
    fn two_node_layer_matches_dense_composition() {
        let data = InteractionSet::from_index_pairs(1, 1, vec![(0, 0)]).unwrap();
        let lap = laplacian_of::<f64>(&data, IsolatedNodes::Error).unwrap();
        let decomp = eigensolve(&lap, 2, &LanczosOptions::default()).unwrap();
        let cfg = ModelConfig {
            layers: 1,
            width: 1,
            t: 0.5,
            ..ModelConfig::default()
        };
        let ctx = SpectralContext::new(decomp.clone(), "k", &cfg).unwrap();
        let params = ModelParams {
            x0: Matrix::from_vec(1, 1, vec![0.3]).unwrap(),
            y0: Matrix::from_vec(1, 1, vec![-0.7]).unwrap(),
            w: vec![Matrix::from_vec(1, 1, vec![1.5]).unwrap()],
            theta: vec![vec![0.4, -2.0]],
        };
        let z = Matrix::vstack(&params.x0, &params.y0).unwrap();
        let got = propagate_layer(&z, 0, &params, &ctx).unwrap();

        let f = &ctx.filter;
        let psi = spectral_operator(&decomp, &f.response).unwrap();
        let psi_inv = spectral_operator(&decomp, &f.inverse_response).unwrap();
        let h: Vec<f64> = f
            .response
            .iter()
            .zip(&params.theta[0])
            .map(|(g, t)| 1.0 / (1.0 + (-g * t).exp()))
            .collect();
        let mid = spectral_operator(
            &decomp,
            &decomp.shifted.iter().zip(&h).map(|(l, h)| l * h).collect::<Vec<_>>(),
        )
        .unwrap();
        let dense = psi
            .matmul(&mid)
            .unwrap()
            .matmul(&psi_inv)
            .unwrap()
            .matmul(&z)
            .unwrap()
            .matmul(&params.w[0])
            .unwrap();
        let expect = dense.map(|v| 1.0 / (1.0 + (-v).exp()));
        assert!(got.output.max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn saturated_theta_gives_one_half() {
        let (cfg, ctx) = small_context(false);
        let mut p = init_params::<f64>(&cfg, 4, 5, ctx.q());
        for t in &mut p.theta {
            t.iter_mut().for_each(|v| *v = -1e6);
        }
        let trace = forward(&p, &ctx).unwrap();
        for l in &trace.layers {
            assert!(l.output.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn forward_shapes_range_and_scoring() {
        let (cfg, ctx) = small_context(false);
        let p = init_params::<f64>(&cfg, 4, 5, ctx.q());
        let trace = forward(&p, &ctx).unwrap();
        assert_eq!(trace.users.shape(), (4, cfg.embedding_width()));
        assert_eq!(trace.items.shape(), (5, cfg.embedding_width()));
        for l in &trace.layers {
            assert!(l.output.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        }
        for u in 0..4 {
            let row = trace.score_user(u);
            for (i, &s) in row.iter().enumerate() {
                assert!((s - trace.score(u, i)).abs() <= 1e-12);
            }
        }
        assert_eq!(trace, forward(&p, &ctx).unwrap());
    }

    #[test]
    fn zero_layers_concatenate_inputs() {
        let (_, ctx) = small_context(false);
        let p = ModelParams {
            x0: Matrix::from_fn(4, 2, |i, j| (i + j) as f64),
            y0: Matrix::from_fn(5, 2, |i, j| (i * j) as f64),
            w: vec![],
            theta: vec![],
        };
        let trace = forward(&p, &ctx).unwrap();
        assert_eq!(trace.users, p.x0);
        assert_eq!(trace.items, p.y0);
    }

    #[test]
    fn materialized_matches_fused_on_full_spectrum() {
        let (cfg, fused) = small_context(false);
        let (_, mat) = small_context(true);
        let p = init_params::<f64>(&cfg, 4, 5, fused.q());
        let a = forward(&p, &fused).unwrap();
        let b = forward(&p, &mat).unwrap();
        assert!(a.users.max_abs_diff(&b.users) < 1e-8);
        assert!(a.items.max_abs_diff(&b.items) < 1e-8);
    }

    #[test]
    fn config_validation() {
        let ok = ModelConfig::default();
        assert!(ok.validate(1000, 1000).is_ok());
        for bad in [
            ModelConfig { layers: 0, ..ok.clone() },
            ModelConfig { width: 0, ..ok.clone() },
            ModelConfig { t: -1.0, ..ok.clone() },
            ModelConfig {
                eta: f64::NAN,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate(1000, 1000).unwrap_err().is_config());
        }
        assert_eq!(ok.embedding_width(), 256);
    }
}
