//! The adversarially trained encoder/decoder pair, its two critics, the
//! training objectives and the training loop.

mod bundle;
mod networks;
mod objectives;
mod train;

use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Real;

pub use bundle::{ModelBundle, TrainingLog, TrainingRecord};
pub use networks::{ConvCritic, CriticCache, Decoder, DecoderCache, Encoder, EncoderCache};
pub use objectives::{
    cycle_loss, full_objective, gradient_penalty, interpolate, wasserstein_objective_x,
    wasserstein_objective_z, CriticFn, DecoderFn, EncoderFn,
};
pub use train::{train, train_with_observer, CriticStats, TrainConfig, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentConfig {
    pub latent_dim: usize,
}

impl Default for LatentConfig {
    fn default() -> Self {
        LatentConfig { latent_dim: 20 }
    }
}

impl LatentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be at least 1".into()));
        }
        Ok(())
    }
}

/// Layer sizes of the four networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub critic_filters: usize,
    pub critic_kernel: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            encoder_hidden: 100,
            decoder_hidden: 64,
            critic_filters: 64,
            critic_kernel: 5,
            dropout: 0.2,
            leaky_slope: 0.2,
        }
    }
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("critic_filters", self.critic_filters),
            ("critic_kernel", self.critic_kernel),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config("leaky_slope must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// The four networks: encoder `E`, decoder `G`, critics `C_x` and `C_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks<T> {
    pub encoder: Encoder<T>,
    pub decoder: Decoder<T>,
    pub critic_x: ConvCritic<T>,
    pub critic_z: ConvCritic<T>,
}

impl<T: Real> Networks<T> {
    pub fn new(spec: &NetworkSpec, window: usize, channels: usize, latent: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Networks {
            encoder: Encoder::new(spec, window, channels, latent, &mut rng),
            decoder: Decoder::new(spec, window, channels, latent, &mut rng),
            critic_x: ConvCritic::new(spec, window, channels, &mut rng),
            critic_z: ConvCritic::new(spec, latent, 1, &mut rng),
        }
    }

    pub fn window(&self) -> usize {
        self.encoder.window()
    }

    pub fn channels(&self) -> usize {
        self.encoder.channels()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.latent_dim()
    }
}

/// `n x k` matrix of i.i.d. standard normal draws.
pub fn sample_latent<T: Real>(n: usize, cfg: &LatentConfig, seed: u64) -> Array2<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_latent_with(n, cfg.latent_dim, &mut rng)
}

pub(crate) fn sample_latent_with<T: Real>(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    Array2::from_shape_simple_fn((n, k), || {
        let v: f64 = StandardNormal.sample(rng);
        T::of(v)
    })
}

fn check_window<T: Real>(nets: &Networks<T>, window: &ArrayView2<'_, T>) -> Result<()> {
    let (t, m) = window.dim();
    if t == 0 || m == 0 {
        return Err(Error::Contract("empty window".into()));
    }
    if t != nets.window() || m != nets.channels() {
        return Err(Error::Contract(format!(
            "window shape {t}x{m}, model expects {}x{}",
            nets.window(),
            nets.channels()
        )));
    }
    Ok(())
}

/// Latent code of one `t x M` window (inference mode).
pub fn encode<T: Real>(nets: &Networks<T>, window: ArrayView2<'_, T>) -> Result<ndarray::Array1<T>> {
    check_window(nets, &window)?;
    let (z, _) = nets.encoder.forward(window.insert_axis(Axis(0)));
    Ok(z.index_axis_move(Axis(0), 0))
}

/// Window generated from one latent vector (dropout disabled).
pub fn decode<T: Real>(nets: &Networks<T>, z: ndarray::ArrayView1<'_, T>) -> Result<Array2<T>> {
    if z.len() != nets.latent_dim() {
        return Err(Error::Contract(format!(
            "latent length {}, model expects {}",
            z.len(),
            nets.latent_dim()
        )));
    }
    let (x, _) = nets.decoder.forward(z.insert_axis(Axis(0)), None);
    Ok(x.index_axis_move(Axis(0), 0))
}

/// `decode(encode(window))`.
pub fn reconstruct<T: Real>(nets: &Networks<T>, window: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let z = encode(nets, window)?;
    decode(nets, z.view())
}

/// Batched inference over `(n, t, M)`: reconstructions and `C_x` scores of the
/// inputs, processed in chunks to bound memory.
pub fn reconstruct_and_critique<T: Real>(
    nets: &Networks<T>,
    windows: ArrayView3<'_, T>,
    chunk: usize,
) -> Result<(Array3<T>, ndarray::Array1<T>)> {
    let (n, t, m) = windows.dim();
    if n == 0 || t != nets.window() || m != nets.channels() {
        return Err(Error::Contract(format!(
            "window batch {n}x{t}x{m} does not match model {}x{}",
            nets.window(),
            nets.channels()
        )));
    }
    let chunk = chunk.max(1);
    let mut recon = Array3::<T>::zeros((n, t, m));
    let mut critic = ndarray::Array1::<T>::zeros(n);
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let x = windows.slice(s![start..end, .., ..]);
        let (z, _) = nets.encoder.forward(x);
        let (xh, _) = nets.decoder.forward(z.view(), None);
        recon.slice_mut(s![start..end, .., ..]).assign(&xh);
        let (c, _) = nets.critic_x.forward(x);
        critic.slice_mut(s![start..end]).assign(&c);
        start = end;
    }
    Ok((recon, critic))
}
