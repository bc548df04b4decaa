use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Real;

use super::{ConvCritic, Decoder, Encoder};

/// Scalar realness score per sample of a `(batch, length, channels)` batch.
pub trait CriticFn<T: Real> {
    fn scores(&self, x: ArrayView3<'_, T>) -> Array1<T>;
    fn input_gradients(&self, x: ArrayView3<'_, T>) -> Array3<T>;
}

pub trait EncoderFn<T: Real> {
    fn encode_batch(&self, x: ArrayView3<'_, T>) -> Array2<T>;
}

pub trait DecoderFn<T: Real> {
    fn decode_batch(&self, z: ArrayView2<'_, T>) -> Array3<T>;
}

impl<T: Real> CriticFn<T> for ConvCritic<T> {
    fn scores(&self, x: ArrayView3<'_, T>) -> Array1<T> {
        self.forward(x).0
    }

    fn input_gradients(&self, x: ArrayView3<'_, T>) -> Array3<T> {
        ConvCritic::input_gradients(self, x)
    }
}

impl<T: Real> EncoderFn<T> for Encoder<T> {
    fn encode_batch(&self, x: ArrayView3<'_, T>) -> Array2<T> {
        self.forward(x).0
    }
}

impl<T: Real> DecoderFn<T> for Decoder<T> {
    fn decode_batch(&self, z: ArrayView2<'_, T>) -> Array3<T> {
        self.forward(z, None).0
    }
}

fn latent_as_sequence<T: Real>(z: ArrayView2<'_, T>) -> ArrayView3<'_, T> {
    z.insert_axis(Axis(2))
}

fn mean<T: Real>(v: &Array1<T>) -> T {
    v.sum() / T::of(v.len() as f64)
}

fn same_batch(a: usize, b: usize) -> Result<()> {
    if a == 0 || a != b {
        return Err(Error::Contract(format!("batch sizes {a} and {b} must match and be non-zero")));
    }
    Ok(())
}

/// `mean C_x(x) - mean C_x(G(z))`.
pub fn wasserstein_objective_x<T: Real>(
    critic_x: &impl CriticFn<T>,
    decoder: &impl DecoderFn<T>,
    real: ArrayView3<'_, T>,
    z: ArrayView2<'_, T>,
) -> Result<T> {
    same_batch(real.len_of(Axis(0)), z.nrows())?;
    let fake = decoder.decode_batch(z);
    Ok(mean(&critic_x.scores(real)) - mean(&critic_x.scores(fake.view())))
}

/// `mean C_z(z) - mean C_z(E(x))`; latent vectors are scored as
/// single-channel sequences.
pub fn wasserstein_objective_z<T: Real>(
    critic_z: &impl CriticFn<T>,
    encoder: &impl EncoderFn<T>,
    z: ArrayView2<'_, T>,
    real: ArrayView3<'_, T>,
) -> Result<T> {
    same_batch(z.nrows(), real.len_of(Axis(0)))?;
    let encoded = encoder.encode_batch(real);
    Ok(mean(&critic_z.scores(latent_as_sequence(z)))
        - mean(&critic_z.scores(latent_as_sequence(encoded.view()))))
}

/// Per-sample Euclidean norms of `x - x_hat`, flattened over each window.
pub(crate) fn residual_norms<T: Real>(x: ArrayView3<'_, T>, x_hat: ArrayView3<'_, T>) -> Array1<T> {
    (&x - &x_hat)
        .outer_iter()
        .map(|d| d.iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect()
}

/// Mean over the batch of `||x - G(E(x))||_2`.
pub fn cycle_loss<T: Real>(
    encoder: &impl EncoderFn<T>,
    decoder: &impl DecoderFn<T>,
    real: ArrayView3<'_, T>,
) -> Result<T> {
    if real.len_of(Axis(0)) == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    let z = encoder.encode_batch(real);
    let x_hat = decoder.decode_batch(z.view());
    Ok(mean(&residual_norms(real, x_hat.view())))
}

/// `eps_i * real_i + (1 - eps_i) * fake_i` with one uniform `eps_i` per sample.
pub fn interpolate<T: Real>(real: ArrayView3<'_, T>, fake: ArrayView3<'_, T>, rng: &mut ChaCha8Rng) -> Array3<T> {
    let mut out = fake.to_owned();
    for ((mut o, r), f) in out.outer_iter_mut().zip(real.outer_iter()).zip(fake.outer_iter()) {
        let eps = T::of(rng.random::<f64>());
        o.assign(&(&r * eps + &f * (T::one() - eps)));
    }
    out
}

/// Mean over the batch of `(||grad C(x_int)||_2 - 1)^2` at random
/// interpolates between `real` and `fake`.
pub fn gradient_penalty<T: Real>(
    critic: &impl CriticFn<T>,
    real: ArrayView3<'_, T>,
    fake: ArrayView3<'_, T>,
    seed: u64,
) -> Result<T> {
    if real.dim() != fake.dim() {
        return Err(Error::Contract(format!(
            "real batch {:?} and fake batch {:?} differ",
            real.dim(),
            fake.dim()
        )));
    }
    if real.len_of(Axis(0)) == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = interpolate(real, fake, &mut rng);
    let grads = critic.input_gradients(x.view());
    let n = T::of(grads.len_of(Axis(0)) as f64);
    let total: T = grads
        .outer_iter()
        .map(|g| (g.iter().map(|&v| v * v).sum::<T>().sqrt() - T::one()).powi(2))
        .sum();
    Ok(total / n)
}

/// `V_X + V_Z + V_L2` on one batch of windows and one batch of latent draws.
pub fn full_objective<T: Real>(
    critic_x: &impl CriticFn<T>,
    critic_z: &impl CriticFn<T>,
    encoder: &impl EncoderFn<T>,
    decoder: &impl DecoderFn<T>,
    real: ArrayView3<'_, T>,
    z: ArrayView2<'_, T>,
) -> Result<T> {
    Ok(wasserstein_objective_x(critic_x, decoder, real, z)?
        + wasserstein_objective_z(critic_z, encoder, z, real)?
        + cycle_loss(encoder, decoder, real)?)
}
