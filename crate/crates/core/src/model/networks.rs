//! Encoder `E: X -> Z`, decoder `G: Z -> X` and the two convolutional critics.

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, ArrayViewD, ArrayViewMutD, Axis, Ix2};
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    dropout_mask, matmul, BiLstm, BiLstmCache, Conv1d, Conv1dCache, Grads, Linear, Parameterized, Real,
};

use super::NetworkSpec;

/// `(batch, steps, features)` <-> `(steps, batch, features)`.
fn swap_batch_time<T: Real>(x: ArrayView3<'_, T>) -> Array3<T> {
    x.permuted_axes([1, 0, 2]).as_standard_layout().into_owned()
}

/// Bidirectional LSTM over the window followed by a dense projection of the
/// flattened hidden sequence onto the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub rnn: BiLstm<T>,
    pub dense: Linear<T>,
    window: usize,
    channels: usize,
}

pub struct EncoderCache<T> {
    rnn: BiLstmCache<T>,
    flat: Array2<T>,
}

impl<T: Real> Encoder<T> {
    pub fn new(spec: &NetworkSpec, window: usize, channels: usize, latent: usize, rng: &mut ChaCha8Rng) -> Self {
        let rnn = BiLstm::new(channels, spec.encoder_hidden, rng);
        let dense = Linear::new(window * rnn.outputs(), latent, rng);
        Encoder {
            rnn,
            dense,
            window,
            channels,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn latent_dim(&self) -> usize {
        self.dense.outputs()
    }

    /// `x`: `(batch, window, channels)` -> `(batch, latent)`.
    pub fn forward(&self, x: ArrayView3<'_, T>) -> (Array2<T>, EncoderCache<T>) {
        let batch = x.len_of(Axis(0));
        let (h, rnn) = self.rnn.forward(swap_batch_time(x).view());
        let flat = swap_batch_time(h.view())
            .into_shape_with_order((batch, self.window * self.rnn.outputs()))
            .unwrap();
        let z = self.dense.forward(flat.view());
        (z, EncoderCache { rnn, flat })
    }

    pub fn backward(&self, cache: &EncoderCache<T>, grad_z: ArrayView2<'_, T>) -> (Array3<T>, Grads<T>) {
        let batch = grad_z.nrows();
        let (dflat, dense_grads) = self.dense.backward(cache.flat.view(), grad_z);
        let dh = dflat
            .into_shape_with_order((batch, self.window, self.rnn.outputs()))
            .unwrap();
        let (dx, mut grads) = self.rnn.backward(&cache.rnn, swap_batch_time(dh.view()).view());
        grads.extend(dense_grads);
        (swap_batch_time(dx.view()), grads)
    }
}

impl<T: Real> Parameterized<T> for Encoder<T> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut p = self.rnn.params();
        p.extend(self.dense.params());
        p
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut p = self.rnn.params_mut();
        p.extend(self.dense.params_mut());
        p
    }
}

/// Reads the latent vector as a length-`k` sequence of scalars, runs a
/// bidirectional LSTM, stretches the result to the window length by
/// nearest-neighbour upsampling, runs a second bidirectional LSTM and maps
/// every step to the output channels through `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder<T> {
    pub rnn1: BiLstm<T>,
    pub rnn2: BiLstm<T>,
    pub head: Linear<T>,
    window: usize,
    latent: usize,
    dropout: f64,
}

pub struct DecoderCache<T> {
    rnn1: BiLstmCache<T>,
    mask1: Option<Vec<T>>,
    rnn2: BiLstmCache<T>,
    mask2: Option<Vec<T>>,
    head_in: Array2<T>,
    out: Array2<T>,
    batch: usize,
}

fn apply_mask<T: Real>(x: &mut Array3<T>, mask: &Option<Vec<T>>) {
    if let Some(mask) = mask {
        for (v, &m) in x.as_slice_mut().unwrap().iter_mut().zip(mask) {
            *v *= m;
        }
    }
}

impl<T: Real> Decoder<T> {
    pub fn new(spec: &NetworkSpec, window: usize, channels: usize, latent: usize, rng: &mut ChaCha8Rng) -> Self {
        let rnn1 = BiLstm::new(1, spec.decoder_hidden, rng);
        let rnn2 = BiLstm::new(rnn1.outputs(), spec.decoder_hidden, rng);
        let head = Linear::new(rnn2.outputs(), channels, rng);
        Decoder {
            rnn1,
            rnn2,
            head,
            window,
            latent,
            dropout: spec.dropout,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn channels(&self) -> usize {
        self.head.outputs()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    fn source_step(&self, j: usize) -> usize {
        j * self.latent / self.window
    }

    /// `z`: `(batch, latent)` -> `(batch, window, channels)`. Dropout is active
    /// only when a mask seed is supplied.
    pub fn forward(&self, z: ArrayView2<'_, T>, dropout_seed: Option<u64>) -> (Array3<T>, DecoderCache<T>) {
        let batch = z.nrows();
        let width = self.rnn1.outputs();
        let seq = z.t().as_standard_layout().into_owned().insert_axis(Axis(2));
        let (mut h1, rnn1) = self.rnn1.forward(seq.view());

        let seeds = dropout_seed.map(|s| (s, s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)));
        let mask1 = seeds.and_then(|(a, _)| dropout_mask(h1.len(), self.dropout, a));
        apply_mask(&mut h1, &mask1);

        let mut up = Array3::<T>::zeros((self.window, batch, width));
        for (j, mut step) in up.outer_iter_mut().enumerate() {
            step.assign(&h1.index_axis(Axis(0), self.source_step(j)));
        }
        let (mut h2, rnn2) = self.rnn2.forward(up.view());
        let mask2 = seeds.and_then(|(_, b)| dropout_mask(h2.len(), self.dropout, b));
        apply_mask(&mut h2, &mask2);

        let head_in = h2.into_shape_with_order((self.window * batch, width)).unwrap();
        let mut out = self.head.forward(head_in.view());
        T::tanh_in_place(out.as_slice_mut().expect("standard layout"));
        let x = swap_batch_time(
            out.view()
                .into_shape_with_order((self.window, batch, self.channels()))
                .unwrap(),
        );
        let cache = DecoderCache {
            rnn1,
            mask1,
            rnn2,
            mask2,
            head_in,
            out,
            batch,
        };
        (x, cache)
    }

    pub fn backward(&self, cache: &DecoderCache<T>, grad_x: ArrayView3<'_, T>) -> (Array2<T>, Grads<T>) {
        let batch = cache.batch;
        let width = self.rnn1.outputs();
        let m = self.channels();
        let mut d_out = swap_batch_time(grad_x)
            .into_shape_with_order((self.window * batch, m))
            .unwrap();
        d_out.zip_mut_with(&cache.out, |d, &y| *d *= T::one() - y * y);
        let (d_head_in, head_grads) = self.head.backward(cache.head_in.view(), d_out.view());
        let mut dh2 = d_head_in
            .into_shape_with_order((self.window, batch, width))
            .unwrap();
        apply_mask(&mut dh2, &cache.mask2);
        let (d_up, rnn2_grads) = self.rnn2.backward(&cache.rnn2, dh2.view());

        let mut dh1 = Array3::<T>::zeros((self.latent, batch, width));
        for (j, step) in d_up.outer_iter().enumerate() {
            let mut dst = dh1.index_axis_mut(Axis(0), self.source_step(j));
            dst += &step;
        }
        apply_mask(&mut dh1, &cache.mask1);
        let (dseq, mut grads) = self.rnn1.backward(&cache.rnn1, dh1.view());
        grads.extend(rnn2_grads);
        grads.extend(head_grads);
        let dz = dseq
            .index_axis(Axis(2), 0)
            .t()
            .as_standard_layout()
            .into_owned();
        (dz, grads)
    }
}

impl<T: Real> Parameterized<T> for Decoder<T> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut p = self.rnn1.params();
        p.extend(self.rnn2.params());
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut p = self.rnn1.params_mut();
        p.extend(self.rnn2.params_mut());
        p.extend(self.head.params_mut());
        p
    }
}

/// One temporal convolution, leaky ReLU, and a dense scalar head over the
/// flattened feature map. Used for both `C_x` (windows) and `C_z` (latent
/// vectors read as single-channel sequences).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvCritic<T> {
    pub conv: Conv1d<T>,
    pub head: Linear<T>,
    length: usize,
    slope: f64,
}

pub struct CriticCache<T> {
    conv: Conv1dCache<T>,
    pre: Array3<T>,
    act: Array2<T>,
}

impl<T: Real> ConvCritic<T> {
    pub fn new(spec: &NetworkSpec, length: usize, channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let kernel = spec.critic_kernel.min(length);
        let conv = Conv1d::new(channels, spec.critic_filters, kernel, rng);
        let features = conv.out_len(length) * conv.filters();
        let head = Linear::new(features, 1, rng);
        ConvCritic {
            conv,
            head,
            length,
            slope: spec.leaky_slope,
        }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn channels(&self) -> usize {
        self.conv.in_channels()
    }

    fn slope(&self) -> T {
        T::of(self.slope)
    }

    /// Derivative of the leaky ReLU at each pre-activation.
    fn act_grad(&self, pre: &Array3<T>) -> Array3<T> {
        let s = self.slope();
        pre.mapv(|v| if v > T::zero() { T::one() } else { s })
    }

    pub fn forward(&self, x: ArrayView3<'_, T>) -> (Array1<T>, CriticCache<T>) {
        let batch = x.len_of(Axis(0));
        let (pre, conv) = self.conv.forward(x);
        let s = self.slope();
        let act = pre
            .mapv(|v| if v > T::zero() { v } else { s * v })
            .into_shape_with_order((batch, self.head.inputs()))
            .unwrap();
        let scores = self.head.forward(act.view()).index_axis_move(Axis(1), 0);
        (scores, CriticCache { conv, pre, act })
    }

    pub fn backward(&self, cache: &CriticCache<T>, grad_scores: ArrayView2<'_, T>) -> (Array3<T>, Grads<T>) {
        let (dact, head_grads) = self.head.backward(cache.act.view(), grad_scores);
        let mut dpre = dact.into_shape_with_order(cache.pre.raw_dim()).unwrap();
        dpre *= &self.act_grad(&cache.pre);
        let (dx, mut grads) = self.conv.backward(&cache.conv, dpre.view());
        grads.extend(head_grads);
        (dx, grads)
    }

    /// Backward pass from per-sample score gradients.
    pub fn backward_scores(&self, cache: &CriticCache<T>, grad_scores: &Array1<T>) -> (Array3<T>, Grads<T>) {
        let g = grad_scores.view().insert_axis(Axis(1));
        self.backward(cache, g)
    }

    /// `d score_i / d x_i` for every sample.
    pub fn input_gradients(&self, x: ArrayView3<'_, T>) -> Array3<T> {
        let (scores, cache) = self.forward(x);
        self.backward_scores(&cache, &Array1::ones(scores.len())).0
    }

    /// Mean over the batch of `(||grad_x C(x_i)|| - 1)^2` and its gradient with
    /// respect to the critic parameters.
    ///
    /// With `u = v * act'(h)` (head weights gated by the activation slope) the
    /// input gradient is `g = conv^T(u)`. The activation derivative is
    /// piecewise constant, so both biases receive zero gradient and
    /// `dP/dW = im2col(r)^T u`, `dP/dv = (im2col(r) W) * act'(h)` with
    /// `r = 2 (|g| - 1) g / |g|`.
    pub fn gradient_penalty_with_grads(&self, x: ArrayView3<'_, T>) -> (T, Grads<T>) {
        let (batch, length, _) = x.dim();
        let (pre, _) = self.conv.forward(x);
        let (_, lo, f) = pre.dim();
        let gate = self.act_grad(&pre);
        let v = self.head.weight.column(0).into_shape_with_order((lo, f)).unwrap();
        let u = &gate * &v.insert_axis(Axis(0));
        let u2 = u.view().into_shape_with_order((batch * lo, f)).unwrap();
        let g = self.conv.col2im(matmul(u2, self.conv.weight.t()).view(), batch, length);

        let two = T::of(2.0);
        let inv_b = T::one() / T::of(batch as f64);
        let mut penalty = T::zero();
        let mut r = g.clone();
        for mut sample in r.outer_iter_mut() {
            let norm = sample.iter().map(|&v| v * v).sum::<T>().sqrt();
            penalty += (norm - T::one()).powi(2);
            let scale = if norm > T::zero() {
                two * (norm - T::one()) / norm * inv_b
            } else {
                T::zero()
            };
            sample.mapv_inplace(|v| v * scale);
        }
        let rc = self.conv.im2col(r.view());
        let dw = matmul(rc.t(), u2);
        let dv = (matmul(rc.view(), self.conv.weight.view()) * gate.view().into_shape_with_order((batch * lo, f)).unwrap())
            .into_shape_with_order((batch, lo * f))
            .unwrap()
            .sum_axis(Axis(0))
            .into_shape_with_order((lo * f, 1))
            .unwrap();
        let grads = vec![
            dw.into_dyn(),
            Array1::<T>::zeros(f).into_dyn(),
            dv.into_dimensionality::<Ix2>().unwrap().into_dyn(),
            Array1::<T>::zeros(1).into_dyn(),
        ];
        (penalty * inv_b, grads)
    }
}

impl<T: Real> Parameterized<T> for ConvCritic<T> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut p = self.conv.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut p = self.conv.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}
