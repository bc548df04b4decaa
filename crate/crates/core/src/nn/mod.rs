//! Minimal layer library with hand-written backward passes.
//!
//! Layers are immutable during a forward/backward pair: `forward` returns the
//! activations needed later as an explicit cache, and `backward` returns the
//! input gradient together with parameter gradients ordered like
//! [`Parameterized::params`].

mod adam;
mod conv;
mod lstm;
mod real;

use ndarray::{Array1, Array2, ArrayD, ArrayView2, ArrayViewD, ArrayViewMutD, Axis, Ix2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{Adam, AdamConfig};
pub use conv::{Conv1d, Conv1dCache};
pub use lstm::{BiLstm, BiLstmCache, Lstm, LstmCache};
pub use real::{sigmoid, Real};

/// Gradients aligned one-to-one with a module's parameter list.
pub type Grads<T> = Vec<ArrayD<T>>;

pub trait Parameterized<T: Real> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>>;
    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>>;

    fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero_grads(&self) -> Grads<T> {
        self.params()
            .iter()
            .map(|p| ArrayD::zeros(p.raw_dim()))
            .collect()
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

/// `acc += other`, element-wise over aligned gradient lists.
pub fn accumulate<T: Real>(acc: &mut Grads<T>, other: &Grads<T>) {
    debug_assert_eq!(acc.len(), other.len());
    for (a, o) in acc.iter_mut().zip(other) {
        *a += o;
    }
}

/// Row-major `a * b`; downstream reshapes rely on standard layout.
pub(crate) fn matmul<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> Array2<T> {
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    ndarray::linalg::general_mat_mul(T::one(), &a, &b, T::zero(), &mut c);
    c
}

pub(crate) fn uniform_array<T: Real>(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> ArrayD<T> {
    ArrayD::from_shape_simple_fn(shape, || T::of(rng.random_range(-bound..=bound)))
}

/// Fully connected layer, `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = uniform_array(&[inputs, outputs], bound, rng)
            .into_dimensionality::<Ix2>()
            .expect("2-d");
        let bias = Array1::from_shape_simple_fn(outputs, || T::of(rng.random_range(-bound..=bound)));
        Linear { weight, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        matmul(x, self.weight.view()) + &self.bias
    }

    pub fn backward(&self, x: ArrayView2<'_, T>, grad_out: ArrayView2<'_, T>) -> (Array2<T>, Grads<T>) {
        let dx = matmul(grad_out, self.weight.t());
        let dw = matmul(x.t(), grad_out);
        let db = grad_out.sum_axis(Axis(0));
        (dx, vec![dw.into_dyn(), db.into_dyn()])
    }
}

impl<T: Real> Parameterized<T> for Linear<T> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        vec![self.weight.view().into_dyn(), self.bias.view().into_dyn()]
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        vec![self.weight.view_mut().into_dyn(), self.bias.view_mut().into_dyn()]
    }
}

/// Inverted-dropout mask for `len` activations; `None` when `rate` is zero.
/// Kept units are scaled by `1 / (1 - rate)`.
pub fn dropout_mask<T: Real>(len: usize, rate: f64, seed: u64) -> Option<Vec<T>> {
    if rate <= 0.0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = T::of(1.0 / (1.0 - rate));
    Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect(),
    )
}
