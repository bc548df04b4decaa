use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, ArrayViewD, ArrayViewMutD, Axis, Ix2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{matmul, uniform_array, Grads, Parameterized, Real};

/// Valid-padding, stride-1 temporal convolution over `(batch, length, channels)`.
///
/// The kernel is stored in unrolled form, `(kernel * in_channels) x filters`,
/// so the forward pass is a single matrix product with the patch matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    kernel: usize,
    in_channels: usize,
}

pub struct Conv1dCache<T> {
    pub patches: Array2<T>,
    batch: usize,
    length: usize,
}

impl<T: Real> Conv1d<T> {
    pub fn new(in_channels: usize, filters: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = (kernel * in_channels) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let weight = uniform_array(&[kernel * in_channels, filters], bound, rng)
            .into_dimensionality::<Ix2>()
            .unwrap();
        let bias = Array1::from_shape_simple_fn(filters, || T::of(rng.random_range(-bound..=bound)));
        Conv1d {
            weight,
            bias,
            kernel,
            in_channels,
        }
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn filters(&self) -> usize {
        self.weight.ncols()
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_len(&self, length: usize) -> usize {
        length + 1 - self.kernel
    }

    /// Patch matrix: row `(b, p)` holds `x[b, p..p+kernel, :]` flattened.
    pub fn im2col(&self, x: ArrayView3<'_, T>) -> Array2<T> {
        let (batch, length, channels) = x.dim();
        assert_eq!(channels, self.in_channels, "conv input channels");
        assert!(length >= self.kernel, "sequence shorter than kernel");
        let lo = self.out_len(length);
        let width = self.kernel * channels;
        let x = x.as_standard_layout();
        let src = x.as_slice().unwrap();
        let mut patches = Array2::<T>::zeros((batch * lo, width));
        let dst = patches.as_slice_mut().unwrap();
        for b in 0..batch {
            let base = b * length * channels;
            for p in 0..lo {
                let from = base + p * channels;
                let row = (b * lo + p) * width;
                dst[row..row + width].copy_from_slice(&src[from..from + width]);
            }
        }
        patches
    }

    /// Adjoint of [`im2col`](Self::im2col): scatter-adds patch rows back.
    pub fn col2im(&self, cols: ArrayView2<'_, T>, batch: usize, length: usize) -> Array3<T> {
        let channels = self.in_channels;
        let lo = self.out_len(length);
        let width = self.kernel * channels;
        let cols = cols.as_standard_layout();
        let src = cols.as_slice().unwrap();
        let mut out = Array3::<T>::zeros((batch, length, channels));
        let dst = out.as_slice_mut().unwrap();
        for b in 0..batch {
            let base = b * length * channels;
            for p in 0..lo {
                let to = base + p * channels;
                let row = (b * lo + p) * width;
                for (d, &s) in dst[to..to + width].iter_mut().zip(&src[row..row + width]) {
                    *d += s;
                }
            }
        }
        out
    }

    /// Returns pre-activation output `(batch, out_len, filters)`.
    pub fn forward(&self, x: ArrayView3<'_, T>) -> (Array3<T>, Conv1dCache<T>) {
        let (batch, length, _) = x.dim();
        let patches = self.im2col(x);
        let lo = self.out_len(length);
        let out = (matmul(patches.view(), self.weight.view()) + &self.bias)
            .into_shape_with_order((batch, lo, self.filters()))
            .unwrap();
        (
            out,
            Conv1dCache {
                patches,
                batch,
                length,
            },
        )
    }

    pub fn backward(&self, cache: &Conv1dCache<T>, grad_out: ArrayView3<'_, T>) -> (Array3<T>, Grads<T>) {
        let (batch, lo, f) = grad_out.dim();
        let g = grad_out.as_standard_layout();
        let g = g.view().into_shape_with_order((batch * lo, f)).unwrap();
        let dw = matmul(cache.patches.t(), g);
        let db = g.sum_axis(Axis(0));
        let dcols = matmul(g, self.weight.t());
        let dx = self.col2im(dcols.view(), cache.batch, cache.length);
        (dx, vec![dw.into_dyn(), db.into_dyn()])
    }
}

impl<T: Real> Parameterized<T> for Conv1d<T> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        vec![self.weight.view().into_dyn(), self.bias.view().into_dyn()]
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        vec![self.weight.view_mut().into_dyn(), self.bias.view_mut().into_dyn()]
    }
}
