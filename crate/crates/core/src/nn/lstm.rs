use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView3, ArrayViewD, ArrayViewMutD, Axis, Ix2};
use rand_chacha::ChaCha8Rng;

use super::{matmul, uniform_array, Grads, Parameterized, Real};

/// Single-direction LSTM over time-major input `(steps, batch, inputs)`.
/// Gate blocks in the packed weights are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm<T> {
    pub w_ih: Array2<T>,
    pub w_hh: Array2<T>,
    pub bias: Array1<T>,
}

pub struct LstmCache<T> {
    x: Array3<T>,
    gates: Array3<T>,
    cells: Array3<T>,
    tanh_c: Array3<T>,
    h: Array3<T>,
}

impl<T: Real> Lstm<T> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = uniform_array(&[inputs, 4 * hidden], bound, rng)
            .into_dimensionality::<Ix2>()
            .unwrap();
        let w_hh = uniform_array(&[hidden, 4 * hidden], bound, rng)
            .into_dimensionality::<Ix2>()
            .unwrap();
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(T::one());
        Lstm { w_ih, w_hh, bias }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.w_ih.nrows()
    }

    pub fn forward(&self, x: ArrayView3<'_, T>) -> (Array3<T>, LstmCache<T>) {
        let (steps, batch, inputs) = x.dim();
        assert_eq!(inputs, self.inputs(), "LSTM input width");
        let h = self.hidden();
        let x = x.as_standard_layout().into_owned();
        let flat = x.view().into_shape_with_order((steps * batch, inputs)).unwrap();
        let mut gates = (matmul(flat, self.w_ih.view()) + &self.bias)
            .into_shape_with_order((steps, batch, 4 * h))
            .unwrap();
        let mut cells = Array3::<T>::zeros((steps, batch, h));
        let mut tanh_c = Array3::<T>::zeros((steps, batch, h));
        let mut out = Array3::<T>::zeros((steps, batch, h));
        let mut c_prev = vec![T::zero(); batch * h];

        for t in 0..steps {
            if t > 0 {
                let h_prev = out.index_axis(Axis(0), t - 1);
                let mut g = gates.index_axis_mut(Axis(0), t);
                general_mat_mul(T::one(), &h_prev, &self.w_hh, T::one(), &mut g);
            }
            let mut g_t = gates.index_axis_mut(Axis(0), t);
            let g = g_t.as_slice_mut().unwrap();
            let mut c_t = cells.index_axis_mut(Axis(0), t);
            let c = c_t.as_slice_mut().unwrap();
            let mut tc_t = tanh_c.index_axis_mut(Axis(0), t);
            let tc = tc_t.as_slice_mut().unwrap();
            let mut h_t = out.index_axis_mut(Axis(0), t);
            let hv = h_t.as_slice_mut().unwrap();
            for b in 0..batch {
                let row = &mut g[b * 4 * h..(b + 1) * 4 * h];
                T::sigmoid_in_place(&mut row[..2 * h]);
                T::tanh_in_place(&mut row[2 * h..3 * h]);
                T::sigmoid_in_place(&mut row[3 * h..]);
                let (i_g, rest) = row.split_at(h);
                let (f_g, rest) = rest.split_at(h);
                let (c_g, o_g) = rest.split_at(h);
                let span = b * h..(b + 1) * h;
                let cell = &mut c[span.clone()];
                let prev = &c_prev[span.clone()];
                for j in 0..h {
                    cell[j] = f_g[j] * prev[j] + i_g[j] * c_g[j];
                }
                let th = &mut tc[span.clone()];
                th.copy_from_slice(cell);
                T::tanh_in_place(th);
                let hv = &mut hv[span];
                for j in 0..h {
                    hv[j] = o_g[j] * th[j];
                }
            }
            c_prev.copy_from_slice(c);
        }

        let cache = LstmCache {
            x,
            gates,
            cells,
            tanh_c,
            h: out.clone(),
        };
        (out, cache)
    }

    /// Backpropagation through time from output gradients `(steps, batch, hidden)`.
    pub fn backward(&self, cache: &LstmCache<T>, grad_out: ArrayView3<'_, T>) -> (Array3<T>, Grads<T>) {
        let (steps, batch, inputs) = cache.x.dim();
        let h = self.hidden();
        let one = T::one();
        let mut dgates = Array3::<T>::zeros((steps, batch, 4 * h));
        let mut dh_next = Array2::<T>::zeros((batch, h));
        let mut dc_next = vec![T::zero(); batch * h];
        let mut dh = vec![T::zero(); batch * h];

        for t in (0..steps).rev() {
            let go = grad_out.index_axis(Axis(0), t);
            for ((d, &a), &b) in dh.iter_mut().zip(go.iter()).zip(dh_next.iter()) {
                *d = a + b;
            }
            let g_t = cache.gates.index_axis(Axis(0), t);
            let g = g_t.as_slice().unwrap();
            let tc_t = cache.tanh_c.index_axis(Axis(0), t);
            let tc = tc_t.as_slice().unwrap();
            let c_prev = (t > 0).then(|| cache.cells.index_axis(Axis(0), t - 1));
            let c_prev = c_prev.as_ref().map(|v| v.as_slice().unwrap());
            let mut dg_t = dgates.index_axis_mut(Axis(0), t);
            let dg = dg_t.as_slice_mut().unwrap();
            for b in 0..batch {
                let row = &g[b * 4 * h..(b + 1) * 4 * h];
                let drow = &mut dg[b * 4 * h..(b + 1) * 4 * h];
                for j in 0..h {
                    let k = b * h + j;
                    let (i_g, f_g, c_g, o_g) = (row[j], row[h + j], row[2 * h + j], row[3 * h + j]);
                    let th = tc[k];
                    let d_o = dh[k] * th;
                    let dc = dh[k] * o_g * (one - th * th) + dc_next[k];
                    let cp = c_prev.map_or(T::zero(), |c| c[k]);
                    dc_next[k] = dc * f_g;
                    drow[j] = dc * c_g * i_g * (one - i_g);
                    drow[h + j] = dc * cp * f_g * (one - f_g);
                    drow[2 * h + j] = dc * i_g * (one - c_g * c_g);
                    drow[3 * h + j] = d_o * o_g * (one - o_g);
                }
            }
            let dg_t = dgates.index_axis(Axis(0), t);
            general_mat_mul(one, &dg_t, &self.w_hh.t(), T::zero(), &mut dh_next);
        }

        let dg2 = dgates.view().into_shape_with_order((steps * batch, 4 * h)).unwrap();
        let x2 = cache.x.view().into_shape_with_order((steps * batch, inputs)).unwrap();
        let dw_ih = matmul(x2.t(), dg2);
        let db = dg2.sum_axis(Axis(0));
        let dw_hh = if steps > 1 {
            let hp = cache.h.slice(s![..steps - 1, .., ..]);
            let hp = hp.into_shape_with_order(((steps - 1) * batch, h)).unwrap();
            let dgn = dgates.slice(s![1.., .., ..]);
            let dgn = dgn.into_shape_with_order(((steps - 1) * batch, 4 * h)).unwrap();
            matmul(hp.t(), dgn)
        } else {
            Array2::zeros((h, 4 * h))
        };
        let dx = matmul(dg2, self.w_ih.t())
            .into_shape_with_order((steps, batch, inputs))
            .unwrap();
        (dx, vec![dw_ih.into_dyn(), dw_hh.into_dyn(), db.into_dyn()])
    }
}

impl<T: Real> Parameterized<T> for Lstm<T> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        vec![
            self.w_ih.view().into_dyn(),
            self.w_hh.view().into_dyn(),
            self.bias.view().into_dyn(),
        ]
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        vec![
            self.w_ih.view_mut().into_dyn(),
            self.w_hh.view_mut().into_dyn(),
            self.bias.view_mut().into_dyn(),
        ]
    }
}

/// Two LSTMs reading the sequence in opposite directions; outputs are
/// concatenated along the feature axis (forward first).
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm<T> {
    pub forward: Lstm<T>,
    pub backward: Lstm<T>,
}

pub struct BiLstmCache<T> {
    fwd: LstmCache<T>,
    bwd: LstmCache<T>,
}

fn reversed<T: Real>(x: ArrayView3<'_, T>) -> Array3<T> {
    x.slice(s![..;-1, .., ..]).as_standard_layout().into_owned()
}

impl<T: Real> BiLstm<T> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let forward = Lstm::new(inputs, hidden, rng);
        let backward = Lstm::new(inputs, hidden, rng);
        BiLstm { forward, backward }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn outputs(&self) -> usize {
        2 * self.hidden()
    }

    pub fn forward(&self, x: ArrayView3<'_, T>) -> (Array3<T>, BiLstmCache<T>) {
        let (hf, fwd) = self.forward.forward(x);
        let xr = reversed(x);
        let (hb, bwd) = self.backward.forward(xr.view());
        let hb = reversed(hb.view());
        let out = concatenate(Axis(2), &[hf.view(), hb.view()]).unwrap().as_standard_layout().into_owned();
        (out, BiLstmCache { fwd, bwd })
    }

    pub fn backward(&self, cache: &BiLstmCache<T>, grad_out: ArrayView3<'_, T>) -> (Array3<T>, Grads<T>) {
        let h = self.hidden();
        let g_f = grad_out.slice(s![.., .., ..h]);
        let g_b = reversed(grad_out.slice(s![.., .., h..]));
        let (dx_f, mut grads) = self.forward.backward(&cache.fwd, g_f);
        let (dx_b, grads_b) = self.backward.backward(&cache.bwd, g_b.view());
        grads.extend(grads_b);
        let dx = dx_f + reversed(dx_b.view());
        (dx, grads)
    }
}

impl<T: Real> Parameterized<T> for BiLstm<T> {
    fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut p = self.forward.params();
        p.extend(self.backward.params());
        p
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut p = self.forward.params_mut();
        p.extend(self.backward.params_mut());
        p
    }
}
