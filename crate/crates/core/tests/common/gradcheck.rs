//! Central finite-difference checks of the analytic training gradients on a
//! micro network (window 4, latent 2, hidden 3).

use ndarray::{Array1, Array2, Array3, ArrayD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsad::model::{
    cycle_loss, sample_latent, wasserstein_objective_x, wasserstein_objective_z, CriticFn, LatentConfig,
    NetworkSpec, Networks,
};
use tsad::nn::Parameterized;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Absolute floor below which differences are round-off.
pub const ABS_FLOOR: f64 = 1e-10;

pub fn micro_spec() -> NetworkSpec {
    NetworkSpec {
        encoder_hidden: 3,
        decoder_hidden: 3,
        critic_filters: 3,
        critic_kernel: 2,
        dropout: 0.2,
        leaky_slope: 0.2,
    }
}

pub struct Fixture {
    pub nets: Networks<f64>,
    pub x: Array3<f64>,
    pub z: Array2<f64>,
}

pub fn fixture(seed: u64) -> Fixture {
    let nets = Networks::new(&micro_spec(), 4, 1, 2, seed);
    let x = Array3::from_shape_fn((3, 4, 1), |(i, j, _)| ((i * 4 + j) as f64 * 0.7 + seed as f64).sin() * 0.8);
    let z = sample_latent(3, &LatentConfig { latent_dim: 2 }, seed + 100);
    Fixture { nets, x, z }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Encoder,
    Decoder,
    CriticX,
    CriticZ,
}

fn params_mut(nets: &mut Networks<f64>, part: Part) -> Vec<ArrayViewMutD<'_, f64>> {
    match part {
        Part::Encoder => nets.encoder.params_mut(),
        Part::Decoder => nets.decoder.params_mut(),
        Part::CriticX => nets.critic_x.params_mut(),
        Part::CriticZ => nets.critic_z.params_mut(),
    }
}

/// Largest `|a - n| / max(|a|, |n|)` over all parameters of `part`, skipping
/// entries where both are below the absolute floor.
pub fn max_rel_error(
    nets: &Networks<f64>,
    part: Part,
    analytic: &[ArrayD<f64>],
    loss: impl Fn(&Networks<f64>) -> f64,
) -> f64 {
    let mut probe = nets.clone();
    let shapes: Vec<usize> = params_mut(&mut probe, part).iter().map(|p| p.len()).collect();
    assert_eq!(shapes.len(), analytic.len(), "{part:?}: gradient count");
    let mut worst = 0.0f64;
    for (pi, &len) in shapes.iter().enumerate() {
        assert_eq!(analytic[pi].len(), len, "{part:?}: gradient {pi} size");
        for e in 0..len {
            let orig = params_mut(&mut probe, part)[pi].iter().nth(e).copied().unwrap();
            let set = |v: f64, probe: &mut Networks<f64>| {
                *params_mut(probe, part)[pi].iter_mut().nth(e).unwrap() = v;
            };
            set(orig + STEP, &mut probe);
            let up = loss(&probe);
            set(orig - STEP, &mut probe);
            let down = loss(&probe);
            set(orig, &mut probe);
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[pi].iter().nth(e).copied().unwrap();
            let diff = (a - numeric).abs();
            if diff > ABS_FLOOR {
                worst = worst.max(diff / a.abs().max(numeric.abs()));
            }
        }
    }
    worst
}

fn mean_weights(n: usize, sign: f64) -> Array1<f64> {
    Array1::from_elem(n, sign / n as f64)
}

fn add(a: &mut [ArrayD<f64>], b: &[ArrayD<f64>]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Worst relative error of each term over the parameters it depends on.
pub struct GradReport {
    pub vx: f64,
    pub vz: f64,
    pub cycle: f64,
    pub gp: f64,
}

impl GradReport {
    pub fn worst(&self) -> f64 {
        self.vx.max(self.vz).max(self.cycle).max(self.gp)
    }
}

pub fn check(seed: u64) -> GradReport {
    let Fixture { nets, x, z } = fixture(seed);
    let m = x.len_of(Axis(0));

    // V_X = mean C_x(x) - mean C_x(G(z))
    let (fake, dec_cache) = nets.decoder.forward(z.view(), None);
    let (_, c_real) = nets.critic_x.forward(x.view());
    let (_, c_fake) = nets.critic_x.forward(fake.view());
    let (_, mut cx_grads) = nets.critic_x.backward_scores(&c_real, &mean_weights(m, 1.0));
    let (d_fake, g) = nets.critic_x.backward_scores(&c_fake, &mean_weights(m, -1.0));
    add(&mut cx_grads, &g);
    let (_, dec_grads) = nets.decoder.backward(&dec_cache, d_fake.view());
    let vx = |n: &Networks<f64>| wasserstein_objective_x(&n.critic_x, &n.decoder, x.view(), z.view()).unwrap();
    let vx_err = max_rel_error(&nets, Part::CriticX, &cx_grads, vx).max(max_rel_error(&nets, Part::Decoder, &dec_grads, vx));

    // V_Z = mean C_z(z) - mean C_z(E(x))
    let (enc, enc_cache) = nets.encoder.forward(x.view());
    let (_, c_prior) = nets.critic_z.forward(z.view().insert_axis(Axis(2)));
    let (_, c_enc) = nets.critic_z.forward(enc.view().insert_axis(Axis(2)));
    let (_, mut cz_grads) = nets.critic_z.backward_scores(&c_prior, &mean_weights(m, 1.0));
    let (d_enc, g) = nets.critic_z.backward_scores(&c_enc, &mean_weights(m, -1.0));
    add(&mut cz_grads, &g);
    let (_, enc_grads) = nets.encoder.backward(&enc_cache, d_enc.index_axis(Axis(2), 0));
    let vz = |n: &Networks<f64>| wasserstein_objective_z(&n.critic_z, &n.encoder, z.view(), x.view()).unwrap();
    let vz_err = max_rel_error(&nets, Part::CriticZ, &cz_grads, vz).max(max_rel_error(&nets, Part::Encoder, &enc_grads, vz));

    // V_L2 = mean ||x - G(E(x))||
    let (x_hat, dec_cache) = nets.decoder.forward(enc.view(), None);
    let mut d_xhat = &x_hat - &x;
    for mut d in d_xhat.outer_iter_mut() {
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.mapv_inplace(|v| v / (norm * m as f64));
    }
    let (d_z, dec_grads) = nets.decoder.backward(&dec_cache, d_xhat.view());
    let (_, enc_grads) = nets.encoder.backward(&enc_cache, d_z.view());
    let l2 = |n: &Networks<f64>| cycle_loss(&n.encoder, &n.decoder, x.view()).unwrap();
    let cycle_err = max_rel_error(&nets, Part::Decoder, &dec_grads, l2).max(max_rel_error(&nets, Part::Encoder, &enc_grads, l2));

    // Gradient penalty at fixed interpolates, computed independently from
    // the critic's input gradients.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_int = tsad::model::interpolate(x.view(), fake.view(), &mut rng);
    let penalty = |c: &dyn CriticFn<f64>, pts: &Array3<f64>| {
        let g = c.input_gradients(pts.view());
        g.outer_iter()
            .map(|s| (s.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).powi(2))
            .sum::<f64>()
            / g.len_of(Axis(0)) as f64
    };
    let (_, gp_grads) = nets.critic_x.gradient_penalty_with_grads(x_int.view());
    let gp_x = max_rel_error(&nets, Part::CriticX, &gp_grads, |n| penalty(&n.critic_x, &x_int));
    let z_int = tsad::model::interpolate(
        z.view().insert_axis(Axis(2)),
        enc.view().insert_axis(Axis(2)),
        &mut rng,
    );
    let (_, gp_grads) = nets.critic_z.gradient_penalty_with_grads(z_int.view());
    let gp_z = max_rel_error(&nets, Part::CriticZ, &gp_grads, |n| penalty(&n.critic_z, &z_int));

    GradReport {
        vx: vx_err,
        vz: vz_err,
        cycle: cycle_err,
        gp: gp_x.max(gp_z),
    }
}

/// Decoder gradients with dropout active, checked against the same masks.
pub fn check_dropout(seed: u64) -> f64 {
    let Fixture { nets, z, .. } = fixture(seed);
    let mask_seed = seed ^ 0xABCD;
    let weights = Array3::from_shape_fn((3, 4, 1), |(i, j, _)| 0.3 + (i as f64) - 0.2 * j as f64);
    let (_, cache) = nets.decoder.forward(z.view(), Some(mask_seed));
    let (_, grads) = nets.decoder.backward(&cache, weights.view());
    max_rel_error(&nets, Part::Decoder, &grads, |n| {
        (&n.decoder.forward(z.view(), Some(mask_seed)).0 * &weights).sum()
    })
}
