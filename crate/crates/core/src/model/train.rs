use ndarray::{s, Array1, Array2, Array3, ArrayView3, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{accumulate, Adam, AdamConfig, Grads, Parameterized, Real};
use crate::signal::WindowSet;

use super::objectives::{interpolate, residual_norms};
use super::{sample_latent_with, ConvCritic, LatentConfig, ModelBundle, NetworkSpec, Networks, TrainingLog, TrainingRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub n_critic: usize,
    pub learning_rate: f64,
    pub gp_weight: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            iterations: 2000,
            n_critic: 5,
            learning_rate: 0.0005,
            gp_weight: 10.0,
            beta1: 0.5,
            beta2: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.iterations == 0 || self.n_critic == 0 {
            return Err(Error::Config(
                "batch_size, iterations and n_critic must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.gp_weight > 0.0) {
            return Err(Error::Config("learning_rate and gp_weight must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }
}

/// Mean critic-phase statistics over the `n_critic` updates of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CriticStats {
    pub vx: f64,
    pub vz: f64,
    pub gp_x: f64,
    pub gp_z: f64,
}

/// Owns the networks and optimizer state of one training run.
///
/// Each iteration performs `n_critic` critic updates, each on a fresh batch
/// of windows and latent draws, followed by one joint encoder/decoder update.
pub struct Trainer<T: Real> {
    nets: Networks<T>,
    windows: Array3<T>,
    cfg: TrainConfig,
    rng: ChaCha8Rng,
    opt_cx: Adam<T>,
    opt_cz: Adam<T>,
    opt_e: Adam<T>,
    opt_g: Adam<T>,
    iteration: usize,
}

fn gather<T: Real>(windows: &Array3<T>, idx: &[usize]) -> Array3<T> {
    windows.select(Axis(0), idx)
}

fn scale<T: Real>(grads: &mut Grads<T>, k: T) {
    for g in grads.iter_mut() {
        g.mapv_inplace(|v| v * k);
    }
}

impl<T: Real> Trainer<T> {
    pub fn new(windows: &WindowSet, spec: &NetworkSpec, latent: &LatentConfig, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        spec.validate()?;
        latent.validate()?;
        cfg.validate()?;
        if windows.len() < cfg.batch_size {
            return Err(Error::Config(format!(
                "{} training windows, fewer than batch_size {}",
                windows.len(),
                cfg.batch_size
            )));
        }
        let nets = Networks::new(
            spec,
            windows.window_size(),
            windows.n_channels(),
            latent.latent_dim,
            seed,
        );
        Ok(Self::from_networks(nets, windows.windows.view(), cfg, seed))
    }

    /// Continues from existing networks with fresh optimizer state.
    pub fn from_networks(nets: Networks<T>, windows: ArrayView3<'_, f64>, cfg: &TrainConfig, seed: u64) -> Self {
        let adam = cfg.adam();
        Trainer {
            nets,
            windows: windows.mapv(T::of),
            cfg: *cfg,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_4E5B),
            opt_cx: Adam::new(adam),
            opt_cz: Adam::new(adam),
            opt_e: Adam::new(adam),
            opt_g: Adam::new(adam),
            iteration: 0,
        }
    }

    pub fn networks(&self) -> &Networks<T> {
        &self.nets
    }

    pub fn into_networks(self) -> Networks<T> {
        self.nets
    }

    fn sample_indices(&mut self, count: usize) -> Vec<usize> {
        index::sample(&mut self.rng, self.windows.len_of(Axis(0)), count).into_vec()
    }

    /// Runs the `n_critic` critic updates of one iteration.
    pub fn critic_phase(&mut self) -> CriticStats {
        let m = self.cfg.batch_size;
        let n = self.cfg.n_critic;
        let k = self.nets.latent_dim();
        let mut idx = Vec::with_capacity(n * m);
        for _ in 0..n {
            idx.extend(self.sample_indices(m));
        }
        let x_all = gather(&self.windows, &idx);
        let z_all: Array2<T> = sample_latent_with(n * m, k, &mut self.rng);
        let seed: u64 = self.rng.random();

        let mut stats = CriticStats::default();
        let lambda = T::of(self.cfg.gp_weight);
        for step in 0..n {
            // Encoder and decoder are fixed during the critic phase, so the
            // fakes only depend on the pre-drawn inputs and masks.
            let x = x_all.slice(s![step * m..(step + 1) * m, .., ..]);
            let z = z_all.slice(s![step * m..(step + 1) * m, ..]);
            let mask_seed = seed.wrapping_add(step as u64);
            let (fake_x, _) = self.nets.decoder.forward(z, Some(mask_seed));
            let (enc, _) = self.nets.encoder.forward(x);
            let (vx, gp_x, grads) = critic_update(&self.nets.critic_x, x, fake_x.view(), lambda, &mut self.rng);
            self.opt_cx.step(self.nets.critic_x.params_mut(), &grads);

            let z = z.insert_axis(Axis(2));
            let enc = enc.view().insert_axis(Axis(2));
            let (vz, gp_z, grads) = critic_update(&self.nets.critic_z, z, enc, lambda, &mut self.rng);
            self.opt_cz.step(self.nets.critic_z.params_mut(), &grads);

            stats.vx += vx.as_f64();
            stats.vz += vz.as_f64();
            stats.gp_x += gp_x.as_f64();
            stats.gp_z += gp_z.as_f64();
        }
        let nf = n as f64;
        CriticStats {
            vx: stats.vx / nf,
            vz: stats.vz / nf,
            gp_x: stats.gp_x / nf,
            gp_z: stats.gp_z / nf,
        }
    }

    /// One joint encoder/decoder step on `-mean C_x(G(z)) - mean C_z(E(x)) +
    /// mean ||x - G(E(x))||`. Returns the cycle loss of the batch.
    pub fn generator_step(&mut self) -> f64 {
        let m = self.cfg.batch_size;
        let idx = self.sample_indices(m);
        let x = gather(&self.windows, &idx);
        let z: Array2<T> = sample_latent_with(m, self.nets.latent_dim(), &mut self.rng);
        let (seed1, seed2): (u64, u64) = (self.rng.random(), self.rng.random());
        let nets = &self.nets;
        let neg_inv_m = Array1::from_elem(m, -T::one() / T::of(m as f64));

        let (fake, dec_cache1) = nets.decoder.forward(z.view(), Some(seed1));
        let (_, cx_cache) = nets.critic_x.forward(fake.view());
        let (d_fake, _) = nets.critic_x.backward_scores(&cx_cache, &neg_inv_m);
        let (_, mut dec_grads) = nets.decoder.backward(&dec_cache1, d_fake.view());

        let (enc, enc_cache) = nets.encoder.forward(x.view());
        let (_, cz_cache) = nets.critic_z.forward(enc.view().insert_axis(Axis(2)));
        let (d_enc_adv, _) = nets.critic_z.backward_scores(&cz_cache, &neg_inv_m);

        let (x_hat, dec_cache2) = nets.decoder.forward(enc.view(), Some(seed2));
        let norms = residual_norms(x.view(), x_hat.view());
        let cycle = norms.sum() / T::of(m as f64);
        let mut d_xhat = &x_hat - &x;
        for (mut d, &nrm) in d_xhat.outer_iter_mut().zip(norms.iter()) {
            let k = if nrm > T::zero() { T::one() / (nrm * T::of(m as f64)) } else { T::zero() };
            d.mapv_inplace(|v| v * k);
        }
        let (d_enc_cyc, dec_grads2) = nets.decoder.backward(&dec_cache2, d_xhat.view());
        accumulate(&mut dec_grads, &dec_grads2);
        let d_enc = d_enc_cyc + d_enc_adv.index_axis(Axis(2), 0);
        let (_, enc_grads) = nets.encoder.backward(&enc_cache, d_enc.view());

        self.opt_g.step(self.nets.decoder.params_mut(), &dec_grads);
        self.opt_e.step(self.nets.encoder.params_mut(), &enc_grads);
        cycle.as_f64()
    }

    /// One full iteration; errors if any loss or parameter became non-finite.
    pub fn iteration(&mut self) -> Result<TrainingRecord> {
        let it = self.iteration;
        self.iteration += 1;
        let stats = self.critic_phase();
        let cycle = self.generator_step();
        let record = TrainingRecord {
            iteration: it,
            vx: stats.vx,
            vz: stats.vz,
            cycle,
            gp_x: stats.gp_x,
            gp_z: stats.gp_z,
        };
        let finite_losses = [record.vx, record.vz, record.cycle, record.gp_x, record.gp_z]
            .iter()
            .all(|v| v.is_finite());
        let n = &self.nets;
        let finite_params = n.encoder.all_finite()
            && n.decoder.all_finite()
            && n.critic_x.all_finite()
            && n.critic_z.all_finite();
        if !finite_losses || !finite_params {
            return Err(Error::Training {
                iteration: it,
                message: format!("non-finite loss or parameter ({record:?})"),
            });
        }
        Ok(record)
    }
}

/// Gradient of `-(mean C(real) - mean C(fake)) + lambda * gp` with respect to
/// the critic parameters; also returns the objective and the penalty.
fn critic_update<T: Real>(
    critic: &ConvCritic<T>,
    real: ArrayView3<'_, T>,
    fake: ArrayView3<'_, T>,
    lambda: T,
    rng: &mut ChaCha8Rng,
) -> (T, T, Grads<T>) {
    let m = real.len_of(Axis(0));
    let inv_m = T::one() / T::of(m as f64);
    let (s_real, c_real) = critic.forward(real);
    let (s_fake, c_fake) = critic.forward(fake);
    let v = (s_real.sum() - s_fake.sum()) * inv_m;
    let (_, mut grads) = critic.backward_scores(&c_real, &Array1::from_elem(m, -inv_m));
    let (_, g_fake) = critic.backward_scores(&c_fake, &Array1::from_elem(m, inv_m));
    accumulate(&mut grads, &g_fake);
    let x_int = interpolate(real, fake, rng);
    let (gp, mut gp_grads) = critic.gradient_penalty_with_grads(x_int.view());
    scale(&mut gp_grads, lambda);
    accumulate(&mut grads, &gp_grads);
    (v, gp, grads)
}

/// Trains the four networks on `windows` and returns them with the per-iteration log.
pub fn train(
    windows: &WindowSet,
    spec: &NetworkSpec,
    latent: &LatentConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<ModelBundle> {
    train_with_observer(windows, spec, latent, cfg, seed, |_| {})
}

/// [`train`] with a callback after every iteration (progress reporting).
pub fn train_with_observer(
    windows: &WindowSet,
    spec: &NetworkSpec,
    latent: &LatentConfig,
    cfg: &TrainConfig,
    seed: u64,
    mut observer: impl FnMut(&TrainingRecord),
) -> Result<ModelBundle> {
    let mut trainer = Trainer::<f32>::new(windows, spec, latent, cfg, seed)?;
    let mut log = TrainingLog::default();
    for _ in 0..cfg.iterations {
        let record = trainer.iteration()?;
        observer(&record);
        log.records.push(record);
    }
    Ok(ModelBundle {
        network_spec: *spec,
        latent: *latent,
        window: crate::signal::WindowConfig {
            window_size: windows.window_size(),
            step_size: windows
                .start_indices
                .get(1)
                .map_or(1, |s| s - windows.start_indices[0]),
        },
        train_config: *cfg,
        seed,
        norm_params: None,
        networks: trainer.into_networks(),
        training_log: log,
    })
}
