//! On-disk model bundle:
//!
//! ```text
//! <dir>/spec.json          architecture and configs
//! <dir>/encoder.bin        one tensor file per network
//! <dir>/decoder.bin
//! <dir>/critic_x.bin
//! <dir>/critic_z.bin
//! <dir>/training_log.csv   iteration,vx,vz,cycle,gp_x,gp_z
//! ```
//!
//! Tensor files: magic `TSADTNS1`, dtype tag (u8 length + ASCII), u32 tensor
//! count, then per tensor a u32 rank, u64 dims and little-endian values.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::ArrayViewMutD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Parameterized, Real};
use crate::signal::{NormParams, WindowConfig};

use super::{LatentConfig, NetworkSpec, Networks, TrainConfig};

const MAGIC: &[u8; 8] = b"TSADTNS1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub iteration: usize,
    pub vx: f64,
    pub vz: f64,
    pub cycle: f64,
    pub gp_x: f64,
    pub gp_z: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<TrainingRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,vx,vz,cycle,gp_x,gp_z\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration, r.vx, r.vz, r.cycle, r.gp_x, r.gp_z
            ));
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize().enumerate() {
            let r: TrainingRecord = row.map_err(|e| Error::Format {
                path: path.to_owned(),
                line: i + 2,
                message: e.to_string(),
            })?;
            records.push(r);
        }
        Ok(TrainingLog { records })
    }

    /// Mean of `f` over records `[from, to)`.
    pub fn mean_of(&self, from: usize, to: usize, f: impl Fn(&TrainingRecord) -> f64) -> f64 {
        let slice = &self.records[from.min(self.records.len())..to.min(self.records.len())];
        slice.iter().map(f).sum::<f64>() / slice.len().max(1) as f64
    }
}

/// Trained networks together with everything needed to apply them again.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub network_spec: NetworkSpec,
    pub latent: LatentConfig,
    pub window: WindowConfig,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub norm_params: Option<NormParams>,
    pub networks: Networks<f32>,
    pub training_log: TrainingLog,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    format_version: u32,
    dtype: String,
    window_size: usize,
    step_size: usize,
    channels: usize,
    latent_dim: usize,
    network: NetworkSpec,
    train: TrainConfig,
    seed: u64,
    norm_params: Option<NormParams>,
}

impl ModelBundle {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let spec = SpecFile {
            format_version: 1,
            dtype: f32::DTYPE.into(),
            window_size: self.window.window_size,
            step_size: self.window.step_size,
            channels: self.networks.channels(),
            latent_dim: self.latent.latent_dim,
            network: self.network_spec,
            train: self.train_config,
            seed: self.seed,
            norm_params: self.norm_params.clone(),
        };
        let path = dir.join("spec.json");
        let text = serde_json::to_string_pretty(&spec).map_err(|e| Error::json(&path, e))?;
        write_file(&path, text.as_bytes())?;
        let n = &self.networks;
        write_tensors(&dir.join("encoder.bin"), &n.encoder)?;
        write_tensors(&dir.join("decoder.bin"), &n.decoder)?;
        write_tensors(&dir.join("critic_x.bin"), &n.critic_x)?;
        write_tensors(&dir.join("critic_z.bin"), &n.critic_z)?;
        write_file(&dir.join("training_log.csv"), self.training_log.to_csv().as_bytes())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("spec.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let spec: SpecFile = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        if spec.dtype != f32::DTYPE {
            return Err(Error::Model(format!("unsupported dtype {}", spec.dtype)));
        }
        let mut networks = Networks::<f32>::new(
            &spec.network,
            spec.window_size,
            spec.channels,
            spec.latent_dim,
            0,
        );
        read_tensors(&dir.join("encoder.bin"), networks.encoder.params_mut())?;
        read_tensors(&dir.join("decoder.bin"), networks.decoder.params_mut())?;
        read_tensors(&dir.join("critic_x.bin"), networks.critic_x.params_mut())?;
        read_tensors(&dir.join("critic_z.bin"), networks.critic_z.params_mut())?;
        let log_path = dir.join("training_log.csv");
        let log_text = fs::read_to_string(&log_path).map_err(|e| Error::io(&log_path, e))?;
        Ok(ModelBundle {
            network_spec: spec.network,
            latent: LatentConfig {
                latent_dim: spec.latent_dim,
            },
            window: WindowConfig {
                window_size: spec.window_size,
                step_size: spec.step_size,
            },
            train_config: spec.train,
            seed: spec.seed,
            norm_params: spec.norm_params,
            networks,
            training_log: TrainingLog::from_csv(&log_text, &log_path)?,
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn write_tensors<T: Real>(path: &Path, module: &impl Parameterized<T>) -> Result<()> {
    let params = module.params();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(T::DTYPE.len() as u8);
    buf.extend_from_slice(T::DTYPE.as_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in &params {
        buf.extend_from_slice(&(p.ndim() as u32).to_le_bytes());
        for &d in p.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in p.iter() {
            v.write_le(&mut buf);
        }
    }
    write_file(path, &buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Model(format!("{}: truncated tensor file", self.path.display())));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_tensors<T: Real>(path: &Path, params: Vec<ArrayViewMutD<'_, T>>) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let bad = |msg: String| Error::Model(format!("{}: {msg}", path.display()));
    if cur.take(8)? != MAGIC {
        return Err(bad("not a tensor file".into()));
    }
    let tag_len = cur.take(1)?[0] as usize;
    let tag = cur.take(tag_len)?;
    if tag != T::DTYPE.as_bytes() {
        return Err(bad(format!("dtype {:?}, expected {}", String::from_utf8_lossy(tag), T::DTYPE)));
    }
    let count = cur.u32()? as usize;
    if count != params.len() {
        return Err(bad(format!("{count} tensors, expected {}", params.len())));
    }
    for (i, mut p) in params.into_iter().enumerate() {
        let ndim = cur.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(cur.u64()? as usize);
        }
        if dims != p.shape() {
            return Err(bad(format!("tensor {i} has shape {dims:?}, expected {:?}", p.shape())));
        }
        for v in p.iter_mut() {
            *v = T::read_le(cur.take(T::BYTES)?);
        }
    }
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes".into()));
    }
    Ok(())
}
