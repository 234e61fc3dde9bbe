//! Binary checkpoint format, real32 little-endian.
//!
//! Layout:
//! ```text
//! magic           b"DJPG1"
//! version         u8 = 1
//! config          use_intra u8, use_abs u8, use_bn u8,
//!                 activation u8 (0 tanh, 1 relu), pooling u8 (0 avg, 1 max),
//!                 fc1_units u32, grid_h u32, grid_w u32, subbands u32,
//!                 bn_tau f64, bn_xi f64
//! metadata        epoch u32, val_acc f64 (NaN when absent), seed u64,
//!                 qf1 i32 (-1 when absent), qf2 i32 (-1 when absent)
//! tensor count    u32
//! tensor record   name_len u32, name bytes (UTF-8),
//!                 rank u32, extents u32 x rank, values f32 LE
//! ```
//! Records appear in a fixed traversal order (branches, then the two fully
//! connected layers); names are checked on load. Batch-norm moving
//! statistics and the per-layer batch counter are stored alongside the
//! learnable buffers so a loaded model scores identically to the saved one.

use std::io::{Read, Write};

use super::{branch_spec, build_network, Activation, ModelParams, NetworkConfig, Pooling, TrainConfig};
use crate::tensor::Scalar;

const MAGIC: &[u8; 5] = b"DJPG1";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: u32,
    pub val_acc: Option<f64>,
    pub seed: u64,
    pub qf1: Option<u32>,
    pub qf2: Option<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_record<W: Write, T: Scalar>(
    w: &mut W,
    name: &str,
    extents: &[usize],
    values: &[T],
) -> std::io::Result<()> {
    put_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    put_u32(w, extents.len() as u32)?;
    for &e in extents {
        put_u32(w, e as u32)?;
    }
    debug_assert_eq!(extents.iter().product::<usize>(), values.len());
    for v in values {
        w.write_all(&(v.to_f64().unwrap() as f32).to_le_bytes())?;
    }
    Ok(())
}

fn record_names(cfg: &NetworkConfig) -> Vec<(String, Vec<usize>)> {
    let mut names = Vec::new();
    for k in super::branch_indices(cfg) {
        for (bi, (ks, d1, d2, _)) in branch_spec(cfg, k).into_iter().enumerate() {
            names.push((format!("b{k}.c{bi}.kernels"), vec![ks, ks, d1, d2]));
            names.push((format!("b{k}.c{bi}.bias"), vec![d2]));
            if cfg.use_bn {
                for field in ["gamma", "beta", "mmean", "mvar", "nbatch"] {
                    let len = if field == "nbatch" { 1 } else { d2 };
                    names.push((format!("b{k}.c{bi}.{field}"), vec![len]));
                }
            }
        }
    }
    let flen = super::feature_len(cfg);
    names.push(("fc1.w".into(), vec![flen, cfg.fc1_units]));
    names.push(("fc1.b".into(), vec![cfg.fc1_units]));
    names.push(("fc2.w".into(), vec![cfg.fc1_units, 2]));
    names.push(("fc2.b".into(), vec![2]));
    names
}

pub fn save_checkpoint<W: Write, T: Scalar>(
    w: &mut W,
    params: &ModelParams<T>,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    let cfg = &params.cfg;
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&[
        cfg.use_intra_branches as u8,
        cfg.use_abs as u8,
        cfg.use_bn as u8,
        matches!(cfg.activation, Activation::Relu) as u8,
        matches!(cfg.pooling, Pooling::Max) as u8,
    ])?;
    put_u32(w, cfg.fc1_units as u32)?;
    put_u32(w, cfg.input_grid.0 as u32)?;
    put_u32(w, cfg.input_grid.1 as u32)?;
    put_u32(w, cfg.subbands as u32)?;
    // tau/xi live on the batch-norm states; all layers share one setting
    let (tau, xi) = params
        .branches
        .first()
        .and_then(|b| b.blocks.first())
        .and_then(|b| b.bn.as_ref())
        .map(|bn| (bn.tau.to_f64().unwrap(), bn.xi.to_f64().unwrap()))
        .unwrap_or((0.999, 0.01));
    put_f64(w, tau)?;
    put_f64(w, xi)?;

    put_u32(w, meta.epoch)?;
    put_f64(w, meta.val_acc.unwrap_or(f64::NAN))?;
    w.write_all(&meta.seed.to_le_bytes())?;
    w.write_all(&meta.qf1.map_or(-1i32, |v| v as i32).to_le_bytes())?;
    w.write_all(&meta.qf2.map_or(-1i32, |v| v as i32).to_le_bytes())?;

    let names = record_names(cfg);
    put_u32(w, names.len() as u32)?;
    let mut it = names.iter();
    let mut next = || it.next().expect("record name list too short");
    for branch in &params.branches {
        for block in &branch.blocks {
            let (name, ext) = next();
            put_record(w, name, ext, block.conv.kernels.data())?;
            let (name, ext) = next();
            put_record(w, name, ext, &block.conv.bias)?;
            if let Some(bn) = &block.bn {
                for field in [&bn.gamma, &bn.beta, &bn.moving_mean, &bn.moving_var] {
                    let (name, ext) = next();
                    put_record(w, name, ext, field)?;
                }
                let (name, ext) = next();
                put_record(w, name, ext, &[T::from_u64(bn.batches_seen).unwrap()])?;
            }
        }
    }
    let (name, ext) = next();
    put_record(w, name, ext, &params.fc1.weights)?;
    let (name, ext) = next();
    put_record(w, name, ext, &params.fc1.bias)?;
    let (name, ext) = next();
    put_record(w, name, ext, &params.fc2.weights)?;
    let (name, ext) = next();
    put_record(w, name, ext, &params.fc2.bias)?;
    Ok(())
}

struct Reader<R: Read> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let mut buf = [0u8; N];
        self.r.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn record(&mut self, want_name: &str, want_ext: &[usize]) -> Result<Vec<f32>, CheckpointError> {
        let nlen = self.u32()? as usize;
        let mut name = vec![0u8; nlen];
        self.r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| CheckpointError::Invalid("non-UTF-8 record name".into()))?;
        if name != want_name {
            return Err(CheckpointError::Invalid(format!(
                "record {name:?} where {want_name:?} expected"
            )));
        }
        let rank = self.u32()? as usize;
        let mut ext = Vec::with_capacity(rank);
        for _ in 0..rank {
            ext.push(self.u32()? as usize);
        }
        if ext != want_ext {
            return Err(CheckpointError::Invalid(format!(
                "record {name}: extents {ext:?}, expected {want_ext:?}"
            )));
        }
        let n: usize = ext.iter().product();
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            vals.push(f32::from_le_bytes(self.bytes()?));
        }
        Ok(vals)
    }
}

pub fn load_checkpoint<R: Read>(
    r: R,
) -> Result<(ModelParams<f32>, CheckpointMeta), CheckpointError> {
    let mut r = Reader { r };
    if &r.bytes::<5>()? != MAGIC {
        return Err(CheckpointError::Invalid("bad magic".into()));
    }
    let [version] = r.bytes::<1>()?;
    if version != VERSION {
        return Err(CheckpointError::Invalid(format!(
            "unsupported version {version}"
        )));
    }
    let flags = r.bytes::<5>()?;
    let cfg = NetworkConfig {
        use_intra_branches: flags[0] != 0,
        use_abs: flags[1] != 0,
        use_bn: flags[2] != 0,
        activation: if flags[3] != 0 {
            Activation::Relu
        } else {
            Activation::Tanh
        },
        pooling: if flags[4] != 0 {
            Pooling::Max
        } else {
            Pooling::Avg
        },
        fc1_units: r.u32()? as usize,
        input_grid: (r.u32()? as usize, r.u32()? as usize),
        subbands: r.u32()? as usize,
    };
    let tau = r.f64()?;
    let xi = r.f64()?;

    let epoch = r.u32()?;
    let val_acc = r.f64()?;
    let seed = u64::from_le_bytes(r.bytes()?);
    let qf1 = i32::from_le_bytes(r.bytes()?);
    let qf2 = i32::from_le_bytes(r.bytes()?);
    let meta = CheckpointMeta {
        epoch,
        val_acc: (!val_acc.is_nan()).then_some(val_acc),
        seed,
        qf1: (qf1 >= 0).then_some(qf1 as u32),
        qf2: (qf2 >= 0).then_some(qf2 as u32),
    };

    let names = record_names(&cfg);
    let count = r.u32()? as usize;
    if count != names.len() {
        return Err(CheckpointError::Invalid(format!(
            "{count} tensor records, expected {}",
            names.len()
        )));
    }

    // materialize the structure, then fill it in record order
    let mut params = build_network::<f32>(
        &cfg,
        &TrainConfig {
            bn_tau: tau,
            bn_xi: xi,
            seed,
            ..TrainConfig::default()
        },
    );
    let mut it = names.iter();
    let mut next = || {
        let (n, e) = it.next().expect("record name list too short");
        (n.as_str(), e.as_slice())
    };
    for branch in &mut params.branches {
        for block in &mut branch.blocks {
            let (n, e) = next();
            block.conv.kernels.data_mut().copy_from_slice(&r.record(n, e)?);
            let (n, e) = next();
            block.conv.bias.copy_from_slice(&r.record(n, e)?);
            if let Some(bn) = &mut block.bn {
                for field in [
                    &mut bn.gamma,
                    &mut bn.beta,
                    &mut bn.moving_mean,
                    &mut bn.moving_var,
                ] {
                    let (n, e) = next();
                    field.copy_from_slice(&r.record(n, e)?);
                }
                let (n, e) = next();
                bn.batches_seen = r.record(n, e)?[0] as u64;
            }
        }
    }
    let (n, e) = next();
    params.fc1.weights.copy_from_slice(&r.record(n, e)?);
    let (n, e) = next();
    params.fc1.bias.copy_from_slice(&r.record(n, e)?);
    let (n, e) = next();
    params.fc2.weights.copy_from_slice(&r.record(n, e)?);
    let (n, e) = next();
    params.fc2.bias.copy_from_slice(&r.record(n, e)?);
    Ok((params, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{random_batch, tiny_cfg};
    use crate::model::{forward_infer, forward_train};

    fn roundtrip(cfg: &NetworkConfig) -> (Vec<u8>, ModelParams<f32>, CheckpointMeta) {
        let tc = TrainConfig::default();
        let mut params = build_network::<f32>(cfg, &tc);
        // make the moving statistics non-trivial
        let (batch, _) = random_batch(cfg, 4, 2);
        let batch: Vec<_> = batch.iter().map(|t| t.cast::<f32>()).collect();
        forward_train(&mut params, &batch).unwrap();
        let meta = CheckpointMeta {
            epoch: 57,
            val_acc: Some(0.9675),
            seed: tc.seed,
            qf1: Some(60),
            qf2: Some(95),
        };
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &params, &meta).unwrap();
        (buf, params, meta)
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let (buf, _, meta) = roundtrip(&tiny_cfg());
        let (loaded, meta2) = load_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(meta, meta2);
        let mut buf2 = Vec::new();
        save_checkpoint(&mut buf2, &loaded, &meta2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn loaded_model_scores_identically() {
        let cfg = tiny_cfg();
        let (buf, params, _) = roundtrip(&cfg);
        let (loaded, _) = load_checkpoint(buf.as_slice()).unwrap();
        let (batch, _) = random_batch(&cfg, 3, 7);
        for t in &batch {
            let t = t.cast::<f32>();
            assert_eq!(
                forward_infer(&params, &t).unwrap(),
                forward_infer(&loaded, &t).unwrap()
            );
        }
    }

    #[test]
    fn ablated_configs_round_trip() {
        for cfg in [
            NetworkConfig {
                use_bn: false,
                ..tiny_cfg()
            },
            NetworkConfig {
                use_intra_branches: false,
                activation: Activation::Relu,
                pooling: Pooling::Max,
                use_abs: false,
                ..tiny_cfg()
            },
        ] {
            let (buf, _, _) = roundtrip(&cfg);
            let (loaded, _) = load_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(loaded.cfg, cfg);
        }
    }

    #[test]
    fn corrupt_streams_rejected() {
        let (buf, _, _) = roundtrip(&tiny_cfg());
        // bad magic
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(load_checkpoint(bad.as_slice()).is_err());
        // bad version
        let mut bad = buf.clone();
        bad[5] = 9;
        assert!(load_checkpoint(bad.as_slice()).is_err());
        // truncation
        assert!(load_checkpoint(&buf[..buf.len() / 2]).is_err());
    }

    #[test]
    fn missing_val_acc_and_qfs_round_trip() {
        let cfg = tiny_cfg();
        let params = build_network::<f32>(&cfg, &TrainConfig::default());
        let meta = CheckpointMeta {
            epoch: 1,
            val_acc: None,
            seed: 3,
            qf1: None,
            qf2: None,
        };
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &params, &meta).unwrap();
        let (_, meta2) = load_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(meta, meta2);
    }
}
