//! Network input assembly: the first 20 AC sub-bands of a coefficient image
//! in zigzag order, branch slicing, and a binary tensor dump for debugging.

use std::io::{Read, Write};

use crate::jpeg::consts::ZIGZAG;
use crate::jpeg::CoeffImage;
use crate::tensor::{Dtype, Scalar, Tensor, TensorError};

/// Number of AC sub-bands fed to the network.
pub const SUBBANDS: usize = 20;

/// Zigzag index -> (row, col) position in the 8x8 grid.
pub fn zigzag_position(k: usize) -> Result<(usize, usize), TensorError> {
    if k > 63 {
        return Err(TensorError::ShapeMismatch(format!(
            "zigzag index {k} out of 0..=63"
        )));
    }
    let nat = ZIGZAG[k];
    Ok((nat / 8, nat % 8))
}

/// Build the x*y*20 sub-band tensor: values[i][j][k-1] is the quantized
/// coefficient at zigzag index k of block (i, j). DC and sub-bands beyond 20
/// are discarded.
pub fn assemble_subbands<T: Scalar>(c: &CoeffImage) -> Tensor<T> {
    assemble_subbands_with(c, false)
}

/// As [`assemble_subbands`], optionally multiplying each coefficient by its
/// quantization step (non-default comparison mode).
pub fn assemble_subbands_with<T: Scalar>(c: &CoeffImage, dequantized: bool) -> Tensor<T> {
    let (x, y) = (c.blocks_high, c.blocks_wide);
    let mut t = Tensor::zeros(&[x, y, SUBBANDS]);
    for i in 0..x {
        for j in 0..y {
            let block = c.block(i, j);
            for k in 0..SUBBANDS {
                let nat = ZIGZAG[k + 1]; // skip DC
                let mut v = block[nat] as f64;
                if dequantized {
                    v *= c.quant.steps[nat] as f64;
                }
                t.set3(i, j, k, T::from_f64(v).unwrap());
            }
        }
    }
    t
}

/// Input of the k-th branch: the k-th depth slice for k in 1..=20, the whole
/// tensor for k = 21.
pub fn slice_branch_input<T: Scalar>(t: &Tensor<T>, k: usize) -> Result<Tensor<T>, TensorError> {
    let (x, y, z) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    match k {
        1..=20 => {
            if k > z {
                return Err(TensorError::ShapeMismatch(format!(
                    "branch {k} but tensor depth {z}"
                )));
            }
            let mut out = Tensor::zeros(&[x, y, 1]);
            for i in 0..x {
                for j in 0..y {
                    out.set3(i, j, 0, t.get3(i, j, k - 1));
                }
            }
            Ok(out)
        }
        21 => Ok(t.clone()),
        _ => Err(TensorError::ShapeMismatch(format!(
            "branch index {k} out of 1..=21"
        ))),
    }
}

const DUMP_MAGIC: &[u8; 4] = b"SBT1";

/// Write the tensor dump: magic, x/y/z as u32 LE, dtype byte (4 or 8), then
/// row-major values little-endian.
pub fn write_tensor_dump<T: Scalar, W: Write>(t: &Tensor<T>, w: &mut W) -> std::io::Result<()> {
    w.write_all(DUMP_MAGIC)?;
    for &e in t.shape() {
        w.write_all(&(e as u32).to_le_bytes())?;
    }
    match T::DTYPE {
        Dtype::Real32 => {
            w.write_all(&[4u8])?;
            for &v in t.data() {
                w.write_all(&(v.to_f32().unwrap()).to_le_bytes())?;
            }
        }
        Dtype::Real64 => {
            w.write_all(&[8u8])?;
            for &v in t.data() {
                w.write_all(&(v.to_f64().unwrap()).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_tensor_dump<T: Scalar, R: Read>(r: &mut R) -> std::io::Result<Tensor<T>> {
    use std::io::{Error, ErrorKind};
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::new(ErrorKind::InvalidData, "bad tensor dump magic"));
    }
    let mut shape = [0usize; 3];
    for s in &mut shape {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *s = u32::from_le_bytes(b) as usize;
    }
    let mut dt = [0u8; 1];
    r.read_exact(&mut dt)?;
    let n = shape.iter().product::<usize>();
    let mut data = Vec::with_capacity(n);
    match dt[0] {
        4 => {
            for _ in 0..n {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                data.push(T::from_f64(f32::from_le_bytes(b) as f64).unwrap());
            }
        }
        8 => {
            for _ in 0..n {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(T::from_f64(f64::from_le_bytes(b)).unwrap());
            }
        }
        d => {
            return Err(Error::new(
                ErrorKind::InvalidData,
                format!("bad dtype byte {d}"),
            ))
        }
    }
    Ok(Tensor::from_vec(&shape, data))
}
