//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `EIRM`, `u32` format version, `u32` layer
//! count, then per layer `u32` in, `u32` out, `u8` activation code, `f64` l2,
//! `f64` dropout, `in·out` row-major `f64` weights and `out` `f64` biases.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::nn::layer::{Activation, DenseLayer};
use crate::nn::mlp::Mlp;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EIRM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_mlp<W: Write>(net: &Mlp, w: &mut W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for l in net.layers() {
        w.write_all(&(l.input_dim() as u32).to_le_bytes())?;
        w.write_all(&(l.output_dim() as u32).to_le_bytes())?;
        w.write_all(&[l.activation.code()])?;
        w.write_all(&l.l2.to_le_bytes())?;
        w.write_all(&l.dropout.to_le_bytes())?;
        for v in l.weights.data().iter().chain(&l.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads one network. Errors carry the byte offset of the failure.
pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    let mut rd = Reader { inner: r, offset: 0 };
    let magic = rd.bytes::<4>()?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad checkpoint magic {magic:?}"),
        });
    }
    let version = rd.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported checkpoint version {version}"),
        });
    }
    let n_layers = rd.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let input = rd.u32()? as usize;
        let out = rd.u32()? as usize;
        let at = rd.offset;
        let code = rd.bytes::<1>()?[0];
        let activation = Activation::from_code(code).ok_or(Error::Format {
            offset: at,
            msg: format!("unknown activation code {code}"),
        })?;
        let l2 = rd.f64()?;
        let dropout = rd.f64()?;
        let mut weights = Vec::with_capacity(input * out);
        for _ in 0..input * out {
            weights.push(rd.f64()?);
        }
        let mut bias = Vec::with_capacity(out);
        for _ in 0..out {
            bias.push(rd.f64()?);
        }
        layers.push(DenseLayer {
            weights: Matrix::from_vec(input, out, weights)?,
            bias,
            activation,
            l2,
            dropout,
        });
    }
    Mlp::from_layers(layers)
}

pub(crate) struct Reader<'a, R> {
    pub inner: &'a mut R,
    pub offset: usize,
}

impl<R: Read> Reader<'_, R> {
    pub fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format {
            offset: self.offset,
            msg: format!("truncated input: {e}"),
        })?;
        self.offset += N;
        Ok(buf)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let at = self.offset;
        let v = f64::from_le_bytes(self.bytes()?);
        if !v.is_finite() {
            return Err(Error::Format {
                offset: at,
                msg: "non-finite value".into(),
            });
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;
    use crate::nn::mlp_layers;

    #[test]
    fn round_trip() {
        let mut rng = Rng::new(1);
        let net = Mlp::new(5, &mlp_layers(&[4, 3], 2, Activation::Elu, 1e-3, 0.5), &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&net, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"EIRM");
        let back = read_mlp(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn truncation_reports_offset() {
        let net = Mlp::zeros(2, &mlp_layers(&[], 2, Activation::Linear, 0.0, 0.0)).unwrap();
        let mut buf = Vec::new();
        write_mlp(&net, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        match read_mlp(&mut buf.as_slice()) {
            Err(Error::Format { offset, .. }) => assert!(offset > 12),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(matches!(
            read_mlp(&mut &b"NOPE\x01\0\0\0"[..]),
            Err(Error::Format { offset: 0, .. })
        ));
    }
}
