//! IDX binary arrays (the MNIST container format): big-endian magic, one
//! big-endian `u32` per dimension, then unsigned bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl IdxArray {
    /// Raw bytes scaled by 1/255.
    pub fn unit_floats(&self) -> Vec<f64> {
        self.bytes.iter().map(|&b| f64::from(b) / 255.0).collect()
    }

    pub fn is_labels(&self) -> bool {
        self.magic == IDX_LABELS_MAGIC
    }
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxArray> {
    parse_idx(&fs::read(path)?)
}

pub fn parse_idx(buf: &[u8]) -> Result<IdxArray> {
    let word = |at: usize| -> Result<u32> {
        buf.get(at..at + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or(Error::Format {
                offset: at,
                msg: format!("truncated header: file has {} bytes", buf.len()),
            })
    };
    let magic = word(0)?;
    let rank = match magic {
        IDX_LABELS_MAGIC => 1,
        IDX_IMAGES_MAGIC => 3,
        other => {
            return Err(Error::Format {
                offset: 0,
                msg: format!("bad IDX magic {other:#010x}"),
            })
        }
    };
    let dims = (0..rank)
        .map(|i| word(4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * rank;
    let count: usize = dims.iter().product();
    let body = &buf[start.min(buf.len())..];
    if body.len() < count {
        return Err(Error::Format {
            offset: buf.len(),
            msg: format!("truncated data: header promises {count} bytes, {} present", body.len()),
        });
    }
    Ok(IdxArray {
        magic,
        dims,
        bytes: body[..count].to_vec(),
    })
}

#[cfg(test)]
pub(crate) fn encode_idx(magic: u32, dims: &[u32], bytes: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(bytes);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_two_by_two_images() {
        let pixels: Vec<u8> = (0..16).map(|i| (i * 17) as u8).collect();
        let arr = parse_idx(&encode_idx(IDX_IMAGES_MAGIC, &[4, 2, 2], &pixels)).unwrap();
        assert_eq!(arr.dims, vec![4, 2, 2]);
        let f = arr.unit_floats();
        assert_eq!(f.len(), 16);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[15], 1.0);
        assert!((f[1] - 17.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn three_labels() {
        let arr = parse_idx(&encode_idx(IDX_LABELS_MAGIC, &[3], &[7, 0, 9])).unwrap();
        assert!(arr.is_labels());
        assert_eq!(arr.bytes, vec![7, 0, 9]);
    }

    #[test]
    fn wrong_magic() {
        let buf = encode_idx(0x0000_0802, &[1], &[0]);
        assert!(matches!(parse_idx(&buf), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncated_body_reports_offset() {
        let buf = encode_idx(IDX_IMAGES_MAGIC, &[2, 2, 2], &[1, 2, 3]);
        match parse_idx(&buf) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, buf.len()),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_idx(&IDX_IMAGES_MAGIC.to_be_bytes()[..]),
            Err(Error::Format { offset: 4, .. })
        ));
    }
}
