use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::mask::GaussianMask;

const MASK_MAGIC: &[u8; 4] = b"GMSK";
const LABEL_MAGIC: &[u8; 4] = b"GLBL";

fn encode(magic: &[u8; 4], bytes: impl ExactSizeIterator<Item = u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + bytes.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend(bytes);
    out
}

fn decode<'a>(magic: &[u8; 4], data: &'a [u8], ctx: &str) -> Result<&'a [u8]> {
    if data.len() < 8 || &data[..4] != magic {
        return Err(Error::format(
            ctx,
            format!("expected {} magic", String::from_utf8_lossy(magic)),
        ));
    }
    let count = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    if data.len() != 8 + count {
        return Err(Error::format(
            ctx,
            format!(
                "header declares {count} entries but {} bytes follow",
                data.len() - 8
            ),
        ));
    }
    Ok(&data[8..])
}

pub fn write_gaussian_mask(mask: &GaussianMask) -> Vec<u8> {
    encode(MASK_MAGIC, mask.0.iter().map(|&b| u8::from(b)))
}

pub fn read_gaussian_mask(data: &[u8], ctx: &str) -> Result<GaussianMask> {
    let body = decode(MASK_MAGIC, data, ctx)?;
    body.iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::data(
                ctx,
                format!("entry {i} is {other}, expected 0 or 1"),
            )),
        })
        .collect::<Result<Vec<_>>>()
        .map(GaussianMask)
}

pub fn save_gaussian_mask(mask: &GaussianMask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_gaussian_mask(mask))
}

pub fn load_gaussian_mask(path: impl AsRef<Path>) -> Result<GaussianMask> {
    let path = path.as_ref();
    read_gaussian_mask(&read_file(path)?, &path.display().to_string())
}

pub fn write_gaussian_labels(labels: &[u8]) -> Vec<u8> {
    encode(LABEL_MAGIC, labels.iter().copied())
}

pub fn read_gaussian_labels(data: &[u8], ctx: &str) -> Result<Vec<u8>> {
    decode(LABEL_MAGIC, data, ctx).map(<[u8]>::to_vec)
}

pub fn save_gaussian_labels(labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_gaussian_labels(labels))
}

pub fn load_gaussian_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    read_gaussian_labels(&read_file(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_layout() {
        let bytes = write_gaussian_mask(&GaussianMask(vec![true, false, true]));
        assert_eq!(bytes, b"GMSK\x03\x00\x00\x00\x01\x00\x01");
        assert_eq!(write_gaussian_mask(&GaussianMask(vec![])).len(), 8);
        let back = read_gaussian_mask(&bytes, "mem").unwrap();
        assert_eq!(back.0, vec![true, false, true]);
    }

    #[test]
    fn bad_inputs() {
        assert!(read_gaussian_mask(b"GLBL\x00\x00\x00\x00", "mem").is_err());
        assert!(read_gaussian_mask(b"GMSK\x02\x00\x00\x00\x01", "mem").is_err());
        assert!(matches!(
            read_gaussian_mask(b"GMSK\x01\x00\x00\x00\x07", "mem"),
            Err(Error::Data { .. })
        ));
    }

    #[test]
    fn labels_round_trip() {
        let bytes = write_gaussian_labels(&[0, 3, 1]);
        assert_eq!(&bytes[..4], b"GLBL");
        assert_eq!(read_gaussian_labels(&bytes, "mem").unwrap(), vec![0, 3, 1]);
    }
}
