use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;
const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(path: &Path, bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: (at + 4) as u64,
            actual: bytes.len() as u64,
        })
}

/// Checks the magic and returns the dimension sizes and the payload.
fn idx_payload<'a>(path: &Path, bytes: &'a [u8], magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(path, bytes, 0)?;
    if found != magic {
        return Err(Error::format(
            path,
            format!("bad IDX magic 0x{found:08x}, expected 0x{magic:08x}"),
        ));
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim)
        .map(|d| be_u32(path, bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndim;
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    if bytes.len() > expected {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after the IDX payload", bytes.len() - expected),
        ));
    }
    Ok((dims, &bytes[header..]))
}

/// Loads an IDX image/label pair as `[N, 1, rows, cols]` in `[0, 1]`.
/// The split is `Train`; see [`Dataset::with_split`].
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let ibytes = read(ip)?;
    let lbytes = read(lp)?;
    let (idims, pixels) = idx_payload(ip, &ibytes, IDX_IMAGES)?;
    let (ldims, label_bytes) = idx_payload(lp, &lbytes, IDX_LABELS)?;
    if idims[0] != ldims[0] {
        return Err(Error::CountMismatch {
            images: idims[0],
            labels: ldims[0],
        });
    }
    let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(10);
    let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let inputs = Tensor::from_parts(vec![idims[0], 1, idims[1], idims[2]], data);
    Dataset::new(inputs, labels, classes, Split::Train)
}

/// Loads CIFAR-10 binary batches as `[N, 3, 32, 32]`, records in file order.
pub fn load_cifar10<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = read(path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::format(
                path,
                format!("length {} is not a positive multiple of {CIFAR_RECORD}", bytes.len()),
            ));
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            if record[0] >= 10 {
                return Err(Error::format(path, format!("label byte {} out of range", record[0])));
            }
            labels.push(record[0] as usize);
            data.extend(record[1..].iter().map(|&p| p as f64 / 255.0));
        }
    }
    let inputs = Tensor::from_parts(vec![labels.len(), 3, 32, 32], data);
    Dataset::new(inputs, labels, 10, Split::Train)
}
