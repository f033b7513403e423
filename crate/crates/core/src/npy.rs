//! NPY v1.0 tensor files.
//!
//! Tensors are written as little-endian `f8` with `fortran_order: True`, so
//! the stored buffer is exactly the column-major data. C-order files are
//! accepted on read and transposed into column-major layout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub fn read_npy<R: Read>(reader: R) -> Result<DenseTensor> {
    let file = npyz::NpyFile::new(reader)?;
    let shape: Vec<usize> = file.shape().iter().map(|&e| e as usize).collect();
    if shape.is_empty() {
        return Err(Error::shape("zero-dimensional arrays are not tensors"));
    }
    let order = file.order();
    let data: Vec<f64> = file.into_vec()?;
    match order {
        npyz::Order::Fortran => DenseTensor::new(shape, data),
        npyz::Order::C => {
            // a C-order buffer is the column-major buffer of the reversed shape
            let reversed: Vec<usize> = shape.iter().rev().copied().collect();
            let perm: Vec<usize> = (0..shape.len()).rev().collect();
            DenseTensor::new(reversed, data)?.permute(&perm)
        }
    }
}

/// Writes a v1.0 header and the raw column-major buffer, byte-identical to
/// `numpy.save` of a Fortran-ordered `float64` array.
pub fn write_npy<W: Write>(mut writer: W, tensor: &DenseTensor) -> Result<()> {
    writer.write_all(&header_bytes(tensor.shape()))?;
    for v in tensor.data() {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

fn header_bytes(shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [single] => format!("({single},)"),
        _ => format!("({})", shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")),
    };
    let mut text = format!("{{'descr': '<f8', 'fortran_order': True, 'shape': {dims}, }}");
    // magic + version + u16 length + text + newline, padded to the alignment
    let unpadded = MAGIC.len() + 2 + 2 + text.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    text.extend(std::iter::repeat_n(' ', pad));
    text.push('\n');

    let mut out = Vec::with_capacity(10 + text.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(text.len() as u16).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out
}

pub fn load(path: &Path) -> Result<DenseTensor> {
    let f = File::open(path).map_err(|e| io_context(e, path))?;
    read_npy(BufReader::new(f)).map_err(|e| match e {
        Error::Io(io) => io_context(io, path),
        other => other,
    })
}

pub fn save(path: &Path, tensor: &DenseTensor) -> Result<()> {
    let f = File::create(path).map_err(|e| io_context(e, path))?;
    let mut w = BufWriter::new(f);
    write_npy(&mut w, tensor)?;
    w.flush()?;
    Ok(())
}

fn io_context(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
