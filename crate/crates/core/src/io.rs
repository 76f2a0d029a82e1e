//! `hipfield 1 <n>` dumps: one ASCII header line, then `(n+1)^2` little-endian
//! binary64 values, row-major with `j` outer.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{HipError, Result};
use crate::mesh::{Grid, ScalarField};

const MAGIC: &str = "hipfield";
const VERSION: &str = "1";

pub fn write_field<W: Write>(mut out: W, field: &ScalarField) -> Result<()> {
    writeln!(out, "{MAGIC} {VERSION} {}", field.grid().n())?;
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: BufRead>(mut input: R) -> Result<ScalarField> {
    let mut header = Vec::new();
    input.read_until(b'\n', &mut header)?;
    if header.last() != Some(&b'\n') {
        return Err(HipError::Format("missing header line".into()));
    }
    let header =
        std::str::from_utf8(&header[..header.len() - 1]).map_err(|_| HipError::Format("header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split(' ').collect();
    let n = match parts.as_slice() {
        [MAGIC, VERSION, n] => n.parse::<usize>().map_err(|_| HipError::Format(format!("bad grid size {n:?}")))?,
        _ => return Err(HipError::Format(format!("unrecognized header {header:?}"))),
    };
    let grid = Grid::new(n)?;
    let mut bytes = vec![0u8; 8 * grid.node_count()];
    input.read_exact(&mut bytes).map_err(|_| HipError::Format("truncated payload".into()))?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(HipError::Format("trailing bytes after payload".into()));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    ScalarField::new(grid, values)
}

pub fn save_field(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(8).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x - 2.0 * y);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert!(buf.starts_with(b"hipfield 1 8\n"));
        assert_eq!(buf.len(), 13 + 8 * 81);
        // node (1, 0) is the second value
        let second = f64::from_le_bytes(buf[13 + 8..13 + 16].try_into().unwrap());
        assert_eq!(second, f.at(1, 0));
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_field(&b"hipfield 2 8\n"[..]).is_err());
        assert!(read_field(&b"hipfield 1 8\n\0\0"[..]).is_err());
        assert!(read_field(&b"nonsense"[..]).is_err());
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(n in 8usize..20, seed in any::<u64>()) {
            let g = Grid::new(n).unwrap();
            let vals: Vec<f64> = (0..g.node_count())
                .map(|k| f64::from_bits(seed.wrapping_mul(k as u64 + 1).rotate_left(17) & 0x7fef_ffff_ffff_ffff))
                .collect();
            let f = ScalarField::new(g, vals).unwrap();
            let mut buf = Vec::new();
            write_field(&mut buf, &f).unwrap();
            let back = read_field(&buf[..]).unwrap();
            prop_assert!(f.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
