//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "DGNN"
//! version u32      1
//! count   u32      number of entries
//! entry:  name_len u32, name bytes (UTF-8),
//!         rows u64, cols u64, rows*cols f64 values (LE, row-major)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::dense::Dense;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"DGNN";
const VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, entries: &[(String, &Dense<f64>)]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    f.write_all(MAGIC).map_err(io_err)?;
    f.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    f.write_all(&(entries.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for (name, mat) in entries {
        let bytes = name.as_bytes();
        f.write_all(&(bytes.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.write_all(&(mat.rows() as u64).to_le_bytes())
            .map_err(io_err)?;
        f.write_all(&(mat.cols() as u64).to_le_bytes())
            .map_err(io_err)?;
        for &v in mat.data() {
            f.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    f.flush().map_err(io_err)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Dense<f64>)>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: &str| Error::Validation(format!("checkpoint {}: {msg}", path.display()));
    let mut f = std::io::BufReader::new(fs::File::open(path).map_err(io_err)?);

    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf).map_err(io_err)?;
    if u32::from_le_bytes(u32buf) != VERSION {
        return Err(bad("unsupported version"));
    }
    f.read_exact(&mut u32buf).map_err(io_err)?;
    let count = u32::from_le_bytes(u32buf) as usize;

    let mut out = Vec::with_capacity(count);
    let mut u64buf = [0u8; 8];
    for _ in 0..count {
        f.read_exact(&mut u32buf).map_err(io_err)?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        f.read_exact(&mut name_bytes).map_err(io_err)?;
        let name = String::from_utf8(name_bytes).map_err(|_| bad("name is not UTF-8"))?;
        f.read_exact(&mut u64buf).map_err(io_err)?;
        let rows = u64::from_le_bytes(u64buf) as usize;
        f.read_exact(&mut u64buf).map_err(io_err)?;
        let cols = u64::from_le_bytes(u64buf) as usize;
        let mut data = vec![0.0f64; rows * cols];
        for v in data.iter_mut() {
            f.read_exact(&mut u64buf).map_err(io_err)?;
            *v = f64::from_le_bytes(u64buf);
        }
        out.push((name, Dense::from_vec(rows, cols, data)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = std::env::temp_dir().join("dgnn_ckpt_test");
        let _ = fs::create_dir_all(&dir);
        let path = dir.join("model.ckpt");
        let a = Dense::from_rows(&[vec![1.5, -2.25], vec![0.1, f64::MIN_POSITIVE]]);
        let b = Dense::from_rows(&[vec![3.0]]);
        save_checkpoint(&path, &[("w0".into(), &a), ("w1".into(), &b)]).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "w0");
        for (x, y) in loaded[0].1.data().iter().zip(a.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(loaded[1].1.get(0, 0), 3.0);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = std::env::temp_dir().join("dgnn_ckpt_trunc_test");
        let _ = fs::create_dir_all(&dir);
        let path = dir.join("model.ckpt");
        fs::write(&path, b"DGNN\x01\x00\x00\x00\x05").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
