//! Versioned model weight files: an architecture stamp (free-form JSON
//! produced by the model builder) plus named tensors. f32 and f64 payloads
//! interconvert on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::layers::ParamSet;
use super::tensor::{Scalar, Tensor};
use super::NnError;

const MAGIC: &[u8; 4] = b"NNWT";
const VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct ModelFile<T> {
    pub arch: String,
    pub params: ParamSet<T>,
}

pub fn save_params<T: Scalar>(
    path: &Path,
    arch: &str,
    params: &ParamSet<T>,
    as_f64: bool,
) -> Result<(), NnError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[if as_f64 { 1u8 } else { 0u8 }, 0u8])?;
    let arch_bytes = arch.as_bytes();
    w.write_all(&(arch_bytes.len() as u32).to_le_bytes())?;
    w.write_all(arch_bytes)?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.names.iter().zip(&params.tensors) {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u16).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&[t.shape.len() as u8])?;
        for &d in &t.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &t.data {
            if as_f64 {
                w.write_all(&v.to_f64().to_le_bytes())?;
            } else {
                w.write_all(&(v.to_f64() as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn load_params<T: Scalar>(path: &Path) -> Result<ModelFile<T>, NnError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| NnError::Corrupt("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(NnError::Corrupt("bad magic".into()));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    if u16::from_le_bytes(b2) != VERSION {
        return Err(NnError::Corrupt("unsupported version".into()));
    }
    r.read_exact(&mut b2)?;
    let is_f64 = b2[0] == 1;
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let arch_len = u32::from_le_bytes(b4) as usize;
    let mut arch_bytes = vec![0u8; arch_len];
    r.read_exact(&mut arch_bytes)?;
    let arch =
        String::from_utf8(arch_bytes).map_err(|_| NnError::Corrupt("arch not utf-8".into()))?;
    r.read_exact(&mut b4)?;
    let count = u32::from_le_bytes(b4) as usize;
    let mut params = ParamSet::new();
    for _ in 0..count {
        r.read_exact(&mut b2)?;
        let name_len = u16::from_le_bytes(b2) as usize;
        let mut nb = vec![0u8; name_len];
        r.read_exact(&mut nb)?;
        let name =
            String::from_utf8(nb).map_err(|_| NnError::Corrupt("name not utf-8".into()))?;
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let ndim = b1[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            r.read_exact(&mut b4)?;
            shape.push(u32::from_le_bytes(b4) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        if is_f64 {
            let mut b8 = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut b8)
                    .map_err(|_| NnError::Corrupt("truncated tensor data".into()))?;
                data.push(T::from_f64(f64::from_le_bytes(b8)));
            }
        } else {
            for _ in 0..n {
                r.read_exact(&mut b4)
                    .map_err(|_| NnError::Corrupt("truncated tensor data".into()))?;
                data.push(T::from_f64(f32::from_le_bytes(b4) as f64));
            }
        }
        params.alloc(&name, Tensor::from_vec(&shape, data));
    }
    Ok(ModelFile { arch, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nnwt");
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let mut p: ParamSet<f64> = ParamSet::new();
        p.alloc("a.w", Tensor::randn(&[4, 3], 1.0, &mut rng));
        p.alloc("a.b", Tensor::randn(&[1, 3], 1.0, &mut rng));
        save_params(&path, r#"{"kind":"test"}"#, &p, true).unwrap();
        let back: ModelFile<f64> = load_params(&path).unwrap();
        assert_eq!(back.arch, r#"{"kind":"test"}"#);
        assert_eq!(back.params.names, p.names);
        assert_eq!(back.params.tensors, p.tensors);
    }

    #[test]
    fn cross_precision_load_preserves_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nnwt");
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let mut p: ParamSet<f32> = ParamSet::new();
        p.alloc("w", Tensor::randn(&[8, 8], 0.5, &mut rng));
        save_params(&path, "{}", &p, false).unwrap();
        // f32 stored, f64 runtime: values preserved to f32 precision.
        let back: ModelFile<f64> = load_params(&path).unwrap();
        for (a, b) in p.tensors[0].data.iter().zip(&back.params.tensors[0].data) {
            assert_eq!(*a as f64, *b);
        }
    }

    #[test]
    fn corrupted_file_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nnwt");
        std::fs::write(&path, b"NNWT\x01\x00\x00\x00garbage").unwrap();
        assert!(load_params::<f64>(&path).is_err());
        std::fs::write(&path, b"XXXX").unwrap();
        assert!(matches!(load_params::<f64>(&path), Err(NnError::Corrupt(_))));
    }
}
