//! Binary checkpoint of a [`MatrixPair`]: a little-endian `u64` dimension,
//! then the entries of `A` and of `B` in row-major order, each as
//! little-endian `f64` real and imaginary parts.

use std::io::{Read, Write};

use crate::error::MatrixError;
use crate::matrix::{ComplexMatrix, HermitianMatrix, MatrixPair};
use crate::scalar::Real;

fn io_err(e: std::io::Error) -> MatrixError {
    MatrixError::Checkpoint(e.to_string())
}

pub fn write_pair<T: Real, W: Write>(x: &MatrixPair<T>, mut w: W) -> Result<(), MatrixError> {
    let n = x.dim();
    w.write_all(&(n as u64).to_le_bytes()).map_err(io_err)?;
    let mut buf = Vec::with_capacity(16 * n * n);
    for m in [&x.a, &x.b] {
        buf.clear();
        for (re, im) in m.re().iter().zip(m.im()) {
            buf.extend_from_slice(&re.as_f64().to_le_bytes());
            buf.extend_from_slice(&im.as_f64().to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_pair<T: Real, R: Read>(mut r: R) -> Result<MatrixPair<T>, MatrixError> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(io_err)?;
    let n = u64::from_le_bytes(word) as usize;
    if n == 0 || n > 1 << 16 {
        return Err(MatrixError::Checkpoint(format!(
            "implausible dimension {n}"
        )));
    }
    let mut read_matrix = || -> Result<HermitianMatrix<T>, MatrixError> {
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut word).map_err(io_err)?;
            re.push(T::of(f64::from_le_bytes(word)));
            r.read_exact(&mut word).map_err(io_err)?;
            im.push(T::of(f64::from_le_bytes(word)));
        }
        HermitianMatrix::try_new(ComplexMatrix::from_parts(n, re, im)?)
    };
    let a = read_matrix()?;
    let b = read_matrix()?;
    MatrixPair::new(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = MatrixPair::<f64>::sample_momentum(5, &mut rng);
        let mut bytes = Vec::new();
        write_pair(&x, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 2 * 25 * 16);
        assert_eq!(&bytes[..8], &5u64.to_le_bytes());
        let back: MatrixPair<f64> = read_pair(&bytes[..]).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn truncated_input_fails() {
        let x = MatrixPair::<f64>::zeros(3);
        let mut bytes = Vec::new();
        write_pair(&x, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(read_pair::<f64, _>(&bytes[..]).is_err());
    }
}
