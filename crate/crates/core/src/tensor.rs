//! Dense row-major `f32` grids and the `RBT1` tensor file format.
//!
//! File layout: magic `RBT1`, one `u8` rank, `rank` little-endian `u32`
//! dims, then the values as little-endian `f32`, row-major.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const RBT_MAGIC: &[u8; 4] = b"RBT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tensor values must be finite".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn filled(dims: Vec<usize>, value: f32) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![value; n],
        }
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(usize) -> f32) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(channels, height, width)` of a rank-3 feature map.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.dims[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::Shape(format!(
                "expected (C, H, W), got {:?}",
                self.dims
            ))),
        }
    }

    pub fn at3(&self, c: usize, y: usize, x: usize) -> f32 {
        let (_, h, w) = (self.dims[0], self.dims[1], self.dims[2]);
        self.data[(c * h + y) * w + x]
    }

    pub fn scale(&self, s: f32) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, o: &Tensor) -> f32 {
        self.data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn write_rbt<W: Write>(&self, mut out: W) -> Result<()> {
        let rank = u8::try_from(self.dims.len())
            .map_err(|_| Error::Format(format!("rank {} exceeds 255", self.dims.len())))?;
        out.write_all(RBT_MAGIC)?;
        out.write_all(&[rank])?;
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dim {d} exceeds u32")))?;
            out.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_rbt<R: Read>(mut input: R) -> Result<Tensor> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != RBT_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let mut rank = [0u8; 1];
        input.read_exact(&mut rank)?;
        let mut dims = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            let mut d = [0u8; 4];
            input.read_exact(&mut d)?;
            dims.push(u32::from_le_bytes(d) as usize);
        }
        let n: usize = dims.iter().product();
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != n * 4 {
            return Err(Error::Format(format!(
                "payload holds {} bytes, dims {dims:?} need {}",
                bytes.len(),
                n * 4
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::new(dims, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_rbt(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Tensor> {
        let f = std::fs::File::open(path)?;
        Tensor::read_rbt(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -2.5]).unwrap();
        let mut buf = Vec::new();
        t.write_rbt(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"RBT1\x02");
        assert_eq!(&buf[5..13], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&buf[13..17], &1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 21);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Tensor::read_rbt(&b"RBT2\x00"[..]).is_err());
        let mut buf = Vec::new();
        Tensor::zeros(vec![3]).write_rbt(&mut buf).unwrap();
        buf.pop();
        assert!(Tensor::read_rbt(&buf[..]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![1], vec![f32::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn rbt_round_trip(dims in prop::collection::vec(1usize..5, 0..4), seed in any::<u32>()) {
            let t = Tensor::from_fn(dims, |i| (i as f32 * 0.37 + seed as f32).sin());
            let mut buf = Vec::new();
            t.write_rbt(&mut buf).unwrap();
            prop_assert_eq!(Tensor::read_rbt(&buf[..]).unwrap(), t);
        }
    }
}
