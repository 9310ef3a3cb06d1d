use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Version tag written into every checkpoint.
pub const FORMAT_VERSION: u32 = 1;

/// One named tensor with its shape and row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorRecord {
    pub fn vector(name: String, data: &[f64]) -> Self {
        TensorRecord {
            name,
            shape: alloc::vec![data.len()],
            data: data.to_vec(),
        }
    }

    pub fn matrix(name: String, m: &Matrix) -> Self {
        TensorRecord {
            name,
            shape: alloc::vec![m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        match self.shape.as_slice() {
            [r, c] => Matrix::from_vec(*r, *c, self.data.clone()),
            _ => Err(Error::Parameter(alloc::format!(
                "tensor `{}` is not two-dimensional",
                self.name
            ))),
        }
    }

    pub fn to_vector(&self, len: usize) -> Result<Vec<f64>> {
        if self.shape.as_slice() != [len] || self.data.len() != len {
            return Err(Error::dim("tensor vector", len, self.data.len()));
        }
        Ok(self.data.clone())
    }
}

pub(crate) fn find<'a>(records: &'a [TensorRecord], name: &str) -> Result<&'a TensorRecord> {
    records
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::Parameter(alloc::format!("checkpoint is missing tensor `{name}`")))
}

/// FNV-1a over tensor names, shapes and the exact bit patterns of the values.
///
/// Any single-bit change in any parameter changes the checksum with
/// overwhelming probability; used to assert that frozen models stay frozen.
pub fn content_checksum(records: &[TensorRecord]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    for r in records {
        eat(r.name.as_bytes());
        for s in &r.shape {
            eat(&(*s as u64).to_le_bytes());
        }
        for v in &r.data {
            eat(&v.to_bits().to_le_bytes());
        }
    }
    h
}
