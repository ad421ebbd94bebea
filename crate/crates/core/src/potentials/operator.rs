use std::io::{Read, Write};

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::BoundaryField;
use crate::error::{BbemError, Result};
use crate::linalg;

const MAGIC: &[u8; 4] = b"BBEM";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    V,
    K,
    Kstar,
    SMixed,
    Custom,
}

impl OperatorKind {
    fn code(self) -> u8 {
        match self {
            OperatorKind::V => 0,
            OperatorKind::K => 1,
            OperatorKind::Kstar => 2,
            OperatorKind::SMixed => 3,
            OperatorKind::Custom => 4,
        }
    }

    fn from_code(c: u8) -> Result<OperatorKind> {
        Ok(match c {
            0 => OperatorKind::V,
            1 => OperatorKind::K,
            2 => OperatorKind::Kstar,
            3 => OperatorKind::SMixed,
            4 => OperatorKind::Custom,
            _ => return Err(BbemError::Mismatch(format!("unknown operator kind {c}"))),
        })
    }
}

/// Dense `3N × 3N` matrix acting on boundary coefficient vectors ordered
/// `(panel, component)`.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: Mat<f64>,
    pub kind: OperatorKind,
    /// Panel areas of the collocation mesh.
    pub weights: Vec<f64>,
}

impl DenseOperator {
    pub fn new(matrix: Mat<f64>, kind: OperatorKind, weights: Vec<f64>) -> Result<DenseOperator> {
        let n = 3 * weights.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(BbemError::Mismatch(format!(
                "{}x{} matrix for {} panels",
                matrix.nrows(),
                matrix.ncols(),
                weights.len()
            )));
        }
        Ok(DenseOperator { matrix, kind, weights })
    }

    pub fn panels(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, field: &BoundaryField) -> Result<BoundaryField> {
        if field.len() != self.panels() {
            return Err(BbemError::Mismatch(format!("operator on {} panels applied to {}", self.panels(), field.len())));
        }
        BoundaryField::from_flat(&linalg::matvec(&self.matrix, &field.to_flat()), self.weights.clone())
    }

    /// `a·I + b·self`.
    pub fn shifted(&self, a: f64, b: f64, kind: OperatorKind) -> DenseOperator {
        let n = self.dim();
        let matrix = Mat::from_fn(n, n, |i, j| b * self.matrix[(i, j)] + if i == j { a } else { 0.0 });
        DenseOperator { matrix, kind, weights: self.weights.clone() }
    }

    /// Transpose with respect to the weighted pairing:
    /// `T_{(i,a),(j,b)} = (w_j / w_i) · A_{(j,b),(i,a)}`.
    pub fn weighted_transpose(&self, weights: &[f64], kind: OperatorKind) -> Result<DenseOperator> {
        if weights.len() != self.panels() {
            return Err(BbemError::Mismatch(format!("{} weights for {} panels", weights.len(), self.panels())));
        }
        let n = self.dim();
        let matrix = Mat::from_fn(n, n, |r, c| weights[c / 3] / weights[r / 3] * self.matrix[(c, r)]);
        Ok(DenseOperator { matrix, kind, weights: weights.to_vec() })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.panels() as u32).to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        let n = self.dim();
        let mut buf = Vec::with_capacity(8 * n);
        for i in 0..n {
            buf.clear();
            for j in 0..n {
                buf.extend_from_slice(&self.matrix[(i, j)].to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads the binary layout written by [`DenseOperator::write_to`]. The
    /// weights are not part of the format and must be supplied.
    pub fn read_from(mut r: impl Read, weights: Vec<f64>) -> Result<DenseOperator> {
        let mut head = [0u8; 13];
        r.read_exact(&mut head)?;
        if &head[0..4] != MAGIC {
            return Err(BbemError::Mismatch("bad operator magic".into()));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(BbemError::Mismatch(format!("unsupported operator version {version}")));
        }
        let panels = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let kind = OperatorKind::from_code(head[12])?;
        if panels != weights.len() {
            return Err(BbemError::Mismatch(format!("file has {panels} panels, {} weights given", weights.len())));
        }
        let n = 3 * panels;
        let mut bytes = vec![0u8; 8 * n * n];
        r.read_exact(&mut bytes)?;
        let matrix = Mat::from_fn(n, n, |i, j| {
            let k = 8 * (i * n + j);
            f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap())
        });
        DenseOperator::new(matrix, kind, weights)
    }
}
