//! Lattice bases, Gram matrices, duals, and membership plumbing.

use crate::error::{Error, Result};
use crate::mat::Mat;
use serde::{Deserialize, Serialize};

/// A full-rank lattice in R^d, stored as d ordered column vectors together
/// with the cached covolume |det|.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BasisJson", into = "BasisJson")]
pub struct LatticeBasis {
    dim: usize,
    columns: Vec<Vec<f64>>,
    covolume: f64,
}

/// On-disk form: `{"dim": d, "columns": [[...], ...]}` with the column
/// vectors listed outermost.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisJson {
    pub dim: usize,
    pub columns: Vec<Vec<f64>>,
}

impl TryFrom<BasisJson> for LatticeBasis {
    type Error = Error;
    fn try_from(b: BasisJson) -> Result<Self> {
        if b.dim == 0 || b.columns.len() != b.dim || b.columns.iter().any(|c| c.len() != b.dim) {
            return Err(Error::InvalidRange(format!(
                "basis file must hold {0} columns of length {0}",
                b.dim
            )));
        }
        LatticeBasis::new(b.columns)
    }
}

impl From<LatticeBasis> for BasisJson {
    fn from(b: LatticeBasis) -> BasisJson {
        BasisJson {
            dim: b.dim,
            columns: b.columns,
        }
    }
}

/// Scale-invariant singularity threshold: 1e-10 * (max column norm)^d.
fn rank_tolerance(columns: &[Vec<f64>]) -> f64 {
    let max_norm = columns
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    1e-10 * max_norm.powi(columns.len() as i32)
}

impl LatticeBasis {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let dim = columns.len();
        if dim == 0 || columns.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidRange(
                "basis needs d columns of length d with d >= 1".into(),
            ));
        }
        if columns.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidRange("basis entries must be finite".into()));
        }
        let det = Mat::from_cols(&columns).det();
        let tol = rank_tolerance(&columns);
        if !(det.abs() > tol) {
            return Err(Error::DegenerateBasis {
                det: det.abs(),
                tol,
            });
        }
        Ok(LatticeBasis {
            dim,
            columns,
            covolume: det.abs(),
        })
    }

    pub fn from_matrix(m: &Mat) -> Result<Self> {
        LatticeBasis::new(m.cols())
    }

    pub fn standard(dim: usize) -> Self {
        LatticeBasis::from_matrix(&Mat::identity(dim)).expect("identity basis")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// |det| of the column matrix, cached at construction.
    pub fn covolume(&self) -> f64 {
        self.covolume
    }

    /// The column matrix (basis vectors as columns).
    pub fn matrix(&self) -> Mat {
        Mat::from_cols(&self.columns)
    }

    pub fn gram(&self) -> GramMatrix {
        let m = self.matrix();
        GramMatrix::from_basis_matrix(&m)
    }

    /// Embeds an integer coefficient vector.
    pub fn embed(&self, coeffs: &[i64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.dim);
        let mut v = vec![0.0; self.dim];
        for (j, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let cf = c as f64;
            for (vi, bi) in v.iter_mut().zip(&self.columns[j]) {
                *vi += cf * bi;
            }
        }
        v
    }

    pub fn vector(&self, coeffs: Vec<i64>) -> LatticeVector {
        let embedding = self.embed(&coeffs);
        let norm = embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        LatticeVector {
            coeffs,
            embedding,
            norm,
        }
    }

    /// The dual lattice: inverse-transpose basis, so that `<b_i, b*_j> = δ_ij`.
    pub fn dual(&self) -> Result<LatticeBasis> {
        let inv = self.matrix().inverse().ok_or(Error::DegenerateBasis {
            det: 0.0,
            tol: rank_tolerance(&self.columns),
        })?;
        LatticeBasis::from_matrix(&inv.transpose())
    }

    /// Left-multiplies every basis vector by `m`.
    pub fn transform(&self, m: &Mat) -> Result<LatticeBasis> {
        LatticeBasis::from_matrix(&m.mul(&self.matrix()))
    }

    /// Applies an integer change of basis (columns of `u` are coefficient
    /// vectors); the result spans the same lattice when det(u) = +-1.
    pub fn change_basis(&self, u: &[Vec<i64>]) -> Result<LatticeBasis> {
        let cols = u.iter().map(|c| self.embed(c)).collect();
        LatticeBasis::new(cols)
    }

    pub fn scaled(&self, s: f64) -> Result<LatticeBasis> {
        LatticeBasis::new(
            self.columns
                .iter()
                .map(|c| c.iter().map(|x| s * x).collect())
                .collect(),
        )
    }

    /// Whether `other` spans the same lattice, decided through the
    /// unimodularity of the change-of-basis matrix B^{-1} B'.
    pub fn same_lattice(&self, other: &LatticeBasis) -> bool {
        if self.dim != other.dim {
            return false;
        }
        match self.matrix().inverse() {
            Some(inv) => is_unimodular_integer_matrix(&inv.mul(&other.matrix())),
            None => false,
        }
    }
}

/// A lattice point carried with its integer coordinates, its embedding, and
/// its Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeVector {
    pub coeffs: Vec<i64>,
    pub embedding: Vec<f64>,
    pub norm: f64,
}

/// Symmetric positive-definite Gram matrix of a basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GramMatrix {
    dim: usize,
    entries: Mat,
}

impl GramMatrix {
    pub fn from_basis_matrix(m: &Mat) -> GramMatrix {
        let mut g = m.transpose().mul(m);
        // symmetrize away the last rounding bit
        for i in 0..g.dim() {
            for j in i + 1..g.dim() {
                let s = 0.5 * (g[(i, j)] + g[(j, i)]);
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        GramMatrix {
            dim: m.dim(),
            entries: g,
        }
    }

    pub fn new(entries: Mat) -> Result<GramMatrix> {
        let dim = entries.dim();
        for i in 0..dim {
            for j in 0..dim {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidRange(
                        "Gram matrix must be symmetric to 1e-12".into(),
                    ));
                }
            }
        }
        let g = GramMatrix { dim, entries };
        if g.min_eigenvalue() <= 0.0 {
            return Err(Error::InvalidRange(
                "Gram matrix must be positive definite".into(),
            ));
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries.symmetric_eigenvalues()[0]
    }

    /// Upper-triangular Cholesky factor R with G = R^T R; `None` when the
    /// matrix is not numerically positive definite.
    pub fn cholesky_upper(&self) -> Option<Mat> {
        cholesky_upper_of(&self.entries)
    }
}

/// Cholesky of a symmetric matrix handed in as a plain `Mat`; succeeding is
/// itself the positive-definiteness test.
pub(crate) fn cholesky_upper_of(g: &Mat) -> Option<Mat> {
    let n = g.dim();
    let mut r = Mat::zeros(n);
    for i in 0..n {
        let mut s = g[(i, i)];
        for k in 0..i {
            s -= r[(k, i)] * r[(k, i)];
        }
        if !(s > 0.0) {
            return None;
        }
        r[(i, i)] = s.sqrt();
        for j in i + 1..n {
            let mut t = g[(i, j)];
            for k in 0..i {
                t -= r[(k, i)] * r[(k, j)];
            }
            r[(i, j)] = t / r[(i, i)];
        }
    }
    Some(r)
}

/// True iff every entry is within 1e-6 of an integer and the rounded matrix
/// has determinant +1 or -1 (exactly, in integer arithmetic).
pub fn is_unimodular_integer_matrix(m: &Mat) -> bool {
    let n = m.dim();
    let mut rows: Vec<Vec<i128>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let x = m[(i, j)];
            if !x.is_finite() {
                return false;
            }
            let r = x.round();
            if (x - r).abs() > 1e-6 || r.abs() > 9e15 {
                return false;
            }
            row.push(r as i128);
        }
        rows.push(row);
    }
    matches!(crate::intmat::det_i128(&rows), Some(1) | Some(-1))
}

/// Largest singular value of a matrix (re-exported here because the bound
/// lambda_i(bL) <= ||b||_op lambda_i(L) is the main consumer).
pub fn operator_norm(m: &Mat) -> f64 {
    crate::mat::operator_norm(m)
}

pub fn read_basis_json(path: &std::path::Path) -> Result<LatticeBasis> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_basis_json(path: &std::path::Path, basis: &LatticeBasis) -> Result<()> {
    let text = serde_json::to_string_pretty(basis)?;
    std::fs::write(path, text)?;
    Ok(())
}
