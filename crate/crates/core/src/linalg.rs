//! Small dense kernels for the regression fits.
//!
//! Every model in this crate has at most six coefficients, so the normal
//! matrices are tiny and row-major `Vec<f64>` storage with hand-written loops
//! is both simpler and faster than a general linear-algebra dependency.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a column is treated as linearly
/// dependent on the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Row-major dense design matrix with labelled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    labels: Vec<String>,
    nrows: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(labels: Vec<String>, nrows: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "design data has {} entries, expected {} x {}",
                data.len(),
                nrows,
                labels.len()
            )));
        }
        Ok(Self { labels, nrows, data })
    }

    /// Builds a design from column vectors.
    pub fn from_columns(columns: &[(&str, &[f64])]) -> Result<Self> {
        let nrows = columns.first().map_or(0, |(_, c)| c.len());
        if let Some((name, c)) = columns.iter().find(|(_, c)| c.len() != nrows) {
            return Err(Error::DimensionMismatch(format!(
                "column `{name}` has {} rows, expected {nrows}",
                c.len()
            )));
        }
        let ncols = columns.len();
        let mut data = vec![0.0; nrows * ncols];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * ncols + j] = *v;
            }
        }
        let labels = columns.iter().map(|(l, _)| l.to_string()).collect();
        Ok(Self { labels, nrows, data })
    }

    /// A single column of ones.
    pub fn intercept_only(nrows: usize) -> Self {
        Self {
            labels: vec!["intercept".to_string()],
            nrows,
            data: vec![1.0; nrows],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let q = self.ncols();
        &self.data[i * q..(i + 1) * q]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; a zero-column design has no data anyway
        self.data.chunks_exact(self.ncols().max(1))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Labels of non-intercept columns whose values are all equal.
    pub fn constant_columns(&self) -> Vec<String> {
        (0..self.ncols())
            .filter(|&j| self.labels[j] != "intercept")
            .filter(|&j| {
                let mut col = self.column(j);
                match col.next() {
                    Some(first) => col.all(|v| v == first),
                    None => true,
                }
            })
            .map(|j| self.labels[j].clone())
            .collect()
    }

    /// `design · coefficients`.
    pub fn mul_vec(&self, coefficients: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(r, coefficients)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense symmetric square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("matrix rows must be square".into()));
        }
        Ok(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Mirrors the lower triangle into the upper one.
    fn symmetrize_from_lower(&mut self) {
        for i in 0..self.dim {
            for j in 0..i {
                let v = self.get(i, j);
                self.set(j, i, v);
            }
        }
    }
}

/// Accumulates `Xᵀ W X` and `Xᵀ W z` in one pass over the rows.
///
/// `weights == None` means unit weights.
pub fn weighted_cross_products(
    design: &Design,
    weights: Option<&[f64]>,
    response: &[f64],
) -> (SymMatrix, Vec<f64>) {
    let q = design.ncols();
    let mut gram = SymMatrix::zeros(q);
    let mut rhs = vec![0.0; q];
    for (i, row) in design.rows().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let wz = w * response[i];
        for a in 0..q {
            let wa = w * row[a];
            rhs[a] += row[a] * wz;
            for b in 0..=a {
                gram.data[a * q + b] += wa * row[b];
            }
        }
    }
    gram.symmetrize_from_lower();
    (gram, rhs)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: SymMatrix,
}

impl Cholesky {
    /// Factorises `a`, reporting the first column whose pivot collapses
    /// relative to its diagonal entry. The caller maps the index to a label.
    pub fn factor(a: &SymMatrix) -> std::result::Result<Self, usize> {
        let n = a.dim();
        let mut l = SymMatrix::zeros(n);
        for j in 0..n {
            let ajj = a.get(j, j);
            let mut d = ajj;
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if d.is_nan() || d <= RANK_TOLERANCE * ajj.abs() || !d.is_finite() || ajj <= 0.0 {
                return Err(j);
            }
            let ljj = d.sqrt();
            l.set(j, j, ljj);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / ljj);
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &SymMatrix {
        &self.lower
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lower.dim();
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l.get(k, i) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        y
    }

    /// `A⁻¹`, symmetric by construction.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.lower.dim();
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in j..n {
                inv.set(i, j, col[i]);
            }
        }
        inv.symmetrize_from_lower();
        inv
    }

    /// `L · z`, used to turn standard normals into correlated draws.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        let n = self.lower.dim();
        (0..n)
            .map(|i| (0..=i).map(|k| self.lower.get(i, k) * z[k]).sum())
            .collect()
    }
}

/// Factorises a Gram matrix, turning a failed pivot into a named singularity error.
pub fn factor_named(gram: &SymMatrix, labels: &[String]) -> Result<Cholesky> {
    Cholesky::factor(gram).map_err(|index| Error::Singular {
        column: labels.get(index).cloned().unwrap_or_default(),
        index,
    })
}
