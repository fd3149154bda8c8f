//! Observations, datasets and query grids.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Column roles. `conditioning` indexes into `covariates`: the conditioning
/// vector `x` is the sub-vector of `z` at those positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub outcome: String,
    pub treatment: Option<String>,
    pub covariates: Vec<String>,
    pub conditioning: Vec<usize>,
}

impl Schema {
    pub fn new(
        outcome: impl Into<String>,
        treatment: Option<String>,
        covariates: Vec<String>,
        conditioning: Vec<usize>,
    ) -> Result<Self> {
        let schema = Schema {
            outcome: outcome.into(),
            treatment,
            covariates,
            conditioning,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        if self.covariates.is_empty() {
            return Err(Error::InvalidData("schema has no covariates".into()));
        }
        if self.conditioning.is_empty() {
            return Err(Error::InvalidData("schema has no conditioning covariates".into()));
        }
        for &c in &self.conditioning {
            if c >= self.covariates.len() {
                return Err(Error::InvalidData(alloc::format!(
                    "conditioning index {c} out of range for {} covariates",
                    self.covariates.len()
                )));
            }
        }
        Ok(())
    }

    /// Column names actually read from a table, in role order.
    pub fn used_columns(&self) -> Vec<&str> {
        let mut cols = Vec::with_capacity(self.covariates.len() + 2);
        cols.push(self.outcome.as_str());
        if let Some(t) = &self.treatment {
            cols.push(t.as_str());
        }
        cols.extend(self.covariates.iter().map(String::as_str));
        cols
    }

    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    pub fn q(&self) -> usize {
        self.conditioning.len()
    }
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub y: f64,
    pub w: Option<u8>,
    pub z: &'a [f64],
    pub x: &'a [f64],
}

/// Row-major feature matrix.
#[derive(Debug, Clone, Copy)]
pub struct Features<'a> {
    values: &'a [f64],
    dim: usize,
}

impl<'a> Features<'a> {
    pub fn new(values: &'a [f64], dim: usize) -> Self {
        debug_assert!(dim > 0 && values.len() % dim == 0);
        Features { values, dim }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize, axis: usize) -> f64 {
        self.values[i * self.dim + axis]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }
}

/// Immutable table of observations `(y, w, z)` with `x` extracted from `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    y: Vec<f64>,
    w: Option<Vec<u8>>,
    z: Vec<f64>,
    x: Vec<f64>,
}

impl Dataset {
    /// Build from columns; `z` is row-major with `schema.p()` columns.
    pub fn new(schema: Schema, y: Vec<f64>, w: Option<Vec<u8>>, z: Vec<f64>) -> Result<Self> {
        schema.validate()?;
        let n = y.len();
        if n < 2 {
            return Err(Error::EmptyData(n));
        }
        let p = schema.p();
        if z.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: z.len(),
            });
        }
        if schema.treatment.is_some() != w.is_some() {
            return Err(Error::InvalidData(
                "treatment column declared in schema but not supplied (or vice versa)".into(),
            ));
        }
        for (row, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: schema.outcome.clone(),
                    message: "non-finite value".into(),
                });
            }
        }
        for (k, v) in z.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: k / p,
                    column: schema.covariates[k % p].clone(),
                    message: "non-finite value".into(),
                });
            }
        }
        if let Some(w) = &w {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
            if let Some(row) = w.iter().position(|&v| v > 1) {
                return Err(Error::Parse {
                    row,
                    column: schema.treatment.clone().unwrap_or_default(),
                    message: "treatment must be 0 or 1".into(),
                });
            }
        }
        let q = schema.q();
        let mut x = Vec::with_capacity(n * q);
        for i in 0..n {
            for &c in &schema.conditioning {
                x.push(z[i * p + c]);
            }
        }
        Ok(Dataset { schema, y, w, z, x })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.schema.p()
    }

    pub fn q(&self) -> usize {
        self.schema.q()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> Option<&[u8]> {
        self.w.as_deref()
    }

    pub fn z(&self) -> Features<'_> {
        Features::new(&self.z, self.p())
    }

    pub fn x(&self) -> Features<'_> {
        Features::new(&self.x, self.q())
    }

    pub fn observation(&self, i: usize) -> Observation<'_> {
        Observation {
            y: self.y[i],
            w: self.w.as_ref().map(|w| w[i]),
            z: self.z().row(i),
            x: self.x().row(i),
        }
    }

    /// Copy with the outcome column replaced (same schema and covariates).
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        Dataset::new(self.schema.clone(), y, self.w.clone(), self.z.clone())
    }
}

/// `d` points in the conditioning space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector {
    points: Vec<f64>,
    dim: usize,
}

impl QueryVector {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::InvalidData(
            "query vector must contain at least one point".into(),
        ))?;
        if dim == 0 {
            return Err(Error::InvalidData("query points must have positive dimension".into()));
        }
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("query points must be finite".into()));
            }
            flat.extend_from_slice(p);
        }
        Ok(QueryVector { points: flat, dim })
    }

    /// A single query point of the given dimension, located at the origin.
    /// Used by kernels that ignore location (the all-mass trivial kernel).
    pub fn single(dim: usize) -> Self {
        QueryVector {
            points: alloc::vec![0.0; dim.max(1)],
            dim: dim.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn check_dim(&self, q: usize) -> Result<()> {
        if self.dim != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: self.dim,
            });
        }
        Ok(())
    }
}

/// Cartesian grid of cell centres, last axis fastest.
pub fn make_query_grid(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<QueryVector> {
    if bounds.is_empty() {
        return Err(Error::InvalidData("grid needs at least one axis".into()));
    }
    if bounds.len() != resolution.len() {
        return Err(Error::DimensionMismatch {
            expected: bounds.len(),
            got: resolution.len(),
        });
    }
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(bounds.len());
    for (axis, (&(lo, hi), &res)) in bounds.iter().zip(resolution).enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::BadBounds { axis });
        }
        if res == 0 {
            return Err(Error::ZeroResolution { axis });
        }
        let width = (hi - lo) / res as f64;
        axes.push((0..res).map(|i| lo + (i as f64 + 0.5) * width).collect());
    }
    let dim = axes.len();
    let total: usize = resolution.iter().product();
    let mut points = Vec::with_capacity(total * dim);
    let mut index = alloc::vec![0usize; dim];
    for _ in 0..total {
        for (a, &i) in index.iter().enumerate() {
            points.push(axes[a][i]);
        }
        for a in (0..dim).rev() {
            index[a] += 1;
            if index[a] < resolution[a] {
                break;
            }
            index[a] = 0;
        }
    }
    Ok(QueryVector { points, dim })
}
