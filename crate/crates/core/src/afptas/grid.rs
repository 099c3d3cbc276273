//! The tilt grid: one coordinate per ordered label pair, each drawn from a
//! common axis of mesh `h`.

use crate::error::{Error, Result};

/// Axis `{0, h, 2h, ..., floor(1/h) h, 1}` with duplicates removed.
pub fn tilt_axis(h: f64) -> Result<Vec<f64>> {
    let axis = LazyAxis::new(h)?;
    if axis.len() as f64 > 1e9 {
        return Err(Error::Budget {
            unit: "axis points",
            required: axis.len() as f64,
            budget: 1e9,
        });
    }
    Ok((0..axis.len()).map(|j| axis.point(j)).collect())
}

/// The tilt axis without materializing it.
#[derive(Clone, Copy, Debug)]
pub struct LazyAxis {
    h: f64,
    len: usize,
}

impl LazyAxis {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("grid mesh must be positive, got {h}")));
        }
        let n = (1.0 / h).floor();
        if n > 1e15 {
            return Err(Error::Budget {
                unit: "axis points",
                required: n,
                budget: 1e15,
            });
        }
        let n = n as usize;
        // the last multiple doubles as the endpoint when it rounds to 1
        let len = if (n as f64 * h).min(1.0) >= 1.0 - 1e-12 {
            n + 1
        } else {
            n + 2
        };
        Ok(Self { h, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, j: usize) -> f64 {
        assert!(j < self.len, "axis index {j} out of range");
        if j + 1 == self.len {
            1.0
        } else {
            (j as f64 * self.h).min(1.0)
        }
    }
}

/// Product grid `S^P` enumerated in lexicographic order. Points are built on
/// demand since the product is usually far too large to store.
#[derive(Clone, Debug)]
pub struct TiltGrid {
    axis: Vec<f64>,
    dims: usize,
    len: usize,
}

impl TiltGrid {
    /// Fails with a budget error when the grid has more than `budget` points.
    pub fn new(axis: Vec<f64>, dims: usize, budget: f64) -> Result<Self> {
        let size = (axis.len() as f64).powi(dims as i32);
        if size > budget || size > usize::MAX as f64 {
            return Err(Error::Budget {
                unit: "grid points",
                required: size,
                budget,
            });
        }
        Ok(Self {
            len: axis.len().pow(dims as u32),
            axis,
            dims,
        })
    }

    pub fn with_mesh(h: f64, dims: usize, budget: f64) -> Result<Self> {
        Self::new(tilt_axis(h)?, dims, budget)
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Axis indices of point `index`; the last coordinate varies fastest.
    pub fn indices(&self, mut index: usize) -> Vec<usize> {
        let n = self.axis.len();
        let mut out = vec![0; self.dims];
        for slot in out.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        out
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        self.indices(index).into_iter().map(|i| self.axis[i]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len).map(|i| self.point(i))
    }
}
