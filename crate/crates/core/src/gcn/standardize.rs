use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-column z-scoring with statistics taken from a training matrix.
/// Columns with zero spread map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Array2<f64>) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(Error::invalid("cannot standardize an empty training matrix"));
        }
        let mean = train.mean_axis(Axis(0)).expect("non-empty");
        let std = train.var_axis(Axis(0), 0.0).mapv(f64::sqrt);
        Ok(Standardizer {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    /// Fits on the stacked rows of several matrices.
    pub fn fit_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let d = rows.first().map_or(0, |r| r.len());
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let m = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::invalid(e.to_string()))?;
        Self::fit(&m)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} columns", self.dim()),
                got: format!("{}", x.ncols()),
            });
        }
        let mean = Array1::from(self.mean.clone());
        let mut out = x - &mean;
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let s = self.std[j];
            if s > 0.0 {
                col /= s;
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}
