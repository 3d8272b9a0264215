use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Tensor};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-scoring fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of each feature column.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.len() < 2 {
            return Err(Error::EmptyTrainingSet(rows.len()));
        }
        let width = rows[0].len();
        let mut mean = vec![0.0; width];
        for r in &rows {
            if r.len() != width {
                return Err(Error::shape("Standardizer::fit", &[width], &[r.len()]));
            }
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += *v;
            }
        }
        let n = rows.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; width];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| libm::sqrt(s / n).max(STD_FLOOR)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn identity(width: usize) -> Self {
        Standardizer {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_slice(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn invert_slice(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
    }

    /// z-scores every trailing-dimension row of `x`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let mut out = x.clone();
        for row in out.data_mut().chunks_mut(self.width()) {
            self.apply_slice(row);
        }
        Ok(out)
    }

    pub fn invert(&self, z: &Tensor) -> Result<Tensor> {
        self.check(z)?;
        let mut out = z.clone();
        for row in out.data_mut().chunks_mut(self.width()) {
            self.invert_slice(row);
        }
        Ok(out)
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.shape().last() != Some(&self.width()) {
            return Err(Error::shape("Standardizer", x.shape(), &[self.width()]));
        }
        Ok(())
    }
}
