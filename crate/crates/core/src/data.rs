use crate::error::{NndmError, Result};

/// An `n × p` matrix of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    p: usize,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(NndmError::InvalidData(format!(
                "dataset must have at least one row and one column, got {n}x{p}"
            )));
        }
        if values.len() != n * p {
            return Err(NndmError::InvalidData(format!(
                "expected {} values for a {n}x{p} dataset, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(NndmError::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(Dataset {
            values,
            n,
            p,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(NndmError::InvalidData(format!(
                "row {bad} has {} columns, expected {p}",
                rows[bad].len()
            )));
        }
        Self::new(rows.concat(), rows.len(), p)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(NndmError::InvalidData(format!(
                "{} column names for {} columns",
                names.len(),
                self.p
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        let mut out = Dataset::new(values, indices.len(), self.p)?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }

    /// The dataset with row `i` removed.
    pub fn without_row(&self, i: usize) -> Result<Dataset> {
        let keep: Vec<usize> = (0..self.n).filter(|&j| j != i).collect();
        self.select(&keep)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.p];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        mean
    }

    /// Unbiased sample covariance, row-major `p × p`.
    pub fn sample_covariance(&self) -> Result<Vec<f64>> {
        if self.n < 2 {
            return Err(NndmError::InvalidData(
                "sample covariance needs at least two rows".into(),
            ));
        }
        let p = self.p;
        let mean = self.column_means();
        let mut cov = vec![0.0; p * p];
        for row in self.rows() {
            for a in 0..p {
                let da = row[a] - mean[a];
                for b in 0..=a {
                    cov[a * p + b] += da * (row[b] - mean[b]);
                }
            }
        }
        let denom = (self.n - 1) as f64;
        for a in 0..p {
            for b in 0..=a {
                let v = cov[a * p + b] / denom;
                cov[a * p + b] = v;
                cov[b * p + a] = v;
            }
        }
        Ok(cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = Dataset::new(vec![1.0, f64::NAN], 2, 1).unwrap_err();
        assert!(matches!(err, NndmError::InvalidData(_)));
        assert!(Dataset::new(vec![f64::INFINITY], 1, 1).is_err());
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Dataset::from_rows(&[]).is_err());
    }

    #[test]
    fn covariance_of_small_sample() {
        let d = Dataset::from_rows(&[vec![0.0, 0.0], vec![2.0, 1.0], vec![4.0, 5.0]]).unwrap();
        let c = d.sample_covariance().unwrap();
        // means (2, 2); deviations (-2,-2), (0,-1), (2,3)
        assert_eq!(c, vec![4.0, 5.0, 5.0, 7.0]);
    }
}
