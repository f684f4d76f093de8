//! Growing store of `(state, input) → observed residual` training pairs.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("non-finite value in appended sample")]
    NonFinite,
    #[error("dataset is empty")]
    Empty,
    #[error(
        "CSV export needs 3-dimensional inputs and scalar targets (got {inputs} -> {targets})"
    )]
    CsvLayout { inputs: usize, targets: usize },
    #[error("csv {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("csv {path}: unexpected header {found:?}")]
    CsvHeader { path: String, found: Vec<String> },
}

/// Column names of the CSV dump, in order. Units: m, m/s, N, N.
pub const CSV_COLUMNS: [&str; 4] = ["p", "pdot", "u", "r_obs"];

/// Mini-batch inputs and targets, row by row.
pub type Batch = (Vec<Vec<f64>>, Vec<Vec<f64>>);

#[derive(Debug, Clone, Default)]
pub struct ReplayDataset {
    inputs: VecDeque<Vec<f64>>,
    targets: VecDeque<Vec<f64>>,
    capacity: Option<usize>,
}

impl ReplayDataset {
    /// Unbounded store.
    pub fn new() -> Self {
        Self::default()
    }

    /// Ring buffer keeping at most `capacity` most recent pairs.
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            capacity: Some(capacity.max(1)),
            ..Self::default()
        }
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.inputs.iter()
    }

    pub fn targets(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.targets.iter()
    }

    pub fn get(&self, i: usize) -> Option<(&[f64], &[f64])> {
        Some((
            self.inputs.get(i)?.as_slice(),
            self.targets.get(i)?.as_slice(),
        ))
    }

    /// Appends the pair `([x, u], r_obs)`, evicting the oldest pair when a
    /// capacity is set and full. Non-finite values are rejected.
    pub fn append(&mut self, x: &[f64], u: &[f64], r_obs: &[f64]) -> Result<(), DatasetError> {
        if x.iter().chain(u).chain(r_obs).any(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite);
        }
        let mut input = Vec::with_capacity(x.len() + u.len());
        input.extend_from_slice(x);
        input.extend_from_slice(u);
        self.inputs.push_back(input);
        self.targets.push_back(r_obs.to_vec());
        if let Some(cap) = self.capacity {
            while self.inputs.len() > cap {
                self.inputs.pop_front();
                self.targets.pop_front();
            }
        }
        Ok(())
    }

    /// Draws `n` pairs uniformly: without replacement when `n ≤ len`,
    /// with replacement otherwise.
    pub fn sample_minibatch<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Batch, DatasetError> {
        let indices = self.sample_indices(n, rng)?;
        let xs = indices.iter().map(|&i| self.inputs[i].clone()).collect();
        let ys = indices.iter().map(|&i| self.targets[i].clone()).collect();
        Ok((xs, ys))
    }

    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, DatasetError> {
        let len = self.len();
        if len == 0 {
            return Err(DatasetError::Empty);
        }
        Ok(if n > len {
            (0..n).map(|_| rng.random_range(0..len)).collect()
        } else {
            rand::seq::index::sample(rng, len, n).into_vec()
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let csv_err = |source| DatasetError::Csv {
            path: path.display().to_string(),
            source,
        };
        if let Some((x, y)) = self.get(0) {
            if x.len() != 3 || y.len() != 1 {
                return Err(DatasetError::CsvLayout {
                    inputs: x.len(),
                    targets: y.len(),
                });
            }
        }
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let record = [x[0], x[1], x[2], y[0]].map(|v| v.to_string());
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| csv_err(e.into()))?;
        Ok(())
    }

    /// Loads a CSV dump into an unbounded dataset.
    pub fn read_csv(path: &Path) -> Result<Self, DatasetError> {
        let p = path.display().to_string();
        let csv_err = |source| DatasetError::Csv {
            path: p.clone(),
            source,
        };
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(csv_err)?;
        let header: Vec<String> = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(String::from)
            .collect();
        if header != CSV_COLUMNS {
            return Err(DatasetError::CsvHeader {
                path: p.clone(),
                found: header,
            });
        }
        let mut ds = Self::new();
        for rec in r.deserialize::<(f64, f64, f64, f64)>() {
            let (pos, vel, u, r_obs) = rec.map_err(csv_err)?;
            ds.append(&[pos, vel], &[u], &[r_obs])?;
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn append_and_ring_eviction() {
        let mut ds = ReplayDataset::new();
        ds.append(&[0.0, 0.0], &[1.0], &[0.5]).unwrap();
        assert_eq!(ds.len(), 1);

        let mut ring = ReplayDataset::with_capacity(2);
        for k in 0..3 {
            ring.append(&[k as f64, 0.0], &[0.0], &[k as f64]).unwrap();
        }
        assert_eq!(ring.len(), 2);
        assert_eq!(ring.get(0).unwrap().1, &[1.0]);
        assert_eq!(ring.get(1).unwrap().1, &[2.0]);
    }

    #[test]
    fn nan_rejected_without_side_effect() {
        let mut ds = ReplayDataset::new();
        ds.append(&[0.0, 0.0], &[0.0], &[0.0]).unwrap();
        assert!(matches!(
            ds.append(&[0.0, 0.0], &[0.0], &[f64::NAN]),
            Err(DatasetError::NonFinite)
        ));
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn sampling_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let empty = ReplayDataset::new();
        assert!(matches!(
            empty.sample_minibatch(4, &mut rng),
            Err(DatasetError::Empty)
        ));

        let mut one = ReplayDataset::new();
        one.append(&[1.0, 2.0], &[3.0], &[4.0]).unwrap();
        let (xs, ys) = one.sample_minibatch(4, &mut rng).unwrap();
        assert_eq!(xs, vec![vec![1.0, 2.0, 3.0]; 4]);
        assert_eq!(ys, vec![vec![4.0]; 4]);

        let mut ds = ReplayDataset::new();
        for k in 0..100 {
            ds.append(&[k as f64, 0.0], &[0.0], &[0.0]).unwrap();
        }
        let a = ds
            .sample_indices(32, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let b = ds
            .sample_indices(32, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 32, "without replacement");
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let mut ds = ReplayDataset::new();
        ds.append(&[0.1, -0.25], &[3.5], &[-0.8]).unwrap();
        ds.append(&[1.0 / 3.0, 2.0], &[-1.0], &[1e-7]).unwrap();
        ds.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("p,pdot,u,r_obs\n"));
        let back = ReplayDataset::read_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get(1).unwrap().0, &[1.0 / 3.0, 2.0, -1.0]);
    }

    #[test]
    fn csv_rejects_wrong_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = ReplayDataset::new();
        ds.append(&[0.0], &[0.0], &[0.0]).unwrap();
        assert!(matches!(
            ds.write_csv(&dir.path().join("x.csv")),
            Err(DatasetError::CsvLayout {
                inputs: 2,
                targets: 1
            })
        ));
    }
}
