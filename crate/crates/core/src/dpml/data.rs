use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{RngContract, DATA_STREAM};

/// Labelled points with labels in {-1, +1}; rows are stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if d == 0 || x.len() != d * y.len() {
            return Err(invalid(format!(
                "{} values do not form {} rows of width {d}",
                x.len(),
                y.len()
            )));
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(invalid(format!("labels must be -1 or 1, found {bad}")));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(invalid("features contain NaN"));
        }
        Ok(Self { d, x, y })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.y[i]
    }
}

/// Training rows partitioned across users, plus a held-out test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedData {
    pub train: Dataset,
    pub test: Dataset,
    /// Training row indices of each user (entry `i` is user `i + 1`).
    pub users: Vec<Vec<usize>>,
}

impl FederatedData {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }
}

/// Two Gaussian classes with identity covariance and means `+-shift / sqrt(d)`
/// along every coordinate, balanced labels.
pub fn synthetic_two_gaussians(points: usize, d: usize, shift: f64, seed: u64) -> Result<Dataset> {
    let mut rng = RngContract::new(seed, DATA_STREAM).rng();
    let mu = shift / (d as f64).sqrt();
    let mut x = Vec::with_capacity(points * d);
    let mut y = Vec::with_capacity(points);
    for i in 0..points {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            x.push(z + label * mu);
        }
        y.push(label);
    }
    Dataset::new(d, x, y)
}

/// Reads a CSV with a header, numeric feature columns and a final `label`
/// column in {-1, 1}.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    if headers.iter().next_back().map(str::trim) != Some("label") {
        return Err(invalid(format!(
            "{}: last column must be `label`",
            path.display()
        )));
    }
    let d = headers.len() - 1;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let mut vals = rec.iter().map(|s| s.trim().parse::<f64>());
        for _ in 0..d {
            x.push(vals.next().and_then(|v| v.ok()).ok_or_else(|| {
                invalid(format!(
                    "{}: bad feature on data row {}",
                    path.display(),
                    line + 1
                ))
            })?);
        }
        y.push(vals.next().and_then(|v| v.ok()).ok_or_else(|| {
            invalid(format!(
                "{}: bad label on data row {}",
                path.display(),
                line + 1
            ))
        })?);
    }
    Dataset::new(d, x, y)
}

/// Splits 80/20 by seed, standardizes with training statistics (dropping
/// constant columns), scales every row to unit L2 norm and deals the
/// training rows out to `users` users as evenly as possible.
pub fn preprocess(raw: &Dataset, users: usize, seed: u64) -> Result<FederatedData> {
    if users == 0 {
        return Err(invalid("need at least one user"));
    }
    if raw.len() < 2 {
        return Err(invalid("need at least two rows to split"));
    }
    let mut rng = RngContract::new(seed, DATA_STREAM).rng();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.shuffle(&mut rng);
    let n_train = (raw.len() as f64 * 0.8).round() as usize;
    let (train_idx, test_idx) = order.split_at(n_train);

    let d = raw.dim();
    let nt = train_idx.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in train_idx {
        mean.iter_mut()
            .zip(raw.row(i))
            .for_each(|(m, v)| *m += v / nt);
    }
    let mut sd = vec![0.0; d];
    for &i in train_idx {
        sd.iter_mut()
            .zip(raw.row(i).iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / nt);
    }
    sd.iter_mut().for_each(|s| *s = s.sqrt());
    let keep: Vec<usize> = (0..d).filter(|&j| sd[j] > 1e-12).collect();
    if keep.len() < d {
        log::warn!("dropping {} constant feature column(s)", d - keep.len());
    }
    if keep.is_empty() {
        return Err(invalid("every feature column is constant"));
    }

    let transform = |idx: &[usize]| -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * keep.len());
        for &i in idx {
            let row = raw.row(i);
            let start = x.len();
            x.extend(keep.iter().map(|&j| (row[j] - mean[j]) / sd[j]));
            normalize(&mut x[start..]);
        }
        Dataset {
            d: keep.len(),
            x,
            y: idx.iter().map(|&i| raw.label(i)).collect(),
        }
    };
    let train = transform(train_idx);
    let test = transform(test_idx);

    let mut users_rows = vec![Vec::new(); users];
    for i in 0..train.len() {
        users_rows[i % users].push(i);
    }
    Ok(FederatedData {
        train,
        test,
        users: users_rows,
    })
}

/// Scales `row` to unit norm, never above 1 after rounding.
fn normalize(row: &mut [f64]) {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    row.iter_mut().for_each(|v| *v /= norm);
    while row.iter().map(|v| v * v).sum::<f64>().sqrt() > 1.0 {
        row.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rows_and_split() {
        let raw = synthetic_two_gaussians(1003, 7, 2.0, 1).unwrap();
        let f = preprocess(&raw, 10, 2).unwrap();
        assert!((f.train.len() as f64 - 0.8 * 1003.0).abs() <= 1.0);
        assert_eq!(f.train.len() + f.test.len(), 1003);
        for ds in [&f.train, &f.test] {
            for i in 0..ds.len() {
                let norm = ds.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((1.0 - 1e-12..=1.0).contains(&norm), "{norm}");
            }
        }
        let sizes: Vec<usize> = f.users.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn paper_scale_partition() {
        let raw = synthetic_two_gaussians(20_000, 4, 1.0, 1).unwrap();
        let f = preprocess(&raw, 2000, 3).unwrap();
        assert_eq!(f.train.len(), 16_000);
        assert!(f.users.iter().all(|u| u.len() == 8));
    }

    #[test]
    fn constant_column_dropped() {
        let x: Vec<f64> = (0..40)
            .flat_map(|i| [i as f64, 5.0, (i * i) as f64 % 7.0])
            .collect();
        let y: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let raw = Dataset::new(3, x, y).unwrap();
        let f = preprocess(&raw, 4, 0).unwrap();
        assert_eq!(f.train.dim(), 2);
    }

    #[test]
    fn rejects_nan_and_bad_labels() {
        assert!(Dataset::new(1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(Dataset::new(1, vec![0.0], vec![0.0]).is_err());
        assert!(Dataset::new(2, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,b,label\n1,2,1\n3,4.5,-1\n").unwrap();
        let ds = read_csv(&p).unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.row(1), &[3.0, 4.5]);
        assert_eq!(ds.label(1), -1.0);
        std::fs::write(&p, "a,b,y\n1,2,1\n").unwrap();
        assert!(read_csv(&p).is_err());
    }
}
