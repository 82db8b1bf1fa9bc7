use std::sync::atomic::{AtomicU64, Ordering};

use super::data::{Dataset, FederatedData};
use crate::protocols::LocalObjective;

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean logistic loss `ln(1 + exp(-y w.x))` over the given rows.
pub fn objective(w: &[f64], data: &Dataset, rows: impl IntoIterator<Item = usize>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for i in rows {
        sum += softplus(-data.label(i) * dot(w, data.row(i)));
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Gradient of the mean logistic loss over `rows`, written into `out`.
pub fn logistic_grad(w: &[f64], data: &Dataset, rows: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|g| *g = 0.0);
    if rows.is_empty() {
        log::warn!("gradient requested for a user without data");
        return;
    }
    let scale = 1.0 / rows.len() as f64;
    for &i in rows {
        let (x, y) = (data.row(i), data.label(i));
        let c = -y * sigmoid(-y * dot(w, x)) * scale;
        out.iter_mut().zip(x).for_each(|(g, xi)| *g += c * xi);
    }
}

/// Fraction of rows whose sign of `w.x` matches the label.
pub fn accuracy(w: &[f64], data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = (0..data.len())
        .filter(|&i| dot(w, data.row(i)) * data.label(i) > 0.0)
        .count();
    hits as f64 / data.len() as f64
}

/// Per-user logistic objective; remembers the largest gradient norm served.
pub struct LogisticObjective<'a> {
    data: &'a FederatedData,
    max_norm_bits: AtomicU64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(data: &'a FederatedData) -> Self {
        Self {
            data,
            max_norm_bits: AtomicU64::new(0),
        }
    }

    pub fn max_gradient_norm(&self) -> f64 {
        f64::from_bits(self.max_norm_bits.load(Ordering::Relaxed))
    }
}

impl LocalObjective for LogisticObjective<'_> {
    fn dim(&self) -> usize {
        self.data.train.dim()
    }

    fn gradient(&self, user: u32, w: &[f64], out: &mut [f64]) {
        logistic_grad(
            w,
            &self.data.train,
            &self.data.users[user as usize - 1],
            out,
        );
        let norm = dot(out, out).sqrt();
        // non-negative floats order like their bit patterns
        self.max_norm_bits
            .fetch_max(norm.to_bits(), Ordering::Relaxed);
    }
}

/// Minimizer of the full training objective by gradient descent with step
/// `1/beta = 4` (logistic loss on unit rows is 1/4-smooth). Returns `(w, F*)`.
pub fn fit_reference(train: &Dataset, iterations: usize) -> (Vec<f64>, f64) {
    let rows: Vec<usize> = (0..train.len()).collect();
    let mut w = vec![0.0; train.dim()];
    let mut g = vec![0.0; train.dim()];
    for _ in 0..iterations {
        logistic_grad(&w, train, &rows, &mut g);
        w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= 4.0 * gi);
    }
    let f = objective(&w, train, 0..train.len());
    (w, f)
}
