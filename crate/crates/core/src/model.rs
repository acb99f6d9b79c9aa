//! Linear classifier `φ(z) = c·z + b` with the logistic loss.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub c: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(c: Vec<f64>, b: f64) -> Self {
        Self { c, b }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            c: vec![0.0; n],
            b: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Flat parameter vector `(c, b)` of length `n + 1`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.c.clone();
        p.push(self.b);
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        let (b, c) = p.split_last().expect("parameter vector has a bias");
        Self {
            c: c.to_vec(),
            b: *b,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.c.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            c: self.c.iter().map(|v| alpha * v).collect(),
            b: alpha * self.b,
        }
    }

    pub(crate) fn check_dim(&self, d: &Dataset) -> Result<()> {
        if self.c.len() != d.dim() {
            return Err(Error::DimensionMismatch {
                expected: d.dim(),
                found: self.c.len(),
            });
        }
        Ok(())
    }

    /// `c·z + b` without a dimension check.
    #[inline]
    pub(crate) fn phi(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(c, z)| c * z).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossConfig {
    /// L2 coefficient on `c`; the bias is never regularized.
    pub lambda: f64,
}

/// On-disk model form, bound to the encoding it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub c: Vec<f64>,
    pub b: f64,
    pub n: usize,
    pub schema_digest: String,
}

impl ModelRecord {
    pub fn new(m: &LinearModel, schema_digest: impl Into<String>) -> Self {
        Self {
            c: m.c.clone(),
            b: m.b,
            n: m.dim(),
            schema_digest: schema_digest.into(),
        }
    }

    pub fn model(&self) -> Result<LinearModel> {
        if self.c.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.c.len(),
            });
        }
        Ok(LinearModel::new(self.c.clone(), self.b))
    }
}

pub fn decision_value(m: &LinearModel, z: &[f64]) -> Result<f64> {
    if z.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: z.len(),
        });
    }
    Ok(m.phi(z))
}

/// Threshold classifier; `φ = 0` maps to +1.
pub fn predict_label(m: &LinearModel, z: &[f64]) -> Result<i8> {
    decision_value(m, z).map(label_of)
}

#[inline]
pub(crate) fn label_of(phi: f64) -> i8 {
    if phi >= 0.0 {
        1
    } else {
        -1
    }
}

/// `log(1 + exp(u))` without overflow.
#[inline]
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Logistic function `1 / (1 + exp(-u))` without overflow.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn l2_term(m: &LinearModel, cfg: &LossConfig) -> f64 {
    if cfg.lambda == 0.0 {
        0.0
    } else {
        0.5 * cfg.lambda * m.c.iter().map(|v| v * v).sum::<f64>()
    }
}

pub(crate) fn check_batch(d: &Dataset, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= d.len()) {
        return Err(Error::InvalidBatchSize {
            size: i + 1,
            n: d.len(),
        });
    }
    Ok(())
}

/// Mean logistic loss over all samples plus `(λ/2)‖c‖²`.
pub fn logistic_loss(m: &LinearModel, d: &Dataset, cfg: &LossConfig) -> Result<f64> {
    m.check_dim(d)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = (0..d.len())
        .map(|i| softplus(-(d.label(i) as f64) * m.phi(d.row(i))))
        .sum();
    Ok(sum / d.len() as f64 + l2_term(m, cfg))
}

/// Mean logistic loss over the rows in `batch` plus the L2 term.
pub fn logistic_loss_batch(
    m: &LinearModel,
    d: &Dataset,
    batch: &[usize],
    cfg: &LossConfig,
) -> Result<f64> {
    m.check_dim(d)?;
    check_batch(d, batch)?;
    let sum: f64 = batch
        .iter()
        .map(|&i| softplus(-(d.label(i) as f64) * m.phi(d.row(i))))
        .sum();
    Ok(sum / batch.len() as f64 + l2_term(m, cfg))
}

/// Gradient of [`logistic_loss_batch`] with respect to `(c, b)`.
pub fn logistic_loss_grad(
    m: &LinearModel,
    d: &Dataset,
    batch: &[usize],
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    m.check_dim(d)?;
    check_batch(d, batch)?;
    let n = d.dim();
    let mut g = vec![0.0; n + 1];
    for &i in batch {
        let z = d.row(i);
        let y = d.label(i) as f64;
        let w = -y * sigmoid(-y * m.phi(z));
        for (gj, zj) in g[..n].iter_mut().zip(z) {
            *gj += w * zj;
        }
        g[n] += w;
    }
    let inv = 1.0 / batch.len() as f64;
    for v in &mut g {
        *v *= inv;
    }
    if cfg.lambda != 0.0 {
        for (gj, cj) in g[..n].iter_mut().zip(&m.c) {
            *gj += cfg.lambda * cj;
        }
    }
    Ok(g)
}

/// Fraction of samples whose predicted label differs from the true one.
pub fn error_rate(m: &LinearModel, d: &Dataset) -> Result<f64> {
    m.check_dim(d)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let wrong = (0..d.len())
        .filter(|&i| label_of(m.phi(d.row(i))) != d.label(i))
        .count();
    Ok(wrong as f64 / d.len() as f64)
}
