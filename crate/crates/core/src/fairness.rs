//! Disparate-impact metrics.
//!
//! The CV score measures the gap in positive-prediction rates between the
//! two sensitive groups on hard predictions. Its smooth surrogate is the
//! squared covariance between the sensitive attribute and the decision
//! value, `f2_di`, which is convex in `(c, b)`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{check_batch, label_of, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub cv_score: f64,
    pub p_pos_group0: f64,
    pub p_pos_group1: f64,
    pub boundary_covariance: f64,
    pub f2_di: f64,
}

/// Positive-prediction rate per sensitive group.
pub fn positive_rates(m: &LinearModel, d: &Dataset) -> Result<(f64, f64)> {
    m.check_dim(d)?;
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for s in d.iter() {
        let g = s.sensitive as usize;
        tot[g] += 1;
        if label_of(m.phi(s.features)) == 1 {
            pos[g] += 1;
        }
    }
    if let Some(g) = tot.iter().position(|&t| t == 0) {
        return Err(Error::EmptyGroup(g as u8));
    }
    Ok((pos[0] as f64 / tot[0] as f64, pos[1] as f64 / tot[1] as f64))
}

pub fn cv_score(m: &LinearModel, d: &Dataset) -> Result<f64> {
    let (p0, p1) = positive_rates(m, d)?;
    Ok((p0 - p1).abs())
}

fn covariance_over<I>(m: &LinearModel, d: &Dataset, rows: I, count: usize, abar: f64) -> f64
where
    I: Iterator<Item = usize>,
{
    let sum: f64 = rows
        .map(|i| (d.sensitive(i) as f64 - abar) * m.phi(d.row(i)))
        .sum();
    sum / count as f64
}

/// `(1/N) Σ (a_j − ā)(c·z_j + b)` with `ā` the dataset mean.
pub fn boundary_covariance(m: &LinearModel, d: &Dataset) -> Result<f64> {
    m.check_dim(d)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(covariance_over(
        m,
        d,
        0..d.len(),
        d.len(),
        d.sensitive_mean(),
    ))
}

/// Batch covariance centred at a fixed `abar` (normally the full-data mean).
pub fn boundary_covariance_batch(
    m: &LinearModel,
    d: &Dataset,
    batch: &[usize],
    abar: f64,
) -> Result<f64> {
    m.check_dim(d)?;
    check_batch(d, batch)?;
    Ok(covariance_over(
        m,
        d,
        batch.iter().copied(),
        batch.len(),
        abar,
    ))
}

pub fn f2_di(m: &LinearModel, d: &Dataset) -> Result<f64> {
    boundary_covariance(m, d).map(|c| c * c)
}

pub fn f2_di_batch(m: &LinearModel, d: &Dataset, batch: &[usize], abar: f64) -> Result<f64> {
    boundary_covariance_batch(m, d, batch, abar).map(|c| c * c)
}

/// Gradient of the squared batch covariance with respect to `(c, b)`:
/// `2·cov · (1/|B|) Σ (a_j − ā)(z_j, 1)`.
pub fn f2_di_grad(m: &LinearModel, d: &Dataset, batch: &[usize], abar: f64) -> Result<Vec<f64>> {
    m.check_dim(d)?;
    check_batch(d, batch)?;
    let n = d.dim();
    let mut dir = vec![0.0; n + 1];
    let mut cov = 0.0;
    for &i in batch {
        let z = d.row(i);
        let w = d.sensitive(i) as f64 - abar;
        cov += w * m.phi(z);
        for (dj, zj) in dir[..n].iter_mut().zip(z) {
            *dj += w * zj;
        }
        dir[n] += w;
    }
    let inv = 1.0 / batch.len() as f64;
    let scale = 2.0 * (cov * inv) * inv;
    for v in &mut dir {
        *v *= scale;
    }
    Ok(dir)
}

/// `(1/N) Σ (a_j − ā)(z_j, 1)`: the covariance is this vector dotted with
/// `(c, b)`. Its last entry vanishes when `ā` is the data mean.
pub fn covariance_direction(d: &Dataset, abar: f64) -> Vec<f64> {
    let n = d.dim();
    let mut dir = vec![0.0; n + 1];
    for s in d.iter() {
        let w = s.sensitive as f64 - abar;
        for (dj, zj) in dir[..n].iter_mut().zip(s.features) {
            *dj += w * zj;
        }
        dir[n] += w;
    }
    let inv = 1.0 / d.len() as f64;
    for v in &mut dir {
        *v *= inv;
    }
    dir
}

pub fn fairness_report(m: &LinearModel, d: &Dataset) -> Result<FairnessReport> {
    let (p0, p1) = positive_rates(m, d)?;
    let cov = boundary_covariance(m, d)?;
    Ok(FairnessReport {
        cv_score: (p0 - p1).abs(),
        p_pos_group0: p0,
        p_pos_group1: p1,
        boundary_covariance: cov,
        f2_di: cov * cov,
    })
}
