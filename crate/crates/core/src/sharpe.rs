//! Sharpe predictor: the model maximizing `(f_f − f1) / f2_di`, the
//! prediction return above a benchmark loss per unit of fairness risk.
//!
//! A maximizer of the ratio with a positive numerator is never strictly
//! dominated in `(f1, f2)`: a dominating point would have a smaller loss
//! and a smaller risk, hence a strictly larger ratio.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{cv_score, f2_di, f2_di_batch, f2_di_grad};
use crate::model::{
    error_rate, logistic_loss, logistic_loss_batch, logistic_loss_grad, LinearModel, LossConfig,
    ModelRecord,
};
use crate::optim::{sgd_minimize, SGDConfig, Trajectory};
use crate::pareto::{solve_weighted, ObjectivePair, ParetoFront};

pub const DEFAULT_EPSILON_F2: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeConfig {
    pub ff: f64,
    pub epsilon_f2: f64,
    pub sgd: SGDConfig,
    pub loss: LossConfig,
}

impl SharpeConfig {
    pub fn new(ff: f64) -> Self {
        Self {
            ff,
            epsilon_f2: DEFAULT_EPSILON_F2,
            sgd: SGDConfig::default(),
            loss: LossConfig::default(),
        }
    }
}

/// `(ff − f1) / max(f2, ε)`.
#[inline]
pub fn ratio_of(p: &ObjectivePair, ff: f64, epsilon_f2: f64) -> f64 {
    (ff - p.f1) / p.f2.max(epsilon_f2)
}

fn check_groups(d: &Dataset) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for g in 0..2u8 {
        if d.group_count(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    Ok(())
}

pub fn sharpe_ratio(m: &LinearModel, d: &Dataset, cfg: &SharpeConfig) -> Result<f64> {
    check_groups(d)?;
    let p = ObjectivePair::of(m, d, &cfg.loss)?;
    Ok(ratio_of(&p, cfg.ff, cfg.epsilon_f2))
}

/// Ratio on a batch, with `f1` and `f2` replaced by their batch values.
pub fn sharpe_ratio_batch(
    m: &LinearModel,
    d: &Dataset,
    batch: &[usize],
    abar: f64,
    cfg: &SharpeConfig,
) -> Result<f64> {
    let f1 = logistic_loss_batch(m, d, batch, &cfg.loss)?;
    let f2 = f2_di_batch(m, d, batch, abar)?;
    Ok(ratio_of(
        &ObjectivePair::new(f1, f2),
        cfg.ff,
        cfg.epsilon_f2,
    ))
}

/// Quotient-rule gradient of the batch ratio with respect to `(c, b)`.
///
/// When `f2` is at or below the floor the denominator is constant and only
/// the numerator contributes.
pub fn sharpe_grad(
    m: &LinearModel,
    d: &Dataset,
    batch: &[usize],
    abar: f64,
    cfg: &SharpeConfig,
) -> Result<Vec<f64>> {
    let f1 = logistic_loss_batch(m, d, batch, &cfg.loss)?;
    let f2 = f2_di_batch(m, d, batch, abar)?;
    let mut g1 = logistic_loss_grad(m, d, batch, &cfg.loss)?;
    if f2 <= cfg.epsilon_f2 {
        let inv = 1.0 / cfg.epsilon_f2;
        for v in &mut g1 {
            *v = -*v * inv;
        }
        return Ok(g1);
    }
    let g2 = f2_di_grad(m, d, batch, abar)?;
    let num = cfg.ff - f1;
    let inv_sq = 1.0 / (f2 * f2);
    Ok(g1
        .iter()
        .zip(&g2)
        .map(|(a, b)| (-a * f2 - num * b) * inv_sq)
        .collect())
}

/// Benchmark loss just below the largest training loss on the front.
pub fn default_ff(front: &ParetoFront, delta: f64) -> Result<f64> {
    front
        .objectives()
        .map(|o| o.f1)
        .reduce(f64::max)
        .map(|m| m - delta)
        .ok_or(Error::EmptyFront)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeEval {
    pub error_train: f64,
    pub error_test: f64,
    pub cv_train: f64,
    pub cv_test: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpeResult {
    pub model: LinearModel,
    pub ratio: f64,
    pub f1: f64,
    pub f2: f64,
    pub ff: f64,
    pub epsilon_f2: f64,
    /// True when `f2` sits at or below the denominator floor.
    pub floor_active: bool,
    pub eval: SharpeEval,
    pub trajectory: Trajectory,
    /// Verdict of [`verify_nondominated`]; `None` until checked.
    pub nondominated: Option<bool>,
}

impl SharpeResult {
    pub fn objectives(&self) -> ObjectivePair {
        ObjectivePair::new(self.f1, self.f2)
    }

    pub fn record(&self, schema_digest: &str) -> SharpeRecord {
        SharpeRecord {
            model: ModelRecord::new(&self.model, schema_digest),
            ratio: self.ratio,
            f1: self.f1,
            f2: self.f2,
            ff: self.ff,
            nondominated: self.nondominated,
            floor_active: self.floor_active,
            error_test: self.eval.error_test,
            cv_test: self.eval.cv_test,
        }
    }
}

/// On-disk form of a [`SharpeResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeRecord {
    pub model: ModelRecord,
    pub ratio: f64,
    pub f1: f64,
    pub f2: f64,
    pub ff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nondominated: Option<bool>,
    pub floor_active: bool,
    pub error_test: f64,
    pub cv_test: f64,
}

/// Starting point for the ratio ascent: the front point with the largest
/// ratio when a front is given, else the unconstrained logistic minimizer.
pub fn warm_start(
    train: &Dataset,
    cfg: &SharpeConfig,
    front: Option<&ParetoFront>,
) -> Result<LinearModel> {
    match front {
        Some(f) => f
            .points()
            .iter()
            .max_by(|a, b| {
                ratio_of(&a.objectives, cfg.ff, cfg.epsilon_f2).total_cmp(&ratio_of(
                    &b.objectives,
                    cfg.ff,
                    cfg.epsilon_f2,
                ))
            })
            .map(|p| p.model.clone())
            .ok_or(Error::EmptyFront),
        None => Ok(solve_weighted(
            train,
            1.0,
            &LinearModel::zeros(train.dim()),
            &cfg.sgd,
            &cfg.loss,
        )?
        .best_model),
    }
}

/// Maximizes the Sharpe ratio on `train` by SGD on the negated ratio.
///
/// The negated ratio is multiplied by the start point's (floored) `f2`, a
/// positive constant, so that near the start the curvature is on the scale
/// of the losses themselves and the configured step size applies as it
/// does for front tracing. The batch schedule continues from where the
/// warm-start run left it. The best checkpoint of the run is returned.
pub fn solve_sharpe(
    train: &Dataset,
    test: &Dataset,
    cfg: &SharpeConfig,
    front: Option<&ParetoFront>,
) -> Result<SharpeResult> {
    check_groups(train)?;
    if cfg.epsilon_f2.is_nan() || cfg.epsilon_f2 <= 0.0 {
        return Err(Error::InvalidConfig("epsilon_f2 must be positive".into()));
    }
    let x0 = warm_start(train, cfg, front)?;
    x0.check_dim(train)?;
    let abar = train.sensitive_mean();
    let scale = f2_di(&x0, train)?.max(cfg.epsilon_f2);

    let grad = |m: &LinearModel, batch: &[usize]| -> Result<Vec<f64>> {
        let mut g = sharpe_grad(m, train, batch, abar, cfg)?;
        for v in &mut g {
            *v *= -scale;
        }
        Ok(g)
    };
    let objective = |m: &LinearModel| -> Result<f64> { Ok(-scale * sharpe_ratio(m, train, cfg)?) };
    // the warm start is the product of at least one full run; continue its schedule
    let sgd = cfg.sgd.continued(cfg.sgd.iterations);
    let trajectory = sgd_minimize(grad, objective, &x0, train.len(), &sgd)?;

    let model = trajectory.best_model.clone();
    let f1 = logistic_loss(&model, train, &cfg.loss)?;
    let f2 = f2_di(&model, train)?;
    if f1 >= cfg.ff {
        return Err(Error::BenchmarkViolated { f1, ff: cfg.ff });
    }
    let eval = SharpeEval {
        error_train: error_rate(&model, train)?,
        error_test: error_rate(&model, test)?,
        cv_train: cv_score(&model, train)?,
        cv_test: cv_score(&model, test)?,
    };
    Ok(SharpeResult {
        ratio: ratio_of(&ObjectivePair::new(f1, f2), cfg.ff, cfg.epsilon_f2),
        f1,
        f2,
        ff: cfg.ff,
        epsilon_f2: cfg.epsilon_f2,
        floor_active: f2 <= cfg.epsilon_f2,
        eval,
        trajectory,
        nondominated: None,
        model,
    })
}

/// True when no front point beats the result by more than `tol` in both
/// objectives. The verdict is stored in the result.
pub fn verify_nondominated(result: &mut SharpeResult, front: &ParetoFront, tol: f64) -> bool {
    let ok = !front
        .objectives()
        .any(|p| p.f1 < result.f1 - tol && p.f2 < result.f2 - tol);
    result.nondominated = Some(ok);
    ok
}

/// True when the result's ratio is at least every front point's ratio,
/// less `tol_ratio`.
pub fn ratio_dominance_check(
    result: &SharpeResult,
    front: &ParetoFront,
    tol_ratio: f64,
) -> Result<bool> {
    if front.is_empty() {
        return Err(Error::EmptyFront);
    }
    let mut ok = true;
    for p in front.objectives() {
        if p.f1 >= result.ff {
            return Err(Error::BenchmarkViolated {
                f1: p.f1,
                ff: result.ff,
            });
        }
        if ratio_of(&p, result.ff, result.epsilon_f2) > result.ratio + tol_ratio {
            ok = false;
        }
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Trajectory;
    use crate::pareto::tests::pt;

    fn result_at(f1: f64, f2: f64, ff: f64) -> SharpeResult {
        let m = LinearModel::zeros(1);
        SharpeResult {
            ratio: ratio_of(&ObjectivePair::new(f1, f2), ff, DEFAULT_EPSILON_F2),
            f1,
            f2,
            ff,
            epsilon_f2: DEFAULT_EPSILON_F2,
            floor_active: false,
            eval: SharpeEval {
                error_train: 0.0,
                error_test: 0.0,
                cv_train: 0.0,
                cv_test: 0.0,
            },
            trajectory: Trajectory {
                checkpoints: vec![],
                best_so_far: vec![0.0],
                best_model: m.clone(),
                best_iter: 0,
                final_model: m.clone(),
                batch_sizes: vec![],
            },
            nondominated: None,
            model: m,
        }
    }

    #[test]
    fn ratio_arithmetic() {
        assert_eq!(ratio_of(&ObjectivePair::new(0.5, 0.25), 1.0, 1e-12), 2.0);
        assert_eq!(ratio_of(&ObjectivePair::new(0.7, 0.3), 0.7, 1e-12), 0.0);
        let floored = ratio_of(&ObjectivePair::new(std::f64::consts::LN_2, 0.0), 1.0, 1e-12);
        assert_eq!(floored, (1.0 - std::f64::consts::LN_2) / 1e-12);
    }

    #[test]
    fn ff_from_front() {
        let f = ParetoFront::from_points([pt(0.30, 0.2), pt(0.394, 0.0001)]);
        assert!((default_ff(&f, 0.024).unwrap() - 0.37).abs() < 1e-15);
        assert_eq!(default_ff(&f, 0.0).unwrap(), 0.394);
        let single = ParetoFront::from_points([pt(0.5, 0.1)]);
        assert_eq!(default_ff(&single, 0.1).unwrap(), 0.4);
        assert!(matches!(
            default_ff(&ParetoFront::new(), 0.1),
            Err(Error::EmptyFront)
        ));
    }

    #[test]
    fn nondomination_verdicts() {
        let front = ParetoFront::from_points([pt(0.3, 0.2), pt(0.4, 0.1)]);
        let mut on = result_at(0.3, 0.2, 1.0);
        assert!(verify_nondominated(&mut on, &front, 0.0));
        assert_eq!(on.nondominated, Some(true));
        let mut off = result_at(0.5, 0.3, 1.0);
        assert!(!verify_nondominated(&mut off, &front, 1e-4));
        assert_eq!(off.nondominated, Some(false));
    }

    #[test]
    fn ratio_dominance_hand_front() {
        // ratios (0.4-0.3)/0.2 = 0.5 and (0.4-0.35)/0.1 = 0.5
        let front = ParetoFront::from_points([pt(0.3, 0.2), pt(0.35, 0.1)]);
        let at = result_at(0.35, 0.1, 0.4);
        assert!((at.ratio - 0.5).abs() < 1e-12);
        assert!(ratio_dominance_check(&at, &front, 1e-9).unwrap());
        let worse = result_at(0.36, 0.1, 0.4);
        assert!(!ratio_dominance_check(&worse, &front, 1e-9).unwrap());
        let low_ff = result_at(0.2, 0.1, 0.32);
        assert!(matches!(
            ratio_dominance_check(&low_ff, &front, 1e-3),
            Err(Error::BenchmarkViolated { .. })
        ));
        let one = ParetoFront::from_points([pt(0.3, 0.2)]);
        assert!(ratio_dominance_check(&result_at(0.3, 0.2, 0.4), &one, 0.0).unwrap());
    }

    #[test]
    fn record_omits_missing_verdict() {
        let r = result_at(0.3, 0.2, 0.4);
        let v = serde_json::to_value(r.record("d")).unwrap();
        assert!(v.get("nondominated").is_none());
        for key in ["model", "ratio", "f1", "f2", "ff", "floor_active"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let mut r = r;
        r.nondominated = Some(true);
        let v = serde_json::to_value(r.record("d")).unwrap();
        assert_eq!(v["nondominated"], serde_json::Value::Bool(true));
    }
}
