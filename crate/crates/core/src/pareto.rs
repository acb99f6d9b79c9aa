//! Pareto dominance and accuracy/fairness front tracing.
//!
//! The front of `min (f1, f2_di)` is traced by a weighted-sum sweep: each
//! weight `w` yields the minimizer of `w·f1 + (1−w)·f2_di`, found by SGD
//! from the previous weight's solution. Both objectives are convex, so the
//! sweep can reach every point of the front.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{covariance_direction, f2_di, f2_di_batch, fairness_report, FairnessReport};
use crate::model::{
    check_batch, error_rate, logistic_loss, logistic_loss_batch, sigmoid, LinearModel, LossConfig,
    ModelRecord,
};
use crate::optim::{sgd_minimize, SGDConfig, Trajectory};

/// Points closer than this in both coordinates are treated as one.
pub const DUPLICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePair {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectivePair {
    pub fn new(f1: f64, f2: f64) -> Self {
        Self { f1, f2 }
    }

    /// Training objectives of `m`: logistic loss (with L2 term) and `f2_di`.
    pub fn of(m: &LinearModel, train: &Dataset, loss: &LossConfig) -> Result<Self> {
        Ok(Self {
            f1: logistic_loss(m, train, loss)?,
            f2: f2_di(m, train)?,
        })
    }
}

/// Strict componentwise dominance: `p < q` in both objectives.
pub fn dominates(p: &ObjectivePair, q: &ObjectivePair) -> bool {
    p.f1 < q.f1 && p.f2 < q.f2
}

fn near_duplicate(p: &ObjectivePair, q: &ObjectivePair) -> bool {
    (p.f1 - q.f1).abs() <= DUPLICATE_TOL && (p.f2 - q.f2).abs() <= DUPLICATE_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontEval {
    pub train: FairnessReport,
    pub test: FairnessReport,
    pub error_train: f64,
    pub error_test: f64,
}

impl FrontEval {
    pub fn of(m: &LinearModel, train: &Dataset, test: &Dataset) -> Result<Self> {
        Ok(Self {
            train: fairness_report(m, train)?,
            test: fairness_report(m, test)?,
            error_train: error_rate(m, train)?,
            error_test: error_rate(m, test)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint {
    pub model: LinearModel,
    pub objectives: ObjectivePair,
    pub weight: f64,
    pub eval: FrontEval,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoFront {
    points: Vec<FrontPoint>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a front by inserting `points` one at a time.
    pub fn from_points(points: impl IntoIterator<Item = FrontPoint>) -> Self {
        points.into_iter().fold(Self::new(), insert_nondominated)
    }

    /// Points sorted by `f1` ascending.
    pub fn points(&self) -> &[FrontPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn objectives(&self) -> impl Iterator<Item = ObjectivePair> + '_ {
        self.points.iter().map(|p| p.objectives)
    }
}

/// Adds `pt` unless an existing point dominates or duplicates it; drops
/// every point `pt` dominates.
pub fn insert_nondominated(mut front: ParetoFront, pt: FrontPoint) -> ParetoFront {
    let new = pt.objectives;
    if front
        .points
        .iter()
        .any(|p| dominates(&p.objectives, &new) || near_duplicate(&p.objectives, &new))
    {
        return front;
    }
    front.points.retain(|p| !dominates(&new, &p.objectives));
    let at = front.points.partition_point(|p| {
        p.objectives.f1 < new.f1 || (p.objectives.f1 == new.f1 && p.objectives.f2 >= new.f2)
    });
    front.points.insert(at, pt);
    front
}

/// Weight grid for [`trace_front`], starting at `w = 1`.
///
/// After the accuracy endpoint, the trade-off ratio `(1−w)/w` runs
/// geometrically from `rho_min` to `rho_max`, so weights cluster near both
/// ends of `[0, 1]`.
pub fn weight_grid(size: usize, rho_min: f64, rho_max: f64) -> Vec<f64> {
    assert!(size >= 1);
    assert!(rho_min > 0.0 && rho_max >= rho_min);
    let mut out = vec![1.0];
    let k = size - 1;
    for i in 0..k {
        let t = if k == 1 {
            0.0
        } else {
            i as f64 / (k - 1) as f64
        };
        let rho = rho_min * (rho_max / rho_min).powf(t);
        out.push(1.0 / (1.0 + rho));
    }
    out
}

pub const DEFAULT_RHO_MIN: f64 = 1e-2;
pub const DEFAULT_RHO_MAX: f64 = 1e4;

pub fn default_weights(size: usize) -> Vec<f64> {
    weight_grid(size, DEFAULT_RHO_MIN, DEFAULT_RHO_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Weights solved in order, each warm-started from the previous solution.
    #[default]
    WarmSequential,
    /// Weights solved concurrently, each from the zero model.
    ColdParallel,
}

/// Ratio of the exact `f2_di` curvature to an upper bound on the `f1`
/// curvature.
///
/// `f2_di` is the square of an affine function with gradient direction
/// `s = (1/N) Σ (a_j − ā)(z_j, 1)`, so its Hessian is `2 s sᵀ`. The
/// logistic loss Hessian is bounded by `¼ (1/N) Σ ‖(z_j, 1)‖²` plus `λ`.
pub fn curvature_ratio(train: &Dataset, loss: &LossConfig) -> f64 {
    let s = covariance_direction(train, train.sensitive_mean());
    let f2_curv = 2.0 * s.iter().map(|v| v * v).sum::<f64>();
    let mean_sq = train
        .iter()
        .map(|r| 1.0 + r.features.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / train.len() as f64;
    f2_curv / (0.25 * mean_sq + loss.lambda)
}

/// Coefficients `(α1, α2)` of the objective minimized for weight `w`.
///
/// With `ρ = (1−w)/w`, the objective is `(f1 + ρ·f2) / (1 + ρ·κ)` where
/// `κ` is [`curvature_ratio`]. This is the weighted sum times a positive
/// constant, so it has the same minimizer, and its curvature stays on the
/// scale of `f1` for every weight; one step size then serves the whole
/// sweep. `w = 0` minimizes `f2` alone, scaled by `1/κ`.
pub fn scalarization(w: f64, kappa: f64) -> (f64, f64) {
    if w > 0.0 {
        let rho = (1.0 - w) / w;
        let norm = 1.0 + rho * kappa;
        (1.0 / norm, rho / norm)
    } else if kappa > 0.0 {
        (0.0, 1.0 / kappa)
    } else {
        (0.0, 1.0)
    }
}

/// `a1·∇f1 + a2·∇f2_di` on a batch, in one pass over the rows.
pub(crate) fn weighted_grad(
    m: &LinearModel,
    d: &Dataset,
    batch: &[usize],
    abar: f64,
    (a1, a2): (f64, f64),
    loss: &LossConfig,
) -> Result<Vec<f64>> {
    m.check_dim(d)?;
    check_batch(d, batch)?;
    let n = d.dim();
    let mut g1 = vec![0.0; n + 1];
    let mut dir = vec![0.0; n + 1];
    let mut cov = 0.0;
    for &i in batch {
        let z = d.row(i);
        let phi = m.phi(z);
        let y = d.label(i) as f64;
        let w1 = -y * sigmoid(-y * phi);
        let w2 = d.sensitive(i) as f64 - abar;
        cov += w2 * phi;
        for ((gj, sj), zj) in g1[..n].iter_mut().zip(&mut dir[..n]).zip(z) {
            *gj += w1 * zj;
            *sj += w2 * zj;
        }
        g1[n] += w1;
        dir[n] += w2;
    }
    let inv = 1.0 / batch.len() as f64;
    let c1 = a1 * inv;
    let c2 = a2 * 2.0 * (cov * inv) * inv;
    let mut g: Vec<f64> = g1.iter().zip(&dir).map(|(u, v)| c1 * u + c2 * v).collect();
    if loss.lambda != 0.0 {
        for (gj, cj) in g[..n].iter_mut().zip(&m.c) {
            *gj += a1 * loss.lambda * cj;
        }
    }
    Ok(g)
}

/// Minimizes the scalarized objective for weight `w` with SGD.
pub fn solve_weighted(
    train: &Dataset,
    w: f64,
    x0: &LinearModel,
    sgd: &SGDConfig,
    loss: &LossConfig,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidConfig(format!("weight {w} outside [0, 1]")));
    }
    let (a1, a2) = scalarization(w, curvature_ratio(train, loss));
    let abar = train.sensitive_mean();
    let grad = |m: &LinearModel, batch: &[usize]| -> Result<Vec<f64>> {
        weighted_grad(m, train, batch, abar, (a1, a2), loss)
    };
    let objective = |m: &LinearModel| -> Result<f64> {
        let f2 = f2_di(m, train)?;
        let f1 = if a1 != 0.0 {
            logistic_loss(m, train, loss)?
        } else {
            0.0
        };
        Ok(a1 * f1 + a2 * f2)
    };
    sgd_minimize(grad, objective, x0, train.len(), sgd)
}

/// Scalarized objective on a batch; used by tests and diagnostics.
pub fn weighted_objective_batch(
    m: &LinearModel,
    train: &Dataset,
    batch: &[usize],
    w: f64,
    loss: &LossConfig,
) -> Result<f64> {
    let (a1, a2) = scalarization(w, curvature_ratio(train, loss));
    let f2 = f2_di_batch(m, train, batch, train.sensitive_mean())?;
    let f1 = logistic_loss_batch(m, train, batch, loss)?;
    Ok(a1 * f1 + a2 * f2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontConfig {
    pub weights: Vec<f64>,
    pub sgd: SGDConfig,
    pub loss: LossConfig,
    pub mode: SweepMode,
}

fn front_point(
    model: LinearModel,
    w: f64,
    train: &Dataset,
    test: &Dataset,
    loss: &LossConfig,
) -> Result<FrontPoint> {
    Ok(FrontPoint {
        objectives: ObjectivePair::of(&model, train, loss)?,
        eval: FrontEval::of(&model, train, test)?,
        weight: w,
        model,
    })
}

/// Traces the front by solving one scalarized problem per weight and
/// filtering the solutions through [`insert_nondominated`].
pub fn trace_front(train: &Dataset, test: &Dataset, cfg: &FrontConfig) -> Result<ParetoFront> {
    if cfg.weights.is_empty() {
        return Err(Error::InvalidConfig("no weights given".into()));
    }
    for g in 0..2u8 {
        if train.group_count(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    let zero = LinearModel::zeros(train.dim());
    let seeded = |k: usize| SGDConfig {
        seed: cfg.sgd.seed.wrapping_add(k as u64),
        ..cfg.sgd
    };
    let iters = cfg.sgd.iterations;

    let points: Vec<FrontPoint> = match cfg.mode {
        SweepMode::WarmSequential => {
            let mut x = zero;
            let mut out = Vec::with_capacity(cfg.weights.len());
            for (k, &w) in cfg.weights.iter().enumerate() {
                // warm starts continue one batch schedule across the sweep
                let sgd = seeded(k).continued(k * iters);
                let traj = solve_weighted(train, w, &x, &sgd, &cfg.loss)?;
                x = traj.best_model;
                out.push(front_point(x.clone(), w, train, test, &cfg.loss)?);
            }
            out
        }
        SweepMode::ColdParallel => cfg
            .weights
            .par_iter()
            .enumerate()
            .map(|(k, &w)| {
                let traj = solve_weighted(train, w, &zero, &seeded(k), &cfg.loss)?;
                front_point(traj.best_model, w, train, test, &cfg.loss)
            })
            .collect::<Result<_>>()?,
    };
    Ok(ParetoFront::from_points(points))
}

/// One row of the exported front table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub weight: f64,
    pub f1_train: f64,
    pub f2_di_train: f64,
    pub error_train: f64,
    pub error_test: f64,
    pub cv_train: f64,
    pub cv_test: f64,
    pub accuracy_test: f64,
}

impl From<&FrontPoint> for FrontRow {
    fn from(p: &FrontPoint) -> Self {
        Self {
            weight: p.weight,
            f1_train: p.objectives.f1,
            f2_di_train: p.objectives.f2,
            error_train: p.eval.error_train,
            error_test: p.eval.error_test,
            cv_train: p.eval.train.cv_score,
            cv_test: p.eval.test.cv_score,
            accuracy_test: 1.0 - p.eval.error_test,
        }
    }
}

pub fn write_front_csv<W: Write>(front: &ParetoFront, w: W) -> Result<()> {
    if front.is_empty() {
        return Err(Error::EmptyFront);
    }
    let mut wtr = csv::Writer::from_writer(w);
    for p in front.points() {
        wtr.serialize(FrontRow::from(p))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the front table to `path`; an empty front writes nothing.
pub fn export_front(front: &ParetoFront, path: &Path) -> Result<()> {
    if front.is_empty() {
        return Err(Error::EmptyFront);
    }
    write_front_csv(front, File::create(path)?)
}

pub fn read_front_csv<R: Read>(r: R) -> Result<Vec<FrontRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// JSON form of a front point, with the model bound to its encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPointRecord {
    pub weight: f64,
    pub model: ModelRecord,
    pub objectives: ObjectivePair,
    pub eval: FrontEval,
}

pub fn front_records(front: &ParetoFront, schema_digest: &str) -> Vec<FrontPointRecord> {
    front
        .points()
        .iter()
        .map(|p| FrontPointRecord {
            weight: p.weight,
            model: ModelRecord::new(&p.model, schema_digest),
            objectives: p.objectives,
            eval: p.eval,
        })
        .collect()
}

/// Rebuilds a front from records, checking every model against `schema_digest`.
pub fn front_from_records(
    records: &[FrontPointRecord],
    schema_digest: &str,
) -> Result<ParetoFront> {
    let mut points = Vec::with_capacity(records.len());
    for r in records {
        if r.model.schema_digest != schema_digest {
            return Err(Error::SchemaMismatch {
                model: r.model.schema_digest.clone(),
                data: schema_digest.to_string(),
            });
        }
        points.push(FrontPoint {
            model: r.model.model()?,
            objectives: r.objectives,
            weight: r.weight,
            eval: r.eval,
        });
    }
    Ok(ParetoFront::from_points(points))
}
