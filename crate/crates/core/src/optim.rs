//! Stochastic gradient descent with geometrically growing batches.
//!
//! Growing the batch until it covers the whole training set makes the
//! batch gradient a consistent estimator of the full gradient; once the
//! schedule reaches `N` the method is plain gradient descent.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SGDConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub batch0: usize,
    pub growth: f64,
    pub seed: u64,
    /// Iterations between objective evaluations on the full set.
    pub checkpoint_every: usize,
    /// Added to the iteration index before consulting the batch schedule,
    /// so a warm-started run continues an earlier run's schedule.
    pub schedule_offset: usize,
}

impl Default for SGDConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            iterations: 6_500,
            batch0: 8,
            growth: 1.001,
            seed: 0,
            checkpoint_every: 50,
            schedule_offset: 0,
        }
    }
}

impl SGDConfig {
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step_size must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(Error::InvalidConfig("growth must be >= 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidConfig(
                "checkpoint_every must be positive".into(),
            ));
        }
        if self.batch0 == 0 || self.batch0 > n_samples {
            return Err(Error::InvalidBatchSize {
                size: self.batch0,
                n: n_samples,
            });
        }
        Ok(())
    }

    /// Same config with the batch schedule advanced by `iters`.
    pub fn continued(mut self, iters: usize) -> Self {
        self.schedule_offset = self.schedule_offset.saturating_add(iters);
        self
    }

    pub fn full_batch(mut self, n_samples: usize) -> Self {
        self.batch0 = n_samples;
        self.growth = 1.0;
        self
    }
}

/// `min(N, ceil(batch0 · growth^t))`.
pub fn batch_schedule(t: usize, cfg: &SGDConfig, n_samples: usize) -> usize {
    if cfg.batch0 >= n_samples {
        return n_samples;
    }
    if cfg.growth == 1.0 {
        return cfg.batch0;
    }
    let size = (cfg.batch0 as f64 * cfg.growth.powf(t as f64)).ceil();
    if size >= n_samples as f64 {
        n_samples
    } else {
        size as usize
    }
}

/// Uniform sample of `size` distinct indices from `0..n_samples`, sorted
/// ascending so that a full batch sums in dataset order.
pub fn sample_batch(n_samples: usize, size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if size == 0 || size > n_samples {
        return Err(Error::InvalidBatchSize { size, n: n_samples });
    }
    if size == n_samples {
        return Ok((0..n_samples).collect());
    }
    let mut idx = rand::seq::index::sample(rng, n_samples, size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iter: usize,
    pub objective: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    /// Running minimum of the checkpoint objectives.
    pub best_so_far: Vec<f64>,
    pub best_model: LinearModel,
    pub best_iter: usize,
    pub final_model: LinearModel,
    pub batch_sizes: Vec<usize>,
}

impl Trajectory {
    pub fn best_objective(&self) -> f64 {
        *self.best_so_far.last().expect("at least one checkpoint")
    }

    /// One JSON object per checkpoint: `{"iter","objective","batch"}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.checkpoints {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs `x_{t+1} = x_t − step · g_t`, where `g_t` comes from `grad` on a
/// batch of size [`batch_schedule`]`(t + schedule_offset)`.
///
/// `objective` is evaluated at iteration 0, every `checkpoint_every`
/// iterations and at the end; the best checkpoint is kept.
pub fn sgd_minimize<G, F>(
    mut grad: G,
    objective: F,
    x0: &LinearModel,
    n_samples: usize,
    cfg: &SGDConfig,
) -> Result<Trajectory>
where
    G: FnMut(&LinearModel, &[usize]) -> Result<Vec<f64>>,
    F: Fn(&LinearModel) -> Result<f64>,
{
    cfg.validate(n_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.params();
    let mut model = x0.clone();

    let f0 = objective(&model)?;
    let mut checkpoints = vec![Checkpoint {
        iter: 0,
        objective: f0,
        batch: batch_schedule(cfg.schedule_offset, cfg, n_samples),
    }];
    let mut best = f0;
    let mut best_so_far = vec![best];
    let mut best_model = model.clone();
    let mut best_iter = 0;
    let mut batch_sizes = Vec::with_capacity(cfg.iterations);

    for t in 0..cfg.iterations {
        let size = batch_schedule(t.saturating_add(cfg.schedule_offset), cfg, n_samples);
        batch_sizes.push(size);
        let batch = sample_batch(n_samples, size, &mut rng)?;
        let g = grad(&model, &batch)?;
        if g.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: g.len(),
            });
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= cfg.step_size * gi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { iter: t + 1 });
        }
        model = LinearModel::from_params(&x);

        let iter = t + 1;
        if iter % cfg.checkpoint_every == 0 || iter == cfg.iterations {
            let f = objective(&model)?;
            checkpoints.push(Checkpoint {
                iter,
                objective: f,
                batch: size,
            });
            if f < best {
                best = f;
                best_model = model.clone();
                best_iter = iter;
            }
            best_so_far.push(best);
        }
    }

    Ok(Trajectory {
        checkpoints,
        best_so_far,
        best_model,
        best_iter,
        final_model: model,
        batch_sizes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub sizes: Vec<usize>,
    /// Mean `‖g^size − ∇f‖` over the draws at each size.
    pub mean_errors: Vec<f64>,
    pub monotone: bool,
}

/// Monte-Carlo estimate of batch-gradient error at each batch size.
pub fn estimator_consistency_check<G>(
    mut grad: G,
    exact: &[f64],
    n_samples: usize,
    sizes: &[usize],
    draws: usize,
    seed: u64,
) -> Result<ConsistencyReport>
where
    G: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    if draws == 0 {
        return Err(Error::InvalidConfig("draws must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean_errors = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut total = 0.0;
        for _ in 0..draws {
            let batch = sample_batch(n_samples, size, &mut rng)?;
            let g = grad(&batch)?;
            total += g
                .iter()
                .zip(exact)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
        mean_errors.push(total / draws as f64);
    }
    let monotone = mean_errors.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConsistencyReport {
        sizes: sizes.to_vec(),
        mean_errors,
        monotone,
    })
}
