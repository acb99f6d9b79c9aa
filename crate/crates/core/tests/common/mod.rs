#![allow(dead_code)]

use fair_sharpe::data::{split, standardize, synthesize, SplitSpec, SynthSpec};
use fair_sharpe::{Dataset, LinearModel};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Biased synthetic data split 3:1 and standardized on the training part.
pub fn fixture(dim: usize, total: usize, seed: u64) -> (Dataset, Dataset) {
    let d = synthesize(&SynthSpec::biased(dim, total), seed).unwrap();
    let (train, test) = split(
        &d,
        SplitSpec {
            n_train: total * 3 / 4,
            seed,
        },
    )
    .unwrap();
    let (train, params) = standardize(&train);
    let test = params.apply(&test).unwrap();
    (train, test)
}

/// Central difference of `f` at `x` along each coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            xp[j] = x[j] + h;
            let up = f(&xp);
            xp[j] = x[j] - h;
            let down = f(&xp);
            xp[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute gap when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

pub const FD_STEP: f64 = 1e-5;
pub const PROBES: usize = 20;

pub struct Probe {
    pub model: LinearModel,
    pub batch: Vec<usize>,
}

/// Random models in a box; every other probe uses the full set, the rest a
/// sorted batch of 64.
pub fn probes(d: &Dataset, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PROBES)
        .map(|k| {
            let c = (0..d.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let batch = if k % 2 == 0 {
                (0..d.len()).collect()
            } else {
                let mut v = sample(&mut rng, d.len(), 64).into_vec();
                v.sort_unstable();
                v
            };
            Probe {
                model: LinearModel::new(c, b),
                batch,
            }
        })
        .collect()
}

/// Largest relative gap between `grad` and central differences of `value`
/// over the probes.
pub fn max_gradient_error<F, G>(d: &Dataset, seed: u64, value: F, grad: G) -> f64
where
    F: Fn(&LinearModel, &[usize]) -> f64,
    G: Fn(&LinearModel, &[usize]) -> Vec<f64>,
{
    probes(d, seed)
        .iter()
        .map(|p| {
            let g = grad(&p.model, &p.batch);
            let fd = central_difference(
                |x| value(&LinearModel::from_params(x), &p.batch),
                &p.model.params(),
                FD_STEP,
            );
            relative_error(&g, &fd)
        })
        .fold(0.0, f64::max)
}
