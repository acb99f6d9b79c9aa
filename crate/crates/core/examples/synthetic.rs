//! Traces a front on synthetic biased data and solves for the Sharpe
//! predictor.
//!
//!     cargo run --release --example synthetic -- [dim]

use fair_sharpe::data::{split, standardize, synthesize};
use fair_sharpe::pareto::{default_weights, trace_front, SweepMode};
use fair_sharpe::sharpe::{default_ff, ratio_of, solve_sharpe, verify_nondominated};
use fair_sharpe::{FrontConfig, LossConfig, SGDConfig, SharpeConfig, SplitSpec, SynthSpec};

fn main() -> fair_sharpe::Result<()> {
    let dim = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2);
    let data = synthesize(&SynthSpec::biased(dim, 2_000), 7)?;
    let (train, test) = split(
        &data,
        SplitSpec {
            n_train: 1_500,
            seed: 1,
        },
    )?;
    let (train, scaling) = standardize(&train);
    let test = scaling.apply(&test)?;

    let cfg = FrontConfig {
        weights: default_weights(50),
        sgd: SGDConfig::default(),
        loss: LossConfig::default(),
        mode: SweepMode::WarmSequential,
    };
    let front = trace_front(&train, &test, &cfg)?;
    let ff = default_ff(&front, 0.024)?;

    println!(
        "{:>9} {:>9} {:>10} {:>7} {:>9}",
        "weight", "f1", "f2_di", "cv", "ratio"
    );
    for p in front.points() {
        println!(
            "{:>9.5} {:>9.5} {:>10.3e} {:>7.3} {:>9.3}",
            p.weight,
            p.objectives.f1,
            p.objectives.f2,
            p.eval.test.cv_score,
            ratio_of(&p.objectives, ff, 1e-12)
        );
    }

    let mut result = solve_sharpe(&train, &test, &SharpeConfig::new(ff), Some(&front))?;
    let nd = verify_nondominated(&mut result, &front, 1e-4);
    println!(
        "sharpe: f1 {:.5} f2_di {:.3e} ratio {:.4} test error {:.3} test cv {:.3} nondominated {nd}",
        result.f1, result.f2, result.ratio, result.eval.error_test, result.eval.cv_test
    );
    Ok(())
}
