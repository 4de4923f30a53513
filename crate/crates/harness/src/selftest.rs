//! Fast invariant checks runnable from the CLI (`cheapboot selftest`).

use anyhow::Result;

use cheapboot::baselines::{batch_layout, batch_means_interval, BatchLayout};
use cheapboot::cheap::{cofb_from_outputs, conb_with_weights, resample_indices};
use cheapboot::engine::{GradientWeights, StepSchedule, WeightSource};
use cheapboot::problems::{gen_linear, CovarianceFamily, LeastSquares};
use cheapboot::rng::derive_stream;
use cheapboot::stats::t_quantile;
use cheapboot::{MethodTag, Vector64};

use crate::cell::run_cell;
use crate::config::{ExperimentConfig, MethodSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

pub fn run_selftest() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let t: f64 = t_quantile(1, 0.975)?;
    out.push(check("t quantile", (t - 12.706_204_736_174_705).abs() < 1e-9, format!("t_1(0.975) = {t}")));

    let n = 10_000;
    let mut frac = 0.0;
    for r in 0..20 {
        let mut seen = vec![false; n];
        for i in resample_indices(n, &mut derive_stream(1, &[r]))? {
            seen[i] = true;
        }
        frac += seen.iter().filter(|&&s| s).count() as f64 / n as f64 / 20.0;
    }
    out.push(check("resample inclusion", (frac - 0.632).abs() <= 0.02, format!("fraction {frac:.4}")));

    let mut w = WeightSource::Exponential(derive_stream(2, &[]));
    let mean = (0..100_000).map(|_| GradientWeights::<f64>::next_weight(&mut w)).sum::<f64>() / 1e5;
    out.push(check("exponential weights", (0.99..=1.01).contains(&mean), format!("mean {mean:.4}")));

    let layout = batch_layout(10_000, 0.501, 10)?;
    out.push(check(
        "batch layout",
        layout.boundaries() == [82, 328, 740, 1317, 2060, 2968, 4042, 5283, 6689, 8261, 10000],
        format!("{:?}", layout.boundaries()),
    ));

    let x = Vector64::from_vec(vec![0.25, -1.0]);
    let flat = cofb_from_outputs(x.clone(), &[x.clone(), x.clone()], 0.95, MethodTag::CofbAsgd, 1)?;
    let bm = batch_means_interval(&vec![x.clone(); 9], &BatchLayout::from_boundaries(vec![1, 4, 8])?, 0.95)?;
    out.push(check(
        "zero-width degenerate cases",
        flat.half_widths().iter().chain(bm.half_widths().iter()).all(|&h| h == 0.0),
        "",
    ));

    let (data, _) = gen_linear::<f64, _>(1_000, 3, CovarianceFamily::Identity, 1.0, &mut derive_stream(3, &[]))?;
    let sched = StepSchedule::new(0.5, 0.501)?;
    let iv = conb_with_weights(&LeastSquares { dim: 3 }, &data, &sched, &Vector64::zeros(3), vec![WeightSource::Unit], 0.95)?;
    out.push(check(
        "unit-weight thread equals original",
        iv.standard_errors().iter().all(|&s| s == 0.0),
        "",
    ));

    let cfg = ExperimentConfig {
        n: 500,
        trials: 8,
        method: MethodSpec::Conb { replicates: 3 },
        ..ExperimentConfig::desk_default()
    };
    let (mut a, mut b) = (run_cell(&cfg)?, run_cell(&cfg)?);
    a.wall_time_s = 0.0;
    b.wall_time_s = 0.0;
    out.push(check("deterministic cells", a == b, ""));

    Ok(out)
}
