//! Monte-Carlo aggregation error against the analytic MSE bound.

use bayaircomp::aggregation::AggregationContext;
use bayaircomp::analysis::{empirical_mse, mse_bound};
use bayaircomp::rng::stream;

fn main() -> bayaircomp::Result<()> {
    println!(
        "bound for M=10, K=5, nu=1: {:.4}",
        mse_bound(10, 5, &[1.0; 5])
    );
    for noise_variance in [0.01, 0.5, 10.0] {
        let ctx = AggregationContext::homogeneous(5, 1.0, 0.0, 1.0, noise_variance)?;
        let report = empirical_mse(&ctx, 100, 10_000, &mut stream(1, "mse", 0))?;
        println!(
            "sigma^2 = {noise_variance:>5}: E||e||^2 = {:.4} +- {:.4}, bound {:.4}, satisfied {}",
            report.empirical, report.standard_error, report.analytic, report.satisfied
        );
    }
    Ok(())
}
