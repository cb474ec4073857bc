//! `E[g_true^T e]` across noise levels, approaching its two analytic limits.

use bayaircomp::aggregation::AggregationContext;
use bayaircomp::analysis::{grad_error_inner_product, inner_product_limits};
use bayaircomp::gradient_model::GradientMoments;
use bayaircomp::rng::stream;

fn main() -> bayaircomp::Result<()> {
    let ctx = AggregationContext::new(
        vec![1.0, 0.6],
        vec![GradientMoments::new(0.0, 1.0)?; 2],
        0.5,
    )?;
    let (low_snr, high_snr) = inner_product_limits(10, &ctx);
    println!("limits: {low_snr:.4} (SNR -> 0), {high_snr:.4} (SNR -> inf)");
    for (i, noise_variance) in [1e-8, 1e-2, 0.1, 1.0, 10.0, 1e3, 1e8]
        .into_iter()
        .enumerate()
    {
        let est = grad_error_inner_product(
            &ctx,
            10,
            50_000,
            Some(noise_variance),
            &mut stream(3, "ip", i as u64),
        )?;
        println!(
            "sigma^2 = {noise_variance:>8.0e}: {:.4} +- {:.4}",
            est.mean, est.std_error
        );
    }
    Ok(())
}
