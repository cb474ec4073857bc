//! The BayAirComp aggregation function next to the rescaled majority vote
//! and the linear estimate, for equal and unequal channel gains.

use bayaircomp::aggregation::{curve, linear_grid, AggregationContext};
use bayaircomp::gradient_model::GradientMoments;

fn main() -> bayaircomp::Result<()> {
    let grid = linear_grid(-10.0, 10.0, 11);
    let prior = vec![GradientMoments::new(0.0, 1.0)?; 5];
    for (label, gains) in [
        ("equal gains", vec![1.0; 5]),
        ("|h_1| = 5", vec![5.0, 1.0, 1.0, 1.0, 1.0]),
    ] {
        for noise_variance in [0.1, 0.5, 2.0] {
            let ctx = AggregationContext::new(gains.clone(), prior.clone(), noise_variance)?;
            println!("{label}, sigma^2 = {noise_variance}");
            println!(
                "{:>8} {:>11} {:>11} {:>11}",
                "y", "bayaircomp", "majority", "naive"
            );
            for p in curve(&ctx, &grid)? {
                println!(
                    "{:>8.2} {:>11.6} {:>11.6} {:>11.6}",
                    p.y, p.bayaircomp, p.majority, p.naive
                );
            }
            println!();
        }
    }
    Ok(())
}
