//! Paired Monte-Carlo MSE of BayAirComp, the linear estimate and the
//! rescaled majority vote.

use bayaircomp::aggregation::AggregationContext;
use bayaircomp::analysis::{compare_estimators, ChannelDraw};
use bayaircomp::rng::stream;

fn main() -> bayaircomp::Result<()> {
    for noise_variance in [0.1, 0.5, 2.0] {
        let ctx = AggregationContext::homogeneous(5, 1.0, 0.0, 1.0, noise_variance)?;
        for channel in [ChannelDraw::Fixed, ChannelDraw::Rayleigh] {
            let cmp = compare_estimators(&ctx, channel, 50_000, &mut stream(5, "cmp", 0))?;
            println!(
                "sigma^2 = {noise_variance}, {channel:?}: bayaircomp {:.4}, naive {:.4} ({:+.1}%), majority {:.4} ({:+.1}%)",
                cmp.bayaircomp.mean,
                cmp.naive_mean.mean,
                100.0 * cmp.naive_margin(),
                cmp.scaled_majority.mean,
                100.0 * cmp.majority_margin()
            );
        }
    }
    Ok(())
}
