//! Federated logistic regression over a fading channel with label-skewed
//! devices: BayAirComp against truncated inversion with majority vote.

use bayaircomp::aggregation::Aggregator;
use bayaircomp::experiment::{build_federation, ExperimentConfig};
use bayaircomp::fedtrain::EstimateConvention;
use bayaircomp::precoding::PrecoderKind;

fn main() -> bayaircomp::Result<()> {
    let base = ExperimentConfig {
        rounds: 300,
        convention: EstimateConvention::Sum,
        ..ExperimentConfig::default()
    };
    let schemes = [
        (
            "bayaircomp",
            Aggregator::BayAirComp,
            PrecoderKind::SignAlign,
        ),
        (
            "majority vote",
            Aggregator::MajorityVote,
            PrecoderKind::TruncatedInversion,
        ),
    ];
    for (name, aggregator, precoder) in schemes {
        let cfg = ExperimentConfig {
            aggregator,
            precoder,
            ..base.clone()
        };
        let run = build_federation(&cfg)?.run_with(|m| {
            if m.round % 50 == 0 {
                println!(
                    "{name:>14} round {:>3}: loss {:.4} agg mse {:.4}",
                    m.round, m.loss, m.agg_mse
                );
            }
        })?;
        println!(
            "{name:>14} final: loss {:.4}, test accuracy {:.3}",
            run.final_loss,
            run.final_accuracy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
