//! Convergence-rate bound over the number of rounds, including a
//! smoothness constant computed from a regression dataset.

use bayaircomp::analysis::{convergence_bound, linear_regression_smoothness, mse_bound};
use bayaircomp::experiment::{load_dataset, DatasetKind, ExperimentConfig};
use bayaircomp::fedtrain::ModelKind;

fn main() -> bayaircomp::Result<()> {
    for t in [10, 100, 1_000, 10_000, 100_000, 1_000_000] {
        println!(
            "T = {t:>9}: {:.6}",
            convergence_bound(t, 0.1, 1.0, 1.0, 1.0)?
        );
    }

    let cfg = ExperimentConfig {
        dataset: DatasetKind::SyntheticRegression,
        model: ModelKind::LinearRegression,
        ..ExperimentConfig::default()
    };
    let data = load_dataset(&cfg)?.train;
    let smoothness = linear_regression_smoothness(&data)?;
    let sigma = mse_bound(data.feature_dim, 5, &[0.5; 5]);
    let gamma = 1.0 / smoothness;
    println!("L = {smoothness:.4}, gamma = {gamma:.4}, sigma_MSE^2 = {sigma:.4}");
    for t in [100, 10_000] {
        println!(
            "T = {t:>9}: {:.6}",
            convergence_bound(t, gamma, smoothness, sigma, 1.0)?
        );
    }
    if let Err(e) = convergence_bound(100, 2.0 * gamma, smoothness, sigma, 1.0) {
        println!("gamma = 2/L: {e}");
    }
    Ok(())
}
