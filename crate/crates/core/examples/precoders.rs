//! Sign alignment against truncated channel inversion: transmitted symbols,
//! power, and the gains seen by the server.

use bayaircomp::gradient_model::SignVector;
use bayaircomp::precoding::{check_power, PrecoderSpec};

fn main() -> bayaircomp::Result<()> {
    let signs = SignVector::from_entries(vec![1, -1, 1, 1])?;
    let align = PrecoderSpec::sign_align();
    let invert = PrecoderSpec::truncated_inversion(1.0, PrecoderSpec::DEFAULT_THRESHOLD);
    for h in [1.3, -0.7, 0.25, -0.1] {
        for (name, spec) in [("sign-align", align), ("truncated", invert)] {
            let x = spec.precode(h, &signs);
            println!(
                "h = {h:>5}: {name:<10} x = {x:>+.3?} gain {:.3} power ok {}",
                spec.effective_gain(h),
                check_power(&x, spec.power_limit)
            );
        }
    }
    Ok(())
}
