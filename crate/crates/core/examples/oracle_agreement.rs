//! Closed-form posterior mean against brute-force quadrature on random
//! channels and priors.

use bayaircomp::experiment::oracle_cases;

fn main() -> bayaircomp::Result<()> {
    let cases = oracle_cases(7, 3, 20, 64)?;
    for k in 1..=3 {
        let worst = cases
            .iter()
            .filter(|c| c.devices == k)
            .map(|c| c.abs_diff())
            .fold(0.0, f64::max);
        println!("K = {k}: max |closed form - quadrature| = {worst:.3e}");
    }
    let c = &cases[cases.len() - 1];
    println!(
        "example: y = {:.4}, gains {:?}, closed form {:.12}, oracle {:.12}",
        c.y, c.context.channel_magnitudes, c.closed_form, c.oracle
    );
    Ok(())
}
