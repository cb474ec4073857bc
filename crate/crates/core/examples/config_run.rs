//! Drives the suite runner from a TOML description, as the command-line
//! tool does, and lists the artifacts it writes.

use bayaircomp::experiment::{run_suite, ExperimentConfig};

const CONFIG: &str = r#"
suite = "curves"
seed = 3
curve_devices = 3
curve_points = 201
curve_noise_variances = [0.5]
"#;

fn main() -> bayaircomp::Result<()> {
    let dir = std::env::temp_dir().join("bayaircomp-config-run");
    let overrides = [(
        "output_dir".to_string(),
        format!("{:?}", dir.display().to_string()),
    )];
    let cfg = ExperimentConfig::from_toml_with(CONFIG, &overrides)?;
    let outcome = run_suite(&cfg)?;
    println!("config hash {}", outcome.config_hash);
    for path in &outcome.artifacts {
        let text = std::fs::read_to_string(path)?;
        println!("{} ({} lines)", path.display(), text.lines().count());
        for line in text.lines().take(8) {
            println!("  {line}");
        }
    }
    Ok(())
}
