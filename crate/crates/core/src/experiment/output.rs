//! Artifact writers. Floats carry 17 significant digits, lines end in LF,
//! and every file opens with the config hash and seed, so reruns with the
//! same configuration are byte-identical.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// Provenance written at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactHeader {
    pub config_hash: String,
    pub seed: u64,
    pub suite: String,
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `# key: value` header lines followed by a CSV table.
pub fn write_csv(
    path: &Path,
    header: &ArtifactHeader,
    extra: &[(&str, String)],
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(format!("# config_hash: {}\n", header.config_hash).as_bytes());
    out.extend_from_slice(format!("# seed: {}\n", header.seed).as_bytes());
    out.extend_from_slice(format!("# suite: {}\n", header.suite).as_bytes());
    for (key, value) in extra {
        out.extend_from_slice(format!("# {key}: {value}\n").as_bytes());
    }
    {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        writer.write_record(columns)?;
        for row in rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct JsonArtifact<'a, T: Serialize> {
    header: &'a ArtifactHeader,
    result: &'a T,
}

/// Pretty-printed `{"header": ..., "result": ...}` with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, header: &ArtifactHeader, result: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&JsonArtifact { header, result })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> ArtifactHeader {
        ArtifactHeader {
            config_hash: "ab".into(),
            seed: 3,
            suite: "curves".into(),
        }
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 0.797_884_560_802_865_4, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_csv(
            &path,
            &header(),
            &[("noise_variance", "0.5".into())],
            &["y", "f"],
            &[vec!["1".into(), fmt_f64(0.25)]],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# config_hash: ab\n# seed: 3\n# suite: curves\n# noise_variance: 0.5\ny,f\n1,2.5000000000000000e-1\n"
        );
        assert!(!text.contains('\r'));
    }

    #[test]
    fn json_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        write_json(&path, &header(), &vec![1.5]).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(value["header"]["seed"], 3);
        assert_eq!(value["result"][0], 1.5);
    }
}
