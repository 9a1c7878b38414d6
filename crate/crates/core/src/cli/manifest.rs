use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::trainer::Phase;

pub const MANIFEST_HEADER: &str = "identity,phase,source,output";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub identity: String,
    pub phase: Phase,
    /// Input file name.
    pub source: String,
    /// Output file name, relative to the manifest's directory.
    pub output: String,
}

/// Splits `<identity>_<PRE|POST>.jpg` (extension `.jpg` or `.jpeg`, any case).
pub fn parse_input_name(name: &str) -> Result<(String, Phase)> {
    let bad = |why: &str| Error::Input(format!("file name `{name}` {why}; expected <identity>_<PRE|POST>.jpg"));
    let lower = name.to_ascii_lowercase();
    let stem_len = if lower.ends_with(".jpg") {
        name.len() - 4
    } else if lower.ends_with(".jpeg") {
        name.len() - 5
    } else {
        return Err(bad("is not a .jpg"));
    };
    let (identity, phase) = name[..stem_len].rsplit_once('_').ok_or_else(|| bad("has no phase suffix"))?;
    let phase = match phase.to_ascii_uppercase().as_str() {
        "PRE" => Phase::Pre,
        "POST" => Phase::Post,
        _ => return Err(bad("has an unknown phase")),
    };
    if identity.is_empty() || identity.contains([',', '"', '\n', '\r']) {
        return Err(bad("has an empty or unusable identity"));
    }
    Ok((identity.to_string(), phase))
}

fn phase_field(p: Phase) -> &'static str {
    match p {
        Phase::Pre => "PRE",
        Phase::Post => "POST",
    }
}

/// `# key = value` lines for the effective config, the header, then rows.
pub fn write_manifest(rows: &[ManifestRow], cfg: &RunConfig) -> String {
    let mut s = String::new();
    for line in cfg.to_text().lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(MANIFEST_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.identity, phase_field(r.phase), r.source, r.output));
    }
    s
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
        _ => return Err(Error::Config(format!("manifest header must be `{MANIFEST_HEADER}`"))),
    }
    lines
        .map(|(n, l)| {
            let f: Vec<&str> = l.trim().split(',').collect();
            let bad = || Error::Config(format!("manifest line {}: malformed row `{l}`", n + 1));
            if f.len() != 4 || f.iter().any(|x| x.is_empty()) {
                return Err(bad());
            }
            let phase = match f[1] {
                "PRE" => Phase::Pre,
                "POST" => Phase::Post,
                _ => return Err(bad()),
            };
            Ok(ManifestRow { identity: f[0].into(), phase, source: f[2].into(), output: f[3].into() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(parse_input_name("alice_PRE.jpg").unwrap(), ("alice".into(), Phase::Pre));
        assert_eq!(parse_input_name("a_b_POST.JPEG").unwrap(), ("a_b".into(), Phase::Post));
        for bad in ["alice.jpg", "_PRE.jpg", "alice_MID.jpg", "alice_PRE.png", "a,b_PRE.jpg"] {
            assert!(parse_input_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn manifest_round_trip() {
        let rows = vec![
            ManifestRow { identity: "x".into(), phase: Phase::Pre, source: "x_PRE.jpg".into(), output: "x_PRE.ppm".into() },
            ManifestRow { identity: "x".into(), phase: Phase::Post, source: "x_POST.jpg".into(), output: "x_POST.ppm".into() },
        ];
        let text = write_manifest(&rows, &RunConfig::default());
        assert_eq!(read_manifest(&text).unwrap(), rows);
        assert!(read_manifest("").is_err());
        assert!(read_manifest(&format!("{MANIFEST_HEADER}\nx,MID,a,b\n")).is_err());
    }
}
