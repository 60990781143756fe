//! Model-file parsing: a flat key-value text format with repeated `[jump]`
//! blocks, or the same content as JSON.
//!
//! ```text
//! # case-study parameters
//! c = 2.0
//! sigma = 1.0
//! q = 4.0
//! delta = 1.8
//! S = 0.05
//!
//! [jump]
//! lambda = 1.0
//! p = 0.5
//! ```

use crate::error::{Error, Result};
use crate::model::{JumpComponent, LevyModel};

/// Parses either format; JSON input starts with `{`.
pub fn parse_model(text: &str) -> Result<LevyModel> {
    if text.trim_start().starts_with('{') {
        let m: LevyModel = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("bad JSON model: {e}")))?;
        // Route through the constructor so structural checks run.
        LevyModel::new(m.c, m.sigma, m.jumps, m.q, m.delta, m.s)
    } else {
        parse_flat(text)
    }
}

fn parse_flat(text: &str) -> Result<LevyModel> {
    let mut top: std::collections::HashMap<&str, f64> = Default::default();
    let mut jumps: Vec<(Option<f64>, Option<f64>)> = Vec::new();
    let mut in_jump = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.eq_ignore_ascii_case("[jump]") {
            jumps.push((None, None));
            in_jump = true;
            continue;
        }
        if line.starts_with('[') {
            return Err(Error::InvalidConfig(format!(
                "line {}: unknown section {line}",
                lineno + 1
            )));
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("line {}: bad number for {key}", lineno + 1))
        })?;
        if in_jump && (key == "lambda" || key == "p") {
            let slot = jumps.last_mut().expect("inside a jump block");
            match key {
                "lambda" => slot.0 = Some(value),
                _ => slot.1 = Some(value),
            }
        } else {
            let canonical = match key {
                "c" => "c",
                "sigma" => "sigma",
                "q" => "q",
                "delta" => "delta",
                "S" | "s" => "S",
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "line {}: unknown key {other}",
                        lineno + 1
                    )))
                }
            };
            top.insert(canonical, value);
        }
    }

    let get = |k: &str| {
        top.get(k)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("missing key {k}")))
    };
    let jumps: Vec<JumpComponent> = jumps
        .into_iter()
        .enumerate()
        .map(|(i, (lambda, p))| match (lambda, p) {
            (Some(lambda), Some(p)) => Ok(JumpComponent { lambda, p }),
            _ => Err(Error::InvalidConfig(format!(
                "jump block {} needs both lambda and p",
                i + 1
            ))),
        })
        .collect::<Result<_>>()?;

    LevyModel::new(
        get("c")?,
        get("sigma")?,
        jumps,
        get("q")?,
        get("delta")?,
        get("S")?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = "
# comment
c = 2.0
sigma = 1.0
q = 4.0
delta = 1.8
S = 0.05

[jump]
lambda = 1.0
p = 0.5
";

    #[test]
    fn parses_flat_format() {
        let m = parse_model(FLAT).unwrap();
        assert_eq!(m.c, 2.0);
        assert_eq!(m.jumps.len(), 1);
        assert_eq!(m.jumps[0].p, 0.5);
        assert_eq!(m.s, 0.05);
    }

    #[test]
    fn parses_json_format() {
        let json = r#"{"c":2.0,"sigma":1.0,"jumps":[{"lambda":1.0,"p":0.5}],"q":4.0,"delta":1.8,"S":0.05}"#;
        let m = parse_model(json).unwrap();
        assert_eq!(m.delta, 1.8);
        assert_eq!(m.jumps[0].lambda, 1.0);
    }

    #[test]
    fn missing_keys_are_reported() {
        assert!(matches!(
            parse_model("c = 1.0"),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn incomplete_jump_block_is_reported() {
        let text = "c=2\nsigma=1\nq=4\ndelta=1.8\nS=0.05\n[jump]\nlambda=1.0\n";
        assert!(matches!(parse_model(text), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn multiple_jump_blocks() {
        let text = "c=2\nsigma=1\nq=4\ndelta=1.8\nS=0.02\n[jump]\nlambda=1\np=0.5\n[jump]\nlambda=0.3\np=2.0\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.jumps.len(), 2);
        assert_eq!(m.jumps[1].p, 2.0);
    }
}
