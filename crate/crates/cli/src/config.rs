//! `key = value` experiment files. Keys are long flag names; values from the
//! file are placed ahead of the command-line arguments so that flags given
//! on the command line win.

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`, got '{text}'")]
    Syntax {
        path: String,
        line: usize,
        text: String,
    },
    #[error("{path}: flag '{key}' takes true or false, got '{value}'")]
    Switch {
        path: String,
        key: String,
        value: String,
    },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

/// Parses `text` into `(key, value)` pairs; `#` starts a comment.
pub fn parse(text: &str, path: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.into(),
            line: k + 1,
            text: raw.trim().into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                path: path.into(),
                line: k + 1,
                text: raw.trim().into(),
            });
        }
        out.push((key.trim_start_matches("--").to_string(), value.to_string()));
    }
    Ok(out)
}

/// Converts file entries into arguments. `switches` lists the boolean flags,
/// which appear only when their value is `true`.
pub fn to_args(
    entries: &[(String, String)],
    switches: &[&str],
    path: &str,
) -> Result<Vec<String>, ConfigError> {
    let mut args = Vec::new();
    for (key, value) in entries {
        if switches.contains(&key.as_str()) {
            match value.as_str() {
                "true" => args.push(format!("--{key}")),
                "false" => {}
                _ => {
                    return Err(ConfigError::Switch {
                        path: path.into(),
                        key: key.clone(),
                        value: value.clone(),
                    })
                }
            }
        } else {
            args.push(format!("--{key}"));
            args.push(value.clone());
        }
    }
    Ok(args)
}

/// Rewrites `argv` so that the entries of any `--config FILE` precede the
/// remaining arguments of the subcommand.
pub fn expand(argv: Vec<String>, switches: &[&str]) -> Result<Vec<String>, ConfigError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| ConfigError::Read {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let file_args = to_args(&parse(&text, &path)?, switches, &path)?;
    // Program name and subcommand stay in front.
    let head = rest.len().min(2);
    let mut out: Vec<String> = rest[..head].to_vec();
    out.extend(file_args);
    out.extend_from_slice(&rest[head..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let text = "# experiment\nproblem = sod\n\ncfl= 10 # target\n--n =1000\n";
        let got = parse(text, "f").unwrap();
        let want = [("problem", "sod"), ("cfl", "10"), ("n", "1000")];
        assert_eq!(got.len(), 3);
        for ((k, v), (wk, wv)) in got.iter().zip(want) {
            assert_eq!((k.as_str(), v.as_str()), (wk, wv));
        }
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(matches!(
            parse("problem sod", "f"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn switches_follow_their_value() {
        let entries = vec![
            ("ramp".to_string(), "true".to_string()),
            ("extra-diffusion".into(), "false".into()),
        ];
        assert_eq!(
            to_args(&entries, &["ramp", "extra-diffusion"], "f").unwrap(),
            vec!["--ramp"]
        );
        let bad = vec![("ramp".to_string(), "yes".to_string())];
        assert!(to_args(&bad, &["ramp"], "f").is_err());
    }

    #[test]
    fn file_values_precede_cli_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "cfl = 4\nn = 200\n").unwrap();
        let argv: Vec<String> = [
            "silag",
            "run",
            "--config",
            path.to_str().unwrap(),
            "--cfl",
            "8",
        ]
        .map(String::from)
        .to_vec();
        let out = expand(argv, &[]).unwrap();
        assert_eq!(
            out,
            ["silag", "run", "--cfl", "4", "--n", "200", "--cfl", "8"]
        );
    }
}
