use std::fs;

use toml::Value;

use crate::UsageError;

fn flag_present(argv: &[String], flag: &str) -> bool {
    argv.iter()
        .any(|a| a == flag || a.strip_prefix(flag).is_some_and(|rest| rest.starts_with('=')))
}

fn scalar(key: &str, value: &Value) -> Result<Option<String>, UsageError> {
    match value {
        Value::String(s) => Ok(Some(s.clone())),
        Value::Integer(i) => Ok(Some(i.to_string())),
        Value::Float(f) => Ok(Some(f.to_string())),
        Value::Boolean(_) => Ok(None),
        _ => Err(UsageError(format!("config key {key:?}: nested values are not supported"))),
    }
}

/// Expands `--config FILE` into command-line flags.
///
/// The file is a flat TOML table whose keys are flag names (`learning_rate`
/// or `learning-rate`). Flags given on the command line win over the file.
/// `true` becomes a bare switch, `false` is skipped, and arrays repeat the flag.
/// The returned list no longer mentions the config file, so it can be
/// replayed without it.
pub fn merge_config(argv: Vec<String>) -> anyhow::Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            match it.next() {
                Some(p) => path = Some(p),
                None => return Err(UsageError("--config needs a file path".into()).into()),
            }
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = fs::read_to_string(&path).map_err(|e| UsageError(format!("cannot read config {path}: {e}")))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| UsageError(format!("config {path} is not valid TOML: {e}")))?;

    let mut extra = Vec::new();
    for (key, value) in &table {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag_present(&rest, &flag) {
            continue;
        }
        match value {
            Value::Boolean(true) => extra.push(flag),
            Value::Array(items) => {
                for item in items {
                    if let Some(v) = scalar(key, item)? {
                        extra.push(flag.clone());
                        extra.push(v);
                    }
                }
            }
            other => {
                if let Some(v) = scalar(key, other)? {
                    extra.push(flag);
                    extra.push(v);
                }
            }
        }
    }
    log::debug!("config {path} adds {extra:?}");
    rest.extend(extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "epochs = 3\nlearning_rate = 5e-5\nmodel = [\"a\", \"b\"]\nquiet = true\ndry = false\n").unwrap();
        let merged = merge_config(args(&["train", "--epochs=7", "--config", cfg.to_str().unwrap()])).unwrap();
        assert_eq!(
            merged,
            args(&["train", "--epochs=7", "--learning-rate", "0.00005", "--model", "a", "--model", "b", "--quiet"])
        );
    }

    #[test]
    fn no_config_is_identity() {
        let a = args(&["generate", "--model", "mock:"]);
        assert_eq!(merge_config(a.clone()).unwrap(), a);
    }

    #[test]
    fn nested_tables_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "[section]\nx = 1\n").unwrap();
        let err = merge_config(args(&["train", &format!("--config={}", cfg.display())])).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
