//! Flat `key=value` config files.
//!
//! One setting per line, keys spelled like the long flag they stand for
//! (`target-n = 15`, underscores accepted), `#` starts a comment line,
//! blank lines are ignored. A later line for the same key wins, and flags
//! given on the command line win over the file.

use std::ffi::OsString;

use clap::{ArgAction, Command};

use crate::error::CliError;

pub const CONFIG_ENV: &str = "SIMWEIGHT_CONFIG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    /// 1-based line number.
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>, CliError> {
    let mut entries = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(CliError::Config { line, message: "expected key=value".into() });
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') || key.starts_with('-') {
            return Err(CliError::Config { line, message: format!("invalid key {key:?}") });
        }
        entries.push(ConfigEntry { line, key, value: value.trim().to_string() });
    }
    Ok(entries)
}

fn is_subcommand(cmd: &Command, arg: &str) -> bool {
    cmd.get_subcommands().any(|s| s.get_name() == arg)
}

/// Position of the subcommand name in `args` and the `--config` value, if any.
fn scan(cmd: &Command, args: &[OsString]) -> (Option<usize>, Option<OsString>) {
    let mut position = None;
    let mut config = None;
    let mut i = 1;
    while i < args.len() {
        let arg = args[i].to_string_lossy();
        if arg == "--config" {
            config = args.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.into());
        } else if arg == "--" {
            break;
        } else if position.is_none() && is_subcommand(cmd, &arg) {
            position = Some(i);
        }
        i += 1;
    }
    (position, config)
}

/// Splices config-file settings into `args` right after the subcommand
/// name, so that any flag the user typed comes later and overrides them.
/// Keys that some other subcommand understands are skipped; keys no
/// subcommand understands are an error.
pub fn expand_args(cmd: &Command, args: Vec<OsString>, env_config: Option<OsString>) -> Result<Vec<OsString>, CliError> {
    let (position, flag_config) = scan(cmd, &args);
    let Some(path) = flag_config.or(env_config).filter(|p| !p.is_empty()) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.to_string_lossy())))?;
    let entries = parse_config(&text)?;
    let Some(position) = position else {
        return Ok(args);
    };
    let sub_name = args[position].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&sub_name).expect("scanned subcommand exists");

    let mut injected: Vec<OsString> = Vec::new();
    for entry in entries {
        if entry.key == "config" {
            return Err(CliError::Config { line: entry.line, message: "config files cannot nest".into() });
        }
        let known_elsewhere = cmd
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(entry.key.as_str())));
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(entry.key.as_str())) else {
            if known_elsewhere {
                continue;
            }
            return Err(CliError::Config { line: entry.line, message: format!("unknown setting {:?}", entry.key) });
        };
        match arg.get_action() {
            ArgAction::SetTrue | ArgAction::SetFalse => match entry.value.as_str() {
                "true" | "yes" | "1" => injected.push(format!("--{}", entry.key).into()),
                "false" | "no" | "0" => {}
                other => {
                    return Err(CliError::Config {
                        line: entry.line,
                        message: format!("expected true or false for {:?}, got {other:?}", entry.key),
                    })
                }
            },
            _ => injected.push(format!("--{}={}", entry.key, entry.value).into()),
        }
    }
    let mut out = args[..=position].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[position + 1..]);
    Ok(out)
}
