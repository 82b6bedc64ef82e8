//! INI-style supervisor configuration: one `[program:name]` section per
//! managed program with command, priority tier, restart policy, optional
//! health check and replica count.

use std::time::Duration;

pub const DEFAULT_PRIORITY: u32 = 999;
pub const MAX_PRIORITY: u32 = 999;
pub const DEFAULT_STARTUP_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSpec {
    pub name: String,
    /// argv; `{replica}` expands to the replica index.
    pub command: Vec<String>,
    pub priority: u32,
    pub autorestart: bool,
    /// URL that must answer 2xx for the program to count as Running.
    pub health_check: Option<String>,
    pub startup_timeout: Duration,
    pub replicas: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorConfig {
    pub programs: Vec<ProgramSpec>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate program name {0:?}")]
    DuplicateName(String),
    #[error("program {0:?} has no command")]
    MissingCommand(String),
    #[error("program {name:?}: priority {priority} is out of range 0..=999")]
    BadPriority { name: String, priority: u32 },
}

/// Splits a command line into argv, honoring single and double quotes.
pub fn split_command(line: &str) -> Result<Vec<String>, String> {
    let mut args = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut has_token = false;
    for c in line.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => current.push(c),
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    has_token = true;
                }
                c if c.is_whitespace() => {
                    if has_token {
                        args.push(std::mem::take(&mut current));
                        has_token = false;
                    }
                }
                c => {
                    current.push(c);
                    has_token = true;
                }
            },
        }
    }
    if quote.is_some() {
        return Err("unterminated quote".into());
    }
    if has_token {
        args.push(current);
    }
    Ok(args)
}

fn parse_duration_secs(value: &str) -> Option<Duration> {
    let value = value.trim();
    let digits = value.strip_suffix('s').unwrap_or(value);
    digits
        .parse::<f64>()
        .ok()
        .filter(|v| *v >= 0.0)
        .map(Duration::from_secs_f64)
}

impl SupervisorConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut programs: Vec<ProgramSpec> = Vec::new();
        let mut current: Option<ProgramSpec> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(section) = line.strip_prefix('[') {
                let section = section.strip_suffix(']').ok_or(ConfigError::Syntax {
                    line: lineno,
                    message: "unterminated section header".into(),
                })?;
                if let Some(prev) = current.take() {
                    programs.push(prev);
                }
                let name = section
                    .strip_prefix("program:")
                    .ok_or(ConfigError::Syntax {
                        line: lineno,
                        message: format!("unknown section {section:?}"),
                    })?;
                if name.is_empty() {
                    return Err(ConfigError::Syntax {
                        line: lineno,
                        message: "program name is empty".into(),
                    });
                }
                current = Some(ProgramSpec {
                    name: name.to_string(),
                    command: Vec::new(),
                    priority: DEFAULT_PRIORITY,
                    autorestart: true,
                    health_check: None,
                    startup_timeout: DEFAULT_STARTUP_TIMEOUT,
                    replicas: 1,
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: lineno,
                message: "expected key=value".into(),
            })?;
            let program = current.as_mut().ok_or(ConfigError::Syntax {
                line: lineno,
                message: "key outside a [program:...] section".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "command" => {
                    program.command =
                        split_command(value).map_err(|message| ConfigError::Syntax {
                            line: lineno,
                            message,
                        })?;
                }
                "priority" => {
                    program.priority = value.parse().map_err(|_| ConfigError::Syntax {
                        line: lineno,
                        message: format!("invalid priority {value:?}"),
                    })?;
                }
                "autorestart" => {
                    program.autorestart = match value {
                        "true" | "1" | "yes" => true,
                        "false" | "0" | "no" => false,
                        other => {
                            return Err(ConfigError::Syntax {
                                line: lineno,
                                message: format!("invalid autorestart {other:?}"),
                            })
                        }
                    };
                }
                "healthcheck" => program.health_check = Some(value.to_string()),
                "startup_timeout" => {
                    program.startup_timeout =
                        parse_duration_secs(value).ok_or(ConfigError::Syntax {
                            line: lineno,
                            message: format!("invalid startup_timeout {value:?}"),
                        })?;
                }
                "replicas" => {
                    program.replicas =
                        value
                            .parse()
                            .ok()
                            .filter(|r| *r >= 1)
                            .ok_or(ConfigError::Syntax {
                                line: lineno,
                                message: format!("invalid replicas {value:?}"),
                            })?;
                }
                other => {
                    return Err(ConfigError::Syntax {
                        line: lineno,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        if let Some(prev) = current.take() {
            programs.push(prev);
        }

        let mut seen = std::collections::BTreeSet::new();
        for program in &programs {
            if !seen.insert(program.name.clone()) {
                return Err(ConfigError::DuplicateName(program.name.clone()));
            }
            if program.command.is_empty() {
                return Err(ConfigError::MissingCommand(program.name.clone()));
            }
            if program.priority > MAX_PRIORITY {
                return Err(ConfigError::BadPriority {
                    name: program.name.clone(),
                    priority: program.priority,
                });
            }
        }
        Ok(Self { programs })
    }

    pub fn program(&self, name: &str) -> Option<&ProgramSpec> {
        self.programs.iter().find(|p| p.name == name)
    }

    /// Programs grouped by ascending priority.
    pub fn tiers(&self) -> Vec<(u32, Vec<&ProgramSpec>)> {
        let mut priorities: Vec<u32> = self.programs.iter().map(|p| p.priority).collect();
        priorities.sort_unstable();
        priorities.dedup();
        priorities
            .into_iter()
            .map(|priority| {
                let members = self
                    .programs
                    .iter()
                    .filter(|p| p.priority == priority)
                    .collect();
                (priority, members)
            })
            .collect()
    }
}

/// Expands `{replica}` in one argv/string for a concrete replica index.
pub fn expand_replica(template: &str, replica: u32) -> String {
    template.replace("{replica}", &replica.to_string())
}
