//! Upstream pool semantics for the reverse proxy: round-robin rotation over
//! primaries, windowed failure accounting with max_fails/fail_timeout, and a
//! backup tier used only when every primary is unavailable.
//!
//! All state transitions are pure functions of (event, timestamp), so tests
//! drive them with a controllable clock and a recorded event log replays to
//! identical state. The network proxy built on top lives in the `cvparse`
//! crate.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_FAILS: u32 = 3;
pub const DEFAULT_FAIL_TIMEOUT_MS: u64 = 15_000;

#[derive(Debug, Clone, PartialEq)]
pub enum UpstreamError {
    SyntaxError {
        line: usize,
        message: String,
    },
    /// The upstream has no non-backup server.
    NoPrimaryServer,
    DuplicateAddress(String),
    UnknownServer(String),
    /// Primaries and backups are all unavailable.
    NoServerAvailable,
    NoUpstreamBlock,
}

impl core::fmt::Display for UpstreamError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            UpstreamError::SyntaxError { line, message } => {
                write!(f, "config line {line}: {message}")
            }
            UpstreamError::NoPrimaryServer => write!(f, "upstream has no primary server"),
            UpstreamError::DuplicateAddress(a) => write!(f, "duplicate server address {a}"),
            UpstreamError::UnknownServer(a) => write!(f, "unknown server address {a}"),
            UpstreamError::NoServerAvailable => write!(f, "no server available"),
            UpstreamError::NoUpstreamBlock => write!(f, "config has no upstream block"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UpstreamError {}

/// One pool member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamServer {
    pub address: String,
    pub max_fails: u32,
    pub fail_timeout_ms: u64,
    pub backup: bool,
}

impl UpstreamServer {
    pub fn new(address: impl Into<String>) -> Self {
        Self {
            address: address.into(),
            max_fails: DEFAULT_MAX_FAILS,
            fail_timeout_ms: DEFAULT_FAIL_TIMEOUT_MS,
            backup: false,
        }
    }
}

/// A named pool of servers plus the idle keep-alive connection budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamConfig {
    pub name: String,
    pub servers: Vec<UpstreamServer>,
    pub keepalive: u32,
}

impl UpstreamConfig {
    pub fn new(
        name: impl Into<String>,
        servers: Vec<UpstreamServer>,
        keepalive: u32,
    ) -> Result<Self, UpstreamError> {
        if !servers.iter().any(|s| !s.backup) {
            return Err(UpstreamError::NoPrimaryServer);
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for s in &servers {
            if !seen.insert(s.address.as_str()) {
                return Err(UpstreamError::DuplicateAddress(s.address.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            servers,
            keepalive,
        })
    }
}

/// A proxied listener: where to listen and which upstream to forward to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenerConfig {
    pub listen: String,
    pub server_name: Option<String>,
    /// Upstream name referenced by proxy_pass (scheme stripped).
    pub proxy_pass: String,
}

/// Everything a config file can declare.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancerFileConfig {
    pub upstreams: Vec<UpstreamConfig>,
    pub listeners: Vec<ListenerConfig>,
}

/// Failure accounting for one server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ServerState {
    /// Failures recorded inside the current window.
    pub fail_count: u32,
    /// When the current failure window opened.
    pub window_start_ms: Option<u64>,
    /// Set while the server is tripped; it re-enters rotation at this time.
    pub unavailable_until_ms: Option<u64>,
}

impl ServerState {
    pub fn available(&self, now_ms: u64) -> bool {
        self.unavailable_until_ms
            .is_none_or(|until| now_ms >= until)
    }
}

/// A recorded balancing event; replaying a log reproduces identical state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UpstreamEvent {
    Pick {
        now_ms: u64,
    },
    Result {
        address: String,
        success: bool,
        now_ms: u64,
    },
}

/// Live rotation and failure state over an immutable pool config.
#[derive(Debug, Clone, PartialEq)]
pub struct UpstreamState {
    config: UpstreamConfig,
    states: Vec<ServerState>,
    /// Rotation cursors into the primary / backup sublists.
    rr_primary: usize,
    rr_backup: usize,
}

impl UpstreamState {
    pub fn new(config: UpstreamConfig) -> Self {
        let states = config
            .servers
            .iter()
            .map(|_| ServerState::default())
            .collect();
        Self {
            config,
            states,
            rr_primary: 0,
            rr_backup: 0,
        }
    }

    pub fn config(&self) -> &UpstreamConfig {
        &self.config
    }

    pub fn states(&self) -> &[ServerState] {
        &self.states
    }

    pub fn address(&self, index: usize) -> &str {
        &self.config.servers[index].address
    }

    fn index_of(&self, address: &str) -> Option<usize> {
        self.config
            .servers
            .iter()
            .position(|s| s.address == address)
    }

    /// Picks the next available primary in strict rotation, falling back to
    /// the backup tier when no primary is available. The rotation cursor
    /// advances only when a server is returned.
    pub fn pick_server(&mut self, now_ms: u64) -> Result<usize, UpstreamError> {
        let primaries: Vec<usize> = (0..self.config.servers.len())
            .filter(|&i| !self.config.servers[i].backup)
            .collect();
        let backups: Vec<usize> = (0..self.config.servers.len())
            .filter(|&i| self.config.servers[i].backup)
            .collect();

        if let Some(pick) = Self::rotate(&primaries, &mut self.rr_primary, &self.states, now_ms) {
            return Ok(pick);
        }
        if let Some(pick) = Self::rotate(&backups, &mut self.rr_backup, &self.states, now_ms) {
            return Ok(pick);
        }
        Err(UpstreamError::NoServerAvailable)
    }

    fn rotate(
        tier: &[usize],
        cursor: &mut usize,
        states: &[ServerState],
        now_ms: u64,
    ) -> Option<usize> {
        if tier.is_empty() {
            return None;
        }
        for offset in 0..tier.len() {
            let slot = (*cursor + offset) % tier.len();
            let index = tier[slot];
            if states[index].available(now_ms) {
                *cursor = (slot + 1) % tier.len();
                return Some(index);
            }
        }
        None
    }

    /// Records a request outcome. A failure opens or extends the failure
    /// window; hitting max_fails inside the window trips the server for
    /// fail_timeout. Success and window expiry both reset the count.
    pub fn record_result(
        &mut self,
        address: &str,
        success: bool,
        now_ms: u64,
    ) -> Result<(), UpstreamError> {
        let index = self
            .index_of(address)
            .ok_or_else(|| UpstreamError::UnknownServer(address.to_string()))?;
        let server = &self.config.servers[index];
        let state = &mut self.states[index];
        if success {
            state.fail_count = 0;
            state.window_start_ms = None;
            return Ok(());
        }
        let window_expired = state
            .window_start_ms
            .is_none_or(|start| now_ms.saturating_sub(start) > server.fail_timeout_ms);
        if window_expired {
            state.window_start_ms = Some(now_ms);
            state.fail_count = 1;
        } else {
            state.fail_count += 1;
        }
        // max_fails=0 disables failure accounting, as in the reference
        // semantics the config syntax comes from.
        if server.max_fails > 0 && state.fail_count >= server.max_fails {
            state.unavailable_until_ms = Some(now_ms + server.fail_timeout_ms);
            state.fail_count = 0;
            state.window_start_ms = None;
        }
        Ok(())
    }

    /// Applies one recorded event. Pick outcomes (including failures) are
    /// discarded; only their state transitions matter for replay.
    pub fn apply(&mut self, event: &UpstreamEvent) {
        match event {
            UpstreamEvent::Pick { now_ms } => {
                let _ = self.pick_server(*now_ms);
            }
            UpstreamEvent::Result {
                address,
                success,
                now_ms,
            } => {
                let _ = self.record_result(address, *success, *now_ms);
            }
        }
    }

    /// Rebuilds state from scratch by replaying an event log.
    pub fn replay(config: UpstreamConfig, events: &[UpstreamEvent]) -> Self {
        let mut state = Self::new(config);
        for event in events {
            state.apply(event);
        }
        state
    }
}

// ---- config parsing -------------------------------------------------------

struct Token {
    text: String,
    line: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut word = String::new();
    let mut word_line = 1;
    let mut in_comment = false;
    for c in text.chars() {
        if c == '\n' {
            if !word.is_empty() {
                tokens.push(Token {
                    text: core::mem::take(&mut word),
                    line: word_line,
                });
            }
            line += 1;
            in_comment = false;
            continue;
        }
        if in_comment {
            continue;
        }
        match c {
            '#' => {
                if !word.is_empty() {
                    tokens.push(Token {
                        text: core::mem::take(&mut word),
                        line: word_line,
                    });
                }
                in_comment = true;
            }
            '{' | '}' | ';' => {
                if !word.is_empty() {
                    tokens.push(Token {
                        text: core::mem::take(&mut word),
                        line: word_line,
                    });
                }
                tokens.push(Token {
                    text: c.to_string(),
                    line,
                });
            }
            c if c.is_whitespace() => {
                if !word.is_empty() {
                    tokens.push(Token {
                        text: core::mem::take(&mut word),
                        line: word_line,
                    });
                }
            }
            c => {
                if word.is_empty() {
                    word_line = line;
                }
                word.push(c);
            }
        }
    }
    if !word.is_empty() {
        tokens.push(Token {
            text: word,
            line: word_line,
        });
    }
    tokens
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn last_line(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.line)
    }

    fn expect(&mut self, text: &str) -> Result<usize, UpstreamError> {
        let last = self.last_line();
        match self.next() {
            Some(t) if t.text == text => Ok(t.line),
            Some(t) => Err(UpstreamError::SyntaxError {
                line: t.line,
                message: alloc::format!("expected {text:?}, found {:?}", t.text),
            }),
            None => Err(UpstreamError::SyntaxError {
                line: last,
                message: alloc::format!("expected {text:?}, found end of input"),
            }),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, usize), UpstreamError> {
        let last = self.last_line();
        match self.next() {
            Some(t) if !matches!(t.text.as_str(), "{" | "}" | ";") => Ok((t.text.clone(), t.line)),
            Some(t) => Err(UpstreamError::SyntaxError {
                line: t.line,
                message: alloc::format!("expected {what}, found {:?}", t.text),
            }),
            None => Err(UpstreamError::SyntaxError {
                line: last,
                message: alloc::format!("expected {what}, found end of input"),
            }),
        }
    }

    /// Consumes tokens up to and including the next ';'. Used for tolerated
    /// directives like proxy_set_header.
    fn skip_directive(&mut self) -> Result<(), UpstreamError> {
        loop {
            let last = self.last_line();
            match self.next() {
                Some(t) if t.text == ";" => return Ok(()),
                Some(t) if t.text == "{" || t.text == "}" => {
                    return Err(UpstreamError::SyntaxError {
                        line: t.line,
                        message: "directive is missing ';'".to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    return Err(UpstreamError::SyntaxError {
                        line: last,
                        message: "directive is missing ';'".to_string(),
                    })
                }
            }
        }
    }
}

/// Parses a duration token: `15s`, `500ms` or a bare number of seconds.
fn parse_duration_ms(value: &str, line: usize) -> Result<u64, UpstreamError> {
    let bad = || UpstreamError::SyntaxError {
        line,
        message: alloc::format!("invalid duration {value:?}"),
    };
    if let Some(ms) = value.strip_suffix("ms") {
        return ms.parse::<u64>().map_err(|_| bad());
    }
    if let Some(s) = value.strip_suffix('s') {
        return s.parse::<u64>().map(|v| v * 1000).map_err(|_| bad());
    }
    value.parse::<u64>().map(|v| v * 1000).map_err(|_| bad())
}

fn parse_server_line(parser: &mut Parser) -> Result<UpstreamServer, UpstreamError> {
    let (address, _) = parser.word("server address")?;
    let mut server = UpstreamServer::new(address);
    loop {
        let last = parser.last_line();
        let token = parser.next().ok_or(UpstreamError::SyntaxError {
            line: last,
            message: "server line is missing ';'".to_string(),
        })?;
        let line = token.line;
        match token.text.as_str() {
            ";" => return Ok(server),
            "backup" => server.backup = true,
            other => {
                if let Some(v) = other.strip_prefix("max_fails=") {
                    server.max_fails = v.parse().map_err(|_| UpstreamError::SyntaxError {
                        line,
                        message: alloc::format!("invalid max_fails {v:?}"),
                    })?;
                } else if let Some(v) = other.strip_prefix("fail_timeout=") {
                    server.fail_timeout_ms = parse_duration_ms(v, line)?;
                } else {
                    return Err(UpstreamError::SyntaxError {
                        line,
                        message: alloc::format!("unknown server parameter {other:?}"),
                    });
                }
            }
        }
    }
}

fn parse_upstream_block(parser: &mut Parser) -> Result<UpstreamConfig, UpstreamError> {
    let (name, _) = parser.word("upstream name")?;
    parser.expect("{")?;
    let mut servers = Vec::new();
    let mut keepalive = 0;
    loop {
        let last = parser.last_line();
        let token = parser.next().ok_or(UpstreamError::SyntaxError {
            line: last,
            message: "upstream block is missing '}'".to_string(),
        })?;
        let line = token.line;
        match token.text.as_str() {
            "}" => break,
            "server" => servers.push(parse_server_line(parser)?),
            "keepalive" => {
                let (v, vline) = parser.word("keepalive count")?;
                keepalive = v.parse().map_err(|_| UpstreamError::SyntaxError {
                    line: vline,
                    message: alloc::format!("invalid keepalive {v:?}"),
                })?;
                parser.expect(";")?;
            }
            other => {
                return Err(UpstreamError::SyntaxError {
                    line,
                    message: alloc::format!("unknown upstream directive {other:?}"),
                })
            }
        }
    }
    UpstreamConfig::new(name, servers, keepalive)
}

fn parse_server_block(parser: &mut Parser) -> Result<ListenerConfig, UpstreamError> {
    let open_line = parser.expect("{")?;
    let mut listen = None;
    let mut server_name = None;
    let mut proxy_pass = None;
    let mut depth = 1;
    loop {
        let last = parser.last_line();
        let token = parser.next().ok_or(UpstreamError::SyntaxError {
            line: last,
            message: "server block is missing '}'".to_string(),
        })?;
        match token.text.as_str() {
            "}" => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            "location" => {
                let _path = parser.word("location path")?;
                parser.expect("{")?;
                depth += 1;
            }
            "listen" => {
                listen = Some(parser.word("listen value")?.0);
                parser.expect(";")?;
            }
            "server_name" => {
                server_name = Some(parser.word("server name")?.0);
                parser.expect(";")?;
            }
            "proxy_pass" => {
                let (target, _) = parser.word("proxy_pass target")?;
                let stripped = target
                    .strip_prefix("http://")
                    .or_else(|| target.strip_prefix("https://"))
                    .unwrap_or(&target);
                proxy_pass = Some(stripped.trim_end_matches('/').to_string());
                parser.expect(";")?;
            }
            // proxy_set_header, proxy_http_version and friends.
            _ => parser.skip_directive()?,
        }
    }
    Ok(ListenerConfig {
        listen: listen.ok_or(UpstreamError::SyntaxError {
            line: open_line,
            message: "server block has no listen directive".to_string(),
        })?,
        server_name,
        proxy_pass: proxy_pass.ok_or(UpstreamError::SyntaxError {
            line: open_line,
            message: "server block has no proxy_pass".to_string(),
        })?,
    })
}

/// Parses the nginx-like config subset: upstream blocks (keepalive and
/// server lines) plus proxied server blocks.
pub fn parse_config(text: &str) -> Result<BalancerFileConfig, UpstreamError> {
    let mut parser = Parser {
        tokens: tokenize(text),
        pos: 0,
    };
    let mut upstreams = Vec::new();
    let mut listeners = Vec::new();
    while let Some(token) = parser.peek() {
        let line = token.line;
        match token.text.as_str() {
            "upstream" => {
                parser.next();
                upstreams.push(parse_upstream_block(&mut parser)?);
            }
            "server" => {
                parser.next();
                listeners.push(parse_server_block(&mut parser)?);
            }
            other => {
                return Err(UpstreamError::SyntaxError {
                    line,
                    message: alloc::format!("expected upstream or server block, found {other:?}"),
                })
            }
        }
    }
    Ok(BalancerFileConfig {
        upstreams,
        listeners,
    })
}

/// Parses a config and returns its first upstream block.
pub fn parse_upstream_config(text: &str) -> Result<UpstreamConfig, UpstreamError> {
    parse_config(text)?
        .upstreams
        .into_iter()
        .next()
        .ok_or(UpstreamError::NoUpstreamBlock)
}
