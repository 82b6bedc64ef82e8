//! Minimal HTTP/1.1 client used by the load benchmark. Works on raw TCP so
//! it can count exact wire bytes (status line, headers and body) the way the
//! classic benchmarking tools report "total transferred".

use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use url::Url;

const MAX_HEADER_BYTES: usize = 64 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum HttpClientError {
    #[error("only http:// targets are supported")]
    UnsupportedScheme,
    #[error("url has no host")]
    NoHost,
    #[error("connect to {addr} failed: {source}")]
    Connect {
        addr: String,
        source: std::io::Error,
    },
    #[error("request timed out")]
    TimedOut,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed response: {0}")]
    Malformed(&'static str),
}

/// Resolved connection details for a target URL.
#[derive(Debug, Clone)]
pub struct HttpTarget {
    /// host:port to connect to.
    pub addr: String,
    /// Value for the Host header.
    pub host_header: String,
    /// Path plus query, always starting with '/'.
    pub request_target: String,
}

impl HttpTarget {
    pub fn from_url(url: &Url) -> Result<Self, HttpClientError> {
        if url.scheme() != "http" {
            return Err(HttpClientError::UnsupportedScheme);
        }
        let host = url.host_str().ok_or(HttpClientError::NoHost)?;
        let port = url.port_or_known_default().unwrap_or(80);
        let mut request_target = url.path().to_string();
        if request_target.is_empty() {
            request_target.push('/');
        }
        if let Some(q) = url.query() {
            request_target.push('?');
            request_target.push_str(q);
        }
        let host_header = if port == 80 {
            host.to_string()
        } else {
            format!("{host}:{port}")
        };
        Ok(Self {
            addr: format!("{host}:{port}"),
            host_header,
            request_target,
        })
    }

    pub async fn connect(&self, timeout: Duration) -> Result<TcpStream, HttpClientError> {
        match tokio::time::timeout(timeout, TcpStream::connect(&self.addr)).await {
            Ok(Ok(stream)) => {
                stream.set_nodelay(true).ok();
                Ok(stream)
            }
            Ok(Err(e)) => Err(HttpClientError::Connect {
                addr: self.addr.clone(),
                source: e,
            }),
            Err(_) => Err(HttpClientError::TimedOut),
        }
    }
}

/// Builds the raw request bytes once; workers reuse them for every request.
pub fn build_request(
    method: &str,
    target: &HttpTarget,
    headers: &[(String, String)],
    body: Option<&[u8]>,
    keep_alive: bool,
) -> Vec<u8> {
    let mut head = format!("{method} {} HTTP/1.1\r\n", target.request_target);
    let has = |name: &str| headers.iter().any(|(n, _)| n.eq_ignore_ascii_case(name));
    if !has("host") {
        head.push_str(&format!("Host: {}\r\n", target.host_header));
    }
    if !has("user-agent") {
        head.push_str("User-Agent: cvparse-bench/0.1\r\n");
    }
    if !has("accept") {
        head.push_str("Accept: */*\r\n");
    }
    if let Some(body) = body {
        head.push_str(&format!("Content-Length: {}\r\n", body.len()));
    }
    for (name, value) in headers {
        head.push_str(&format!("{name}: {value}\r\n"));
    }
    if !keep_alive {
        head.push_str("Connection: close\r\n");
    }
    head.push_str("\r\n");
    let mut out = head.into_bytes();
    if let Some(body) = body {
        out.extend_from_slice(body);
    }
    out
}

/// Parsed summary of one response.
#[derive(Debug, Clone, Copy)]
pub struct ResponseSummary {
    pub status: u16,
    /// Bytes of the response consumed from the socket.
    pub wire_bytes: u64,
    /// Whether the connection may carry another request.
    pub may_reuse: bool,
}

/// A connection with its read buffer; the buffer carries over between
/// responses on a kept-alive connection.
pub struct Connection {
    stream: TcpStream,
    buf: Vec<u8>,
}

impl Connection {
    pub fn new(stream: TcpStream) -> Self {
        Self {
            stream,
            buf: Vec::new(),
        }
    }

    pub async fn send(&mut self, request: &[u8]) -> Result<(), HttpClientError> {
        self.stream.write_all(request).await?;
        Ok(())
    }

    async fn fill(&mut self) -> Result<usize, HttpClientError> {
        let mut chunk = [0u8; 16 * 1024];
        let n = self.stream.read(&mut chunk).await?;
        self.buf.extend_from_slice(&chunk[..n]);
        Ok(n)
    }

    /// Consumes `n` bytes from the front of the buffer, reading more from
    /// the socket as needed.
    async fn consume(&mut self, n: usize) -> Result<(), HttpClientError> {
        while self.buf.len() < n {
            if self.fill().await? == 0 {
                return Err(HttpClientError::Malformed("connection closed mid-body"));
            }
        }
        self.buf.drain(..n);
        Ok(())
    }

    /// Reads one full response and returns its summary. The body is
    /// consumed and discarded; only sizes are kept.
    pub async fn read_response(&mut self) -> Result<ResponseSummary, HttpClientError> {
        // Header section.
        let header_end = loop {
            if let Some(pos) = find_subsequence(&self.buf, b"\r\n\r\n") {
                break pos + 4;
            }
            if self.buf.len() > MAX_HEADER_BYTES {
                return Err(HttpClientError::Malformed("header section too large"));
            }
            if self.fill().await? == 0 {
                return Err(HttpClientError::Malformed(
                    "connection closed before headers",
                ));
            }
        };
        let header_text = String::from_utf8_lossy(&self.buf[..header_end]).into_owned();
        self.buf.drain(..header_end);
        let mut wire_bytes = header_end as u64;

        let mut lines = header_text.split("\r\n");
        let status_line = lines.next().unwrap_or("");
        let mut parts = status_line.splitn(3, ' ');
        let version = parts.next().unwrap_or("");
        let status: u16 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(HttpClientError::Malformed("bad status line"))?;
        if !version.starts_with("HTTP/") {
            return Err(HttpClientError::Malformed("bad status line"));
        }

        let mut content_length: Option<usize> = None;
        let mut chunked = false;
        let mut connection_close = version == "HTTP/1.0";
        for line in lines {
            let Some((name, value)) = line.split_once(':') else {
                continue;
            };
            let value = value.trim();
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.parse().ok();
            } else if name.eq_ignore_ascii_case("transfer-encoding") {
                chunked = value.to_ascii_lowercase().contains("chunked");
            } else if name.eq_ignore_ascii_case("connection") {
                let v = value.to_ascii_lowercase();
                if v.contains("close") {
                    connection_close = true;
                } else if v.contains("keep-alive") {
                    connection_close = false;
                }
            }
        }

        // Body.
        if chunked {
            loop {
                let line_end = self.read_line_len().await?;
                let size_line = String::from_utf8_lossy(&self.buf[..line_end - 2]).into_owned();
                self.buf.drain(..line_end);
                wire_bytes += line_end as u64;
                let size =
                    usize::from_str_radix(size_line.split(';').next().unwrap_or("").trim(), 16)
                        .map_err(|_| HttpClientError::Malformed("bad chunk size"))?;
                if size == 0 {
                    // Trailer section: lines until the terminating CRLF.
                    loop {
                        let end = self.read_line_len().await?;
                        self.buf.drain(..end);
                        wire_bytes += end as u64;
                        if end == 2 {
                            break;
                        }
                    }
                    break;
                }
                self.consume(size + 2).await?; // chunk data + CRLF
                wire_bytes += size as u64 + 2;
            }
        } else if let Some(len) = content_length {
            self.consume(len).await?;
            wire_bytes += len as u64;
        } else if status >= 200 && status != 204 && status != 304 {
            // No framing: read until the server closes.
            loop {
                let drained = self.buf.len();
                self.buf.clear();
                wire_bytes += drained as u64;
                if self.fill().await? == 0 {
                    break;
                }
            }
            connection_close = true;
        }

        Ok(ResponseSummary {
            status,
            wire_bytes,
            may_reuse: !connection_close,
        })
    }

    /// Length (including CRLF) of the next buffered line.
    async fn read_line_len(&mut self) -> Result<usize, HttpClientError> {
        loop {
            if let Some(pos) = find_subsequence(&self.buf, b"\r\n") {
                return Ok(pos + 2);
            }
            if self.fill().await? == 0 {
                return Err(HttpClientError::Malformed("connection closed mid-line"));
            }
        }
    }
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}
