//! Minimal OpenAI-compatible HTTP server on 127.0.0.1 for offline tests and
//! smoke runs of the HTTP provider.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};

use super::{ChatProvider, ChatRequest, ProviderError};

#[derive(Debug, Clone)]
pub struct LoopbackRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl LoopbackRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

type Handler = Arc<dyn Fn(&LoopbackRequest) -> (u16, String) + Send + Sync>;

pub struct LoopbackServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    hits: Arc<AtomicUsize>,
    thread: Option<JoinHandle<()>>,
}

/// Reply body in chat-completion shape.
pub fn completion_body(text: &str) -> String {
    json!({
        "id": "loopback",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
    })
    .to_string()
}

/// Rebuilds a [`ChatRequest`] from a chat-completion request body.
pub fn parse_request_body(body: &str) -> Option<ChatRequest> {
    let v: Value = serde_json::from_str(body).ok()?;
    let messages = v.get("messages")?.as_array()?;
    let content = |role: &str| {
        messages
            .iter()
            .find(|m| m.get("role").and_then(Value::as_str) == Some(role))
            .and_then(|m| m.get("content")?.as_str())
            .unwrap_or("")
            .to_string()
    };
    let mut req = ChatRequest::new(content("system"), content("user"));
    if let Some(t) = v.get("temperature").and_then(Value::as_f64) {
        req.temperature = t;
    }
    if let Some(m) = v.get("max_tokens").and_then(Value::as_u64) {
        req.max_tokens = m as u32;
    }
    req.seed = v.get("seed").and_then(Value::as_u64);
    Some(req)
}

impl LoopbackServer {
    pub fn start(
        handler: impl Fn(&LoopbackRequest) -> (u16, String) + Send + Sync + 'static,
    ) -> io::Result<LoopbackServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Handler = Arc::new(handler);
        let (stop2, hits2) = (stop.clone(), hits.clone());
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let handler = handler.clone();
                let hits = hits2.clone();
                std::thread::spawn(move || {
                    if serve(stream, &handler).is_ok() {
                        hits.fetch_add(1, Ordering::SeqCst);
                    }
                });
            }
        });
        Ok(LoopbackServer { addr, stop, hits, thread: Some(thread) })
    }

    /// Serves chat completions from `provider`. With `api_key` set, requests
    /// without the matching bearer token get HTTP 401.
    pub fn with_provider(
        provider: Arc<dyn ChatProvider>,
        api_key: Option<String>,
    ) -> io::Result<LoopbackServer> {
        LoopbackServer::start(move |req| {
            if let Some(key) = &api_key {
                if req.header("authorization") != Some(format!("Bearer {key}").as_str()) {
                    return (401, json!({"error": "invalid api key"}).to_string());
                }
            }
            let Some(chat) = parse_request_body(&req.body) else {
                return (400, json!({"error": "bad request"}).to_string());
            };
            match provider.send(&chat) {
                Ok(text) => (200, completion_body(&text)),
                Err(ProviderError::Auth(_)) => (401, "{}".into()),
                Err(ProviderError::Transient(e)) => (503, json!({"error": e}).to_string()),
                Err(e) => (500, json!({"error": e.to_string()}).to_string()),
            }
        })
    }

    /// Base URL to use as the provider endpoint.
    pub fn endpoint(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Requests answered so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for LoopbackServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(stream: TcpStream, handler: &Handler) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    if method.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "empty request"));
    }
    let mut headers = Vec::new();
    let mut content_length = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let req = LoopbackRequest { method, path, headers, body: String::from_utf8_lossy(&body).into_owned() };
    let (status, reply) = handler(&req);
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    )?;
    out.flush()
}
