//! In-process HTTP server speaking the chat-completion wire shape.
//!
//! Each connection is handled on its own thread, one request per connection.
//! The responder decides every reply, so tests can script answers, inject
//! failures and inspect the recorded requests.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::json;

use crate::client::ChatRequest;

#[derive(Clone, Debug)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl RecordedRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn chat(&self) -> Option<ChatRequest> {
        serde_json::from_str(&self.body).ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MockReply {
    pub status: u16,
    pub body: String,
}

impl MockReply {
    /// A 200 chat-completion body whose single choice carries `content`.
    pub fn completion(content: &str) -> Self {
        Self {
            status: 200,
            body: json!({
                "id": "chatcmpl-mock",
                "object": "chat.completion",
                "created": 0,
                "model": "mock",
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "finish_reason": "stop"
                }]
            })
            .to_string(),
        }
    }

    pub fn status(status: u16, body: &str) -> Self {
        Self {
            status,
            body: body.to_string(),
        }
    }
}

type Responder = dyn Fn(&RecordedRequest) -> MockReply + Send + Sync;

pub struct MockServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    accept: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(responder: F) -> io::Result<Self>
    where
        F: Fn(&RecordedRequest) -> MockReply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let responder: Arc<Responder> = Arc::new(responder);
        let accept = {
            let stop = Arc::clone(&stop);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let responder = Arc::clone(&responder);
                    let requests = Arc::clone(&requests);
                    std::thread::spawn(move || {
                        if let Err(e) = serve(stream, &*responder, &requests) {
                            log::debug!("mock connection: {e}");
                        }
                    });
                }
            })
        };
        Ok(Self {
            addr,
            stop,
            requests,
            accept: Some(accept),
        })
    }

    /// Always answers with `content`.
    pub fn echo(content: &str) -> io::Result<Self> {
        let content = content.to_string();
        Self::start(move |_| MockReply::completion(&content))
    }

    /// Always answers with `status`.
    pub fn failing(status: u16) -> io::Result<Self> {
        Self::start(move |_| MockReply::status(status, "{\"error\":{\"message\":\"mock failure\"}}"))
    }

    /// The `i`-th call naming model `m` gets `script[m][i]`, repeating the
    /// last entry once the script runs out. Unknown models get a 404.
    pub fn scripted(script: HashMap<String, Vec<String>>) -> io::Result<Self> {
        let calls: Mutex<HashMap<String, usize>> = Mutex::new(HashMap::new());
        Self::start(move |req| {
            let Some(chat) = req.chat() else {
                return MockReply::status(400, "bad request body");
            };
            let Some(lines) = script.get(&chat.model).filter(|l| !l.is_empty()) else {
                return MockReply::status(404, "unknown model");
            };
            let mut calls = calls.lock().expect("mock counter");
            let i = calls.entry(chat.model.clone()).or_default();
            let content = &lines[(*i).min(lines.len() - 1)];
            *i += 1;
            MockReply::completion(content)
        })
    }

    /// Answers are a pure function of the model name and prompt: one of
    /// `(A)`-`(D)` picked by an FNV-1a hash, wrapped in a short rationale.
    pub fn deterministic() -> io::Result<Self> {
        Self::start(|req| match req.chat() {
            Some(chat) => MockReply::completion(&deterministic_reply(&chat)),
            None => MockReply::status(400, "bad request body"),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to put in an endpoint, e.g. `http://127.0.0.1:4321/v1`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.requests.lock().expect("mock requests").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

pub fn deterministic_reply(chat: &ChatRequest) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let prompt = chat.messages.last().map_or("", |m| m.content.as_str());
    for b in chat.model.bytes().chain([0u8]).chain(prompt.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let letter = (b'A' + (h % 4) as u8) as char;
    format!(
        "{} weighed the options (digest {:016x}). {{final answer: ({letter})}}",
        chat.model, h
    )
}

fn serve(stream: TcpStream, responder: &Responder, log: &Mutex<Vec<RecordedRequest>>) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    if method.is_empty() {
        return Ok(());
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
    let request = RecordedRequest {
        method,
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let reply = if request.method == "POST" && request.path.ends_with("/chat/completions") {
        responder(&request)
    } else {
        MockReply::status(404, "not found")
    };
    log.lock().expect("mock requests").push(request);

    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reply.status,
        reason(reply.status),
        reply.body.len()
    )?;
    out.write_all(reply.body.as_bytes())?;
    out.flush()
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}
