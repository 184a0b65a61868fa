//! A local chat-completion endpoint answering from a script, for tests and
//! offline dry runs.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde_json::{json, Value};

use crate::prompt::Message;

#[derive(Debug, Clone, PartialEq)]
pub struct MockReply {
    pub status: u16,
    pub content: String,
}

impl MockReply {
    pub fn ok(content: impl Into<String>) -> Self {
        MockReply {
            status: 200,
            content: content.into(),
        }
    }

    pub fn status(status: u16) -> Self {
        MockReply {
            status,
            content: format!("scripted status {status}"),
        }
    }
}

/// One request as received by the mock.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
}

impl RecordedRequest {
    pub fn system_text(&self) -> &str {
        self.messages.first().map_or("", |m| m.content.as_str())
    }

    pub fn user_text(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }
}

type Responder = Box<dyn FnMut(&RecordedRequest, usize) -> MockReply + Send>;

/// Serves requests one at a time on a background thread until dropped.
pub struct MockServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    log: Arc<Mutex<Vec<RecordedRequest>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Answers each request with `responder(request, index)`.
    pub fn start(responder: impl FnMut(&RecordedRequest, usize) -> MockReply + Send + 'static) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let log = Arc::new(Mutex::new(Vec::new()));
        let (stop2, log2) = (stop.clone(), log.clone());
        let mut responder: Responder = Box::new(responder);
        let handle = thread::spawn(move || {
            for stream in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                if let Err(e) = serve(stream, &mut responder, &log2) {
                    log::debug!("mock connection error: {e}");
                }
            }
        });
        Ok(MockServer {
            addr,
            stop,
            log,
            handle: Some(handle),
        })
    }

    /// Replies in order; the final reply repeats once the script runs out.
    pub fn scripted(replies: Vec<MockReply>) -> io::Result<Self> {
        assert!(!replies.is_empty(), "a script needs at least one reply");
        Self::start(move |_, i| replies[i.min(replies.len() - 1)].clone())
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, responder: &mut Responder, log: &Mutex<Vec<RecordedRequest>>) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;

    let (status, payload) = if !request_line.starts_with("POST ") || !request_line.contains("/chat/completions") {
        (404, json!({"error": "not found"}).to_string())
    } else {
        match serde_json::from_slice::<Value>(&body) {
            Ok(v) => {
                let req = RecordedRequest {
                    model: v["model"].as_str().unwrap_or_default().to_string(),
                    temperature: v["temperature"].as_f64().unwrap_or(f64::NAN),
                    messages: serde_json::from_value(v["messages"].clone()).unwrap_or_default(),
                };
                let index = {
                    let mut l = log.lock().unwrap();
                    l.push(req.clone());
                    l.len() - 1
                };
                let reply = responder(&req, index);
                let payload = if reply.status == 200 {
                    json!({
                        "id": format!("mock-{index}"),
                        "object": "chat.completion",
                        "model": req.model,
                        "choices": [{
                            "index": 0,
                            "message": {"role": "assistant", "content": reply.content},
                            "finish_reason": "stop"
                        }]
                    })
                } else {
                    json!({"error": reply.content})
                };
                (reply.status, payload.to_string())
            }
            Err(e) => (400, json!({"error": e.to_string()}).to_string()),
        }
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        reason(status),
        payload.len()
    )?;
    stream.flush()
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
