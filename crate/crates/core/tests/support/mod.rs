//! Test-only oracles and fixtures. Nothing here calls into the code paths it
//! is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use autoprompt_core::example_pool::{CneTable, ExamplePair, ExamplePool, Language};

/// Jaro similarity straight from its textbook definition.
pub fn brute_jaro(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let longest = a.len().max(b.len()) as i64;
    let window = (longest / 2 - 1).max(0);

    let mut taken_in_b: HashSet<usize> = HashSet::new();
    let mut matched_a: Vec<usize> = Vec::new();
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            let distance = (i as i64 - j as i64).abs();
            if distance <= window && ca == cb && !taken_in_b.contains(&j) {
                taken_in_b.insert(j);
                matched_a.push(i);
                break;
            }
        }
    }
    let m = matched_a.len();
    if m == 0 {
        return 0.0;
    }
    let mut matched_b: Vec<usize> = taken_in_b.into_iter().collect();
    matched_b.sort_unstable();
    let seq_a: String = matched_a.iter().map(|&i| a[i]).collect();
    let seq_b: String = matched_b.iter().map(|&j| b[j]).collect();
    let out_of_order = seq_a
        .chars()
        .zip(seq_b.chars())
        .filter(|(x, y)| x != y)
        .count();
    let t = out_of_order as f64 / 2.0;
    let m = m as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

pub fn brute_jaro_winkler(s1: &str, s2: &str, p: f64, max_prefix: usize) -> f64 {
    let j = brute_jaro(s1, s2);
    let mut l = 0;
    let (a, b): (Vec<char>, Vec<char>) = (s1.chars().collect(), s2.chars().collect());
    while l < max_prefix && l < a.len() && l < b.len() && a[l] == b[l] {
        l += 1;
    }
    j + l as f64 * p * (1.0 - j)
}

/// Mean similarity of each text to every other, as a plain double loop.
pub fn brute_consensus(texts: &[&str]) -> Vec<f64> {
    let k = texts.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut total = 0.0;
        for j in 0..k {
            if i != j {
                total += brute_jaro_winkler(texts[i], texts[j], 0.1, 4);
            }
        }
        out.push(total / (k - 1) as f64);
    }
    out
}

/// Every string over `alphabet` of length 0..=max_len.
pub fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in alphabet {
                let mut t = s.clone();
                t.push(*c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn pool_of(n: usize) -> ExamplePool {
    let examples = (0..n)
        .map(|i| ExamplePair {
            id: format!("pool#{i}"),
            input_text: format!("input {i}"),
            output_text: format!("output {i}"),
        })
        .collect();
    ExamplePool::new(examples, Language::English).unwrap()
}

pub fn table(name: &str, pairs: &[(&str, &str)]) -> CneTable {
    CneTable::new(
        name,
        pairs.iter().map(|(c, _)| c.to_string()).collect(),
        Some(
            pairs
                .iter()
                .map(|(c, g)| (c.to_string(), g.to_string()))
                .collect::<BTreeMap<_, _>>(),
        ),
    )
    .unwrap()
}

/// Repository `data/` directory.
pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Frozen expected outputs checked into `tests/golden/`.
pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// One scripted HTTP response.
#[derive(Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub headers: Vec<(String, String)>,
    pub delay: Duration,
}

impl Reply {
    pub fn json(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            body: body.into(),
            headers: Vec::new(),
            delay: Duration::ZERO,
        }
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

/// (authorization header, body) of each request received.
pub type RequestLog = Arc<Mutex<Vec<(Option<String>, String)>>>;

/// A local HTTP server that answers successive connections with scripted
/// replies and records each request as (authorization header, body).
pub struct ScriptedServer {
    pub base_url: String,
    pub requests: RequestLog,
    handle: Option<JoinHandle<()>>,
}

impl ScriptedServer {
    pub fn start(replies: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for reply in replies {
                let Ok((stream, _)) = listener.accept() else {
                    return;
                };
                let mut reader = BufReader::new(stream);
                let mut content_length = 0usize;
                let mut auth = None;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    if let Some((name, value)) = line.split_once(':') {
                        let name = name.trim().to_ascii_lowercase();
                        if name == "content-length" {
                            content_length = value.trim().parse().unwrap_or(0);
                        } else if name == "authorization" {
                            auth = Some(value.trim().to_string());
                        }
                    }
                }
                let mut body = vec![0u8; content_length];
                let _ = reader.read_exact(&mut body);
                log.lock()
                    .unwrap()
                    .push((auth, String::from_utf8_lossy(&body).into_owned()));

                std::thread::sleep(reply.delay);
                let mut stream = reader.into_inner();
                let mut head = format!(
                    "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
                    reply.status,
                    reply.body.len()
                );
                for (k, v) in &reply.headers {
                    head.push_str(&format!("{k}: {v}\r\n"));
                }
                head.push_str("\r\n");
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(reply.body.as_bytes());
                let _ = stream.flush();
            }
        });
        Self {
            base_url,
            requests,
            handle: Some(handle),
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// A chat-completions response body with the given choice contents.
pub fn chat_response(contents: &[&str], prompt_tokens: u64, completion_tokens: u64) -> String {
    let choices: Vec<serde_json::Value> = contents
        .iter()
        .enumerate()
        .map(|(i, c)| {
            serde_json::json!({
                "index": i,
                "message": {"role": "assistant", "content": c},
                "finish_reason": "stop"
            })
        })
        .collect();
    serde_json::json!({
        "id": "chatcmpl-test",
        "object": "chat.completion",
        "choices": choices,
        "usage": {
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
            "total_tokens": prompt_tokens + completion_tokens
        }
    })
    .to_string()
}
