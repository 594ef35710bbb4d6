use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prompt::PromptRecord;
use crate::error::{Error, Result};

/// Width of every text embedding.
pub const TEXT_DIM: usize = 128;

/// Maps prompt text to a fixed-length embedding.
///
/// Implementations must be deterministic for a given configuration and safe
/// to share between concurrent rollouts.
pub trait TextEncoder: Send + Sync {
    fn name(&self) -> &str;

    fn encode(&self, text: &str) -> Result<Vec<f64>>;

    fn encode_prompt(&self, prompt: &PromptRecord) -> Result<Vec<f64>> {
        self.encode(&prompt.document())
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Tokens are maximal runs of alphanumerics, `.` and `_`.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '.' || c == '_'))
        .filter(|t| !t.is_empty())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of tokens into 128 buckets, L2-normalized.
///
/// Bucket counts are integers, so the encoding of a document equals the
/// normalized sum of its fragments' counts; `encode_prompt` caches counts per
/// fragment and only hashes fragments it has not seen.
#[derive(Debug, Default)]
pub struct HashEncoder {
    cache: Mutex<HashMap<String, Vec<i32>>>,
}

const CACHE_LIMIT: usize = 200_000;

impl HashEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    fn counts(text: &str) -> Vec<i32> {
        let mut c = vec![0i32; TEXT_DIM];
        for tok in tokenize(text) {
            let h = fnv1a(tok.as_bytes());
            let sign = if h >> 63 == 0 { 1 } else { -1 };
            c[(h % TEXT_DIM as u64) as usize] += sign;
        }
        c
    }

    fn finish(counts: &[i32]) -> Vec<f64> {
        let mut v: Vec<f64> = counts.iter().map(|&x| x as f64).collect();
        normalize(&mut v);
        v
    }
}

impl TextEncoder for HashEncoder {
    fn name(&self) -> &str {
        "builtin"
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        Ok(Self::finish(&Self::counts(text)))
    }

    fn encode_prompt(&self, prompt: &PromptRecord) -> Result<Vec<f64>> {
        let mut total = vec![0i32; TEXT_DIM];
        let mut cache = self.cache.lock().unwrap();
        if cache.len() > CACHE_LIMIT {
            cache.clear();
        }
        for (_, frag) in &prompt.fragments {
            let c = cache.entry(frag.clone()).or_insert_with(|| Self::counts(frag));
            for (t, x) in total.iter_mut().zip(c.iter()) {
                *t += x;
            }
        }
        Ok(Self::finish(&total))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

/// Client for an HTTP embedding service.
///
/// Sends `{"text": ...}` and expects `{"embedding": [...]}`. Embeddings of
/// any other width are mapped to 128 by a fixed seeded random projection;
/// the result is L2-normalized.
pub struct RemoteEncoder {
    url: String,
    agent: ureq::Agent,
    projection_seed: u64,
    projections: Mutex<HashMap<usize, Vec<f64>>>,
}

impl RemoteEncoder {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteEncoder {
            url: url.into(),
            agent,
            projection_seed: 0x7e47,
            projections: Mutex::new(HashMap::new()),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn project(&self, raw: &[f64]) -> Vec<f64> {
        let d = raw.len();
        let mut cache = self.projections.lock().unwrap();
        let w = cache.entry(d).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.projection_seed ^ d as u64);
            let scale = 1.0 / (d as f64).sqrt();
            (0..TEXT_DIM * d).map(|_| rng.gen_range(-scale..scale)).collect()
        });
        (0..TEXT_DIM)
            .map(|r| w[r * d..(r + 1) * d].iter().zip(raw).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl TextEncoder for RemoteEncoder {
    fn name(&self) -> &str {
        "remote"
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        let fail = |e: &dyn std::fmt::Display| Error::Encoder(format!("{}: {e}", self.url));
        let resp: EmbedResponse = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { text })
            .map_err(|e| fail(&e))?
            .into_body()
            .read_json()
            .map_err(|e| fail(&e))?;
        let raw = resp.embedding;
        if raw.is_empty() {
            return Err(fail(&"empty embedding"));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(fail(&"non-finite embedding value"));
        }
        let mut v = if raw.len() == TEXT_DIM { raw } else { self.project(&raw) };
        normalize(&mut v);
        Ok(v)
    }
}

/// Uses `primary` and switches to `fallback` for good after its first
/// failure.
pub struct FallbackEncoder {
    primary: Box<dyn TextEncoder>,
    fallback: Box<dyn TextEncoder>,
    failed: AtomicBool,
}

impl FallbackEncoder {
    pub fn new(primary: Box<dyn TextEncoder>, fallback: Box<dyn TextEncoder>) -> Self {
        FallbackEncoder {
            primary,
            fallback,
            failed: AtomicBool::new(false),
        }
    }

    pub fn has_fallen_back(&self) -> bool {
        self.failed.load(Ordering::Relaxed)
    }

    fn run(&self, f: impl Fn(&dyn TextEncoder) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
        if !self.has_fallen_back() {
            match f(self.primary.as_ref()) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    eprintln!("warning: {e}; falling back to {} encoder", self.fallback.name());
                    self.failed.store(true, Ordering::Relaxed);
                }
            }
        }
        f(self.fallback.as_ref())
    }
}

impl TextEncoder for FallbackEncoder {
    fn name(&self) -> &str {
        if self.has_fallen_back() {
            self.fallback.name()
        } else {
            self.primary.name()
        }
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        self.run(|e| e.encode(text))
    }

    fn encode_prompt(&self, prompt: &PromptRecord) -> Result<Vec<f64>> {
        self.run(|e| e.encode_prompt(prompt))
    }
}

/// Encoder selection.
#[derive(Debug, Clone, PartialEq)]
pub enum EncoderSpec {
    Builtin,
    Remote {
        url: String,
        timeout: Duration,
        fallback: bool,
    },
}

impl EncoderSpec {
    pub fn build(&self) -> Box<dyn TextEncoder> {
        match self {
            EncoderSpec::Builtin => Box::new(HashEncoder::new()),
            EncoderSpec::Remote { url, timeout, fallback } => {
                let remote = Box::new(RemoteEncoder::new(url.clone(), *timeout));
                if *fallback {
                    Box::new(FallbackEncoder::new(remote, Box::new(HashEncoder::new())))
                } else {
                    remote
                }
            }
        }
    }
}

/// `encoder.encode(prompt)` as a free function.
pub fn encode_text(prompt: &str, encoder: &dyn TextEncoder) -> Result<Vec<f64>> {
    encoder.encode(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::prompt::{build_state_prompt, PromptOptions};
    use crate::env::State;
    use crate::instances::{generate_instance, GenConfig};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn builtin_basics() {
        let e = HashEncoder::new();
        assert_eq!(e.encode("").unwrap(), vec![0.0; TEXT_DIM]);
        assert_eq!(e.encode(", ;{}").unwrap(), vec![0.0; TEXT_DIM]);
        let a = e.encode("{Job 0, Op 0, 5 ops left}").unwrap();
        assert_eq!(a, e.encode("{Job 0, Op 0, 5 ops left}").unwrap());
        assert_eq!(a.len(), TEXT_DIM);
        assert!((norm(&a) - 1.0).abs() < 1e-12);
        assert_ne!(a, e.encode("{Job 1, Op 0, 5 ops left}").unwrap());
    }

    #[test]
    fn tokens() {
        let t: Vec<&str> = tokenize("{Job 0, est_start=0.0; machines=0:7.0|1:6.0}").collect();
        assert_eq!(t, ["Job", "0", "est_start", "0.0", "machines", "0", "7.0", "1", "6.0"]);
    }

    #[test]
    fn fragment_cache_matches_document_encoding() {
        let e = HashEncoder::new();
        let inst = Arc::new(generate_instance(1, &GenConfig::default()).unwrap());
        let mut s = State::reset(inst);
        for _ in 0..3 {
            for _ in 0..7 {
                let a = s.legal_actions()[0];
                s.apply(&a).unwrap();
            }
            let p = build_state_prompt(&s, None, PromptOptions::default());
            assert_eq!(e.encode_prompt(&p).unwrap(), e.encode(&p.document()).unwrap());
        }
    }

    fn serve(responses: Vec<String>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for body in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut req = vec![0; len];
                reader.read_exact(&mut req).unwrap();
                let req: serde_json::Value = serde_json::from_slice(&req).unwrap();
                assert!(req["text"].is_string());
                write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    body.len(),
                    body
                )
                .unwrap();
            }
        });
        format!("http://{addr}/embed")
    }

    #[test]
    fn remote_full_width_and_projection() {
        let full: Vec<f64> = (0..TEXT_DIM).map(|i| i as f64).collect();
        let small = vec![1.0, -2.0, 0.5];
        let url = serve(vec![
            serde_json::json!({ "embedding": full }).to_string(),
            serde_json::json!({ "embedding": small }).to_string(),
            serde_json::json!({ "embedding": small }).to_string(),
        ]);
        let e = RemoteEncoder::new(url, Duration::from_secs(5));
        let a = e.encode("x").unwrap();
        let n = norm(&full);
        for (i, v) in a.iter().enumerate() {
            assert!((v - i as f64 / n).abs() < 1e-12);
        }
        let b = e.encode("y").unwrap();
        assert_eq!(b.len(), TEXT_DIM);
        assert!((norm(&b) - 1.0).abs() < 1e-12);
        assert_eq!(b, e.encode("y").unwrap());
    }

    #[test]
    fn remote_malformed_and_unreachable() {
        let url = serve(vec![r#"{"vector": [1, 2]}"#.into(), r#"{"embedding": []}"#.into()]);
        let e = RemoteEncoder::new(url, Duration::from_secs(5));
        assert!(matches!(e.encode("x"), Err(Error::Encoder(_))));
        assert!(matches!(e.encode("x"), Err(Error::Encoder(_))));

        let dead = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
        let spec = EncoderSpec::Remote {
            url: format!("http://{dead}/embed"),
            timeout: Duration::from_millis(500),
            fallback: true,
        };
        let enc = spec.build();
        let v = enc.encode("{Job 0}").unwrap();
        assert_eq!(v, HashEncoder::new().encode("{Job 0}").unwrap());
        assert_eq!(enc.name(), "builtin");
    }
}
