use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedding, EmbeddingProvider};

/// Environment variable naming the embedding endpoint.
pub const EMBED_URL_ENV: &str = "EES_EMBED_URL";

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding service.
///
/// `POST <url>` with `{"texts": [...]}`, expecting
/// `{"dim": <int>, "vectors": [[...], ...]}`. Every response must agree with
/// the dimension seen at connect time and contain only finite values.
pub struct RemoteEmbedder {
    url: String,
    dim: usize,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder")
            .field("url", &self.url)
            .field("dim", &self.dim)
            .finish()
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

impl RemoteEmbedder {
    /// Connects and learns the dimension from a one-text probe.
    pub fn connect(url: impl Into<String>) -> Result<Self, EmbedError> {
        let url = url.into();
        let agent = agent();
        let probe = request(&agent, &url, &["dimension probe"])?;
        if probe.dim == 0 {
            return Err(EmbedError::Service("service reported dimension 0".into()));
        }
        let embedder = Self {
            url,
            dim: probe.dim,
            agent,
        };
        embedder.validate(probe, 1)?;
        Ok(embedder)
    }

    /// Reads the endpoint from `EES_EMBED_URL`.
    pub fn from_env() -> Result<Self, EmbedError> {
        let url = std::env::var(EMBED_URL_ENV)
            .map_err(|_| EmbedError::Service(format!("{EMBED_URL_ENV} is not set")))?;
        Self::connect(url)
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn validate(&self, response: EmbedResponse, expected: usize) -> Result<Vec<Embedding>, EmbedError> {
        if response.dim != self.dim {
            return Err(EmbedError::Dimension {
                expected: self.dim,
                got: response.dim,
            });
        }
        if response.vectors.len() != expected {
            return Err(EmbedError::Count {
                expected,
                got: response.vectors.len(),
            });
        }
        response
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(EmbedError::Dimension {
                        expected: self.dim,
                        got: v.len(),
                    });
                }
                Embedding::new(v)
            })
            .collect()
    }
}

fn request(agent: &ureq::Agent, url: &str, texts: &[&str]) -> Result<EmbedResponse, EmbedError> {
    let mut response = agent
        .post(url)
        .send_json(EmbedRequest { texts })
        .map_err(|e| EmbedError::Service(e.to_string()))?;
    response
        .body_mut()
        .read_json::<EmbedResponse>()
        .map_err(|e| EmbedError::Service(format!("bad response body: {e}")))
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let response = request(&self.agent, &self.url, texts)?;
        self.validate(response, texts.len())
    }
}
