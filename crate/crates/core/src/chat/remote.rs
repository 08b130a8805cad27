use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::Url;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, Generated};

/// Client for a model served over HTTP.
///
/// `POST {endpoint}/generate {"query", "k"} -> {"candidates"}` and
/// `POST {endpoint}/understand {"smiles"} -> {"description"}`.
pub struct RemoteBackend {
    id: String,
    endpoint: Url,
    client: Client,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    query: &'a str,
    k: usize,
}

#[derive(Deserialize)]
struct GenerateResponse {
    candidates: Vec<String>,
}

#[derive(Serialize)]
struct UnderstandRequest<'a> {
    smiles: &'a str,
}

#[derive(Deserialize)]
struct UnderstandResponse {
    description: String,
}

pub fn remote_backend(
    endpoint_url: &str,
    timeout: Duration,
) -> Result<RemoteBackend, BackendError> {
    let mut endpoint = Url::parse(endpoint_url)
        .map_err(|e| BackendError::Protocol(format!("bad endpoint {endpoint_url}: {e}")))?;
    if !endpoint.path().ends_with('/') {
        let path = format!("{}/", endpoint.path());
        endpoint.set_path(&path);
    }
    let client = Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| BackendError::Failed(e.to_string()))?;
    Ok(RemoteBackend {
        id: format!("remote:{endpoint_url}"),
        endpoint,
        client,
    })
}

fn map_err(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else if e.is_connect() {
        BackendError::Unreachable(e.to_string())
    } else if e.is_decode() {
        BackendError::Protocol(e.to_string())
    } else {
        BackendError::Failed(e.to_string())
    }
}

impl RemoteBackend {
    fn post<Req: Serialize, Resp: serde::de::DeserializeOwned>(
        &self,
        route: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = self
            .endpoint
            .join(route)
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let resp = self.client.post(url).json(body).send().map_err(map_err)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Protocol(format!("{route}: HTTP {status}")));
        }
        resp.json().map_err(map_err)
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn understand(&self, smiles: &str) -> Result<String, BackendError> {
        let r: UnderstandResponse = self.post("understand", &UnderstandRequest { smiles })?;
        Ok(r.description)
    }

    fn generate(&self, query: &str, k: usize) -> Result<Generated, BackendError> {
        let r: GenerateResponse = self.post("generate", &GenerateRequest { query, k })?;
        let mut candidates = r.candidates;
        candidates.truncate(k.max(1));
        Generated::fit(candidates, k)
    }
}
