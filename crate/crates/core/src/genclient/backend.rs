use std::time::Duration;

use super::{GenerateRequest, GenerateResponse, GenerationBackend};
use crate::http::{CallResult, HttpClient, ServiceInfo};

/// Generation backend reached over `POST /generate`.
#[derive(Debug, Clone)]
pub struct HttpGenerationBackend {
    client: HttpClient,
}

impl HttpGenerationBackend {
    pub fn new(base_url: &str, timeout: Duration, auth: Option<(String, String)>) -> Self {
        Self { client: HttpClient::new(base_url, timeout, auth) }
    }

    pub fn info(&self) -> CallResult<ServiceInfo> {
        self.client.get_json("/info")
    }
}

impl GenerationBackend for HttpGenerationBackend {
    fn generate(&self, req: &GenerateRequest) -> CallResult<Vec<String>> {
        let resp: GenerateResponse = self.client.post_json("/generate", req)?;
        Ok(resp.texts)
    }
}
