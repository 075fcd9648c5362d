//! Thin async client for the localization service.

use irsloc_core::api::{
    AnglesRequest, AnglesResponse, ApiError, CrbRequest, CrbResponse, ExperimentRequest, ExperimentResponse, LocalizeRequest,
    LocalizeResponse, ScenarioInfo,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use url::Url;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server URL: {0}")]
    Url(#[from] url::ParseError),
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The server answered with an error body.
    #[error("server returned {status}: {error}")]
    Api { status: u16, error: ApiError },
}

impl ClientError {
    /// The service's error body, when there is one.
    pub fn api(&self) -> Option<&ApiError> {
        match self {
            ClientError::Api { error, .. } => Some(error),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: Url,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self> {
        let mut base = Url::parse(base_url)?;
        if !base.path().ends_with('/') {
            base.set_path(&format!("{}/", base.path()));
        }
        Ok(Client { base, http: reqwest::Client::new() })
    }

    pub fn base_url(&self) -> &Url {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let error = serde_json::from_str(&text).unwrap_or(ApiError { kind: "http".into(), message: text });
        Err(ClientError::Api { status: status.as_u16(), error })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        Self::decode(self.http.get(self.base.join(path)?).send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        Self::decode(self.http.post(self.base.join(path)?).json(body).send().await?).await
    }

    pub async fn health(&self) -> Result<()> {
        let resp = self.http.get(self.base.join("health")?).send().await?;
        if resp.status().is_success() {
            Ok(())
        } else {
            let status = resp.status().as_u16();
            Err(ClientError::Api { status, error: ApiError { kind: "http".into(), message: resp.text().await? } })
        }
    }

    pub async fn scenarios(&self) -> Result<Vec<ScenarioInfo>> {
        self.get("v1/scenarios").await
    }

    pub async fn crb(&self, req: &CrbRequest) -> Result<CrbResponse> {
        self.post("v1/crb", req).await
    }

    pub async fn angles(&self, req: &AnglesRequest) -> Result<AnglesResponse> {
        self.post("v1/angles", req).await
    }

    pub async fn localize(&self, req: &LocalizeRequest) -> Result<LocalizeResponse> {
        self.post("v1/localize", req).await
    }

    pub async fn experiment(&self, req: &ExperimentRequest) -> Result<ExperimentResponse> {
        self.post("v1/experiments", req).await
    }
}
