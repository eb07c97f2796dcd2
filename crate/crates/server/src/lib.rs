//! HTTP service for the makeup transfer engine.
//!
//! Routes: `GET /health`, `GET /references`, `GET /references/{id}/thumbnail`
//! and `POST /transfer`. Each transfer runs on a blocking worker with its
//! own copies of the inputs; the only shared state is the gallery loaded at
//! startup.

mod error;
pub mod gallery;
pub mod transfer;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use thiserror::Error;

pub use error::ApiError;
pub use gallery::{Gallery, GalleryEntry, ManifestEntry};
pub use transfer::CHECKSUM_HEADER;

/// Largest accepted image side, in pixels.
pub const MAX_SIDE: usize = 2048;

/// Upload size cap for one multipart request.
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("gallery: {0}")]
    Gallery(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server stopped: {0}")]
    Serve(std::io::Error),
}

#[derive(Debug, Default)]
pub struct AppState {
    pub gallery: Gallery,
}

impl AppState {
    pub fn load(assets: &Path) -> Result<Self, ServerError> {
        Ok(Self {
            gallery: Gallery::load(assets)?,
        })
    }
}

async fn health() -> impl IntoResponse {
    Json(json!({ "status": "ok", "version": makeup_core::VERSION }))
}

async fn references(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(json!({ "references": state.gallery.manifest() }))
}

async fn thumbnail(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<impl IntoResponse, ApiError> {
    let bytes = state
        .gallery
        .get(&id)
        .and_then(|e| e.thumbnail.clone())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_reference", format!("no thumbnail for {id:?}")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/references", get(references))
        .route("/references/{id}/thumbnail", get(thumbnail))
        .route("/transfer", post(transfer::transfer))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, assets: &Path) -> Result<(), ServerError> {
    let state = Arc::new(AppState::load(assets)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })?;
    axum::serve(listener, router(state)).await.map_err(ServerError::Serve)
}
