//! HTTP facade over a loaded model and ellipsoid.
//!
//! Coefficient vectors in requests and responses use ellipsoid coordinates:
//! the intercept, then one entry per step of each shape function, in the
//! order given by `blocks` in `GET /api/model`.

mod error;
mod openapi;
mod routes;
mod session;

use std::net::SocketAddr;

pub use error::ApiError;
pub use routes::{router, Meta, ModelView, MAX_SAMPLES};
pub use session::{AppState, Session};

/// Serves until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

/// Blocking wrapper around [`serve`] with its own runtime.
pub fn serve_blocking(state: AppState, addr: SocketAddr, threads: Option<usize>) -> std::io::Result<()> {
    let mut builder = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        builder.worker_threads(n.max(1));
    }
    builder.enable_all().build()?.block_on(serve(state, addr))
}
