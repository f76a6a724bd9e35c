//! WebSocket front end. Each connection owns one [`ServiceSession`] and
//! its messages are handled in arrival order.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;

use crate::protocol::{ErrorCode, ServerMessage};
use crate::session::{ServiceContext, ServiceSession};

/// Path of the session socket.
pub const WS_PATH: &str = "/ws";

pub fn router(ctx: Arc<ServiceContext>) -> Router {
    Router::new()
        .route(WS_PATH, get(upgrade))
        .route("/health", get(|| async { "ok" }))
        .with_state(ctx)
}

/// Serve until the listener fails.
pub async fn serve(listener: TcpListener, ctx: Arc<ServiceContext>) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!("listening on ws://{addr}{WS_PATH}");
    }
    axum::serve(listener, router(ctx)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(ctx): State<Arc<ServiceContext>>) -> Response {
    ws.on_upgrade(move |socket| run(socket, ctx))
}

async fn run(mut socket: WebSocket, ctx: Arc<ServiceContext>) {
    let mut session = ServiceSession::new(ctx);
    tracing::info!(session = session.id(), "connected");
    while let Some(msg) = socket.recv().await {
        let replies = match msg {
            Ok(Message::Text(text)) => session.handle_text(text.as_str()),
            Ok(Message::Binary(_)) => vec![ServerMessage::error(ErrorCode::Unsupported, "binary frames are not supported")],
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        for reply in replies {
            if socket.send(Message::Text(reply.to_json().into())).await.is_err() {
                tracing::info!(session = session.id(), "send failed");
                return;
            }
        }
    }
    tracing::info!(session = session.id(), "closed");
}
