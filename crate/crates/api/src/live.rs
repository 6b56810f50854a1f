//! WebSocket live stream. Each text message is one publication:
//! `{"topic", "topic_seq", "published_at", "data": {"type": ...}}`.
//!
//! `GET /live?topics=alerts,batch/b1/` narrows the stream to topics starting
//! with any of the comma-separated prefixes.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::Response;
use fermtwin_core::domain::codec;
use fermtwin_core::server::TopicFilter;
use serde::Deserialize;
use tokio::sync::mpsc;

use crate::http::AppState;

#[derive(Debug, Default, Deserialize)]
pub struct LiveQuery {
    pub topics: Option<String>,
}

pub fn filters(q: &LiveQuery) -> Vec<TopicFilter> {
    match q.topics.as_deref() {
        None | Some("") => vec![TopicFilter::All],
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| TopicFilter::Prefix(p.to_owned()))
            .collect(),
    }
}

pub async fn upgrade(
    ws: WebSocketUpgrade,
    State(app): State<AppState>,
    Query(q): Query<LiveQuery>,
) -> Response {
    let filters = filters(&q);
    ws.on_upgrade(move |socket| stream(socket, app, filters))
}

async fn stream(mut socket: WebSocket, app: AppState, filters: Vec<TopicFilter>) {
    let (tx, mut rx) = mpsc::unbounded_channel();
    let id = app.server.subscribe(TopicFilter::All, move |p| {
        if filters.iter().any(|f| f.matches(&p.topic)) {
            tx.send(Arc::clone(p)).is_ok()
        } else {
            !tx.is_closed()
        }
    });
    tracing::debug!(?id, "live client connected");
    loop {
        tokio::select! {
            p = rx.recv() => {
                let Some(p) = p else { break };
                let text = codec::to_string(&*p).expect("publications serialize");
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                Some(Ok(_)) => {}
            }
        }
    }
    app.server.unsubscribe(id);
    tracing::debug!(?id, "live client disconnected");
}
