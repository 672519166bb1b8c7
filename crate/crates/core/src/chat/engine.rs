use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_prompt, generate_reply, ChatBackend, Failure, PromptOptions, SessionStore, SourceRef};
use crate::clock::Clock;
use crate::retriever::{HybridRetriever, RetrieveError};

/// Longest accepted user message.
pub const MAX_MESSAGE_BYTES: usize = 4096;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("message is empty")]
    EmptyMessage,
    #[error("message exceeds {MAX_MESSAGE_BYTES} bytes")]
    MessageTooLong,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("retrieval failed: {0}")]
    Retrieve(#[from] RetrieveError),
    #[error("session storage: {0}")]
    Session(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub session_id: String,
    pub reply: String,
    pub sources: Vec<SourceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    /// Messages in the session after this turn.
    pub history_len: usize,
}

/// One chat turn end to end: retrieve → build prompt → generate → record.
pub struct ChatEngine {
    retriever: Arc<HybridRetriever>,
    backend: Arc<dyn ChatBackend>,
    sessions: SessionStore,
    options: PromptOptions,
    clock: Arc<dyn Clock>,
}

impl ChatEngine {
    pub fn new(
        retriever: Arc<HybridRetriever>,
        backend: Arc<dyn ChatBackend>,
        sessions: SessionStore,
        options: PromptOptions,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self { retriever, backend, sessions, options, clock }
    }

    pub fn retriever(&self) -> &Arc<HybridRetriever> {
        &self.retriever
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    /// Runs a turn in `session_id`, or in a new session when `None`.
    ///
    /// Turns in the same session run one after another. A backend failure is
    /// not an error here: the result carries the fallback text and
    /// [`TurnResult::failure`].
    pub async fn ask(&self, session_id: Option<&str>, message: &str) -> Result<TurnResult, ChatError> {
        let message = message.trim();
        if message.is_empty() {
            return Err(ChatError::EmptyMessage);
        }
        if message.len() > MAX_MESSAGE_BYTES {
            return Err(ChatError::MessageTooLong);
        }
        let shared = match session_id {
            Some(id) => self.sessions.get(id)?.ok_or_else(|| ChatError::UnknownSession(id.to_owned()))?,
            None => self.sessions.create(self.clock.now())?,
        };
        let mut session = shared.lock().await;

        let hits = self.retriever.retrieve(message, self.options.n_ctx.max(1)).await?;
        let bundle = build_prompt(&session, message, &hits, self.options);
        let reply = generate_reply(&mut session, &bundle, self.backend.as_ref(), self.clock.as_ref()).await;
        self.sessions.append(&session, 2)?;

        Ok(TurnResult {
            session_id: session.id.clone(),
            reply: reply.text,
            sources: reply.sources,
            failure: reply.failure,
            history_len: session.messages.len(),
        })
    }
}
