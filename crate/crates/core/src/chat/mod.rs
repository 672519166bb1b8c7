//! Conversational answers grounded in retrieved context.
//!
//! A turn retrieves hits for the user message, assembles a prompt (fixed
//! system charter, numbered context blocks with source references, recent
//! history, the question), sends it to a chat-completion backend and records
//! both sides of the exchange in the session. Backend failures never produce
//! an invented answer; the user gets a fixed retry message instead.

mod backend;
mod engine;
mod session;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::clock::{Clock, Timestamp};
use crate::retriever::ScoredDoc;

pub use backend::{ChatBackend, EchoBackend, HttpChatBackend, LlmConfig, LlmError, WireMessage};
pub use engine::{ChatEngine, ChatError, TurnResult, MAX_MESSAGE_BYTES};
pub use session::{SessionStore, SharedSession};

/// The system message sent with every request.
pub const SYSTEM_CHARTER: &str = "You are a campus help assistant for university students. \
You answer questions about courses, prerequisites, class schedules, faculty, policies and \
campus services. Respond only from the provided context; if the answer is not in the \
context, say you don't know. Cite the numbered sources you used, for example [1]. \
Keep answers short and factual.";

/// The literal refusal instruction contained in [`SYSTEM_CHARTER`].
pub const REFUSAL_INSTRUCTION: &str =
    "Respond only from the provided context; if the answer is not in the context, say you don't know.";

pub const RETRY_MESSAGE: &str = "Sorry, the assistant is unavailable right now. Please try again later.";
pub const BUSY_MESSAGE: &str = "Sorry, the assistant is busy with other requests right now. Please try again later.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    pub at: Timestamp,
    /// Set on assistant messages that carry a fallback instead of a reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: String,
    pub created_at: Timestamp,
    pub messages: Vec<ChatMessage>,
}

impl ChatSession {
    pub fn new(id: impl Into<String>, created_at: Timestamp) -> Self {
        Self { id: id.into(), created_at, messages: Vec::new() }
    }

    /// Completed (user, assistant) pairs whose reply was not a fallback,
    /// oldest first.
    pub fn answered_turns(&self) -> Vec<(&ChatMessage, &ChatMessage)> {
        self.messages
            .windows(2)
            .filter(|w| w[0].role == Role::User && w[1].role == Role::Assistant && w[1].error_code.is_none())
            .map(|w| (&w[0], &w[1]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub id: String,
    pub table: String,
    pub source_id: String,
    pub combined: f64,
}

impl From<&ScoredDoc> for SourceRef {
    fn from(d: &ScoredDoc) -> Self {
        Self {
            id: d.id.clone(),
            table: d.metadata.table.clone(),
            source_id: d.metadata.source_id.clone(),
            combined: d.scores.combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    /// 1-based, as cited in answers.
    pub number: usize,
    pub document: String,
    pub source: SourceRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptOptions {
    /// Context blocks taken from the top of the hit list.
    pub n_ctx: usize,
    /// Past (user, assistant) turns included in the prompt.
    pub history_turns: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self { n_ctx: 5, history_turns: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub context: Vec<ContextBlock>,
    pub history: Vec<WireMessage>,
    pub query: String,
}

impl PromptBundle {
    pub fn sources(&self) -> Vec<SourceRef> {
        self.context.iter().map(|b| b.source.clone()).collect()
    }

    /// The final user message: context blocks followed by the question.
    pub fn user_content(&self) -> String {
        let mut out = String::from("Context:\n");
        if self.context.is_empty() {
            out.push_str("No sources were found for this question.\n");
        }
        for b in &self.context {
            let _ = writeln!(
                out,
                "[{}] (source: {}/{}, id: {}, score: {:.4})\n{}",
                b.number, b.source.table, b.source.source_id, b.source.id, b.source.combined, b.document
            );
        }
        let _ = write!(out, "\nQuestion: {}", self.query);
        out
    }

    /// The messages array: system, history, then the user message.
    pub fn messages(&self) -> Vec<WireMessage> {
        let mut out = Vec::with_capacity(self.history.len() + 2);
        out.push(WireMessage { role: Role::System, content: self.system.clone() });
        out.extend(self.history.iter().cloned());
        out.push(WireMessage { role: Role::User, content: self.user_content() });
        out
    }

    /// Everything sent to the backend, as one string.
    pub fn render(&self) -> String {
        self.messages().iter().map(|m| format!("{:?}: {}", m.role, m.content)).collect::<Vec<_>>().join("\n\n")
    }
}

/// Assembles the prompt for `query`.
///
/// `hits` must be sorted best first; the top `n_ctx` become numbered context
/// blocks. History holds the most recent `history_turns` answered turns;
/// turns that ended in a fallback are left out.
pub fn build_prompt(session: &ChatSession, query: &str, hits: &[ScoredDoc], options: PromptOptions) -> PromptBundle {
    let context = hits
        .iter()
        .take(options.n_ctx)
        .enumerate()
        .map(|(i, h)| ContextBlock { number: i + 1, document: h.document.clone(), source: SourceRef::from(h) })
        .collect();
    let turns = session.answered_turns();
    let skip = turns.len().saturating_sub(options.history_turns);
    let history = turns[skip..]
        .iter()
        .flat_map(|(u, a)| {
            [
                WireMessage { role: Role::User, content: u.content.clone() },
                WireMessage { role: Role::Assistant, content: a.content.clone() },
            ]
        })
        .collect();
    PromptBundle { system: SYSTEM_CHARTER.to_owned(), context, history, query: query.to_owned() }
}

/// User-facing text and internal code for a backend failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub code: String,
    pub message: String,
}

pub fn handle_failure(error: &LlmError) -> Failure {
    let (code, message) = match error {
        LlmError::Status(429) => ("llm_busy", BUSY_MESSAGE),
        LlmError::Timeout => ("llm_timeout", RETRY_MESSAGE),
        LlmError::Status(_) => ("llm_unavailable", RETRY_MESSAGE),
        LlmError::Transport(_) => ("llm_unreachable", RETRY_MESSAGE),
        LlmError::Malformed(_) => ("llm_bad_response", RETRY_MESSAGE),
        LlmError::Config(_) => ("llm_not_configured", RETRY_MESSAGE),
    };
    log::warn!("chat backend failure [{code}]: {error}");
    Failure { code: code.to_owned(), message: message.to_owned() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub text: String,
    pub sources: Vec<SourceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

/// Sends `bundle` to `backend` and appends the user message and the
/// assistant reply (or fallback) to `session`.
///
/// The reply is returned with surrounding whitespace trimmed. On failure the
/// fallback text is returned with no sources.
pub async fn generate_reply(
    session: &mut ChatSession,
    bundle: &PromptBundle,
    backend: &dyn ChatBackend,
    clock: &dyn Clock,
) -> Reply {
    let result = backend.complete(&bundle.messages()).await.and_then(|text| {
        let text = text.trim().to_owned();
        if text.is_empty() {
            Err(LlmError::Malformed("empty reply".into()))
        } else {
            Ok(text)
        }
    });
    let now = clock.now();
    session.messages.push(ChatMessage { role: Role::User, content: bundle.query.clone(), at: now, error_code: None });
    match result {
        Ok(text) => {
            session.messages.push(ChatMessage {
                role: Role::Assistant,
                content: text.clone(),
                at: clock.now(),
                error_code: None,
            });
            Reply { text, sources: bundle.sources(), failure: None }
        }
        Err(e) => {
            let failure = handle_failure(&e);
            session.messages.push(ChatMessage {
                role: Role::Assistant,
                content: failure.message.clone(),
                at: clock.now(),
                error_code: Some(failure.code.clone()),
            });
            Reply { text: failure.message.clone(), sources: Vec::new(), failure: Some(failure) }
        }
    }
}

/// `reply` followed by a `Sources: [...]` footer.
pub fn with_source_footer(reply: &str, sources: &[SourceRef]) -> String {
    let ids: Vec<&str> = sources.iter().map(|s| s.id.as_str()).collect();
    format!("{reply}\nSources: [{}]", ids.join(", "))
}
