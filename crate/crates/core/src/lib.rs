//! Campus knowledge base: ingest CSV tables and web pages, keep a vector
//! store in step with them, and answer questions with hybrid retrieval and
//! a grounded chat model.
//!
//! The pipeline, in module order:
//!
//! - [`ingest`] loads CSV rows and page snapshots into SQLite, hashing rows
//!   so unchanged data is never rewritten.
//! - [`syncpipe`] renders new or changed rows into documents, chunks them
//!   ([`textprep`]), embeds them ([`embed`]) and upserts them into
//!   [`vecstore`].
//! - [`retriever`] fuses BM25 and vector similarity.
//! - [`chat`] builds prompts from retrieved context and session history.
//! - [`evalkit`] scores answers with BLEU, ROUGE-L, METEOR and an embedding
//!   similarity.
//! - [`service`] exposes all of it over HTTP.

pub mod chat;
pub mod clock;
pub mod embed;
pub mod evalkit;
pub mod ingest;
pub mod retriever;
pub mod service;
pub mod syncpipe;
pub mod textprep;
pub mod vecstore;
