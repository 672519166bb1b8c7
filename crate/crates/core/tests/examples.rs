//! Runs every example's `run()` so the examples stay working.

macro_rules! sync_example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::run().unwrap();
        }
    };
}

macro_rules! async_example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        #[path = $path]
        mod $name;

        #[tokio::test]
        async fn $name() {
            $name::run().await.unwrap();
        }
    };
}

sync_example!(text_preprocessing, "../examples/text_preprocessing.rs");
sync_example!(chunking, "../examples/chunking.rs");
sync_example!(csv_ingest, "../examples/csv_ingest.rs");
sync_example!(configuration, "../examples/configuration.rs");
async_example!(web_snapshots, "../examples/web_snapshots.rs");
async_example!(vector_store, "../examples/vector_store.rs");
async_example!(incremental_sync, "../examples/incremental_sync.rs");
async_example!(hybrid_search, "../examples/hybrid_search.rs");
async_example!(rag_chat, "../examples/rag_chat.rs");
async_example!(metrics, "../examples/metrics.rs");
async_example!(http_service, "../examples/http_service.rs");
