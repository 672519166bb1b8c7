mod common;

use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;

use unirag::clock::{ManualClock, Timestamp};
use unirag::embed::EmbeddingVector;
use unirag::evalkit::{bleu, lcs_len, meteor, rouge_l};
use unirag::ingest::{content_hash, extract_text, RelationalStore};
use unirag::syncpipe::{render_row, sync, IngestCursor};
use unirag::textprep::{lemmatize, normalize, split_recursive, ChunkParams};
use unirag::vecstore::{RecordMetadata, VectorRecord, VectorStore};

/// Straight-line SHA-256 used only as an oracle for the library hash.
fn reference_sha256(data: &[u8]) -> String {
    const K: [u32; 64] = [
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98,
        0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
        0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8,
        0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
        0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
        0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
        0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2,
    ];
    let mut h: [u32; 8] =
        [0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19];
    let mut msg = data.to_vec();
    let bit_len = (data.len() as u64) * 8;
    msg.push(0x80);
    while msg.len() % 64 != 56 {
        msg.push(0);
    }
    msg.extend_from_slice(&bit_len.to_be_bytes());
    for block in msg.chunks(64) {
        let mut w = [0u32; 64];
        for i in 0..16 {
            w[i] = u32::from_be_bytes([block[4 * i], block[4 * i + 1], block[4 * i + 2], block[4 * i + 3]]);
        }
        for i in 16..64 {
            let s0 = w[i - 15].rotate_right(7) ^ w[i - 15].rotate_right(18) ^ (w[i - 15] >> 3);
            let s1 = w[i - 2].rotate_right(17) ^ w[i - 2].rotate_right(19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16].wrapping_add(s0).wrapping_add(w[i - 7]).wrapping_add(s1);
        }
        let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh] = h;
        for i in 0..64 {
            let s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
            let ch = (e & f) ^ (!e & g);
            let t1 = hh.wrapping_add(s1).wrapping_add(ch).wrapping_add(K[i]).wrapping_add(w[i]);
            let s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
            let maj = (a & b) ^ (a & c) ^ (b & c);
            let t2 = s0.wrapping_add(maj);
            hh = g;
            g = f;
            f = e;
            e = d.wrapping_add(t1);
            d = c;
            c = b;
            b = a;
            a = t1.wrapping_add(t2);
        }
        for (x, y) in h.iter_mut().zip([a, b, c, d, e, f, g, hh]) {
            *x = x.wrapping_add(y);
        }
    }
    h.iter().map(|x| format!("{x:08x}")).collect()
}

/// Exponential LCS by definition; fine for short inputs.
fn naive_lcs(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (Some((x, ar)), Some((y, br))) => {
            if x == y {
                1 + naive_lcs(ar, br)
            } else {
                naive_lcs(ar, b).max(naive_lcs(a, br))
            }
        }
        _ => 0,
    }
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec!["the", "cat", "sat", "on", "mat", "a", "course", "courses", "room"]),
        0..12,
    )
    .prop_map(|w| w.join(" "))
}

#[test]
fn reference_sha256_matches_published_vectors() {
    assert_eq!(reference_sha256(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    assert_eq!(reference_sha256(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,80}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn lemmatize_is_idempotent(w in "[a-z]{1,14}") {
        let once = lemmatize(&w);
        prop_assert_eq!(lemmatize(&once), once);
    }

    #[test]
    fn chunks_reassemble_to_source(
        text in "[a-z .\n]{0,600}",
        size in 20usize..200,
        overlap_frac in 0.0f64..0.9,
    ) {
        let overlap = ((size as f64) * overlap_frac) as usize;
        let params = ChunkParams::new(size, overlap).unwrap();
        let chunks = split_recursive(&text, params);
        let mut out = String::new();
        for (i, c) in chunks.iter().enumerate() {
            prop_assert!(c.text.chars().count() <= size);
            prop_assert_eq!(c.chunk_index, i);
            if i == 0 {
                out.push_str(&c.text);
            } else {
                out.extend(c.text.chars().skip(overlap));
            }
        }
        prop_assert_eq!(out, text);
    }

    #[test]
    fn extracted_text_has_no_markup(
        parts in prop::collection::vec(
            prop::sample::select(vec![
                "<script>alert(1)</script>", "<style>p{}</style>", "<p>", "</p>", "<div class=x>", "</div>",
                "&lt;script&gt;", "hello", "<", ">", "</", "<scr", "ipt>", "<!-- c -->", "&amp;", "text & more",
            ]),
            0..20,
        )
    ) {
        let html = parts.concat();
        let text = extract_text(html.as_bytes());
        prop_assert!(!text.to_lowercase().contains("<script"), "{text:?}");
        prop_assert!(!text.contains("</"), "{text:?}");
    }

    #[test]
    fn lcs_matches_naive(a in prop::collection::vec(0u8..4, 0..9), b in prop::collection::vec(0u8..4, 0..9)) {
        prop_assert_eq!(lcs_len(&a, &b), naive_lcs(&a, &b));
    }

    #[test]
    fn metrics_stay_in_unit_interval(c in sentence(), r in sentence()) {
        let b = bleu(&c, &[&r]).bleu;
        let rl = rouge_l(&c, &r);
        let m = meteor(&c, &r).meteor;
        for x in [b, rl.precision, rl.recall, rl.f, m] {
            prop_assert!((0.0..=1.0).contains(&x), "{x}");
        }
    }

    #[test]
    fn identical_text_scores_perfectly(c in sentence()) {
        prop_assert!((rouge_l(&c, &c).f - 1.0).abs() < 1e-12);
        if c.split_whitespace().count() >= 4 {
            prop_assert!((bleu(&c, &[&c]).bleu - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_store_matches_brute_force(
        vectors in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 1..40),
        query in prop::collection::vec(-1.0f64..1.0, 6),
        k in 1usize..50,
    ) {
        prop_assume!(query.iter().any(|x| x.abs() > 1e-3));
        let fp = unirag::embed::ProviderFingerprint { name: "t".into(), model: "t".into(), dim: 6 };
        let mut store = VectorStore::new(fp);
        let mut kept = Vec::new();
        for (i, v) in vectors.iter().enumerate() {
            let Ok(vector) = EmbeddingVector::new(v.clone()).and_then(EmbeddingVector::normalized) else { continue };
            kept.push((format!("r{i:03}"), vector.values().to_vec()));
            store.upsert(vec![VectorRecord {
                id: format!("r{i:03}"),
                vector,
                document: String::new(),
                metadata: RecordMetadata { table: "t".into(), source_id: i.to_string(), facet: "row".into(), chunk_index: 0, rendered_at: 0 },
            }]).unwrap();
        }
        let qn: f64 = query.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut expected: Vec<(String, f64)> = kept
            .iter()
            .map(|(id, v)| {
                let vn: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let cos = v.iter().zip(&query).map(|(a, b)| a * b).sum::<f64>() / (vn * qn);
                (id.clone(), 1.0 - cos)
            })
            .collect();
        expected.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        expected.truncate(k);
        let got = store.query(&query, k).unwrap();
        prop_assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            prop_assert!((g.1 - e.1).abs() < 1e-9, "{g:?} vs {e:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn content_hash_matches_reference(s in "\\PC{0,200}") {
        prop_assert_eq!(content_hash(&s), reference_sha256(s.as_bytes()));
    }
}

#[derive(Debug, Clone)]
enum Step {
    /// Re-ingest with these rows edited, `secs` after the previous step.
    Ingest {
        edited: Vec<usize>,
        secs: i64,
    },
    Sync,
}

fn steps() -> impl Strategy<Value = Vec<Step>> {
    let step = prop_oneof![
        (prop::collection::vec(0usize..8, 0..4), 0i64..2).prop_map(|(edited, secs)| Step::Ingest { edited, secs }),
        Just(Step::Sync),
    ];
    prop::collection::vec(step, 1..8)
}

fn faculty_csv(revisions: &[u32]) -> String {
    let mut s = String::from("Name,Initial,Designation,Room,Email\n");
    for (i, rev) in revisions.iter().enumerate() {
        s.push_str(&format!("Person {i},P{i:02},Lecturer rev {rev},R{i},p{i}@uni.edu\n"));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any interleaving of ingests and syncs, followed by one final sync,
    /// leaves exactly the documents rendered from the current rows.
    #[test]
    fn sync_converges(plan in steps()) {
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        rt.block_on(async {
            let provider = common::synonym_embedder();
            let rel = RelationalStore::open_in_memory().unwrap();
            let clock = ManualClock::new(Timestamp(1_000));
            let mut store = VectorStore::new(unirag::embed::EmbeddingProvider::fingerprint(provider.as_ref()));
            let mut cursor = IngestCursor::default();
            let params = ChunkParams::default();
            let mut revisions = vec![0u32; 8];
            rel.ingest_csv(faculty_csv(&revisions).as_bytes(), "faculty", &["Initial"], &clock).unwrap();

            for step in &plan {
                match step {
                    Step::Ingest { edited, secs } => {
                        for &i in edited {
                            revisions[i] += 1;
                        }
                        clock.advance(*secs);
                        rel.ingest_csv(faculty_csv(&revisions).as_bytes(), "faculty", &["Initial"], &clock).unwrap();
                    }
                    Step::Sync => {
                        sync(&rel, &mut store, provider.as_ref(), &mut cursor, params, &clock).await.unwrap();
                    }
                }
            }
            let last = sync(&rel, &mut store, provider.as_ref(), &mut cursor, params, &clock).await.unwrap();
            assert!(last.failed_tables.is_empty());

            let expected: BTreeSet<(String, String)> = rel
                .rows("faculty")
                .unwrap()
                .iter()
                .flat_map(|row| render_row(row, params, 0))
                .map(|d| (d.id, d.text))
                .collect();
            let ids: Vec<&str> = store.records().iter().map(|r| r.id.as_str()).collect();
            let unique: HashSet<&str> = ids.iter().copied().collect();
            assert_eq!(unique.len(), ids.len(), "duplicate vector ids");
            let actual: BTreeSet<(String, String)> =
                store.records().iter().map(|r| (r.id.clone(), r.document.clone())).collect();
            assert_eq!(actual, expected);

            let again = sync(&rel, &mut store, provider.as_ref(), &mut cursor, params, &clock).await.unwrap();
            assert_eq!(again.docs_embedded, 0);
        });
    }
}
