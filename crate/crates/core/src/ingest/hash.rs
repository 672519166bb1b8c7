use sha2::{Digest, Sha256};

/// SHA-256 of the UTF-8 bytes of `text`, lowercase hex.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Identifies one CSV upload: the raw bytes plus the key it was loaded with.
pub(crate) fn load_fingerprint(bytes: &[u8], natural_key: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(fields_hash(natural_key).as_bytes());
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Hash of an ordered list of fields. Each field is length-prefixed so that
/// `["ab", "c"]` and `["a", "bc"]` differ.
pub fn fields_hash<S: AsRef<str>>(fields: &[S]) -> String {
    let mut hasher = Sha256::new();
    for f in fields {
        let bytes = f.as_ref().as_bytes();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    hex::encode(hasher.finalize())
}
