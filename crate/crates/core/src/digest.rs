use serde::Serialize;
use sha2::{Digest, Sha256};

/// Short hex digest of a configuration value's canonical TOML rendering.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let text = toml::to_string(value).expect("configuration types serialize to TOML");
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
