//! Bearer-token verification.

use std::collections::HashMap;
use std::path::Path;

/// Maps a presented bearer token to a user id.
pub trait TokenVerifier: Send + Sync {
    fn verify(&self, token: &str) -> Option<String>;
}

/// Fixed token table, usually read from a file of `token user` lines.
/// Blank lines and lines starting with `#` are skipped.
#[derive(Debug, Clone, Default)]
pub struct StaticTokens {
    tokens: HashMap<String, String>,
}

impl StaticTokens {
    pub fn new(pairs: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>) -> Self {
        StaticTokens {
            tokens: pairs.into_iter().map(|(t, u)| (t.into(), u.into())).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut tokens = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(u), None) => {
                    tokens.insert(t.to_string(), u.to_string());
                }
                _ => return Err(format!("line {}: expected `token user`", n + 1)),
            }
        }
        Ok(StaticTokens { tokens })
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl TokenVerifier for StaticTokens {
    fn verify(&self, token: &str) -> Option<String> {
        self.tokens.get(token).cloned()
    }
}

/// Token from an `Authorization: Bearer …` header value.
pub fn bearer(header: &str) -> Option<&str> {
    let (scheme, token) = header.trim().split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim()).filter(|t| !t.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_file_lines() {
        let t = StaticTokens::parse("# users\nabc alice\n\n  def   bob  \n").unwrap();
        assert_eq!(t.verify("abc").as_deref(), Some("alice"));
        assert_eq!(t.verify("def").as_deref(), Some("bob"));
        assert_eq!(t.verify("alice"), None);
        assert!(StaticTokens::parse("lonely").is_err());
        assert!(StaticTokens::parse("a b c").is_err());
    }

    #[test]
    fn bearer_header() {
        assert_eq!(bearer("Bearer xyz"), Some("xyz"));
        assert_eq!(bearer("bearer  xyz "), Some("xyz"));
        assert_eq!(bearer("Basic xyz"), None);
        assert_eq!(bearer("Bearer "), None);
    }
}
