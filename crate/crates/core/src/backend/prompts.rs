//! Prompt templates for the HTTP backend.
//!
//! Wording is configurable: a prompt directory may supply `general.txt`,
//! `specific.txt`, and `synonyms.txt` to override the built-in defaults.
//! Placeholders are `{name}` tokens substituted verbatim.

use std::path::Path;

use super::BackendError;

pub const SYSTEM_PROMPT: &str = "You are an information-extraction service for a product \
knowledge graph. Reply with a single JSON value and nothing else: no prose, no code fences.";

const DEFAULT_GENERAL: &str = "Given a product, name the one sub-category it belongs to, one \
level more specific than its category path. Reuse a sub-category from the existing list when \
one fits; otherwise invent a concise new one (at most four words).\n\
Category path: {type_path}\n\
Product title: {title}\n\
Product description: {description}\n\
Existing sub-categories under this path: {current_tree}\n\
Reply with a JSON string containing only the sub-category name.";

const DEFAULT_SPECIFIC: &str = "Extract up to {max_words} short topics from the text below. \
Each topic is a word or short phrase naming a product attribute or user preference stated in \
the text. No duplicates.\n\
Source: product {source_kind}\n\
Text: {text}\n\
Reply with a JSON array of strings.";

const DEFAULT_SYNONYMS: &str = "Group the words below so that words with the same meaning \
share a group. Every input word must appear in exactly one group; a word with no synonyms \
forms its own group. Each word is listed with its usage frequency.\n\
Words:\n{words}\n\
Reply with a JSON array of arrays of strings.";

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub general: String,
    pub specific: String,
    pub synonyms: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            general: DEFAULT_GENERAL.to_string(),
            specific: DEFAULT_SPECIFIC.to_string(),
            synonyms: DEFAULT_SYNONYMS.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Load overrides from a directory; missing files keep the defaults.
    pub fn load_dir(dir: &Path) -> Result<Self, BackendError> {
        let mut templates = Self::default();
        for (file, slot) in [
            ("general.txt", &mut templates.general),
            ("specific.txt", &mut templates.specific),
            ("synonyms.txt", &mut templates.synonyms),
        ] {
            let path = dir.join(file);
            if path.is_file() {
                *slot = std::fs::read_to_string(&path)?;
            }
        }
        Ok(templates)
    }
}

/// Substitute `{key}` placeholders.
pub fn render(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_placeholders() {
        let out = render("a {x} b {y} c {x}", &[("x", "1".into()), ("y", "2".into())]);
        assert_eq!(out, "a 1 b 2 c 1");
    }

    #[test]
    fn load_dir_overrides_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("general.txt"), "custom {title}").unwrap();
        let t = PromptTemplates::load_dir(dir.path()).unwrap();
        assert_eq!(t.general, "custom {title}");
        assert_eq!(t.specific, PromptTemplates::default().specific);
    }
}
