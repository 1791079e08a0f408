//! Prompt templates.
//!
//! A template file holds the system text, a line containing only `===`, then
//! the user text. Files without the separator are user text only.
//! Placeholders are written `{{name}}`; rendering fails on any placeholder
//! left without a value.

use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::seeds::sha256_hex;

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template {template}: no value for placeholder {{{{{name}}}}}")]
    Unbound { template: String, name: String },
    #[error("cannot read template {path}: {reason}")]
    Unreadable { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub system: String,
    pub user: String,
    /// Hex sha256 of the file contents.
    pub hash: String,
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*(\w+)\s*\}\}").expect("valid regex"))
}

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> PromptTemplate {
        let hash = sha256_hex(text);
        let mut system = String::new();
        let mut user = String::new();
        let mut seen_sep = false;
        for line in text.lines() {
            if !seen_sep && line.trim() == "===" {
                seen_sep = true;
                continue;
            }
            let target = if seen_sep { &mut user } else { &mut system };
            target.push_str(line);
            target.push('\n');
        }
        if !seen_sep {
            std::mem::swap(&mut system, &mut user);
        }
        PromptTemplate {
            name: name.to_string(),
            system: system.trim().to_string(),
            user: user.trim().to_string(),
            hash,
        }
    }

    pub fn load(path: &Path) -> Result<PromptTemplate, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Unreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("template");
        Ok(PromptTemplate::parse(name, &text))
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for part in [&self.system, &self.user] {
            for c in placeholder().captures_iter(part) {
                if !out.iter().any(|n| n == &c[1]) {
                    out.push(c[1].to_string());
                }
            }
        }
        out
    }

    fn fill(&self, text: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut missing = None;
        let out = placeholder().replace_all(text, |c: &regex::Captures| {
            match vars.iter().find(|(k, _)| *k == &c[1]) {
                Some((_, v)) => v.to_string(),
                None => {
                    missing.get_or_insert_with(|| c[1].to_string());
                    String::new()
                }
            }
        });
        match missing {
            Some(name) => Err(TemplateError::Unbound { template: self.name.clone(), name }),
            None => Ok(out.trim_end().to_string()),
        }
    }

    /// Renders `(system, user)`.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<(String, String), TemplateError> {
        Ok((self.fill(&self.system, vars)?, self.fill(&self.user, vars)?))
    }
}

const STANDARD: &str = include_str!("../data/templates/standard.txt");
const NARRATIVE: &str = include_str!("../data/templates/narrative.txt");
const ASSESSMENT: &str = include_str!("../data/templates/assessment.txt");
const ASSESSMENT_BASELINE: &str = include_str!("../data/templates/assessment_baseline.txt");
const STRICT_REMINDER: &str = include_str!("../data/templates/strict_reminder.txt");

/// All prompt templates the pipeline uses.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub standard: PromptTemplate,
    pub narrative: PromptTemplate,
    pub assessment: PromptTemplate,
    /// Assessment prompt without a persona, for baseline runs.
    pub assessment_baseline: PromptTemplate,
    pub strict_reminder: PromptTemplate,
}

impl TemplateSet {
    pub fn bundled() -> TemplateSet {
        TemplateSet {
            standard: PromptTemplate::parse("standard", STANDARD),
            narrative: PromptTemplate::parse("narrative", NARRATIVE),
            assessment: PromptTemplate::parse("assessment", ASSESSMENT),
            assessment_baseline: PromptTemplate::parse("assessment_baseline", ASSESSMENT_BASELINE),
            strict_reminder: PromptTemplate::parse("strict_reminder", STRICT_REMINDER),
        }
    }

    /// Bundled templates, overridden by any `<name>.txt` present in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<TemplateSet, TemplateError> {
        let mut set = TemplateSet::bundled();
        for (name, slot) in [
            ("standard", &mut set.standard),
            ("narrative", &mut set.narrative),
            ("assessment", &mut set.assessment),
            ("assessment_baseline", &mut set.assessment_baseline),
            ("strict_reminder", &mut set.strict_reminder),
        ] {
            let p = dir.join(format!("{name}.txt"));
            if p.exists() {
                *slot = PromptTemplate::load(&p)?;
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_and_render() {
        let t = PromptTemplate::parse("t", "sys {{a}}\n===\nuser {{b}} {{a}}\n");
        assert_eq!(t.placeholders(), vec!["a", "b"]);
        let (s, u) = t.render(&[("a", "1"), ("b", "2")]).unwrap();
        assert_eq!(s, "sys 1");
        assert_eq!(u, "user 2 1");
    }

    #[test]
    fn unbound_placeholder() {
        let t = PromptTemplate::parse("t", "x {{missing}}");
        assert_eq!(
            t.render(&[]),
            Err(TemplateError::Unbound { template: "t".into(), name: "missing".into() })
        );
    }

    #[test]
    fn user_only_file() {
        let t = PromptTemplate::parse("r", "only user");
        assert_eq!(t.system, "");
        assert_eq!(t.user, "only user");
    }

    #[test]
    fn bundled_templates_have_expected_placeholders() {
        let s = TemplateSet::bundled();
        assert_eq!(s.standard.placeholders(), vec!["demographics"]);
        assert_eq!(s.narrative.placeholders(), vec!["demographics", "min_words"]);
        assert_eq!(s.assessment.placeholders(), vec!["persona", "antialign", "items", "count"]);
        assert_eq!(s.assessment_baseline.placeholders(), vec!["antialign", "items", "count"]);
        assert_eq!(s.strict_reminder.placeholders(), vec!["count", "ids"]);
        assert_ne!(s.standard.hash, s.narrative.hash);
    }
}
