use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CodError;
use crate::domain::NewsItem;

const PLAIN: &str = include_str!("../../prompts/plain.txt");
const DAN: &str = include_str!("../../prompts/dan.txt");

/// Prompt with `{headline}` and `{body}` placeholders.
///
/// Template files hold an optional preamble, a line containing only `---`,
/// then the template proper. Without a `---` line the whole file is the
/// template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
    pub system_preamble: Option<String>,
}

enum Piece<'a> {
    Literal(&'a str),
    Headline,
    Body,
}

fn pieces(text: &str) -> Result<Vec<Piece<'_>>, CodError> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let Some(len) = rest[open..].find('}') else { break };
        let name = &rest[open + 1..open + len];
        let is_ident = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !is_ident {
            out.push(Piece::Literal(&rest[..open + 1]));
            rest = &rest[open + 1..];
            continue;
        }
        out.push(Piece::Literal(&rest[..open]));
        out.push(match name {
            "headline" => Piece::Headline,
            "body" => Piece::Body,
            other => return Err(CodError::UnboundPlaceholder(other.to_string())),
        });
        rest = &rest[open + len + 1..];
    }
    out.push(Piece::Literal(rest));
    Ok(out)
}

impl PromptTemplate {
    pub fn new(name: &str, text: &str, system_preamble: Option<&str>) -> Result<Self, CodError> {
        pieces(text)?;
        Ok(PromptTemplate {
            name: name.to_string(),
            text: text.to_string(),
            system_preamble: system_preamble.map(str::to_string),
        })
    }

    pub fn parse(name: &str, file_text: &str) -> Result<Self, CodError> {
        let lines: Vec<&str> = file_text.split_inclusive('\n').collect();
        match lines.iter().position(|l| l.trim_end() == "---") {
            Some(at) => {
                let preamble: String = lines[..at].concat();
                let text: String = lines[at + 1..].concat();
                Self::new(name, &text, Some(preamble.trim_end()))
            }
            None => Self::new(name, file_text, None),
        }
    }

    /// `plain` or `dan`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "plain" => PLAIN,
            "dan" => DAN,
            _ => return None,
        };
        Some(Self::parse(name, text).expect("bundled templates are valid"))
    }

    /// A built-in name, or a path to a template file (named by its stem).
    pub fn resolve(spec: &str) -> Result<Self, CodError> {
        if let Some(t) = Self::builtin(spec) {
            return Ok(t);
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| CodError::Template(format!("{spec}: {e}")))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        Self::parse(&name, &text)
    }

    /// Literal substitution; inserted news text is never re-scanned.
    pub fn render(&self, item: &NewsItem) -> Result<String, CodError> {
        let mut out = String::new();
        if let Some(p) = &self.system_preamble {
            out.push_str(p);
            out.push_str("\n\n");
        }
        for piece in pieces(&self.text)? {
            match piece {
                Piece::Literal(s) => out.push_str(s),
                Piece::Headline => out.push_str(&item.headline),
                Piece::Body => out.push_str(&item.body),
            }
        }
        Ok(out)
    }
}
