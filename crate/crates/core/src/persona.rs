//! Personas and prompt templates for strong (per-annotator) and weak
//! (group) perspectivism.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Instance;
use crate::error::{Error, Result};

pub const DEFAULT_RESPONSE_MARKER: &str = "####Annotator:";
const PERSONA_SLOT: &str = "{persona}";
const TEXT_SLOT: &str = "{text}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Strong,
    Weak,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strong => "strong",
            Mode::Weak => "weak",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupTag {
    Target,
    Control,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    HsBrexit,
    Convabuse,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub persona_id: String,
    pub display_name: String,
    pub description: String,
    pub group_tag: GroupTag,
    pub mode: Mode,
}

const BUNDLED_PERSONAS: &[(&str, &str)] = &[
    ("hs_brexit_strong", include_str!("../data/personas/hs_brexit_strong.jsonl")),
    ("hs_brexit_weak", include_str!("../data/personas/hs_brexit_weak.jsonl")),
    ("convabuse_strong", include_str!("../data/personas/convabuse_strong.jsonl")),
    ("convabuse_weak", include_str!("../data/personas/convabuse_weak.jsonl")),
];

const BUNDLED_TEMPLATES: &[(&str, &str)] = &[
    ("hs_brexit_strong", include_str!("../data/templates/hs_brexit_strong.txt")),
    ("hs_brexit_weak", include_str!("../data/templates/hs_brexit_weak.txt")),
    ("convabuse_strong", include_str!("../data/templates/convabuse_strong.txt")),
    ("convabuse_weak", include_str!("../data/templates/convabuse_weak.txt")),
];

/// Names accepted by [`bundled_personas`] and [`bundled_template`].
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED_PERSONAS.iter().map(|(name, _)| *name)
}

pub fn bundled_personas(name: &str) -> Option<Vec<PersonaSpec>> {
    let (_, src) = BUNDLED_PERSONAS.iter().find(|(n, _)| *n == name)?;
    Some(parse_personas(src).expect("bundled persona file is valid"))
}

pub fn bundled_template(name: &str) -> Option<PromptTemplate> {
    let (_, src) = BUNDLED_TEMPLATES.iter().find(|(n, _)| *n == name)?;
    Some(PromptTemplate::parse(src).expect("bundled template is valid"))
}

pub fn load_personas(path: impl AsRef<Path>) -> Result<Vec<PersonaSpec>> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_personas(&src)
}

/// Parse a persona JSONL file.
pub fn parse_personas(src: &str) -> Result<Vec<PersonaSpec>> {
    let mut personas = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let persona: PersonaSpec = serde_json::from_str(line)
            .map_err(|e| Error::Schema(format!("persona line {}: {e}", idx + 1)))?;
        if persona.persona_id.is_empty() {
            return Err(Error::Schema(format!("persona line {}: empty persona_id", idx + 1)));
        }
        if persona.description.trim().is_empty() {
            return Err(Error::Schema(format!("persona {}: empty description", persona.persona_id)));
        }
        if !seen.insert(persona.persona_id.clone()) {
            return Err(Error::DuplicateId(format!("persona {}", persona.persona_id)));
        }
        personas.push(persona);
    }
    if personas.is_empty() {
        return Err(Error::Schema("persona file is empty".into()));
    }
    if let Some(p) = personas.iter().find(|p| p.mode != personas[0].mode) {
        return Err(Error::Schema(format!("persona {} has mode {}, set is {}", p.persona_id, p.mode, personas[0].mode)));
    }
    Ok(personas)
}

/// Prompt scaffold with exactly one `{persona}` and one `{text}` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    mode: Mode,
    task: Task,
    body: String,
    response_marker: String,
}

impl PromptTemplate {
    pub fn new(mode: Mode, task: Task, body: impl Into<String>, response_marker: impl Into<String>) -> Result<Self> {
        let body = body.into();
        let response_marker = response_marker.into();
        if response_marker.is_empty() {
            return Err(Error::Schema("response_marker must not be empty".into()));
        }
        for slot in [PERSONA_SLOT, TEXT_SLOT] {
            let count = body.matches(slot).count();
            if count != 1 {
                return Err(Error::Placeholder(format!("{slot} appears {count} times; expected exactly once")));
            }
        }
        if let Some(unknown) = find_unknown_placeholder(&body) {
            return Err(Error::Placeholder(format!("unresolved placeholder {unknown}")));
        }
        Ok(Self { mode, task, body, response_marker })
    }

    /// Parse the template file format: `key: value` header lines, a `---`
    /// separator line, then the body.
    pub fn parse(src: &str) -> Result<Self> {
        let mut mode = None;
        let mut task = Task::Custom;
        let mut marker = DEFAULT_RESPONSE_MARKER.to_string();
        let mut lines = src.lines();
        let mut saw_separator = false;
        for line in lines.by_ref() {
            if line.trim() == "---" {
                saw_separator = true;
                break;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| Error::Schema(format!("bad template header line {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "mode" => {
                    mode = Some(serde_json::from_value(value.into()).map_err(|_| Error::Schema(format!("unknown mode {value:?}")))?)
                }
                "task" => {
                    task = serde_json::from_value(value.into()).map_err(|_| Error::Schema(format!("unknown task {value:?}")))?
                }
                "response_marker" => marker = value.to_string(),
                other => return Err(Error::Schema(format!("unknown template header key {other:?}"))),
            }
        }
        if !saw_separator {
            return Err(Error::Schema("template header must end with a `---` line".into()));
        }
        let mode = mode.ok_or_else(|| Error::Schema("template header is missing `mode`".into()))?;
        let body = lines.collect::<Vec<_>>().join("\n");
        Self::new(mode, task, body, marker)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn response_marker(&self) -> &str {
        &self.response_marker
    }

    /// Variant of an HS-Brexit template that asks about hate towards
    /// `target` instead of towards Brexit.
    pub fn with_hate_target(&self, target: &str) -> Result<Self> {
        const ORIGINAL: &str = "hate towards Brexit";
        if !self.body.contains(ORIGINAL) {
            return Err(Error::InvalidArgument("template has no hate target to substitute".into()));
        }
        let body = self.body.replace(ORIGINAL, &format!("hate towards {target}"));
        Self::new(self.mode, self.task, body, self.response_marker.clone())
    }
}

fn find_unknown_placeholder(body: &str) -> Option<String> {
    let mut rest = body;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        if let Some(end) = after.find('}') {
            let name = &after[..end];
            let is_ident = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if is_ident && name != "persona" && name != "text" {
                return Some(format!("{{{name}}}"));
            }
        }
        rest = after;
    }
    None
}

/// Substitute the persona description and the instance text into the
/// template. Slots are filled by position, so braces inside the
/// substituted values are never re-expanded.
pub fn render_prompt(template: &PromptTemplate, persona: &PersonaSpec, instance: &Instance) -> Result<String> {
    if persona.mode != template.mode {
        return Err(Error::ModeMismatch { persona: persona.mode.to_string(), template: template.mode.to_string() });
    }
    let body = &template.body;
    let persona_at = body.find(PERSONA_SLOT).ok_or_else(|| Error::Placeholder("missing {persona}".into()))?;
    let text_at = body.find(TEXT_SLOT).ok_or_else(|| Error::Placeholder("missing {text}".into()))?;
    let mut slots = [(persona_at, PERSONA_SLOT, persona.description.as_str()), (text_at, TEXT_SLOT, instance.text.as_str())];
    slots.sort_by_key(|s| s.0);
    let mut out = String::with_capacity(body.len() + persona.description.len() + instance.text.len());
    let mut cursor = 0;
    for (at, slot, value) in slots {
        out.push_str(&body[cursor..at]);
        out.push_str(value);
        cursor = at + slot.len();
    }
    out.push_str(&body[cursor..]);
    Ok(out)
}
