//! Prompt templates with `{{slot}}` interpolation.

use std::collections::BTreeMap;
use std::path::Path;

const BUILTIN: &[(&str, &str)] = &[
    ("formulate", include_str!("../templates/formulate.txt")),
    ("parent", include_str!("../templates/parent.txt")),
    ("phase_base", include_str!("../templates/phase_base.txt")),
    ("phase_expanded", include_str!("../templates/phase_expanded.txt")),
    ("phase_detailed_step1", include_str!("../templates/phase_detailed_step1.txt")),
    ("phase_detailed_step2", include_str!("../templates/phase_detailed_step2.txt")),
    ("evaluate", include_str!("../templates/evaluate.txt")),
    ("generate", include_str!("../templates/generate.txt")),
    ("generate_plain", include_str!("../templates/generate_plain.txt")),
    ("arbitrate", include_str!("../templates/arbitrate.txt")),
    ("annotate", include_str!("../templates/annotate.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template '{0}'")]
    Unknown(String),
    #[error("template '{template}' uses slot '{slot}' with no value")]
    MissingSlot { template: String, slot: String },
    #[error("template '{0}' has an unterminated slot")]
    Unterminated(String),
    #[error("reading template override {path}: {message}")]
    Io { path: String, message: String },
}

/// Named prompt templates, built in or overridden from a directory of `<name>.txt` files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    map: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Templates { map: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Self::default()
    }

    /// Built-in templates with any `<name>.txt` in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut t = Self::default();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io { path: path.display().to_string(), message: e.to_string() })?;
                t.map.insert(name.to_string(), text);
            }
        }
        Ok(t)
    }

    pub fn raw(&self, name: &str) -> Result<&str, TemplateError> {
        self.map.get(name).map(String::as_str).ok_or_else(|| TemplateError::Unknown(name.into()))
    }

    pub fn render(&self, name: &str, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
        let src = self.raw(name)?;
        let mut out = String::with_capacity(src.len() * 2);
        let mut rest = src;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated(name.into()))?;
            let slot = after[..end].trim();
            let value = slots
                .iter()
                .find(|(k, _)| *k == slot)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::MissingSlot { template: name.into(), slot: slot.into() })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}
