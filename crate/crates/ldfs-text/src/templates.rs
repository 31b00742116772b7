//! Description templates and instance-conditional description composition.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ldfs_core::UnitVector;
use serde::{Deserialize, Serialize};

use crate::encoder::TextEncoder;
use crate::error::{Result, TextError};

const CLASS_PLACEHOLDER: &str = "class";

/// Source and per-target-domain description templates. Each template holds
/// exactly one `{class}` placeholder.
#[derive(Debug, Clone)]
pub struct DescriptionTemplates {
    source: String,
    targets: BTreeMap<usize, String>,
}

/// Serialized template set, keyed by target domain name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateFile {
    pub source: String,
    pub targets: BTreeMap<String, String>,
}

impl TemplateFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TextError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| TextError::Format {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("template file serializes");
        fs::write(path, text).map_err(|e| TextError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Resolves target-domain names to ids and validates every template.
    pub fn resolve(&self, domain_names: &[String]) -> Result<DescriptionTemplates> {
        let mut targets = BTreeMap::new();
        for (name, template) in &self.targets {
            let id = domain_names
                .iter()
                .position(|d| d == name)
                .ok_or_else(|| TextError::MissingBankClass { name: name.clone() })?;
            targets.insert(id, template.clone());
        }
        DescriptionTemplates::new(self.source.clone(), targets)
    }
}

fn validate_template(template: &str) -> Result<()> {
    let mut class_count = 0;
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or_else(|| TextError::UnknownPlaceholder {
            template: template.to_string(),
            placeholder: after.to_string(),
        })?;
        let token = &after[..end];
        if token == CLASS_PLACEHOLDER {
            class_count += 1;
        } else {
            return Err(TextError::UnknownPlaceholder {
                template: template.to_string(),
                placeholder: token.to_string(),
            });
        }
        rest = &after[end + 1..];
    }
    if class_count != 1 {
        return Err(TextError::ClassPlaceholderCount {
            template: template.to_string(),
            found: class_count,
        });
    }
    Ok(())
}

fn expand(template: &str, class_name: &str) -> String {
    template.replace("{class}", class_name)
}

/// Appends an attribute to an expanded sentence: the sentence minus its
/// final period, a comma, the attribute, a period. Empty attributes leave
/// the sentence untouched.
pub fn attach_attribute(sentence: &str, attribute: &str) -> String {
    if attribute.is_empty() {
        return sentence.to_string();
    }
    let stem = sentence.strip_suffix('.').unwrap_or(sentence);
    format!("{stem}, {attribute}.")
}

impl DescriptionTemplates {
    pub fn new(source: String, targets: BTreeMap<usize, String>) -> Result<Self> {
        validate_template(&source)?;
        for template in targets.values() {
            validate_template(template)?;
        }
        Ok(DescriptionTemplates { source, targets })
    }

    pub fn source_template(&self) -> &str {
        &self.source
    }

    pub fn target_domains(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.keys().copied()
    }

    pub fn target_template(&self, domain: usize) -> Result<&str> {
        self.targets
            .get(&domain)
            .map(|s| s.as_str())
            .ok_or(TextError::MissingTargetTemplate { domain })
    }

    /// Source-domain description text for (class, attribute).
    pub fn source_text(&self, class_name: &str, attribute: &str) -> String {
        attach_attribute(&expand(&self.source, class_name), attribute)
    }

    /// Target-domain description text for (class, attribute, domain).
    pub fn target_text(&self, class_name: &str, attribute: &str, domain: usize) -> Result<String> {
        let template = self.target_template(domain)?;
        Ok(attach_attribute(&expand(template, class_name), attribute))
    }
}

/// Source/target description embeddings for one instance.
#[derive(Debug, Clone)]
pub struct InstanceDescriptionPair {
    pub t_source: UnitVector,
    pub t_target: UnitVector,
    pub target_domain: usize,
    pub attribute_used: String,
}

/// Composes the source and target description texts for one instance and
/// encodes both. An empty attribute yields the plain template pair (the
/// global-direction fallback).
pub fn compose_instance_descriptions(
    class_name: &str,
    attribute: &str,
    templates: &DescriptionTemplates,
    target_domain: usize,
    encoder: &dyn TextEncoder,
) -> Result<InstanceDescriptionPair> {
    let source_text = templates.source_text(class_name, attribute);
    let target_text = templates.target_text(class_name, attribute, target_domain)?;
    let t_source = encoder.encode(&source_text)?;
    let t_target = encoder.encode(&target_text)?;
    Ok(InstanceDescriptionPair {
        t_source,
        t_target,
        target_domain,
        attribute_used: attribute.to_string(),
    })
}
