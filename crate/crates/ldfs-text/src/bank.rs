//! Per-class attribute phrases with cached embeddings, and similarity
//! ranking of attributes against an image feature.

use std::fs;
use std::path::Path;

use ldfs_core::{cosine, UnitVector};
use serde::{Deserialize, Serialize};

use crate::encoder::CachedTextEncoder;
use crate::error::{Result, TextError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    OfflineFixture,
    ExternalService,
}

#[derive(Debug, Clone)]
pub struct AttributeEntry {
    pub phrase: String,
    pub embedding: UnitVector,
}

/// Attribute phrases per class. Loaded banks always carry at least one
/// attribute per class; the in-memory constructor also accepts empty lists,
/// which reduces instance-conditional directions to the plain-template
/// global direction.
#[derive(Debug, Clone)]
pub struct AttributeBank {
    classes: Vec<Vec<AttributeEntry>>,
    provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BankAttrRecord {
    pub phrase: String,
    pub key: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BankClassRecord {
    pub name: String,
    pub attributes: Vec<BankAttrRecord>,
}

/// Serialized attribute bank: one record per class, embeddings resolved
/// through a text cache by key.
#[derive(Debug, Serialize, Deserialize)]
pub struct BankFile {
    pub provenance: Provenance,
    pub classes: Vec<BankClassRecord>,
}

impl AttributeBank {
    pub fn new(classes: Vec<Vec<AttributeEntry>>, provenance: Provenance) -> Self {
        AttributeBank { classes, provenance }
    }

    /// Bank with no attributes for any class (global-direction baseline).
    pub fn empty(num_classes: usize) -> Self {
        AttributeBank {
            classes: vec![Vec::new(); num_classes],
            provenance: Provenance::OfflineFixture,
        }
    }

    /// Loads a bank file, aligning records to `class_names` and resolving
    /// embeddings through the text cache.
    pub fn load(path: &Path, class_names: &[String], cache: &CachedTextEncoder) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TextError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let file: BankFile = serde_json::from_str(&text).map_err(|e| TextError::Format {
            path: path.to_path_buf(),
            source: e,
        })?;

        let mut classes = Vec::with_capacity(class_names.len());
        for name in class_names {
            let record = file
                .classes
                .iter()
                .find(|c| &c.name == name)
                .ok_or_else(|| TextError::MissingBankClass { name: name.clone() })?;
            if record.attributes.is_empty() {
                return Err(TextError::EmptyBankClass { name: name.clone() });
            }
            let mut entries = Vec::with_capacity(record.attributes.len());
            for attr in &record.attributes {
                let embedding =
                    cache
                        .lookup_key(&attr.key)
                        .ok_or_else(|| TextError::MissingCacheKey {
                            phrase: attr.phrase.clone(),
                            key: attr.key.clone(),
                        })?;
                entries.push(AttributeEntry {
                    phrase: attr.phrase.clone(),
                    embedding,
                });
            }
            classes.push(entries);
        }
        Ok(AttributeBank {
            classes,
            provenance: file.provenance,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn attributes(&self, class_id: usize) -> Result<&[AttributeEntry]> {
        self.classes
            .get(class_id)
            .map(|v| v.as_slice())
            .ok_or(TextError::UnknownClass {
                class_id,
                classes: self.classes.len(),
            })
    }
}

/// Attributes of `class_id` sorted by descending cosine similarity to the
/// image feature; ties break by lexicographic phrase order. Returns at most
/// `top_k` entries, or all of them when the class has fewer.
pub fn rank_attributes<'a>(
    image_feature: &UnitVector,
    class_id: usize,
    bank: &'a AttributeBank,
    top_k: usize,
) -> Result<Vec<&'a str>> {
    let entries = bank.attributes(class_id)?;
    let mut scored: Vec<(&AttributeEntry, f64)> = entries
        .iter()
        .map(|e| {
            let score = cosine(image_feature, &e.embedding)?;
            Ok((e, score))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|(ea, sa), (eb, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ea.phrase.cmp(&eb.phrase))
    });
    Ok(scored
        .into_iter()
        .take(top_k)
        .map(|(e, _)| e.phrase.as_str())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ldfs_core::normalize;
    use ndarray::array;

    fn unit(x: f64, y: f64) -> UnitVector {
        normalize(array![x, y].view()).unwrap()
    }

    fn two_attr_bank() -> AttributeBank {
        AttributeBank::new(
            vec![vec![
                AttributeEntry {
                    phrase: "a".into(),
                    embedding: unit(1.0, 0.0),
                },
                AttributeEntry {
                    phrase: "b".into(),
                    embedding: unit(0.0, 1.0),
                },
            ]],
            Provenance::OfflineFixture,
        )
    }

    #[test]
    fn exact_match_attribute_wins() {
        let bank = two_attr_bank();
        let ranked = rank_attributes(&unit(1.0, 0.0), 0, &bank, 1).unwrap();
        assert_eq!(ranked, vec!["a"]);
    }

    #[test]
    fn ranking_follows_dot_product_oracle() {
        // image (0.6,0.8): cos to a = 0.6, to b = 0.8 -> [b, a]
        let bank = two_attr_bank();
        let ranked = rank_attributes(&unit(0.6, 0.8), 0, &bank, 2).unwrap();
        assert_eq!(ranked, vec!["b", "a"]);
    }

    #[test]
    fn equal_scores_break_lexicographically() {
        let bank = AttributeBank::new(
            vec![vec![
                AttributeEntry {
                    phrase: "zebra stripes".into(),
                    embedding: unit(0.6, 0.8),
                },
                AttributeEntry {
                    phrase: "antlers".into(),
                    embedding: unit(0.6, 0.8),
                },
            ]],
            Provenance::OfflineFixture,
        );
        let ranked = rank_attributes(&unit(1.0, 0.0), 0, &bank, 2).unwrap();
        assert_eq!(ranked, vec!["antlers", "zebra stripes"]);
    }

    #[test]
    fn top_k_beyond_len_returns_all() {
        let bank = two_attr_bank();
        let ranked = rank_attributes(&unit(1.0, 0.0), 0, &bank, 10).unwrap();
        assert_eq!(ranked.len(), 2);
    }

    #[test]
    fn unknown_class_errors() {
        let bank = two_attr_bank();
        assert!(matches!(
            rank_attributes(&unit(1.0, 0.0), 3, &bank, 1),
            Err(TextError::UnknownClass { class_id: 3, .. })
        ));
    }

    #[test]
    fn ranked_output_is_a_subset_of_the_bank() {
        let bank = two_attr_bank();
        let ranked = rank_attributes(&unit(0.3, 0.95), 0, &bank, 2).unwrap();
        for phrase in ranked {
            assert!(bank.attributes(0).unwrap().iter().any(|e| e.phrase == phrase));
        }
    }
}
