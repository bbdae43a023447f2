//! Canonical relation vocabulary and description templates.
//!
//! The triplet-generation prompt constrains relations to an 18-name
//! vocabulary; each name carries a one-sentence description template with
//! `{A}` (head) and `{B}` (tail) placeholders. Rendered descriptions feed
//! the alignment block and the reviewer backends.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::kg::Triplet;

/// The 18 canonical relation names, in vocabulary order.
pub const CANONICAL_RELATIONS: [&str; 18] = [
    "protein_protein",
    "carrier",
    "enzyme",
    "target",
    "transporter",
    "contraindication",
    "indication",
    "off-label use",
    "synergistic interaction",
    "associated with",
    "parent-child",
    "phenotype absent",
    "phenotype present",
    "side effect",
    "interacts with",
    "linked to",
    "expression present",
    "expression absent",
];

/// Bundled description templates, one per canonical relation. A placeholder
/// may appear more than once; rendering replaces every occurrence.
const TEMPLATES: [(&str, &str); 18] = [
    (
        "protein_protein",
        "Protein {A} interacts with protein {B}, indicating that the two proteins directly or indirectly associate with each other to perform a biological function.",
    ),
    (
        "carrier",
        "{A} acts as a carrier for {B}, facilitating its transport or delivery to specific locations within the body or within a cell",
    ),
    (
        "enzyme",
        "{A} functions as an enzyme that catalyzes a reaction involving {B}, converting it into a different molecule or modifying its structure",
    ),
    (
        "target",
        "{A} serves as a target for {B}, meaning that {B} binds to or interacts with {A} to exert its biological effect.",
    ),
    (
        "transporter",
        "{A} is a transporter that facilitates the movement of {B} across cellular membranes or within different compartments of the body.",
    ),
    (
        "contraindication",
        "The interaction between {A} and {B} is contraindicated, meaning that the presence of one molecule may have adverse effects or reduce the efficacy of the other",
    ),
    (
        "indication",
        "{A} is indicated for the treatment or management of a condition associated with {B}, suggesting that {A} has a therapeutic role related to {B}",
    ),
    (
        "off-label use",
        "{A} is used off-label in relation to {B}, meaning it is utilized in a manner not specifically approved but based on clinical judgment.",
    ),
    (
        "synergistic interaction",
        "{A} and {B} interact synergistically, where their combined effect is greater than the sum of their individual effects",
    ),
    (
        "associated with",
        "{A} is associated with {B}, indicating a relationship or correlation between the two, often in the context of disease or biological processes",
    ),
    (
        "parent-child",
        "{A} is related to {B} in a parent-child relationship, where {A} gives rise to or influences the formation of {B}",
    ),
    (
        "phenotype absent",
        "The interaction between {A} and {B} results in the absence of a specific phenotype, indicating that the normal trait is not expressed",
    ),
    (
        "phenotype present",
        "The interaction between {A} and {B} results in the presence of a specific phenotype, indicating that a particular trait is expressed",
    ),
    (
        "side effect",
        "The interaction between {A} and {B} can cause a side effect, where the presence of one molecule leads to unintended and possibly adverse effects",
    ),
    (
        "interacts with",
        "{A} interacts with {B}, indicating a general interaction that may involve binding, modulation, or other forms of molecular communication.",
    ),
    (
        "linked to",
        "{A} is linked to {B}, suggesting a connection or association between the two molecules, often in a biological or pathological context.",
    ),
    (
        "expression present",
        "{A} is expressed in the presence of {B}, indicating that the existence or activity of {B} leads to or correlates with the expression of {A}",
    ),
    (
        "expression absent",
        "{A} is not expressed in the presence of {B}, indicating that the existence or activity of {B} suppresses or does not correlate with the expression of {A}",
    ),
];

/// True for exact canonical relation names.
pub fn is_canonical(name: &str) -> bool {
    CANONICAL_RELATIONS.contains(&name)
}

/// Bundled template for a canonical relation name.
pub fn template_for(name: &str) -> Option<&'static str> {
    TEMPLATES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, tpl)| *tpl)
}

/// Errors from dictionary construction and rendering.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DescriptionError {
    #[error("no description template for relation '{0}'")]
    UnknownRelation(String),
    #[error("template for '{relation}' is missing placeholder {placeholder}")]
    MissingPlaceholder {
        relation: String,
        placeholder: &'static str,
    },
    #[error("line {line}: malformed dictionary row: {reason}")]
    MalformedRow { line: usize, reason: String },
}

/// Relation name -> description template map.
///
/// The default dictionary covers the full canonical vocabulary; extra
/// relations can be added from a `relation<TAB>template` text block.
#[derive(Debug, Clone)]
pub struct DescriptionDictionary {
    templates: BTreeMap<String, String>,
}

impl Default for DescriptionDictionary {
    fn default() -> Self {
        let templates = TEMPLATES
            .iter()
            .map(|(n, t)| (n.to_string(), t.to_string()))
            .collect();
        DescriptionDictionary { templates }
    }
}

impl DescriptionDictionary {
    /// Empty dictionary, for fully custom vocabularies.
    pub fn empty() -> Self {
        DescriptionDictionary {
            templates: BTreeMap::new(),
        }
    }

    /// Parse `relation<TAB>template` lines on top of the bundled defaults.
    /// Later rows override earlier ones and the defaults.
    pub fn parse(text: &str) -> Result<Self, DescriptionError> {
        let mut dict = Self::default();
        dict.merge_text(text)?;
        Ok(dict)
    }

    /// Add rows from `relation<TAB>template` text.
    pub fn merge_text(&mut self, text: &str) -> Result<(), DescriptionError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim_end();
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(2, '\t');
            let name = parts.next().unwrap_or("").trim();
            let template = parts.next().unwrap_or("").trim();
            if name.is_empty() || template.is_empty() {
                return Err(DescriptionError::MalformedRow {
                    line,
                    reason: "expected `relation<TAB>template`".to_string(),
                });
            }
            self.insert(name, template)?;
        }
        Ok(())
    }

    /// Insert a template, validating that both placeholders appear.
    pub fn insert(&mut self, relation: &str, template: &str) -> Result<(), DescriptionError> {
        for placeholder in ["{A}", "{B}"] {
            if !template.contains(placeholder) {
                return Err(DescriptionError::MissingPlaceholder {
                    relation: relation.to_string(),
                    placeholder: if placeholder == "{A}" { "{A}" } else { "{B}" },
                });
            }
        }
        self.templates
            .insert(relation.to_string(), template.to_string());
        Ok(())
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.templates.contains_key(relation)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Render the description for a triplet: `{A}` takes the head surface,
    /// `{B}` the tail surface, every occurrence replaced.
    pub fn render(&self, t: &Triplet) -> Result<String, DescriptionError> {
        let template = self
            .templates
            .get(&t.relation)
            .ok_or_else(|| DescriptionError::UnknownRelation(t.relation.clone()))?;
        Ok(template.replace("{A}", &t.head).replace("{B}", &t.tail))
    }

    /// `(relation, template)` rows in name order, for serialization.
    pub fn entries(&self) -> Vec<(&str, &str)> {
        self.templates
            .iter()
            .map(|(n, t)| (n.as_str(), t.as_str()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_has_18_unique_names_with_templates() {
        assert_eq!(CANONICAL_RELATIONS.len(), 18);
        let unique: alloc::collections::BTreeSet<&str> =
            CANONICAL_RELATIONS.iter().copied().collect();
        assert_eq!(unique.len(), 18);
        for name in CANONICAL_RELATIONS {
            let tpl = template_for(name).expect("template exists");
            assert!(tpl.contains("{A}") && tpl.contains("{B}"), "{name}");
        }
    }

    #[test]
    fn render_protein_protein_example() {
        let dict = DescriptionDictionary::default();
        let out = dict
            .render(&Triplet::new("PHYHIP", "protein_protein", "KIF15"))
            .unwrap();
        assert_eq!(
            out,
            "Protein PHYHIP interacts with protein KIF15, indicating that the two proteins \
             directly or indirectly associate with each other to perform a biological function."
        );
    }

    #[test]
    fn render_carrier_example() {
        let dict = DescriptionDictionary::default();
        let out = dict.render(&Triplet::new("X", "carrier", "Y")).unwrap();
        assert!(out.starts_with("X acts as a carrier for Y,"));
    }

    #[test]
    fn render_replaces_repeated_placeholders() {
        let dict = DescriptionDictionary::default();
        let out = dict.render(&Triplet::new("H", "target", "T")).unwrap();
        assert!(!out.contains("{A}") && !out.contains("{B}"));
        assert!(out.matches('T').count() >= 2);
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let dict = DescriptionDictionary::default();
        let err = dict
            .render(&Triplet::new("A", "frobnicates", "B"))
            .unwrap_err();
        assert!(matches!(err, DescriptionError::UnknownRelation(_)));
    }

    #[test]
    fn insert_validates_placeholders() {
        let mut dict = DescriptionDictionary::empty();
        let err = dict.insert("half", "only {A} appears").unwrap_err();
        assert!(matches!(err, DescriptionError::MissingPlaceholder { .. }));
    }

    #[test]
    fn parse_overrides_defaults() {
        let dict = DescriptionDictionary::parse("carrier\t{A} ferries {B}\n").unwrap();
        let out = dict.render(&Triplet::new("X", "carrier", "Y")).unwrap();
        assert_eq!(out, "X ferries Y");
        assert!(dict.contains("protein_protein"));
    }
}
