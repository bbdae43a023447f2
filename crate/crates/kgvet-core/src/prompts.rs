//! Prompt templates for every model action, plus their render helpers.
//!
//! The wording below is load-bearing: scripted transcripts and cached
//! replies are keyed on the exact rendered bytes, so any edit here
//! invalidates recorded scripts. Placeholders use `{name}` markers and are
//! replaced literally; the braces that belong to embedded JSON examples are
//! left alone because replacement only matches whole markers.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::kg::Triplet;

/// Stable template names used to route and script gateway calls.
pub mod template {
    /// Medical concept extraction from a question stem.
    pub const CONCEPTS: &str = "extract_concepts";
    /// Triplet generation for one answer candidate (or the bare stem).
    pub const GENERATE: &str = "generate_triplets";
    /// True/False review of a single triplet.
    pub const REVIEW: &str = "review_triplet";
    /// Revision of a rejected triplet.
    pub const REVISE: &str = "revise_triplet";
    /// Matching a free-form answer back onto labeled options.
    pub const MATCH: &str = "match_answer";
    /// Final multiple-choice answer selection.
    pub const ANSWER: &str = "answer_multi_choice";
}

/// Reply payload key for extracted concepts.
pub const CONCEPTS_KEY: &str = "medical_terminologies";
/// Reply payload key for generated triplets.
pub const TRIPLETS_KEY: &str = "Triplets";
/// Reply payload key for revised triplets.
pub const REVISED_KEY: &str = "Revised_Triplets";

const CONCEPTS_TEMPLATE: &str = "### Instruction:\n\nGiven the following multiple-choice question, extract all relevant medical entities contained within the question stem. Identify and extract all medical entities, such as diseases, proteins, genes, drugs, phenotypes, anatomical regions, treatments, or other relevant medical entities. Ensure that the extracted entities are specific and medically relevant. If no medical entities are found in a particular part, return an empty list for that section. Only return the extracted entities in JSON format with the key \"medical_terminologies\" and the value is a list of extracted entities.\n\n### Input:\n\nQuestion: {question}\n\n### Response:";

const GENERATE_TEMPLATE: &str = "### Instruction:\n\nGiven the following question stem, medical terminologies, and options, generate a set of related undirected triplets. Each triplet should consist of a head entity, a relation, and a tail entity. The relations should describe meaningful interactions or associations between the entities, particularly in a medical or biomedical context. Use the question stem and the medical entities contained each option to extract triplets that are relevant to the query and can answer the query correctly. Each triplet should be in the format: (Head Entity, Relationship, Tail Entity). Since the triplets are undirected, the order of Head Entity and Tail Entity does not imply any directional relationship between them. The relationship should be one of the following: ['protein_protein', 'carrier', 'enzyme', 'target', 'transporter', 'contraindication', 'indication', 'off-label use', 'synergistic interaction', 'associated with', 'parent-child', 'phenotype absent', 'phenotype present', 'side effect', 'interacts with', 'linked to', 'expression present', 'expression absent']. Ensure that each entity in the triplet is specific and concise, such as diseases, proteins, conditions, symptoms, drugs, treatments, anatomical parts, or other relevant medical entities.\n\nGenerate 1-3 triplets for each option, focusing on the ones most relevant to answering the query.\n\nOnly return the generated triplets in a structured JSON format with the key as \"Triplets\" and the value as a list of triplets. The format should be:\n{\n    \"Triplets\": [(Head Entity, Relationship, Tail Entity), (Head Entity, Relationship, Tail Entity)]\n}\n\n### Input:\n\nQuestion: {query_stem}\n\nMedical_Terminologies: {medical terminologies}\n\nOptions: {option}\n\n### Response:";

const REVIEW_TEMPLATE: &str = "Below is an instruction that describes a task, paired with an input that provides further context. Write a response that appropriately completes the request.\n\n### Instruction:\n\nGiven a triple from a knowledge graph. Each triple consists of a head entity, a relation, and a tail entity. Taking (PHYHIP, protein_protein, KIF15) as an example, it means that protein PHYHIP has an interaction with protein KIF15. Please determine the correctness of the triple and response True or False. Please directly output 'True' or 'False'.\n\n### Input:\n\n{triplet}\n\n### Response:";

const REVISE_TEMPLATE: &str = "### Instruction:\n\nGiven the following triplet consisting of a head entity, relation, and tail entity, please review and revise the triplet to ensure it is correct and helpful for answering given question. The revision should focus on correcting the head entity, relation, or tail entity as needed to make the triplet accurate and relevant. The triplet should follow the format (head entity, relation, tail entity). Ensure that the revised triplet is factually accurate and contextually appropriate. The relation should clearly define the relationship between the head entity and the tail entity. If no changes are necessary, return the original triplet.\n\nOnly return the revised triplet in JSON format with the key 'Revised_Triplets' and the value as the corrected triplet. The format should be:\n{\n    \"Revised_Triplets\": [(Head Entity, Relationship, Tail Entity)]\n}\n\n### Input:\n\nTriplets: {triplets}\n\nQuestions: {query}\n\n### Response:";

const MATCH_TEMPLATE: &str = "Given a context, please select the most match answer from options by using 'A', 'B', 'C', and 'D'.\n\nContext: {context}\n\nOptions: {options}\n\nAnswer:";

const ANSWER_TEMPLATE: &str = "The following is a multiple-choice medical question. Please select and provide the correct answer from options 'A', 'B', 'C' or 'D'.\n\nQuestion: {question}\n\nAnswer:";

/// Concept extraction over a question stem.
pub fn concepts(question: &str) -> String {
    CONCEPTS_TEMPLATE.replace("{question}", question)
}

/// Triplet generation for one answer candidate. For questions whose
/// candidates carry no content, pass an empty `option` and call once.
pub fn generate(stem: &str, terminologies: &[String], option: &str) -> String {
    GENERATE_TEMPLATE
        .replace("{query_stem}", stem)
        .replace("{medical terminologies}", &terminologies.join(", "))
        .replace("{option}", option)
}

/// True/False review of one triplet, rendered in tuple form.
pub fn review(triplet: &Triplet) -> String {
    REVIEW_TEMPLATE.replace("{triplet}", &triplet.to_string())
}

/// Revision request for a rejected triplet in the context of its question.
pub fn revise(triplet: &Triplet, question: &str) -> String {
    REVISE_TEMPLATE
        .replace("{triplets}", &triplet.to_string())
        .replace("{query}", question)
}

/// Match a free-form answer back onto the labeled options.
pub fn match_answer(context: &str, options: &BTreeMap<String, String>) -> String {
    MATCH_TEMPLATE
        .replace("{context}", context)
        .replace("{options}", &format_options(options))
}

/// Final answer selection over a fully rendered question block.
pub fn answer(question_block: &str) -> String {
    ANSWER_TEMPLATE.replace("{question}", question_block)
}

/// Render options as one `label. content` line each, in label order.
pub fn format_options(options: &BTreeMap<String, String>) -> String {
    let lines: Vec<String> = options
        .iter()
        .map(|(label, content)| {
            let mut line = label.clone();
            line.push_str(". ");
            line.push_str(content);
            line
        })
        .collect();
    lines.join("\n")
}

/// Compose the question block for the final answer call: the stem, the
/// facts that survived review (one per line), and the labeled options.
/// An empty fact list is stated outright rather than silently omitted, so
/// the model knows it is answering unassisted.
pub fn answer_block(
    stem: &str,
    fact_lines: &[String],
    options: &BTreeMap<String, String>,
) -> String {
    let mut block = String::from(stem);
    if fact_lines.is_empty() {
        block.push_str("\n\nNo verified facts were found for this question.");
    } else {
        block.push_str("\n\nKnown facts:\n");
        for line in fact_lines {
            block.push_str("- ");
            block.push_str(line);
            block.push('\n');
        }
    }
    block.push_str("\n\n");
    block.push_str(&format_options(options));
    block
}
