// Copyright 2026 The semtag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "semtag/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "semtag/error.hpp"

namespace semtag {

namespace {

constexpr std::string_view kArchitectInit = R"PROMPT(You are an expert taxonomy architect. Your task is to create a set of fine-grained sub-categories.
The items you are categorizing all belong to the parent category: "{parent_rule_description}".

Your new categories MUST be more specific subdivisions of this parent category. Do not simply repeat the parent category's name. For example, if the parent is "Firearm Accessories", your sub-categories should be "Optics", "Holsters", "Cleaning Kits", etc., not "Firearm Accessories" again.

Primary Goal: Create a set of ~{n_target_rules} mutually exclusive sub-categories that logically partition the parent.

{context_prompt}
Input Data:
Below are diverse product examples. Use them to understand the product landscape you need to partition.
{sample_text}

Task & Strict Output Format:
Devise a set of categories. For each, provide a "name" and a "description" with "INCLUDES" and "EXCLUDES" clauses. Respond ONLY with a single JSON object: {"categories": [{...}]}.

Your JSON Response:)PROMPT";

constexpr std::string_view kAnnotatorPropose = R"PROMPT({context_prompt}
Above, I have provided the parent category and some product examples.

Your Goal:
Propose a list of exactly {n_target_rules} sub-categories.

Constraint - Overlap:
Sub-categories must be mutually exclusive.

Constraint - Coverage:
Together, they should cover most common items found in "{parent_rule_description}".

Constraint - Specificity:
Do NOT create a "Miscellaneous" or "Other" category. Every category must have a specific, meaningful name.

Constraint - Style:
Use professional, industry-standard terminology.

Output Format:
Your response must be a JSON object with the following structure:
{
  "categories": [
    {
      "name": "Category Name",
      "description": "Definition of what is included",
      "includes": ["Example 1", "Example 2"],
      "excludes": ["Non-example 1"]
    }
  ]
})PROMPT";

constexpr std::string_view kAnnotatorErrorFeedback = R"PROMPT(You are a data analyst specializing in taxonomy quality control. Analyze a cluster of {len(ticket_cluster)} uncategorized products and synthesize a single, structured change proposal.

Existing Category Rules:
{existing_rules_text}

Analysis of Uncategorized Items:
{ticket_examples_text}

Task: Decide the most logical action and formulate a proposal. Respond ONLY with a single JSON object. Your response MUST strictly follow one of the formats below.

1. To create a new category:
{"change_type": "CREATE_NEW_CATEGORY", "problem_summary": "<summary>", "suggested_change": {"new_rule_description": "New Category Name: INCLUDES: ... EXCLUDES: ..."}}

2. To expand an existing category (THIS IS A VERY STRICT FORMAT):
The "refined_description" MUST be a single complete string, starting with a name, then "INCLUDES", then "EXCLUDES".
GOOD EXAMPLE:
{
  "change_type": "EXPAND_EXISTING_CATEGORY",
  "problem_summary": "The current 'Outdoor Gear' rule is too generic and should explicitly include tactical accessories.",
  "suggested_change": {
    "rule_id_to_refine": "rule_a4368cef",
    "refined_description": "Outdoor & Tactical Gear: INCLUDES: Tents, backpacks, sleeping bags, and tactical accessories like gloves, belts, and pouches. EXCLUDES: Specialized sporting equipment, firearms, and knives."
  }
}

3. To ignore outliers:
{"change_type": "IGNORE_AS_OUTLIERS", "problem_summary": "<summary>", "suggested_change": {"reason": "<reason>"}}

Your JSON Response:)PROMPT";

constexpr std::string_view kArchitectReview = R"PROMPT(You are a senior taxonomy manager. Review the following change proposals and decide whether to approve or reject each. Your goal is a clean, non-overlapping taxonomy. But if the proposal is reasonable, you should try to accomodate that. You should also reject proposals that are out-of-place by common sense. Respond ONLY with a JSON list of objects, each with "proposal_id", "decision" ('APPROVED' or 'REJECTED'), and "reasoning".

Proposals for Review:
{proposals_text}

Your JSON Decision List:)PROMPT";

constexpr std::string_view kAssignItem = R"PROMPT(You are a product annotator. The product below belongs to the parent category "{parent_rule_description}". Decide which of the candidate category rules apply to it. A product may match more than one rule.

Candidate Category Rules:
{rules_text}

Product:
{item_text}

Respond ONLY with a single JSON object: {"rule_ids": ["rule_..."], "reason": "<required when no rule applies: describe what kind of product this is and why no rule fits>"}.

Your JSON Response:)PROMPT";

constexpr std::string_view kAssignLevel = R"PROMPT(You are a product annotator. The product below belongs to the category "{parent_rule_description}". Select the single best-fitting sub-category for it. If none of the sub-categories fit, answer STOP.

Candidate Sub-categories:
{rules_text}

Product:
{item_text}

Respond ONLY with a single JSON object: {"rule_id": "<one rule_id from the list, or STOP>"}.

Your JSON Response:)PROMPT";

constexpr std::string_view kAssignOneShot = R"PROMPT(You are a product annotator. Below is a hierarchical category vocabulary; each rule lists its parent. Select the single best-fitting rule at each level, starting from the top level and descending through children of the previous choice. Stop when no child fits.

Vocabulary:
{vocabulary_text}

Product:
{item_text}

Respond ONLY with a single JSON object: {"path": ["<level-1 rule_id>", "<level-2 rule_id>", ...]}.

Your JSON Response:)PROMPT";

constexpr std::string_view kFreeformTag = R"PROMPT(You are a product tagger. Generate exactly {n_tags} short descriptive keywords for the product below.

Product:
{item_text}

Respond ONLY with a single JSON object: {"tags": ["keyword", ...]}.

Your JSON Response:)PROMPT";

constexpr std::string_view kUserSimulator = R"PROMPT(You are a shopper. This is the product you want to interact with next:
{target_text}

The recommender organizes products into these top-level categories:
{level1_names}

Select all potentially relevant top-level categories for the product you want. Use the category names exactly as listed. Respond ONLY with a single JSON object: {"selected": ["Category Name", ...]}.

Your JSON Response:)PROMPT";

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Returns the slot name if text[pos] opens a `{name}` or `{fn(name)}` marker.
std::optional<std::string_view> slot_at(std::string_view text, std::size_t pos, std::size_t& end) {
    if (text[pos] != '{' || pos + 1 >= text.size() || !ident_start(text[pos + 1])) return std::nullopt;
    std::size_t i = pos + 1;
    while (i < text.size() && ident_char(text[i])) ++i;
    if (i < text.size() && text[i] == '(') {
        ++i;
        if (i >= text.size() || !ident_start(text[i])) return std::nullopt;
        while (i < text.size() && ident_char(text[i])) ++i;
        if (i >= text.size() || text[i] != ')') return std::nullopt;
        ++i;
    }
    if (i >= text.size() || text[i] != '}') return std::nullopt;
    end = i + 1;
    return text.substr(pos + 1, i - pos - 1);
}

}  // namespace

std::string_view role_name(AgentRole role) noexcept {
    return role == AgentRole::Architect ? "architect" : "annotator";
}

AgentRole role_from_name(std::string_view name) {
    if (name == "architect") return AgentRole::Architect;
    if (name == "annotator") return AgentRole::Annotator;
    throw Error(ErrorCode::InvalidArgument, "unknown agent role '" + std::string(name) + "'");
}

std::string_view template_name(TemplateId id) noexcept {
    switch (id) {
        case TemplateId::ArchitectInit: return "ArchitectInit";
        case TemplateId::AnnotatorPropose: return "AnnotatorPropose";
        case TemplateId::AnnotatorErrorFeedback: return "AnnotatorErrorFeedback";
        case TemplateId::ArchitectReview: return "ArchitectReview";
        case TemplateId::AssignItem: return "AssignItem";
        case TemplateId::AssignLevel: return "AssignLevel";
        case TemplateId::AssignOneShot: return "AssignOneShot";
        case TemplateId::FreeformTag: return "FreeformTag";
        case TemplateId::UserSimulator: return "UserSimulator";
    }
    return "";
}

TemplateId template_from_name(std::string_view name) {
    for (auto id : kAllTemplates) {
        if (template_name(id) == name) return id;
    }
    throw Error(ErrorCode::UnknownTemplate, "unknown template_id '" + std::string(name) + "'");
}

std::string_view template_text(TemplateId id) noexcept {
    switch (id) {
        case TemplateId::ArchitectInit: return kArchitectInit;
        case TemplateId::AnnotatorPropose: return kAnnotatorPropose;
        case TemplateId::AnnotatorErrorFeedback: return kAnnotatorErrorFeedback;
        case TemplateId::ArchitectReview: return kArchitectReview;
        case TemplateId::AssignItem: return kAssignItem;
        case TemplateId::AssignLevel: return kAssignLevel;
        case TemplateId::AssignOneShot: return kAssignOneShot;
        case TemplateId::FreeformTag: return kFreeformTag;
        case TemplateId::UserSimulator: return kUserSimulator;
    }
    return "";
}

std::vector<std::string> template_slots(TemplateId id) {
    const std::string_view text = template_text(id);
    std::vector<std::string> slots;
    for (std::size_t i = 0; i < text.size(); ++i) {
        std::size_t end = 0;
        if (auto s = slot_at(text, i, end)) {
            if (std::find(slots.begin(), slots.end(), *s) == slots.end()) slots.emplace_back(*s);
            i = end - 1;
        }
    }
    return slots;
}

std::string render_prompt(TemplateId id, const Bindings& bindings) {
    const std::string_view text = template_text(id);
    std::string out;
    out.reserve(text.size() + 1024);
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t end = 0;
        if (auto s = slot_at(text, i, end)) {
            auto it = bindings.find(*s);
            if (it == bindings.end()) {
                throw Error(ErrorCode::MissingSlot, "template " + std::string(template_name(id)) +
                                                        " is missing slot {" + std::string(*s) + "}");
            }
            out += it->second;
            i = end;
        } else {
            out += text[i++];
        }
    }
    return out;
}

std::string render_prompt(std::string_view template_id, const Bindings& bindings) {
    return render_prompt(template_from_name(template_id), bindings);
}

std::string format_item_block(std::string_view item_id, std::string_view text) {
    std::string out = "[Item ID: ";
    out += item_id;
    out += "]\n";
    out += text;
    return out;
}

std::string format_rule_line(std::string_view rule_id, std::string_view rule_text) {
    std::string out = "[";
    out += rule_id;
    out += "] ";
    for (char c : rule_text) out += (c == '\n' || c == '\r') ? ' ' : c;
    return out;
}

std::string format_reminder(std::string_view parse_error) {
    return "\n\nFORMAT REMINDER: your previous response could not be parsed (" + std::string(parse_error) +
           "). Respond ONLY with valid JSON in exactly the format requested above, with no other text.\n\n"
           "Your JSON Response:";
}

}  // namespace semtag
