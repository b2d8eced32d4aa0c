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

#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace semtag {

struct CategoryProposal {
    std::string name;
    std::string description;
    std::vector<std::string> includes;
    std::vector<std::string> excludes;

    bool operator==(const CategoryProposal&) const = default;
};

enum class ChangeType { CreateNewCategory, ExpandExistingCategory, IgnoreAsOutliers };

std::string_view change_type_name(ChangeType t) noexcept;

struct CreatePayload {
    std::string new_rule_description;
    bool operator==(const CreatePayload&) const = default;
};
struct ExpandPayload {
    std::string rule_id_to_refine;
    std::string refined_description;
    bool operator==(const ExpandPayload&) const = default;
};
struct IgnorePayload {
    std::string reason;
    bool operator==(const IgnorePayload&) const = default;
};

struct ChangeProposal {
    std::string proposal_id;
    std::string problem_summary;
    std::variant<CreatePayload, ExpandPayload, IgnorePayload> suggested_change;

    ChangeType change_type() const noexcept { return static_cast<ChangeType>(suggested_change.index()); }
    bool operator==(const ChangeProposal&) const = default;
};

enum class Decision { Approved, Rejected };

struct ReviewDecision {
    std::string proposal_id;
    Decision decision = Decision::Rejected;
    std::string reasoning;

    bool operator==(const ReviewDecision&) const = default;
};

/// Response to AssignItem: matching rule ids, or none plus a reason.
struct AssignResponse {
    std::vector<std::string> rule_ids;
    std::string reason;

    bool operator==(const AssignResponse&) const = default;
};

/// Returns the first balanced JSON object or array in `raw` that parses,
/// after removing markdown code fences. Throws Parse if there is none.
std::string extract_json(std::string_view raw);

/// Splits "Name: INCLUDES: ... EXCLUDES: ..." at the first colon.
std::string rule_name_of(std::string_view rule_text);

/// True when `text` has a non-empty name, then INCLUDES, then EXCLUDES.
bool is_strict_rule_text(std::string_view text);

// Parsers throw Parse when no JSON is found and Schema on shape violations.
std::vector<CategoryProposal> parse_categories(std::string_view raw);
ChangeProposal parse_change_proposal(std::string_view raw);
std::vector<ReviewDecision> parse_reviews(std::string_view raw);
AssignResponse parse_assign_item(std::string_view raw);
/// A rule id, or "STOP".
std::string parse_assign_level(std::string_view raw);
std::vector<std::string> parse_path(std::string_view raw);
std::vector<std::string> parse_tags(std::string_view raw);
std::vector<std::string> parse_selection(std::string_view raw);

std::string serialize_categories(const std::vector<CategoryProposal>& categories);
std::string serialize_change_proposal(const ChangeProposal& proposal);
std::string serialize_reviews(const std::vector<ReviewDecision>& reviews);
std::string serialize_assign_item(const AssignResponse& response);

}  // namespace semtag
