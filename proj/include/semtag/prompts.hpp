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

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace semtag {

enum class AgentRole { Architect, Annotator };

std::string_view role_name(AgentRole role) noexcept;
AgentRole role_from_name(std::string_view name);

enum class TemplateId {
    ArchitectInit,           // root-level initial vocabulary
    AnnotatorPropose,        // sub-category proposal under a non-root parent
    AnnotatorErrorFeedback,  // change proposal from a cluster of failures
    ArchitectReview,         // approve / reject change proposals
    AssignItem,              // multi-label annotation during refinement
    AssignLevel,             // single best child (or STOP) during final assignment
    AssignOneShot,           // whole-vocabulary path selection
    FreeformTag,             // unconstrained keyword generation
    UserSimulator,           // critique: pick relevant level-1 descriptors
};

inline constexpr std::array kAllTemplates = {
    TemplateId::ArchitectInit, TemplateId::AnnotatorPropose, TemplateId::AnnotatorErrorFeedback,
    TemplateId::ArchitectReview, TemplateId::AssignItem, TemplateId::AssignLevel,
    TemplateId::AssignOneShot, TemplateId::FreeformTag, TemplateId::UserSimulator,
};

std::string_view template_name(TemplateId id) noexcept;
/// Throws UnknownTemplate.
TemplateId template_from_name(std::string_view name);

/// Raw template text with `{slot}` markers.
std::string_view template_text(TemplateId id) noexcept;

/// Slot names in order of first appearance.
std::vector<std::string> template_slots(TemplateId id);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Substitutes every slot. Throws MissingSlot naming the first unbound slot.
/// Bound values are inserted verbatim and never re-scanned for slots.
std::string render_prompt(TemplateId id, const Bindings& bindings);
std::string render_prompt(std::string_view template_id, const Bindings& bindings);

/// "[Item ID: <id>]" followed by the item text on the next line.
std::string format_item_block(std::string_view item_id, std::string_view text);

/// "[<rule_id>] <rule text>" on one line (newlines in the text become spaces).
std::string format_rule_line(std::string_view rule_id, std::string_view rule_text);

/// Appended to a prompt when a response could not be parsed.
std::string format_reminder(std::string_view parse_error);

}  // namespace semtag
