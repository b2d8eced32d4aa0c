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

#include "semtag/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"
#include "semtag/error.hpp"

namespace semtag {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxCandidates = 64;

std::string strip_fences(std::string_view raw) {
    std::string out(raw);
    std::size_t pos = 0;
    while ((pos = out.find("```", pos)) != std::string::npos) {
        std::size_t end = pos + 3;
        // Drop an info string such as ```json.
        while (end < out.size() && std::isalpha(static_cast<unsigned char>(out[end]))) ++end;
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(pos), out.begin() + static_cast<std::ptrdiff_t>(end), ' ');
        pos = end;
    }
    return out;
}

// End (exclusive) of the balanced value opening at `start`, or npos.
std::size_t balanced_end(std::string_view s, std::size_t start) {
    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            stack.push_back(c == '{' ? '}' : ']');
        } else if (c == '}' || c == ']') {
            if (stack.empty() || stack.back() != c) return std::string_view::npos;
            stack.pop_back();
            if (stack.empty()) return i + 1;
        }
    }
    return std::string_view::npos;
}

json parse_any(std::string_view raw) { return json::parse(extract_json(raw)); }

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::Schema, what); }

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

// The list under `key`, a bare list, or an object whose only member is a list.
const json& list_field(const json& j, const char* key) {
    if (j.is_array()) return j;
    if (j.is_object()) {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_array()) schema(std::string("\"") + key + "\" is not a list");
            return *it;
        }
        if (j.size() == 1 && j.begin()->is_array()) return *j.begin();
    }
    schema(std::string("missing \"") + key + "\" list");
}

std::string required_string(const json& j, const char* key, const char* where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) schema(std::string(where) + ": missing string \"" + key + "\"");
    return it->get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return out;
    if (it->is_string()) {
        out.push_back(it->get<std::string>());
        return out;
    }
    if (!it->is_array()) schema(std::string("\"") + key + "\" is not a list");
    for (const auto& v : *it) {
        if (!v.is_string()) schema(std::string("\"") + key + "\" holds a non-string");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::vector<std::string> strings_of(const json& list, const char* what) {
    std::vector<std::string> out;
    for (const auto& v : list) {
        if (!v.is_string()) schema(std::string(what) + " holds a non-string");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::string id_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    schema("proposal_id must be a string or integer");
}

}  // namespace

std::string_view change_type_name(ChangeType t) noexcept {
    switch (t) {
        case ChangeType::CreateNewCategory: return "CREATE_NEW_CATEGORY";
        case ChangeType::ExpandExistingCategory: return "EXPAND_EXISTING_CATEGORY";
        case ChangeType::IgnoreAsOutliers: return "IGNORE_AS_OUTLIERS";
    }
    return "";
}

std::string extract_json(std::string_view raw) {
    const std::string text = strip_fences(raw);
    std::size_t tried = 0;
    for (std::size_t i = 0; i < text.size() && tried < kMaxCandidates; ++i) {
        if (text[i] != '{' && text[i] != '[') continue;
        ++tried;
        const std::size_t end = balanced_end(text, i);
        if (end == std::string_view::npos) continue;
        const std::string candidate = text.substr(i, end - i);
        if (json::accept(candidate)) return candidate;
    }
    throw Error(ErrorCode::Parse, "no JSON object or array found in response");
}

std::string rule_name_of(std::string_view rule_text) {
    const auto colon = rule_text.find(':');
    return trim(colon == std::string_view::npos ? rule_text : rule_text.substr(0, colon));
}

bool is_strict_rule_text(std::string_view text) {
    const auto inc = text.find("INCLUDES");
    if (inc == std::string_view::npos) return false;
    const auto exc = text.find("EXCLUDES", inc + 8);
    if (exc == std::string_view::npos) return false;
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || colon > inc) return false;
    return !trim(text.substr(0, colon)).empty();
}

std::vector<CategoryProposal> parse_categories(std::string_view raw) {
    const json j = parse_any(raw);
    const json& list = list_field(j, "categories");
    std::vector<CategoryProposal> out;
    for (const auto& c : list) {
        if (!c.is_object()) schema("category entry is not an object");
        CategoryProposal p;
        p.name = trim(required_string(c, "name", "category"));
        p.description = trim(required_string(c, "description", "category"));
        if (p.name.empty()) schema("category with empty name");
        if (p.description.empty()) schema("category '" + p.name + "' has an empty description");
        p.includes = string_list(c, "includes");
        p.excludes = string_list(c, "excludes");
        out.push_back(std::move(p));
    }
    if (out.empty()) throw Error(ErrorCode::EmptyInput, "empty vocabulary: no categories in response");
    return out;
}

ChangeProposal parse_change_proposal(std::string_view raw) {
    const json j = parse_any(raw);
    if (!j.is_object()) schema("change proposal is not an object");
    ChangeProposal p;
    if (auto it = j.find("proposal_id"); it != j.end()) p.proposal_id = id_string(*it);
    const std::string type = required_string(j, "change_type", "change proposal");
    if (auto it = j.find("problem_summary"); it != j.end() && it->is_string()) p.problem_summary = it->get<std::string>();
    auto sc = j.find("suggested_change");
    if (sc == j.end() || !sc->is_object()) schema("change proposal: missing object \"suggested_change\"");
    const json& s = *sc;
    auto forbid = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys) {
            if (s.contains(k)) schema(type + " payload must not carry \"" + k + "\"");
        }
    };
    if (type == "CREATE_NEW_CATEGORY") {
        forbid({"rule_id_to_refine", "refined_description", "reason"});
        CreatePayload c{trim(required_string(s, "new_rule_description", type.c_str()))};
        if (rule_name_of(c.new_rule_description).empty()) schema("new_rule_description has no name");
        p.suggested_change = std::move(c);
    } else if (type == "EXPAND_EXISTING_CATEGORY") {
        forbid({"new_rule_description", "reason"});
        ExpandPayload e{trim(required_string(s, "rule_id_to_refine", type.c_str())),
                        trim(required_string(s, "refined_description", type.c_str()))};
        if (!is_strict_rule_text(e.refined_description)) {
            schema("refined_description must read 'Name: INCLUDES: ... EXCLUDES: ...'");
        }
        p.suggested_change = std::move(e);
    } else if (type == "IGNORE_AS_OUTLIERS") {
        forbid({"new_rule_description", "rule_id_to_refine", "refined_description"});
        p.suggested_change = IgnorePayload{required_string(s, "reason", type.c_str())};
    } else {
        schema("unknown change_type '" + type + "'");
    }
    return p;
}

std::vector<ReviewDecision> parse_reviews(std::string_view raw) {
    const json j = parse_any(raw);
    const json& list = list_field(j, "decisions");
    std::vector<ReviewDecision> out;
    std::set<std::string> seen;
    for (const auto& r : list) {
        if (!r.is_object()) schema("review entry is not an object");
        auto id = r.find("proposal_id");
        if (id == r.end()) schema("review entry without proposal_id");
        ReviewDecision d;
        d.proposal_id = id_string(*id);
        const std::string decision = upper(trim(required_string(r, "decision", "review")));
        if (decision == "APPROVED") d.decision = Decision::Approved;
        else if (decision == "REJECTED") d.decision = Decision::Rejected;
        else schema("unknown decision '" + decision + "'");
        if (auto it = r.find("reasoning"); it != r.end() && it->is_string()) d.reasoning = it->get<std::string>();
        if (!seen.insert(d.proposal_id).second) schema("duplicate proposal_id '" + d.proposal_id + "' in reviews");
        out.push_back(std::move(d));
    }
    return out;
}

AssignResponse parse_assign_item(std::string_view raw) {
    const json j = parse_any(raw);
    AssignResponse r;
    if (j.is_array()) {
        r.rule_ids = strings_of(j, "rule_ids");
        return r;
    }
    if (!j.is_object()) schema("assignment is not an object");
    r.rule_ids = string_list(j, "rule_ids");
    if (auto it = j.find("reason"); it != j.end() && it->is_string()) r.reason = it->get<std::string>();
    return r;
}

std::string parse_assign_level(std::string_view raw) {
    const json j = parse_any(raw);
    if (!j.is_object()) schema("level assignment is not an object");
    auto it = j.find("rule_id");
    if (it == j.end()) schema("level assignment: missing \"rule_id\"");
    if (it->is_null()) return "STOP";
    if (!it->is_string()) schema("level assignment: \"rule_id\" is not a string");
    std::string id = trim(it->get<std::string>());
    if (upper(id) == "STOP" || id.empty()) return "STOP";
    return id;
}

std::vector<std::string> parse_path(std::string_view raw) {
    return strings_of(list_field(parse_any(raw), "path"), "path");
}

std::vector<std::string> parse_tags(std::string_view raw) {
    return strings_of(list_field(parse_any(raw), "tags"), "tags");
}

std::vector<std::string> parse_selection(std::string_view raw) {
    return strings_of(list_field(parse_any(raw), "selected"), "selected");
}

std::string serialize_categories(const std::vector<CategoryProposal>& categories) {
    json list = json::array();
    for (const auto& c : categories) {
        list.push_back({{"name", c.name}, {"description", c.description}, {"includes", c.includes},
                        {"excludes", c.excludes}});
    }
    return json{{"categories", list}}.dump();
}

std::string serialize_change_proposal(const ChangeProposal& p) {
    json s = std::visit(
        [](const auto& payload) -> json {
            using T = std::decay_t<decltype(payload)>;
            if constexpr (std::is_same_v<T, CreatePayload>) {
                return {{"new_rule_description", payload.new_rule_description}};
            } else if constexpr (std::is_same_v<T, ExpandPayload>) {
                return {{"rule_id_to_refine", payload.rule_id_to_refine},
                        {"refined_description", payload.refined_description}};
            } else {
                return {{"reason", payload.reason}};
            }
        },
        p.suggested_change);
    json j{{"change_type", change_type_name(p.change_type())},
           {"problem_summary", p.problem_summary},
           {"suggested_change", s}};
    if (!p.proposal_id.empty()) j["proposal_id"] = p.proposal_id;
    return j.dump();
}

std::string serialize_reviews(const std::vector<ReviewDecision>& reviews) {
    json list = json::array();
    for (const auto& r : reviews) {
        list.push_back({{"proposal_id", r.proposal_id},
                        {"decision", r.decision == Decision::Approved ? "APPROVED" : "REJECTED"},
                        {"reasoning", r.reasoning}});
    }
    return list.dump();
}

std::string serialize_assign_item(const AssignResponse& r) {
    return json{{"rule_ids", r.rule_ids}, {"reason", r.reason}}.dump();
}

}  // namespace semtag
