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


#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"
#include "semtag/prompts.hpp"
#include "semtag/protocol.hpp"

using namespace semtag;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

std::string collapse(std::string_view s) {
    std::string out;
    bool gap = false;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
            gap = true;
            continue;
        }
        if (gap && !out.empty()) out += ' ';
        gap = false;
        out += c;
    }
    return out;
}

// The reference text is LaTeX; drop \textcolor{blue}{...} wrappers and escapes.
std::string delatex(const std::string& s) {
    const std::string tag = "\\textcolor{blue}{";
    std::string out;
    std::size_t i = 0;
    for (;;) {
        const std::size_t j = s.find(tag, i);
        if (j == std::string::npos) {
            out += s.substr(i);
            break;
        }
        out += s.substr(i, j - i);
        std::size_t k = j + tag.size();
        const std::size_t start = k;
        int depth = 1;
        while (depth > 0 && k < s.size()) {
            if (s[k] == '\\') {
                k += 2;
                continue;
            }
            if (s[k] == '{') ++depth;
            if (s[k] == '}') --depth;
            ++k;
        }
        out += s.substr(start, k - 1 - start);
        i = k;
    }
    const std::vector<std::pair<std::string, std::string>> repl = {
        {"\\{", "{"}, {"\\}", "}"}, {"\\_", "_"}, {"\\~{}", "~"}, {"\\&", "&"}, {"\\\\", " "}};
    for (const auto& [a, b] : repl) {
        std::size_t p = 0;
        while ((p = out.find(a, p)) != std::string::npos) {
            out.replace(p, a.size(), b);
            p += b.size();
        }
    }
    return out;
}

std::string random_word(Rng& rng) {
    static const char* words[] = {"Gear", "Kits", "tents", "boots", "\"quoted\"", "with: colon", "naïve", "x{y}", "a\nb"};
    return words[rng.below(9)];
}

}  // namespace

TEST_SUITE("prompts") {

TEST_CASE("reference templates appear line by line in the reference text") {
    const std::string reference = collapse(delatex(read_file(std::string(SEMTAG_SOURCE_DIR) + "/paper.md")));
    for (auto id : {TemplateId::ArchitectInit, TemplateId::AnnotatorPropose, TemplateId::AnnotatorErrorFeedback,
                    TemplateId::ArchitectReview}) {
        const std::string_view text = template_text(id);
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t nl = text.find('\n', pos);
            if (nl == std::string_view::npos) nl = text.size();
            const std::string line = collapse(text.substr(pos, nl - pos));
            pos = nl + 1;
            if (line.empty()) continue;
            CAPTURE(template_name(id));
            CAPTURE(line);
            CHECK(reference.find(line) != std::string::npos);
        }
    }
    // The review prompt keeps the original spelling.
    CHECK(std::string(template_text(TemplateId::ArchitectReview)).find("accomodate") != std::string::npos);
}

TEST_CASE("slot lists") {
    CHECK(template_slots(TemplateId::AnnotatorErrorFeedback) ==
          std::vector<std::string>{"len(ticket_cluster)", "existing_rules_text", "ticket_examples_text"});
    CHECK(template_slots(TemplateId::ArchitectReview) == std::vector<std::string>{"proposals_text"});
    CHECK(template_slots(TemplateId::AssignItem) ==
          std::vector<std::string>{"parent_rule_description", "rules_text", "item_text"});
    for (auto id : kAllTemplates) CHECK(template_from_name(template_name(id)) == id);
    CHECK(code_of([] { template_from_name("Nope"); }) == ErrorCode::UnknownTemplate);
}

TEST_CASE("render substitutes verbatim and reports the missing slot") {
    Bindings b{{"proposals_text", "{not_a_slot} P1"}};
    const std::string out = render_prompt(TemplateId::ArchitectReview, b);
    CHECK(out.find("{not_a_slot} P1") != std::string::npos);
    CHECK(out.find("{proposals_text}") == std::string::npos);
    try {
        render_prompt(TemplateId::AssignItem, {{"rules_text", "x"}});
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingSlot);
        CHECK(std::string(e.what()).find("parent_rule_description") != std::string::npos);
    }
    CHECK(render_prompt("FreeformTag", {{"n_tags", "3"}, {"item_text", "t"}}).find("exactly 3") != std::string::npos);
}

TEST_CASE("formatting helpers") {
    CHECK(format_item_block("i1", "Hello") == "[Item ID: i1]\nHello");
    CHECK(format_rule_line("rule_1", "A: INCLUDES:\nx") == "[rule_1] A: INCLUDES: x");
    CHECK(role_from_name(role_name(AgentRole::Architect)) == AgentRole::Architect);
}

}

TEST_SUITE("protocol") {

TEST_CASE("extract_json strips fences and skips junk") {
    CHECK(nlohmann::json::parse(extract_json("```json\n{\"a\": 1}\n```")) == nlohmann::json{{"a", 1}});
    CHECK(nlohmann::json::parse(extract_json("Sure! {oops} here: [1, 2]")) == nlohmann::json{1, 2});
    CHECK(code_of([] { extract_json("no json at all"); }) == ErrorCode::Parse);
}

TEST_CASE("category parsing") {
    const auto cats = parse_categories(
        R"({"categories": [{"name": " Tents ", "description": "Tents: INCLUDES: tents. EXCLUDES: boots."}]})");
    REQUIRE(cats.size() == 1);
    CHECK(cats[0].name == "Tents");
    CHECK(code_of([] { parse_categories(R"({"categories": []})"); }) == ErrorCode::EmptyInput);
    CHECK(code_of([] { parse_categories(R"({"categories": [{"name": "x"}]})"); }) == ErrorCode::Schema);
}

TEST_CASE("change proposals: payload must match its type") {
    const auto p = parse_change_proposal(R"({"change_type": "EXPAND_EXISTING_CATEGORY", "problem_summary": "s",
        "suggested_change": {"rule_id_to_refine": "rule_1", "refined_description": "A: INCLUDES: x. EXCLUDES: y."}})");
    CHECK(p.change_type() == ChangeType::ExpandExistingCategory);
    CHECK(std::get<ExpandPayload>(p.suggested_change).rule_id_to_refine == "rule_1");
    // Wrong payload keys.
    CHECK(code_of([] {
              parse_change_proposal(R"({"change_type": "CREATE_NEW_CATEGORY", "problem_summary": "s",
                  "suggested_change": {"rule_id_to_refine": "rule_1"}})");
          }) == ErrorCode::Schema);
    // Expand text must be a strict rule.
    CHECK(code_of([] {
              parse_change_proposal(R"({"change_type": "EXPAND_EXISTING_CATEGORY", "problem_summary": "s",
                  "suggested_change": {"rule_id_to_refine": "rule_1", "refined_description": "just words"}})");
          }) == ErrorCode::Schema);
    CHECK(code_of([] {
              parse_change_proposal(R"({"change_type": "MERGE", "problem_summary": "s", "suggested_change": {}})");
          }) == ErrorCode::Schema);
}

TEST_CASE("reviews: list or wrapped list, no duplicate ids") {
    const auto r = parse_reviews(R"({"decisions": [{"proposal_id": "p1", "decision": "APPROVED", "reasoning": "ok"}]})");
    REQUIRE(r.size() == 1);
    CHECK(r[0].decision == Decision::Approved);
    CHECK(code_of([] {
              parse_reviews(R"([{"proposal_id": "p1", "decision": "APPROVED", "reasoning": ""},
                               {"proposal_id": "p1", "decision": "REJECTED", "reasoning": ""}])");
          }) == ErrorCode::Schema);
}

TEST_CASE("level and path replies") {
    CHECK(parse_assign_level(R"({"rule_id": "rule_9"})") == "rule_9");
    CHECK(parse_assign_level(R"({"rule_id": null})") == "STOP");
    CHECK(parse_assign_level(R"({"rule_id": ""})") == "STOP");
    CHECK(parse_path(R"({"path": ["a", "b"]})") == std::vector<std::string>{"a", "b"});
    CHECK(parse_tags(R"({"tags": ["x", "y"]})") == std::vector<std::string>{"x", "y"});
    CHECK(parse_selection(R"({"selected": ["A"]})") == std::vector<std::string>{"A"});
}

TEST_CASE("rule text helpers") {
    CHECK(rule_name_of("Tents: INCLUDES: a. EXCLUDES: b.") == "Tents");
    CHECK(is_strict_rule_text("Tents: INCLUDES: a. EXCLUDES: b."));
    CHECK_FALSE(is_strict_rule_text("Tents INCLUDES a EXCLUDES b"));
    CHECK_FALSE(is_strict_rule_text("Tents: EXCLUDES: b. INCLUDES: a."));
    CHECK_FALSE(is_strict_rule_text(": INCLUDES: a. EXCLUDES: b."));
}

TEST_CASE("serialize then parse is the identity (random messages)") {
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<CategoryProposal> cats;
        const std::size_t n = 1 + rng.below(4);
        for (std::size_t i = 0; i < n; ++i) {
            CategoryProposal c{"N" + std::to_string(i) + random_word(rng), random_word(rng) + " d", {}, {}};
            for (std::size_t k = rng.below(3); k > 0; --k) c.includes.push_back("inc " + random_word(rng));
            for (std::size_t k = rng.below(3); k > 0; --k) c.excludes.push_back("exc " + random_word(rng));
            cats.push_back(c);
        }
        CHECK(parse_categories(serialize_categories(cats)) == cats);

        ChangeProposal p;
        p.proposal_id = "prop_" + hex8(rng.next());
        p.problem_summary = random_word(rng) + " summary";
        switch (rng.below(3)) {
            case 0: p.suggested_change = CreatePayload{"New: INCLUDES: " + random_word(rng) + ". EXCLUDES: none."}; break;
            case 1: p.suggested_change = ExpandPayload{"rule_" + hex8(rng.next()), "Old: INCLUDES: more. EXCLUDES: less."}; break;
            default: p.suggested_change = IgnorePayload{random_word(rng)}; break;
        }
        CHECK(parse_change_proposal(serialize_change_proposal(p)) == p);

        std::vector<ReviewDecision> reviews;
        for (std::size_t i = 0; i < n; ++i) {
            reviews.push_back({"prop_" + std::to_string(i), rng.below(2) ? Decision::Approved : Decision::Rejected,
                               random_word(rng)});
        }
        CHECK(parse_reviews(serialize_reviews(reviews)) == reviews);

        AssignResponse a;
        for (std::size_t k = rng.below(3); k > 0; --k) a.rule_ids.push_back("rule_" + hex8(rng.next()));
        a.reason = a.rule_ids.empty() ? "none fit" : "";
        const auto back = parse_assign_item(serialize_assign_item(a));
        CHECK(back.rule_ids == a.rule_ids);
    }
}

}
