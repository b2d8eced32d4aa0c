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


#include <atomic>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "semtag/gateway.hpp"
#include "semtag/io.hpp"
#include "semtag/protocol.hpp"
#include "support.hpp"

using namespace semtag;
using nlohmann::json;

namespace {

std::shared_ptr<Backend> scripted(std::vector<BackendReply> replies, std::atomic<int>* count = nullptr) {
    auto state = std::make_shared<std::pair<std::mutex, std::vector<BackendReply>>>();
    state->second = std::move(replies);
    return std::make_shared<FunctionBackend>([state, count](const LlmRequest&) {
        std::lock_guard lock(state->first);
        if (count) ++*count;
        BackendReply r = state->second.front();
        if (state->second.size() > 1) state->second.erase(state->second.begin());
        return r;
    });
}

BackendReply ok(std::string text) { return {ReplyStatus::Ok, std::move(text), 200, {}}; }
BackendReply transient() { return {ReplyStatus::Transient, {}, 503, "busy"}; }

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("transient failures are retried with doubling backoff") {
    std::atomic<int> sends{0};
    auto be = scripted({transient(), transient(), ok("fine")}, &sends);
    GatewayConfig gc;
    gc.backoff_initial_ms = 100;
    gc.backoff_max_ms = 150;
    Gateway gw(gc, be, be);
    std::vector<int> sleeps;
    gw.set_sleeper([&](int ms) { sleeps.push_back(ms); });
    CallLedger scope;
    CHECK(gw.complete(AgentRole::Annotator, TemplateId::AssignItem, "p", &scope) == "fine");
    CHECK(sends == 3);
    CHECK(sleeps == std::vector<int>{100, 150});
    const LedgerEntry e = scope.entry(AgentRole::Annotator, TemplateId::AssignItem);
    CHECK(e.calls == 1);
    CHECK(e.retries == 2);
    CHECK(e.failures == 0);
    CHECK(gw.ledger().total_calls() == 1);
}

TEST_CASE("retries run out into Transport; refusals are not retried") {
    std::atomic<int> sends{0};
    auto be = scripted({transient()}, &sends);
    GatewayConfig gc;
    gc.max_retries = 2;
    Gateway gw(gc, be, be);
    gw.set_sleeper([](int) {});
    try {
        gw.complete(AgentRole::Architect, TemplateId::ArchitectInit, "p");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Transport);
    }
    CHECK(sends == 3);
    CHECK(gw.ledger().entry(AgentRole::Architect, TemplateId::ArchitectInit).failures == 1);

    std::atomic<int> refusals{0};
    auto rb = scripted({{ReplyStatus::Refusal, {}, 200, "no"}}, &refusals);
    Gateway g2(gc, rb, rb);
    g2.set_sleeper([](int) {});
    try {
        g2.complete(AgentRole::Annotator, TemplateId::AssignItem, "p");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Refusal);
    }
    CHECK(refusals == 1);
}

TEST_CASE("budget: calls past the limit are neither sent nor counted") {
    std::atomic<int> sends{0};
    auto be = scripted({ok("x")}, &sends);
    GatewayConfig gc;
    gc.max_calls = 3;
    Gateway gw(gc, be, be);
    for (int i = 0; i < 3; ++i) gw.complete(AgentRole::Annotator, TemplateId::AssignItem, "p");
    try {
        gw.complete(AgentRole::Annotator, TemplateId::AssignItem, "p");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BudgetExhausted);
    }
    CHECK(sends == 3);
    CHECK(gw.ledger().total_calls() == 3);
}

TEST_CASE("re-ask appends a reminder and counts as a call") {
    std::vector<std::string> prompts;
    std::mutex mu;
    int n = 0;
    auto be = std::make_shared<FunctionBackend>([&](const LlmRequest& r) {
        std::lock_guard lock(mu);
        prompts.push_back(r.prompt);
        return ok(n++ == 0 ? "garbage" : R"({"rule_id": "rule_1"})");
    });
    Gateway gw({}, be, be);
    CallLedger scope;
    const std::string got =
        gw.complete_parsed(AgentRole::Annotator, TemplateId::AssignLevel, "base", parse_assign_level, &scope);
    CHECK(got == "rule_1");
    REQUIRE(prompts.size() == 2);
    CHECK(prompts[0] == "base");
    CHECK(prompts[1].rfind("base", 0) == 0);
    CHECK(prompts[1].size() > 4);
    CHECK(scope.total_calls() == 2);

    GatewayConfig gc;
    gc.max_reasks = 1;
    auto bad = scripted({ok("still garbage")});
    Gateway g2(gc, bad, bad);
    CallLedger s2;
    try {
        g2.complete_parsed(AgentRole::Annotator, TemplateId::AssignLevel, "base", parse_assign_level, &s2);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
    }
    CHECK(s2.total_calls() == 2);
}

TEST_CASE("roles go to their own backend") {
    auto a = scripted({ok("architect")});
    auto b = scripted({ok("annotator")});
    Gateway gw({}, a, b);
    CHECK(gw.complete(AgentRole::Architect, TemplateId::ArchitectReview, "p") == "architect");
    CHECK(gw.complete(AgentRole::Annotator, TemplateId::AssignItem, "p") == "annotator");
    CHECK(gw.ledger().calls(AgentRole::Architect) == 1);
    CHECK(gw.ledger().calls(AgentRole::Annotator) == 1);
}

TEST_CASE("transcript rows") {
    const auto dir = testing::temp_dir("transcript");
    GatewayConfig gc;
    gc.transcript_path = dir / "t.jsonl";
    auto be = scripted({ok("answer")});
    Gateway gw(gc, be, be);
    gw.complete(AgentRole::Architect, TemplateId::ArchitectInit, "prompt text");
    std::vector<json> rows;
    for_each_line(gc.transcript_path, [&](std::string_view l, std::size_t) { rows.push_back(json::parse(l)); });
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["role"] == "architect");
    CHECK(rows[0]["template_id"] == "ArchitectInit");
    CHECK(rows[0]["response"] == "answer");
    CHECK(rows[0]["prompt_hash"] == hex16(fnv1a64("prompt text")));
    CHECK(rows[0].contains("latency_ms"));
}

TEST_CASE("ledger json round trip and merge") {
    CallLedger l;
    l.record(AgentRole::Architect, TemplateId::ArchitectInit, {1, 2, 0, 10, 20});
    l.record(AgentRole::Annotator, TemplateId::AssignItem, {5, 0, 1, 50, 60});
    const CallLedger back = CallLedger::from_json(l.to_json());
    CHECK(back.snapshot() == l.snapshot());
    CallLedger m;
    m.merge(l);
    m.merge(l);
    CHECK(m.entry(AgentRole::Annotator, TemplateId::AssignItem).calls == 10);
    CHECK(m.total_calls() == 12);
}

TEST_CASE("interpret maps statuses and both response shapes") {
    CHECK(HttpChatBackend::interpret(0, "").status == ReplyStatus::Transient);
    CHECK(HttpChatBackend::interpret(429, "").status == ReplyStatus::Transient);
    CHECK(HttpChatBackend::interpret(502, "").status == ReplyStatus::Transient);
    CHECK(HttpChatBackend::interpret(401, "no").status == ReplyStatus::Fatal);
    const auto openai = HttpChatBackend::interpret(200, R"({"choices": [{"message": {"content": "hi"}}]})");
    CHECK(openai.status == ReplyStatus::Ok);
    CHECK(openai.text == "hi");
    CHECK(HttpChatBackend::interpret(200, R"({"choices": [{"message": {"refusal": "no"}}]})").status ==
          ReplyStatus::Refusal);
    CHECK(HttpChatBackend::interpret(200, R"({"choices": [{"message": {"content": ""}, "finish_reason": "content_filter"}]})")
              .status == ReplyStatus::Refusal);
    const auto gemini = HttpChatBackend::interpret(200, R"({"candidates": [{"content": {"parts": [{"text": "yo"}]}}]})");
    CHECK(gemini.text == "yo");
    CHECK(HttpChatBackend::interpret(200, R"({"candidates": [{"finishReason": "SAFETY"}]})").status ==
          ReplyStatus::Refusal);
    CHECK(HttpChatBackend::interpret(200, R"({"other": 1})").status == ReplyStatus::Fatal);
}

TEST_CASE("http backend against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    json seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (hits++ == 0) {
            res.status = 503;
            return;
        }
        seen_auth = req.get_header_value("Authorization");
        seen_body = json::parse(req.body);
        res.set_content(json{{"choices", {{{"message", {{"content", "pong"}}}}}}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("SEMTAG_TEST_KEY", "sekret", 1);
    HttpChatConfig hc;
    hc.endpoint = "http://127.0.0.1:" + std::to_string(port);
    hc.model = "m1";
    hc.api_key_env = "SEMTAG_TEST_KEY";
    hc.timeout_s = 5;
    auto be = std::make_shared<HttpChatBackend>(hc);
    Gateway gw({}, be, be);
    gw.set_sleeper([](int) {});
    CallLedger scope;
    CHECK(gw.complete(AgentRole::Annotator, TemplateId::AssignItem, "ping", &scope) == "pong");
    CHECK(scope.entry(AgentRole::Annotator, TemplateId::AssignItem).retries == 1);
    CHECK(seen_auth == "Bearer sekret");
    CHECK(seen_body["model"] == "m1");
    CHECK(seen_body["messages"][0]["content"] == "ping");
    server.stop();
    th.join();

    // Nothing listening any more.
    GatewayConfig gc;
    gc.max_retries = 1;
    Gateway dead(gc, be, be);
    dead.set_sleeper([](int) {});
    try {
        dead.complete(AgentRole::Annotator, TemplateId::AssignItem, "ping");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Transport);
    }
}

}
