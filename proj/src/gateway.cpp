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

#include "semtag/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "semtag/hash.hpp"
#include "semtag/http.hpp"
#include "semtag/io.hpp"

namespace semtag {

using nlohmann::json;

LedgerEntry& LedgerEntry::operator+=(const LedgerEntry& o) {
    calls += o.calls;
    retries += o.retries;
    failures += o.failures;
    prompt_tokens += o.prompt_tokens;
    response_tokens += o.response_tokens;
    return *this;
}

CallLedger::CallLedger(const CallLedger& other) : entries_(other.snapshot()) {}

CallLedger& CallLedger::operator=(const CallLedger& other) {
    if (this != &other) {
        auto copy = other.snapshot();
        std::lock_guard lock(mu_);
        entries_ = std::move(copy);
    }
    return *this;
}

void CallLedger::record(AgentRole role, TemplateId id, const LedgerEntry& delta) {
    std::lock_guard lock(mu_);
    entries_[{role, id}] += delta;
}

void CallLedger::merge(const CallLedger& other) {
    for (const auto& [key, e] : other.snapshot()) record(key.first, key.second, e);
}

std::map<CallLedger::Key, LedgerEntry> CallLedger::snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
}

LedgerEntry CallLedger::entry(AgentRole role, TemplateId id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find({role, id});
    return it == entries_.end() ? LedgerEntry{} : it->second;
}

std::uint64_t CallLedger::calls(AgentRole role) const {
    std::lock_guard lock(mu_);
    std::uint64_t n = 0;
    for (const auto& [key, e] : entries_) {
        if (key.first == role) n += e.calls;
    }
    return n;
}

std::uint64_t CallLedger::total_calls() const {
    std::lock_guard lock(mu_);
    std::uint64_t n = 0;
    for (const auto& [key, e] : entries_) n += e.calls;
    return n;
}

json CallLedger::to_json() const {
    json rows = json::array();
    for (const auto& [key, e] : snapshot()) {
        rows.push_back({{"role", role_name(key.first)},
                        {"template_id", template_name(key.second)},
                        {"calls", e.calls},
                        {"retries", e.retries},
                        {"failures", e.failures},
                        {"prompt_tokens", e.prompt_tokens},
                        {"response_tokens", e.response_tokens}});
    }
    return rows;
}

CallLedger CallLedger::from_json(const json& j) {
    CallLedger ledger;
    for (const auto& row : j) {
        LedgerEntry e;
        e.calls = row.value("calls", std::uint64_t{0});
        e.retries = row.value("retries", std::uint64_t{0});
        e.failures = row.value("failures", std::uint64_t{0});
        e.prompt_tokens = row.value("prompt_tokens", std::uint64_t{0});
        e.response_tokens = row.value("response_tokens", std::uint64_t{0});
        ledger.record(role_from_name(row.at("role").get<std::string>()),
                      template_from_name(row.at("template_id").get<std::string>()), e);
    }
    return ledger;
}

std::uint64_t estimate_tokens(std::string_view text) noexcept { return (text.size() + 3) / 4; }

HttpChatBackend::HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "http backend needs an endpoint");
    if (config_.model.empty()) throw Error(ErrorCode::InvalidConfig, "http backend needs a model name");
}

BackendReply HttpChatBackend::interpret(int status, const std::string& body) {
    BackendReply reply;
    reply.http_status = status;
    if (status == 0 || status == 429 || status >= 500) {
        reply.status = ReplyStatus::Transient;
        reply.error = "http status " + std::to_string(status);
        return reply;
    }
    if (status >= 400) {
        reply.status = ReplyStatus::Fatal;
        reply.error = "http status " + std::to_string(status) + ": " + body.substr(0, 200);
        return reply;
    }
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        reply.status = ReplyStatus::Transient;
        reply.error = "response body is not JSON";
        return reply;
    }
    if (auto c = j.find("choices"); c != j.end() && c->is_array() && !c->empty()) {
        const json& first = (*c)[0];
        const json msg = first.value("message", json::object());
        if (msg.contains("refusal") && msg["refusal"].is_string()) {
            reply.status = ReplyStatus::Refusal;
            reply.error = msg["refusal"].get<std::string>();
            return reply;
        }
        if (first.value("finish_reason", std::string()) == "content_filter") {
            reply.status = ReplyStatus::Refusal;
            reply.error = "content_filter";
            return reply;
        }
        if (msg.contains("content") && msg["content"].is_string()) {
            reply.text = msg["content"].get<std::string>();
            return reply;
        }
    }
    if (auto c = j.find("candidates"); c != j.end() && c->is_array() && !c->empty()) {
        const json& first = (*c)[0];
        if (first.value("finishReason", std::string()) == "SAFETY") {
            reply.status = ReplyStatus::Refusal;
            reply.error = "SAFETY";
            return reply;
        }
        try {
            reply.text = first.at("content").at("parts").at(0).at("text").get<std::string>();
            return reply;
        } catch (const json::exception&) {
        }
    }
    reply.status = ReplyStatus::Fatal;
    reply.error = "no candidate text in response";
    return reply;
}

BackendReply HttpChatBackend::send(const LlmRequest& request) {
    json body{{"model", config_.model},
              {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.params.temperature}};
    if (request.params.max_tokens > 0) body["max_tokens"] = request.params.max_tokens;
    std::vector<std::pair<std::string, std::string>> headers;
    const std::string key = credential_from_env(config_.api_key_env);
    if (!key.empty()) headers.emplace_back(config_.auth_header, config_.auth_prefix + key);
    const HttpResult res = http_post_json(config_.endpoint, config_.path, headers, body.dump(), config_.timeout_s);
    BackendReply reply = interpret(res.status, res.body);
    if (res.status == 0) reply.error = res.error;
    return reply;
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Backend> architect, std::shared_ptr<Backend> annotator)
    : config_(std::move(config)),
      architect_(std::move(architect)),
      annotator_(std::move(annotator)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))),
      sleeper_([](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }) {
    if (!architect_ || !annotator_) throw Error(ErrorCode::InvalidConfig, "gateway needs a backend for both roles");
    if (config_.max_retries < 0 || config_.max_reasks < 0) {
        throw Error(ErrorCode::InvalidConfig, "max_retries and max_reasks must be >= 0");
    }
}

std::string Gateway::complete(AgentRole role, TemplateId id, const std::string& prompt, CallLedger* scope) {
    if (config_.max_calls > 0) {
        const std::uint64_t n = issued_.fetch_add(1) + 1;
        if (n > config_.max_calls) {
            issued_.fetch_sub(1);
            throw Error(ErrorCode::BudgetExhausted,
                        "call budget of " + std::to_string(config_.max_calls) + " exhausted");
        }
    }
    LlmRequest request{role, id, prompt, role == AgentRole::Architect ? config_.architect_params
                                                                       : config_.annotator_params};
    Backend& backend = role == AgentRole::Architect ? *architect_ : *annotator_;

    LedgerEntry delta;
    delta.calls = 1;
    delta.prompt_tokens = estimate_tokens(prompt);
    BackendReply reply;
    const auto start = std::chrono::steady_clock::now();
    int backoff = config_.backoff_initial_ms;
    for (int attempt = 0;; ++attempt) {
        in_flight_.acquire();
        try {
            reply = backend.send(request);
        } catch (const std::exception& e) {
            reply = BackendReply{ReplyStatus::Transient, {}, 0, e.what()};
        }
        in_flight_.release();
        if (reply.status != ReplyStatus::Transient || attempt >= config_.max_retries) break;
        ++delta.retries;
        if (backoff > 0) sleeper_(backoff);
        backoff = std::min(config_.backoff_max_ms, std::max(1, backoff * 2));
    }
    const double latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (reply.status != ReplyStatus::Ok) delta.failures = 1;
    delta.response_tokens = estimate_tokens(reply.text);
    ledger_.record(role, id, delta);
    if (scope) scope->record(role, id, delta);
    log_transcript(role, id, prompt, reply.status == ReplyStatus::Ok ? reply.text : "<error> " + reply.error,
                   latency_ms);

    switch (reply.status) {
        case ReplyStatus::Ok: return reply.text;
        case ReplyStatus::Refusal: throw Error(ErrorCode::Refusal, "backend refused: " + reply.error);
        case ReplyStatus::Transient:
            throw Error(ErrorCode::Transport, "transport failed after " + std::to_string(delta.retries) +
                                                  " retries: " + reply.error);
        case ReplyStatus::Fatal: throw Error(ErrorCode::Transport, reply.error);
    }
    return {};
}

void Gateway::log_transcript(AgentRole role, TemplateId id, const std::string& prompt, const std::string& response,
                             double latency_ms) {
    if (config_.transcript_path.empty()) return;
    const json row{{"role", role_name(role)},
                   {"template_id", template_name(id)},
                   {"prompt_hash", hex16(fnv1a64(prompt))},
                   {"response", response},
                   {"latency_ms", latency_ms}};
    std::lock_guard lock(transcript_mu_);
    append_line(config_.transcript_path, row.dump());
}

}  // namespace semtag
