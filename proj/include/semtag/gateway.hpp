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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <utility>

#include "json.hpp"
#include "semtag/error.hpp"
#include "semtag/prompts.hpp"

namespace semtag {

struct DecodeParams {
    double temperature = 0.0;
    int max_tokens = 0;  // 0 = backend default
};

struct LlmRequest {
    AgentRole role = AgentRole::Annotator;
    TemplateId template_id = TemplateId::AssignItem;
    std::string prompt;
    DecodeParams params;
};

enum class ReplyStatus { Ok, Transient, Refusal, Fatal };

struct BackendReply {
    ReplyStatus status = ReplyStatus::Ok;
    std::string text;
    int http_status = 0;
    std::string error;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    /// Must be safe to call from several threads at once.
    virtual BackendReply send(const LlmRequest& request) = 0;
};

/// Backend driven by a callable; used for scripted tests.
class FunctionBackend final : public Backend {
public:
    using Fn = std::function<BackendReply(const LlmRequest&)>;
    explicit FunctionBackend(Fn fn, std::string name = "function") : fn_(std::move(fn)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    BackendReply send(const LlmRequest& request) override { return fn_(request); }

private:
    Fn fn_;
    std::string name_;
};

struct HttpChatConfig {
    std::string endpoint;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env;
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    int timeout_s = 120;
};

/// Chat-completion JSON over HTTP. 429, 5xx and connection errors are
/// transient; other 4xx are fatal. Reads choices[0].message.content or
/// candidates[0].content.parts[0].text.
class HttpChatBackend final : public Backend {
public:
    explicit HttpChatBackend(HttpChatConfig config);
    std::string name() const override { return "http:" + config_.model; }
    BackendReply send(const LlmRequest& request) override;

    /// Exposed for tests: maps a status + body to a reply.
    static BackendReply interpret(int status, const std::string& body);

private:
    HttpChatConfig config_;
};

struct LedgerEntry {
    std::uint64_t calls = 0;
    std::uint64_t retries = 0;
    std::uint64_t failures = 0;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t response_tokens = 0;

    LedgerEntry& operator+=(const LedgerEntry& o);
    bool operator==(const LedgerEntry&) const = default;
};

/// Per (role, template) counters. Thread-safe; counters only grow.
class CallLedger {
public:
    using Key = std::pair<AgentRole, TemplateId>;

    CallLedger() = default;
    CallLedger(const CallLedger& other);
    CallLedger& operator=(const CallLedger& other);

    void record(AgentRole role, TemplateId id, const LedgerEntry& delta);
    void merge(const CallLedger& other);

    std::map<Key, LedgerEntry> snapshot() const;
    LedgerEntry entry(AgentRole role, TemplateId id) const;
    std::uint64_t calls(AgentRole role) const;
    std::uint64_t calls(AgentRole role, TemplateId id) const { return entry(role, id).calls; }
    std::uint64_t total_calls() const;

    nlohmann::json to_json() const;
    static CallLedger from_json(const nlohmann::json& j);

private:
    mutable std::mutex mu_;
    std::map<Key, LedgerEntry> entries_;
};

/// Rough token estimate (4 bytes per token).
std::uint64_t estimate_tokens(std::string_view text) noexcept;

struct GatewayConfig {
    int max_retries = 3;
    int backoff_initial_ms = 250;
    int backoff_max_ms = 8000;
    /// Total call budget across roles; 0 = unlimited.
    std::uint64_t max_calls = 0;
    std::size_t max_in_flight = 16;
    /// Re-asks with a format reminder after an unparseable response.
    int max_reasks = 2;
    std::filesystem::path transcript_path;
    DecodeParams architect_params;
    DecodeParams annotator_params;
};

class Gateway {
public:
    Gateway(GatewayConfig config, std::shared_ptr<Backend> architect, std::shared_ptr<Backend> annotator);

    /// One logical call: retries transient failures with exponential backoff.
    /// Throws BudgetExhausted (call not issued, not counted), Transport once
    /// retries are spent, or Refusal. Every issued call is recorded in the
    /// global ledger and in `scope` when given.
    std::string complete(AgentRole role, TemplateId id, const std::string& prompt, CallLedger* scope = nullptr);

    /// complete() then parse; on a Parse/Schema failure re-asks up to
    /// max_reasks times with the reminder appended. Each re-ask is a call.
    template <class Parser>
    auto complete_parsed(AgentRole role, TemplateId id, const std::string& prompt, Parser&& parse,
                         CallLedger* scope = nullptr) -> decltype(parse(std::string_view{})) {
        std::string attempt = prompt;
        for (int i = 0;; ++i) {
            const std::string raw = complete(role, id, attempt, scope);
            try {
                return parse(std::string_view(raw));
            } catch (const Error& e) {
                const bool parse_error = e.code() == ErrorCode::Parse || e.code() == ErrorCode::Schema ||
                                         e.code() == ErrorCode::EmptyInput;
                if (!parse_error || i >= config_.max_reasks) throw;
                attempt = prompt + format_reminder(e.what());
            }
        }
    }

    const CallLedger& ledger() const noexcept { return ledger_; }
    CallLedger& ledger() noexcept { return ledger_; }
    const GatewayConfig& config() const noexcept { return config_; }

    /// Replaces the sleep used between retries (tests pass a no-op).
    void set_sleeper(std::function<void(int ms)> sleeper) { sleeper_ = std::move(sleeper); }

private:
    void log_transcript(AgentRole role, TemplateId id, const std::string& prompt, const std::string& response,
                        double latency_ms);

    GatewayConfig config_;
    std::shared_ptr<Backend> architect_;
    std::shared_ptr<Backend> annotator_;
    CallLedger ledger_;
    std::atomic<std::uint64_t> issued_{0};
    std::counting_semaphore<1 << 20> in_flight_;
    std::mutex transcript_mu_;
    std::function<void(int)> sleeper_;
};

}  // namespace semtag
