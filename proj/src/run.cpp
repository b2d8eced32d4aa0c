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


#include "semtag/run.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <csignal>
#include <set>

#include "semtag/builder.hpp"
#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/io.hpp"
#include "semtag/parallel.hpp"
#include "semtag/surrogate.hpp"
#include "semtag/trie.hpp"

namespace semtag {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read_to(const json& j, std::string_view key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

json http_to_json(const HttpChatConfig& c) {
    return {{"endpoint", c.endpoint},       {"path", c.path},
            {"model", c.model},             {"api_key_env", c.api_key_env},
            {"auth_header", c.auth_header}, {"auth_prefix", c.auth_prefix},
            {"timeout_s", c.timeout_s}};
}

HttpChatConfig http_from_json(const json& j, HttpChatConfig c, const std::string& where) {
    check_keys(j, {"endpoint", "path", "model", "api_key_env", "auth_header", "auth_prefix", "timeout_s"}, where);
    read_to(j, "endpoint", c.endpoint);
    read_to(j, "path", c.path);
    read_to(j, "model", c.model);
    read_to(j, "api_key_env", c.api_key_env);
    read_to(j, "auth_header", c.auth_header);
    read_to(j, "auth_prefix", c.auth_prefix);
    read_to(j, "timeout_s", c.timeout_s);
    return c;
}

std::string assign_mode_name(AssignMode m) { return m == AssignMode::PerLevel ? "per-level" : "one-shot"; }
std::string eval_mode_name(EvalMode m) { return m == EvalMode::FullRank ? "full-rank" : "sampled"; }
std::string simulator_name(SimulatorMode m) { return m == SimulatorMode::Oracle ? "oracle" : "llm"; }

void require(const fs::path& p, std::string_view stage) {
    if (!fs::exists(p)) {
        throw Error(ErrorCode::NotFound, p.string() + " is missing; run '" + std::string(stage) + "' first");
    }
}

std::uint64_t file_hash(const fs::path& p) { return fnv1a64(read_file(p)); }

}  // namespace

void RunConfig::validate() const {
    if (run_dir.empty()) throw Error(ErrorCode::InvalidConfig, "run_dir is empty");
    if (backend != "mock" && backend != "http") throw Error(ErrorCode::InvalidConfig, "backend must be mock or http");
    if (backend == "http" && (architect_http.endpoint.empty() || annotator_http.endpoint.empty())) {
        throw Error(ErrorCode::InvalidConfig, "http backend needs architect and annotator endpoints");
    }
    if (embedding != "hashing" && embedding != "http") {
        throw Error(ErrorCode::InvalidConfig, "embedding must be hashing or http");
    }
    if (embedding == "hashing" && embedding_dim == 0) throw Error(ErrorCode::InvalidConfig, "embedding dim is 0");
    if (embedding == "http" && (embedding_http.endpoint.empty() || embedding_http.dim == 0)) {
        throw Error(ErrorCode::InvalidConfig, "http embedding needs endpoint and dim");
    }
    build.validate();
    if (order < 1) throw Error(ErrorCode::InvalidConfig, "surrogate order must be >= 1");
    if (alpha < 0.0) throw Error(ErrorCode::InvalidConfig, "alpha must be >= 0");
    if (beam < 1) throw Error(ErrorCode::InvalidConfig, "beam must be >= 1");
    if (top_k < 1) throw Error(ErrorCode::InvalidConfig, "top_k must be >= 1");
    if (eval.ks.empty()) throw Error(ErrorCode::InvalidConfig, "eval.ks is empty");
    for (auto k : eval.ks) {
        if (k < 1) throw Error(ErrorCode::InvalidConfig, "eval.ks entries must be >= 1");
    }
    if (freeform.n_tags < 1) throw Error(ErrorCode::InvalidConfig, "freeform.n_tags must be >= 1");
    if (min_f >= max_f) throw Error(ErrorCode::InvalidConfig, "freeform.min_f must be below max_f");
    if (n_bins < 1) throw Error(ErrorCode::InvalidConfig, "freeform.n_bins must be >= 1");
    if (gateway.max_retries < 0 || gateway.max_reasks < 0 || gateway.max_in_flight < 1) {
        throw Error(ErrorCode::InvalidConfig, "bad gateway limits");
    }
}

json RunConfig::to_json() const {
    return {
        {"run_dir", run_dir.string()},
        {"items", items.string()},
        {"interactions", interactions.string()},
        {"backend", backend},
        {"world", world.string()},
        {"mock",
         {{"false_negative_rate", mock.false_negative_rate},
          {"withheld", mock.withheld},
          {"reject_create", mock.reject_create},
          {"reject_expand", mock.reject_expand},
          {"seed", mock.seed}}},
        {"http", {{"architect", http_to_json(architect_http)}, {"annotator", http_to_json(annotator_http)}}},
        {"embedding",
         {{"provider", embedding},
          {"dim", embedding == "http" ? embedding_http.dim : embedding_dim},
          {"endpoint", embedding_http.endpoint},
          {"path", embedding_http.path},
          {"model", embedding_http.model},
          {"api_key_env", embedding_http.api_key_env}}},
        {"gateway",
         {{"max_retries", gateway.max_retries},
          {"backoff_initial_ms", gateway.backoff_initial_ms},
          {"backoff_max_ms", gateway.backoff_max_ms},
          {"max_calls", gateway.max_calls},
          {"max_in_flight", gateway.max_in_flight},
          {"max_reasks", gateway.max_reasks},
          {"transcript", gateway.transcript_path.string()},
          {"architect_temperature", gateway.architect_params.temperature},
          {"annotator_temperature", gateway.annotator_params.temperature}}},
        {"build", build.to_json()},
        {"assign", {{"mode", assign_mode_name(assign_mode)}}},
        {"surrogate", {{"order", order}, {"alpha", alpha}}},
        {"decode", {{"beam", beam}, {"top_k", top_k}}},
        {"eval",
         {{"mode", eval_mode_name(eval.mode)},
          {"n_negatives", eval.n_negatives},
          {"ks", eval.ks},
          {"seed", eval.seed}}},
        {"critique",
         {{"simulator", simulator_name(critique.mode)},
          {"k_siblings", critique.k_siblings},
          {"fallback", critique.fallback}}},
        {"freeform",
         {{"n_tags", freeform.n_tags},
          {"min_f", min_f},
          {"max_f", max_f},
          {"n_bins", n_bins},
          {"kmeans_k", kmeans_k}}},
    };
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        check_keys(j,
                   {"run_dir", "items", "interactions", "backend", "world", "mock", "http", "embedding", "gateway",
                    "build", "assign", "surrogate", "decode", "eval", "critique", "freeform"},
                   "config");
        if (j.contains("run_dir")) c.run_dir = j["run_dir"].get<std::string>();
        if (j.contains("items")) c.items = j["items"].get<std::string>();
        if (j.contains("interactions")) c.interactions = j["interactions"].get<std::string>();
        if (j.contains("world")) c.world = j["world"].get<std::string>();
        read_to(j, "backend", c.backend);
        if (const auto it = j.find("mock"); it != j.end()) {
            check_keys(*it, {"false_negative_rate", "withheld", "reject_create", "reject_expand", "seed"}, "mock");
            read_to(*it, "false_negative_rate", c.mock.false_negative_rate);
            read_to(*it, "withheld", c.mock.withheld);
            read_to(*it, "reject_create", c.mock.reject_create);
            read_to(*it, "reject_expand", c.mock.reject_expand);
            read_to(*it, "seed", c.mock.seed);
        }
        if (const auto it = j.find("http"); it != j.end()) {
            check_keys(*it, {"architect", "annotator"}, "http");
            if (it->contains("architect")) c.architect_http = http_from_json((*it)["architect"], c.architect_http, "http.architect");
            if (it->contains("annotator")) c.annotator_http = http_from_json((*it)["annotator"], c.annotator_http, "http.annotator");
        }
        if (const auto it = j.find("embedding"); it != j.end()) {
            check_keys(*it, {"provider", "dim", "endpoint", "path", "model", "api_key_env"}, "embedding");
            read_to(*it, "provider", c.embedding);
            read_to(*it, "dim", c.embedding_dim);
            c.embedding_http.dim = c.embedding_dim;
            read_to(*it, "endpoint", c.embedding_http.endpoint);
            read_to(*it, "path", c.embedding_http.path);
            read_to(*it, "model", c.embedding_http.model);
            read_to(*it, "api_key_env", c.embedding_http.api_key_env);
        }
        if (const auto it = j.find("gateway"); it != j.end()) {
            check_keys(*it,
                       {"max_retries", "backoff_initial_ms", "backoff_max_ms", "max_calls", "max_in_flight", "max_reasks",
                        "transcript", "architect_temperature", "annotator_temperature"},
                       "gateway");
            read_to(*it, "max_retries", c.gateway.max_retries);
            read_to(*it, "backoff_initial_ms", c.gateway.backoff_initial_ms);
            read_to(*it, "backoff_max_ms", c.gateway.backoff_max_ms);
            read_to(*it, "max_calls", c.gateway.max_calls);
            read_to(*it, "max_in_flight", c.gateway.max_in_flight);
            read_to(*it, "max_reasks", c.gateway.max_reasks);
            if (it->contains("transcript")) c.gateway.transcript_path = (*it)["transcript"].get<std::string>();
            read_to(*it, "architect_temperature", c.gateway.architect_params.temperature);
            read_to(*it, "annotator_temperature", c.gateway.annotator_params.temperature);
        }
        if (j.contains("build")) c.build = BuildConfig::from_json(j["build"]);
        if (const auto it = j.find("assign"); it != j.end()) {
            check_keys(*it, {"mode"}, "assign");
            const std::string m = it->value("mode", std::string("per-level"));
            if (m != "per-level" && m != "one-shot") throw Error(ErrorCode::InvalidConfig, "assign.mode " + m);
            c.assign_mode = m == "per-level" ? AssignMode::PerLevel : AssignMode::OneShot;
        }
        if (const auto it = j.find("surrogate"); it != j.end()) {
            check_keys(*it, {"order", "alpha"}, "surrogate");
            read_to(*it, "order", c.order);
            read_to(*it, "alpha", c.alpha);
        }
        if (const auto it = j.find("decode"); it != j.end()) {
            check_keys(*it, {"beam", "top_k"}, "decode");
            read_to(*it, "beam", c.beam);
            read_to(*it, "top_k", c.top_k);
        }
        if (const auto it = j.find("eval"); it != j.end()) {
            check_keys(*it, {"mode", "n_negatives", "ks", "seed"}, "eval");
            const std::string m = it->value("mode", std::string("full-rank"));
            if (m != "full-rank" && m != "sampled") throw Error(ErrorCode::InvalidConfig, "eval.mode " + m);
            c.eval.mode = m == "full-rank" ? EvalMode::FullRank : EvalMode::Sampled;
            read_to(*it, "n_negatives", c.eval.n_negatives);
            read_to(*it, "ks", c.eval.ks);
            read_to(*it, "seed", c.eval.seed);
        }
        if (const auto it = j.find("critique"); it != j.end()) {
            check_keys(*it, {"simulator", "k_siblings", "fallback"}, "critique");
            const std::string m = it->value("simulator", std::string("oracle"));
            if (m != "oracle" && m != "llm") throw Error(ErrorCode::InvalidConfig, "critique.simulator " + m);
            c.critique.mode = m == "oracle" ? SimulatorMode::Oracle : SimulatorMode::Llm;
            read_to(*it, "k_siblings", c.critique.k_siblings);
            read_to(*it, "fallback", c.critique.fallback);
        }
        if (const auto it = j.find("freeform"); it != j.end()) {
            check_keys(*it, {"n_tags", "min_f", "max_f", "n_bins", "kmeans_k"}, "freeform");
            read_to(*it, "n_tags", c.freeform.n_tags);
            read_to(*it, "min_f", c.min_f);
            read_to(*it, "max_f", c.max_f);
            read_to(*it, "n_bins", c.n_bins);
            read_to(*it, "kmeans_k", c.kmeans_k);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    const json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, path.string() + " is not valid JSON");
    return from_json(j);
}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
    config_.validate();
    fs::create_directories(config_.run_dir / "reports");
    const fs::path lock = config_.run_dir / ".lock";
    lock_fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (lock_fd_ < 0) throw Error(ErrorCode::Io, "cannot open " + lock.string());
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
        throw Error(ErrorCode::Locked, config_.run_dir.string() + " is in use by another process");
    }
    config_.eval.parallelism = config_.build.parallelism;
    config_.freeform.parallelism = config_.build.parallelism;
    config_.freeform.char_budget = config_.build.char_budget;
    config_.critique.char_budget = config_.build.char_budget;
    write_config();
}

Pipeline::~Pipeline() {
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

void Pipeline::write_config() const { write_file_atomic(dir() / "config.json", config_.to_json().dump(2) + "\n"); }

Gateway& Pipeline::gateway() {
    if (gateway_) return *gateway_;
    std::shared_ptr<Backend> architect;
    std::shared_ptr<Backend> annotator;
    if (config_.backend == "mock") {
        if (config_.world.empty()) throw Error(ErrorCode::InvalidConfig, "mock backend needs a planted world file");
        world_ = std::make_shared<PlantedWorld>(PlantedWorld::load(config_.world));
        auto mock = std::make_shared<MockBackend>(world_, config_.mock);
        architect = mock;
        annotator = mock;
    } else {
        architect = std::make_shared<HttpChatBackend>(config_.architect_http);
        annotator = std::make_shared<HttpChatBackend>(config_.annotator_http);
    }
    gateway_ = std::make_unique<Gateway>(config_.gateway, architect, annotator);
    return *gateway_;
}

const EmbeddingProvider& Pipeline::provider() {
    if (provider_) return *provider_;
    if (config_.embedding == "hashing") {
        provider_ = std::make_unique<HashingProvider>(config_.embedding_dim);
    } else {
        auto cached = std::make_unique<CachedProvider>(std::make_shared<HttpEmbeddingProvider>(config_.embedding_http));
        if (fs::exists(dir() / "embed_cache.jsonl")) cached->load(dir() / "embed_cache.jsonl");
        provider_ = std::move(cached);
    }
    return *provider_;
}

std::string Pipeline::hash_inputs(const std::string& stage, const json& fragment,
                                  const std::vector<std::string>& files) const {
    std::uint64_t h = fnv1a64(stage);
    h = hash_combine(h, fnv1a64(fragment.dump()));
    for (const auto& f : files) h = hash_combine(h, file_hash(dir() / f));
    return hex16(h);
}

bool Pipeline::up_to_date(const std::string& stage, const std::string& hash,
                          const std::vector<std::string>& outputs) const {
    const fs::path m = dir() / "manifest.json";
    if (!fs::exists(m)) return false;
    const json j = json::parse(read_file(m), nullptr, false);
    if (j.is_discarded() || !j.contains(stage) || j[stage].value("hash", std::string()) != hash) return false;
    for (const auto& o : outputs) {
        if (!fs::exists(dir() / o)) return false;
    }
    return true;
}

void Pipeline::mark_done(const std::string& stage, const std::string& hash) {
    const fs::path m = dir() / "manifest.json";
    json j = json::object();
    if (fs::exists(m)) {
        j = json::parse(read_file(m), nullptr, false);
        if (j.is_discarded()) j = json::object();
    }
    j[stage] = {{"hash", hash}};
    write_file_atomic(m, j.dump(2) + "\n");
}

void Pipeline::log_calls(const std::string& stage, const CallLedger& calls) {
    append_line(dir() / "ledger.jsonl",
                json{{"event", "stage_calls"}, {"stage", stage}, {"total", calls.total_calls()}, {"calls", calls.to_json()}}
                    .dump());
}

RunConfig Pipeline::plant(const fs::path& out, const PlantedWorldConfig& wc, const fs::path& run_dir) {
    fs::create_directories(out);
    const PlantedWorld world = PlantedWorld::generate(wc);
    world.save(out / "world.json");
    write_corpus(world.corpus(), out / "items.jsonl");
    write_interactions(world.interactions(), out / "interactions.jsonl");
    RunConfig c;
    c.items = out / "items.jsonl";
    c.interactions = out / "interactions.jsonl";
    c.world = out / "world.json";
    c.run_dir = run_dir;
    write_file_atomic(out / "config.json", c.to_json().dump(2) + "\n");
    return c;
}

StageResult Pipeline::ingest() {
    StageResult r{"ingest"};
    if (config_.items.empty()) throw Error(ErrorCode::InvalidConfig, "config.items is not set");
    std::uint64_t h = hash_combine(fnv1a64("ingest"), file_hash(config_.items));
    if (!config_.interactions.empty()) h = hash_combine(h, file_hash(config_.interactions));
    const std::string hash = hex16(h);
    const std::vector<std::string> outputs = {"corpus.jsonl"};
    if (up_to_date(r.stage, hash, outputs)) {
        r.skipped = true;
        return r;
    }
    auto loaded = load_corpus(config_.items);
    write_corpus(loaded.corpus, dir() / "corpus.jsonl");
    r.summary["items"] = loaded.report.loaded;
    if (!config_.interactions.empty()) {
        auto inter = load_interactions(config_.interactions, loaded.corpus);
        write_interactions(inter.interactions, dir() / "interactions.jsonl");
        const SplitDataset split = last_out_split(inter.interactions);
        write_splits(split, dir() / "splits.jsonl");
        r.summary["interactions"] = inter.interactions.size();
        r.summary["users"] = split.test.size();
        r.summary["excluded_users"] = split.excluded_users;
    }
    write_file_atomic(dir() / "reports" / "ingest.json", r.summary.dump(2) + "\n");
    mark_done(r.stage, hash);
    return r;
}

namespace {

json backend_fragment(const RunConfig& c) {
    json j = c.to_json();
    json b = {{"backend", j["backend"]}, {"embedding", j["embedding"]}};
    if (c.backend == "mock") {
        b["mock"] = j["mock"];
        b["world"] = c.world.empty() || !fs::exists(c.world) ? std::string() : hex16(file_hash(c.world));
    } else {
        b["architect"] = c.architect_http.model;
        b["annotator"] = c.annotator_http.model;
    }
    return b;
}

json build_fragment(const RunConfig& c) {
    json b = c.build.to_json();
    b.erase("parallelism");
    return b;
}

}  // namespace

StageResult Pipeline::build_vocab(bool resume, std::optional<std::size_t> kill_after) {
    StageResult r{resume ? "resume" : "build-vocab"};
    require(dir() / "corpus.jsonl", "ingest");
    const json fragment = {{"build", build_fragment(config_)}, {"backend", backend_fragment(config_)}};
    const std::string hash = hash_inputs("build-vocab", fragment, {"corpus.jsonl"});
    const std::vector<std::string> outputs = {"vocab.json", "node_items.jsonl"};
    if (!resume && up_to_date("build-vocab", hash, outputs)) {
        r.skipped = true;
        return r;
    }
    if (!resume) {
        // A fresh build starts a fresh ledger; the old one is kept aside.
        fs::remove(dir() / "checkpoint.json");
        if (fs::exists(dir() / "ledger.jsonl")) fs::rename(dir() / "ledger.jsonl", dir() / "ledger.prev.jsonl");
    }
    const Corpus corpus = load_corpus(dir() / "corpus.jsonl").corpus;
    BuildOptions options;
    options.checkpoint_dir = dir();
    options.resume = resume;
    if (kill_after) {
        options.on_commit = [n = *kill_after](std::size_t committed) {
            if (committed >= n) std::raise(SIGKILL);
        };
    }
    Gateway& gw = gateway();
    const EmbeddingProvider& emb = provider();
    BuildResult built;
    try {
        built = build_vocabulary(corpus, config_.build, gw, emb, options);
    } catch (...) {
        log_calls(r.stage, gw.ledger());
        throw;
    }
    built.tree.save(dir() / "vocab.json", dir() / "node_items.jsonl");
    json logs = json::array();
    std::string lines;
    for (const auto& l : built.logs) {
        logs.push_back(l.to_json());
        lines += l.to_jsonl();
    }
    write_file_atomic(dir() / "reports" / "refinement_logs.json", logs.dump(1) + "\n");
    write_file_atomic(dir() / "reports" / "refinement.jsonl", lines);
    log_calls(r.stage, gw.ledger());
    if (auto* cached = dynamic_cast<CachedProvider*>(provider_.get())) cached->save(dir() / "embed_cache.jsonl");
    r.summary = built.report.to_json();
    r.summary["nodes"] = built.tree.size();
    r.summary["depth"] = built.tree.max_depth();
    r.summary["descriptors"] = built.tree.n_descriptors();
    r.summary["calls"] = gw.ledger().total_calls();
    r.summary["duplicate_commits"] = duplicate_commits(dir() / "ledger.jsonl");
    write_file_atomic(dir() / "reports" / "build.json", r.summary.dump(2) + "\n");
    mark_done("build-vocab", hash);
    return r;
}

StageResult Pipeline::assign() {
    StageResult r{"assign"};
    require(dir() / "vocab.json", "build-vocab");
    const json fragment = {{"mode", assign_mode_name(config_.assign_mode)},
                           {"char_budget", config_.build.char_budget},
                           {"backend", backend_fragment(config_)}};
    const std::string hash = hash_inputs(r.stage, fragment, {"corpus.jsonl", "vocab.json", "node_items.jsonl"});
    if (up_to_date(r.stage, hash, {"assignments.jsonl"})) {
        r.skipped = true;
        return r;
    }
    const Corpus corpus = load_corpus(dir() / "corpus.jsonl").corpus;
    const VocabularyTree tree = VocabularyTree::load(dir() / "vocab.json", dir() / "node_items.jsonl");
    AssignOptions options;
    options.mode = config_.assign_mode;
    options.parallelism = config_.build.parallelism;
    options.char_budget = config_.build.char_budget;
    Gateway& gw = gateway();
    CallLedger scope;
    auto records = resolve_collisions(assign_paths(corpus, tree, gw, options, &scope));
    write_assignments(records, dir() / "assignments.jsonl");
    log_calls(r.stage, scope);
    const VocabStats stats = vocab_stats(records, tree);
    r.summary = stats.to_json();
    r.summary["calls"] = scope.total_calls();
    write_file_atomic(dir() / "reports" / "vocab_stats.json", r.summary.dump(2) + "\n");
    mark_done(r.stage, hash);
    return r;
}

StageResult Pipeline::encode() {
    StageResult r{"encode"};
    require(dir() / "assignments.jsonl", "assign");
    const std::string hash = hash_inputs(r.stage, json::object(), {"assignments.jsonl", "vocab.json", "node_items.jsonl"});
    if (up_to_date(r.stage, hash, {"semids.jsonl", "token_map.json"})) {
        r.skipped = true;
        return r;
    }
    const VocabularyTree tree = VocabularyTree::load(dir() / "vocab.json", dir() / "node_items.jsonl");
    const auto records = read_assignments(dir() / "assignments.jsonl");
    check_paths(records, tree);
    const SemIdTable table = export_semids(records, tree);
    table.write(dir() / "semids.jsonl", dir() / "token_map.json");
    const std::size_t slots = std::max<std::size_t>(1, tree.max_depth());
    write_fixed_slots_csv(records, export_fixed_slots(records, slots), dir() / "reports" / "slots.csv");
    r.summary = {{"items", table.rows.size()},
                 {"vocab_size", table.tokens.vocab_size()},
                 {"descriptor_tokens", table.tokens.n_descriptors()},
                 {"resolver_tokens", table.tokens.n_resolvers()}};
    mark_done(r.stage, hash);
    return r;
}

StageResult Pipeline::fit() {
    StageResult r{"fit"};
    require(dir() / "semids.jsonl", "encode");
    require(dir() / "splits.jsonl", "ingest");
    const json fragment = {{"order", config_.order}, {"alpha", config_.alpha}};
    const std::string hash = hash_inputs(r.stage, fragment, {"splits.jsonl", "semids.jsonl", "token_map.json"});
    if (up_to_date(r.stage, hash, {"model.bin"})) {
        r.skipped = true;
        return r;
    }
    const SemIdTable table = SemIdTable::read(dir() / "semids.jsonl", dir() / "token_map.json");
    const SplitDataset split = read_splits(dir() / "splits.jsonl");
    const SurrogateModel model = fit_surrogate(split, table, config_.order, config_.alpha);
    model.save(dir() / "model.bin");
    r.summary = {{"contexts", model.n_contexts()}, {"order", model.order()}, {"vocab_size", model.vocab_size()}};
    mark_done(r.stage, hash);
    return r;
}

namespace {

struct Loaded {
    SemIdTable table;
    DescriptorTrie trie;
    SurrogateModel model;
    SplitDataset split;
};

Loaded load_model(const fs::path& dir) {
    require(dir / "model.bin", "fit");
    Loaded l;
    l.table = SemIdTable::read(dir / "semids.jsonl", dir / "token_map.json");
    l.trie = DescriptorTrie::build(l.table);
    l.model = SurrogateModel::load(dir / "model.bin");
    l.split = read_splits(dir / "splits.jsonl");
    return l;
}

}  // namespace

StageResult Pipeline::recommend() {
    StageResult r{"recommend"};
    const json fragment = {{"beam", config_.beam}, {"top_k", config_.top_k}};
    require(dir() / "model.bin", "fit");
    const std::string hash = hash_inputs(r.stage, fragment, {"model.bin", "semids.jsonl", "splits.jsonl"});
    const std::string out = "reports/recommendations.jsonl";
    if (up_to_date(r.stage, hash, {out})) {
        r.skipped = true;
        return r;
    }
    const Loaded l = load_model(dir());
    const SurrogateRecommender rec(l.model, l.table, l.trie, config_.beam);
    std::vector<std::string> users;
    for (const auto& [u, _] : l.split.test) users.push_back(u);
    std::vector<std::string> rows(users.size());
    parallel_for(users.size(), config_.build.parallelism, [&](std::size_t i) {
        std::vector<std::string> history;
        if (auto t = l.split.train.find(users[i]); t != l.split.train.end()) history = t->second;
        if (auto v = l.split.valid.find(users[i]); v != l.split.valid.end()) history.push_back(v->second);
        json items = json::array();
        for (const auto& s : rec.rank(users[i], history, config_.top_k)) {
            items.push_back({{"item_id", s.item_id}, {"score", s.score}});
        }
        rows[i] = json{{"user_id", users[i]}, {"items", items}}.dump();
    });
    std::string buf;
    for (const auto& row : rows) buf += row + "\n";
    write_file_atomic(dir() / out, buf);
    r.summary = {{"users", users.size()}};
    mark_done(r.stage, hash);
    return r;
}

StageResult Pipeline::evaluate() {
    StageResult r{"evaluate"};
    require(dir() / "model.bin", "fit");
    const json fragment = {{"beam", config_.beam}, {"eval", config_.to_json()["eval"]}};
    const std::string hash = hash_inputs(r.stage, fragment, {"model.bin", "semids.jsonl", "splits.jsonl"});
    if (up_to_date(r.stage, hash, {"reports/metrics.json"})) {
        r.skipped = true;
        return r;
    }
    const Loaded l = load_model(dir());
    const SurrogateRecommender rec(l.model, l.table, l.trie, config_.beam);
    const MetricReport report = evaluate_run(rec, l.split, l.trie.items(), config_.eval);
    r.summary = report.to_json();
    r.summary["beam"] = config_.beam;
    write_file_atomic(dir() / "reports" / "metrics.json", r.summary.dump(2) + "\n");
    mark_done(r.stage, hash);
    return r;
}

StageResult Pipeline::critique_eval() {
    StageResult r{"critique-eval"};
    require(dir() / "model.bin", "fit");
    json fragment = {{"beam", config_.beam}, {"eval", config_.to_json()["eval"]}, {"critique", config_.to_json()["critique"]}};
    if (config_.critique.mode == SimulatorMode::Llm) fragment["backend"] = backend_fragment(config_);
    const std::string hash =
        hash_inputs(r.stage, fragment, {"model.bin", "semids.jsonl", "splits.jsonl", "vocab.json", "corpus.jsonl"});
    if (up_to_date(r.stage, hash, {"reports/critique.json"})) {
        r.skipped = true;
        return r;
    }
    const Loaded l = load_model(dir());
    const VocabularyTree tree = VocabularyTree::load(dir() / "vocab.json", dir() / "node_items.jsonl");
    const Corpus corpus = load_corpus(dir() / "corpus.jsonl").corpus;
    Gateway* gw = config_.critique.mode == SimulatorMode::Llm ? &gateway() : nullptr;
    const EmbeddingProvider* emb = config_.critique.k_siblings > 0 ? &provider() : nullptr;
    const CritiqueSimulator sim(tree, l.table, corpus, config_.critique, gw, emb);
    const CritiqueReport report = evaluate_critique(l.model, l.table, l.trie, l.split, sim, config_.beam, config_.eval);
    if (gw != nullptr) log_calls(r.stage, gw->ledger());
    r.summary = report.to_json();
    r.summary["simulator"] = simulator_name(config_.critique.mode);
    r.summary["beam"] = config_.beam;
    write_file_atomic(dir() / "reports" / "critique.json", r.summary.dump(2) + "\n");
    mark_done(r.stage, hash);
    return r;
}

StageResult Pipeline::baseline_freeform() {
    StageResult r{"baseline-freeform"};
    require(dir() / "corpus.jsonl", "ingest");
    const json fragment = {{"freeform", config_.to_json()["freeform"]}, {"backend", backend_fragment(config_)}};
    const std::string hash = hash_inputs(r.stage, fragment, {"corpus.jsonl"});
    if (up_to_date(r.stage, hash, {"freeform_tags.jsonl", "reports/freeform.json"})) {
        r.skipped = true;
        return r;
    }
    const Corpus corpus = load_corpus(dir() / "corpus.jsonl").corpus;
    Gateway& gw = gateway();
    CallLedger scope;
    const FreeformTagTable table = generate_freeform(corpus, gw, config_.freeform, &scope);
    table.write(dir() / "freeform_tags.jsonl");
    log_calls(r.stage, scope);
    r.summary = {{"items", table.tags.size()},
                 {"failed", table.n_failed},
                 {"distinct_tags", table.frequency.size()},
                 {"utilization", utilization(table.frequency)},
                 {"calls", scope.total_calls()}};
    try {
        const FrequencyBins bins = prune_frequency_bins(table, config_.min_f, config_.max_f, config_.n_bins);
        write_pruned_bins(bins, dir() / "reports" / "freeform_bins.jsonl");
        r.summary["bins_eligible_tags"] = bins.ranked.size();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyInput) throw;
        r.summary["bins_eligible_tags"] = 0;
    }
    if (config_.kmeans_k > 0) {
        const KMeansTags km = prune_kmeans(table, provider(), config_.kmeans_k, config_.build.seed);
        write_pruned_kmeans(km, dir() / "reports" / "freeform_kmeans.jsonl");
        r.summary["kmeans_k"] = km.k;
    }
    if (fs::exists(dir() / "assignments.jsonl") && fs::exists(dir() / "vocab.json")) {
        const VocabularyTree tree = VocabularyTree::load(dir() / "vocab.json", dir() / "node_items.jsonl");
        r.summary["pipeline_utilization"] = vocab_stats(read_assignments(dir() / "assignments.jsonl"), tree).utilization;
    }
    write_file_atomic(dir() / "reports" / "freeform.json", r.summary.dump(2) + "\n");
    mark_done(r.stage, hash);
    return r;
}

StageResult Pipeline::report() {
    StageResult r{"report"};
    json summary = json::object();
    for (const char* name : {"ingest", "build", "vocab_stats", "metrics", "critique", "freeform"}) {
        const fs::path p = dir() / "reports" / (std::string(name) + ".json");
        if (fs::exists(p)) summary[name] = json::parse(read_file(p));
    }
    const fs::path logs_path = dir() / "reports" / "refinement_logs.json";
    if (fs::exists(logs_path)) {
        std::vector<RefinementLog> logs;
        for (const auto& l : json::parse(read_file(logs_path))) logs.push_back(RefinementLog::from_json(l));
        const auto rows = coverage_report(logs);
        write_coverage_csv(rows, dir() / "reports" / "coverage_delta.csv");
        std::vector<double> deltas;
        for (const auto& row : rows) deltas.push_back(row.delta);
        summary["coverage_deltas"] = {{"rows", rows.size()},
                                      {"median", deltas.empty() ? 0.0 : median(deltas)},
                                      {"min", deltas.empty() ? 0.0 : *std::min_element(deltas.begin(), deltas.end())}};
    }
    if (fs::exists(dir() / "ledger.jsonl")) {
        std::uint64_t total = 0;
        std::size_t commits = 0;
        for_each_line(dir() / "ledger.jsonl", [&](std::string_view line, std::size_t) {
            const json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) return;
            if (j.value("event", std::string()) == "stage_calls") total += j.value("total", std::uint64_t{0});
            if (j.value("event", std::string()) == "node_committed") ++commits;
        });
        summary["ledger"] = {{"calls", total},
                             {"node_commits", commits},
                             {"duplicate_commits", duplicate_commits(dir() / "ledger.jsonl")}};
    }
    write_file_atomic(dir() / "reports" / "summary.json", summary.dump(2) + "\n");
    r.summary = summary;
    return r;
}

}  // namespace semtag
