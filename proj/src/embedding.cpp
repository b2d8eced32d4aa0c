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

#include "semtag/embedding.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "semtag/error.hpp"
#include "semtag/hash.hpp"
#include "semtag/http.hpp"
#include "semtag/simd.hpp"

namespace semtag {

using nlohmann::json;

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols) {
            throw Error(ErrorCode::InvalidArgument, "ragged rows in matrix");
        }
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool l2_normalize(std::span<double> v) noexcept {
    const double norm = std::sqrt(simd::dot(v, v));
    if (!(norm > 0.0) || !std::isfinite(norm)) return false;
    for (double& x : v) x /= norm;
    return true;
}

HashingProvider::HashingProvider(std::size_t dim, std::uint64_t salt) : dim_(dim), salt_(salt) {
    if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
}

std::size_t HashingProvider::bucket_of(std::string_view token) const noexcept {
    return static_cast<std::size_t>(mix64(fnv1a64(token) ^ salt_) % dim_);
}

Matrix HashingProvider::embed_batch(std::span<const std::string> texts) const {
    if (texts.empty()) throw Error(ErrorCode::EmptyInput, "embed_batch: no texts");
    Matrix out(texts.size(), dim_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto row = out.row(i);
        const auto tokens = tokenize(texts[i]);
        if (tokens.empty()) {
            row[bucket_of("\x01<empty>")] = 1.0;
            continue;
        }
        for (const auto& t : tokens) row[bucket_of(t)] += 1.0;
        l2_normalize(row);
    }
    return out;
}

CachedProvider::CachedProvider(std::shared_ptr<const EmbeddingProvider> inner)
    : inner_(std::move(inner)) {}

Matrix CachedProvider::embed_batch(std::span<const std::string> texts) const {
    if (texts.empty()) throw Error(ErrorCode::EmptyInput, "embed_batch: no texts");
    Matrix out(texts.size(), dim());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_pos;
    {
        std::lock_guard lock(mu_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = cache_.find(fnv1a64(texts[i]));
            if (it != cache_.end()) {
                std::copy(it->second.begin(), it->second.end(), out.row(i).begin());
            } else {
                missing.push_back(texts[i]);
                missing_pos.push_back(i);
            }
        }
    }
    if (!missing.empty()) {
        const Matrix fresh = inner_->embed_batch(missing);
        std::lock_guard lock(mu_);
        for (std::size_t j = 0; j < missing.size(); ++j) {
            const auto r = fresh.row(j);
            std::copy(r.begin(), r.end(), out.row(missing_pos[j]).begin());
            cache_[fnv1a64(missing[j])] = std::vector<double>(r.begin(), r.end());
        }
    }
    return out;
}

void CachedProvider::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::lock_guard lock(mu_);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("text_hash") || !j.contains("vector")) continue;
        auto vec = j["vector"].get<std::vector<double>>();
        if (vec.size() != dim()) continue;
        cache_[std::stoull(j["text_hash"].get<std::string>(), nullptr, 16)] = std::move(vec);
    }
}

void CachedProvider::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write embedding cache " + path.string());
    std::lock_guard lock(mu_);
    std::vector<std::uint64_t> keys;
    keys.reserve(cache_.size());
    for (const auto& [k, _] : cache_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (auto k : keys) {
        out << json{{"text_hash", hex16(k)}, {"vector", cache_.at(k)}}.dump() << '\n';
    }
}

std::size_t CachedProvider::cached() const {
    std::lock_guard lock(mu_);
    return cache_.size();
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty() || config_.dim == 0) {
        throw Error(ErrorCode::InvalidConfig, "http embedding provider needs endpoint and dim");
    }
}

Matrix HttpEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
    if (texts.empty()) throw Error(ErrorCode::EmptyInput, "embed_batch: no texts");
    json body{{"model", config_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    std::vector<std::pair<std::string, std::string>> headers;
    const std::string key = credential_from_env(config_.api_key_env);
    if (!key.empty()) {
        headers.emplace_back(config_.auth_header,
                             config_.auth_header == "Authorization" ? "Bearer " + key : key);
    }
    const HttpResult res = http_post_json(config_.endpoint, config_.path, headers, body.dump(), config_.timeout_s);
    if (res.status != 200) {
        throw Error(ErrorCode::Transport, "embedding request failed: status " + std::to_string(res.status) +
                                              (res.error.empty() ? "" : " (" + res.error + ")"));
    }
    const json j = json::parse(res.body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || j["data"].size() != texts.size()) {
        throw Error(ErrorCode::Schema, "embedding response malformed");
    }
    Matrix out(texts.size(), config_.dim);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto vec = j["data"][i].at("embedding").get<std::vector<double>>();
        if (vec.size() != config_.dim) throw Error(ErrorCode::Schema, "embedding dim mismatch");
        for (double x : vec) {
            if (!std::isfinite(x)) throw Error(ErrorCode::Schema, "non-finite embedding value");
        }
        std::copy(vec.begin(), vec.end(), out.row(i).begin());
        l2_normalize(out.row(i));
    }
    return out;
}

}  // namespace semtag
