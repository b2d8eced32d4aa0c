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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semtag {

/// Dense row-major matrix of embeddings (one row per input).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
};

/// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
    /// One row per text, in input order. Rows are finite and have length dim().
    virtual Matrix embed_batch(std::span<const std::string> texts) const = 0;
};

/// Offline feature-hashing embedder: each token adds 1 to bucket
/// fnv1a64(token) mod dim, then the vector is L2-normalized. Texts without
/// tokens map to a fixed sentinel bucket so every output has unit norm.
class HashingProvider final : public EmbeddingProvider {
public:
    explicit HashingProvider(std::size_t dim = 256, std::uint64_t salt = 0);

    std::string name() const override { return "hashing"; }
    std::size_t dim() const override { return dim_; }
    Matrix embed_batch(std::span<const std::string> texts) const override;

    std::size_t bucket_of(std::string_view token) const noexcept;

private:
    std::size_t dim_;
    std::uint64_t salt_;
};

/// Memoizing wrapper with an optional JSONL cache file of
/// {"text_hash": "<16 hex>", "vector": [...]}.
class CachedProvider final : public EmbeddingProvider {
public:
    explicit CachedProvider(std::shared_ptr<const EmbeddingProvider> inner);

    std::string name() const override { return inner_->name(); }
    std::size_t dim() const override { return inner_->dim(); }
    Matrix embed_batch(std::span<const std::string> texts) const override;

    void load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::size_t cached() const;

private:
    std::shared_ptr<const EmbeddingProvider> inner_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::uint64_t, std::vector<double>> cache_;
};

struct HttpEmbeddingConfig {
    std::string endpoint;  // scheme://host[:port]
    std::string path = "/v1/embeddings";
    std::string model;
    std::string api_key_env;
    std::string auth_header = "Authorization";
    std::size_t dim = 0;
    int timeout_s = 60;
};

/// Remote embedder speaking {"model", "input": [..]} -> {"data": [{"embedding": [..]}]}.
/// Rows are L2-normalized on receipt.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);

    std::string name() const override { return "http:" + config_.model; }
    std::size_t dim() const override { return config_.dim; }
    Matrix embed_batch(std::span<const std::string> texts) const override;

private:
    HttpEmbeddingConfig config_;
};

/// Normalizes a row in place; zero rows are left as-is and reported false.
bool l2_normalize(std::span<double> v) noexcept;

}  // namespace semtag
