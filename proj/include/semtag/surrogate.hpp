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
#include <span>
#include <string>
#include <map>
#include <vector>

#include "semtag/assignment.hpp"
#include "semtag/corpus.hpp"

namespace semtag {

/// BOS s1 SEP s2 SEP ... sN, each s carrying its EOS. With `open` a trailing
/// SEP is added so the stream is a decoding prefix for the next item.
/// Throws UnknownItem for an item without a semantic id.
std::vector<int> encode_stream(const SemIdTable& table, std::span<const std::string> items, bool open);

/// Order-m token n-gram counts with additive smoothing:
///   p(t | c) = (n(c, t) + alpha) / (n(c) + alpha * V)
/// over the last m-1 tokens (left-padded with BOS). A context never seen with
/// alpha = 0 falls back to the uniform distribution.
class SurrogateModel {
public:
    struct Row {
        std::uint64_t total = 0;
        std::map<int, std::uint64_t> next;

        bool operator==(const Row&) const = default;
    };

    SurrogateModel() = default;
    SurrogateModel(std::size_t order, double alpha, std::size_t vocab_size);

    /// Adds every position of a stream.
    void observe(std::span<const int> stream);

    std::size_t order() const noexcept { return order_; }
    double alpha() const noexcept { return alpha_; }
    std::size_t vocab_size() const noexcept { return vocab_size_; }
    std::size_t n_contexts() const noexcept { return rows_.size(); }

    /// Context key from the tail of `history` (m-1 tokens, BOS padded).
    std::vector<int> context_of(std::span<const int> history) const;
    /// nullptr for an unseen context.
    const Row* row(std::span<const int> context) const;

    double prob(std::span<const int> context, int token) const;
    double log_prob(std::span<const int> context, int token) const;
    /// Row-wise form of prob(); `r` may be nullptr.
    double prob(const Row* r, int token) const;
    std::vector<double> distribution(std::span<const int> context) const;

    /// Sum of log p over `continuation` given `prefix`, token by token.
    double sequence_log_prob(std::span<const int> prefix, std::span<const int> continuation) const;

    /// Binary file: magic "SEMTAGNG", u32 version, then tables.
    void save(const std::filesystem::path& path) const;
    static SurrogateModel load(const std::filesystem::path& path);

    bool operator==(const SurrogateModel&) const = default;

private:
    std::size_t order_ = 3;
    double alpha_ = 0.1;
    std::size_t vocab_size_ = 0;
    std::map<std::vector<int>, Row> rows_;
};

/// Counts the train split only. Throws EmptyInput without training users,
/// UnknownItem for a train item lacking a semantic id.
SurrogateModel fit_surrogate(const SplitDataset& split, const SemIdTable& table, std::size_t order = 3,
                             double alpha = 0.1);

}  // namespace semtag
