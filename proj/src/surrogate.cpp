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


#include "semtag/surrogate.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "semtag/error.hpp"

namespace semtag {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'T', 'A', 'G', 'N', 'G'};
constexpr std::uint32_t kModelVersion = 1;

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

struct Reader {
    const std::string& data;
    std::size_t pos = 0;

    template <class T>
    T get() {
        if (pos + sizeof(T) > data.size()) throw Error(ErrorCode::Parse, "truncated model file");
        T v;
        std::memcpy(&v, data.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
};

}  // namespace

std::vector<int> encode_stream(const SemIdTable& table, std::span<const std::string> items, bool open) {
    std::vector<int> out{kBos};
    for (std::size_t i = 0; i < items.size(); ++i) {
        const SemId* s = table.find(items[i]);
        if (s == nullptr) throw Error(ErrorCode::UnknownItem, "no semantic id for " + items[i]);
        if (i > 0) out.push_back(kSep);
        out.insert(out.end(), s->tokens.begin(), s->tokens.end());
    }
    if (open && !items.empty()) out.push_back(kSep);
    return out;
}

SurrogateModel::SurrogateModel(std::size_t order, double alpha, std::size_t vocab_size)
    : order_(order), alpha_(alpha), vocab_size_(vocab_size) {
    if (order < 1) throw Error(ErrorCode::InvalidArgument, "n-gram order must be >= 1");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
    if (vocab_size == 0) throw Error(ErrorCode::InvalidArgument, "empty token vocabulary");
}

std::vector<int> SurrogateModel::context_of(std::span<const int> history) const {
    const std::size_t n = order_ - 1;
    std::vector<int> ctx(n, kBos);
    const std::size_t take = std::min(n, history.size());
    std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(), ctx.end() - static_cast<std::ptrdiff_t>(take));
    return ctx;
}

void SurrogateModel::observe(std::span<const int> stream) {
    // Position 0 is BOS and never predicted.
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (stream[i] < 0 || static_cast<std::size_t>(stream[i]) >= vocab_size_) {
            throw Error(ErrorCode::InvalidArgument, "token " + std::to_string(stream[i]) + " outside the vocabulary");
        }
        Row& r = rows_[context_of(stream.first(i))];
        ++r.total;
        ++r.next[stream[i]];
    }
}

const SurrogateModel::Row* SurrogateModel::row(std::span<const int> context) const {
    auto it = rows_.find(std::vector<int>(context.begin(), context.end()));
    return it == rows_.end() ? nullptr : &it->second;
}

double SurrogateModel::prob(const Row* r, int token) const {
    const double v = static_cast<double>(vocab_size_);
    const double total = r == nullptr ? 0.0 : static_cast<double>(r->total);
    const double denom = total + alpha_ * v;
    if (denom <= 0.0) return 1.0 / v;
    double count = 0.0;
    if (r != nullptr) {
        auto it = r->next.find(token);
        if (it != r->next.end()) count = static_cast<double>(it->second);
    }
    return (count + alpha_) / denom;
}

double SurrogateModel::prob(std::span<const int> context, int token) const { return prob(row(context), token); }

double SurrogateModel::log_prob(std::span<const int> context, int token) const {
    return std::log(prob(context, token));
}

std::vector<double> SurrogateModel::distribution(std::span<const int> context) const {
    const Row* r = row(context);
    std::vector<double> out(vocab_size_);
    for (std::size_t t = 0; t < vocab_size_; ++t) out[t] = prob(r, static_cast<int>(t));
    return out;
}

double SurrogateModel::sequence_log_prob(std::span<const int> prefix, std::span<const int> continuation) const {
    std::vector<int> hist(prefix.begin(), prefix.end());
    double total = 0.0;
    for (int tok : continuation) {
        total += std::log(prob(context_of(hist), tok));
        hist.push_back(tok);
    }
    return total;
}

void SurrogateModel::save(const std::filesystem::path& path) const {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kModelVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(order_));
    put<double>(out, alpha_);
    put<std::uint64_t>(out, vocab_size_);
    put<std::uint64_t>(out, rows_.size());
    for (const auto& [ctx, r] : rows_) {
        for (int t : ctx) put<std::int32_t>(out, t);
        put<std::uint64_t>(out, r.total);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(r.next.size()));
        for (const auto& [t, c] : r.next) {
            put<std::int32_t>(out, t);
            put<std::uint64_t>(out, c);
        }
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
    const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorCode::Parse, path.string() + " is not a surrogate model");
    }
    Reader in{data, sizeof(kMagic)};
    if (const auto v = in.get<std::uint32_t>(); v != kModelVersion) {
        throw Error(ErrorCode::Parse, "unsupported model version " + std::to_string(v));
    }
    const auto order = in.get<std::uint32_t>();
    const auto alpha = in.get<double>();
    const auto vocab = in.get<std::uint64_t>();
    SurrogateModel m(order, alpha, vocab);
    const auto n_rows = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_rows; ++i) {
        std::vector<int> ctx(order - 1);
        for (auto& t : ctx) t = in.get<std::int32_t>();
        Row r;
        r.total = in.get<std::uint64_t>();
        const auto n = in.get<std::uint32_t>();
        for (std::uint32_t k = 0; k < n; ++k) {
            const int t = in.get<std::int32_t>();
            r.next[t] = in.get<std::uint64_t>();
        }
        m.rows_.emplace(std::move(ctx), std::move(r));
    }
    if (in.pos != data.size()) throw Error(ErrorCode::Parse, "trailing bytes in " + path.string());
    return m;
}

SurrogateModel fit_surrogate(const SplitDataset& split, const SemIdTable& table, std::size_t order, double alpha) {
    SurrogateModel m(order, alpha, table.tokens.vocab_size());
    std::size_t users = 0;
    for (const auto& [user, items] : split.train) {
        if (items.empty()) continue;
        m.observe(encode_stream(table, items, false));
        ++users;
    }
    if (users == 0) throw Error(ErrorCode::EmptyInput, "no training histories");
    return m;
}

}  // namespace semtag
