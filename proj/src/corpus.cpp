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

#include "semtag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "semtag/error.hpp"
#include "semtag/io.hpp"

namespace semtag {

using nlohmann::json;

void Corpus::add(Item item) {
    if (item.item_id.empty()) throw Error(ErrorCode::InvalidArgument, "item_id must be non-empty");
    if (item.title.empty() && item.body.empty()) {
        throw Error(ErrorCode::InvalidArgument, "item " + item.item_id + " has no text");
    }
    if (index_.contains(item.item_id)) {
        throw Error(ErrorCode::DuplicateId, "duplicate item_id " + item.item_id);
    }
    index_.emplace(item.item_id, items_.size());
    items_.push_back(std::move(item));
}

std::optional<std::size_t> Corpus::position(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const Item& Corpus::find(std::string_view id) const {
    const auto pos = position(id);
    if (!pos) throw Error(ErrorCode::UnknownItem, "unknown item_id " + std::string(id));
    return items_[*pos];
}

namespace {

std::string as_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    return v.dump();
}

Item item_from_json(const json& j, const CorpusLoadOptions& options) {
    if (!j.is_object()) throw Error(ErrorCode::Schema, "line is not a JSON object");
    if (!j.contains("item_id") || !j["item_id"].is_string()) {
        throw Error(ErrorCode::Schema, "missing string item_id");
    }
    Item item;
    item.item_id = j["item_id"].get<std::string>();
    if (j.contains(options.title_field)) item.title = as_text(j[options.title_field]);
    for (const auto& field : options.body_fields) {
        if (!j.contains(field)) continue;
        const std::string part = as_text(j[field]);
        if (part.empty()) continue;
        if (!item.body.empty()) item.body += '\n';
        item.body += part;
    }
    if (j.contains("extras") && j["extras"].is_object()) {
        for (const auto& [k, v] : j["extras"].items()) item.extras[k] = as_text(v);
    }
    if (item.item_id.empty()) throw Error(ErrorCode::Schema, "empty item_id");
    if (item.title.empty() && item.body.empty()) throw Error(ErrorCode::Schema, "no text field");
    return item;
}

}  // namespace

CorpusLoad load_corpus(const std::filesystem::path& path, const CorpusLoadOptions& options) {
    CorpusLoad out;
    std::unordered_map<std::string, std::size_t> first_line;
    for_each_line(path, [&](std::string_view line, std::size_t no) {
        ++out.report.lines;
        Item item;
        try {
            const json j = json::parse(line);
            item = item_from_json(j, options);
        } catch (const std::exception& e) {
            if (options.strict) {
                throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(no) + ": " + e.what());
            }
            ++out.report.skipped_malformed;
            return;
        }
        if (auto it = first_line.find(item.item_id); it != first_line.end()) {
            throw Error(ErrorCode::DuplicateId, "duplicate item_id '" + item.item_id + "' at line " +
                                                    std::to_string(no) + " (first seen at line " +
                                                    std::to_string(it->second) + ")");
        }
        first_line.emplace(item.item_id, no);
        out.corpus.add(std::move(item));
    });
    out.report.loaded = out.corpus.size();
    if (out.corpus.empty()) throw Error(ErrorCode::EmptyInput, "no valid items in " + path.string());
    return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::string buf;
    for (const auto& item : corpus.items()) {
        json j{{"item_id", item.item_id}, {"title", item.title}, {"body", item.body}};
        j["extras"] = json::object();
        for (const auto& [k, v] : item.extras) j["extras"][k] = v;
        buf += j.dump();
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

std::string item_prompt_text(const Item& item, std::size_t char_budget) {
    std::string text = item.title;
    if (!item.body.empty()) {
        if (!text.empty()) text += '\n';
        text += item.body;
    }
    if (text.size() <= char_budget) return text;
    std::size_t cut = char_budget;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    text.resize(cut);
    return text;
}

InteractionLoad load_interactions(const std::filesystem::path& path, const Corpus& corpus, bool strict) {
    InteractionLoad out;
    for_each_line(path, [&](std::string_view line, std::size_t no) {
        ++out.report.lines;
        Interaction it;
        try {
            const json j = json::parse(line);
            it.user_id = j.at("user_id").get<std::string>();
            it.item_id = j.at("item_id").get<std::string>();
            it.timestamp = j.at("timestamp").get<std::int64_t>();
        } catch (const std::exception& e) {
            if (strict) throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(no) + ": " + e.what());
            ++out.report.skipped_malformed;
            return;
        }
        if (!corpus.empty() && !corpus.contains(it.item_id)) {
            if (strict) {
                throw Error(ErrorCode::UnknownItem, path.string() + ":" + std::to_string(no) +
                                                        ": unknown item_id " + it.item_id);
            }
            ++out.report.dropped_unknown;
            return;
        }
        out.interactions.push_back(std::move(it));
    });
    std::stable_sort(out.interactions.begin(), out.interactions.end(), [](const auto& a, const auto& b) {
        if (a.user_id != b.user_id) return a.user_id < b.user_id;
        return a.timestamp < b.timestamp;
    });
    out.report.loaded = out.interactions.size();
    return out;
}

void write_interactions(const std::vector<Interaction>& interactions, const std::filesystem::path& path) {
    std::string buf;
    for (const auto& it : interactions) {
        buf += json{{"user_id", it.user_id}, {"item_id", it.item_id}, {"timestamp", it.timestamp}}.dump();
        buf += '\n';
    }
    write_file_atomic(path, buf);
}

SplitDataset last_out_split(const std::vector<Interaction>& interactions) {
    std::vector<std::size_t> order(interactions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = interactions[a];
        const auto& y = interactions[b];
        if (x.user_id != y.user_id) return x.user_id < y.user_id;
        return x.timestamp < y.timestamp;
    });
    SplitDataset split;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        const std::string& user = interactions[order[i]].user_id;
        while (j < order.size() && interactions[order[j]].user_id == user) ++j;
        const std::size_t count = j - i;
        if (count < 3) {
            ++split.excluded_users;
        } else {
            auto& train = split.train[user];
            for (std::size_t p = i; p + 2 < j; ++p) train.push_back(interactions[order[p]].item_id);
            split.valid[user] = interactions[order[j - 2]].item_id;
            split.test[user] = interactions[order[j - 1]].item_id;
        }
        i = j;
    }
    return split;
}

void write_splits(const SplitDataset& split, const std::filesystem::path& path) {
    std::string buf;
    auto row = [&](const std::string& user, const std::string& item, const char* name, std::size_t pos) {
        buf += json{{"user_id", user}, {"item_id", item}, {"split", name}, {"position", pos}}.dump();
        buf += '\n';
    };
    for (const auto& [user, items] : split.train) {
        for (std::size_t p = 0; p < items.size(); ++p) row(user, items[p], "train", p);
        row(user, split.valid.at(user), "valid", items.size());
        row(user, split.test.at(user), "test", items.size() + 1);
    }
    buf += json{{"excluded_users", split.excluded_users}}.dump();
    buf += '\n';
    write_file_atomic(path, buf);
}

SplitDataset read_splits(const std::filesystem::path& path) {
    SplitDataset split;
    std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> train;
    for_each_line(path, [&](std::string_view line, std::size_t no) {
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(no));
        if (j.contains("excluded_users")) {
            split.excluded_users = j["excluded_users"].get<std::size_t>();
            return;
        }
        const auto user = j.at("user_id").get<std::string>();
        const auto item = j.at("item_id").get<std::string>();
        const auto kind = j.at("split").get<std::string>();
        if (kind == "train") {
            train[user].emplace_back(j.at("position").get<std::size_t>(), item);
        } else if (kind == "valid") {
            split.valid[user] = item;
        } else if (kind == "test") {
            split.test[user] = item;
        } else {
            throw Error(ErrorCode::Schema, "unknown split '" + kind + "'");
        }
    });
    for (auto& [user, rows] : train) {
        std::sort(rows.begin(), rows.end());
        auto& out = split.train[user];
        for (auto& [_, item] : rows) out.push_back(std::move(item));
    }
    return split;
}

}  // namespace semtag
