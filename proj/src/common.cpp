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

#include <cmath>
#include <cstdio>

#include "semtag/error.hpp"
#include "semtag/hash.hpp"

namespace semtag {

std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Io: return "IO";
        case ErrorCode::Parse: return "PARSE";
        case ErrorCode::Schema: return "SCHEMA";
        case ErrorCode::DuplicateId: return "DUPLICATE_ID";
        case ErrorCode::UnknownItem: return "UNKNOWN_ITEM";
        case ErrorCode::EmptyInput: return "EMPTY_INPUT";
        case ErrorCode::MissingSlot: return "MISSING_SLOT";
        case ErrorCode::UnknownTemplate: return "UNKNOWN_TEMPLATE";
        case ErrorCode::Transport: return "TRANSPORT";
        case ErrorCode::Refusal: return "REFUSAL";
        case ErrorCode::BudgetExhausted: return "BUDGET_EXHAUSTED";
        case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
        case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
        case ErrorCode::Collision: return "COLLISION";
        case ErrorCode::Locked: return "LOCKED";
        case ErrorCode::NotFound: return "NOT_FOUND";
    }
    return "UNKNOWN";
}

std::string hex8(std::uint64_t h) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(h & 0xffffffffULL));
    return buf;
}

std::string hex16(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double Rng::normal() noexcept {
    // Box-Muller; one value per call keeps the stream simple to reason about.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace semtag
