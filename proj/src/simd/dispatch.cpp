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
#include <cmath>

#include "semtag/simd.hpp"

namespace semtag::simd {

namespace {

bool cpu_supports(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
#if defined(SEMTAG_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::Neon:
#if defined(SEMTAG_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Isa detect() noexcept {
    if (cpu_supports(Isa::Avx2)) return Isa::Avx2;
    if (cpu_supports(Isa::Neon)) return Isa::Neon;
    return Isa::Scalar;
}

struct Dispatch {
    std::atomic<Isa> isa{detect()};
    std::atomic<BinaryKernel> squared_l2{kernels_for(isa.load()).squared_l2};
    std::atomic<BinaryKernel> dot{kernels_for(isa.load()).dot};
};

Dispatch& dispatch() noexcept {
    static Dispatch d;
    return d;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

Isa active_isa() noexcept { return dispatch().isa.load(); }

bool isa_available(Isa isa) noexcept { return cpu_supports(isa); }

KernelTable kernels_for(Isa isa) noexcept {
    if (!cpu_supports(isa)) return {nullptr, nullptr};
    switch (isa) {
        case Isa::Scalar:
            return {&scalar::squared_l2, &scalar::dot};
        case Isa::Avx2:
#if defined(SEMTAG_HAVE_AVX2)
            return {&avx2::squared_l2, &avx2::dot};
#else
            break;
#endif
        case Isa::Neon:
#if defined(SEMTAG_HAVE_NEON)
            return {&neon::squared_l2, &neon::dot};
#else
            break;
#endif
    }
    return {nullptr, nullptr};
}

bool force_isa(Isa isa) noexcept {
    const KernelTable table = kernels_for(isa);
    if (table.squared_l2 == nullptr) return false;
    Dispatch& d = dispatch();
    d.squared_l2.store(table.squared_l2);
    d.dot.store(table.dot);
    d.isa.store(isa);
    return true;
}

double squared_l2(std::span<const double> a, std::span<const double> b) noexcept {
    return dispatch().squared_l2.load(std::memory_order_relaxed)(a.data(), b.data(), a.size());
}

double l2(std::span<const double> a, std::span<const double> b) noexcept {
    return std::sqrt(squared_l2(a, b));
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return dispatch().dot.load(std::memory_order_relaxed)(a.data(), b.data(), a.size());
}

void pairwise_l2(const double* rows, std::size_t n, std::size_t dim, double* out) {
    const BinaryKernel kernel = dispatch().squared_l2.load(std::memory_order_relaxed);
    for (std::size_t i = 0; i < n; ++i) {
        out[i * n + i] = 0.0;
        const double* ri = rows + i * dim;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::sqrt(kernel(ri, rows + j * dim, dim));
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
}

}  // namespace semtag::simd
