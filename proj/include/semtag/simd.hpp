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
#include <span>
#include <string_view>

// Dense double-precision vector kernels used by clustering and embeddings.
// Each kernel has a portable scalar reference and ISA-specific variants; the
// public entry points dispatch once at startup based on the running CPU.

namespace semtag::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

/// ISA selected by the dispatcher for this process.
Isa active_isa() noexcept;

/// True if `isa` was compiled in and the CPU supports it.
bool isa_available(Isa isa) noexcept;

/// Test hook: route the dispatched entry points through `isa`. Returns false
/// (and leaves dispatch unchanged) if the ISA is unavailable.
bool force_isa(Isa isa) noexcept;

using BinaryKernel = double (*)(const double*, const double*, std::size_t) noexcept;

struct KernelTable {
    BinaryKernel squared_l2;
    BinaryKernel dot;
};

/// Kernel table for a specific ISA; null entries if unavailable.
KernelTable kernels_for(Isa isa) noexcept;

namespace scalar {
double squared_l2(const double* a, const double* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace scalar

#if defined(SEMTAG_HAVE_AVX2)
namespace avx2 {
double squared_l2(const double* a, const double* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if defined(SEMTAG_HAVE_NEON)
namespace neon {
double squared_l2(const double* a, const double* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace neon
#endif

double squared_l2(std::span<const double> a, std::span<const double> b) noexcept;
double l2(std::span<const double> a, std::span<const double> b) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Row-major n x n Euclidean distance matrix over `n` rows of width `dim`.
void pairwise_l2(const double* rows, std::size_t n, std::size_t dim, double* out);

}  // namespace semtag::simd
