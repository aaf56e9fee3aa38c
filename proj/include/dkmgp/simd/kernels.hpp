// Copyright 2026 The DKMGP Authors
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

// Data-parallel inner loops shared by the deep kernel, the variational GP and
// the exact-GP baseline. Every kernel has a portable scalar reference and an
// AVX2/FMA variant; the variant is picked once at first use from CPUID and can
// be pinned with DKMGP_ISA=scalar|avx2.

#include <cstddef>
#include <span>
#include <string_view>

namespace dkmgp::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  // out[m] = scale * exp(-0.5 * sum_j (x[j] - pts[j * stride + m])^2 * inv_len_sq[j])
  // for m < count. Points are stored feature-major so lanes run over points.
  void (*rbf_row)(const double* x, const double* pts, std::size_t dim,
                  std::size_t count, std::size_t stride,
                  const double* inv_len_sq, double scale, double* out);
  // y = W x (+ b when b != nullptr); W row-major, rows x cols.
  void (*affine)(const double* w, const double* x, const double* b,
                 std::size_t rows, std::size_t cols, double* y);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_kernels();
#endif

bool isa_available(Isa isa);
const KernelTable& kernels(Isa isa);
Isa active_isa();
const KernelTable& kernels();
std::string_view isa_name(Isa isa);

// Span conveniences over the active table.

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace dkmgp::simd
