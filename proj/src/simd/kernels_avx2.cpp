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

// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <cmath>

#include "dkmgp/simd/kernels.hpp"

namespace dkmgp::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void rbf_row_avx2(const double* x, const double* pts, std::size_t dim,
                  std::size_t count, std::size_t stride,
                  const double* inv_len_sq, double scale, double* out) {
  std::size_t m = 0;
  for (; m + 4 <= count; m += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < dim; ++j) {
      const __m256d d =
          _mm256_sub_pd(_mm256_set1_pd(x[j]), _mm256_loadu_pd(pts + j * stride + m));
      acc = _mm256_fmadd_pd(_mm256_mul_pd(d, d), _mm256_set1_pd(inv_len_sq[j]), acc);
    }
    _mm256_storeu_pd(out + m, acc);
  }
  for (; m < count; ++m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = x[j] - pts[j * stride + m];
      acc = std::fma(d * d, inv_len_sq[j], acc);
    }
    out[m] = acc;
  }
  for (std::size_t i = 0; i < count; ++i) out[i] = scale * std::exp(-0.5 * out[i]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

void affine_avx2(const double* w, const double* x, const double* b,
                 std::size_t rows, std::size_t cols, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = dot_avx2(w + r * cols, x, cols);
    y[r] = b ? v + b[r] : v;
  }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{rbf_row_avx2, affine_avx2, dot_avx2, axpy_avx2};
  return table;
}

}  // namespace dkmgp::simd
