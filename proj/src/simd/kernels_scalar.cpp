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

#include "dkmgp/simd/kernels.hpp"

#include <cmath>

namespace dkmgp::simd {
namespace {

void rbf_row_scalar(const double* x, const double* pts, std::size_t dim,
                    std::size_t count, std::size_t stride,
                    const double* inv_len_sq, double scale, double* out) {
  for (std::size_t m = 0; m < count; ++m) out[m] = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double xj = x[j];
    const double w = inv_len_sq[j];
    const double* row = pts + j * stride;
    for (std::size_t m = 0; m < count; ++m) {
      const double d = xj - row[m];
      out[m] += d * d * w;
    }
  }
  for (std::size_t m = 0; m < count; ++m) out[m] = scale * std::exp(-0.5 * out[m]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void affine_scalar(const double* w, const double* x, const double* b,
                   std::size_t rows, std::size_t cols, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = dot_scalar(w + r * cols, x, cols);
    y[r] = b ? v + b[r] : v;
  }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{rbf_row_scalar, affine_scalar, dot_scalar,
                                 axpy_scalar};
  return table;
}

}  // namespace dkmgp::simd
