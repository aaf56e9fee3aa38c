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

#include <cstdlib>
#include <string>

#include "dkmgp/simd/kernels.hpp"

namespace dkmgp::simd {

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if (defined(__x86_64__) || defined(_M_X64)) && defined(DKMGP_HAVE_AVX2_TU)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels(Isa isa) {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(DKMGP_HAVE_AVX2_TU)
  if (isa == Isa::kAvx2 && isa_available(Isa::kAvx2)) return avx2_kernels();
#endif
  (void)isa;
  return scalar_kernels();
}

namespace {

Isa detect() {
  if (const char* env = std::getenv("DKMGP_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && isa_available(Isa::kAvx2)) return Isa::kAvx2;
  }
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

}  // namespace

Isa active_isa() {
  static const Isa isa = detect();
  return isa;
}

const KernelTable& kernels() {
  static const KernelTable& table = kernels(active_isa());
  return table;
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

}  // namespace dkmgp::simd
