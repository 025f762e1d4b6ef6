// Copyright 2026 The cpclab Authors
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

#include "cpc/errors.hpp"
#include "cpc/kernels.hpp"

namespace cpc::kernels {
namespace {

const Backend* g_active = nullptr;

const Backend* pick_default() {
  if (const char* env = std::getenv("CPC_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_backend();
    if (want == "avx2") {
      if (const Backend* b = avx2_backend(); b != nullptr && cpu_supports_avx2()) {
        return b;
      }
      throw ValueError("CPC_KERNELS=avx2 requested but AVX2+FMA is unavailable");
    }
    throw ValueError("unknown CPC_KERNELS backend: " + want);
  }
  if (const Backend* b = avx2_backend(); b != nullptr && cpu_supports_avx2()) {
    return b;
  }
  return &scalar_backend();
}

}  // namespace

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Backend& active() {
  if (g_active == nullptr) g_active = pick_default();
  return *g_active;
}

std::vector<const Backend*> available() {
  std::vector<const Backend*> out = {&scalar_backend()};
  if (const Backend* b = avx2_backend(); b != nullptr && cpu_supports_avx2()) {
    out.push_back(b);
  }
  return out;
}

void set_active(const std::string& name) {
  for (const Backend* b : available()) {
    if (name == b->name) {
      g_active = b;
      return;
    }
  }
  throw ValueError("kernel backend not available on this machine: " + name);
}

ScopedBackend::ScopedBackend(const std::string& name) : saved_(&active()) {
  set_active(name);
}

ScopedBackend::~ScopedBackend() { g_active = saved_; }

}  // namespace cpc::kernels
