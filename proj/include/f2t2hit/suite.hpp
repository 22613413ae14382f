// Copyright 2026 The F2T2-HiT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// The self-check suite behind `f2t2hit verify`: gradient, spectral,
// structural, schedule and metric checks, each reported pass/fail.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "f2t2hit/verify.hpp"

namespace f2t2hit::verify {

struct CheckResult {
  std::string scope;
  std::string name;
  bool passed = false;
  double value = 0.0;  // measured error or quantity
  double bound = 0.0;  // threshold it was compared against
  double seconds = 0.0;
  std::string detail;
};

/// gradients, spectral, structure, schedule, metrics.
const std::vector<std::string>& suite_scopes();

/// Finite-difference checks of every block type on `draws` random
/// parameter/input draws each (hit_block on 16x16 so all windows apply).
std::vector<GradCheckReport> block_gradient_checks(int draws, uint64_t seed = 0);

/// Zeroes everything outside one largest window and compares the W-SA
/// output inside it bit-for-bit (delta depthwise kernels in the value path).
CheckResult attention_locality_check(uint64_t seed = 0);

/// forward(x) == x bit-exactly and after 8-bit quantization, for a variant
/// on an H x W input.
CheckResult identity_at_init_check(const std::string& variant, int64_t height, int64_t width,
                                   uint64_t seed = 0);

/// Runs the requested scopes in order (all when empty). Throws
/// ArgumentError for an unknown scope name.
std::vector<CheckResult> run_suite(const std::vector<std::string>& scopes, uint64_t seed = 0,
                                   const std::function<void(const CheckResult&)>& on_result = {});

/// {"passed": bool, "checks": [{scope, name, passed, value, bound, seconds, detail}]}
std::string suite_report_json(const std::vector<CheckResult>& results);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace f2t2hit::verify
