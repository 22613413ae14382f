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
// The `f2t2hit` command line: train, eval, infer, synthesize and verify.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace f2t2hit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command. `args` excludes the program name. F2T2HIT_SEED, when
/// set, overrides the configured seed.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Splits leftover "--a.b value" / "--a.b=value" tokens into dotted
/// overrides. Throws ConfigError on a stray token.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& extras);

/// F2T2HIT_SEED as an integer; ConfigError when it is set but malformed.
std::optional<uint64_t> seed_from_env();

}  // namespace f2t2hit::cli
