/*
 * Copyright 2026 The xfdd Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef XFDD_TOOLS_CLI_H_
#define XFDD_TOOLS_CLI_H_

#include <ostream>

namespace xfdd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitMissing = 3;
inline constexpr int kExitNumerical = 4;
inline constexpr int kExitUsage = 64;

// Parses and runs one `xfdd <command>` invocation; returns the exit code.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xfdd::cli

#endif  // XFDD_TOOLS_CLI_H_
