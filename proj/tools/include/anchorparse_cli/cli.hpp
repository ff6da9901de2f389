// Copyright 2026 The anchorparse Authors.
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

// The `anchorparse` command: datagen, ingest, train, evaluate, probe, replay.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace anchorparse::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kConfig = 4,
  kData = 5,
  kNumeric = 6,
};

// Environment variable naming the default output root.
inline constexpr const char* kOutDirEnv = "ANCHORPARSE_OUT_DIR";

// Runs one command line (args[0] is the program name). Failures print a single
// "error: category=<name> message=<text>" line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace anchorparse::cli
