// Copyright (c) 2026 The cxrformer Authors. All Rights Reserved.
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

#include <ostream>

namespace cxr {

/// Process exit codes; each error class has its own.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,       // bad flags, missing subcommand, unexpected failure
  kExitConfig = 2,      // ConfigError, ShapeError
  kExitData = 3,        // DataError, unreadable or unwritable files
  kExitNumeric = 4,     // NumericError, failed gradcheck
  kExitCheckpoint = 5,  // CheckpointError
};

/// Entry point of the `cxrformer` tool. Never throws; every failure is
/// reported on `err` and mapped to a nonzero ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cxr
