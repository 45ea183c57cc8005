// awe/cli.hpp

// Copyright 2026  awelab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>

namespace awe {

/// Exit codes of dispatch().
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Parses argv[1] as a subcommand and runs it. Diagnostics go to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace awe
