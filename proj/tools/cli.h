// Copyright 2026 The ConvMix Authors.
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

#ifndef CONVMIX_TOOLS_CLI_H_
#define CONVMIX_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace convmix::cli {

// Runs the convmix command line. Returns the process exit code: 0 on
// success, 2 for pipeline errors (reported as "error[<category>]: ..." on
// `err`), the CLI11 code for usage errors.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace convmix::cli

#endif  // CONVMIX_TOOLS_CLI_H_
