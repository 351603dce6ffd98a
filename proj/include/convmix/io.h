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

#ifndef CONVMIX_IO_H_
#define CONVMIX_IO_H_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

namespace convmix {

// Opens for reading; throws kMissingInput if the file does not exist.
std::ifstream open_input(const std::filesystem::path& path,
                         bool binary = false);
// Creates parent directories; throws kIo on failure.
std::ofstream open_output(const std::filesystem::path& path,
                          bool binary = false);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

// FNV-1a over the file bytes, as 16 hex digits.
std::string content_hash(const std::filesystem::path& path);

}  // namespace convmix

#endif  // CONVMIX_IO_H_
