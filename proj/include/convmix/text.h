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

#ifndef CONVMIX_TEXT_H_
#define CONVMIX_TEXT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace convmix {

// Reserved token placed between concatenated turns.
inline constexpr std::string_view kSeparatorToken = "[SEP]";

// Lowercases and splits on whitespace and punctuation; punctuation is
// discarded. Non-ASCII letters are kept as word characters, Unicode
// whitespace and general punctuation (U+2000..U+206F, U+3000..U+303F, NBSP,
// Latin-1 punctuation) act as separators. The literal "[SEP]" survives as a
// single token.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

// Keeps the first `limit` tokens and rejoins them with single spaces.
std::string truncate_tokens(std::string_view text, std::size_t limit);

std::string_view trim(std::string_view s);

// 64-bit FNV-1a.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t state = kFnvOffset) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t state = kFnvOffset);

std::string hex64(std::uint64_t value);

}  // namespace convmix

#endif  // CONVMIX_TEXT_H_
