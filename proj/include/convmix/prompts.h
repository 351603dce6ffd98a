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

// Augmentation prompt templates. The template text lives in
// assets/prompts/*.txt and is compiled in; placeholders are {k}, {query},
// {context} and {document}.

#ifndef CONVMIX_PROMPTS_H_
#define CONVMIX_PROMPTS_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace convmix {

std::string_view query_prompt_template();
std::string_view document_prompt_template();
std::string_view document_context_template();

// Replaces every {name} in the template. Unknown placeholders are left as is.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

// Inverse of render_template for prompts produced from `tmpl`: returns the
// placeholder values, or nothing when the prompt does not fit the template.
std::optional<std::map<std::string, std::string>> match_template(
    std::string_view tmpl, std::string_view prompt);

// Context turns one per line.
std::string render_query_prompt(std::string_view query,
                                const std::vector<std::string>& context, int k);

// The document template preceded by one line naming the query and its
// context (joined with " | ").
std::string render_document_prompt(std::string_view document,
                                   std::string_view query,
                                   const std::vector<std::string>& context,
                                   int k);

struct QueryPromptFields {
  std::string query;
  std::string context;
  int k = 0;
};

struct DocumentPromptFields {
  std::string document;
  std::string query;
  std::string context;
  int k = 0;
};

std::optional<QueryPromptFields> parse_query_prompt(std::string_view prompt);
std::optional<DocumentPromptFields> parse_document_prompt(
    std::string_view prompt);

}  // namespace convmix

#endif  // CONVMIX_PROMPTS_H_
