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

#include "convmix/prompts.h"

#include <charconv>

#include "prompt_assets.h"

namespace convmix {

namespace {

struct Piece {
  bool placeholder;
  std::string_view text;  // literal text or placeholder name
};

std::vector<Piece> split_template(std::string_view tmpl) {
  std::vector<Piece> pieces;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find('{', pos);
    auto close = open == std::string_view::npos ? open : tmpl.find('}', open);
    if (open == std::string_view::npos || close == std::string_view::npos) {
      pieces.push_back({false, tmpl.substr(pos)});
      break;
    }
    if (open > pos) pieces.push_back({false, tmpl.substr(pos, open - pos)});
    pieces.push_back({true, tmpl.substr(open + 1, close - open - 1)});
    pos = close + 1;
  }
  return pieces;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

int parse_k(const std::string& s) {
  int k = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), k);
  return (ec == std::errc() && ptr == s.data() + s.size()) ? k : 0;
}

}  // namespace

std::string_view query_prompt_template() { return kQueryPromptTemplate; }
std::string_view document_prompt_template() { return kDocumentPromptTemplate; }
std::string_view document_context_template() {
  return kDocumentContextTemplate;
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& piece : split_template(tmpl)) {
    if (!piece.placeholder) {
      out += piece.text;
      continue;
    }
    auto it = values.find(std::string(piece.text));
    if (it == values.end()) {
      out += '{';
      out += piece.text;
      out += '}';
    } else {
      out += it->second;
    }
  }
  return out;
}

std::optional<std::map<std::string, std::string>> match_template(
    std::string_view tmpl, std::string_view prompt) {
  const auto pieces = split_template(tmpl);
  std::map<std::string, std::string> values;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Piece& p = pieces[i];
    if (!p.placeholder) {
      if (prompt.compare(pos, p.text.size(), p.text) != 0) return std::nullopt;
      pos += p.text.size();
      continue;
    }
    std::size_t end = prompt.size();
    if (i + 1 < pieces.size()) {
      // Templates never have adjacent placeholders.
      end = prompt.find(pieces[i + 1].text, pos);
      if (end == std::string_view::npos) return std::nullopt;
    }
    std::string value(prompt.substr(pos, end - pos));
    auto [it, inserted] = values.emplace(std::string(p.text), value);
    if (!inserted && it->second != value) return std::nullopt;
    pos = end;
  }
  if (pos != prompt.size()) return std::nullopt;
  return values;
}

std::string render_query_prompt(std::string_view query,
                                const std::vector<std::string>& context,
                                int k) {
  return render_template(kQueryPromptTemplate,
                         {{"k", std::to_string(k)},
                          {"query", std::string(query)},
                          {"context", join(context, "\n")}});
}

std::string render_document_prompt(std::string_view document,
                                   std::string_view query,
                                   const std::vector<std::string>& context,
                                   int k) {
  std::string head = render_template(
      kDocumentContextTemplate,
      {{"query", std::string(query)}, {"context", join(context, " | ")}});
  return head + "\n\n" +
         render_template(kDocumentPromptTemplate,
                         {{"k", std::to_string(k)},
                          {"document", std::string(document)}});
}

std::optional<QueryPromptFields> parse_query_prompt(std::string_view prompt) {
  auto values = match_template(kQueryPromptTemplate, prompt);
  if (!values) return std::nullopt;
  QueryPromptFields out{(*values)["query"], (*values)["context"],
                        parse_k((*values)["k"])};
  if (out.k <= 0) return std::nullopt;
  return out;
}

std::optional<DocumentPromptFields> parse_document_prompt(
    std::string_view prompt) {
  std::string tmpl = std::string(kDocumentContextTemplate) + "\n\n" +
                     std::string(kDocumentPromptTemplate);
  auto values = match_template(tmpl, prompt);
  std::optional<DocumentPromptFields> out;
  if (values) {
    out = DocumentPromptFields{(*values)["document"], (*values)["query"],
                               (*values)["context"], parse_k((*values)["k"])};
  } else if ((values = match_template(kDocumentPromptTemplate, prompt))) {
    // Bare template without the context line.
    out = DocumentPromptFields{(*values)["document"], "", "",
                               parse_k((*values)["k"])};
  }
  if (!out || out->k <= 0) return std::nullopt;
  return out;
}

}  // namespace convmix
