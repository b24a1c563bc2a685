// Copyright 2026 The infercarbon Authors.
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

#include "infercarbon/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "infercarbon/errors.hpp"

namespace infercarbon {
namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(std::string_view source, std::size_t line,
                       std::string_view key, const std::string& what) {
  std::string msg = std::string(source) + ":" + std::to_string(line) + ": ";
  if (!key.empty()) msg += "field '" + std::string(key) + "': ";
  throw ConfigError(msg + what);
}

}  // namespace

std::vector<KeyValueSection> parse_key_value(std::string_view text,
                                             std::string_view source) {
  std::vector<KeyValueSection> sections;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') fail(source, line_no, {}, "unterminated section");
      auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail(source, line_no, {}, "empty section name");
      for (const auto& s : sections)
        if (s.name == name)
          fail(source, line_no, {},
               "duplicate section '" + std::string(name) + "'");
      sections.push_back({std::string(name), line_no, {}});
    } else {
      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        fail(source, line_no, {}, "expected 'key = value'");
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (key.empty()) fail(source, line_no, {}, "empty key");
      if (sections.empty())
        fail(source, line_no, key, "entry outside of any [section]");
      auto& sec = sections.back();
      if (sec.find(key) != nullptr)
        fail(source, line_no, key, "duplicate field");
      sec.entries.push_back({std::string(key), std::string(value), line_no});
    }
    if (nl == text.size()) break;
  }
  return sections;
}

const KeyValueEntry* KeyValueSection::find(std::string_view key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

const KeyValueEntry& KeyValueSection::require(std::string_view key,
                                              std::string_view source) const {
  if (const auto* e = find(key)) return *e;
  fail(source, line, key, "missing in section [" + name + "]");
}

void KeyValueSection::reject_unknown(
    const std::vector<std::string_view>& allowed,
    std::string_view source) const {
  for (const auto& e : entries) {
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end())
      fail(source, e.line, e.key, "unknown field");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::int64_t kv_to_int(const KeyValueEntry& e, std::string_view source) {
  std::int64_t v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    fail(source, e.line, e.key, "expected an integer, got '" + e.value + "'");
  return v;
}

double kv_to_double(const KeyValueEntry& e, std::string_view source) {
  double v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    fail(source, e.line, e.key, "expected a number, got '" + e.value + "'");
  return v;
}

bool kv_to_bool(const KeyValueEntry& e, std::string_view source) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  fail(source, e.line, e.key, "expected true/false, got '" + e.value + "'");
}

}  // namespace infercarbon
