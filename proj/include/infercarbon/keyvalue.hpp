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

// Minimal sectioned key/value documents used by the architecture and GPU
// catalogs:
//
//   # comment
//   [llama3.1-8b]
//   hidden_size = 4096
//   weight_dtype = FP16
//
// Every entry remembers its line so that field-level validation errors can
// point at the offending line.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace infercarbon {

struct KeyValueEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct KeyValueSection {
  std::string name;
  std::size_t line = 0;
  std::vector<KeyValueEntry> entries;

  // Throws ConfigError if any key is not in `allowed`.
  void reject_unknown(const std::vector<std::string_view>& allowed,
                      std::string_view source) const;
  // Throws ConfigError naming the field when absent.
  const KeyValueEntry& require(std::string_view key,
                               std::string_view source) const;
  const KeyValueEntry* find(std::string_view key) const;
};

// Throws ConfigError on malformed lines, duplicate sections or duplicate keys.
std::vector<KeyValueSection> parse_key_value(std::string_view text,
                                             std::string_view source);

std::string read_text_file(const std::string& path);

// Field conversions; errors read "<source>:<line>: field '<key>': ...".
std::int64_t kv_to_int(const KeyValueEntry& e, std::string_view source);
double kv_to_double(const KeyValueEntry& e, std::string_view source);
bool kv_to_bool(const KeyValueEntry& e, std::string_view source);

}  // namespace infercarbon
