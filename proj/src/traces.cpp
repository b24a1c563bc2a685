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

#include "infercarbon/traces.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "infercarbon/errors.hpp"
#include "infercarbon/keyvalue.hpp"
#include "json.hpp"

namespace infercarbon {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::int64_t parse_count(std::string_view field, std::size_t line,
                         std::string_view column) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || ptr != end)
    throw ParseError(line, "column '" + std::string(column) +
                               "': not an integer: '" + std::string(field) + "'");
  if (v < 0)
    throw ParseError(line, "column '" + std::string(column) + "': negative count");
  return v;
}

}  // namespace

std::vector<TraceRecord> parse_trace_text(std::string_view text,
                                          const ColumnMap& columns) {
  std::vector<TraceRecord> out;
  std::size_t line_no = 0;
  std::size_t ts_col = 0, prompt_col = 0, gen_col = 0, width = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, columns.delimiter);
    if (!have_header) {
      auto locate = [&](const std::string& name) {
        const auto it = std::find(fields.begin(), fields.end(), name);
        if (it == fields.end())
          throw MissingColumn("trace header lacks column '" + name + "'");
        return static_cast<std::size_t>(it - fields.begin());
      };
      ts_col = locate(columns.timestamp);
      prompt_col = locate(columns.prompt);
      gen_col = locate(columns.generated);
      width = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != width)
      throw ParseError(line_no, "expected " + std::to_string(width) +
                                    " fields, found " + std::to_string(fields.size()));
    out.push_back({std::string(fields[ts_col]),
                   parse_count(fields[prompt_col], line_no, columns.prompt),
                   parse_count(fields[gen_col], line_no, columns.generated)});
  }
  if (!have_header) throw MissingColumn("trace has no header line");
  std::stable_sort(out.begin(), out.end(),
                   [](const TraceRecord& a, const TraceRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  return out;
}

std::vector<TraceRecord> parse_trace(const std::string& path,
                                     const ColumnMap& columns) {
  return parse_trace_text(read_text_file(path), columns);
}

std::string serialize_trace(std::span<const TraceRecord> records,
                            const ColumnMap& columns) {
  const char d = columns.delimiter;
  std::ostringstream os;
  os << columns.timestamp << d << columns.prompt << d << columns.generated << "\n";
  for (const auto& r : records) {
    if (r.timestamp.find_first_of(std::string{d, '\n', '\r', '"'}) != std::string::npos)
      throw ConfigError("timestamp '" + r.timestamp +
                        "' contains a delimiter, quote or newline");
    os << r.timestamp << d << r.prompt_tokens << d << r.generated_tokens << "\n";
  }
  return os.str();
}

std::int64_t nearest_rank(std::vector<std::int64_t> values, double p) {
  if (values.empty()) throw EmptyTrace("percentile of an empty sample");
  if (!(p > 0 && p <= 100)) throw RangeError("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

namespace {

std::vector<HistogramBucket> histogram(const std::vector<std::int64_t>& values) {
  std::vector<HistogramBucket> buckets(kHistogramBuckets);
  buckets[0] = {0, 1, 0};
  for (std::size_t k = 1; k < kHistogramBuckets; ++k)
    buckets[k] = {std::int64_t{1} << (k - 1), std::int64_t{1} << k, 0};
  buckets.back().upper = std::numeric_limits<std::int64_t>::max();
  for (auto v : values) {
    std::size_t k = 0;
    if (v > 0) k = static_cast<std::size_t>(std::bit_width(static_cast<std::uint64_t>(v)));
    ++buckets[std::min(k, kHistogramBuckets - 1)].count;
  }
  return buckets;
}

Percentiles percentiles(const std::vector<std::int64_t>& v) {
  return {nearest_rank(v, 50), nearest_rank(v, 90), nearest_rank(v, 99)};
}

}  // namespace

TraceStats trace_stats(std::span<const TraceRecord> records) {
  if (records.empty()) throw EmptyTrace("trace has no records");
  std::vector<std::int64_t> prompt, gen;
  prompt.reserve(records.size());
  gen.reserve(records.size());
  for (const auto& r : records) {
    prompt.push_back(r.prompt_tokens);
    gen.push_back(r.generated_tokens);
  }
  TraceStats s;
  s.count = records.size();
  s.prompt = percentiles(prompt);
  s.generated = percentiles(gen);
  s.prompt_histogram = histogram(prompt);
  s.generated_histogram = histogram(gen);
  return s;
}

std::string trace_stats_json(const TraceStats& s) {
  using ordered_json = nlohmann::ordered_json;
  auto pct = [](const Percentiles& p) {
    return ordered_json{{"p50", p.p50}, {"p90", p.p90}, {"p99", p.p99}};
  };
  auto hist = [](const std::vector<HistogramBucket>& h) {
    auto arr = ordered_json::array();
    for (const auto& b : h)
      arr.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}});
    return arr;
  };
  ordered_json j{{"count", s.count},
                 {"prompt_tokens", pct(s.prompt)},
                 {"generated_tokens", pct(s.generated)},
                 {"prompt_histogram", hist(s.prompt_histogram)},
                 {"generated_histogram", hist(s.generated_histogram)}};
  return j.dump(2) + "\n";
}

std::string trace_stats_table(const TraceStats& s) {
  std::ostringstream os;
  os << "records: " << s.count << "\n\n"
     << std::left << std::setw(18) << "" << std::right << std::setw(10) << "p50"
     << std::setw(10) << "p90" << std::setw(10) << "p99" << "\n";
  auto row = [&](std::string_view name, const Percentiles& p) {
    os << std::left << std::setw(18) << name << std::right << std::setw(10) << p.p50
       << std::setw(10) << p.p90 << std::setw(10) << p.p99 << "\n";
  };
  row("prompt tokens", s.prompt);
  row("generated tokens", s.generated);
  os << "\n" << std::left << std::setw(22) << "bucket" << std::right << std::setw(10)
     << "prompt" << std::setw(12) << "generated" << "\n";
  for (std::size_t k = 0; k < s.prompt_histogram.size(); ++k) {
    const auto& b = s.prompt_histogram[k];
    if (b.count == 0 && s.generated_histogram[k].count == 0) continue;
    std::ostringstream label;
    label << "[" << b.lower << ", ";
    if (b.upper == std::numeric_limits<std::int64_t>::max())
      label << "inf)";
    else
      label << b.upper << ")";
    os << std::left << std::setw(22) << label.str() << std::right << std::setw(10)
       << b.count << std::setw(12) << s.generated_histogram[k].count << "\n";
  }
  return os.str();
}

BatchMixture BatchMixture::standard() { return {{{1, 0.6}, {2, 0.3}, {4, 0.1}}}; }

BatchMixture BatchMixture::parse(std::string_view text) {
  BatchMixture m;
  for (auto item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos)
      throw ConfigError("batch mixture entry '" + std::string(item) +
                        "' is not batch:weight");
    KeyValueEntry b{"batch", std::string(trim(item.substr(0, colon))), 0};
    KeyValueEntry w{"weight", std::string(trim(item.substr(colon + 1))), 0};
    m.weights.emplace_back(kv_to_int(b, "batch mixture"),
                           kv_to_double(w, "batch mixture"));
  }
  m.validate();
  return m;
}

void BatchMixture::validate() const {
  if (weights.empty()) throw ConfigError("batch mixture is empty");
  double total = 0;
  for (auto [b, w] : weights) {
    if (b < 1) throw ConfigError("batch mixture: batch size must be >= 1");
    if (!(w >= 0) || !std::isfinite(w))
      throw ConfigError("batch mixture: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0)) throw ConfigError("batch mixture has no mass");
}

std::int64_t BatchMixture::draw(std::mt19937_64& rng) const {
  std::vector<double> w;
  for (const auto& e : weights) w.push_back(e.second);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return weights[pick(rng)].first;
}

EmpiricalPrior::EmpiricalPrior(std::vector<TraceRecord> records, BatchMixture mixture)
    : records_(std::move(records)), mixture_(std::move(mixture)) {
  if (records_.empty()) throw EmptyTrace("empirical prior needs at least one record");
  mixture_.validate();
}

InferenceConfig EmpiricalPrior::draw(std::mt19937_64& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
  const auto& r = records_[pick(rng)];
  InferenceConfig cfg;
  cfg.batch_size = mixture_.draw(rng);
  cfg.prompt_length = std::max<std::int64_t>(1, r.prompt_tokens);
  cfg.generated_tokens = std::max<std::int64_t>(1, r.generated_tokens);
  cfg.gpu_count = 1;
  return cfg;
}

std::string EmpiricalPrior::describe() const {
  return "empirical(" + std::to_string(records_.size()) + " records)";
}

std::unique_ptr<InferencePrior> empirical_prior(std::vector<TraceRecord> records,
                                                BatchMixture mixture) {
  return std::make_unique<EmpiricalPrior>(std::move(records), std::move(mixture));
}

}  // namespace infercarbon
