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

// Request traces, their token-length statistics, and inference priors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "infercarbon/arch.hpp"

namespace infercarbon {

struct TraceRecord {
  std::string timestamp;  // opaque; compared as a string
  std::int64_t prompt_tokens = 0;
  std::int64_t generated_tokens = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct ColumnMap {
  std::string timestamp = "TIMESTAMP";
  std::string prompt = "ContextTokens";
  std::string generated = "GeneratedTokens";
  char delimiter = ',';
};

// The first non-blank line is the header; extra columns are ignored. Records
// come back stable-sorted by timestamp. Throws MissingColumn or ParseError.
std::vector<TraceRecord> parse_trace_text(std::string_view text,
                                          const ColumnMap& columns = {});
std::vector<TraceRecord> parse_trace(const std::string& path,
                                     const ColumnMap& columns = {});
// Header plus one row per record, in input order.
std::string serialize_trace(std::span<const TraceRecord> records,
                            const ColumnMap& columns = {});

struct Percentiles {
  std::int64_t p50 = 0;
  std::int64_t p90 = 0;
  std::int64_t p99 = 0;
};

// [lower, upper); the last bucket is open-ended with upper == INT64_MAX.
struct HistogramBucket {
  std::int64_t lower = 0;
  std::int64_t upper = 0;
  std::size_t count = 0;
};

// Bucket 0 holds 0; bucket k >= 1 holds [2^(k-1), 2^k); the last bucket
// holds everything from 2^(kHistogramBuckets-2) up.
inline constexpr std::size_t kHistogramBuckets = 26;

struct TraceStats {
  std::size_t count = 0;
  Percentiles prompt;
  Percentiles generated;
  std::vector<HistogramBucket> prompt_histogram;
  std::vector<HistogramBucket> generated_histogram;
};

// Smallest value with at least ceil(p/100 * n) values at or below it.
std::int64_t nearest_rank(std::vector<std::int64_t> values, double p);

// Throws EmptyTrace.
TraceStats trace_stats(std::span<const TraceRecord> records);
std::string trace_stats_json(const TraceStats& s);
std::string trace_stats_table(const TraceStats& s);

struct BatchMixture {
  std::vector<std::pair<std::int64_t, double>> weights;  // batch, probability mass

  // P(1) = 0.6, P(2) = 0.3, P(4) = 0.1.
  static BatchMixture standard();
  // "1:0.6,2:0.3,4:0.1". Throws ConfigError.
  static BatchMixture parse(std::string_view text);
  // Throws ConfigError on an empty mixture, a batch < 1 or a non-positive
  // total mass.
  void validate() const;
  std::int64_t draw(std::mt19937_64& rng) const;
};

// Distribution over (batch, prompt, generated). gpu_count of a draw is 1.
class InferencePrior {
 public:
  virtual ~InferencePrior() = default;
  virtual InferenceConfig draw(std::mt19937_64& rng) const = 0;
  virtual std::string describe() const = 0;
};

// Draws (prompt, generated) jointly from one uniformly chosen record. Zero
// counts are raised to 1.
class EmpiricalPrior : public InferencePrior {
 public:
  // Throws EmptyTrace.
  EmpiricalPrior(std::vector<TraceRecord> records, BatchMixture mixture);
  InferenceConfig draw(std::mt19937_64& rng) const override;
  std::string describe() const override;

 private:
  std::vector<TraceRecord> records_;
  BatchMixture mixture_;
};

std::unique_ptr<InferencePrior> empirical_prior(std::vector<TraceRecord> records,
                                                BatchMixture mixture = BatchMixture::standard());

}  // namespace infercarbon
