// Copyright 2026 The anchorparse Authors.
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

// Reader for the published WikiSQL line-delimited files.
//
// tables file, one object per line:
//   {"id": "1-1000181-1", "header": [...], "types": ["text"|"real", ...],
//    "rows": [[...], ...], "name": "table_1000181_1"}      ("name" optional)
// data file, one object per line:
//   {"table_id": ..., "question": ...,
//    "sql": {"sel": i, "agg": 0..5, "conds": [[col, op 0..2, value], ...]}}

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "anchorparse/corpus.hpp"

namespace anchorparse {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Aggregator wikisql_aggregator(int code);  // (none, max, min, count, sum, avg)
CompareOp wikisql_operator(int code);     // (=, >, <)

struct IngestReport {
  std::size_t records = 0;
  std::size_t converted = 0;
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> skip_reasons;

  double skip_rate() const { return records ? static_cast<double>(skipped) / static_cast<double>(records) : 0.0; }
};

struct IngestOptions {
  std::string split = "train";
  double max_skip_rate = 0.05;
  int first_id = 0;
};

// Throws DataError when more than `max_skip_rate` of the records are malformed
// and std::ios_base::failure when a file cannot be read.
Corpus ingest_wikisql(const std::filesystem::path& tables_file, const std::filesystem::path& data_file,
                      const IngestOptions& options, IngestReport* report = nullptr);

}  // namespace anchorparse
