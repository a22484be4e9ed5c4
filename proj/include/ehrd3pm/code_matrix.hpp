#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ehrd3pm/rng.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

// Binary medical-code matrix: one row per record, one column per code.
// The token view is fixed at K=2: bit 1 maps to category 0 ([1,0], code
// present), bit 0 to category 1 ([0,1], absent). Immutable by convention
// after construction; safe for concurrent reads.
struct CodeMatrix {
  Index n_records = 0;
  Index n_codes = 0;
  BitMatrix bits; // n_records x n_codes, cells 0/1
  std::vector<std::string> code_labels; // empty or n_codes entries

  static constexpr int kCategories = 2;

  // category-index view of the one-hot tokens
  TokenMatrix tokens() const;

  bool empty() const { return n_records == 0; }
};

CodeMatrix from_tokens(const TokenMatrix& tokens);

struct DatasetSplit {
  CodeMatrix train;
  CodeMatrix validation;
  CodeMatrix test;
  std::uint64_t split_seed = 0;
};

// rows: per record, strictly ascending code indices in [0, n_codes)
CodeMatrix encode_records(const std::vector<std::vector<int>>& sparse_rows, Index n_codes);

// per-code occurrence fraction; requires at least one record
Vec prevalence(const CodeMatrix& m);

// Sparse text format: "N=<int>\n" header, one record per line as ascending
// space-separated indices, empty line = all-zero record, final newline required.
CodeMatrix parse_dataset(std::istream& stream);
CodeMatrix parse_dataset_string(const std::string& text);
void serialize_dataset(const CodeMatrix& m, std::ostream& out);
std::string serialize_dataset_string(const CodeMatrix& m);

CodeMatrix load_dataset(const std::string& path);
void save_dataset(const CodeMatrix& m, const std::string& path);

// Dense CSV interop: 0/1 cells, comma separated, no header row.
CodeMatrix parse_dense_csv(std::istream& stream);

CodeMatrix take_rows(const CodeMatrix& m, const std::vector<int>& rows);

// Shuffled disjoint partition; n_train + n_valid <= n_records, remainder is test.
DatasetSplit split_dataset(const CodeMatrix& m, Index n_train, Index n_valid, std::uint64_t seed);

} // namespace ehrd3pm
