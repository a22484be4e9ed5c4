#include "ehrd3pm/code_matrix.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

TokenMatrix CodeMatrix::tokens() const {
  TokenMatrix t(n_records, n_codes);
  for (Index r = 0; r < n_records; ++r)
    for (Index i = 0; i < n_codes; ++i) t(r, i) = bits(r, i) ? 0 : 1;
  return t;
}

CodeMatrix from_tokens(const TokenMatrix& tokens) {
  CodeMatrix m;
  m.n_records = tokens.rows();
  m.n_codes = tokens.cols();
  m.bits.resize(m.n_records, m.n_codes);
  for (Index r = 0; r < m.n_records; ++r)
    for (Index i = 0; i < m.n_codes; ++i) {
      const int c = tokens(r, i);
      require(c == 0 || c == 1, Err::NotOneHot, "token category outside {0,1}");
      m.bits(r, i) = c == 0 ? 1 : 0;
    }
  return m;
}

CodeMatrix encode_records(const std::vector<std::vector<int>>& sparse_rows, Index n_codes) {
  CodeMatrix m;
  m.n_records = static_cast<Index>(sparse_rows.size());
  m.n_codes = n_codes;
  m.bits = BitMatrix::Zero(m.n_records, n_codes);
  for (Index r = 0; r < m.n_records; ++r) {
    int prev = -1;
    for (int idx : sparse_rows[static_cast<std::size_t>(r)]) {
      require(idx >= 0 && idx < n_codes, Err::IndexOutOfRange,
              "code index " + std::to_string(idx) + " outside [0," + std::to_string(n_codes) + ")");
      require(idx > prev, Err::NonAscendingRow,
              "record " + std::to_string(r) + " not strictly ascending");
      m.bits(r, idx) = 1;
      prev = idx;
    }
  }
  return m;
}

Vec prevalence(const CodeMatrix& m) {
  require(m.n_records >= 1, Err::EmptyMatrix, "prevalence needs at least one record");
  Vec p = Vec::Zero(m.n_codes);
  for (Index r = 0; r < m.n_records; ++r)
    for (Index i = 0; i < m.n_codes; ++i) p[i] += m.bits(r, i);
  p /= static_cast<double>(m.n_records);
  return p;
}

namespace {

int parse_int(const std::string& tok, Err code, const char* what) {
  int value = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw_validation(code, std::string(what) + ": '" + tok + "'");
  return value;
}

} // namespace

CodeMatrix parse_dataset(std::istream& stream) {
  std::string header;
  if (!std::getline(stream, header))
    throw_validation(Err::MalformedHeader, "empty stream");
  if (header.rfind("N=", 0) != 0)
    throw_validation(Err::MalformedHeader, "expected 'N=<int>' header");
  const Index n_codes = parse_int(header.substr(2), Err::MalformedHeader, "bad code count");
  require(n_codes >= 1, Err::MalformedHeader, "N must be positive");

  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<int> row;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) row.push_back(parse_int(tok, Err::MalformedRecord, "bad code index"));
    rows.push_back(std::move(row));
  }
  return encode_records(rows, n_codes);
}

CodeMatrix parse_dataset_string(const std::string& text) {
  require(!text.empty() && text.back() == '\n', Err::MalformedRecord, "final newline required");
  std::istringstream in(text);
  return parse_dataset(in);
}

void serialize_dataset(const CodeMatrix& m, std::ostream& out) {
  out << "N=" << m.n_codes << '\n';
  for (Index r = 0; r < m.n_records; ++r) {
    bool first = true;
    for (Index i = 0; i < m.n_codes; ++i) {
      if (!m.bits(r, i)) continue;
      if (!first) out << ' ';
      out << i;
      first = false;
    }
    out << '\n';
  }
}

std::string serialize_dataset_string(const CodeMatrix& m) {
  std::ostringstream out;
  serialize_dataset(m, out);
  return out.str();
}

CodeMatrix load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_validation(Err::IoFailure, "cannot open dataset " + path);
  return parse_dataset(in);
}

void save_dataset(const CodeMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_validation(Err::IoFailure, "cannot write dataset " + path);
  serialize_dataset(m, out);
  if (!out) throw_validation(Err::IoFailure, "write failed for " + path);
}

CodeMatrix parse_dense_csv(std::istream& stream) {
  std::vector<std::vector<int>> sparse;
  Index n_codes = -1;
  std::string line;
  Index row_idx = 0;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<int> row;
    Index col = 0;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      if (cell == "1")
        row.push_back(static_cast<int>(col));
      else if (cell != "0")
        throw_validation(Err::MalformedRecord, "CSV cell must be 0 or 1, got '" + cell + "'");
      ++col;
    }
    if (n_codes < 0)
      n_codes = col;
    else
      require(col == n_codes, Err::ShapeMismatch,
              "CSV row " + std::to_string(row_idx) + " has " + std::to_string(col) + " cells");
    sparse.push_back(std::move(row));
    ++row_idx;
  }
  require(n_codes >= 1, Err::MalformedHeader, "empty CSV");
  return encode_records(sparse, n_codes);
}

CodeMatrix take_rows(const CodeMatrix& m, const std::vector<int>& rows) {
  CodeMatrix out;
  out.n_records = static_cast<Index>(rows.size());
  out.n_codes = m.n_codes;
  out.code_labels = m.code_labels;
  out.bits.resize(out.n_records, out.n_codes);
  for (Index r = 0; r < out.n_records; ++r) {
    const int src = rows[static_cast<std::size_t>(r)];
    require(src >= 0 && src < m.n_records, Err::IndexOutOfRange, "row index out of range");
    out.bits.row(r) = m.bits.row(src);
  }
  return out;
}

DatasetSplit split_dataset(const CodeMatrix& m, Index n_train, Index n_valid, std::uint64_t seed) {
  require(n_train >= 0 && n_valid >= 0 && n_train + n_valid <= m.n_records, Err::ShapeMismatch,
          "split sizes exceed record count");
  std::vector<int> order(static_cast<std::size_t>(m.n_records));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5117));
  rng.shuffle(order);

  const auto slice = [&](Index begin, Index count) {
    std::vector<int> idx(order.begin() + begin, order.begin() + begin + count);
    return take_rows(m, idx);
  };
  DatasetSplit split;
  split.train = slice(0, n_train);
  split.validation = slice(n_train, n_valid);
  split.test = slice(n_train + n_valid, m.n_records - n_train - n_valid);
  split.split_seed = seed;
  return split;
}

} // namespace ehrd3pm
