#include "ehrd3pm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

namespace {

Vec average_ranks(const Vec& x) {
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return x[a] < x[b]; });
  Vec ranks(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && x[order[static_cast<std::size_t>(j + 1)]] == x[order[static_cast<std::size_t>(i)]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0; // 1-based
    for (Index t = i; t <= j; ++t) ranks[order[static_cast<std::size_t>(t)]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const Vec& u, const Vec& v) {
  const double mu = u.mean(), mv = v.mean();
  const Vec du = u.array() - mu;
  const Vec dv = v.array() - mv;
  const double denom = std::sqrt(du.squaredNorm() * dv.squaredNorm());
  require(denom > 0.0, Err::DegenerateInput, "constant input vector");
  return du.dot(dv) / denom;
}

Mat to_dense(const CodeMatrix& m) {
  Mat x(m.n_records, m.n_codes);
  for (Index r = 0; r < m.n_records; ++r)
    for (Index c = 0; c < m.n_codes; ++c) x(r, c) = static_cast<double>(m.bits(r, c));
  return x;
}

double rbf(double sq_dist, double bandwidth) {
  return std::exp(-sq_dist / (2.0 * bandwidth * bandwidth));
}

} // namespace

double spearman(const Vec& u, const Vec& v) {
  require(u.size() == v.size(), Err::ShapeMismatch, "length mismatch");
  require(u.size() >= 2, Err::DegenerateInput, "need at least two points");
  return pearson(average_ranks(u), average_ranks(v));
}

Mat covariance(const CodeMatrix& m) {
  require(m.n_records >= 2, Err::EmptyMatrix, "covariance needs at least two records");
  const Mat x = to_dense(m);
  const RowVec mean = x.colwise().mean();
  const Mat centered = x.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(m.n_records);
}

double cmd(const CodeMatrix& a, const CodeMatrix& b) {
  require(a.n_codes == b.n_codes, Err::ShapeMismatch, "code counts differ");
  return (covariance(a) - covariance(b)).norm();
}

double cmd_vs_covariance(const CodeMatrix& a, const Mat& reference_cov) {
  require(reference_cov.rows() == a.n_codes && reference_cov.cols() == a.n_codes,
          Err::ShapeMismatch, "reference covariance shape mismatch");
  return (covariance(a) - reference_cov).norm();
}

double mean_pairwise_distance(const CodeMatrix& a, const CodeMatrix& b) {
  require(a.n_codes == b.n_codes, Err::ShapeMismatch, "code counts differ");
  const Index n = a.n_records + b.n_records;
  require(n >= 2, Err::TooFewSamples, "need at least two pooled samples");
  const auto row = [&](Index i) { return i < a.n_records ? a.bits.row(i) : b.bits.row(i - a.n_records); };
  double sum = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      double sq = 0.0;
      const auto ri = row(i);
      const auto rj = row(j);
      for (Index c = 0; c < a.n_codes; ++c) {
        const double d = static_cast<double>(ri[c]) - static_cast<double>(rj[c]);
        sq += d * d;
      }
      sum += std::sqrt(sq);
    }
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double mmd_single_kernel(const CodeMatrix& a, const CodeMatrix& b, double bandwidth) {
  require(a.n_codes == b.n_codes, Err::ShapeMismatch, "code counts differ");
  require(a.n_records >= 2 && b.n_records >= 2, Err::TooFewSamples,
          "each set needs at least two records");
  require(bandwidth > 0.0, Err::InvalidConfig, "bandwidth must be positive");

  const Mat xa = to_dense(a);
  const Mat xb = to_dense(b);
  const auto within = [&](const Mat& x) {
    const Index n = x.rows();
    double sum = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        sum += rbf((x.row(i) - x.row(j)).squaredNorm(), bandwidth);
      }
    return sum / (static_cast<double>(n) * static_cast<double>(n - 1));
  };
  double cross = 0.0;
  for (Index i = 0; i < xa.rows(); ++i)
    for (Index j = 0; j < xb.rows(); ++j)
      cross += rbf((xa.row(i) - xb.row(j)).squaredNorm(), bandwidth);
  cross /= static_cast<double>(xa.rows()) * static_cast<double>(xb.rows());

  return within(xa) + within(xb) - cross;
}

double mmd(const CodeMatrix& a, const CodeMatrix& b, const MmdConfig& config,
           bool* degenerate_bandwidth) {
  require(config.kernels >= 1, Err::InvalidConfig, "kernel count must be >= 1");
  if (degenerate_bandwidth) *degenerate_bandwidth = false;
  const double avg = mean_pairwise_distance(a, b);
  if (avg == 0.0) {
    // all pooled samples identical
    if (degenerate_bandwidth) *degenerate_bandwidth = true;
    return 0.0;
  }
  const int m = config.kernels;
  double total = 0.0;
  for (int gamma = 1; gamma <= m; ++gamma) {
    const double h = avg * std::pow(2.0, static_cast<double>(gamma) - static_cast<double>(m) / 2.0);
    total += mmd_single_kernel(a, b, h);
  }
  return total / static_cast<double>(m);
}

double mcad(const CodeMatrix& a, const CodeMatrix& b, int bins, double lo, double hi) {
  require(bins >= 1, Err::InvalidConfig, "bins must be >= 1");
  require(hi > lo, Err::InvalidConfig, "range must be non-empty");
  require(a.n_codes == b.n_codes, Err::ShapeMismatch, "code counts differ");
  require(a.n_records >= 1 && b.n_records >= 1, Err::EmptyMatrix, "empty matrix");

  const double width = (hi - lo) / static_cast<double>(bins);
  const auto histogram = [&](const CodeMatrix& m) {
    Vec h = Vec::Zero(bins);
    for (Index r = 0; r < m.n_records; ++r) {
      double count = 0.0;
      for (Index c = 0; c < m.n_codes; ++c) count += m.bits(r, c);
      int bin = static_cast<int>(std::floor((count - lo) / width));
      bin = std::clamp(bin, 0, bins - 1);
      h[bin] += 1.0;
    }
    return Vec(h / static_cast<double>(m.n_records));
  };
  return 0.5 * (histogram(a) - histogram(b)).cwiseAbs().sum();
}

double auroc(const Vec& scores, const std::vector<int>& labels) {
  require(scores.size() == static_cast<Index>(labels.size()), Err::ShapeMismatch,
          "scores/labels length mismatch");
  Index n_pos = 0, n_neg = 0;
  for (int y : labels) (y ? n_pos : n_neg) += 1;
  require(n_pos > 0 && n_neg > 0, Err::SingleClassLabels, "both classes required");

  const Vec ranks = average_ranks(scores);
  double rank_sum_pos = 0.0;
  for (Index i = 0; i < scores.size(); ++i)
    if (labels[static_cast<std::size_t>(i)]) rank_sum_pos += ranks[i];
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auprc(const Vec& scores, const std::vector<int>& labels) {
  require(scores.size() == static_cast<Index>(labels.size()), Err::ShapeMismatch,
          "scores/labels length mismatch");
  const Index n = scores.size();
  Index n_pos = 0;
  for (int y : labels) n_pos += y ? 1 : 0;
  require(n_pos > 0, Err::NoPositives, "need at least one positive label");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  Index tp = 0;
  for (Index rank = 1; rank <= n; ++rank) {
    const Index idx = order[static_cast<std::size_t>(rank - 1)];
    if (!labels[static_cast<std::size_t>(idx)]) continue;
    ++tp;
    ap += static_cast<double>(tp) / static_cast<double>(rank);
  }
  return ap / static_cast<double>(n_pos);
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  for (const auto& [k, v] : values) {
    require(std::isfinite(v), Err::NonFiniteActivation, "non-finite metric " + k);
    j["values"][k] = v;
  }
  for (const auto& [k, v] : sample_sizes) j["sample_sizes"][k] = v;
  for (const auto& [k, v] : seeds) j["seeds"][k] = v;
  for (const auto& [k, v] : config_digests) j["config_digests"][k] = v;
  for (const auto& [k, v] : flags) j["flags"][k] = v;
  return j.dump();
}

std::string digest_hex(const std::string& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

} // namespace ehrd3pm
