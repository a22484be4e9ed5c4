#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ehrd3pm/code_matrix.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

// Spearman rank correlation; ties get the mean rank.
double spearman(const Vec& u, const Vec& v);

// Frobenius norm of the difference of population (1/n) covariance matrices.
double cmd(const CodeMatrix& a, const CodeMatrix& b);
Mat covariance(const CodeMatrix& m);
double cmd_vs_covariance(const CodeMatrix& a, const Mat& reference_cov);

struct MmdConfig {
  int kernels = 5; // m mixture components
  // bandwidths h_gamma = avg * 2^(gamma - m/2), gamma = 1..m, with avg the
  // mean pairwise L2 distance over distinct index pairs of the pooled samples
};

// Unbiased two-sample estimator averaged over the bandwidth mixture; may be
// negative. All pooled points identical -> 0 with degenerate set.
double mmd(const CodeMatrix& a, const CodeMatrix& b, const MmdConfig& config = {},
           bool* degenerate_bandwidth = nullptr);
// single Gaussian-RBF kernel at an explicit bandwidth
double mmd_single_kernel(const CodeMatrix& a, const CodeMatrix& b, double bandwidth);
double mean_pairwise_distance(const CodeMatrix& a, const CodeMatrix& b);

// Total variation distance between histograms of per-record positive-code
// counts binned over [lo, hi); out-of-range counts clip to the boundary bins.
double mcad(const CodeMatrix& a, const CodeMatrix& b, int bins, double lo, double hi);

// Mann-Whitney probability that a random positive outscores a random
// negative, ties counting one half.
double auroc(const Vec& scores, const std::vector<int>& labels);

// Average precision over positives in descending score order, ties broken by
// stable index order.
double auprc(const Vec& scores, const std::vector<int>& labels);

struct MetricReport {
  std::map<std::string, double> values;
  std::map<std::string, std::int64_t> sample_sizes;
  std::map<std::string, std::string> seeds;
  std::map<std::string, std::string> config_digests;
  std::map<std::string, bool> flags;

  // canonical JSON (sorted keys, no whitespace); requires finite values
  std::string to_json() const;
};

// FNV-1a 64 over a canonical string, rendered as 16 hex digits
std::string digest_hex(const std::string& canonical);

} // namespace ehrd3pm
