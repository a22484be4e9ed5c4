#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ehrd3pm/downstream.hpp"
#include "ehrd3pm/error.hpp"
#include "ehrd3pm/metrics.hpp"
#include "ehrd3pm/privacy.hpp"
#include "ehrd3pm/rng.hpp"

using namespace ehrd3pm;

namespace {

CodeMatrix from_rows(const std::vector<std::vector<int>>& dense) {
  CodeMatrix m;
  m.n_records = static_cast<Index>(dense.size());
  m.n_codes = static_cast<Index>(dense[0].size());
  m.bits.resize(m.n_records, m.n_codes);
  for (Index r = 0; r < m.n_records; ++r)
    for (Index c = 0; c < m.n_codes; ++c)
      m.bits(r, c) = static_cast<std::uint8_t>(dense[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  return m;
}

CodeMatrix random_matrix(Index n, Index codes, Rng& rng, double density = 0.5) {
  CodeMatrix m;
  m.n_records = n;
  m.n_codes = codes;
  m.bits.resize(n, codes);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < codes; ++c) m.bits(r, c) = rng.uniform01() < density ? 1 : 0;
  return m;
}

// ---- brute-force oracles, written straight from the definitions ----

double oracle_spearman(const Vec& u, const Vec& v) {
  const auto ranks = [](const Vec& x) {
    const Index n = x.size();
    Vec r(n);
    for (Index i = 0; i < n; ++i) {
      double less = 0.0, equal = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (x[j] < x[i]) ++less;
        if (x[j] == x[i]) ++equal;
      }
      r[i] = less + 0.5 * (equal - 1.0) + 1.0;
    }
    return r;
  };
  const Vec ru = ranks(u), rv = ranks(v);
  const double mu = ru.mean(), mv = rv.mean();
  double num = 0.0, du = 0.0, dv = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    num += (ru[i] - mu) * (rv[i] - mv);
    du += (ru[i] - mu) * (ru[i] - mu);
    dv += (rv[i] - mv) * (rv[i] - mv);
  }
  return num / std::sqrt(du * dv);
}

double oracle_cmd(const CodeMatrix& a, const CodeMatrix& b) {
  const auto cov = [](const CodeMatrix& m, Index i, Index j) {
    double mi = 0.0, mj = 0.0, mij = 0.0;
    for (Index r = 0; r < m.n_records; ++r) {
      mi += m.bits(r, i);
      mj += m.bits(r, j);
      mij += m.bits(r, i) * m.bits(r, j);
    }
    const double n = static_cast<double>(m.n_records);
    return mij / n - (mi / n) * (mj / n);
  };
  double sq = 0.0;
  for (Index i = 0; i < a.n_codes; ++i)
    for (Index j = 0; j < a.n_codes; ++j) {
      const double d = cov(a, i, j) - cov(b, i, j);
      sq += d * d;
    }
  return std::sqrt(sq);
}

double oracle_mmd_kernel(const CodeMatrix& a, const CodeMatrix& b, double h) {
  const auto k = [&](const CodeMatrix& x, Index i, const CodeMatrix& y, Index j) {
    double sq = 0.0;
    for (Index c = 0; c < x.n_codes; ++c) {
      const double d = static_cast<double>(x.bits(i, c)) - static_cast<double>(y.bits(j, c));
      sq += d * d;
    }
    return std::exp(-sq / (2.0 * h * h));
  };
  const double na = static_cast<double>(a.n_records), nb = static_cast<double>(b.n_records);
  double within_a = 0.0, within_b = 0.0, cross = 0.0;
  for (Index i = 0; i < a.n_records; ++i)
    for (Index j = 0; j < a.n_records; ++j)
      if (i != j) within_a += k(a, i, a, j);
  for (Index i = 0; i < b.n_records; ++i)
    for (Index j = 0; j < b.n_records; ++j)
      if (i != j) within_b += k(b, i, b, j);
  for (Index i = 0; i < a.n_records; ++i)
    for (Index j = 0; j < b.n_records; ++j) cross += k(a, i, b, j);
  return within_a / (na * (na - 1.0)) + within_b / (nb * (nb - 1.0)) - cross / (na * nb);
}

double oracle_mmd(const CodeMatrix& a, const CodeMatrix& b, int m) {
  double avg = 0.0;
  std::vector<const CodeMatrix*> sets{&a, &b};
  std::vector<std::pair<const CodeMatrix*, Index>> pooled;
  for (const auto* s : sets)
    for (Index r = 0; r < s->n_records; ++r) pooled.emplace_back(s, r);
  double count = 0.0;
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j) {
      double sq = 0.0;
      for (Index c = 0; c < a.n_codes; ++c) {
        const double d = static_cast<double>(pooled[i].first->bits(pooled[i].second, c)) -
                         static_cast<double>(pooled[j].first->bits(pooled[j].second, c));
        sq += d * d;
      }
      avg += std::sqrt(sq);
      count += 1.0;
    }
  avg /= count;
  double total = 0.0;
  for (int gamma = 1; gamma <= m; ++gamma)
    total += oracle_mmd_kernel(a, b, avg * std::pow(2.0, gamma - m / 2.0));
  return total / m;
}

double oracle_mcad(const CodeMatrix& a, const CodeMatrix& b, int bins, double lo, double hi) {
  const auto hist = [&](const CodeMatrix& m) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (Index r = 0; r < m.n_records; ++r) {
      double count = 0.0;
      for (Index c = 0; c < m.n_codes; ++c) count += m.bits(r, c);
      int bin = static_cast<int>(std::floor((count - lo) / ((hi - lo) / bins)));
      if (bin < 0) bin = 0;
      if (bin >= bins) bin = bins - 1;
      h[static_cast<std::size_t>(bin)] += 1.0 / static_cast<double>(m.n_records);
    }
    return h;
  };
  const auto ha = hist(a), hb = hist(b);
  double tv = 0.0;
  for (int i = 0; i < bins; ++i) tv += std::abs(ha[static_cast<std::size_t>(i)] - hb[static_cast<std::size_t>(i)]);
  return 0.5 * tv;
}

double oracle_auroc(const Vec& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (Index i = 0; i < scores.size(); ++i)
    for (Index j = 0; j < scores.size(); ++j) {
      if (!labels[static_cast<std::size_t>(i)] || labels[static_cast<std::size_t>(j)]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  return wins / pairs;
}

double oracle_auprc(const Vec& scores, const std::vector<int>& labels) {
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
  double n_pos = 0.0;
  for (int y : labels) n_pos += y;
  double ap = 0.0, tp = 0.0;
  for (std::size_t rank = 1; rank <= order.size(); ++rank) {
    if (!labels[static_cast<std::size_t>(order[rank - 1])]) continue;
    tp += 1.0;
    ap += (tp / static_cast<double>(rank)) / n_pos;
  }
  return ap;
}

} // namespace

TEST_CASE("spearman examples") {
  Vec u(3), v(3);
  u << 1, 2, 3;
  v << 3, 1, 2;
  CHECK(spearman(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(u, v) == doctest::Approx(-0.5).epsilon(1e-12));
  v << 3, 2, 1;
  CHECK(spearman(u, v) == doctest::Approx(-1.0).epsilon(1e-15));
  Vec constant = Vec::Ones(3);
  CHECK_THROWS_WITH_AS(spearman(u, constant), doctest::Contains("DegenerateInput"), Error);
}

TEST_CASE("spearman handles ties like the counting oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 3 + rng.uniform_int(8);
    Vec u(n), v(n);
    for (Index i = 0; i < n; ++i) {
      u[i] = rng.uniform_int(4); // many ties
      v[i] = rng.uniform_int(4);
    }
    const bool u_const = (u.array() == u[0]).all();
    const bool v_const = (v.array() == v[0]).all();
    if (u_const || v_const) continue;
    CHECK(spearman(u, v) == doctest::Approx(oracle_spearman(u, v)).epsilon(1e-12));
  }
}

TEST_CASE("cmd examples") {
  const CodeMatrix a = from_rows({{0, 0}, {1, 1}});
  const CodeMatrix b = from_rows({{0, 1}, {1, 0}});
  CHECK(cmd(a, a) == 0.0);
  CHECK(cmd(a, b) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

  const CodeMatrix a_perm = from_rows({{1, 1}, {0, 0}});
  CHECK(cmd(a_perm, b) == doctest::Approx(cmd(a, b)).epsilon(1e-15));
}

TEST_CASE("mmd hand-derived single-kernel value") {
  const CodeMatrix a = from_rows({{0, 0}, {1, 1}});
  const double avg = mean_pairwise_distance(a, a);
  CHECK(avg == doctest::Approx(2.0 * std::sqrt(2.0) / 3.0).epsilon(1e-14));
  const double h = avg * std::pow(2.0, -1.5);
  const double est = mmd_single_kernel(a, a, h);
  CHECK(est == doctest::Approx(1.5 * std::exp(-9.0) - 0.5).epsilon(1e-12));
  CHECK(est == doctest::Approx(-0.4998).epsilon(5e-5)); // 4 decimals
}

TEST_CASE("mmd is symmetric and separates far clouds") {
  Rng rng(14);
  const CodeMatrix a = random_matrix(4, 3, rng);
  const CodeMatrix b = random_matrix(5, 3, rng);
  CHECK(mmd(a, b) == mmd(b, a));

  // two disjoint far-apart point clouds in a wider space
  CodeMatrix left = from_rows({{1, 1, 1, 0, 0, 0, 0, 0, 0}, {1, 1, 0, 1, 0, 0, 0, 0, 0}});
  CodeMatrix right = from_rows({{0, 0, 0, 0, 0, 1, 1, 1, 1}, {0, 0, 0, 0, 1, 0, 1, 1, 1}});
  const double est = mmd(left, right);
  CHECK(est > 0.0);
  CHECK(est == doctest::Approx(oracle_mmd(left, right, 5)).epsilon(1e-12));

  // identical pooled points: degenerate bandwidth convention
  const CodeMatrix same = from_rows({{1, 0}, {1, 0}});
  bool degenerate = false;
  CHECK(mmd(same, same, MmdConfig{}, &degenerate) == 0.0);
  CHECK(degenerate);
}

TEST_CASE("mcad examples") {
  const CodeMatrix a = from_rows({{1, 0, 0}, {1, 1, 0}}); // counts 1, 2
  const CodeMatrix b = from_rows({{0, 1, 1}, {1, 1, 0}}); // counts 2, 2
  CHECK(mcad(a, a, 4, 0, 4) == 0.0);
  CHECK(mcad(a, b, 4, 0, 4) == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    const CodeMatrix x = random_matrix(4, 5, rng);
    const CodeMatrix y = random_matrix(3, 5, rng);
    const double v = mcad(x, y, 3, 0, 6);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("auroc examples and invariance") {
  Vec s(3);
  std::vector<int> y{1, 0, 1};
  s << 0.9, 0.8, 0.3;
  CHECK(auroc(s, y) == doctest::Approx(0.5).epsilon(1e-15));

  Vec perfect(4);
  perfect << 0.9, 0.8, 0.2, 0.1;
  CHECK(auroc(perfect, {1, 1, 0, 0}) == 1.0);

  Vec ties = Vec::Constant(4, 0.5);
  CHECK(auroc(ties, {1, 0, 1, 0}) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_WITH_AS(auroc(ties, {1, 1, 1, 1}), doctest::Contains("SingleClassLabels"), Error);

  // strictly monotone transforms leave both ranking metrics unchanged
  Rng rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 4 + rng.uniform_int(8);
    Vec scores(n);
    std::vector<int> labels(static_cast<std::size_t>(n));
    int pos = 0;
    for (Index i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-2.0, 2.0);
      labels[static_cast<std::size_t>(i)] = rng.uniform01() < 0.5 ? 1 : 0;
      pos += labels[static_cast<std::size_t>(i)];
    }
    if (pos == 0 || pos == n) continue;
    const Vec warped = scores.unaryExpr([](double x) { return std::exp(0.7 * x) + x; });
    CHECK(auroc(scores, labels) == doctest::Approx(auroc(warped, labels)).epsilon(1e-12));
    CHECK(auprc(scores, labels) == doctest::Approx(auprc(warped, labels)).epsilon(1e-12));
  }
}

TEST_CASE("auprc examples") {
  Vec s(2);
  s << 0.9, 0.1;
  CHECK(auprc(s, {1, 0}) == 1.0);
  CHECK(auprc(s, {0, 1}) == doctest::Approx(0.5).epsilon(1e-15));

  Vec many(5);
  many << 0.9, 0.5, 0.4, 0.3, 0.2;
  CHECK(auprc(many, {1, 0, 0, 0, 0}) == 1.0);
  CHECK_THROWS_WITH_AS(auprc(many, {0, 0, 0, 0, 0}), doctest::Contains("NoPositives"), Error);
}

TEST_CASE("metrics match brute-force oracles on exhaustive small instances") {
  // every pair of 2-record 2-code matrices, fully enumerated
  std::vector<CodeMatrix> tiny;
  for (int bits = 0; bits < 16; ++bits)
    tiny.push_back(from_rows({{bits & 1, (bits >> 1) & 1}, {(bits >> 2) & 1, (bits >> 3) & 1}}));
  for (const auto& a : tiny)
    for (const auto& b : tiny) {
      CHECK(cmd(a, b) == doctest::Approx(oracle_cmd(a, b)).epsilon(1e-12));
      CHECK(mcad(a, b, 3, 0, 3) == doctest::Approx(oracle_mcad(a, b, 3, 0, 3)).epsilon(1e-12));
      const double avg = mean_pairwise_distance(a, b);
      if (avg > 0.0)
        CHECK(mmd(a, b) == doctest::Approx(oracle_mmd(a, b, 5)).epsilon(1e-9));
    }

  // random instances over every shape with <= 5 records and <= 4 codes
  Rng rng(17);
  for (Index na = 2; na <= 5; ++na)
    for (Index nb = 2; nb <= 5; ++nb)
      for (Index codes = 1; codes <= 4; ++codes)
        for (int trial = 0; trial < 6; ++trial) {
          const CodeMatrix a = random_matrix(na, codes, rng);
          const CodeMatrix b = random_matrix(nb, codes, rng);
          CHECK(cmd(a, b) == doctest::Approx(oracle_cmd(a, b)).epsilon(1e-9));
          CHECK(mcad(a, b, 4, 0, 4) == doctest::Approx(oracle_mcad(a, b, 4, 0, 4)).epsilon(1e-9));
          const double avg = mean_pairwise_distance(a, b);
          if (avg > 0.0)
            CHECK(mmd(a, b) == doctest::Approx(oracle_mmd(a, b, 5)).epsilon(1e-9));
        }

  // ranking metrics against pair counting / rank scans
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + rng.uniform_int(4);
    Vec scores(n);
    std::vector<int> labels(static_cast<std::size_t>(n));
    int pos = 0;
    for (Index i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.uniform_int(4)) / 2.0; // ties likely
      labels[static_cast<std::size_t>(i)] = rng.uniform01() < 0.5 ? 1 : 0;
      pos += labels[static_cast<std::size_t>(i)];
    }
    if (pos > 0) CHECK(auprc(scores, labels) == doctest::Approx(oracle_auprc(scores, labels)).epsilon(1e-9));
    if (pos > 0 && pos < n)
      CHECK(auroc(scores, labels) == doctest::Approx(oracle_auroc(scores, labels)).epsilon(1e-9));
  }

  // spearman on prevalence vectors of random matrices
  for (int trial = 0; trial < 50; ++trial) {
    const CodeMatrix a = random_matrix(5, 4, rng);
    const CodeMatrix b = random_matrix(5, 4, rng);
    const Vec pa = prevalence(a), pb = prevalence(b);
    const bool a_const = (pa.array() == pa[0]).all();
    const bool b_const = (pb.array() == pb[0]).all();
    if (a_const || b_const) continue;
    CHECK(spearman(pa, pb) == doctest::Approx(oracle_spearman(pa, pb)).epsilon(1e-9));
  }
}

TEST_CASE("attribute inference risk hand traces") {
  // synthetic copy of the lone real record: every hidden attribute recovered
  const CodeMatrix real = from_rows({{1, 0, 1, 1}});
  const CodeMatrix synth = from_rows({{1, 0, 1, 1}, {0, 1, 0, 0}});
  CHECK(attribute_inference_risk(real, synth, {0}) == 1.0);

  // hidden attributes all zero in the real data: nothing to recover
  const CodeMatrix real_zeros = from_rows({{1, 0, 0}, {0, 0, 0}});
  const CodeMatrix synth_any = from_rows({{1, 1, 1}, {0, 1, 0}});
  CHECK(attribute_inference_risk(real_zeros, synth_any, {0}) == 0.0);

  // 2x2 hand trace, 1 exposed bit
  // real r0 = [1, 1, 0], r1 = [0, 0, 1]; synth s0 = [1, 1, 1], s1 = [0, 1, 0]
  // exposed {0}: r0 -> s0, r1 -> s1
  // hidden attr 1: truth [1, 0], pred [1, 1]: tp=1 fp=1 fn=0, F1 = 2/3, prev 0.5
  // hidden attr 2: truth [0, 1], pred [1, 0]: tp=0 fp=1 fn=1, F1 = 0, prev 0.5
  // weighted: (0.5 * 2/3 + 0.5 * 0) / 1.0 = 1/3
  const CodeMatrix real2 = from_rows({{1, 1, 0}, {0, 0, 1}});
  const CodeMatrix synth2 = from_rows({{1, 1, 1}, {0, 1, 0}});
  CHECK(attribute_inference_risk(real2, synth2, {0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(attribute_inference_risk(real2, synth2, {0, 1, 2}),
                       doctest::Contains("ExposedTooLarge"), Error);

  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const CodeMatrix r = random_matrix(5, 6, rng);
    const CodeMatrix s = random_matrix(4, 6, rng);
    const double risk = attribute_inference_risk(r, s, {1, 4});
    CHECK(risk >= 0.0);
    CHECK(risk <= 1.0);
  }
}

TEST_CASE("membership inference risk hand traces") {
  // synth == train, holdout far away: perfect separation
  const CodeMatrix train = from_rows({{1, 0, 0, 0, 0, 0, 0, 0, 0, 0}});
  CodeMatrix holdout = from_rows({{0, 1, 1, 1, 1, 1, 1, 1, 1, 1}});
  CHECK(membership_inference_risk(train, holdout, train) == 1.0);

  // train at L2 distance 1, holdout at distance 5 from the only synthetic
  std::vector<int> synth_row(32, 0), train_row(32, 0), holdout_row(32, 0);
  train_row[0] = 1;                                  // distance 1
  for (int i = 0; i < 25; ++i) holdout_row[i] = 1;   // distance 5
  const CodeMatrix synth = from_rows({synth_row});
  const CodeMatrix tr = from_rows({train_row});
  const CodeMatrix ho = from_rows({holdout_row});
  CHECK(membership_inference_risk(tr, ho, synth, 3.0) == 1.0);

  // zero threshold predicts nobody: F1 convention gives 0
  CHECK(membership_inference_risk(tr, ho, synth, 0.0) == 0.0);

  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const CodeMatrix a = random_matrix(5, 8, rng);
    const CodeMatrix b = random_matrix(5, 8, rng);
    const CodeMatrix s = random_matrix(6, 8, rng);
    const double risk = membership_inference_risk(a, b, s, 2.0);
    CHECK(risk >= 0.0);
    CHECK(risk <= 1.0);
  }
}

namespace {

// Newton solve of the same strictly convex objective, independent of the
// gradient-descent path
void oracle_logistic(const Mat& x, const std::vector<int>& y, double reg, Vec& w, double& b) {
  const Index n = x.rows(), d = x.cols();
  Mat xa(n, d + 1);
  xa << x, Vec::Ones(n);
  Vec theta = Vec::Zero(d + 1);
  for (int it = 0; it < 60; ++it) {
    Vec p(n);
    for (Index i = 0; i < n; ++i) p[i] = 1.0 / (1.0 + std::exp(-xa.row(i).dot(theta)));
    Vec grad = Vec::Zero(d + 1);
    for (Index i = 0; i < n; ++i)
      grad += (p[i] - (y[static_cast<std::size_t>(i)] ? 1.0 : 0.0)) * xa.row(i).transpose();
    grad /= static_cast<double>(n);
    for (Index j = 0; j < d; ++j) grad[j] += reg * theta[j];
    Mat hess = Mat::Zero(d + 1, d + 1);
    for (Index i = 0; i < n; ++i)
      hess += p[i] * (1.0 - p[i]) * xa.row(i).transpose() * xa.row(i);
    hess /= static_cast<double>(n);
    for (Index j = 0; j < d; ++j) hess(j, j) += reg;
    theta -= hess.ldlt().solve(grad);
  }
  w = theta.head(d);
  b = theta[d];
}

} // namespace

TEST_CASE("downstream logistic classifier") {
  // linearly separable toy set
  Mat x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  const std::vector<int> y{0, 0, 1, 1};
  const LogisticModel model = train_downstream(x, y, 1e-4);
  const Vec p = predict_proba(model, x);
  for (Index i = 0; i < 4; ++i) CHECK((p[i] > 0.5) == (y[static_cast<std::size_t>(i)] == 1));

  // heavy regularization shrinks weights toward zero and probabilities
  // toward the base rate
  Rng rng(29);
  Mat xr(40, 3);
  std::vector<int> yr(40);
  for (Index i = 0; i < 40; ++i) {
    for (Index j = 0; j < 3; ++j) xr(i, j) = rng.uniform01() < 0.5 ? 1.0 : 0.0;
    yr[static_cast<std::size_t>(i)] = rng.uniform01() < 0.25 ? 1 : 0;
  }
  const LogisticModel strong = train_downstream(xr, yr, 100.0);
  CHECK(strong.weights.norm() <= 1e-2);
  double base = 0.0;
  for (int v : yr) base += v;
  base /= 40.0;
  const Vec probs = predict_proba(strong, xr);
  for (Index i = 0; i < 40; ++i) CHECK(std::abs(probs[i] - base) <= 0.05);

  // 4-record hand dataset against the Newton oracle
  Mat xh(4, 2);
  xh << 1, 0, 0, 1, 1, 1, 0, 0;
  const std::vector<int> yh{1, 0, 1, 0};
  const LogisticModel gd = train_downstream(xh, yh, 0.1);
  Vec w_star;
  double b_star = 0.0;
  oracle_logistic(xh, yh, 0.1, w_star, b_star);
  CHECK((gd.weights - w_star).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(std::abs(gd.intercept - b_star) <= 1e-4);

  CHECK_THROWS_WITH_AS(train_downstream(xh, {1, 1, 1, 1}, 0.1),
                       doctest::Contains("SingleClassLabels"), Error);
}

TEST_CASE("metric report serializes canonically") {
  MetricReport report;
  report.values["cmd"] = 1.5;
  report.values["auroc"] = 0.75;
  report.sample_sizes["real"] = 100;
  report.seeds["attack"] = "7";
  report.flags["mmd_degenerate_bandwidth"] = false;
  const std::string a = report.to_json();
  const std::string b = report.to_json();
  CHECK(a == b);
  CHECK(a.find("\"auroc\"") < a.find("\"cmd\"")); // sorted keys

  report.values["bad"] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(report.to_json(), Error);
}
