#include "ehrd3pm/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ehrd3pm/error.hpp"

namespace ehrd3pm {

namespace {

double f1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  const std::int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

} // namespace

std::vector<int> sample_exposed(Index n_codes, int count, Rng& rng) {
  require(count >= 1 && count < n_codes, Err::ExposedTooLarge,
          "exposed set size must lie in [1, n_codes)");
  std::vector<int> all(static_cast<std::size_t>(n_codes));
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  std::vector<int> exposed(all.begin(), all.begin() + count);
  std::sort(exposed.begin(), exposed.end());
  return exposed;
}

double attribute_inference_risk(const CodeMatrix& real, const CodeMatrix& synth,
                                const std::vector<int>& exposed) {
  require(!synth.empty(), Err::EmptyMatrix, "empty synthetic set");
  require(!real.empty(), Err::EmptyMatrix, "empty real set");
  require(real.n_codes == synth.n_codes, Err::ShapeMismatch, "code counts differ");
  require(static_cast<Index>(exposed.size()) < real.n_codes, Err::ExposedTooLarge,
          "exposed set must leave at least one hidden attribute");
  std::vector<char> is_exposed(static_cast<std::size_t>(real.n_codes), 0);
  for (int idx : exposed) {
    require(idx >= 0 && idx < real.n_codes, Err::IndexOutOfRange, "exposed index out of range");
    is_exposed[static_cast<std::size_t>(idx)] = 1;
  }

  // nearest synthetic neighbor per real record on the exposed attributes
  std::vector<Index> neighbor(static_cast<std::size_t>(real.n_records));
  for (Index r = 0; r < real.n_records; ++r) {
    Index best = 0;
    Index best_dist = std::numeric_limits<Index>::max();
    for (Index s = 0; s < synth.n_records; ++s) {
      Index dist = 0;
      for (int idx : exposed) dist += real.bits(r, idx) != synth.bits(s, idx);
      if (dist < best_dist) {
        best_dist = dist;
        best = s;
      }
    }
    neighbor[static_cast<std::size_t>(r)] = best;
  }

  double weighted_f1 = 0.0;
  double weight_sum = 0.0;
  for (Index c = 0; c < real.n_codes; ++c) {
    if (is_exposed[static_cast<std::size_t>(c)]) continue;
    std::int64_t tp = 0, fp = 0, fn = 0, pos = 0;
    for (Index r = 0; r < real.n_records; ++r) {
      const bool truth = real.bits(r, c) != 0;
      const bool pred = synth.bits(neighbor[static_cast<std::size_t>(r)], c) != 0;
      pos += truth;
      if (pred && truth) ++tp;
      if (pred && !truth) ++fp;
      if (!pred && truth) ++fn;
    }
    const double prev = static_cast<double>(pos) / static_cast<double>(real.n_records);
    weighted_f1 += prev * f1_from_counts(tp, fp, fn);
    weight_sum += prev;
  }
  return weight_sum == 0.0 ? 0.0 : weighted_f1 / weight_sum;
}

double attribute_inference_risk(const CodeMatrix& real, const CodeMatrix& synth, int n_exposed,
                                Rng& rng) {
  const std::vector<int> exposed = sample_exposed(real.n_codes, n_exposed, rng);
  return attribute_inference_risk(real, synth, exposed);
}

double membership_inference_risk(const CodeMatrix& train, const CodeMatrix& holdout,
                                 const CodeMatrix& synth, double threshold) {
  require(!train.empty() && !holdout.empty() && !synth.empty(), Err::EmptyMatrix,
          "all three sets must be non-empty");
  require(train.n_codes == holdout.n_codes && train.n_codes == synth.n_codes, Err::ShapeMismatch,
          "code counts differ");

  const double threshold_sq = threshold * threshold;
  const auto predicted_member = [&](const BitMatrix& bits, Index r) {
    // minimum squared L2 distance to the synthetic set; binary rows make the
    // squared distance a Hamming count
    Index best = std::numeric_limits<Index>::max();
    for (Index s = 0; s < synth.n_records; ++s) {
      Index dist = 0;
      for (Index c = 0; c < synth.n_codes; ++c) dist += bits(r, c) != synth.bits(s, c);
      best = std::min(best, dist);
      if (best == 0) break;
    }
    return static_cast<double>(best) < threshold_sq;
  };

  std::int64_t tp = 0, fp = 0, fn = 0;
  for (Index r = 0; r < train.n_records; ++r) {
    if (predicted_member(train.bits, r))
      ++tp;
    else
      ++fn;
  }
  for (Index r = 0; r < holdout.n_records; ++r)
    if (predicted_member(holdout.bits, r)) ++fp;
  return f1_from_counts(tp, fp, fn);
}

} // namespace ehrd3pm
