#pragma once

#include <vector>

#include "ehrd3pm/code_matrix.hpp"
#include "ehrd3pm/rng.hpp"

namespace ehrd3pm {

// 1-nearest-neighbor attribute inference attack: for every real record the
// attacker finds the synthetic record closest in Hamming distance on the
// exposed attributes (ties -> lowest synthetic index) and predicts every
// hidden attribute from it. Returns the prevalence-weighted mean F1 over
// hidden attributes, in [0, 1].
double attribute_inference_risk(const CodeMatrix& real, const CodeMatrix& synth,
                                const std::vector<int>& exposed);

// convenience: sample an exposed attribute set of the given size uniformly
// without replacement, then attack
double attribute_inference_risk(const CodeMatrix& real, const CodeMatrix& synth, int n_exposed,
                                Rng& rng);

std::vector<int> sample_exposed(Index n_codes, int count, Rng& rng);

// Membership inference: pooled train (member) and holdout (non-member)
// records are predicted member iff their minimum L2 distance to the synthetic
// set is strictly below the threshold; returns the attack F1, in [0, 1].
double membership_inference_risk(const CodeMatrix& train, const CodeMatrix& holdout,
                                 const CodeMatrix& synth, double threshold = 3.0);

} // namespace ehrd3pm
