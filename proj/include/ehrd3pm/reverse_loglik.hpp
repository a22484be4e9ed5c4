#pragma once

#include "ehrd3pm/checkpoint.hpp"
#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

// Exact log p(x0) under the learned reverse chain, by brute-force summation
// over every trajectory x_1..x_T of the K^N state space. Only feasible at
// enumeration scale; rejects instances beyond N <= 2, T <= 3, K = 2.
double exact_reverse_loglik(const Checkpoint& ckpt, const TokenRow& x0);

// Exact full-sum negative ELBO for the same instance: L0 + sum_{t>=2} L_t +
// L_T with every expectation over q(x_t | x0) summed exactly.
double exact_negative_elbo(const Checkpoint& ckpt, const TokenRow& x0);

} // namespace ehrd3pm
