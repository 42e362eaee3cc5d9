#pragma once

#include <vector>

#include "hypersci/tape.hpp"

namespace hypersci {

struct BalanceConfig {
    double sinkhorn_epsilon = 0.05;
    int sinkhorn_iters = 20;
};

// Entropic-regularized OT cost between two sample sets (rows of A and B) with
// uniform marginals and Euclidean ground cost. The fixed number of Sinkhorn
// iterations is unrolled on the tape, so gradients are exact with respect to
// the computed value. Throws EmptyGroup when either set has no rows.
Var wasserstein_sinkhorn(Var a, Var b, const BalanceConfig& cfg);

// Value-only convenience on plain tensors.
double wasserstein_sinkhorn(const Tensor& a, const Tensor& b, const BalanceConfig& cfg);

// Exact empirical W1 for equal-size scalar samples: mean |a_(i) - b_(i)| over
// sorted order statistics. Test oracle; not differentiable.
double wasserstein_1d_exact(std::vector<double> a, std::vector<double> b);

// L_b = W(Z_treated, Z_control) + W(P_treated, P_control), groups taken from
// the given node ids. Throws DegenerateGroups when one group is empty.
Var balancing_loss(Var z, Var p, const std::vector<int>& treatments,
                   const std::vector<int>& node_ids, const BalanceConfig& cfg);

}  // namespace hypersci
