#include "hypersci/balance.hpp"

#include <algorithm>
#include <cmath>

namespace hypersci {

namespace {

// Pairwise Euclidean distances between rows: sqrt(|a_i|^2 + |b_j|^2 - 2 a_i.b_j).
Var pairwise_dist(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (av.cols != bv.cols) throw ShapeMismatch("pairwise_dist: dimension mismatch");

    auto row_sq = [](Var x) {
        Var sq = mul(x, x);
        // row sums via matmul with a ones column
        Tape& tp = *x.tape;
        Var ones = tp.constant(Tensor::full(tp.value(x).cols, 1, 1.0));
        return matmul(sq, ones);  // (k, 1)
    };
    Var asq = row_sq(a);
    Var bsq = row_sq(b);
    Var cross = matmul(a, transpose(b));
    Var sq = add(outer_add(asq, bsq), scale(cross, -2.0));
    return sqrt_clamped(sq);
}

}  // namespace

Var wasserstein_sinkhorn(Var a, Var b, const BalanceConfig& cfg) {
    Tape& t = *a.tape;
    int k1 = t.value(a).rows;
    int k2 = t.value(b).rows;
    if (k1 < 1 || k2 < 1) throw EmptyGroup("wasserstein_sinkhorn: empty sample set");
    if (cfg.sinkhorn_epsilon <= 0.0 || cfg.sinkhorn_iters < 1)
        throw ShapeMismatch("wasserstein_sinkhorn: bad config");

    double eps = cfg.sinkhorn_epsilon;
    Var cost = pairwise_dist(a, b);
    Var neg_cost = scale(cost, -1.0 / eps);  // (k1, k2)

    double log_a = -std::log(static_cast<double>(k1));
    double log_b = -std::log(static_cast<double>(k2));
    Var log_a_col = t.constant(Tensor::full(k1, 1, log_a));
    Var log_b_col = t.constant(Tensor::full(k2, 1, log_b));

    // Log-domain potentials f (k1) and g (k2), uniform marginals.
    Var f = t.constant(Tensor::zeros(k1, 1));
    Var g = t.constant(Tensor::zeros(k2, 1));
    for (int it = 0; it < cfg.sinkhorn_iters; ++it) {
        // f_i = -eps * LSE_j((g_j - C_ij)/eps + log b_j)
        Var m1 = add_rowvec(neg_cost, transpose(add(scale(g, 1.0 / eps), log_b_col)));
        f = scale(logsumexp_rows(m1), -eps);
        // g_j = -eps * LSE_i((f_i - C_ij)/eps + log a_i)
        Var m2 = add_colvec(neg_cost, add(scale(f, 1.0 / eps), log_a_col));
        g = scale(logsumexp_cols(m2), -eps);
    }

    // Plan pi_ij = a_i b_j exp((f_i + g_j - C_ij)/eps); value = <pi, C>.
    Var log_plan = add_colvec(add_rowvec(neg_cost, transpose(add(scale(g, 1.0 / eps), log_b_col))),
                              add(scale(f, 1.0 / eps), log_a_col));
    Var plan = exp(log_plan);
    return sum_all(mul(plan, cost));
}

double wasserstein_sinkhorn(const Tensor& a, const Tensor& b, const BalanceConfig& cfg) {
    Tape tape;
    Var va = tape.constant(a);
    Var vb = tape.constant(b);
    return tape.value(wasserstein_sinkhorn(va, vb, cfg)).item();
}

double wasserstein_1d_exact(std::vector<double> a, std::vector<double> b) {
    if (a.size() != b.size()) throw SizeMismatch("wasserstein_1d_exact: sample sizes differ");
    if (a.empty()) throw EmptyGroup("wasserstein_1d_exact: empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

Var balancing_loss(Var z, Var p, const std::vector<int>& treatments,
                   const std::vector<int>& node_ids, const BalanceConfig& cfg) {
    std::vector<int> treated, control;
    for (int i : node_ids) {
        if (treatments[static_cast<size_t>(i)] != 0)
            treated.push_back(i);
        else
            control.push_back(i);
    }
    if (treated.empty() || control.empty())
        throw DegenerateGroups("balancing_loss: one treatment group is empty");

    Var wz = wasserstein_sinkhorn(slice_rows(z, treated), slice_rows(z, control), cfg);
    Var wp = wasserstein_sinkhorn(slice_rows(p, treated), slice_rows(p, control), cfg);
    return add(wz, wp);
}

}  // namespace hypersci
