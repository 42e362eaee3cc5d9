#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hypersci/balance.hpp"
#include "hypersci/model.hpp"
#include "hypersci/simulate.hpp"

namespace hypersci {

struct TrainConfig {
    double alpha = 0.001;   // balancing weight
    double lambda = 0.01;   // L2 weight
    double lr = 1e-3;
    int epochs = 500;
    std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
    std::uint64_t seed = 0;
    Variant variant = Variant::Full;
    int attention_heads = 1;
    int conv_layers = 1;
    int d_z = 64;
    int d_p = 64;
    bool counterfactual_interference = false;
    BalanceConfig balance;
};

struct LossRecord {
    double factual = 0.0;
    double balance = 0.0;
    double total = 0.0;
};

struct MetricsReport {
    double pehe_sqrt = 0.0;
    double ate_err = 0.0;
    std::vector<LossRecord> loss_history;
    std::vector<double> tau_hat;  // all nodes
    std::uint64_t seed = 0;
    Variant variant = Variant::Full;
    double alpha_effective = 0.0;
    int best_epoch = -1;
    double best_val_mse = 0.0;
    bool balance_skipped = false;  // degenerate groups in the training split
};

struct Splits {
    std::vector<int> train, val, test;
};

// Seeded shuffle, sizes within 1 of n * ratio, disjoint cover of 0..n-1.
Splits split_nodes(int n, const std::array<double, 3>& ratios, std::uint64_t seed);

// (sqrt(PEHE), ATE error); throws SizeMismatch.
std::pair<double, double> metrics(const std::vector<double>& tau_hat,
                                  const std::vector<double>& tau_true);

struct LossGraph {
    Var total;
    Var factual;
    Var balance;   // only meaningful when has_balance
    bool has_balance = false;
    bool balance_skipped = false;
};

// Sum_{i in train} (y_i - yhat^{t_i}_i)^2 + alpha * L_b + lambda * |weights|^2.
// NoBalance forces the alpha term off; degenerate groups skip it with a
// warning. Throws NonFiniteValue when the result is not finite.
LossGraph total_loss_graph(Tape& tape, const ForwardGraph& fg, const ModelVars& vars,
                           const std::vector<bool>& weight_mask, const std::vector<double>& y,
                           const std::vector<int>& t, const std::vector<int>& train_ids,
                           const TrainConfig& cfg);

// Full-batch Adam for cfg.epochs; keeps the checkpoint with the best
// validation factual MSE; metrics are computed on the test split.
std::pair<ModelParams, MetricsReport> train(const SimDataset& data, const TrainConfig& cfg);

enum class Method { HyperSci, HyperSciP, HyperSciG, HyperSciNB, LeastSquares, Oracle };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Closed-form y ~ [x, t, 1] fit on the training split; tau_hat is the
// treatment coefficient (constant across nodes).
std::vector<double> least_squares_tau(const SimDataset& data, const std::vector<int>& train_ids);

struct RunResult {
    Method method = Method::HyperSci;
    std::uint64_t seed = 0;
    double pehe_sqrt = 0.0;
    double ate_err = 0.0;
};

struct MethodSummary {
    Method method = Method::HyperSci;
    double pehe_mean = 0.0, pehe_se = 0.0;
    double ate_mean = 0.0, ate_se = 0.0;
    int n_runs = 0;
};

struct ComparisonResult {
    std::vector<RunResult> runs;          // seed-major, method order preserved
    std::vector<MethodSummary> summary;   // method order preserved
};

using DatasetGenerator = std::function<SimDataset(std::uint64_t seed)>;

// Trains/evaluates every (seed, method) pair and aggregates mean +- standard
// error. Seeds may run on parallel threads; results are position-keyed so the
// output is independent of scheduling.
ComparisonResult run_comparison(const DatasetGenerator& gen, const std::vector<Method>& methods,
                                const std::vector<std::uint64_t>& seeds, const TrainConfig& base_cfg,
                                int threads = 1);

enum class SweepKind { Beta, K, Alpha, Dim, Heads, Lambda };

std::string sweep_kind_name(SweepKind k);
SweepKind sweep_kind_from_name(const std::string& name);

struct SweepPoint {
    double param = 0.0;
    ComparisonResult result;
};

std::vector<SweepPoint> sweep(SweepKind kind, const std::vector<double>& grid,
                              const GeneratorSpec& gen_spec, const SimConfig& sim_cfg,
                              const TrainConfig& train_cfg, const std::vector<Method>& methods,
                              const std::vector<std::uint64_t>& seeds, int threads = 1);

// Nodes bucketed by neighborhood-size quantile x homophily-ratio bin; cell
// value is the mean |tau_hyper - tau_proj|. Isolated nodes are skipped.
struct CaseStudyGrid {
    int bins = 6;
    Tensor mean_abs_diff;             // bins x bins; 0 where empty
    Tensor counts;                    // bins x bins
    std::vector<double> size_edges;   // quantile thresholds (bins - 1 values)
};

CaseStudyGrid case_study_grid(const SimDataset& data, const std::vector<double>& tau_hyper,
                              const std::vector<double>& tau_proj, int bins = 6);

}  // namespace hypersci
