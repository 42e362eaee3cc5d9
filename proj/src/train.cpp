#include "hypersci/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "hypersci/adam.hpp"
#include "hypersci/rng.hpp"

namespace hypersci {

Splits split_nodes(int n, const std::array<double, 3>& ratios, std::uint64_t seed) {
    for (double r : ratios)
        if (r <= 0.0) throw ConfigError("split_nodes: ratios must be positive");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
        throw ConfigError("split_nodes: ratios must sum to 1");

    std::vector<int> ids(static_cast<size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(derive_seed(seed, 201));
    rng.shuffle(ids);

    int n_train = static_cast<int>(std::floor(ratios[0] * n + 0.5));
    int n_val = static_cast<int>(std::floor(ratios[1] * n + 0.5));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);

    Splits s;
    s.train.assign(ids.begin(), ids.begin() + n_train);
    s.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    s.test.assign(ids.begin() + n_train + n_val, ids.end());
    return s;
}

std::pair<double, double> metrics(const std::vector<double>& tau_hat,
                                  const std::vector<double>& tau_true) {
    if (tau_hat.size() != tau_true.size() || tau_hat.empty())
        throw SizeMismatch("metrics: estimate/truth sizes differ or empty");
    double sq = 0.0, mean_hat = 0.0, mean_true = 0.0;
    for (size_t i = 0; i < tau_hat.size(); ++i) {
        double d = tau_true[i] - tau_hat[i];
        sq += d * d;
        mean_hat += tau_hat[i];
        mean_true += tau_true[i];
    }
    double n = static_cast<double>(tau_hat.size());
    return {std::sqrt(sq / n), std::abs(mean_true / n - mean_hat / n)};
}

LossGraph total_loss_graph(Tape& tape, const ForwardGraph& fg, const ModelVars& vars,
                           const std::vector<bool>& weight_mask, const std::vector<double>& y,
                           const std::vector<int>& t, const std::vector<int>& train_ids,
                           const TrainConfig& cfg) {
    if (train_ids.empty()) throw SizeMismatch("total_loss: empty training split");
    int n = tape.value(fg.yhat1).rows;
    if (static_cast<int>(y.size()) != n || static_cast<int>(t.size()) != n)
        throw ShapeMismatch("total_loss: Y/T length mismatch");

    Tensor t1(n, 1), t0(n, 1);
    for (int i = 0; i < n; ++i) {
        t1(i, 0) = t[static_cast<size_t>(i)] != 0 ? 1.0 : 0.0;
        t0(i, 0) = 1.0 - t1(i, 0);
    }
    Var y_fact = add(mul_const(fg.yhat1, t1), mul_const(fg.yhat0, t0));

    Tensor y_train(static_cast<int>(train_ids.size()), 1);
    for (size_t k = 0; k < train_ids.size(); ++k)
        y_train(static_cast<int>(k), 0) = y[static_cast<size_t>(train_ids[k])];
    Var resid = sub(slice_rows(y_fact, train_ids), tape.constant(y_train));

    LossGraph lg;
    lg.factual = sum_sq(resid);
    lg.total = lg.factual;

    bool want_balance = cfg.variant != Variant::NoBalance && cfg.alpha != 0.0;
    if (want_balance) {
        try {
            lg.balance = balancing_loss(fg.z, fg.p, t, train_ids, cfg.balance);
            lg.has_balance = true;
            lg.total = add(lg.total, scale(lg.balance, cfg.alpha));
        } catch (const DegenerateGroups&) {
            lg.balance_skipped = true;
        }
    }

    if (cfg.lambda != 0.0) {
        Var l2{};
        bool first = true;
        for (size_t k = 0; k < vars.flat.size(); ++k) {
            if (!weight_mask[k]) continue;  // biases excluded
            Var s = sum_sq(vars.flat[k]);
            l2 = first ? s : add(l2, s);
            first = false;
        }
        if (!first) lg.total = add(lg.total, scale(l2, cfg.lambda));
    }

    if (!std::isfinite(tape.value(lg.total).item()))
        throw NonFiniteValue("total_loss: loss is not finite");
    return lg;
}

namespace {

ModelConfig model_config_for(const SimDataset& data, const TrainConfig& cfg) {
    ModelConfig mc;
    mc.d_in = data.x.cols;
    mc.d_z = cfg.d_z;
    mc.d_p = cfg.d_p;
    mc.d_a = cfg.d_z;
    mc.attention_heads = cfg.attention_heads;
    mc.conv_layers = cfg.conv_layers;
    mc.counterfactual_interference = cfg.counterfactual_interference;
    return mc;
}

double factual_mse(const Tensor& yhat1, const Tensor& yhat0, const std::vector<double>& y,
                   const std::vector<int>& t, const std::vector<int>& ids) {
    if (ids.empty()) return 0.0;
    double s = 0.0;
    for (int i : ids) {
        size_t ui = static_cast<size_t>(i);
        double pred = t[ui] != 0 ? yhat1(i, 0) : yhat0(i, 0);
        double d = y[ui] - pred;
        s += d * d;
    }
    return s / static_cast<double>(ids.size());
}

}  // namespace

std::pair<ModelParams, MetricsReport> train(const SimDataset& data, const TrainConfig& cfg) {
    Splits splits = split_nodes(data.n(), cfg.split_ratios, cfg.seed);
    ModelParams params = init_params(model_config_for(data, cfg), derive_seed(cfg.seed, 301));
    InterferenceStructure st = build_structure(data.h, cfg.variant);
    AdamState adam(cfg.lr);

    MetricsReport report;
    report.seed = cfg.seed;
    report.variant = cfg.variant;
    report.alpha_effective = cfg.variant == Variant::NoBalance ? 0.0 : cfg.alpha;
    report.loss_history.reserve(static_cast<size_t>(cfg.epochs));

    const std::vector<int>& val_ids = splits.val.empty() ? splits.train : splits.val;
    ModelParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    bool warned_balance = false;

    Tape tape;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        tape.reset();
        ModelVars vars = bind_params(tape, params, /*trainable=*/true);
        ForwardGraph fg = forward_graph(tape, vars, st, data.x, data.t);

        LossGraph lg;
        try {
            lg = total_loss_graph(tape, fg, vars, params.weight_mask(), data.y, data.t,
                                  splits.train, cfg);
        } catch (const NonFiniteValue&) {
            throw DivergenceDetected("training diverged at epoch " + std::to_string(epoch));
        }
        if (lg.balance_skipped && !warned_balance) {
            std::cerr << "warning: training split has a single treatment group; "
                         "balancing term skipped\n";
            warned_balance = true;
            report.balance_skipped = true;
        }

        LossRecord rec;
        rec.factual = tape.value(lg.factual).item();
        rec.balance = lg.has_balance ? tape.value(lg.balance).item() : 0.0;
        rec.total = tape.value(lg.total).item();
        report.loss_history.push_back(rec);

        // Validation uses the same (pre-update) forward values, so a snapshot
        // of params matches what was scored.
        double val_mse = factual_mse(tape.value(fg.yhat1), tape.value(fg.yhat0), data.y, data.t,
                                     val_ids);
        if (val_mse < best_val) {
            best_val = val_mse;
            best = params;
            report.best_epoch = epoch;
        }

        tape.backward(lg.total);
        std::vector<Tensor*> tensors = params.tensors();
        std::vector<Tensor> grads;
        grads.reserve(tensors.size());
        for (const Var& v : vars.flat) grads.push_back(tape.grad(v));
        adam.step(tensors, grads);
    }

    report.best_val_mse = best_val;

    ForwardOutput out = forward(best, st, data.x, data.t);
    report.tau_hat = cfg.counterfactual_interference
                         ? estimate_ite_flip(best, st, data.x, data.t, out)
                         : estimate_ite(out);

    std::vector<double> tau_hat_test, tau_true_test;
    tau_hat_test.reserve(splits.test.size());
    tau_true_test.reserve(splits.test.size());
    for (int i : splits.test) {
        tau_hat_test.push_back(report.tau_hat[static_cast<size_t>(i)]);
        tau_true_test.push_back(data.tau_true[static_cast<size_t>(i)]);
    }
    auto [pehe, ate] = metrics(tau_hat_test, tau_true_test);
    report.pehe_sqrt = pehe;
    report.ate_err = ate;
    return {std::move(best), std::move(report)};
}

std::string method_name(Method m) {
    switch (m) {
        case Method::HyperSci: return "hypersci";
        case Method::HyperSciP: return "hypersci_p";
        case Method::HyperSciG: return "hypersci_g";
        case Method::HyperSciNB: return "hypersci_nb";
        case Method::LeastSquares: return "least_squares";
        case Method::Oracle: return "oracle";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "hypersci") return Method::HyperSci;
    if (name == "hypersci_p") return Method::HyperSciP;
    if (name == "hypersci_g") return Method::HyperSciG;
    if (name == "hypersci_nb") return Method::HyperSciNB;
    if (name == "least_squares") return Method::LeastSquares;
    if (name == "oracle") return Method::Oracle;
    throw ConfigError("unknown method '" + name + "'");
}

namespace {

// Gaussian elimination with partial pivoting; a tiny ridge keeps a collinear
// design solvable.
std::vector<double> solve_normal_equations(Tensor a, std::vector<double> b) {
    int n = a.rows;
    for (int i = 0; i < n; ++i) a(i, i) += 1e-10;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
            std::swap(b[static_cast<size_t>(col)], b[static_cast<size_t>(pivot)]);
        }
        double diag = a(col, col);
        if (diag == 0.0) throw NonFiniteValue("least squares: singular system");
        for (int r = col + 1; r < n; ++r) {
            double f = a(r, col) / diag;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
        }
    }
    std::vector<double> x(static_cast<size_t>(n));
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= a(r, c) * x[static_cast<size_t>(c)];
        x[static_cast<size_t>(r)] = s / a(r, r);
    }
    return x;
}

}  // namespace

std::vector<double> least_squares_tau(const SimDataset& data, const std::vector<int>& train_ids) {
    int d = data.x.cols;
    int p = d + 2;  // covariates, treatment, intercept
    Tensor design(static_cast<int>(train_ids.size()), p);
    std::vector<double> y_train(train_ids.size());
    for (size_t k = 0; k < train_ids.size(); ++k) {
        int i = train_ids[k];
        for (int j = 0; j < d; ++j) design(static_cast<int>(k), j) = data.x(i, j);
        design(static_cast<int>(k), d) = data.t[static_cast<size_t>(i)];
        design(static_cast<int>(k), d + 1) = 1.0;
        y_train[k] = data.y[static_cast<size_t>(i)];
    }
    Tensor ata = matmul_tn(design, design);
    std::vector<double> aty(static_cast<size_t>(p), 0.0);
    for (int r = 0; r < design.rows; ++r)
        for (int c = 0; c < p; ++c) aty[static_cast<size_t>(c)] += design(r, c) * y_train[static_cast<size_t>(r)];
    std::vector<double> coef = solve_normal_equations(ata, aty);
    // Prediction at t=1 minus t=0 is the treatment coefficient for every node.
    return std::vector<double>(static_cast<size_t>(data.n()), coef[static_cast<size_t>(d)]);
}

namespace {

RunResult evaluate_method(const SimDataset& data, Method method, std::uint64_t seed,
                          const TrainConfig& base_cfg) {
    RunResult rr;
    rr.method = method;
    rr.seed = seed;

    std::vector<double> tau_hat;
    if (method == Method::Oracle) {
        tau_hat = data.tau_true;
    } else if (method == Method::LeastSquares) {
        Splits splits = split_nodes(data.n(), base_cfg.split_ratios, seed);
        tau_hat = least_squares_tau(data, splits.train);
    } else {
        TrainConfig cfg = base_cfg;
        cfg.seed = seed;
        switch (method) {
            case Method::HyperSci: cfg.variant = Variant::Full; break;
            case Method::HyperSciP: cfg.variant = Variant::ProjectedHyper; break;
            case Method::HyperSciG: cfg.variant = Variant::GraphConv; break;
            case Method::HyperSciNB: cfg.variant = Variant::NoBalance; break;
            default: break;
        }
        auto [params, report] = train(data, cfg);
        rr.pehe_sqrt = report.pehe_sqrt;
        rr.ate_err = report.ate_err;
        return rr;
    }

    // Oracle / least squares are scored on the same test split as the models.
    Splits splits = split_nodes(data.n(), base_cfg.split_ratios, seed);
    std::vector<double> hat, truth;
    for (int i : splits.test) {
        hat.push_back(tau_hat[static_cast<size_t>(i)]);
        truth.push_back(data.tau_true[static_cast<size_t>(i)]);
    }
    auto [pehe, ate] = metrics(hat, truth);
    rr.pehe_sqrt = pehe;
    rr.ate_err = ate;
    return rr;
}

MethodSummary summarize(Method method, const std::vector<RunResult>& runs) {
    MethodSummary s;
    s.method = method;
    std::vector<double> pehe, ate;
    for (const RunResult& r : runs) {
        if (r.method != method) continue;
        pehe.push_back(r.pehe_sqrt);
        ate.push_back(r.ate_err);
    }
    s.n_runs = static_cast<int>(pehe.size());
    auto mean_se = [](const std::vector<double>& v) {
        double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double se = 0.0;
        if (v.size() > 1) {
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size() - 1);
            se = std::sqrt(var / static_cast<double>(v.size()));
        }
        return std::pair<double, double>{mean, se};
    };
    if (s.n_runs > 0) {
        std::tie(s.pehe_mean, s.pehe_se) = mean_se(pehe);
        std::tie(s.ate_mean, s.ate_se) = mean_se(ate);
    }
    return s;
}

}  // namespace

ComparisonResult run_comparison(const DatasetGenerator& gen, const std::vector<Method>& methods,
                                const std::vector<std::uint64_t>& seeds, const TrainConfig& base_cfg,
                                int threads) {
    if (seeds.empty()) throw ConfigError("run_comparison: no seeds");
    if (methods.empty()) throw ConfigError("run_comparison: no methods");

    std::vector<RunResult> runs(seeds.size() * methods.size());
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto worker = [&]() {
        for (;;) {
            size_t s = next.fetch_add(1);
            if (s >= seeds.size()) return;
            try {
                SimDataset data = gen(seeds[s]);
                for (size_t m = 0; m < methods.size(); ++m)
                    runs[s * methods.size() + m] =
                        evaluate_method(data, methods[m], seeds[s], base_cfg);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(seeds.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    ComparisonResult result;
    result.runs = std::move(runs);
    for (Method m : methods) result.summary.push_back(summarize(m, result.runs));
    return result;
}

std::string sweep_kind_name(SweepKind k) {
    switch (k) {
        case SweepKind::Beta: return "beta";
        case SweepKind::K: return "k";
        case SweepKind::Alpha: return "alpha";
        case SweepKind::Dim: return "dim";
        case SweepKind::Heads: return "heads";
        case SweepKind::Lambda: return "lambda";
    }
    return "?";
}

SweepKind sweep_kind_from_name(const std::string& name) {
    if (name == "beta") return SweepKind::Beta;
    if (name == "k") return SweepKind::K;
    if (name == "alpha") return SweepKind::Alpha;
    if (name == "dim") return SweepKind::Dim;
    if (name == "heads") return SweepKind::Heads;
    if (name == "lambda") return SweepKind::Lambda;
    throw ConfigError("unknown sweep kind '" + name + "'");
}

std::vector<SweepPoint> sweep(SweepKind kind, const std::vector<double>& grid,
                              const GeneratorSpec& gen_spec, const SimConfig& sim_cfg,
                              const TrainConfig& train_cfg, const std::vector<Method>& methods,
                              const std::vector<std::uint64_t>& seeds, int threads) {
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    std::vector<SweepPoint> points;
    for (double g : grid) {
        SimConfig sim = sim_cfg;
        TrainConfig tc = train_cfg;
        DatasetGenerator gen;
        switch (kind) {
            case SweepKind::Beta:
                sim.beta = g;
                gen = [gen_spec, sim](std::uint64_t seed) {
                    SimConfig c = sim;
                    c.seed = seed;
                    return generate_dataset(gen_spec, c);
                };
                break;
            case SweepKind::K:
                gen = [gen_spec, sim, g](std::uint64_t seed) {
                    SimConfig c = sim;
                    c.seed = seed;
                    Hypergraph h = gen_random_hypergraph(gen_spec, seed);
                    Hypergraph filtered = filter_by_edge_size(h, static_cast<int>(g));
                    SimWeights w = draw_weights(c);
                    Tensor x = gen_covariates(gen_spec.n, c.d, seed);
                    std::vector<int> t = gen_treatments(x, w.vt, seed);
                    return simulate_outcomes(filtered, x, t, c);
                };
                break;
            case SweepKind::Alpha: tc.alpha = g; break;
            case SweepKind::Dim: tc.d_z = tc.d_p = static_cast<int>(g); break;
            case SweepKind::Heads: tc.attention_heads = static_cast<int>(g); break;
            case SweepKind::Lambda: tc.lambda = g; break;
        }
        if (!gen) {
            gen = [gen_spec, sim](std::uint64_t seed) {
                SimConfig c = sim;
                c.seed = seed;
                return generate_dataset(gen_spec, c);
            };
        }
        SweepPoint point;
        point.param = g;
        point.result = run_comparison(gen, methods, seeds, tc, threads);
        points.push_back(std::move(point));
    }
    return points;
}

CaseStudyGrid case_study_grid(const SimDataset& data, const std::vector<double>& tau_hyper,
                              const std::vector<double>& tau_proj, int bins) {
    if (tau_hyper.size() != static_cast<size_t>(data.n()) ||
        tau_proj.size() != static_cast<size_t>(data.n()))
        throw SizeMismatch("case_study_grid: estimate lengths != node count");

    std::vector<int> nodes;
    std::vector<double> sizes;
    for (int i = 0; i < data.n(); ++i) {
        auto nbrs = neighborhood(data.h, i);
        if (nbrs.empty()) continue;
        nodes.push_back(i);
        sizes.push_back(static_cast<double>(nbrs.size()));
    }

    CaseStudyGrid grid;
    grid.bins = bins;
    grid.mean_abs_diff = Tensor(bins, bins);
    grid.counts = Tensor(bins, bins);
    if (nodes.empty()) return grid;

    std::vector<double> sorted = sizes;
    std::sort(sorted.begin(), sorted.end());
    for (int b = 1; b < bins; ++b) {
        size_t idx = static_cast<size_t>(b) * sorted.size() / static_cast<size_t>(bins);
        grid.size_edges.push_back(sorted[std::min(idx, sorted.size() - 1)]);
    }

    for (size_t k = 0; k < nodes.size(); ++k) {
        int i = nodes[k];
        int sbin = 0;
        while (sbin < bins - 1 && sizes[k] >= grid.size_edges[static_cast<size_t>(sbin)]) ++sbin;
        double r = homophily_ratio(data.h, data.t, i);
        int rbin = std::min(static_cast<int>(r * bins), bins - 1);
        double diff = std::abs(tau_hyper[static_cast<size_t>(i)] - tau_proj[static_cast<size_t>(i)]);
        grid.counts(sbin, rbin) += 1.0;
        grid.mean_abs_diff(sbin, rbin) += diff;
    }
    for (int a = 0; a < bins; ++a)
        for (int b = 0; b < bins; ++b)
            if (grid.counts(a, b) > 0.0) grid.mean_abs_diff(a, b) /= grid.counts(a, b);
    return grid;
}

}  // namespace hypersci
